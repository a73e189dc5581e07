//! Canonical newline-delimited JSON session log.
//!
//! One session per line:
//!
//! ```text
//! {"sid":"s1","queries":[{"qid":"q1","docs":[{"did":"d1","pos":1,"vert":"v0","click":1}]}]}
//! ```
//!
//! `vert` may be omitted; such impressions share a single vertical index.

use std::io::{BufRead, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use super::types::{Corpus, DocId, ImpressionRecord, QueryId, QueryRecord, Session, VerticalId};
use crate::error::{Error, Result};

/// Vertical token used when a record carries no `vert` field.
pub const SHARED_VERTICAL: &str = "";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSession {
    pub sid: String,
    pub queries: Vec<RawQuery>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQuery {
    pub qid: String,
    pub docs: Vec<RawDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDoc {
    pub did: String,
    pub pos: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vert: Option<String>,
    pub click: u8,
}

impl RawSession {
    /// Canonical form: documents sorted by position.
    pub fn canonical(&self) -> RawSession {
        let mut out = self.clone();
        for q in &mut out.queries {
            q.docs.sort_by_key(|d| d.pos);
        }
        out
    }
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParsedLog {
    pub sessions: Vec<Session>,
    pub rejected: Vec<LineError>,
    /// Line numbers of sessions dropped for having no queries.
    pub dropped_empty: Vec<usize>,
}

impl ParsedLog {
    /// First rejection as an error, if any.
    pub fn into_strict(self) -> Result<Vec<Session>> {
        match self.rejected.into_iter().next() {
            Some(e) => Err(Error::Parse {
                line: e.line,
                message: e.message,
            }),
            None => Ok(self.sessions),
        }
    }
}

fn validate(raw: &RawSession) -> std::result::Result<(), String> {
    for (qi, q) in raw.queries.iter().enumerate() {
        if q.docs.is_empty() {
            return Err(format!("query {} ({}) has no documents", qi, q.qid));
        }
        let m = q.docs.len() as u32;
        let mut seen = vec![false; q.docs.len()];
        for d in &q.docs {
            if d.pos == 0 || d.pos > m {
                return Err(format!(
                    "query {}: position {} outside 1..={}",
                    q.qid, d.pos, m
                ));
            }
            let slot = &mut seen[(d.pos - 1) as usize];
            if *slot {
                return Err(format!("query {}: duplicate position {}", q.qid, d.pos));
            }
            *slot = true;
            if d.click > 1 {
                return Err(format!("doc {}: click must be 0 or 1, got {}", d.did, d.click));
            }
        }
    }
    Ok(())
}

impl Corpus {
    /// Validates a raw session and assigns dense ids. Ids are only interned
    /// once the whole record is known to be valid.
    pub fn ingest(&mut self, raw: &RawSession) -> std::result::Result<Session, String> {
        validate(raw)?;
        let queries = raw
            .queries
            .iter()
            .map(|q| {
                let query = QueryId(self.queries.intern(&q.qid));
                let mut impressions: Vec<ImpressionRecord> = q
                    .docs
                    .iter()
                    .map(|d| ImpressionRecord {
                        doc: DocId(self.docs.intern(&d.did)),
                        position: d.pos,
                        vertical: VerticalId(
                            self.verticals
                                .intern(d.vert.as_deref().unwrap_or(SHARED_VERTICAL)),
                        ),
                        click: d.click == 1,
                    })
                    .collect();
                impressions.sort_by_key(|imp| imp.position);
                QueryRecord { query, impressions }
            })
            .collect();
        Ok(Session {
            session_id: raw.sid.clone(),
            queries,
        })
    }

    /// Inverse of [`Corpus::ingest`].
    pub fn to_raw(&self, session: &Session) -> RawSession {
        RawSession {
            sid: session.session_id.clone(),
            queries: session
                .queries
                .iter()
                .map(|q| RawQuery {
                    qid: self.queries.token(q.query.0).unwrap_or_default().to_owned(),
                    docs: q
                        .impressions
                        .iter()
                        .map(|imp| {
                            let vert = self.verticals.token(imp.vertical.0).unwrap_or_default();
                            RawDoc {
                                did: self.docs.token(imp.doc.0).unwrap_or_default().to_owned(),
                                pos: imp.position,
                                vert: (vert != SHARED_VERTICAL).then(|| vert.to_owned()),
                                click: imp.click as u8,
                            }
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Parses a canonical session log, interning ids into `corpus`.
///
/// Malformed lines are collected in [`ParsedLog::rejected`] with their
/// 1-based line numbers; I/O failures abort.
pub fn parse_log<R: BufRead>(reader: R, corpus: &mut Corpus) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSession = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                out.rejected.push(LineError {
                    line: line_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if raw.queries.is_empty() {
            warn!("line {line_no}: session {} has no queries, dropped", raw.sid);
            out.dropped_empty.push(line_no);
            continue;
        }
        match corpus.ingest(&raw) {
            Ok(s) => out.sessions.push(s),
            Err(message) => out.rejected.push(LineError {
                line: line_no,
                message,
            }),
        }
    }
    Ok(out)
}

pub fn write_raw_log<'a, W: Write>(
    mut writer: W,
    sessions: impl IntoIterator<Item = &'a RawSession>,
) -> Result<()> {
    for s in sessions {
        serde_json::to_writer(&mut writer, s)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Serializes sessions in canonical form.
pub fn write_log<W: Write>(writer: W, sessions: &[Session], corpus: &Corpus) -> Result<()> {
    let raw: Vec<RawSession> = sessions.iter().map(|s| corpus.to_raw(s)).collect();
    write_raw_log(writer, &raw)
}
