use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::types::{Corpus, DocId, QueryId};
use crate::error::{Error, Result};

/// Graded relevance judgements keyed by dense ids.
#[derive(Debug, Clone, Default)]
pub struct Relevance {
    grades: HashMap<(QueryId, DocId), u8>,
}

impl Relevance {
    pub fn insert(&mut self, q: QueryId, d: DocId, grade: u8) {
        self.grades.insert((q, d), grade);
    }

    pub fn grade(&self, q: QueryId, d: DocId) -> Option<u8> {
        self.grades.get(&(q, d)).copied()
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

/// Reads `qid<TAB>did<TAB>grade` lines. Ids unknown to `corpus` are skipped.
pub fn parse_relevance<R: BufRead>(reader: R, corpus: &Corpus) -> Result<Relevance> {
    let mut rel = Relevance::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let grade: u8 = fields[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("grade {:?} is not an integer", fields[2])))?;
        if grade > 4 {
            return Err(bad(format!("grade {grade} outside 0..=4")));
        }
        if let (Some(q), Some(d)) = (corpus.queries.get(fields[0]), corpus.docs.get(fields[1])) {
            rel.insert(QueryId(q), DocId(d), grade);
        }
    }
    Ok(rel)
}

/// Writes judgements keyed by raw tokens, sorted for stable output.
pub fn write_raw_relevance<W: Write>(mut w: W, rows: &[(String, String, u8)]) -> Result<()> {
    let mut rows = rows.to_vec();
    rows.sort();
    for (q, d, g) in rows {
        writeln!(w, "{q}\t{d}\t{g}")?;
    }
    Ok(())
}
