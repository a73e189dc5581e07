use std::fmt::Write as _;

use super::metrics::{ClickMetrics, RankingMetrics, NDCG_CUTOFFS};
use crate::error::{Error, Result};
use crate::session_log::{Relevance, Session};

/// Model outputs for one session, one entry per impression in session order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionScores {
    /// Conditional click probability.
    pub click: Vec<f64>,
    /// Score used to rank documents for NDCG.
    pub rank_score: Vec<f64>,
}

/// Click and ranking statistics over a set of sessions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsAccumulator {
    pub sessions: usize,
    pub clicks: ClickMetrics,
    pub ranking: RankingMetrics,
}

impl MetricsAccumulator {
    pub fn add_session(
        &mut self,
        session: &Session,
        scores: &SessionScores,
        relevance: Option<&Relevance>,
    ) -> Result<()> {
        let n = session.impression_count();
        if scores.click.len() != n || scores.rank_score.len() != n {
            return Err(Error::invalid(format!(
                "session {}: {} impressions but {} predictions",
                session.session_id,
                n,
                scores.click.len()
            )));
        }
        self.sessions += 1;
        let mut i = 0;
        for q in &session.queries {
            let start = i;
            for imp in &q.impressions {
                self.clicks.add(imp.position as usize, scores.click[i], imp.click)?;
                i += 1;
            }
            if let Some(rel) = relevance {
                let grades: Vec<u8> = q
                    .impressions
                    .iter()
                    .map(|imp| rel.grade(q.query, imp.doc).unwrap_or(0))
                    .collect();
                self.ranking.add(&scores.rank_score[start..i], &grades)?;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.sessions += other.sessions;
        self.clicks.merge(&other.clicks);
        self.ranking.merge(&other.ranking);
    }

    pub fn report(&self, partition: &str) -> MetricsReport {
        MetricsReport {
            partition: partition.to_owned(),
            sessions: self.sessions,
            impressions: self.clicks.impressions(),
            ll: self.clicks.log_likelihood(),
            ppl_by_rank: self.clicks.perplexity_by_rank(),
            ppl: self.clicks.perplexity(),
            ndcg: self.ranking.ndcg(),
        }
    }
}

/// Accumulates metrics for `sessions` with matching `scores`.
pub fn accumulate(
    sessions: &[Session],
    scores: &[SessionScores],
    relevance: Option<&Relevance>,
) -> Result<MetricsAccumulator> {
    if sessions.len() != scores.len() {
        return Err(Error::invalid(format!(
            "{} sessions but {} score sets",
            sessions.len(),
            scores.len()
        )));
    }
    let mut acc = MetricsAccumulator::default();
    for (s, sc) in sessions.iter().zip(scores) {
        acc.add_session(s, sc, relevance)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub partition: String,
    pub sessions: usize,
    pub impressions: usize,
    pub ll: Option<f64>,
    /// `PPL@r` for `r = 1..`, `None` where the rank has no impressions.
    pub ppl_by_rank: Vec<Option<f64>>,
    pub ppl: Option<f64>,
    pub ndcg: Vec<(usize, f64)>,
}

impl MetricsReport {
    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ndcg.iter().find(|&&(c, _)| c == k).map(|&(_, v)| v)
    }

    /// Machine-readable lines `partition metric value`.
    pub fn to_kv_lines(&self) -> String {
        let mut out = String::new();
        let p = &self.partition;
        let _ = writeln!(out, "{p} sessions {}", self.sessions);
        let _ = writeln!(out, "{p} impressions {}", self.impressions);
        if let Some(ll) = self.ll {
            let _ = writeln!(out, "{p} LL {ll}");
        }
        if let Some(ppl) = self.ppl {
            let _ = writeln!(out, "{p} PPL {ppl}");
        }
        for (r, v) in self.ppl_by_rank.iter().enumerate() {
            if let Some(v) = v {
                let _ = writeln!(out, "{p} PPL@{} {v}", r + 1);
            }
        }
        for &(k, v) in &self.ndcg {
            let _ = writeln!(out, "{p} NDCG@{k} {v}");
        }
        out
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"))
}

/// Human-readable table with one row per report.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut header = vec![
        "partition".to_owned(),
        "sessions".to_owned(),
        "LL".to_owned(),
        "PPL".to_owned(),
    ];
    header.extend(NDCG_CUTOFFS.iter().map(|k| format!("NDCG@{k}")));
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![
                r.partition.clone(),
                r.sessions.to_string(),
                cell(r.ll),
                cell(r.ppl),
            ];
            row.extend(NDCG_CUTOFFS.iter().map(|&k| cell(r.ndcg_at(k))));
            row
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (v, &w))| if i == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}
