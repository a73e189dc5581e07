use std::collections::HashSet;

use super::types::Session;
use crate::error::{Error, Result};

/// Fraction of (query, document) pairs never shown together:
/// `1 - |observed pairs| / (|queries| * |docs|)`.
pub fn sparsity_ratio(train: &[Session]) -> Result<f64> {
    let mut queries = HashSet::new();
    let mut docs = HashSet::new();
    let mut pairs = HashSet::new();
    for s in train {
        for q in &s.queries {
            queries.insert(q.query);
            for imp in &q.impressions {
                docs.insert(imp.doc);
                pairs.insert((q.query, imp.doc));
            }
        }
    }
    if queries.is_empty() || docs.is_empty() {
        return Err(Error::invalid("sparsity of an empty session set"));
    }
    let possible = queries.len() as f64 * docs.len() as f64;
    Ok(1.0 - pairs.len() as f64 / possible)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogStats {
    pub sessions: usize,
    pub queries: usize,
    pub impressions: usize,
    pub clicks: usize,
    pub distinct_queries: usize,
    pub distinct_docs: usize,
    pub sparsity: f64,
}

pub fn log_stats(sessions: &[Session]) -> Result<LogStats> {
    let mut q_ids = HashSet::new();
    let mut d_ids = HashSet::new();
    let (mut queries, mut impressions, mut clicks) = (0, 0, 0);
    for s in sessions {
        for q in &s.queries {
            queries += 1;
            q_ids.insert(q.query);
            for imp in &q.impressions {
                impressions += 1;
                clicks += imp.click as usize;
                d_ids.insert(imp.doc);
            }
        }
    }
    Ok(LogStats {
        sessions: sessions.len(),
        queries,
        impressions,
        clicks,
        distinct_queries: q_ids.len(),
        distinct_docs: d_ids.len(),
        sparsity: sparsity_ratio(sessions)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session_log::types::{DocId, ImpressionRecord, QueryId, QueryRecord, VerticalId};

    fn serp(q: u32, docs: &[u32]) -> QueryRecord {
        QueryRecord {
            query: QueryId(q),
            impressions: docs
                .iter()
                .enumerate()
                .map(|(i, &d)| ImpressionRecord {
                    doc: DocId(d),
                    position: i as u32 + 1,
                    vertical: VerticalId(1),
                    click: false,
                })
                .collect(),
        }
    }

    #[test]
    fn single_pair_is_dense() {
        let s = Session {
            session_id: "s".into(),
            queries: vec![serp(1, &[1])],
        };
        assert_eq!(sparsity_ratio(&[s]).unwrap(), 0.0);
    }

    #[test]
    fn half_of_pairs_observed() {
        let s = Session {
            session_id: "s".into(),
            queries: vec![serp(1, &[1]), serp(2, &[2])],
        };
        assert_eq!(sparsity_ratio(&[s]).unwrap(), 0.5);
    }

    #[test]
    fn empty_is_error() {
        assert!(sparsity_ratio(&[]).is_err());
    }
}
