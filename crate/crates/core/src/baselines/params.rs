use std::collections::HashMap;

use crate::session_log::{DocId, QueryId};

/// Per-pair attractiveness with a global fallback for unseen pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Attractiveness {
    pub values: HashMap<(QueryId, DocId), f64>,
    pub prior: f64,
}

impl Default for Attractiveness {
    fn default() -> Self {
        Attractiveness {
            values: HashMap::new(),
            prior: 0.5,
        }
    }
}

impl Attractiveness {
    pub fn get(&self, q: QueryId, d: DocId) -> f64 {
        self.values.get(&(q, d)).copied().unwrap_or(self.prior)
    }

    /// Sets the prior to the mean over observed pairs.
    pub fn refresh_prior(&mut self) {
        if !self.values.is_empty() {
            self.prior = self.values.values().sum::<f64>() / self.values.len() as f64;
        }
    }

    pub fn sorted(&self) -> Vec<((QueryId, DocId), f64)> {
        let mut v: Vec<_> = self.values.iter().map(|(&k, &a)| (k, a)).collect();
        v.sort_by_key(|&(k, _)| k);
        v
    }
}

/// Value at `index`, or the last value when `index` is past the end.
pub(crate) fn at_or_last(values: &[f64], index: usize) -> f64 {
    values
        .get(index)
        .or_else(|| values.last())
        .copied()
        .unwrap_or(0.5)
}
