//! EM for the position-based and user-browsing models.
//!
//! Both are fitted on aggregated sufficient statistics: impressions with the
//! same pair, rank and previous-click rank share one posterior.

use std::collections::HashMap;

use super::params::{at_or_last, Attractiveness};
use crate::error::{Error, Result};
use crate::session_log::{DocId, QueryId, Session};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop when the mean per-impression objective gains less than this.
    pub tolerance: f64,
    /// Pseudo-clicks and pseudo-skips added to every attractiveness
    /// estimate (a Beta prior); 0 gives maximum likelihood.
    pub pseudo_counts: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iterations: 100,
            tolerance: 1e-9,
            pseudo_counts: 1.0,
        }
    }
}

/// Per-impression training log-likelihood and objective (log-likelihood
/// plus log prior), before the first and after every iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmTrace {
    pub log_likelihood: Vec<f64>,
    pub objective: Vec<f64>,
}

impl EmTrace {
    pub fn iterations(&self) -> usize {
        self.log_likelihood.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pbm {
    /// `gamma[r - 1]`: examination probability at rank `r`.
    pub gamma: Vec<f64>,
    pub alpha: Attractiveness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ubm {
    /// `gamma[r - 1][r']`: examination at rank `r` when the last click
    /// above was at rank `r'` (`0`: no click yet on this result page).
    pub gamma: Vec<Vec<f64>>,
    pub alpha: Attractiveness,
}

impl Pbm {
    pub fn examination(&self, rank: usize) -> f64 {
        at_or_last(&self.gamma, rank - 1)
    }

    pub fn click_probability(&self, q: QueryId, d: DocId, rank: usize) -> f64 {
        self.examination(rank) * self.alpha.get(q, d)
    }
}

impl Ubm {
    pub fn examination(&self, rank: usize, prev_click: usize) -> f64 {
        let row = self
            .gamma
            .get(rank - 1)
            .or_else(|| self.gamma.last())
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        at_or_last(row, prev_click)
    }

    pub fn click_probability(&self, q: QueryId, d: DocId, rank: usize, prev_click: usize) -> f64 {
        self.examination(rank, prev_click) * self.alpha.get(q, d)
    }
}

/// `(query, doc, rank, previous click rank)` with click / no-click counts.
type Stats = Vec<((QueryId, DocId, usize, usize), (f64, f64))>;

fn collect(train: &[Session], with_prev: bool) -> Result<(Stats, usize)> {
    if train.is_empty() {
        return Err(Error::invalid("cannot fit a click model on an empty log"));
    }
    let mut map: HashMap<(QueryId, DocId, usize, usize), (f64, f64)> = HashMap::new();
    let mut max_rank = 1;
    for s in train {
        for q in &s.queries {
            let mut prev = 0;
            for imp in &q.impressions {
                let r = imp.position as usize;
                max_rank = max_rank.max(r);
                let key = (q.query, imp.doc, r, if with_prev { prev } else { 0 });
                let e = map.entry(key).or_default();
                if imp.click {
                    e.0 += 1.0;
                    prev = r;
                } else {
                    e.1 += 1.0;
                }
            }
        }
    }
    let mut stats: Stats = map.into_iter().collect();
    stats.sort_by_key(|&(k, _)| k);
    Ok((stats, max_rank))
}

fn check(cfg: &EmConfig) -> Result<()> {
    if cfg.max_iterations < 1 {
        return Err(Error::invalid("EM needs at least one iteration"));
    }
    if !(cfg.pseudo_counts >= 0.0) {
        return Err(Error::invalid("pseudo-counts must be non-negative"));
    }
    Ok(())
}

/// Shared EM loop over a parametrized examination table `gamma[r][r']`.
fn run_em(stats: &Stats, gamma: &mut [Vec<f64>], cfg: &EmConfig) -> (Attractiveness, EmTrace) {
    let mut alpha: HashMap<(QueryId, DocId), f64> = stats.iter().map(|&((q, d, _, _), _)| ((q, d), 0.5)).collect();
    let total: f64 = stats.iter().map(|(_, (c, n))| c + n).sum();
    let k = cfg.pseudo_counts;
    let ll = |alpha: &HashMap<(QueryId, DocId), f64>, gamma: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for &((q, d, r, rp), (c, n)) in stats {
            let p = gamma[r - 1][rp] * alpha[&(q, d)];
            if c > 0.0 {
                s += c * p.ln();
            }
            if n > 0.0 {
                s += n * (1.0 - p).ln();
            }
        }
        s / total
    };
    let log_prior = |alpha: &HashMap<(QueryId, DocId), f64>| -> f64 {
        if k == 0.0 {
            return 0.0;
        }
        alpha.values().map(|&a| k * (a.ln() + (1.0 - a).ln())).sum::<f64>() / total
    };
    let mut trace = EmTrace::default();
    let mut record = |alpha: &HashMap<(QueryId, DocId), f64>, gamma: &[Vec<f64>]| -> f64 {
        let l = ll(alpha, gamma);
        let o = l + log_prior(alpha);
        trace.log_likelihood.push(l);
        trace.objective.push(o);
        o
    };
    let mut last = record(&alpha, gamma);
    for _ in 0..cfg.max_iterations {
        let mut a_num: HashMap<(QueryId, DocId), (f64, f64)> = HashMap::new();
        let mut g_num: Vec<Vec<(f64, f64)>> = gamma.iter().map(|row| vec![(0.0, 0.0); row.len()]).collect();
        for &((q, d, r, rp), (c, n)) in stats {
            let a = alpha[&(q, d)];
            let g = gamma[r - 1][rp];
            let denom = 1.0 - g * a;
            // posteriors of attractive / examined given no click
            let (pa, pe) = if denom > 0.0 {
                (a * (1.0 - g) / denom, g * (1.0 - a) / denom)
            } else {
                (0.0, 0.0)
            };
            let ea = a_num.entry((q, d)).or_default();
            ea.0 += c + n * pa;
            ea.1 += c + n;
            let eg = &mut g_num[r - 1][rp];
            eg.0 += c + n * pe;
            eg.1 += c + n;
        }
        for (key, (num, den)) in a_num {
            alpha.insert(key, (num + k) / (den + 2.0 * k));
        }
        for (row, nums) in gamma.iter_mut().zip(&g_num) {
            for (g, &(num, den)) in row.iter_mut().zip(nums) {
                if den > 0.0 {
                    *g = num / den;
                }
            }
        }
        let next = record(&alpha, gamma);
        let gain = next - last;
        last = next;
        if gain < cfg.tolerance {
            break;
        }
    }
    let mut attr = Attractiveness {
        values: alpha,
        prior: 0.5,
    };
    attr.refresh_prior();
    (attr, trace)
}

pub fn fit_pbm(train: &[Session], cfg: &EmConfig) -> Result<(Pbm, EmTrace)> {
    check(cfg)?;
    let (stats, max_rank) = collect(train, false)?;
    let mut gamma = vec![vec![0.5]; max_rank];
    let (alpha, trace) = run_em(&stats, &mut gamma, cfg);
    Ok((
        Pbm {
            gamma: gamma.into_iter().map(|r| r[0]).collect(),
            alpha,
        },
        trace,
    ))
}

pub fn fit_ubm(train: &[Session], cfg: &EmConfig) -> Result<(Ubm, EmTrace)> {
    check(cfg)?;
    let (stats, max_rank) = collect(train, true)?;
    // only r' < r occurs; the full square keeps indexing simple
    let mut gamma = vec![vec![0.5; max_rank]; max_rank];
    let (alpha, trace) = run_em(&stats, &mut gamma, cfg);
    Ok((Ubm { gamma, alpha }, trace))
}
