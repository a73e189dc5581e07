//! Count-based estimators for the cascade family (DCM and simplified DBN).
//!
//! A result page is taken as examined down to its last click, or entirely
//! when nothing was clicked. Every ratio carries one pseudo-success and one
//! pseudo-failure. SDBN then refines the counts by EM over whether the
//! user stopped at the last click or kept scanning without clicking.

use std::collections::HashMap;

use super::params::{at_or_last, Attractiveness};
use crate::error::{Error, Result};
use crate::session_log::{DocId, QueryId, QueryRecord, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeVariant {
    /// Continuation after a click depends on the rank.
    Dcm,
    /// Continuation after a click depends on satisfaction with the document.
    Sdbn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub variant: CascadeVariant,
    pub alpha: Attractiveness,
    /// DCM: `lambda[r - 1]`, probability of continuing after a click at rank `r`.
    pub lambda: Vec<f64>,
    /// SDBN: probability of being satisfied after clicking a pair.
    pub satisfaction: Attractiveness,
}

fn smoothed(success: f64, total: f64) -> f64 {
    (success + 1.0) / (total + 2.0)
}

fn last_click(q: &QueryRecord) -> Option<usize> {
    q.impressions.iter().rposition(|imp| imp.click)
}

pub fn fit_cascade(train: &[Session], variant: CascadeVariant) -> Result<Cascade> {
    if train.is_empty() {
        return Err(Error::invalid("cannot fit a click model on an empty log"));
    }
    let mut exam: HashMap<(QueryId, DocId), (f64, f64)> = HashMap::new();
    let mut sat: HashMap<(QueryId, DocId), (f64, f64)> = HashMap::new();
    let mut by_rank: Vec<(f64, f64)> = Vec::new();
    for s in train {
        for q in &s.queries {
            let last = last_click(q);
            let examined = last.map_or(q.impressions.len(), |l| l + 1);
            for (j, imp) in q.impressions.iter().take(examined).enumerate() {
                let e = exam.entry((q.query, imp.doc)).or_default();
                e.1 += 1.0;
                if !imp.click {
                    continue;
                }
                e.0 += 1.0;
                let is_last = Some(j) == last;
                let r = imp.position as usize;
                if by_rank.len() < r {
                    by_rank.resize(r, (0.0, 0.0));
                }
                by_rank[r - 1].1 += 1.0;
                let st = sat.entry((q.query, imp.doc)).or_default();
                st.1 += 1.0;
                if is_last {
                    by_rank[r - 1].0 += 1.0;
                    st.0 += 1.0;
                }
            }
        }
    }
    let mut alpha = Attractiveness {
        values: exam.iter().map(|(&k, &(c, n))| (k, smoothed(c, n))).collect(),
        prior: 0.5,
    };
    alpha.refresh_prior();
    let lambda = by_rank.iter().map(|&(l, c)| 1.0 - smoothed(l, c)).collect();
    let mut satisfaction = Attractiveness {
        values: sat.iter().map(|(&k, &(l, c))| (k, smoothed(l, c))).collect(),
        prior: 0.5,
    };
    satisfaction.refresh_prior();
    if variant == CascadeVariant::Sdbn {
        refine_sdbn(train, &mut alpha, &mut satisfaction);
    }
    Ok(Cascade {
        variant,
        alpha,
        lambda,
        satisfaction,
    })
}

const SDBN_ITERATIONS: usize = 200;
const SDBN_TOLERANCE: f64 = 1e-7;

/// EM over the latent stop event after the last click of each page. Every
/// other examination and satisfaction outcome is observed.
fn refine_sdbn(train: &[Session], alpha: &mut Attractiveness, satisfaction: &mut Attractiveness) {
    for _ in 0..SDBN_ITERATIONS {
        let mut exam: HashMap<(QueryId, DocId), (f64, f64)> = HashMap::new();
        let mut sat: HashMap<(QueryId, DocId), (f64, f64)> = HashMap::new();
        for s in train {
            for q in &s.queries {
                let last = last_click(q);
                // probability that the user stopped at the last click
                let stop = last.map_or(0.0, |l| {
                    let sigma = satisfaction.get(q.query, q.impressions[l].doc);
                    let rest: f64 = q.impressions[l + 1..]
                        .iter()
                        .map(|imp| 1.0 - alpha.get(q.query, imp.doc))
                        .product();
                    sigma / (sigma + (1.0 - sigma) * rest)
                });
                for (j, imp) in q.impressions.iter().enumerate() {
                    let key = (q.query, imp.doc);
                    let e = exam.entry(key).or_default();
                    match last {
                        Some(l) if j > l => e.1 += 1.0 - stop,
                        _ => {
                            e.1 += 1.0;
                            if imp.click {
                                e.0 += 1.0;
                                let st = sat.entry(key).or_default();
                                st.1 += 1.0;
                                if Some(j) == last {
                                    st.0 += stop;
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut change: f64 = 0.0;
        for (target, counts) in [(&mut *alpha, exam), (&mut *satisfaction, sat)] {
            for (k, (c, n)) in counts {
                let v = smoothed(c, n);
                change = change.max((target.get(k.0, k.1) - v).abs());
                target.values.insert(k, v);
            }
            target.refresh_prior();
        }
        if change < SDBN_TOLERANCE {
            break;
        }
    }
}

impl Cascade {
    /// Probability of examining the next rank after a click on `(q, d)` at `rank`.
    pub fn continuation(&self, q: QueryId, d: DocId, rank: usize) -> f64 {
        match self.variant {
            CascadeVariant::Dcm => at_or_last(&self.lambda, rank - 1),
            CascadeVariant::Sdbn => 1.0 - self.satisfaction.get(q, d),
        }
    }

    /// Conditional click probabilities of one result page given its
    /// observed clicks.
    pub fn predict_page(&self, q: &QueryRecord) -> Vec<f64> {
        let mut eps: f64 = 1.0;
        let mut out = Vec::with_capacity(q.impressions.len());
        for imp in &q.impressions {
            let a = self.alpha.get(q.query, imp.doc);
            out.push(eps * a);
            eps = if imp.click {
                self.continuation(q.query, imp.doc, imp.position as usize)
            } else {
                let denom = 1.0 - eps * a;
                if denom > 0.0 {
                    eps * (1.0 - a) / denom
                } else {
                    0.0
                }
            };
        }
        out
    }
}
