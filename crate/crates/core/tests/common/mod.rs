#![allow(dead_code)]

pub mod gradcheck;

use graphcm::autodiff::{Gradients, ParamId, ParamStore};
use graphcm::session_log::{Corpus, RawDoc, RawQuery, RawSession, Session};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Relative error with a floor so that tiny gradients compare absolutely.
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-4)
}

/// Central finite difference of `loss` with respect to one parameter entry.
pub fn numeric_partial(
    store: &mut ParamStore,
    id: ParamId,
    idx: (usize, usize),
    loss: &mut impl FnMut(&ParamStore) -> f64,
) -> f64 {
    let orig = store.get(id)[idx];
    store.get_mut(id)[idx] = orig + FD_STEP;
    let up = loss(store);
    store.get_mut(id)[idx] = orig - FD_STEP;
    let down = loss(store);
    store.get_mut(id)[idx] = orig;
    (up - down) / (2.0 * FD_STEP)
}

/// Compares analytic gradients with finite differences on up to
/// `per_param` entries of each parameter (entries with nonzero analytic
/// gradient are preferred so sparse embedding rows are exercised).
/// Returns the largest relative error and the number of entries checked.
pub fn check_gradients(
    store: &mut ParamStore,
    grads: &Gradients,
    per_param: usize,
    rng: &mut impl Rng,
    mut loss: impl FnMut(&ParamStore) -> f64,
) -> (f64, usize, String) {
    let mut worst = 0.0;
    let mut worst_at = String::new();
    let mut checked = 0;
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let (rows, cols) = store.get(id).dim();
        let g = grads.get(id);
        let mut coords: Vec<(usize, usize)> = Vec::new();
        if let Some(g) = g {
            for ((r, c), v) in g.indexed_iter() {
                if *v != 0.0 {
                    coords.push((r, c));
                }
            }
        }
        let mut picks = Vec::new();
        for _ in 0..per_param {
            if !coords.is_empty() && rng.random::<f64>() < 0.8 {
                picks.push(coords[rng.random_range(0..coords.len())]);
            } else {
                picks.push((rng.random_range(0..rows), rng.random_range(0..cols)));
            }
        }
        for idx in picks {
            let a = g.map_or(0.0, |g| g[idx]);
            let n = numeric_partial(store, id, idx, &mut loss);
            let e = relative_error(a, n);
            checked += 1;
            if e > worst {
                worst = e;
                worst_at = format!("{}[{:?}] analytic {a:e} numeric {n:e}", store.name(id), idx);
            }
        }
    }
    (worst, checked, worst_at)
}

/// Small raw session from `(query, [(doc, click)])` pages.
pub fn raw_session(sid: &str, pages: &[(&str, &[(&str, u8)])]) -> RawSession {
    RawSession {
        sid: sid.into(),
        queries: pages
            .iter()
            .map(|(q, docs)| RawQuery {
                qid: (*q).into(),
                docs: docs
                    .iter()
                    .enumerate()
                    .map(|(i, (d, c))| RawDoc {
                        did: (*d).into(),
                        pos: i as u32 + 1,
                        vert: Some(format!("v{}", i % 2)),
                        click: *c,
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn ingest_all(raw: &[RawSession], corpus: &mut Corpus) -> Vec<Session> {
    raw.iter().map(|r| corpus.ingest(r).expect("valid session")).collect()
}
