//! Assembles sessions into the time-major index arrays the model consumes.
//!
//! Impression row `t * B + b` is the `t`-th impression (in session order) of
//! session `b`; query-slot row `i * B + b` is the `i`-th query of session
//! `b`. Shorter sessions are padded at the end with zero-weight rows.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::graph::{sample_node, EdgeKind, HomogeneousGraph, NeighborSample, SamplingPolicy};
use crate::rng::{derive_seed, stream_rng};
use crate::session_log::{DocId, KnownIds, QueryId, Session};

/// Graph inputs shared by every batch of one pass over the data.
#[derive(Clone, Copy)]
pub struct GraphContext<'g> {
    pub query_graph: &'g HomogeneousGraph,
    pub doc_graph: &'g HomogeneousGraph,
    pub query_sample: &'g NeighborSample,
    pub doc_sample: &'g NeighborSample,
    pub known: &'g KnownIds,
    pub policy: SamplingPolicy,
    /// Seed for neighbor lists drawn on the fly.
    pub seed: u64,
    /// Add the evaluated session's own consecutive edges, seen so far, to
    /// the training graph (inference only).
    pub augment: bool,
}

impl GraphContext<'_> {
    pub fn k(&self) -> usize {
        self.doc_sample.k()
    }
}

/// Nodes to run graph attention over: a center embedding row and `k`
/// neighbor embedding rows per entry.
#[derive(Debug, Clone, Default)]
pub struct GatRows {
    pub centers: Vec<usize>,
    /// Flattened `centers.len() * k` embedding rows.
    pub neighbors: Vec<usize>,
    pub k: usize,
}

impl GatRows {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub sessions: usize,
    pub steps: usize,
    pub query_steps: usize,
    /// Impressions per session.
    pub lengths: Vec<usize>,

    // per impression row
    pub doc_row: Vec<usize>,
    pub vertical: Vec<usize>,
    pub position: Vec<usize>,
    pub prev_click: Vec<usize>,
    pub click: Vec<f64>,
    pub weight: Vec<f64>,
    pub query_slot: Vec<usize>,
    /// `rows * k` doc-table rows of each impression's neighbor documents;
    /// empty when neighbor interaction is off.
    pub interaction_rows: Vec<usize>,
    /// `keep[t][b] == 0.0` marks the first impression of a new query.
    pub new_query_keep: Vec<Vec<f64>>,

    // per query slot row
    pub query_row: Vec<usize>,

    pub query_table: GatRows,
    pub doc_table: GatRows,
}

impl Batch {
    pub fn rows(&self) -> usize {
        self.steps * self.sessions
    }

    pub fn row(&self, session: usize, t: usize) -> usize {
        t * self.sessions + session
    }

    pub fn impression_count(&self) -> usize {
        self.lengths.iter().sum()
    }
}

/// Options that differ between training and inference batches.
pub struct BatchOptions<'r, R: Rng> {
    pub max_position: usize,
    pub with_interaction: bool,
    /// Probability and RNG for replacing ids by UNKNOWN (training only).
    pub substitution: Option<(f64, &'r mut R)>,
}

struct TableBuilder {
    rows: GatRows,
    index: HashMap<(u32, Vec<u32>), usize>,
}

impl TableBuilder {
    fn new(k: usize) -> Self {
        // row 0 is a padding row on the UNKNOWN embedding
        TableBuilder {
            rows: GatRows {
                centers: vec![0],
                neighbors: vec![0; k],
                k,
            },
            index: HashMap::new(),
        }
    }

    fn row(&mut self, node: u32, nbrs: Vec<u32>, emb: &mut impl FnMut(u32) -> usize) -> usize {
        if let Some(&r) = self.index.get(&(node, nbrs.clone())) {
            return r;
        }
        let r = self.rows.centers.len();
        self.rows.centers.push(emb(node));
        for &n in &nbrs {
            let e = emb(n);
            self.rows.neighbors.push(e);
        }
        self.index.insert((node, nbrs), r);
        r
    }
}

/// Maps node ids to embedding rows: ids unseen in training, or picked for
/// substitution, go to row 0. Each id is drawn once per batch.
struct IdMapper<'a, R: Rng> {
    known: &'a KnownIds,
    p: f64,
    rng: Option<&'a mut R>,
    queries: HashMap<u32, bool>,
    docs: HashMap<u32, bool>,
}

impl<R: Rng> IdMapper<'_, R> {
    fn substituted(p: f64, rng: &mut Option<&mut R>, seen: &mut HashMap<u32, bool>, node: u32) -> bool {
        match rng {
            Some(rng) if p > 0.0 => *seen.entry(node).or_insert_with(|| rng.random::<f64>() < p),
            _ => false,
        }
    }

    fn query(&mut self, node: u32) -> usize {
        if node == 0 || !self.known.has_query(QueryId(node)) {
            return 0;
        }
        if Self::substituted(self.p, &mut self.rng, &mut self.queries, node) {
            return 0;
        }
        node as usize
    }

    fn doc(&mut self, node: u32) -> usize {
        if node == 0 || !self.known.has_doc(DocId(node)) {
            return 0;
        }
        if Self::substituted(self.p, &mut self.rng, &mut self.docs, node) {
            return 0;
        }
        node as usize
    }
}

/// In-session consecutive edges observed so far, per node.
#[derive(Default)]
struct SessionEdges {
    extra: HashMap<u32, BTreeSet<u32>>,
}

impl SessionEdges {
    fn add(&mut self, graph: &HomogeneousGraph, a: u32, b: u32) {
        if a == b || graph.neighbors(a).iter().any(|&(v, _)| v == b) {
            return;
        }
        self.extra.entry(a).or_default().insert(b);
        self.extra.entry(b).or_default().insert(a);
    }
}

fn neighbor_list(
    node: u32,
    graph: &HomogeneousGraph,
    sample: &NeighborSample,
    edges: Option<&SessionEdges>,
    policy: SamplingPolicy,
    seed: u64,
) -> Vec<u32> {
    let k = sample.k();
    let extra = edges.and_then(|e| e.extra.get(&node));
    match extra {
        Some(extra) if !extra.is_empty() => {
            let mut adj: Vec<(u32, EdgeKind)> = graph.neighbors(node).to_vec();
            adj.extend(extra.iter().map(|&v| (v, EdgeKind::Consecutive)));
            adj.sort_unstable();
            // the draw depends only on the node and its augmented adjacency
            let mut h = derive_seed(seed, node as u64);
            for &v in extra {
                h = derive_seed(h, v as u64);
            }
            let mut rng = stream_rng(h, 0x5e55);
            sample_node(node, &adj, k, policy, &mut rng)
        }
        _ => match sample.get(node) {
            Some(s) => s.to_vec(),
            None => vec![node; k],
        },
    }
}

pub fn build_batch<R: Rng>(
    sessions: &[&Session],
    ctx: &GraphContext,
    opts: BatchOptions<'_, R>,
) -> Batch {
    let b = sessions.len();
    let k = ctx.k();
    let lengths: Vec<usize> = sessions.iter().map(|s| s.impression_count()).collect();
    let steps = lengths.iter().copied().max().unwrap_or(0);
    let query_steps = sessions.iter().map(|s| s.queries.len()).max().unwrap_or(0);
    let rows = steps * b;

    let mut batch = Batch {
        sessions: b,
        steps,
        query_steps,
        lengths,
        doc_row: vec![0; rows],
        vertical: vec![0; rows],
        position: vec![0; rows],
        prev_click: vec![0; rows],
        click: vec![0.0; rows],
        weight: vec![0.0; rows],
        query_slot: vec![0; rows],
        interaction_rows: if opts.with_interaction {
            vec![0; rows * k]
        } else {
            Vec::new()
        },
        new_query_keep: vec![vec![1.0; b]; steps],
        query_row: vec![0; query_steps * b],
        query_table: GatRows::default(),
        doc_table: GatRows::default(),
    };

    let (p, rng) = match opts.substitution {
        Some((p, rng)) => (p, Some(rng)),
        None => (0.0, None),
    };
    let mut ids = IdMapper {
        known: ctx.known,
        p,
        rng,
        queries: HashMap::new(),
        docs: HashMap::new(),
    };
    let mut q_tab = TableBuilder::new(k);
    let mut d_tab = TableBuilder::new(k);

    for (bi, session) in sessions.iter().enumerate() {
        let mut q_edges = SessionEdges::default();
        let mut d_edges = SessionEdges::default();

        let mut t = 0;
        let mut prev_click = 0;
        for (qi, q) in session.queries.iter().enumerate() {
            let qn = q.query.0;
            if ctx.augment && qi > 0 {
                q_edges.add(ctx.query_graph, session.queries[qi - 1].query.0, qn);
            }
            let q_nbrs = neighbor_list(
                qn,
                ctx.query_graph,
                ctx.query_sample,
                ctx.augment.then_some(&q_edges),
                ctx.policy,
                ctx.seed,
            );
            batch.query_row[qi * b + bi] = q_tab.row(qn, q_nbrs, &mut |x| ids.query(x));

            for (j, imp) in q.impressions.iter().enumerate() {
                let dn = imp.doc.0;
                if ctx.augment && j > 0 {
                    d_edges.add(ctx.doc_graph, q.impressions[j - 1].doc.0, dn);
                }
                let row = t * b + bi;
                let edges = ctx.augment.then_some(&d_edges);
                let d_nbrs =
                    neighbor_list(dn, ctx.doc_graph, ctx.doc_sample, edges, ctx.policy, ctx.seed);
                if opts.with_interaction {
                    for (slot, &n) in d_nbrs.iter().enumerate() {
                        let n_nbrs =
                            neighbor_list(n, ctx.doc_graph, ctx.doc_sample, edges, ctx.policy, ctx.seed);
                        batch.interaction_rows[row * k + slot] =
                            d_tab.row(n, n_nbrs, &mut |x| ids.doc(x));
                    }
                }
                batch.doc_row[row] = d_tab.row(dn, d_nbrs, &mut |x| ids.doc(x));
                batch.vertical[row] = imp.vertical.index();
                batch.position[row] = (imp.position as usize).min(opts.max_position);
                batch.prev_click[row] = prev_click;
                batch.click[row] = imp.click as u8 as f64;
                batch.weight[row] = 1.0;
                batch.query_slot[row] = qi * b + bi;
                if j == 0 && qi > 0 {
                    batch.new_query_keep[t][bi] = 0.0;
                }
                prev_click = imp.click as usize;
                t += 1;
            }
        }
    }
    batch.query_table = q_tab.rows;
    batch.doc_table = d_tab.rows;
    batch
}
