use rand::seq::index;
use rand::Rng;

use super::build::{EdgeKind, HomogeneousGraph};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingPolicy {
    /// Uniform over the distinct neighbors, ignoring edge kinds.
    #[default]
    Uniform,
    /// Half of the non-self slots from each edge kind, topping up from the
    /// other kind when one runs short.
    Balanced,
}

impl SamplingPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform" => Some(SamplingPolicy::Uniform),
            "balanced" => Some(SamplingPolicy::Balanced),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SamplingPolicy::Uniform => "uniform",
            SamplingPolicy::Balanced => "balanced",
        }
    }
}

/// Exactly `k` neighbor ids per node. Slot 0 always holds the node itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSample {
    k: usize,
    data: Vec<u32>,
}

impl NeighborSample {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn node_count(&self) -> usize {
        self.data.len() / self.k
    }

    /// Sampled neighbors of `node`, or `None` outside the sampled range.
    pub fn get(&self, node: u32) -> Option<&[u32]> {
        let start = node as usize * self.k;
        self.data.get(start..start + self.k)
    }
}

fn pick(pool: &[u32], n: usize, rng: &mut impl Rng, out: &mut Vec<u32>) {
    if pool.len() <= n {
        out.extend_from_slice(pool);
    } else {
        out.extend(index::sample(rng, pool.len(), n).iter().map(|i| pool[i]));
    }
}

/// Samples `k` neighbors for one node from its tagged adjacency.
///
/// The node itself fills the first slot; the remaining `k - 1` slots are
/// drawn without replacement, and padded with the node itself when the
/// adjacency is too small.
pub fn sample_node(
    node: u32,
    adjacency: &[(u32, EdgeKind)],
    k: usize,
    policy: SamplingPolicy,
    rng: &mut impl Rng,
) -> Vec<u32> {
    let mut out = Vec::with_capacity(k);
    out.push(node);
    let want = k - 1;
    match policy {
        SamplingPolicy::Uniform => {
            let mut pool: Vec<u32> = adjacency
                .iter()
                .map(|&(v, _)| v)
                .filter(|&v| v != node)
                .collect();
            pool.dedup();
            pick(&pool, want, rng, &mut out);
        }
        SamplingPolicy::Balanced => {
            let by_kind = |kind| -> Vec<u32> {
                adjacency
                    .iter()
                    .filter(|&&(v, k)| k == kind && v != node)
                    .map(|&(v, _)| v)
                    .collect()
            };
            let multi = by_kind(EdgeKind::MultiHop);
            let mut consec = by_kind(EdgeKind::Consecutive);
            // a node linked both ways counts only under multi-hop
            consec.retain(|v| multi.binary_search(v).is_err());
            let half = want / 2;
            let n_multi = half.max(want.saturating_sub(consec.len())).min(multi.len());
            let n_consec = (want - n_multi).min(consec.len());
            pick(&multi, n_multi, rng, &mut out);
            pick(&consec, n_consec, rng, &mut out);
        }
    }
    out.resize(k, node);
    out
}

/// Samples every node of `graph`. Each node draws from its own RNG stream
/// derived from `(seed, node)`, so a node's sample does not depend on the
/// rest of the graph.
pub fn sample_neighbors(
    graph: &HomogeneousGraph,
    k: usize,
    seed: u64,
    policy: SamplingPolicy,
) -> Result<NeighborSample> {
    if k < 1 {
        return Err(Error::invalid("neighbor sample size K must be at least 1"));
    }
    let mut data = Vec::with_capacity(graph.node_count() * k);
    for node in 0..graph.node_count() as u32 {
        let mut rng = stream_rng(seed, node as u64);
        data.extend(sample_node(node, graph.neighbors(node), k, policy, &mut rng));
    }
    Ok(NeighborSample { k, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build::NodeDomain;

    fn star(degree: u32) -> HomogeneousGraph {
        HomogeneousGraph::from_edges(
            NodeDomain::Doc,
            degree as usize + 1,
            (1..=degree).map(|v| (0, v, EdgeKind::MultiHop)),
        )
    }

    #[test]
    fn isolated_node_pads_with_self() {
        let g = HomogeneousGraph::from_edges(NodeDomain::Query, 3, []);
        let s = sample_neighbors(&g, 4, 1, SamplingPolicy::Uniform).unwrap();
        assert_eq!(s.get(2).unwrap(), &[2, 2, 2, 2]);
    }

    #[test]
    fn degree_ten_gives_distinct_reproducible_sample() {
        let g = star(10);
        let a = sample_neighbors(&g, 4, 9, SamplingPolicy::Uniform).unwrap();
        let b = sample_neighbors(&g, 4, 9, SamplingPolicy::Uniform).unwrap();
        let nbrs = a.get(0).unwrap();
        assert_eq!(nbrs, b.get(0).unwrap());
        let mut sorted = nbrs.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
        assert_eq!(nbrs[0], 0);
    }

    #[test]
    fn zero_k_rejected() {
        assert!(sample_neighbors(&star(2), 0, 0, SamplingPolicy::Uniform).is_err());
    }

    #[test]
    fn balanced_takes_from_both_kinds() {
        let mut edges: Vec<_> = (1..=6).map(|v| (0, v, EdgeKind::MultiHop)).collect();
        edges.extend((7..=12).map(|v| (0, v, EdgeKind::Consecutive)));
        let g = HomogeneousGraph::from_edges(NodeDomain::Doc, 13, edges);
        let s = sample_neighbors(&g, 5, 3, SamplingPolicy::Balanced).unwrap();
        let nbrs = &s.get(0).unwrap()[1..];
        assert_eq!(nbrs.iter().filter(|&&v| v <= 6).count(), 2);
        assert_eq!(nbrs.iter().filter(|&&v| v > 6).count(), 2);
    }

    #[test]
    fn balanced_tops_up_from_other_kind() {
        let mut edges: Vec<_> = (1..=6).map(|v| (0, v, EdgeKind::MultiHop)).collect();
        edges.push((0, 7, EdgeKind::Consecutive));
        let g = HomogeneousGraph::from_edges(NodeDomain::Doc, 8, edges);
        let s = sample_neighbors(&g, 7, 3, SamplingPolicy::Balanced).unwrap();
        let mut nbrs = s.get(0).unwrap()[1..].to_vec();
        nbrs.sort();
        nbrs.dedup();
        assert_eq!(nbrs.len(), 6);
        assert!(nbrs.contains(&7));
    }
}
