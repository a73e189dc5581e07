use std::collections::{BTreeMap, BTreeSet};

use crate::session_log::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    /// Two queries clicked the same document, or two documents clicked
    /// under the same query.
    MultiHop,
    /// Adjacent queries in a session, or rank-adjacent documents on a page.
    Consecutive,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::MultiHop => "multi_hop",
            EdgeKind::Consecutive => "consecutive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "multi_hop" => Some(EdgeKind::MultiHop),
            "consecutive" => Some(EdgeKind::Consecutive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeDomain {
    Query,
    Doc,
}

impl NodeDomain {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeDomain::Query => "query",
            NodeDomain::Doc => "doc",
        }
    }
}

/// Undirected graph over one id space, stored as symmetric adjacency lists
/// sorted by (neighbor, kind). Self-loops are implicit and never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomogeneousGraph {
    domain: NodeDomain,
    adjacency: Vec<Vec<(u32, EdgeKind)>>,
}

impl HomogeneousGraph {
    pub fn from_edges(
        domain: NodeDomain,
        node_count: usize,
        edges: impl IntoIterator<Item = (u32, u32, EdgeKind)>,
    ) -> Self {
        let mut sets: Vec<BTreeSet<(u32, EdgeKind)>> = vec![BTreeSet::new(); node_count];
        for (u, v, kind) in edges {
            if u == v {
                continue;
            }
            let need = u.max(v) as usize + 1;
            if sets.len() < need {
                sets.resize(need, BTreeSet::new());
            }
            sets[u as usize].insert((v, kind));
            sets[v as usize].insert((u, kind));
        }
        HomogeneousGraph {
            domain,
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn domain(&self) -> NodeDomain {
        self.domain
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Grows the node range; added nodes are isolated.
    pub fn resized(mut self, node_count: usize) -> Self {
        if node_count > self.adjacency.len() {
            self.adjacency.resize(node_count, Vec::new());
        }
        self
    }

    /// Tagged neighbors of `node`; empty for nodes outside the range.
    pub fn neighbors(&self, node: u32) -> &[(u32, EdgeKind)] {
        self.adjacency
            .get(node as usize)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn has_edge(&self, u: u32, v: u32, kind: EdgeKind) -> bool {
        self.neighbors(u).binary_search(&(v, kind)).is_ok()
    }

    pub fn degree(&self, node: u32) -> usize {
        self.neighbors(node).len()
    }

    /// Each undirected edge once, with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, EdgeKind)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, adj)| {
            adj.iter()
                .filter(move |(v, _)| (u as u32) < *v)
                .map(move |&(v, k)| (u as u32, v, k))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }
}

fn clique_edges(groups: BTreeMap<u32, BTreeSet<u32>>) -> Vec<(u32, u32, EdgeKind)> {
    let mut edges = Vec::new();
    for members in groups.into_values() {
        let members: Vec<u32> = members.into_iter().collect();
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                edges.push((a, b, EdgeKind::MultiHop));
            }
        }
    }
    edges
}

fn max_ids(train: &[Session]) -> (usize, usize) {
    let mut q = 0;
    let mut d = 0;
    for s in train {
        for qr in &s.queries {
            q = q.max(qr.query.index() + 1);
            for imp in &qr.impressions {
                d = d.max(imp.doc.index() + 1);
            }
        }
    }
    (q, d)
}

/// Query graph: multi-hop edges between queries that clicked a common
/// document (across all sessions), consecutive edges between adjacent
/// queries of each session.
pub fn build_query_graph(train: &[Session]) -> HomogeneousGraph {
    let mut clicked_by: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    let mut edges = Vec::new();
    for s in train {
        for pair in s.queries.windows(2) {
            edges.push((pair[0].query.0, pair[1].query.0, EdgeKind::Consecutive));
        }
        for q in &s.queries {
            for imp in q.impressions.iter().filter(|i| i.click) {
                clicked_by.entry(imp.doc.0).or_default().insert(q.query.0);
            }
        }
    }
    edges.extend(clique_edges(clicked_by));
    HomogeneousGraph::from_edges(NodeDomain::Query, max_ids(train).0, edges)
}

/// Document graph: multi-hop edges between documents clicked under a common
/// query, consecutive edges between rank-adjacent documents of each page.
pub fn build_doc_graph(train: &[Session]) -> HomogeneousGraph {
    let mut clicked_under: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    let mut edges = Vec::new();
    for s in train {
        for q in &s.queries {
            for pair in q.impressions.windows(2) {
                edges.push((pair[0].doc.0, pair[1].doc.0, EdgeKind::Consecutive));
            }
            for imp in q.impressions.iter().filter(|i| i.click) {
                clicked_under.entry(q.query.0).or_default().insert(imp.doc.0);
            }
        }
    }
    edges.extend(clique_edges(clicked_under));
    HomogeneousGraph::from_edges(NodeDomain::Doc, max_ids(train).1, edges)
}
