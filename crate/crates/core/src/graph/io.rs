//! Text adjacency format:
//!
//! ```text
//! graphcm-graph 1
//! domain query
//! nodes 42
//! 3 5 multi_hop
//! 1 2 consecutive
//! ```
//!
//! Each undirected edge appears once; readers symmetrize.

use std::io::{BufRead, Write};

use super::build::{EdgeKind, HomogeneousGraph, NodeDomain};
use crate::error::{Error, Result};

const MAGIC: &str = "graphcm-graph 1";

pub fn write_graph<W: Write>(mut w: W, graph: &HomogeneousGraph) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "domain {}", graph.domain().as_str())?;
    writeln!(w, "nodes {}", graph.node_count())?;
    for (u, v, kind) in graph.edges() {
        writeln!(w, "{u} {v} {}", kind.as_str())?;
    }
    Ok(())
}

pub fn read_graph<R: BufRead>(r: R) -> Result<HomogeneousGraph> {
    let mut lines = r.lines().enumerate();
    let mut header = |expect: &str| -> Result<String> {
        let (i, line) = lines
            .next()
            .ok_or_else(|| Error::format("truncated graph header"))?;
        let line = line?;
        line.strip_prefix(expect)
            .map(|rest| rest.trim().to_owned())
            .ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected {expect:?}"),
            })
    };
    header(MAGIC)?;
    let domain = match header("domain ")?.as_str() {
        "query" => NodeDomain::Query,
        "doc" => NodeDomain::Doc,
        other => return Err(Error::format(format!("unknown graph domain {other:?}"))),
    };
    let nodes: usize = header("nodes ")?
        .parse()
        .map_err(|_| Error::format("node count is not an integer"))?;

    let mut edges = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: &str| Error::Parse {
            line: i + 1,
            message: message.to_owned(),
        };
        let mut f = line.split_whitespace();
        let (Some(u), Some(v), Some(k), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(bad("expected `u v kind`"));
        };
        let u: u32 = u.parse().map_err(|_| bad("bad node id"))?;
        let v: u32 = v.parse().map_err(|_| bad("bad node id"))?;
        let kind = EdgeKind::parse(k).ok_or_else(|| bad("unknown edge kind"))?;
        if u as usize >= nodes || v as usize >= nodes {
            return Err(bad("node id out of range"));
        }
        edges.push((u, v, kind));
    }
    Ok(HomogeneousGraph::from_edges(domain, nodes, edges))
}
