//! Query and document homogeneous graphs with fixed-size neighbor sampling.

mod build;
mod io;
mod sample;

pub use build::{build_doc_graph, build_query_graph, EdgeKind, HomogeneousGraph, NodeDomain};
pub use io::{read_graph, write_graph};
pub use sample::{sample_neighbors, sample_node, NeighborSample, SamplingPolicy};
