//! Build the query and document graphs of a training log and draw
//! neighbor samples from them.

use graphcm::graph::*;
use graphcm::harness::synth::{generate, GeneratorKind, SyntheticSpec};
use graphcm::session_log::*;

fn main() -> graphcm::Result<()> {
    let mut spec = SyntheticSpec::new(GeneratorKind::GraphPlanted, 500, 3);
    spec.queries = 40;
    spec.docs = 200;
    spec.topics = 8;
    let data = generate(&spec)?;
    let mut corpus = Corpus::new();
    let train: Vec<Session> = data.sessions.iter().map(|r| corpus.ingest(r).unwrap()).collect();

    for g in [build_query_graph(&train), build_doc_graph(&train)] {
        let multi = g.edges().filter(|e| e.2 == EdgeKind::MultiHop).count();
        let max_degree = (0..g.node_count() as u32).map(|v| g.degree(v)).max().unwrap_or(0);
        println!(
            "{} graph: {} nodes, {} edges ({multi} multi-hop), max degree {max_degree}",
            g.domain().as_str(),
            g.node_count(),
            g.edge_count()
        );
    }

    let docs = build_doc_graph(&train);
    let node = (1..docs.node_count() as u32).max_by_key(|&v| docs.degree(v)).unwrap();
    for policy in [SamplingPolicy::Uniform, SamplingPolicy::Balanced] {
        let sample = sample_neighbors(&docs, 6, 11, policy)?;
        let names: Vec<&str> = sample.get(node).unwrap().iter().map(|&d| corpus.docs.token(d).unwrap_or("?")).collect();
        println!("{} sample of {}: {names:?}", policy.as_str(), corpus.docs.token(node).unwrap());
    }

    let mut text = Vec::new();
    write_graph(&mut text, &docs)?;
    println!("serialized doc graph: {} bytes", text.len());
    Ok(())
}
