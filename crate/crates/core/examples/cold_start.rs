//! Cold-start partitioning of a test split, with and without holding out
//! a share of the test queries from training.

use graphcm::harness::hold_out_test_queries;
use graphcm::harness::synth::{generate, GeneratorKind, SyntheticSpec};
use graphcm::session_log::*;

fn show(label: &str, split: &DatasetSplit) {
    let part = partition_cold_start(split);
    let counts: Vec<String> = ColdStartKind::ALL
        .iter()
        .map(|&k| format!("{} {}", k.label(), part.get(k).len()))
        .collect();
    println!("{label}: train {}, test {} = {}", split.train.len(), part.len(), counts.join(", "));
}

fn main() -> graphcm::Result<()> {
    let data = generate(&SyntheticSpec::new(GeneratorKind::GraphPlanted, 3_000, 5))?;
    let mut corpus = Corpus::new();
    let log: Vec<Session> = data.sessions.iter().map(|r| corpus.ingest(r).unwrap()).collect();
    println!("training sparsity {:.4}", sparsity_ratio(&log)?);

    let mut split = split_dataset(log, SplitRatios::default(), 5)?;
    show("as split", &split);

    let held = hold_out_test_queries(&mut split, 0.1, 5)?;
    println!("held out {} test queries", held.len());
    show("after holdout", &split);
    Ok(())
}
