//! Compare the full model with its ablations on held-out queries.
//!
//! cargo run --release --example ablation_study

use graphcm::harness::synth::{generate, GeneratorKind, SyntheticSpec};
use graphcm::harness::*;
use graphcm::session_log::*;

fn main() -> graphcm::Result<()> {
    let data = generate(&SyntheticSpec::new(GeneratorKind::GraphPlanted, 3_000, 1))?;
    let mut corpus = Corpus::new();
    let log: Vec<Session> = data.sessions.iter().map(|r| corpus.ingest(r).unwrap()).collect();
    let mut split = split_dataset(log, SplitRatios::default(), 1)?;
    hold_out_test_queries(&mut split, 0.1, 1)?;
    let dataset = Dataset {
        corpus,
        split,
        relevance: None,
    };

    let mut cfg = ExperimentConfig::default();
    cfg.runs = std::env::temp_dir().join("graphcm-runs");
    for (k, v) in [("query_dim", "16"), ("doc_dim", "16"), ("hidden", "16"), ("epochs", "4")] {
        cfg.set(k, v)?;
    }
    let run = RunDir::create(&cfg, "ablate")?;
    let rows = ablate(&cfg, &dataset, &ABLATION_NAMES, &run)?;
    print!("{}", ablation_table(&rows));
    Ok(())
}
