//! Train GraphCM on planted-topic data and report test metrics per
//! cold-start partition. The run directory keeps the manifest, training
//! log, best checkpoint and metrics.
//!
//! RUST_LOG=info cargo run --release --example train_and_evaluate

use graphcm::eval::format_table;
use graphcm::harness::synth::{generate, GeneratorKind, SyntheticSpec};
use graphcm::harness::*;
use graphcm::session_log::*;

fn main() -> graphcm::Result<()> {
    env_logger::init();
    let data = generate(&SyntheticSpec::new(GeneratorKind::GraphPlanted, 3_000, 0))?;
    let mut corpus = Corpus::new();
    let log: Vec<Session> = data.sessions.iter().map(|r| corpus.ingest(r).unwrap()).collect();
    let dataset = Dataset {
        split: split_dataset(log, SplitRatios::default(), 0)?,
        corpus,
        relevance: None,
    };

    let mut cfg = ExperimentConfig::default();
    cfg.runs = std::env::temp_dir().join("graphcm-runs");
    cfg.apply_overrides(&["--query-dim=16", "--doc-dim=16", "--hidden=16", "--epochs=5"].map(String::from))?;
    cfg.validate()?;

    let run = RunDir::create(&cfg, "train")?;
    let (trained, reports) = train_and_evaluate(&cfg, &dataset, &run)?;
    for e in &trained.outcome.epochs {
        println!("epoch {} loss {:.4} valid PPL {:.4}", e.epoch, e.train_loss, e.valid_ppl.unwrap_or(f64::NAN));
    }
    print!("{}", format_table(&reports));
    println!("run directory {}", run.path.display());

    let again = evaluate_checkpoint(&run.file(CHECKPOINT_FILE), &dataset, &cfg)?;
    assert_eq!(again, reports);
    Ok(())
}
