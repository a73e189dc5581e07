//! Train with the EXPMUL combination and read the learned exponents back
//! from the checkpoint.

use graphcm::harness::synth::{generate, GeneratorKind, SyntheticSpec};
use graphcm::harness::*;
use graphcm::model::CombinationKind;
use graphcm::session_log::*;

fn main() -> graphcm::Result<()> {
    let data = generate(&SyntheticSpec::new(GeneratorKind::GraphPlanted, 1_500, 2))?;
    let mut corpus = Corpus::new();
    let log: Vec<Session> = data.sessions.iter().map(|r| corpus.ingest(r).unwrap()).collect();
    let dataset = Dataset {
        split: split_dataset(log, SplitRatios::default(), 2)?,
        corpus,
        relevance: None,
    };

    let mut cfg = ExperimentConfig::default();
    cfg.runs = std::env::temp_dir().join("graphcm-runs");
    cfg.run_name = "expmul".into();
    cfg.model.combination = CombinationKind::ExpMul;
    cfg.model.query_dim = 16;
    cfg.model.doc_dim = 16;
    cfg.model.hidden = 16;
    cfg.train.max_epochs = 3;
    let run = RunDir::create(&cfg, "train")?;
    train_model(&cfg, &dataset, cfg.model.clone(), &run)?;

    let inspection = inspect_checkpoint(&run.file(CHECKPOINT_FILE))?;
    print!("{}", inspection.to_text());
    Ok(())
}
