//! Small hyperparameter grid over learning rate and neighbor sample size,
//! selected by validation perplexity.

use graphcm::harness::synth::{generate, GeneratorKind, SyntheticSpec};
use graphcm::harness::*;
use graphcm::session_log::*;

fn main() -> graphcm::Result<()> {
    let data = generate(&SyntheticSpec::new(GeneratorKind::GraphPlanted, 1_500, 4))?;
    let mut corpus = Corpus::new();
    let log: Vec<Session> = data.sessions.iter().map(|r| corpus.ingest(r).unwrap()).collect();
    let dataset = Dataset {
        split: split_dataset(log, SplitRatios::default(), 4)?,
        corpus,
        relevance: None,
    };

    let cfg = ExperimentConfig::parse_str(
        "# tiny grid\n\
         query_dim = 8\ndoc_dim = 8\nhidden = 8\nepochs = 2\n\
         lr_grid = 0.001,0.005\nl2_grid = 0.00001\ndropout_grid = 0.25\nk_grid = 2,4\n",
    )?;
    let cfg = ExperimentConfig {
        runs: std::env::temp_dir().join("graphcm-runs"),
        ..cfg
    };
    let run = RunDir::create(&cfg, "grid")?;
    let (points, best) = grid_search(&cfg, &dataset, &run)?;
    for p in &points {
        println!("lr {:<6} l2 {:<6} dropout {:<5} k {:<2} valid PPL {:.4}", p.lr, p.l2, p.dropout, p.k, p.valid_ppl.unwrap_or(f64::NAN));
    }
    println!("selected lr {} k {}", best.train.lr, best.model.gat.k);
    Ok(())
}
