//! Train, evaluate, ablate and inspect runs driven by an [`ExperimentConfig`].

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use log::info;
use rand::seq::index;

use super::config::{resolve, ExperimentConfig};
use super::run::{RunDir, CHECKPOINT_FILE, METRICS_FILE, TABLE_FILE, TRAIN_LOG_FILE};
use crate::baselines::{Baseline, BaselineKind};
use crate::error::{Error, Result};
use crate::eval::{accumulate, format_table, MetricsAccumulator, MetricsReport, SessionScores};
use crate::model::{predict, train, Ablation, GraphCm, GraphInputs, ModelConfig, ModelDims, TrainOutcome};
use crate::rng::stream_rng;
use crate::session_log::{
    load_split_dir, parse_relevance, ColdStartKind, Corpus, DatasetSplit, KnownIds, QueryId, Relevance, Session,
};

/// Label of the report covering the whole test set.
pub const ALL_PARTITION: &str = "all";

/// A loaded split directory with its vocabulary and optional judgements.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub corpus: Corpus,
    pub split: DatasetSplit,
    pub relevance: Option<Relevance>,
}

impl Dataset {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let (corpus, split) = load_split_dir(&resolve(&cfg.data))?;
        let relevance = match &cfg.relevance {
            Some(p) => Some(parse_relevance(BufReader::new(File::open(resolve(p))?), &corpus)?),
            None => None,
        };
        Ok(Dataset {
            corpus,
            split,
            relevance,
        })
    }

    pub fn dims(&self) -> ModelDims {
        let s = &self.split;
        let max_position = s
            .train
            .iter()
            .chain(&s.valid)
            .chain(&s.test)
            .map(|x| x.max_position() as usize)
            .max()
            .unwrap_or(1);
        ModelDims {
            queries: self.corpus.queries.len(),
            docs: self.corpus.docs.len(),
            verticals: self.corpus.verticals.len(),
            max_position,
        }
    }
}

/// Picks `fraction` of the distinct test queries and removes every training
/// and validation session that issues one of them, so those queries are
/// cold at test time. Returns the held-out queries in ascending order.
pub fn hold_out_test_queries(split: &mut DatasetSplit, fraction: f64, seed: u64) -> Result<Vec<QueryId>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("holdout fraction {fraction} outside [0, 1]")));
    }
    let mut queries: Vec<QueryId> = split
        .test
        .iter()
        .flat_map(|s| s.queries.iter().map(|q| q.query))
        .collect();
    queries.sort_unstable();
    queries.dedup();
    let n = (fraction * queries.len() as f64).round() as usize;
    let mut rng = stream_rng(seed, 0x401d);
    let mut held: Vec<QueryId> = index::sample(&mut rng, queries.len(), n)
        .into_iter()
        .map(|i| queries[i])
        .collect();
    held.sort_unstable();
    let keep = |s: &Session| !s.queries.iter().any(|q| held.binary_search(&q.query).is_ok());
    split.train.retain(keep);
    split.valid.retain(keep);
    Ok(held)
}

fn init_model(cfg: &ExperimentConfig, model: ModelConfig, dims: ModelDims) -> Result<GraphCm> {
    let mut rng = stream_rng(cfg.init_seed, 0x1417);
    GraphCm::new(model, dims, &mut rng)
}

fn seed_entries(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    vec![
        ("run.init_seed".into(), cfg.init_seed.to_string()),
        ("run.seed".into(), cfg.train.seed.to_string()),
        ("run.sample_seed".into(), cfg.train.sample_seed.to_string()),
        ("run.eval_seed".into(), cfg.train.eval_seed.to_string()),
    ]
}

pub struct TrainedRun {
    pub model: GraphCm,
    pub inputs: GraphInputs,
    pub outcome: TrainOutcome,
}

/// Trains one model. The best-validation checkpoint is rewritten after every
/// improving epoch and the per-epoch log is written as it grows, so both
/// survive a divergence.
pub fn train_model(cfg: &ExperimentConfig, data: &Dataset, model_cfg: ModelConfig, run: &RunDir) -> Result<TrainedRun> {
    cfg.validate()?;
    let inputs = GraphInputs::from_training(&data.split.train);
    let mut model = init_model(cfg, model_cfg, data.dims())?;
    let ckpt = run.file(CHECKPOINT_FILE);
    let extra = seed_entries(cfg);
    let mut log = BufWriter::new(File::create(run.file(TRAIN_LOG_FILE))?);
    writeln!(log, "epoch\ttrain_loss\tvalid_ll\tvalid_ppl")?;
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |v| v.to_string());
    let outcome = train(
        &mut model,
        &inputs,
        &data.split.train,
        &data.split.valid,
        &cfg.train,
        |e, improved, m| {
            writeln!(log, "{}\t{}\t{}\t{}", e.epoch, e.train_loss, opt(e.valid_ll), opt(e.valid_ppl))?;
            log.flush()?;
            if improved {
                m.save(&ckpt, &extra)?;
            }
            Ok(())
        },
    )?;
    info!(
        "best epoch {} (valid PPL {})",
        outcome.best_epoch,
        opt(outcome.best_valid_ppl)
    );
    Ok(TrainedRun { model, inputs, outcome })
}

/// Reports for the whole test set followed by the four cold-start partitions.
pub fn partition_reports(
    test: &[Session],
    scores: &[SessionScores],
    known: &KnownIds,
    relevance: Option<&Relevance>,
) -> Result<Vec<MetricsReport>> {
    let mut parts = vec![MetricsAccumulator::default(); ColdStartKind::ALL.len()];
    if test.len() != scores.len() {
        return Err(Error::invalid("one score set per test session is required"));
    }
    for (s, sc) in test.iter().zip(scores) {
        let kind = ColdStartKind::classify(s, known);
        let i = ColdStartKind::ALL.iter().position(|&k| k == kind).unwrap_or(0);
        parts[i].add_session(s, sc, relevance)?;
    }
    let all = accumulate(test, scores, relevance)?;
    let mut out = vec![all.report(ALL_PARTITION)];
    out.extend(
        ColdStartKind::ALL
            .iter()
            .zip(&parts)
            .map(|(k, acc)| acc.report(k.label())),
    );
    Ok(out)
}

pub fn evaluate_model(
    model: &GraphCm,
    inputs: &GraphInputs,
    data: &Dataset,
    cfg: &ExperimentConfig,
) -> Result<Vec<MetricsReport>> {
    let scores = predict(model, inputs, &data.split.test, cfg.train.eval_seed, cfg.train.batch_size)?;
    partition_reports(&data.split.test, &scores, &inputs.known, data.relevance.as_ref())
}

/// Key-value lines of every report, in order.
pub fn reports_kv(reports: &[MetricsReport]) -> String {
    reports.iter().map(MetricsReport::to_kv_lines).collect()
}

pub fn write_reports(run: &RunDir, reports: &[MetricsReport]) -> Result<()> {
    run.write_text(METRICS_FILE, &reports_kv(reports))?;
    run.write_text(TABLE_FILE, &format_table(reports))
}

/// Trains with `cfg` and evaluates the selected checkpoint on the test split.
pub fn train_and_evaluate(cfg: &ExperimentConfig, data: &Dataset, run: &RunDir) -> Result<(TrainedRun, Vec<MetricsReport>)> {
    let trained = train_model(cfg, data, cfg.model.clone(), run)?;
    let reports = evaluate_model(&trained.model, &trained.inputs, data, cfg)?;
    write_reports(run, &reports)?;
    Ok((trained, reports))
}

/// Evaluates a saved checkpoint against a dataset whose training split
/// defines the graphs and the known ids.
pub fn evaluate_checkpoint(path: &Path, data: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<MetricsReport>> {
    let model = GraphCm::load(path)?;
    let dims = data.dims();
    if dims.queries > model.dims.queries || dims.docs > model.dims.docs {
        return Err(Error::invalid(format!(
            "checkpoint vocabulary ({} queries, {} docs) is smaller than the dataset's ({}, {})",
            model.dims.queries, model.dims.docs, dims.queries, dims.docs
        )));
    }
    let inputs = GraphInputs::from_training(&data.split.train);
    evaluate_model(&model, &inputs, data, cfg)
}

/// Named ablation variants accepted by [`parse_ablation`].
pub const ABLATION_NAMES: [&str; 6] = ["full", "no_q_gat", "no_d_gat", "no_interaction", "no_gat", "ncm_like"];

pub fn parse_ablation(name: &str) -> Result<Ablation> {
    let full = Ablation::FULL;
    Ok(match name {
        "full" => full,
        "no_q_gat" => Ablation { use_q_gat: false, ..full },
        "no_d_gat" => Ablation { use_d_gat: false, ..full },
        "no_interaction" => Ablation {
            use_neighbor_interaction: false,
            ..full
        },
        "no_gat" => Ablation::NO_GAT,
        "ncm_like" => Ablation::NCM_LIKE,
        _ => {
            return Err(Error::Config(format!(
                "unknown ablation {name:?}; expected one of {}",
                ABLATION_NAMES.join(", ")
            )))
        }
    })
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: String,
    pub outcome: TrainOutcome,
    pub reports: Vec<MetricsReport>,
}

/// Trains each variant with identical seeds, data order and neighbor samples
/// (only the model structure differs), each in its own subdirectory.
pub fn ablate(cfg: &ExperimentConfig, data: &Dataset, variants: &[&str], run: &RunDir) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for &name in variants {
        let mut model_cfg = cfg.model.clone();
        model_cfg.ablation = parse_ablation(name)?;
        let child = run.child(name)?;
        info!("ablation variant {name}");
        let trained = train_model(cfg, data, model_cfg, &child)?;
        let reports = evaluate_model(&trained.model, &trained.inputs, data, cfg)?;
        write_reports(&child, &reports)?;
        rows.push(AblationRow {
            variant: name.to_owned(),
            outcome: trained.outcome,
            reports,
        });
    }
    run.write_text(TABLE_FILE, &ablation_table(&rows))?;
    run.write_text(METRICS_FILE, &ablation_kv(&rows))?;
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"))
}

/// Side-by-side table: one row per variant, LL and PPL per partition.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else {
        return out;
    };
    let mut header = vec!["variant".to_owned()];
    for r in &first.reports {
        header.push(format!("{} LL", r.partition));
        header.push(format!("{} PPL", r.partition));
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut v = vec![row.variant.clone()];
            for r in &row.reports {
                v.push(cell(r.ll));
                v.push(cell(r.ppl));
            }
            v
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    for line in std::iter::once(&header).chain(&body) {
        let cells: Vec<String> = line.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

/// Key-value lines prefixed by the variant: `variant/partition metric value`.
pub fn ablation_kv(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    for row in rows {
        for r in &row.reports {
            let mut r = r.clone();
            r.partition = format!("{}/{}", row.variant, r.partition);
            out.push_str(&r.to_kv_lines());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub lr: f64,
    pub l2: f64,
    pub dropout: f64,
    pub k: usize,
    pub valid_ppl: Option<f64>,
}

/// Exhaustive search over the configured grids; returns every point and
/// the configuration with the lowest validation perplexity.
pub fn grid_search(cfg: &ExperimentConfig, data: &Dataset, run: &RunDir) -> Result<(Vec<GridPoint>, ExperimentConfig)> {
    let g = &cfg.grid;
    let mut points = Vec::new();
    let mut best: Option<(f64, ExperimentConfig)> = None;
    for &lr in &g.lr {
        for &l2 in &g.l2 {
            for &dropout in &g.dropout {
                for &k in &g.k {
                    let mut c = cfg.clone();
                    c.train.lr = lr;
                    c.train.l2 = l2;
                    c.model.dropout = dropout;
                    c.model.gat.k = k;
                    let child = run.child(&format!("lr{lr}_l2{l2}_dropout{dropout}_k{k}"))?;
                    let trained = train_model(&c, data, c.model.clone(), &child)?;
                    let ppl = trained.outcome.best_valid_ppl;
                    if let Some(p) = ppl {
                        if best.as_ref().is_none_or(|(b, _)| p < *b) {
                            best = Some((p, c));
                        }
                    }
                    points.push(GridPoint {
                        lr,
                        l2,
                        dropout,
                        k,
                        valid_ppl: ppl,
                    });
                }
            }
        }
    }
    let mut text = String::from("lr\tl2\tdropout\tk\tvalid_ppl\n");
    for p in &points {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}",
            p.lr,
            p.l2,
            p.dropout,
            p.k,
            p.valid_ppl.map_or("-".into(), |v| v.to_string())
        );
    }
    run.write_text("grid.tsv", &text)?;
    let best = best
        .map(|(_, c)| c)
        .ok_or_else(|| Error::invalid("grid search needs a validation split with clicks"))?;
    Ok((points, best))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inspection {
    pub combination: String,
    pub alpha: f64,
    pub beta: f64,
}

impl Inspection {
    pub fn to_text(&self) -> String {
        format!(
            "combination {}\nalpha {}\nbeta {}\n",
            self.combination, self.alpha, self.beta
        )
    }
}

/// Learned combination coefficients of a checkpoint; an error for
/// combinations without scalar coefficients.
pub fn inspect_checkpoint(path: &Path) -> Result<Inspection> {
    let model = GraphCm::load(path)?;
    let (alpha, beta) = model.combination_coefficients()?;
    Ok(Inspection {
        combination: model.config.combination.as_str().to_owned(),
        alpha,
        beta,
    })
}

/// Scores `test` with a fitted baseline and reports per partition; the
/// cold-start partition is relative to `train`.
pub fn evaluate_baseline(
    model: &Baseline,
    train: &[Session],
    test: &[Session],
    relevance: Option<&Relevance>,
) -> Result<Vec<MetricsReport>> {
    let known = KnownIds::from_sessions(train);
    let scores: Vec<SessionScores> = test.iter().map(|s| model.score_session(s)).collect();
    partition_reports(test, &scores, &known, relevance)
}

/// Parses a comma-separated list of baseline names; `all` selects every kind.
pub fn parse_baseline_kinds(list: &str) -> Result<Vec<BaselineKind>> {
    if list.trim() == "all" {
        return Ok(BaselineKind::ALL.to_vec());
    }
    list.split(',')
        .map(|s| {
            BaselineKind::parse(s.trim()).ok_or_else(|| Error::Config(format!("unknown baseline {s:?}")))
        })
        .collect()
}
