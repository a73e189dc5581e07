use log::{info, warn};
use rand::seq::SliceRandom;

use super::batch::{build_batch, BatchOptions, GraphContext};
use super::config::RankScore;
use super::network::GraphCm;
use crate::autodiff::{adam_step, AdamConfig, ParamStore};
use crate::error::{Error, Result};
use crate::eval::{accumulate, MetricsAccumulator, SessionScores};
use crate::graph::{build_doc_graph, build_query_graph, sample_neighbors, HomogeneousGraph, NeighborSample};
use crate::rng::{derive_seed, stream_rng};
use crate::session_log::{KnownIds, Session};

/// Graphs and known ids derived from the training split.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub query_graph: HomogeneousGraph,
    pub doc_graph: HomogeneousGraph,
    pub known: KnownIds,
}

impl GraphInputs {
    pub fn from_training(train: &[Session]) -> Self {
        GraphInputs {
            query_graph: build_query_graph(train),
            doc_graph: build_doc_graph(train),
            known: KnownIds::from_sessions(train),
        }
    }

    fn samples(&self, model: &GraphCm, seed: u64) -> Result<(NeighborSample, NeighborSample)> {
        let k = model.k();
        let policy = model.config.sampling;
        Ok((
            sample_neighbors(&self.query_graph, k, derive_seed(seed, 1), policy)?,
            sample_neighbors(&self.doc_graph, k, derive_seed(seed, 2), policy)?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub l2: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Seeds data order, dropout and UNKNOWN substitution.
    pub seed: u64,
    /// Seeds the per-epoch neighbor samples.
    pub sample_seed: u64,
    /// Seeds the fixed neighbor samples used for validation and testing.
    pub eval_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            lr: 1e-3,
            l2: 1e-5,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            sample_seed: 1,
            eval_seed: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0) || self.l2 < 0.0 {
            return Err(Error::Config("learning rate must be positive and L2 non-negative".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::Config("at least one epoch is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training BCE over impressions.
    pub train_loss: f64,
    pub valid_ll: Option<f64>,
    pub valid_ppl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub best_valid_ppl: Option<f64>,
    pub stopped_early: bool,
}

/// Scores every session with fixed neighbor samples drawn from `eval_seed`.
/// Each session also sees its own consecutive edges up to the current step.
pub fn predict(
    model: &GraphCm,
    inputs: &GraphInputs,
    sessions: &[Session],
    eval_seed: u64,
    batch_size: usize,
) -> Result<Vec<SessionScores>> {
    let (qs, ds) = inputs.samples(model, eval_seed)?;
    let ctx = GraphContext {
        query_graph: &inputs.query_graph,
        doc_graph: &inputs.doc_graph,
        query_sample: &qs,
        doc_sample: &ds,
        known: &inputs.known,
        policy: model.config.sampling,
        seed: derive_seed(eval_seed, 3),
        augment: true,
    };
    let mut out = Vec::with_capacity(sessions.len());
    let mut rng = stream_rng(eval_seed, 4);
    for chunk in sessions.chunks(batch_size.max(1)) {
        let refs: Vec<&Session> = chunk.iter().collect();
        let batch = build_batch::<rand_chacha::ChaCha8Rng>(
            &refs,
            &ctx,
            BatchOptions {
                max_position: model.dims.max_position,
                with_interaction: model.config.ablation.use_neighbor_interaction,
                substitution: None,
            },
        );
        let fwd = model.forward(&batch, false, &mut rng)?;
        let click = fwd.per_session(&batch, fwd.click);
        let rank = match model.config.rank_by {
            RankScore::Attractiveness => fwd.per_session(&batch, fwd.attractiveness),
            RankScore::ClickProbability => click.clone(),
        };
        out.extend(
            click
                .into_iter()
                .zip(rank)
                .map(|(click, rank_score)| SessionScores { click, rank_score }),
        );
    }
    Ok(out)
}

/// Click metrics of `model` on `sessions`.
pub fn evaluate_sessions(
    model: &GraphCm,
    inputs: &GraphInputs,
    sessions: &[Session],
    eval_seed: u64,
    batch_size: usize,
) -> Result<MetricsAccumulator> {
    let scores = predict(model, inputs, sessions, eval_seed, batch_size)?;
    accumulate(sessions, &scores, None)
}

/// Trains with Adam and keeps the parameters of the epoch with the lowest
/// validation perplexity. With an empty validation set the last epoch is kept.
///
/// `on_epoch` runs after every epoch with the log entry and whether the
/// epoch is the new best. A non-finite loss restores the best parameters
/// and returns [`Error::Diverged`].
pub fn train(
    model: &mut GraphCm,
    inputs: &GraphInputs,
    train_set: &[Session],
    valid: &[Session],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog, bool, &GraphCm) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let adam = AdamConfig::new(cfg.lr, cfg.l2);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut outcome = TrainOutcome {
        epochs: Vec::new(),
        best_epoch: 0,
        best_valid_ppl: None,
        stopped_early: false,
    };
    let mut since_best = 0;
    for epoch in 1..=cfg.max_epochs {
        let mut rng = stream_rng(cfg.seed, epoch as u64);
        order.shuffle(&mut rng);
        let (qs, ds) = inputs.samples(model, derive_seed(cfg.sample_seed, epoch as u64))?;
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let refs: Vec<&Session> = chunk.iter().map(|&i| &train_set[i]).collect();
            let ctx = GraphContext {
                query_graph: &inputs.query_graph,
                doc_graph: &inputs.doc_graph,
                query_sample: &qs,
                doc_sample: &ds,
                known: &inputs.known,
                policy: model.config.sampling,
                seed: 0,
                augment: false,
            };
            let batch = build_batch(
                &refs,
                &ctx,
                BatchOptions {
                    max_position: model.dims.max_position,
                    with_interaction: model.config.ablation.use_neighbor_interaction,
                    substitution: Some((model.config.unknown_substitution, &mut rng)),
                },
            );
            let grads = {
                let mut fwd = model.forward(&batch, true, &mut rng)?;
                let loss = fwd.bce(&batch)?;
                let value = fwd.tape.scalar(loss);
                if !value.is_finite() {
                    if let Some((_, store)) = &best {
                        model.store.load_values(store)?;
                    }
                    return Err(Error::Diverged { epoch, loss: value });
                }
                let n = batch.impression_count();
                loss_sum += value * n as f64;
                count += n;
                fwd.tape.backward(loss)?
            };
            adam_step(&mut model.store, &grads, &adam)?;
        }
        let train_loss = loss_sum / count.max(1) as f64;
        let (valid_ll, valid_ppl) = if valid.is_empty() {
            (None, None)
        } else {
            let acc = evaluate_sessions(model, inputs, valid, cfg.eval_seed, cfg.batch_size)?;
            (acc.clicks.log_likelihood(), acc.clicks.perplexity())
        };
        let log = EpochLog {
            epoch,
            train_loss,
            valid_ll,
            valid_ppl,
        };
        info!(
            "epoch {epoch}: train loss {train_loss:.6}, valid PPL {}",
            valid_ppl.map_or("-".into(), |p| format!("{p:.6}"))
        );
        let improved = match (valid_ppl, &best) {
            (None, _) => true,
            (Some(p), None) => p.is_finite(),
            (Some(p), Some((b, _))) => p < *b,
        };
        if improved {
            best = Some((valid_ppl.unwrap_or(f64::NAN), model.store.clone()));
            outcome.best_epoch = epoch;
            outcome.best_valid_ppl = valid_ppl;
            since_best = 0;
        } else {
            since_best += 1;
        }
        on_epoch(&log, improved, model)?;
        outcome.epochs.push(log);
        if valid_ppl.is_some() && since_best >= cfg.patience {
            outcome.stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    match best {
        Some((_, store)) => model.store.load_values(&store)?,
        None => warn!("no epoch produced a finite validation perplexity"),
    }
    Ok(outcome)
}
