//! Click-prediction and ranking metrics: log-likelihood, per-rank and mean
//! perplexity, NDCG at fixed cutoffs, and per-partition reports.

mod metrics;
mod report;

pub use metrics::{
    click_log_likelihood, log_likelihood, ndcg_at_k, perplexity, ClickMetrics, RankingMetrics,
    NDCG_CUTOFFS,
};
pub use report::{accumulate, format_table, MetricsAccumulator, MetricsReport, SessionScores};
