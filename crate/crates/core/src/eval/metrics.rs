use crate::autodiff::PROB_EPS;
use crate::error::{Error, Result};

/// Truncation levels reported for NDCG.
pub const NDCG_CUTOFFS: [usize; 4] = [1, 3, 5, 10];

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Natural-log likelihood of one binary outcome.
pub fn click_log_likelihood(p: f64, click: bool) -> f64 {
    let p = clamp_prob(p);
    if click {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// Mean per-impression log-likelihood.
pub fn log_likelihood(predictions: &[f64], clicks: &[bool]) -> Result<f64> {
    if predictions.len() != clicks.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} clicks",
            predictions.len(),
            clicks.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("log-likelihood of an empty set"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(clicks)
        .map(|(&p, &c)| click_log_likelihood(p, c))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Per-rank perplexity for rank-aligned predictions.
///
/// `ranks[i]` is the 1-based rank of impression `i`. Returns `PPL@r` for
/// `r = 1..=max rank` (`None` for ranks without impressions) and their mean.
pub fn perplexity(predictions: &[f64], clicks: &[bool], ranks: &[usize]) -> Result<(Vec<Option<f64>>, f64)> {
    if predictions.len() != clicks.len() || predictions.len() != ranks.len() {
        return Err(Error::invalid("predictions, clicks and ranks differ in length"));
    }
    let mut acc = ClickMetrics::default();
    for ((&p, &c), &r) in predictions.iter().zip(clicks).zip(ranks) {
        acc.add(r, p, c)?;
    }
    let by_rank = acc.perplexity_by_rank();
    let mean = acc
        .perplexity()
        .ok_or_else(|| Error::invalid("perplexity of an empty set"))?;
    Ok((by_rank, mean))
}

/// Additive click-prediction statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClickMetrics {
    ll_sum: f64,
    count: usize,
    /// Per rank (index `r - 1`): sum of log2-likelihoods and impression count.
    ranks: Vec<(f64, usize)>,
}

impl ClickMetrics {
    pub fn add(&mut self, rank: usize, p: f64, click: bool) -> Result<()> {
        if rank == 0 {
            return Err(Error::invalid("ranks are 1-based"));
        }
        let ll = click_log_likelihood(p, click);
        self.ll_sum += ll;
        self.count += 1;
        if self.ranks.len() < rank {
            self.ranks.resize(rank, (0.0, 0));
        }
        let slot = &mut self.ranks[rank - 1];
        slot.0 += ll / std::f64::consts::LN_2;
        slot.1 += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ClickMetrics) {
        self.ll_sum += other.ll_sum;
        self.count += other.count;
        if self.ranks.len() < other.ranks.len() {
            self.ranks.resize(other.ranks.len(), (0.0, 0));
        }
        for (a, b) in self.ranks.iter_mut().zip(&other.ranks) {
            a.0 += b.0;
            a.1 += b.1;
        }
    }

    pub fn impressions(&self) -> usize {
        self.count
    }

    pub fn log_likelihood(&self) -> Option<f64> {
        (self.count > 0).then(|| self.ll_sum / self.count as f64)
    }

    pub fn perplexity_by_rank(&self) -> Vec<Option<f64>> {
        self.ranks
            .iter()
            .map(|&(s, n)| (n > 0).then(|| 2f64.powf(-s / n as f64)))
            .collect()
    }

    /// Mean of `PPL@r` over ranks that have impressions.
    pub fn perplexity(&self) -> Option<f64> {
        let v: Vec<f64> = self.perplexity_by_rank().into_iter().flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// NDCG@k of one ranked list. `scores` and `grades` are in displayed
/// order; ties keep displayed order. Returns `None` when every grade is 0.
pub fn ndcg_at_k(scores: &[f64], grades: &[u8], k: usize) -> Result<Option<f64>> {
    if k < 1 {
        return Err(Error::invalid("NDCG cutoff must be at least 1"));
    }
    if scores.len() != grades.len() {
        return Err(Error::invalid("scores and grades differ in length"));
    }
    if grades.iter().all(|&g| g == 0) {
        return Ok(None);
    }
    let gain = |g: u8| 2f64.powi(g as i32) - 1.0;
    let dcg = |order: &[usize]| -> f64 {
        order
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, &j)| gain(grades[j]) / ((i + 2) as f64).log2())
            .sum()
    };
    let mut by_score: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps displayed order among ties
    by_score.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ideal: Vec<usize> = (0..grades.len()).collect();
    ideal.sort_by(|&a, &b| grades[b].cmp(&grades[a]));
    Ok(Some(dcg(&by_score) / dcg(&ideal)))
}

/// Additive NDCG statistics at the standard cutoffs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankingMetrics {
    sums: [f64; NDCG_CUTOFFS.len()],
    lists: usize,
}

impl RankingMetrics {
    pub fn add(&mut self, scores: &[f64], grades: &[u8]) -> Result<()> {
        if grades.iter().all(|&g| g == 0) {
            return Ok(());
        }
        for (i, &k) in NDCG_CUTOFFS.iter().enumerate() {
            self.sums[i] += ndcg_at_k(scores, grades, k)?.unwrap_or(0.0);
        }
        self.lists += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &RankingMetrics) {
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            *a += b;
        }
        self.lists += other.lists;
    }

    pub fn lists(&self) -> usize {
        self.lists
    }

    /// `(k, mean NDCG@k)` pairs; empty when no list had a positive grade.
    pub fn ndcg(&self) -> Vec<(usize, f64)> {
        if self.lists == 0 {
            return Vec::new();
        }
        NDCG_CUTOFFS
            .iter()
            .zip(self.sums)
            .map(|(&k, s)| (k, s / self.lists as f64))
            .collect()
    }
}
