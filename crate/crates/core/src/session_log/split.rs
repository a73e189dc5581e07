use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::types::Session;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRatios {
    pub train: u32,
    pub valid: u32,
    pub test: u32,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 8,
            valid: 1,
            test: 1,
        }
    }
}

impl SplitRatios {
    /// Partition sizes for `n` items by largest remainder; ties go to the
    /// earlier partition.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let weights = [self.train, self.valid, self.test].map(|w| w as usize);
        let total: usize = weights.iter().sum();
        let mut counts = weights.map(|w| n * w / total);
        let mut rem: Vec<(usize, usize)> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (n * w % total, i))
            .collect();
        rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let assigned: usize = counts.iter().sum();
        for &(_, i) in rem.iter().take(n - assigned) {
            counts[i] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Session>,
    pub valid: Vec<Session>,
    pub test: Vec<Session>,
    pub ratios: SplitRatios,
    pub seed: u64,
}

/// Session-level seeded split. Each part keeps the input's relative order.
pub fn split_dataset(sessions: Vec<Session>, ratios: SplitRatios, seed: u64) -> Result<DatasetSplit> {
    let parts = [ratios.train, ratios.valid, ratios.test]
        .iter()
        .filter(|&&w| w > 0)
        .count();
    if parts == 0 {
        return Err(Error::invalid("split ratios are all zero"));
    }
    if sessions.len() < parts {
        return Err(Error::invalid(format!(
            "cannot split {} sessions into {} partitions",
            sessions.len(),
            parts
        )));
    }
    let [n_train, n_valid, _] = ratios.counts(sessions.len());

    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut label = vec![2u8; sessions.len()];
    for &i in &order[..n_train] {
        label[i] = 0;
    }
    for &i in &order[n_train..n_train + n_valid] {
        label[i] = 1;
    }

    let mut split = DatasetSplit {
        train: Vec::with_capacity(n_train),
        valid: Vec::with_capacity(n_valid),
        test: Vec::new(),
        ratios,
        seed,
    };
    for (s, l) in sessions.into_iter().zip(label) {
        match l {
            0 => split.train.push(s),
            1 => split.valid.push(s),
            _ => split.test.push(s),
        }
    }
    Ok(split)
}
