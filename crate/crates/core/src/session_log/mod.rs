//! Session-log ingestion: parsing, vocabularies, splits, cold-start
//! partitioning and corpus statistics.

mod cold_start;
mod parse;
mod relevance;
mod split;
mod stats;
mod types;

pub use cold_start::{partition_cold_start, partition_with, ColdStartKind, ColdStartPartition, KnownIds};
pub use parse::{
    parse_log, write_log, write_raw_log, LineError, ParsedLog, RawDoc, RawQuery, RawSession,
    SHARED_VERTICAL,
};
pub use relevance::{parse_relevance, write_raw_relevance, Relevance};
pub use split::{split_dataset, DatasetSplit, SplitRatios};
pub use stats::{log_stats, sparsity_ratio, LogStats};
pub use types::{
    Corpus, DocId, ImpressionRecord, QueryId, QueryRecord, Session, VerticalId, Vocabulary,
};

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::error::Result;

/// Parses a log file strictly (any rejected line is an error).
pub fn read_log_file(path: &Path, corpus: &mut Corpus) -> Result<Vec<Session>> {
    let parsed = parse_log(BufReader::new(File::open(path)?), corpus)?;
    parsed.into_strict()
}

/// Loads `train.jsonl`, `valid.jsonl`, `test.jsonl` from a split directory
/// into one shared corpus. Loading order fixes the dense ids, so repeated
/// loads of the same directory produce identical ids.
pub fn load_split_dir(dir: &Path) -> Result<(Corpus, DatasetSplit)> {
    let mut corpus = Corpus::new();
    let train = read_log_file(&dir.join("train.jsonl"), &mut corpus)?;
    let valid = read_log_file(&dir.join("valid.jsonl"), &mut corpus)?;
    let test = read_log_file(&dir.join("test.jsonl"), &mut corpus)?;
    Ok((
        corpus,
        DatasetSplit {
            train,
            valid,
            test,
            ratios: SplitRatios::default(),
            seed: 0,
        },
    ))
}

pub fn write_split_dir(dir: &Path, split: &DatasetSplit, corpus: &Corpus) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, part) in [
        ("train.jsonl", &split.train),
        ("valid.jsonl", &split.valid),
        ("test.jsonl", &split.test),
    ] {
        let f = std::io::BufWriter::new(File::create(dir.join(name))?);
        write_log(f, part, corpus)?;
    }
    Ok(())
}
