//! Parse a JSON-lines session log, print its statistics and write a
//! seeded 8/1/1 split.
//!
//! cargo run --example parse_and_split -- [log.jsonl] [out_dir]

use std::fs::File;
use std::io::{BufReader, Cursor};
use std::path::PathBuf;

use graphcm::harness::synth::{generate, GeneratorKind, SyntheticSpec};
use graphcm::session_log::*;

fn main() -> graphcm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut corpus = Corpus::new();
    let parsed = match args.first() {
        Some(path) => parse_log(BufReader::new(File::open(path)?), &mut corpus)?,
        None => {
            // no input given: a small synthetic log, round-tripped through text
            let data = generate(&SyntheticSpec::new(GeneratorKind::Pbm, 200, 1))?;
            let mut text = Vec::new();
            write_raw_log(&mut text, &data.sessions)?;
            parse_log(Cursor::new(text), &mut corpus)?
        }
    };
    for e in &parsed.rejected {
        eprintln!("skipped line {}: {}", e.line, e.message);
    }
    let sessions = parsed.into_strict()?;
    let stats = log_stats(&sessions)?;
    println!("{stats:#?}");

    let split = split_dataset(sessions, SplitRatios::default(), 7)?;
    println!("train {} / valid {} / test {}", split.train.len(), split.valid.len(), split.test.len());

    let out = args.get(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("graphcm-split"));
    write_split_dir(&out, &split, &corpus)?;
    println!("wrote {}", out.display());
    Ok(())
}
