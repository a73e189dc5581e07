//! Generate synthetic logs from every generator and write them with their
//! ground truth.
//!
//! cargo run --example synthesize -- [out_dir]

use std::path::PathBuf;

use graphcm::harness::synth::*;

fn main() -> graphcm::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("graphcm-synth"));
    for kind in [GeneratorKind::Pbm, GeneratorKind::Ubm, GeneratorKind::Sdbn, GeneratorKind::GraphPlanted] {
        let data = generate(&SyntheticSpec::new(kind, 2_000, 1))?;
        let clicks: usize = data.sessions.iter().flat_map(|s| &s.queries).flat_map(|q| &q.docs).map(|d| d.click as usize).sum();
        let dir = root.join(kind.as_str());
        write_synthetic(&dir, &data)?;
        let truth = read_truth(&dir.join(TRUTH_FILE))?;
        let first = &data.sessions[0];
        println!(
            "{:<13} {} sessions, {clicks} clicks, first page true click probs {:.3?} -> {}",
            kind.as_str(),
            data.sessions.len(),
            truth.click_probabilities(first)?,
            dir.display()
        );
    }
    Ok(())
}
