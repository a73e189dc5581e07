//! Fit PBM, UBM, DCM and SDBN on a UBM-generated log, compare their test
//! metrics and dump the fitted parameters.

use std::io::Cursor;

use graphcm::baselines::*;
use graphcm::eval::format_table;
use graphcm::harness::evaluate_baseline;
use graphcm::harness::synth::{generate, GeneratorKind, SyntheticSpec};
use graphcm::session_log::*;

fn main() -> graphcm::Result<()> {
    let data = generate(&SyntheticSpec::new(GeneratorKind::Ubm, 20_000, 2))?;
    let mut corpus = Corpus::new();
    let log: Vec<Session> = data.sessions.iter().map(|r| corpus.ingest(r).unwrap()).collect();
    let split = split_dataset(log, SplitRatios::default(), 2)?;

    let em = EmConfig::default();
    for kind in BaselineKind::ALL {
        let (model, trace) = Baseline::fit(kind, &split.train, &em)?;
        let reports = evaluate_baseline(&model, &split.train, &split.test, None)?;
        match trace.iterations() {
            0 => println!("{} (no EM trace)", kind.as_str()),
            n => println!("{} ({n} EM iterations)", kind.as_str()),
        }
        print!("{}", format_table(&reports[..1]));

        let mut dump = Vec::new();
        write_baseline(&mut dump, &model, &corpus)?;
        let back = read_baseline(Cursor::new(&dump), &mut corpus.clone())?;
        assert_eq!(back.kind(), kind);
        println!("  dump: {} lines\n", dump.iter().filter(|&&b| b == b'\n').count());
    }
    Ok(())
}
