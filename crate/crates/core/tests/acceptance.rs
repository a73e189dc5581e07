//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so the summary always prints.

mod common;

use std::collections::HashSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::gradcheck::gradient_suite;
use common::FD_TOLERANCE;
use graphcm::autodiff::{Matrix, ParamStore, Tape};
use graphcm::baselines::{fit_pbm, Baseline, BaselineKind, EmConfig};
use graphcm::eval::{log_likelihood, ndcg_at_k, perplexity, MetricsReport};
use graphcm::harness::synth::{generate, GeneratorKind, SyntheticData, SyntheticSpec};
use graphcm::harness::*;
use graphcm::model::*;
use graphcm::rng::stream_rng;
use graphcm::session_log::*;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ingest(data: &SyntheticData) -> (Corpus, Vec<Session>) {
    let mut corpus = Corpus::new();
    let sessions = data.sessions.iter().map(|r| corpus.ingest(r).unwrap()).collect();
    (corpus, sessions)
}

fn synthetic_split(kind: GeneratorKind, sessions: usize, seed: u64) -> (SyntheticData, Dataset) {
    let data = generate(&SyntheticSpec::new(kind, sessions, seed)).unwrap();
    let (corpus, log) = ingest(&data);
    let split = split_dataset(log, SplitRatios::default(), seed).unwrap();
    (
        data,
        Dataset {
            corpus,
            split,
            relevance: None,
        },
    )
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("graphcm-acceptance-{}", std::process::id())).join(name);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn planted_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.model.query_dim = 16;
    cfg.model.doc_dim = 16;
    cfg.model.hidden = 16;
    cfg.train.max_epochs = 15;
    cfg.train.seed = seed;
    cfg.init_seed = seed;
    cfg
}

fn ppl(reports: &[MetricsReport], partition: &str) -> f64 {
    reports.iter().find(|r| r.partition == partition).and_then(|r| r.ppl).unwrap_or(f64::NAN)
}

// 1 -------------------------------------------------------------------------

fn gradients() -> Outcome {
    let start = Instant::now();
    let results = gradient_suite(4, 3);
    let elapsed = start.elapsed();
    let instances: usize = results.iter().map(|r| r.instances).sum();
    let worst = results.iter().max_by(|a, b| a.worst.total_cmp(&b.worst)).unwrap();
    let failing: Vec<&str> = results.iter().filter(|r| !(r.worst < FD_TOLERANCE)).map(|r| r.name.as_str()).collect();
    outcome(
        failing.is_empty() && instances >= 100 && elapsed < Duration::from_secs(120),
        format!(
            "{} cases, {instances} instances, worst rel err {:.2e} ({}), {:.1}s{}",
            results.len(),
            worst.worst,
            worst.name,
            elapsed.as_secs_f64(),
            if failing.is_empty() { String::new() } else { format!(", failing: {}", failing.join(", ")) }
        ),
    )
}

// 2 -------------------------------------------------------------------------

fn pbm_recovery() -> Outcome {
    let start = Instant::now();
    let spec = SyntheticSpec::new(GeneratorKind::Pbm, 50_000, 2);
    let data = generate(&spec).unwrap();
    let (corpus, log) = ingest(&data);
    let (model, trace) = fit_pbm(&log, &EmConfig::default()).unwrap();
    let mut err = 0.0;
    let mut n = 0usize;
    for s in &log {
        let truth = data.truth.click_probabilities(&corpus.to_raw(s)).unwrap();
        let q = &s.queries[0];
        for (imp, t) in q.impressions.iter().zip(truth) {
            err += (model.click_probability(q.query, imp.doc, imp.position as usize) - t).abs();
            n += 1;
        }
    }
    let mae = err / n as f64;
    let ll_monotone = trace.log_likelihood.windows(2).all(|w| w[1] >= w[0]);
    let elapsed = start.elapsed();
    outcome(
        mae <= 0.01 && ll_monotone && elapsed < Duration::from_secs(60),
        format!(
            "M={}, MAE {mae:.5}, {} EM iterations, LL nondecreasing: {ll_monotone}, {:.1}s",
            spec.serp_len,
            trace.iterations(),
            elapsed.as_secs_f64()
        ),
    )
}

// 3 -------------------------------------------------------------------------

fn well_specification() -> Outcome {
    let kinds = [
        (GeneratorKind::Pbm, BaselineKind::Pbm),
        (GeneratorKind::Ubm, BaselineKind::Ubm),
        (GeneratorKind::Sdbn, BaselineKind::Sdbn),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in 0..3 {
        for &(generator, matching) in &kinds {
            // ten ranks: UBM nests PBM, and its 55 examination cells against
            // PBM's 10 make the nesting cost visible on PBM logs
            let mut spec = SyntheticSpec::new(generator, 5_000, 30 + seed);
            spec.serp_len = 10;
            spec.docs = 10;
            let data = generate(&spec).unwrap();
            let (corpus, log) = ingest(&data);
            let data = Dataset {
                corpus,
                split: split_dataset(log, SplitRatios::default(), 30 + seed).unwrap(),
                relevance: None,
            };
            let mut scores = Vec::new();
            for &(_, kind) in &kinds {
                let (model, _) = Baseline::fit(kind, &data.split.train, &EmConfig::default()).unwrap();
                let r = evaluate_baseline(&model, &data.split.train, &data.split.test, None).unwrap();
                scores.push((kind, ppl(&r, ALL_PARTITION)));
            }
            let best = scores.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
            let ok = best == matching;
            pass &= ok;
            if !ok {
                parts.push(format!("seed {seed} {} data: best {}", generator.as_str(), best.as_str()));
            }
        }
    }
    let detail = if parts.is_empty() {
        "matching baseline lowest test PPL for pbm, ubm, sdbn data on 3 seeds (M=10, 5000 sessions)".to_owned()
    } else {
        parts.join("; ")
    };
    outcome(pass, detail)
}

// 4 -------------------------------------------------------------------------

fn metric_identities() -> Outcome {
    let mut rng = stream_rng(4, 0);
    let n = 1000;
    let clicks: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    let ranks: Vec<usize> = (0..n).map(|i| i % 10 + 1).collect();
    let half = vec![0.5; n];
    let ll = log_likelihood(&half, &clicks).unwrap();
    let (by_rank, mean) = perplexity(&half, &clicks, &ranks).unwrap();
    let ppl_exact = mean == 2.0 && by_rank.iter().all(|p| *p == Some(2.0));
    let ll_ok = (ll + std::f64::consts::LN_2).abs() <= 1e-12;
    let mut ndcg_ok = true;
    for _ in 0..200 {
        let len = rng.random_range(1..12);
        let grades: Vec<u8> = (0..len).map(|_| rng.random_range(0..5u8)).collect();
        let scores: Vec<f64> = grades.iter().map(|&g| g as f64 + rng.random::<f64>() * 0.5).collect();
        for k in [1, 3, 5, 10] {
            if let Some(v) = ndcg_at_k(&scores, &grades, k).unwrap() {
                ndcg_ok &= v == 1.0;
            }
        }
    }
    outcome(
        ppl_exact && ll_ok && ndcg_ok,
        format!("PPL_r = 2 exactly: {ppl_exact}, LL + ln2 = {:.1e}, ideal NDCG@k = 1: {ndcg_ok}", ll + std::f64::consts::LN_2),
    )
}

// 5 and 6 -------------------------------------------------------------------

struct PlantedSeed {
    full_all: f64,
    ncm_all: f64,
    full_cold: f64,
    no_gat_cold: f64,
    partition_exact: bool,
    cold_sessions: usize,
    slowest: Duration,
}

fn planted_seed(seed: u64) -> PlantedSeed {
    let (_, mut data) = synthetic_split(GeneratorKind::GraphPlanted, 10_000, seed);
    let held = hold_out_test_queries(&mut data.split, 0.1, seed).unwrap();

    // partition checked against id sets gathered here
    let train_q: HashSet<QueryId> = data.split.train.iter().flat_map(|s| s.queries.iter().map(|q| q.query)).collect();
    let train_d: HashSet<DocId> = data.split.train.iter().flat_map(|s| s.impressions().map(|(_, _, i)| i.doc)).collect();
    let part = partition_cold_start(&data.split);
    let mut seen = HashSet::new();
    let mut partition_exact = held.iter().all(|q| !train_q.contains(q));
    for kind in ColdStartKind::ALL {
        for s in part.get(kind) {
            partition_exact &= seen.insert(s.session_id.clone());
            let cq = s.queries.iter().any(|q| !train_q.contains(&q.query));
            let cd = s.impressions().any(|(_, _, i)| !train_d.contains(&i.doc));
            partition_exact &= kind
                == match (cq, cd) {
                    (true, true) => ColdStartKind::ColdQD,
                    (true, false) => ColdStartKind::ColdQ,
                    (false, true) => ColdStartKind::ColdD,
                    (false, false) => ColdStartKind::WarmQD,
                };
        }
    }
    let test_ids: HashSet<String> = data.split.test.iter().map(|s| s.session_id.clone()).collect();
    partition_exact &= seen == test_ids;

    let cfg = planted_config(seed);
    let dir = scratch(&format!("planted{seed}"));
    let mut slowest = Duration::ZERO;
    let mut run = |variant: &str| {
        let mut m = cfg.model.clone();
        m.ablation = parse_ablation(variant).unwrap();
        let start = Instant::now();
        let rd = RunDir::create_at(dir.join(variant), &cfg, "ablate").unwrap();
        let t = train_model(&cfg, &data, m, &rd).unwrap();
        let r = evaluate_model(&t.model, &t.inputs, &data, &cfg).unwrap();
        slowest = slowest.max(start.elapsed());
        r
    };
    let full = run("full");
    let ncm = run("ncm_like");
    let no_gat = run("no_gat");
    PlantedSeed {
        full_all: ppl(&full, ALL_PARTITION),
        ncm_all: ppl(&ncm, ALL_PARTITION),
        full_cold: ppl(&full, "cold_q"),
        no_gat_cold: ppl(&no_gat, "cold_q"),
        partition_exact,
        cold_sessions: part.cold_q.len() + part.cold_qd.len(),
        slowest,
    }
}

fn planted_criteria() -> (Outcome, Outcome) {
    let seeds: Vec<PlantedSeed> = (0..5).map(planted_seed).collect();
    let slowest = seeds.iter().map(|s| s.slowest).max().unwrap();
    let wins5 = seeds.iter().filter(|s| s.full_all < s.ncm_all).count();
    let five = outcome(
        wins5 >= 4 && slowest < Duration::from_secs(600),
        format!(
            "full < ncm_like on {wins5}/5 seeds (PPL {}), slowest run {:.0}s",
            seeds.iter().map(|s| format!("{:.4}/{:.4}", s.full_all, s.ncm_all)).collect::<Vec<_>>().join(" "),
            slowest.as_secs_f64()
        ),
    );
    let wins6 = seeds.iter().filter(|s| s.full_cold <= s.no_gat_cold).count();
    let exact = seeds.iter().all(|s| s.partition_exact);
    let six = outcome(
        wins6 >= 4 && exact,
        format!(
            "cold_q full <= no_gat on {wins6}/5 seeds (PPL {}), partitions exact: {exact}, cold sessions {}",
            seeds.iter().map(|s| format!("{:.4}/{:.4}", s.full_cold, s.no_gat_cold)).collect::<Vec<_>>().join(" "),
            seeds.iter().map(|s| s.cold_sessions.to_string()).collect::<Vec<_>>().join(",")
        ),
    );
    (five, six)
}

// 7 -------------------------------------------------------------------------

fn expmul() -> Outcome {
    let mut rng = stream_rng(7, 0);
    let n = 10_000;
    let e = Matrix::from_shape_simple_fn((n, 1), || rng.random_range(1e-6..1.0));
    let a = Matrix::from_shape_simple_fn((n, 1), || rng.random_range(1e-6..1.0));
    let eval = |kind| {
        let mut store = ParamStore::new();
        let c = Combination::new(&mut store, kind, 8, &mut stream_rng(0, 0)).unwrap();
        let mut tape = Tape::new(&store);
        let ev = tape.constant(e.clone());
        let av = tape.constant(a.clone());
        let p = c.forward(&mut tape, ev, av, 0.2).unwrap();
        tape.value(p).clone()
    };
    let equal = eval(CombinationKind::ExpMul) == eval(CombinationKind::Mul);

    let (_, data) = synthetic_split(GeneratorKind::GraphPlanted, 1_000, 7);
    let mut cfg = planted_config(7);
    cfg.model.combination = CombinationKind::ExpMul;
    cfg.train.max_epochs = 3;
    let run = RunDir::create_at(scratch("expmul"), &cfg, "train").unwrap();
    let trained = train_model(&cfg, &data, cfg.model.clone(), &run).unwrap();
    let inspection = inspect_checkpoint(&run.file(CHECKPOINT_FILE)).unwrap();
    let finite = inspection.alpha.is_finite() && inspection.beta.is_finite();
    let moved = trained.model.combination_coefficients().unwrap() != (1.0, 1.0);
    outcome(
        equal && finite,
        format!(
            "EXPMUL == MUL on {n} pairs: {equal}; after training alpha {:.4}, beta {:.4} (moved: {moved})",
            inspection.alpha, inspection.beta
        ),
    )
}

// 8 -------------------------------------------------------------------------

fn files_equal(a: &Path, b: &Path, names: &[&str]) -> Vec<String> {
    names
        .iter()
        .filter(|n| fs::read(a.join(n)).ok() != fs::read(b.join(n)).ok())
        .map(|n| n.to_string())
        .collect()
}

fn determinism() -> Outcome {
    let (_, data) = synthetic_split(GeneratorKind::GraphPlanted, 1_000, 8);
    let mut cfg = planted_config(8);
    cfg.train.max_epochs = 3;
    let dirs: Vec<_> = ["a", "b"]
        .iter()
        .map(|n| {
            let run = RunDir::create_at(scratch(&format!("det-{n}")), &cfg, "train").unwrap();
            train_and_evaluate(&cfg, &data, &run).unwrap();
            let rows = ablate(&cfg, &data, &["full", "no_gat"], &run).unwrap();
            run.write_text("ablation.txt", &ablation_kv(&rows)).unwrap();
            run.path
        })
        .collect();
    let names = [METRICS_FILE, TABLE_FILE, TRAIN_LOG_FILE, CHECKPOINT_FILE, "ablation.txt"];
    let differ = files_equal(&dirs[0], &dirs[1], &names);
    outcome(
        differ.is_empty(),
        if differ.is_empty() {
            format!("{} report files byte-identical across two runs", names.len())
        } else {
            format!("differing: {}", differ.join(", "))
        },
    )
}

// 9 -------------------------------------------------------------------------

fn overfit() -> Outcome {
    let (_, mut data) = synthetic_split(GeneratorKind::GraphPlanted, 100, 9);
    data.split.train.truncate(10);
    data.split.valid.clear();
    // full-width model, far more parameters than impressions
    let mut cfg = ExperimentConfig::default();
    cfg.train.seed = 9;
    cfg.init_seed = 9;
    cfg.model.dropout = 0.0;
    cfg.model.unknown_substitution = 0.0;
    cfg.train.max_epochs = 200;
    let run = RunDir::create_at(scratch("overfit"), &cfg, "train").unwrap();
    let trained = train_model(&cfg, &data, cfg.model.clone(), &run).unwrap();
    let reached = trained.outcome.epochs.iter().find(|e| e.train_loss < 0.05).map(|e| e.epoch);
    let last = trained.outcome.epochs.last().unwrap().train_loss;
    outcome(
        reached.is_some(),
        match reached {
            Some(ep) => format!("BCE < 0.05 at epoch {ep} (final {last:.5})"),
            None => format!("final BCE {last:.5} after 200 epochs"),
        },
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    // `cargo test -- --list` and filters are accepted but ignored
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    // GRAPHCM_ACCEPTANCE=2,5 runs a subset
    let only: Option<HashSet<u32>> = std::env::var("GRAPHCM_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut lines: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |n, name, o: Outcome| {
        println!("criterion {n} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        lines.push((n, name, o));
    };
    if wanted(1) {
        record(1, "finite-difference gradients", guarded(gradients));
    }
    if wanted(2) {
        record(2, "PBM recovery", guarded(pbm_recovery));
    }
    if wanted(3) {
        record(3, "baseline well-specification", guarded(well_specification));
    }
    if wanted(4) {
        record(4, "metric identities", guarded(metric_identities));
    }
    if wanted(5) || wanted(6) {
        let (five, six) = match panic::catch_unwind(planted_criteria) {
            Ok(p) => p,
            Err(_) => (outcome(false, "panicked"), outcome(false, "panicked")),
        };
        record(5, "full beats NCM-like", five);
        record(6, "cold-query graph benefit", six);
    }
    if wanted(7) {
        record(7, "EXPMUL initialization and inspect", guarded(expmul));
    }
    if wanted(8) {
        record(8, "deterministic reports", guarded(determinism));
    }
    if wanted(9) {
        record(9, "overfit ten sessions", guarded(overfit));
    }

    let _ = fs::remove_dir_all(std::env::temp_dir().join(format!("graphcm-acceptance-{}", std::process::id())));
    let failed: Vec<u32> = lines.iter().filter(|l| !l.2.pass).map(|l| l.0).collect();
    println!("\nacceptance: {}/{} criteria passed", lines.len() - failed.len(), lines.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
