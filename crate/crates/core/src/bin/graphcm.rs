use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::warn;

use graphcm::baselines::{read_baseline, write_baseline, Baseline, BaselineKind};
use graphcm::eval::format_table;
use graphcm::graph::{build_doc_graph, build_query_graph, write_graph, HomogeneousGraph};
use graphcm::harness::synth::{generate, write_synthetic, GeneratorKind, SyntheticSpec};
use graphcm::harness::{
    self, resolve, Dataset, ExperimentConfig, RunDir, ABLATION_NAMES, METRICS_FILE, TABLE_FILE,
};
use graphcm::session_log::{
    log_stats, parse_log, partition_cold_start, split_dataset, write_log, write_split_dir, ColdStartKind, Corpus,
    SplitRatios, Vocabulary,
};
use graphcm::{Error, Result};

#[derive(Parser)]
#[command(name = "graphcm", version, about = "Graph-enhanced click model toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Experiment options shared by the model commands. Any config key can be
/// given as a trailing `--key value` pair.
#[derive(Args)]
struct Exp {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl Exp {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(&resolve(p))?,
            None => ExperimentConfig::default(),
        };
        cfg.apply_overrides(&self.overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a session log, print statistics and optionally write it canonically.
    Parse {
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Skip malformed lines instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Split a log into train/valid/test files by session.
    Split {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "8,1,1")]
        ratios: String,
    },
    /// Build the query and document graphs of a split's training part.
    BuildGraph {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify test sessions into cold-start partitions.
    Partition {
        #[arg(long)]
        data: PathBuf,
        /// Also write one log per partition here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a synthetic log with its generating parameters.
    Synth {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        sessions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        queries: Option<usize>,
        #[arg(long)]
        docs: Option<usize>,
        #[arg(long)]
        serp_len: Option<usize>,
        #[arg(long)]
        topics: Option<usize>,
        #[arg(long)]
        topic_boost: Option<f64>,
        /// Also write train/valid/test files (8:1:1, split seed = seed).
        #[arg(long)]
        split: bool,
    },
    /// Train a model; `--grid` searches the configured grids first.
    Train {
        #[arg(long)]
        grid: bool,
        #[command(flatten)]
        exp: Exp,
    },
    /// Evaluate a checkpoint on the test split and its cold-start partitions.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        exp: Exp,
    },
    /// Train ablation variants with shared seeds and tabulate them.
    Ablate {
        #[arg(long, default_value = "full,no_q_gat,no_d_gat,no_interaction")]
        variants: String,
        #[command(flatten)]
        exp: Exp,
    },
    /// Print the learned combination coefficients of a checkpoint.
    Inspect { checkpoint: PathBuf },
    /// Fit PGM baselines on the training split and dump their parameters.
    BaselineFit {
        #[arg(long, default_value = "all")]
        models: String,
        #[command(flatten)]
        exp: Exp,
    },
    /// Evaluate PGM baselines (fitted now, or loaded from dumps).
    BaselineEval {
        #[arg(long, default_value = "all")]
        models: String,
        /// Comma-separated parameter dumps written by baseline-fit, used instead of refitting.
        #[arg(long, value_delimiter = ',')]
        params: Vec<PathBuf>,
        #[command(flatten)]
        exp: Exp,
    },
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn parse_ratios(s: &str) -> Result<SplitRatios> {
    let v: Vec<u32> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("bad ratio {x:?}"))))
        .collect::<Result<_>>()?;
    match v[..] {
        [train, valid, test] => Ok(SplitRatios { train, valid, test }),
        _ => Err(Error::Config("ratios take train,valid,test".into())),
    }
}

fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut w = writer(path)?;
    for (i, t) in vocab.iter() {
        writeln!(w, "{i}\t{t}")?;
    }
    w.flush()?;
    Ok(())
}

fn save_graph(path: &Path, g: &HomogeneousGraph) -> Result<()> {
    let mut w = writer(path)?;
    write_graph(&mut w, g)?;
    w.flush()?;
    Ok(())
}

fn cmd_parse(input: &Path, output: Option<&Path>, lenient: bool) -> Result<()> {
    let mut corpus = Corpus::new();
    let parsed = parse_log(BufReader::new(File::open(input)?), &mut corpus)?;
    for e in &parsed.rejected {
        warn!("line {}: {}", e.line, e.message);
    }
    let rejected = parsed.rejected.len();
    let dropped = parsed.dropped_empty.len();
    let sessions = if lenient { parsed.sessions } else { parsed.into_strict()? };
    let st = log_stats(&sessions)?;
    println!("sessions {}", st.sessions);
    println!("queries {}", st.queries);
    println!("impressions {}", st.impressions);
    println!("clicks {}", st.clicks);
    println!("distinct_queries {}", st.distinct_queries);
    println!("distinct_docs {}", st.distinct_docs);
    println!("sparsity {}", st.sparsity);
    println!("rejected_lines {rejected}");
    println!("dropped_empty {dropped}");
    if let Some(out) = output {
        let mut w = writer(out)?;
        write_log(&mut w, &sessions, &corpus)?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_split(input: &Path, out: &Path, seed: u64, ratios: &str) -> Result<()> {
    let mut corpus = Corpus::new();
    let sessions = graphcm::session_log::read_log_file(input, &mut corpus)?;
    let split = split_dataset(sessions, parse_ratios(ratios)?, seed)?;
    write_split_dir(out, &split, &corpus)?;
    println!("train {}\nvalid {}\ntest {}", split.train.len(), split.valid.len(), split.test.len());
    Ok(())
}

fn cmd_build_graph(data: &Path, out: &Path) -> Result<()> {
    let (corpus, split) = graphcm::session_log::load_split_dir(data)?;
    let qg = build_query_graph(&split.train);
    let dg = build_doc_graph(&split.train);
    save_graph(&out.join("query_graph.txt"), &qg)?;
    save_graph(&out.join("doc_graph.txt"), &dg)?;
    write_vocab(&out.join("queries.tsv"), &corpus.queries)?;
    write_vocab(&out.join("docs.tsv"), &corpus.docs)?;
    println!("query_graph nodes {} edges {}", qg.node_count(), qg.edge_count());
    println!("doc_graph nodes {} edges {}", dg.node_count(), dg.edge_count());
    Ok(())
}

fn cmd_partition(data: &Path, out: Option<&Path>) -> Result<()> {
    let (corpus, split) = graphcm::session_log::load_split_dir(data)?;
    let part = partition_cold_start(&split);
    for kind in ColdStartKind::ALL {
        println!("{} {}", kind.label(), part.get(kind).len());
    }
    if let Some(out) = out {
        for kind in ColdStartKind::ALL {
            let mut w = writer(&out.join(format!("{}.jsonl", kind.label())))?;
            write_log(&mut w, part.get(kind), &corpus)?;
            w.flush()?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    kind: &str,
    sessions: usize,
    seed: u64,
    out: &Path,
    queries: Option<usize>,
    docs: Option<usize>,
    serp_len: Option<usize>,
    topics: Option<usize>,
    topic_boost: Option<f64>,
    split: bool,
) -> Result<()> {
    let kind = GeneratorKind::parse(kind).ok_or_else(|| Error::Config(format!("unknown generator {kind:?}")))?;
    let mut spec = SyntheticSpec::new(kind, sessions, seed);
    spec.queries = queries.unwrap_or(spec.queries);
    spec.docs = docs.unwrap_or(spec.docs);
    spec.serp_len = serp_len.unwrap_or(spec.serp_len);
    spec.topics = topics.unwrap_or(spec.topics);
    spec.topic_boost = topic_boost.unwrap_or(spec.topic_boost);
    let data = generate(&spec)?;
    write_synthetic(out, &data)?;
    if split {
        let mut corpus = Corpus::new();
        let sessions = data
            .sessions
            .iter()
            .map(|r| corpus.ingest(r).map_err(Error::InvalidArgument))
            .collect::<Result<Vec<_>>>()?;
        let s = split_dataset(sessions, SplitRatios::default(), seed)?;
        write_split_dir(out, &s, &corpus)?;
    }
    println!("wrote {} sessions to {}", data.sessions.len(), out.display());
    Ok(())
}

fn cmd_train(exp: &Exp, grid: bool) -> Result<()> {
    let mut cfg = exp.load()?;
    let data = Dataset::load(&cfg)?;
    let run = RunDir::create(&cfg, "train")?;
    if grid {
        let (points, best) = harness::grid_search(&cfg, &data, &run.child("grid")?)?;
        println!("grid points {}", points.len());
        cfg = best;
        run.write_text("selected.cfg", &cfg.to_text())?;
    }
    let (trained, reports) = harness::train_and_evaluate(&cfg, &data, &run)?;
    for e in &trained.outcome.epochs {
        println!(
            "epoch {} train_loss {:.6} valid_ppl {}",
            e.epoch,
            e.train_loss,
            e.valid_ppl.map_or("-".into(), |p| format!("{p:.6}"))
        );
    }
    println!("best epoch {}", trained.outcome.best_epoch);
    print!("{}", format_table(&reports));
    println!("run {}", run.path.display());
    Ok(())
}

fn cmd_evaluate(exp: &Exp, checkpoint: &Path) -> Result<()> {
    let cfg = exp.load()?;
    let data = Dataset::load(&cfg)?;
    let reports = harness::evaluate_checkpoint(&resolve(checkpoint), &data, &cfg)?;
    let run = RunDir::create(&cfg, "evaluate")?;
    harness::write_reports(&run, &reports)?;
    print!("{}", format_table(&reports));
    print!("{}", harness::reports_kv(&reports));
    Ok(())
}

fn cmd_ablate(exp: &Exp, variants: &str) -> Result<()> {
    let cfg = exp.load()?;
    let names: Vec<&str> = variants.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err(Error::Config(format!("no variants; choose from {}", ABLATION_NAMES.join(", "))));
    }
    let data = Dataset::load(&cfg)?;
    let run = RunDir::create(&cfg, "ablate")?;
    let rows = harness::ablate(&cfg, &data, &names, &run)?;
    print!("{}", harness::ablation_table(&rows));
    println!("run {}", run.path.display());
    Ok(())
}

fn fit_kinds(cfg: &ExperimentConfig, data: &Dataset, kinds: &[BaselineKind], run: &RunDir) -> Result<Vec<Baseline>> {
    let mut out = Vec::new();
    for &kind in kinds {
        let (m, trace) = Baseline::fit(kind, &data.split.train, &cfg.em)?;
        let mut w = writer(&run.file(&format!("{}.tsv", kind.as_str())))?;
        write_baseline(&mut w, &m, &data.corpus)?;
        w.flush()?;
        if let Some(ll) = trace.log_likelihood.last() {
            println!("{} em_iterations {} log_likelihood {ll}", kind.as_str(), trace.log_likelihood.len());
        } else {
            println!("{} fitted", kind.as_str());
        }
        out.push(m);
    }
    Ok(out)
}

fn cmd_baseline_fit(exp: &Exp, models: &str) -> Result<()> {
    let cfg = exp.load()?;
    let data = Dataset::load(&cfg)?;
    let run = RunDir::create(&cfg, "baseline-fit")?;
    fit_kinds(&cfg, &data, &harness::parse_baseline_kinds(models)?, &run)?;
    println!("run {}", run.path.display());
    Ok(())
}

fn cmd_baseline_eval(exp: &Exp, models: &str, params: &[PathBuf]) -> Result<()> {
    let cfg = exp.load()?;
    let mut data = Dataset::load(&cfg)?;
    let run = RunDir::create(&cfg, "baseline-eval")?;
    let fitted = if params.is_empty() {
        fit_kinds(&cfg, &data, &harness::parse_baseline_kinds(models)?, &run)?
    } else {
        let mut v = Vec::new();
        for p in params {
            v.push(read_baseline(BufReader::new(File::open(resolve(p))?), &mut data.corpus)?);
        }
        v
    };
    let mut kv = String::new();
    let mut table = String::new();
    for m in &fitted {
        let mut reports =
            harness::evaluate_baseline(m, &data.split.train, &data.split.test, data.relevance.as_ref())?;
        for r in &mut reports {
            r.partition = format!("{}/{}", m.kind().as_str(), r.partition);
        }
        kv.push_str(&harness::reports_kv(&reports));
        table.push_str(&format_table(&reports));
    }
    run.write_text(METRICS_FILE, &kv)?;
    run.write_text(TABLE_FILE, &table)?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse { input, output, lenient } => cmd_parse(&resolve(&input), output.map(|p| resolve(&p)).as_deref(), lenient),
        Command::Split { input, out, seed, ratios } => cmd_split(&resolve(&input), &resolve(&out), seed, &ratios),
        Command::BuildGraph { data, out } => cmd_build_graph(&resolve(&data), &resolve(&out)),
        Command::Partition { data, out } => cmd_partition(&resolve(&data), out.map(|p| resolve(&p)).as_deref()),
        Command::Synth {
            kind,
            sessions,
            seed,
            out,
            queries,
            docs,
            serp_len,
            topics,
            topic_boost,
            split,
        } => cmd_synth(&kind, sessions, seed, &resolve(&out), queries, docs, serp_len, topics, topic_boost, split),
        Command::Train { grid, exp } => cmd_train(&exp, grid),
        Command::Evaluate { checkpoint, exp } => cmd_evaluate(&exp, &checkpoint),
        Command::Ablate { variants, exp } => cmd_ablate(&exp, &variants),
        Command::Inspect { checkpoint } => {
            print!("{}", harness::inspect_checkpoint(&resolve(&checkpoint))?.to_text());
            Ok(())
        }
        Command::BaselineFit { models, exp } => cmd_baseline_fit(&exp, &models),
        Command::BaselineEval { models, params, exp } => cmd_baseline_eval(&exp, &models, &params),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_valid() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn trailing_overrides_are_collected() {
        let cli = Cli::try_parse_from(["graphcm", "train", "--config", "a.cfg", "--lr", "0.01", "--heads", "4"]).unwrap();
        let Command::Train { exp, grid } = cli.command else {
            panic!("expected train");
        };
        assert!(!grid);
        assert_eq!(exp.config, Some(PathBuf::from("a.cfg")));
        assert_eq!(exp.overrides, ["--lr", "0.01", "--heads", "4"]);
    }
}
