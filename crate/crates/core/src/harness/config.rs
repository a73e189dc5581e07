//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` are comments. Model keys are the bare names of
//! [`ModelConfig::KEYS`]; list-valued keys take comma-separated values.

use std::path::{Path, PathBuf};

use crate::baselines::EmConfig;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, TrainConfig};
use crate::session_log::SplitRatios;

/// Environment variable naming the root against which relative paths resolve.
pub const HOME_ENV: &str = "GRAPHCM_HOME";

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lr: Vec<f64>,
    pub l2: Vec<f64>,
    pub dropout: Vec<f64>,
    pub k: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            lr: vec![1e-3, 5e-4, 1e-4],
            l2: vec![1e-4, 1e-5],
            dropout: vec![0.25, 0.5],
            k: vec![1, 2, 4, 8, 16, 32],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Directory with `train.jsonl`, `valid.jsonl`, `test.jsonl`.
    pub data: PathBuf,
    /// Optional `query<TAB>doc<TAB>grade` judgements for NDCG.
    pub relevance: Option<PathBuf>,
    /// Parent directory of run directories.
    pub runs: PathBuf,
    /// Run directory name; empty means the command name.
    pub run_name: String,
    pub split_seed: u64,
    pub split_ratios: SplitRatios,
    /// Seeds parameter initialization.
    pub init_seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub grid: Grid,
    pub em: EmConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: PathBuf::from("data"),
            relevance: None,
            runs: PathBuf::from("runs"),
            run_name: String::new(),
            split_seed: 0,
            split_ratios: SplitRatios::default(),
            init_seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            grid: Grid::default(),
            em: EmConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let v = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<Vec<T>>>()?;
    if v.is_empty() {
        return Err(Error::Config(format!("{key} needs at least one value")));
    }
    Ok(v)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "data" => self.data = PathBuf::from(v),
            "relevance" => self.relevance = (!v.is_empty()).then(|| PathBuf::from(v)),
            "runs" => self.runs = PathBuf::from(v),
            "run_name" => self.run_name = v.to_owned(),
            "split_seed" => self.split_seed = parse(key, v)?,
            "split_ratios" => {
                let r: Vec<u32> = parse_list(key, v)?;
                if r.len() != 3 {
                    return Err(Error::Config("split_ratios takes train,valid,test".into()));
                }
                self.split_ratios = SplitRatios {
                    train: r[0],
                    valid: r[1],
                    test: r[2],
                };
            }
            "init_seed" => self.init_seed = parse(key, v)?,
            "seed" => self.train.seed = parse(key, v)?,
            "sample_seed" => self.train.sample_seed = parse(key, v)?,
            "eval_seed" => self.train.eval_seed = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "lr" => self.train.lr = parse(key, v)?,
            "l2" => self.train.l2 = parse(key, v)?,
            "epochs" => self.train.max_epochs = parse(key, v)?,
            "patience" => self.train.patience = parse(key, v)?,
            "lr_grid" => self.grid.lr = parse_list(key, v)?,
            "l2_grid" => self.grid.l2 = parse_list(key, v)?,
            "dropout_grid" => self.grid.dropout = parse_list(key, v)?,
            "k_grid" => self.grid.k = parse_list(key, v)?,
            "em_iterations" => self.em.max_iterations = parse(key, v)?,
            "em_tolerance" => self.em.tolerance = parse(key, v)?,
            "em_pseudo_counts" => self.em.pseudo_counts = parse(key, v)?,
            _ => self.model.set(key, v)?,
        }
        Ok(())
    }

    /// Every setting as `key = value` pairs readable by [`ExperimentConfig::set`].
    pub fn entries(&self) -> Vec<(String, String)> {
        let r = &self.split_ratios;
        let mut e: Vec<(String, String)> = vec![
            ("data".into(), self.data.display().to_string()),
            (
                "relevance".into(),
                self.relevance.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            ),
            ("runs".into(), self.runs.display().to_string()),
            ("run_name".into(), self.run_name.clone()),
            ("split_seed".into(), self.split_seed.to_string()),
            ("split_ratios".into(), format!("{},{},{}", r.train, r.valid, r.test)),
            ("init_seed".into(), self.init_seed.to_string()),
            ("seed".into(), self.train.seed.to_string()),
            ("sample_seed".into(), self.train.sample_seed.to_string()),
            ("eval_seed".into(), self.train.eval_seed.to_string()),
            ("batch_size".into(), self.train.batch_size.to_string()),
            ("lr".into(), self.train.lr.to_string()),
            ("l2".into(), self.train.l2.to_string()),
            ("epochs".into(), self.train.max_epochs.to_string()),
            ("patience".into(), self.train.patience.to_string()),
            ("lr_grid".into(), join(&self.grid.lr)),
            ("l2_grid".into(), join(&self.grid.l2)),
            ("dropout_grid".into(), join(&self.grid.dropout)),
            ("k_grid".into(), join(&self.grid.k)),
            ("em_iterations".into(), self.em.max_iterations.to_string()),
            ("em_tolerance".into(), self.em.tolerance.to_string()),
            ("em_pseudo_counts".into(), self.em.pseudo_counts.to_string()),
        ];
        e.extend(
            self.model
                .entries()
                .into_iter()
                .map(|(k, v)| (k.trim_start_matches("model.").to_owned(), v)),
        );
        e
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            cfg.set(k.trim(), v).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Applies `--key value` pairs (leading dashes optional; `-` and `_`
    /// are interchangeable in keys).
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<()> {
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            let key = flag.trim_start_matches('-').replace('-', "_");
            let (key, value) = match key.split_once('=') {
                Some((k, v)) => (k.to_owned(), v.to_owned()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| Error::Config(format!("flag {flag} needs a value")))?;
                    (key, v.clone())
                }
            };
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        let g = &self.grid;
        if g.lr.iter().chain(&g.l2).any(|&v| !(v > 0.0))
            || g.dropout.iter().any(|&d| !(0.0..1.0).contains(&d))
            || g.k.contains(&0)
        {
            return Err(Error::Config("grid values must be positive (dropout in [0, 1))".into()));
        }
        Ok(())
    }
}

/// Resolves `path` against `$GRAPHCM_HOME` when it is relative.
pub fn resolve(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(HOME_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}
