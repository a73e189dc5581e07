//! Run directories: every output of a command lives under one directory
//! together with a manifest of the configuration, seeds and versions.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{resolve, ExperimentConfig};
use crate::autodiff::CHECKPOINT_MAGIC;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CHECKPOINT_FILE: &str = "best.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.tsv";
pub const METRICS_FILE: &str = "metrics.txt";
pub const TABLE_FILE: &str = "metrics_table.txt";

/// Version entries recorded in every manifest.
pub fn versions() -> Vec<(String, String)> {
    vec![
        ("version.graphcm".into(), env!("CARGO_PKG_VERSION").into()),
        (
            "version.checkpoint".into(),
            String::from_utf8_lossy(CHECKPOINT_MAGIC).into_owned(),
        ),
    ]
}

#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates `<runs>/<run_name>` (resolved against `$GRAPHCM_HOME`;
    /// the command name when `run_name` is empty) and writes its manifest.
    pub fn create(cfg: &ExperimentConfig, command: &str) -> Result<Self> {
        let name = if cfg.run_name.is_empty() { command } else { &cfg.run_name };
        let path = resolve(&cfg.runs).join(name);
        Self::create_at(path, cfg, command)
    }

    pub fn create_at(path: PathBuf, cfg: &ExperimentConfig, command: &str) -> Result<Self> {
        fs::create_dir_all(&path)?;
        let run = RunDir { path };
        let mut entries = vec![("command".to_owned(), command.to_owned())];
        entries.extend(cfg.entries());
        entries.extend(versions());
        run.write_manifest(&entries)?;
        Ok(run)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_manifest(&self, entries: &[(String, String)]) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.file(MANIFEST_FILE))?);
        for (k, v) in entries {
            writeln!(w, "{k} = {v}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        fs::write(self.file(name), text)?;
        Ok(())
    }

    /// Opens a subdirectory run for one variant of a multi-run command.
    pub fn child(&self, name: &str) -> Result<RunDir> {
        let path = self.path.join(name);
        fs::create_dir_all(&path)?;
        Ok(RunDir { path })
    }
}

/// Reads `key = value` lines written by [`RunDir::write_manifest`].
pub fn read_manifest(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .collect())
}
