//! Experiment runner: configuration, orchestration and result files.
//!
//! Each run writes into `<out>/<experiment>/`:
//! `manifest.toml`, one CSV per channel table, one SVG per chart and
//! `verdict.tsv` with lines `id<TAB>pass|fail<TAB>measured<TAB>tolerance`.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;
pub mod verdict;

use std::time::Instant;

use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentKind};
use output::{write_file, Chart, ChannelTable, TextTable};
pub use verdict::{compare_channels, Mode, Series, Verdict};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(#[from] noetherdyn_core::Error),
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Numerical(noetherdyn_core::Error::InvalidArgument(_)) => 2,
            HarnessError::Numerical(_) | HarnessError::Grid(_) => 3,
            HarnessError::Io(_) => 4,
        }
    }
}

/// Everything an experiment produces before it touches the file system.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub tables: Vec<ChannelTable>,
    pub text_tables: Vec<TextTable>,
    pub charts: Vec<Chart>,
    pub verdicts: Vec<Verdict>,
}

impl Artifacts {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub artifacts: Artifacts,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.artifacts.all_pass() {
            0
        } else {
            1
        }
    }
}

/// Runs one experiment and writes its files.
pub fn run(config: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    let start = Instant::now();
    let artifacts = experiments::execute(config)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    let dir = config.run_dir();
    for t in &artifacts.tables {
        write_file(&dir, &format!("{}.csv", t.name), &t.to_csv())?;
    }
    for t in &artifacts.text_tables {
        write_file(&dir, &format!("{}.csv", t.name), &t.to_csv())?;
    }
    for c in &artifacts.charts {
        write_file(&dir, &format!("{}.svg", c.name), &c.to_svg())?;
    }
    write_file(&dir, "verdict.tsv", &verdict::verdict_file(&artifacts.verdicts))?;
    let mut manifest = toml::Table::new();
    manifest.insert("config".into(), toml::Value::Table(config.to_toml()));
    manifest.insert("library_version".into(), toml::Value::String(env!("CARGO_PKG_VERSION").into()));
    manifest.insert("wall_seconds".into(), toml::Value::Float(wall_seconds));
    manifest.insert("all_pass".into(), toml::Value::Boolean(artifacts.all_pass()));
    let text = toml::to_string(&manifest).map_err(|e| HarnessError::Config(format!("manifest: {e}")))?;
    write_file(&dir, "manifest.toml", &text)?;
    Ok(RunReport { artifacts, wall_seconds })
}
