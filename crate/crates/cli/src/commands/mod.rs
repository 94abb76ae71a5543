pub mod annotate;
pub mod ingest;
pub mod profile;
pub mod report;
pub mod spectral;
pub mod validate;

use std::path::{Path, PathBuf};

use anyhow::Context;
use eigenmood::ingest::load_snapshot;
use eigenmood::stats::BootstrapSummary;
use eigenmood::table::{Cell, Table};
use eigenmood::{Category, Corpus};

use crate::{MissingStage, UsageError};

pub const CORPUS_FILE: &str = "corpus.jsonl";

pub fn require(path: &Path, stage: &'static str) -> anyhow::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(MissingStage {
            stage,
            path: path.to_path_buf(),
        }
        .into())
    }
}

/// Loads a snapshot written by `ingest`; an empty corpus is a usage error.
pub fn load_corpus(path: &Path) -> anyhow::Result<Corpus> {
    require(path, "ingest")?;
    let corpus = load_snapshot(path).with_context(|| format!("reading {}", path.display()))?;
    if corpus.is_empty() {
        return Err(UsageError(format!("corpus {} is empty", path.display())).into());
    }
    Ok(corpus)
}

pub fn write_all(dir: &Path, tables: &[Table]) -> anyhow::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in tables {
        let (exact, display) = t.write(dir)?;
        written.push(exact);
        written.push(display);
    }
    Ok(written)
}

pub fn header_with(first: &[&str], categories: &[Category]) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain(categories.iter().map(|c| c.as_str().to_string()))
        .collect()
}

/// Table with a run-time header.
pub fn table(name: &str, header: &[String]) -> Table {
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    Table::new(name, &h)
}

pub fn report_written(stage: &str, dir: &Path, count: usize) {
    eprintln!("{stage}: wrote {count} files to {}", dir.display());
}

pub fn bootstrap_cells(s: &BootstrapSummary) -> Vec<Cell> {
    vec![
        s.poet.clone().into(),
        s.statistic.clone().into(),
        s.replicates.into(),
        s.seed.into(),
        s.point.into(),
        s.mean.into(),
        s.lo.into(),
        s.hi.into(),
    ]
}
