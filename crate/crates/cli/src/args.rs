use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eigenmood::config::{RunConfig, DEFAULT_REPLICATES, DEFAULT_SEED, DEFAULT_TOP_N};
use eigenmood::spectral::{DEFAULT_K_MAX, DEFAULT_MIN_SHARE};
use eigenmood::{LaplacianKind, WeightKind};

#[derive(Debug, Parser)]
#[command(
    name = "eigenmood",
    version,
    about = "Uncertainty-aware poet profiles from verse-level annotations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    Confidence,
    Uniform,
}

impl From<WeightArg> for WeightKind {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Confidence => WeightKind::Confidence,
            WeightArg::Uniform => WeightKind::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LaplacianArg {
    Unnorm,
    Sym,
}

impl From<LaplacianArg> for LaplacianKind {
    fn from(l: LaplacianArg) -> Self {
        match l {
            LaplacianArg::Unnorm => LaplacianKind::Unnormalized,
            LaplacianArg::Sym => LaplacianKind::SymmetricNormalized,
        }
    }
}

/// Policy and output flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Flags {
    /// Keep only label instances with confidence >= TAU.
    #[arg(long, global = true, value_parser = parse_unit)]
    pub tau: Option<f64>,

    #[arg(long, global = true, value_enum, default_value_t = WeightArg::Confidence)]
    pub weight: WeightArg,

    #[arg(long, global = true, value_enum, default_value_t = LaplacianArg::Unnorm)]
    pub laplacian: LaplacianArg,

    /// Baseline share below which a concept is left out of the graph.
    #[arg(long, global = true, default_value_t = DEFAULT_MIN_SHARE, value_parser = parse_unit)]
    pub min_share: f64,

    /// Drop per-poet duplicate verses at ingest.
    #[arg(long, global = true)]
    pub dedup: bool,

    #[arg(long, global = true, default_value_t = DEFAULT_REPLICATES,
          value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    pub replicates: usize,

    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[arg(long, global = true, default_value_t = DEFAULT_K_MAX)]
    pub k_max: usize,

    #[arg(long, global = true, default_value_t = DEFAULT_TOP_N)]
    pub top_n: usize,

    /// Run directory for all outputs.
    #[arg(long, global = true, default_value = "run")]
    pub out: PathBuf,
}

impl Flags {
    pub fn run_config(&self, stage: &str, inputs: Vec<PathBuf>) -> RunConfig {
        let mut cfg = RunConfig::new(stage, inputs, self.out.clone());
        cfg.threshold = self.tau;
        cfg.weight = self.weight.into();
        cfg.laplacian = self.laplacian.into();
        cfg.min_share = self.min_share;
        cfg.dedup = self.dedup;
        cfg.replicates = self.replicates;
        cfg.seed = self.seed;
        cfg.k_max = self.k_max;
        cfg.top_n = self.top_n;
        cfg
    }

    pub fn corpus_path(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit
            .clone()
            .unwrap_or_else(|| self.out.join(crate::commands::CORPUS_FILE))
    }
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is outside [0, 1]"))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, validate and snapshot annotation files.
    Ingest(IngestArgs),
    /// Concept distributions, lifts and divergence rankings.
    Profile(CorpusArgs),
    /// Co-occurrence graph, Eigenmood axes and verse retrieval.
    Spectral(CorpusArgs),
    /// Draw a validation sample, or score a completed validation sheet.
    Validate(ValidateArgs),
    /// Figure data (and optional SVG) from a finished run directory.
    Report(ReportArgs),
    /// Annotate verses against a scripted backend.
    AnnotateMock(AnnotateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// `<POET>_labels.jsonl` files, or directories holding them.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,

    /// Skip and report invalid records instead of aborting.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus snapshot; defaults to the one in the run directory.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Corpus to draw a stratified sample from.
    #[arg(long, conflicts_with_all = ["sheet", "predictions"], requires = "draw")]
    pub corpus: Option<PathBuf>,

    /// Sample size for the stratified draw.
    #[arg(long)]
    pub draw: Option<usize>,

    /// Completed two-annotator sheet.
    #[arg(long, requires = "predictions")]
    pub sheet: Option<PathBuf>,

    /// Model predictions: a CSV, or a corpus snapshot (`.jsonl`).
    #[arg(long, requires = "sheet")]
    pub predictions: Option<PathBuf>,

    /// Leave concepts whose reference prevalence is below this out of the macros.
    #[arg(long, default_value_t = 0.0, value_parser = parse_unit)]
    pub min_prevalence: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory to read; defaults to `--out`.
    #[arg(long)]
    pub run: Option<PathBuf>,

    /// Also render minimal SVG charts.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Plain text, one verse per line.
    #[arg(long)]
    pub verses: PathBuf,

    /// JSON array of scripted backend responses.
    #[arg(long)]
    pub fixture: PathBuf,

    #[arg(long)]
    pub poet: String,
}
