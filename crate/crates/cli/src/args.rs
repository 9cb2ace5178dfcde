use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eercf_core::losses::{DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_LEVEL_WEIGHTS};
use eercf_core::ranking::DEFAULT_TOP_K;
use eercf_core::tib::{DEFAULT_FRAME_TEMPERATURE, DEFAULT_PATCH_TEMPERATURE};

#[derive(Debug, Parser)]
#[command(name = "eercf", version, about = "Two-stage multi-granularity text-to-video retrieval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate features and rewrite them into the binary container.
    Ingest(IngestArgs),
    /// Rank the gallery for one or more texts; one JSON line per text.
    Search(SearchArgs),
    /// Recall@1/5/10 over the pairs of a manifest.
    Eval(EvalArgs),
    /// Per-pair similarity cost of each retrieval scheme.
    Flops(FlopsArgs),
    /// Write a synthetic gallery with planted ground truth.
    Synth(SynthArgs),
    /// Compare analytic loss gradients with finite differences.
    Losscheck(LosscheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    /// Texts retrieve videos.
    T2v,
    /// Videos retrieve texts, over the same pairs.
    V2t,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    None,
    CoarseConfusable,
    PatchNoise,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Video features: `.jsonl` (one `{"id", "frames", "patches"}` per line) or a binary container.
    #[arg(long)]
    pub videos: PathBuf,
    /// Text features: `.jsonl` (one `{"id", "feature"}` per line) or a binary container.
    #[arg(long)]
    pub texts: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for videos.bin, texts.bin and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Candidates kept by the coarse recall stage.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Softmax temperature over frames.
    #[arg(long, default_value_t = DEFAULT_FRAME_TEMPERATURE)]
    pub pi_frame: f64,
    /// Softmax temperature over patches.
    #[arg(long, default_value_t = DEFAULT_PATCH_TEMPERATURE)]
    pub pi_patch: f64,
    /// Coarse, frame and patch fusion weights (normalized to sum to 1).
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 5.0, 1.0])]
    pub weights: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub gallery: PathBuf,
    #[arg(long)]
    pub texts: PathBuf,
    /// Only rank these texts (repeatable); all texts by default.
    #[arg(long = "text-id")]
    pub text_ids: Vec<String>,
    /// Write rankings here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub rank: RankArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gallery: PathBuf,
    #[arg(long)]
    pub texts: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = Direction::T2v)]
    pub direction: Direction,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(flatten)]
    pub rank: RankArgs,
}

#[derive(Debug, Args)]
pub struct FlopsArgs {
    /// Starting configuration; individual flags override its fields.
    #[arg(long, default_value = "msrvtt1k")]
    pub preset: String,
    /// Methods to tabulate (repeatable or comma separated); the preset's comparison set by default.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    #[arg(long = "N")]
    pub gallery: Option<u64>,
    #[arg(long = "Nv")]
    pub frames: Option<u64>,
    #[arg(long = "Nt")]
    pub words: Option<u64>,
    #[arg(long = "Np")]
    pub patches: Option<u64>,
    #[arg(long = "Nr")]
    pub rerank: Option<u64>,
    #[arg(long = "D")]
    pub dim: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub videos: usize,
    #[arg(long, default_value_t = 50)]
    pub queries: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 12)]
    pub frames: usize,
    #[arg(long, default_value_t = 4)]
    pub patches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = Mode::None)]
    pub mode: Mode,
}

#[derive(Debug, Args)]
pub struct LosscheckArgs {
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Seeds 0..n, one random unit-row batch per seed and level.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Contrastive temperature. Below about 0.03 the softmax is too sharp
    /// for central differences to resolve small gradient coordinates.
    #[arg(long, default_value_t = 0.05)]
    pub temperature: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    /// Level weights for the coarse, frame and patch losses.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LEVEL_WEIGHTS)]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}
