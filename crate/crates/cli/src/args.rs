use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Trending and emerging issue detection over windowed sentence embeddings.
#[derive(Parser, Debug)]
#[command(name = "issue-radar", version, about)]
pub struct Cli {
    /// Worker threads for graph construction and centrality (0 = all cores).
    #[arg(long, global = true, env = "ISSUE_RADAR_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tag the primary question of each transcript and emit its embedding.
    Tag(TagArgs),
    /// Fit a whitening transform and apply it.
    Whiten(WhitenArgs),
    /// Summarise the similarity graph of an embedding set.
    Graph(GraphArgs),
    /// Score and cluster trending and emerging questions.
    Detect(DetectArgs),
    /// Generate a synthetic embedding set with ground truth.
    Synth(SynthArgs),
    /// Score a report against synthetic ground truth.
    Eval(EvalArgs),
    /// Whiten, then detect.
    Pipeline(PipelineArgs),
}

/// Detection hyperparameters. Flags override values from `--config`.
#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// JSON file with any subset of the run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cosine similarity threshold for an edge [default: 0.7]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Attenuation factor per hop [default: 0.5]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Filter scale as a fraction of the largest matched centrality [default: 0.1]
    #[arg(long)]
    pub gamma_fraction: Option<f64>,
    /// Graph distance of cluster members from their center [default: 3]
    #[arg(long)]
    pub radius: Option<u32>,
    /// Minimum graph distance between a new center and known clusters [default: 4]
    #[arg(long)]
    pub separation: Option<u32>,
    /// Clusters reported per kind [default: 10]
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Truncate centrality sums at this distance [default: unbounded]
    #[arg(long)]
    pub max_depth: Option<u32>,
}

/// Either one file carrying window labels, or one file per window.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Embeddings of both windows, labelled per record.
    #[arg(long, conflicts_with_all = ["previous", "current"])]
    pub input: Option<PathBuf>,
    /// Embeddings of the previous window; labels in the file are ignored.
    #[arg(long, requires = "current")]
    pub previous: Option<PathBuf>,
    /// Embeddings of the current window; labels in the file are ignored.
    #[arg(long, requires = "previous")]
    pub current: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TagArgs {
    /// Transcript JSONL.
    #[arg(long)]
    pub input: PathBuf,
    /// Encoder description (JSON); defaults to a feature-hashing encoder.
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    /// Attention head (JSON `{"d_k", "key"}`); defaults to a seeded random key.
    #[arg(long)]
    pub head: Option<PathBuf>,
    /// Dimension of the default hashing encoder.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Seed for the default encoder and key.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Half-width of the tagging window around the agent's first sentence [default: 2]
    #[arg(long)]
    pub tag_window: Option<usize>,
    /// JSON run configuration; only `tag_window_n` is used here.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output JSONL (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WhitenArgs {
    /// Embeddings to fit on and transform.
    #[arg(long)]
    pub input: PathBuf,
    /// Whitened embeddings; `.irad` selects the binary format.
    #[arg(long)]
    pub out: PathBuf,
    /// Where to store the fitted model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Apply an existing model instead of fitting one.
    #[arg(long, conflicts_with = "model")]
    pub apply: Option<PathBuf>,
    /// Relative eigenvalue floor.
    #[arg(long, default_value_t = issue_radar::whiten::DEFAULT_EPS_REL)]
    pub eps_rel: f64,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    /// Embeddings, usually whitened.
    #[arg(long)]
    pub input: PathBuf,
    /// Cosine similarity threshold [default: 0.7]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// JSON run configuration; only `alpha` is used here.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the full edge list as JSON.
    #[arg(long)]
    pub edges_out: Option<PathBuf>,
    /// Summary JSON (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Report JSON (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-node centralities as CSV.
    #[arg(long)]
    pub centrality_csv: Option<PathBuf>,
    /// Write current-window scores as CSV.
    #[arg(long)]
    pub scores_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Generator description (JSON); defaults to the standard benchmark.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the seed of the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Apply a random invertible linear map to every point.
    #[arg(long)]
    pub distort: bool,
    /// Embeddings; `.irad` selects the binary format.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth sidecar.
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Report produced by `detect` or `pipeline`.
    #[arg(long)]
    pub report: PathBuf,
    /// Ground truth produced by `synth`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Clusters considered per kind.
    #[arg(long, default_value_t = 1)]
    pub top_k: usize,
    /// Metrics JSON (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Relative eigenvalue floor for whitening.
    #[arg(long, default_value_t = issue_radar::whiten::DEFAULT_EPS_REL)]
    pub eps_rel: f64,
    /// Keep the fitted whitening model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Report JSON (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-node centralities as CSV.
    #[arg(long)]
    pub centrality_csv: Option<PathBuf>,
    /// Write current-window scores as CSV.
    #[arg(long)]
    pub scores_csv: Option<PathBuf>,
}
