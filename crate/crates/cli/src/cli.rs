use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gnnx_core::projection::ProjectionMethod;
use gnnx_core::Arch;

#[derive(Debug, Parser)]
#[command(name = "gnnx", version, about = "Train, explain and probe GNN node classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write its weights and training report.
    Train(TrainArgs),
    /// Print train/val/test accuracy of a saved model.
    Evaluate(EvaluateArgs),
    /// Explain one node's prediction with GNNExplainer.
    Explain(ExplainArgs),
    /// Export 2D coordinates of the hidden-layer embeddings.
    Project(ProjectArgs),
    /// Run a what-if probe script or the single-edge-flip search.
    Probe(ProbeArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Build a dataset container.
    #[command(subcommand)]
    Convert(ConvertCommand),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub arch: Arch,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    /// Seeds both initialization and dropout.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.train.jsonl`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub node: usize,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "pca")]
    pub method: ProjectionMethod,
    #[arg(long, default_value_t = 30.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["script", "find_single_edge_flip"]))]
pub struct ProbeArgs {
    /// JSON probe script.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Search for one edge whose removal corrects a misclassified node.
    #[arg(long, requires_all = ["dataset", "model", "out"])]
    pub find_single_edge_flip: bool,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Report path; overrides the script's.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_jobs: Option<usize>,
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 20)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 500)]
    pub val_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum ConvertCommand {
    /// LINQS `.content` / `.cites` pair.
    Linqs {
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        cites: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Seeded citation-like graph.
    Synthetic {
        #[arg(long, default_value = "citation-like")]
        name: String,
        #[arg(long, default_value_t = 2708)]
        nodes: usize,
        #[arg(long, default_value_t = 7)]
        classes: usize,
        #[arg(long, default_value_t = 1433)]
        features: usize,
        #[arg(long, default_value_t = 5278)]
        edges: usize,
        #[arg(long, default_value_t = 0.8)]
        homophily: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
    },
}
