use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "scenemem", version, about = "Scene memorability experiments: game service, scoring, features and regression")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; required by every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Corpus index [default: <out>/corpus.json].
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index images listed in a manifest (`image_id, path, pool`).
    Ingest {
        /// Directory the manifest paths are relative to.
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Merge category votes into the corpus.
    Annotate {
        /// `category_id, name` table.
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Vote file (`image_id, annotator_id, task, category_id, answer`); repeatable.
        #[arg(long = "votes")]
        votes: Vec<PathBuf>,
    },
    /// Generate and validate level plans.
    Plan {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Run the game HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        log: Option<PathBuf>,
        /// Image root served under /images/.
        #[arg(long)]
        images: Option<PathBuf>,
    },
    /// Memorability scores from event logs.
    Score {
        /// Event log; repeatable.
        #[arg(long = "log")]
        logs: Vec<PathBuf>,
        /// Common delay the scores are regularized to.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Split-half human consistency.
    Consistency {
        #[arg(long = "log")]
        logs: Vec<PathBuf>,
        #[arg(long)]
        splits: Option<usize>,
        #[arg(long)]
        filter_len: Option<usize>,
    },
    /// Extract handcrafted features for every corpus image.
    Features {
        #[arg(long)]
        images: Option<PathBuf>,
        /// hsv, glcm, saliency or category; repeatable.
        #[arg(long = "extractor")]
        extractors: Vec<String>,
        /// Write saliency maps as PGM files.
        #[arg(long)]
        export_maps: bool,
    },
    /// Cross-validate and fit a kernel regressor on a train split.
    Fit {
        /// Feature set name or file; repeatable.
        #[arg(long = "features")]
        features: Vec<String>,
        /// hik, rbf or sum.
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Compare predictions with ground-truth scores.
    Eval {
        #[arg(long = "pred")]
        predictions: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        permutations: Option<usize>,
    },
    /// Rank-error texture groups, category means and word-frequency bands.
    Report {
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long)]
        glcm: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        frequencies: Option<PathBuf>,
    },
    /// Play synthetic subjects with planted memorability through the game engine.
    Simulate {
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long)]
        sessions: Option<usize>,
    },
}
