//! `cnnprobe`: receptive fields, forward passes, deconv reconstructions,
//! patch embeddings and sparsity profiles from the command line.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 I/O error, 4 data or
//! precondition error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cnnprobe", version, about = "CNN inference and introspection toolkit")]
struct Cli {
    /// Worker threads for per-image fan-out.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct NetArgs {
    /// Built-in architecture: vggcnn16 or alexcnn.
    #[arg(long)]
    pub builtin: Option<String>,

    /// Architecture DSL file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[command(flatten)]
    pub net: NetArgs,

    /// CNNW weight file (may include a `__mean__` tensor).
    #[arg(long)]
    pub weights: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output directory, created if missing.
    #[arg(long, env = "CNNPROBE_OUT", default_value = ".")]
    pub out: PathBuf,

    /// Write PNG instead of PPM (needs the `png` feature).
    #[arg(long)]
    pub png: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the shape trace and receptive-field table as TSV.
    Arch {
        #[command(flatten)]
        net: NetArgs,
    },

    /// Classify an image and print the top-k labels.
    Forward {
        #[command(flatten)]
        model: ModelArgs,

        /// Input image; PPM, or PNG with the `png` feature.
        #[arg(long)]
        image: PathBuf,

        /// Label file, one label per line in output order.
        #[arg(long)]
        labels: Option<PathBuf>,

        #[arg(short, long, default_value_t = 5)]
        k: usize,

        /// Print the full distribution instead of the top k.
        #[arg(long, conflicts_with = "k")]
        all: bool,
    },

    /// Deconv reconstructions of one image, one file per layer.
    Reconstruct {
        #[command(flatten)]
        model: ModelArgs,

        #[arg(long)]
        image: PathBuf,

        /// `all-conv`, `all`, or a comma-separated list of layer names.
        #[arg(long, default_value = "all-conv")]
        layers: String,

        /// `full`, `filter:K`, `neuron:K,ROW,COL` or `topk:N`.
        #[arg(long, default_value = "full")]
        select: String,

        #[command(flatten)]
        out: OutArgs,
    },

    /// t-SNE embedding of a layer's patch representations plus a grid canvas.
    Embed {
        #[command(flatten)]
        model: ModelArgs,

        /// Image list, one path per line.
        #[arg(long)]
        manifest: PathBuf,

        /// Conv, relu or pool layer whose positions become patches.
        #[arg(long)]
        layer: String,

        /// `all`, `random:N[:SEED]` or `top-norm:N`.
        #[arg(long, default_value = "top-norm:500")]
        sampling: String,

        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,

        #[arg(long, default_value_t = 1000)]
        iterations: usize,

        /// Canvas cells per side.
        #[arg(long, default_value_t = 20)]
        grid: usize,

        /// Thumbnail edge in pixels.
        #[arg(long, default_value_t = 32)]
        thumb: usize,

        /// Seeds the layout and `random:N` sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,

        #[command(flatten)]
        out: OutArgs,
    },

    /// Fraction of zero activations per layer over a dataset.
    Sparsity {
        #[command(flatten)]
        model: ModelArgs,

        /// Image list, one path per line.
        #[arg(long)]
        manifest: PathBuf,

        /// Comma-separated layers; defaults to every relu and pool layer.
        #[arg(long)]
        layers: Option<String>,

        /// Profile conv outputs instead of post-ReLU layers.
        #[arg(long)]
        pre_relu: bool,

        /// Values with magnitude at most this count as zero.
        #[arg(long, default_value_t = 0.0)]
        threshold: f32,

        #[command(flatten)]
        out: OutArgs,
    },

    /// Side-by-side table and plot of two sparsity reports.
    CompareSparsity {
        /// Baseline `sparsity.tsv`.
        a: PathBuf,
        /// Report compared against the baseline.
        b: PathBuf,

        #[command(flatten)]
        out: OutArgs,
    },

    /// Strongest patches of one filter and their reconstructions.
    TopPatches {
        #[command(flatten)]
        model: ModelArgs,

        #[arg(long)]
        manifest: PathBuf,

        #[arg(long)]
        layer: String,

        #[arg(long)]
        filter: usize,

        /// Number of patches in the strip.
        #[arg(short, long, default_value_t = 9)]
        n: usize,

        /// Thumbnail edge in pixels.
        #[arg(long, default_value_t = 64)]
        thumb: usize,

        #[command(flatten)]
        out: OutArgs,
    },

    /// Write seeded random weights for an architecture (for smoke tests).
    InitWeights {
        #[command(flatten)]
        net: NetArgs,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Per-channel mean to embed, e.g. `104,117,124`.
        #[arg(long)]
        mean: Option<String>,

        /// Destination CNNW file.
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build_global()
    {
        eprintln!("error: thread pool: {}", e);
        return ExitCode::from(commands::EXIT_USAGE);
    }
    let result = match cli.command {
        Command::Arch { net } => commands::arch(&net),
        Command::Forward { model, image, labels, k, all } => {
            commands::forward(&model, &image, labels.as_deref(), (!all).then_some(k))
        }
        Command::Reconstruct { model, image, layers, select, out } => {
            commands::reconstruct(&model, &image, &layers, &select, &out)
        }
        Command::Embed {
            model,
            manifest,
            layer,
            sampling,
            perplexity,
            iterations,
            grid,
            thumb,
            seed,
            out,
        } => commands::embed(
            &model,
            &manifest,
            &layer,
            &sampling,
            commands::EmbedOpts { perplexity, iterations, grid, thumb, seed },
            &out,
        ),
        Command::Sparsity { model, manifest, layers, pre_relu, threshold, out } => {
            commands::sparsity(&model, &manifest, layers.as_deref(), pre_relu, threshold, &out)
        }
        Command::CompareSparsity { a, b, out } => commands::compare_sparsity(&a, &b, &out),
        Command::TopPatches { model, manifest, layer, filter, n, thumb, out } => {
            commands::top_patches(&model, &manifest, &layer, filter, n, thumb, &out)
        }
        Command::InitWeights { net, seed, mean, output } => {
            commands::init_weights(&net, seed, mean.as_deref(), &output)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.code())
        }
    }
}
