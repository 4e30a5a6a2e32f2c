//! `urbangan`: build corpora, train the generator, sample synthetic cities
//! and compare them with real ones.

// Negated comparisons are NaN-rejecting on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use urbangan::Error;

#[derive(Debug, Parser)]
#[command(name = "urbangan", version, about = "Urban footprint GAN laboratory")]
pub struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; every stage derives its own seed from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads (results do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the fully resolved configuration to stdout before running.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderKind {
    Map,
    Profile,
    Peaks,
    Report,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a toy-city corpus.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        /// Comma-separated archetypes: monocentric, polycentric, coastal.
        #[arg(long, value_delimiter = ',')]
        archetypes: Option<Vec<String>>,
        #[arg(long)]
        n_centers: Option<usize>,
        #[arg(long)]
        spread_km: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        pixel_size: Option<f64>,
    },
    /// Cut city windows out of a source raster and preprocess them.
    Ingest {
        /// 16-bit PGM with a `pixel_size_m` JSON sidecar.
        #[arg(long)]
        raster: PathBuf,
        /// JSON array of {id, row, col, lat?, lon?}.
        #[arg(long)]
        centers: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        side_km: Option<f64>,
        #[arg(long)]
        agg_pixel_size: Option<f64>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        source_name: Option<String>,
    },
    /// Train the GAN on a corpus and write a checkpoint.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        base_channels: Option<usize>,
        #[arg(long)]
        z_dim: Option<usize>,
        /// paper_saturating or non_saturating.
        #[arg(long)]
        loss_variant: Option<String>,
        /// Continue from this checkpoint instead of a fresh model.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Per-step losses as CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Sample synthetic maps from a checkpoint into a corpus directory.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Radial profiles of a map (CSV file) or a corpus (directory of CSVs).
    Profile {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ring_width_km: Option<f64>,
    },
    /// Profile peaks of a map or a corpus.
    Peaks {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ring_width_km: Option<f64>,
        /// Minimum peak height as a fraction of the profile maximum.
        #[arg(long)]
        h: Option<f64>,
        /// Minimum separation between peaks, km.
        #[arg(long)]
        delta_km: Option<f64>,
    },
    /// K-Means classes of a corpus' radial profiles.
    Cluster {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Compare a real and a synthetic corpus.
    Compare {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        min_expected: Option<f64>,
        /// fit_real or joint.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Render a map, profile, peaks or report as SVG or PNG.
    Render {
        #[arg(long, value_enum)]
        kind: RenderKind,
        #[arg(long)]
        input: PathBuf,
        /// Output file; `.svg` or `.png`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ring_width_km: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        delta_km: Option<f64>,
    },
}

const USAGE: u8 = 2;
const DATA: u8 = 3;
const NUMERIC: u8 = 4;

fn classify(err: &Error) -> (u8, &'static str) {
    match err.root() {
        Error::Argument(_) => (USAGE, "usage"),
        Error::Training { .. } | Error::State(_) => (NUMERIC, "numeric"),
        Error::Parse { .. } => (DATA, "parse"),
        Error::Checkpoint { .. } => (DATA, "checkpoint"),
        Error::Io(_) => (DATA, "io"),
        Error::Json(_) => (DATA, "json"),
        Error::Shape { .. } => (DATA, "shape"),
        Error::Domain(_) => (DATA, "domain"),
        Error::Test(_) => (DATA, "test"),
        Error::Source { .. } => unreachable!("root skips source annotations"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(USAGE);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = classify(&e);
            eprintln!("error[{kind}]: {}", e.to_string().replace('\n', " "));
            ExitCode::from(code)
        }
    }
}
