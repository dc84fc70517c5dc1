//! `edgeswitch`: spectra of metric and discrete graphs, edge transformations and
//! the spectral shifts they cause.
//!
//! Every subcommand writes its artifacts plus a `manifest.json` into `--out`
//! and prints a JSON summary on stdout. Exit codes: 0 success, 2 invalid input,
//! 3 numerical certification failure, 4 property violation.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "edgeswitch", version, about = "Spectral shifts of quantum graphs under edge switches")]
pub struct Cli {
    /// Directory for artifacts and the manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenvalues of a metric graph.
    Spectrum(SpectrumArgs),
    /// Eigenvalues of a discrete graph.
    Dspectrum(DspectrumArgs),
    /// Vertex splitting and the λ family for a discrete edge switch.
    Dswitch(DswitchArgs),
    /// Apply a transformation log and write the result with its primitive steps.
    Transform(TransformArgs),
    /// Spectral shift between a graph and its transform.
    Shift(ShiftArgs),
    /// Rank and reflection bounds on random finite perturbations.
    VerifyLemmas(LemmaArgs),
    /// Finite-difference eigenvalues with Richardson extrapolation.
    Oracle(OracleArgs),
    /// Length-arrangement ensembles.
    Ensemble(EnsembleArgs),
    /// Switch and swap histograms on the tetrahedron fixture.
    Figure3(Figure3Args),
    /// Crossing shift against the Dirichlet-decoupled shifts.
    Additivity(AdditivityArgs),
    /// Crossings approaching a switch as the cut points reach the endpoints.
    CrossingLimit(CrossingLimitArgs),
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// All eigenvalues with k below this bound.
    #[arg(long, conflicts_with = "levels")]
    pub kmax: Option<f64>,
    /// The first N positive levels.
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DspectrumArgs {
    #[arg(long)]
    pub graph: PathBuf,
}

#[derive(Args, Debug)]
pub struct DswitchArgs {
    /// Discrete graph JSON; omit to use random chain clusters.
    #[arg(long, requires = "site")]
    pub graph: Option<PathBuf>,
    /// Switch site `a,a_next,a_vert,b,b_next,b_vert`.
    #[arg(long, value_delimiter = ',', num_args = 6)]
    pub site: Option<Vec<usize>>,
    /// Number of random chain-cluster fixtures when no graph is given.
    #[arg(long, default_value_t = 50)]
    pub random: usize,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50)]
    pub energies: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// JSON-lines transformation log.
    #[arg(long)]
    pub transform: PathBuf,
}

#[derive(Args, Debug)]
pub struct ShiftArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub transform: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub levels: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Mode {
    Balanced,
    Generic,
}

#[derive(Args, Debug)]
pub struct LemmaArgs {
    /// Matrix dimension.
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub ranks: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub fixtures: usize,
    #[arg(long, default_value_t = 50)]
    pub energies: usize,
    #[arg(long, value_enum, default_value_t = Mode::Balanced)]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
    /// Coarsest step; the runs use h, h/2 and h/4.
    #[arg(long, default_value_t = 1e-2)]
    pub h: f64,
    /// Piecewise-constant potential JSON.
    #[arg(long)]
    pub potential: Option<PathBuf>,
    /// Also solve the metric graph and report relative differences (no potential).
    #[arg(long, conflicts_with = "potential")]
    pub compare: bool,
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    #[command(subcommand)]
    pub action: EnsembleAction,
}

#[derive(Subcommand, Debug)]
pub enum EnsembleAction {
    /// Random walk by elementary swaps.
    Walk {
        #[arg(long)]
        topology: PathBuf,
        /// JSON array of edge lengths.
        #[arg(long)]
        lengths: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Levels per visited arrangement written to spectra.csv (0 skips it).
        #[arg(long, default_value_t = 0)]
        levels: usize,
    },
    /// Interlacing degree against swap distance on random pairs.
    Pairs {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        lengths: PathBuf,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        #[arg(long, default_value_t = 200)]
        levels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
pub struct Figure3Args {
    #[arg(long, default_value_t = 10_000)]
    pub levels: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct AdditivityArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub e: usize,
    #[arg(long)]
    pub s_e: f64,
    #[arg(long)]
    pub f: usize,
    #[arg(long)]
    pub s_f: f64,
    #[arg(long, default_value_t = 200)]
    pub energies: usize,
    #[arg(long, default_value_t = 30.0)]
    pub kmax: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CrossingLimitArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// First switched endpoint, `edge:head` or `edge:tail`.
    #[arg(long)]
    pub p: String,
    #[arg(long)]
    pub q: String,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
    /// Largest accepted error at the smallest ε.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = commands::exit_code(&e);
            if code == 4 {
                eprintln!("PROPERTY VIOLATION: {e:#}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(code)
        }
    }
}
