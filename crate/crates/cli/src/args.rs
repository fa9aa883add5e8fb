//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use percolab::estimate::Regime;
use percolab::montecarlo::Boundary;
use percolab::oracle::Observable;

#[derive(Debug, Parser)]
#[command(
    name = "percolab",
    version,
    about = "Bond percolation on Z^d: cluster diameters, exact small-box laws, pictures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// P(0 <-> boundary of B_n), optionally only through finite clusters.
    Onearm {
        #[command(flatten)]
        common: ExperimentArgs,
        #[arg(long)]
        finite_only: bool,
    },
    /// P(diam C_0 >= n, C_0 finite).
    DiamTail {
        #[command(flatten)]
        common: ExperimentArgs,
    },
    /// Largest finite-cluster diameter meeting B_n; with --rho also P(R_n > rho ln n).
    RnScan {
        #[command(flatten)]
        common: ExperimentArgs,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Fb)]
        boundary: BoundaryArg,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Paired free and zero boundary R_n, and how often they differ.
    RnCompare {
        #[command(flatten)]
        common: ExperimentArgs,
    },
    /// Vertices of B_n in finite clusters of diameter above rho ln n.
    Sn {
        #[command(flatten)]
        common: ExperimentArgs,
        #[arg(long)]
        rho: f64,
    },
    /// Exact law of an observable on a small box, by enumeration.
    Oracle(OracleArgs),
    /// Decay rate xi and kappa = d/xi from diameter tails.
    Xi(XiArgs),
    /// Draw the open bonds of B_n (d = 2).
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub p: f64,
    /// Radii: comma list and inclusive ranges, e.g. `64,128` or `5..30`.
    #[arg(long, value_parser = parse_ns)]
    pub n: NList,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed outer margin N - n.
    #[arg(long)]
    pub margin: Option<u32>,
    /// Decay-rate guess for sizing the margin; a pilot run supplies one otherwise.
    #[arg(long)]
    pub xi_guess: Option<f64>,
    /// Required for d >= 3, where p_c is not known.
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    /// Normal quantile for confidence intervals.
    #[arg(long, default_value_t = percolab::estimate::Z_95)]
    pub z: f64,
    /// Bytes of working memory a single trial may use.
    #[arg(long, default_value_t = percolab::montecarlo::DEFAULT_MEMORY_BUDGET)]
    pub memory_budget: u64,
    #[command(flatten)]
    pub workers: WorkerArgs,
    #[command(flatten)]
    pub format: FormatArgs,
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "PERCOLAB_WORKERS")]
    pub workers: Option<usize>,
}

impl WorkerArgs {
    pub fn resolve(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct FormatArgs {
    /// Emit the full run manifest as JSON.
    #[arg(long)]
    pub json: bool,
    /// Emit one CSV row per n (the default).
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub n: u32,
    /// Exact probability: `a/b`, an integer or a finite decimal.
    #[arg(long)]
    pub p: String,
    #[arg(long, value_enum)]
    pub obs: ObsArg,
    /// Diameter threshold factor for `s-count`.
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct XiArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_parser = parse_ns)]
    pub n: Option<NList>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    /// Fit a pure exponential without the `n^β` prefactor.
    #[arg(long)]
    pub no_poly: bool,
    /// CSV of `n,successes,trials` to fit instead of simulating.
    #[arg(long, conflicts_with_all = ["n", "seed"])]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub workers: WorkerArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ImageFormat::Ppm)]
    pub format: ImageFormat,
    /// Pixels per lattice cell.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=256))]
    pub cell: u32,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Fb,
    Zb,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Fb => Boundary::Fb,
            BoundaryArg::Zb => Boundary::Zb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Sub,
    Super,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Sub => Regime::Subcritical,
            RegimeArg::Super => Regime::Supercritical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObsArg {
    OneArm,
    Rzb,
    DiamOrigin,
    SCount,
}

impl ObsArg {
    pub fn observable(self, rho: Option<f64>) -> Result<Observable, String> {
        Ok(match self {
            ObsArg::OneArm => Observable::OneArm,
            ObsArg::Rzb => Observable::RZbWorld,
            ObsArg::DiamOrigin => Observable::DiamOrigin,
            ObsArg::SCount => match rho {
                Some(rho) if rho.is_finite() && rho > 0.0 => Observable::SCount { rho },
                _ => return Err("s-count needs a positive --rho".into()),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Ascii,
    Ppm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NList(pub Vec<u32>);

/// `64,128,256`, `5..30` (inclusive) or a mix of both.
pub fn parse_ns(s: &str) -> Result<NList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let a: u32 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad range start in `{part}`"))?;
            let b: u32 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad range end in `{part}`"))?;
            if a > b {
                return Err(format!("empty range `{part}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(
                part.parse()
                    .map_err(|_| format!("not a radius: `{part}`"))?,
            );
        }
    }
    if out.is_empty() {
        return Err("no radii given".into());
    }
    Ok(NList(out))
}
