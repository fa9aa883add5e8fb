//! Subcommand handlers. Data goes to `out`, diagnostics to `err`.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use percolab::estimate::{
    fit_decay, kappa, BinomialEstimate, EstimateError, Regime, XiEstimate, Z_95,
};
use percolab::lattice::BoxSpec;
use percolab::montecarlo::{estimate_xi, run, ExperimentKind, ExperimentSpec, McError};
use percolab::oracle::{enumerate, parse_probability, OracleError};
use percolab::percolation::EdgeSampler;
use serde::Serialize;

use crate::args::{ExperimentArgs, ImageFormat, OracleArgs, RenderArgs, XiArgs};
use crate::render::{render_ascii, render_ppm};

pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_ESTIMATOR: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn io(e: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e)
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        let code = match &e {
            McError::InvalidSpec(_) => EXIT_INVALID,
            McError::ResourceRefusal { .. } | McError::Cluster(_) => EXIT_RESOURCE,
            McError::Estimate(inner) => return inner.clone().into(),
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        let code = match e {
            EstimateError::AtCritical { .. } | EstimateError::RegimeUndeclared(_) => EXIT_INVALID,
            _ => EXIT_ESTIMATOR,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        let code = match e {
            OracleError::EdgeBudget { .. } => EXIT_RESOURCE,
            _ => EXIT_INVALID,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type CmdResult = Result<(), CliError>;

pub fn experiment(
    kind: ExperimentKind,
    args: &ExperimentArgs,
    tweak: impl FnOnce(&mut ExperimentSpec),
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let mut spec = ExperimentSpec::new(
        kind,
        args.d,
        args.p,
        args.n.0.clone(),
        args.trials,
        args.seed,
    );
    spec.margin = args.margin;
    spec.xi_guess = args.xi_guess;
    spec.regime = args.regime.map(Regime::from);
    spec.z = args.z;
    spec.memory_budget = args.memory_budget;
    tweak(&mut spec);
    let workers = args.workers.resolve();
    writeln!(
        err,
        "{kind:?}: d={} p={} n={:?} trials={} seed={} workers={workers}",
        spec.d, spec.p, spec.ns, spec.trials, spec.seed
    )?;
    let manifest = run(&spec, workers)?;
    for r in manifest.results.iter().filter(|r| !r.reliable) {
        writeln!(
            err,
            "warning: n={} censor rate {:.4} is above 1%; widen the margin (--margin or --xi-guess)",
            r.n, r.censor_rate
        )?;
    }
    if args.format.json {
        writeln!(out, "{}", manifest.to_json())?;
    } else {
        write!(out, "{}", manifest.to_csv())?;
    }
    writeln!(err, "done in {:.2}s", manifest.wall_time_seconds)?;
    Ok(())
}

pub fn oracle(args: &OracleArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if args.d == 0 {
        return Err(CliError::invalid("dimension must be at least 1"));
    }
    let p = parse_probability(&args.p)?;
    let obs = args.obs.observable(args.rho).map_err(CliError::invalid)?;
    let started = Instant::now();
    let dist = enumerate(&BoxSpec::new(args.d, args.n), &p, obs)?;
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&dist).expect("distribution serializes")
    )?;
    writeln!(err, "enumerated in {:.2}s", started.elapsed().as_secs_f64())?;
    Ok(())
}

#[derive(Serialize)]
struct XiReport<'a> {
    xi: &'a XiEstimate,
    kappa: percolab::estimate::Derived,
    d: usize,
    p: Option<f64>,
    /// `(n, censor rate)` per simulated radius; empty for file input.
    censor_rates: Vec<(u32, f64)>,
}

pub fn xi(args: &XiArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let poly = !args.no_poly;
    let declared = args.regime.map(Regime::from);
    let (xi, censor_rates) = if let Some(path) = &args.input {
        let points = read_tail_csv(path)?;
        let regime = match args.p {
            Some(p) => Some(Regime::classify(args.d, p, declared)?),
            None => declared,
        };
        let mut xi = fit_decay(&points, poly)?;
        if let Some(r) = regime {
            xi = xi.with_regime(r);
        }
        (xi, Vec::new())
    } else {
        let p = args
            .p
            .ok_or_else(|| CliError::invalid("--p is required unless --input is given"))?;
        let ns = args
            .n
            .as_ref()
            .map_or_else(|| (5..=30).collect(), |l| l.0.clone());
        let workers = args.workers.resolve();
        writeln!(
            err,
            "xi: d={} p={p} n={ns:?} trials={} workers={workers}",
            args.d, args.trials
        )?;
        let run = estimate_xi(
            args.d,
            p,
            declared,
            ns,
            args.trials,
            args.seed,
            poly,
            workers,
        )?;
        let rates = run
            .manifest
            .results
            .iter()
            .map(|r| (r.n, r.censor_rate))
            .collect();
        (run.xi, rates)
    };
    let k = kappa(&xi, args.d)?;
    if args.json {
        let report = XiReport {
            xi: &xi,
            kappa: k,
            d: args.d,
            p: args.p,
            censor_rates,
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        )?;
        return Ok(());
    }
    writeln!(out, "xi      {:.6} ± {:.6}", xi.xi_hat, xi.stderr)?;
    writeln!(out, "kappa   {:.6} ± {:.6}", k.value, k.stderr)?;
    let regime = match xi.regime {
        Some(Regime::Subcritical) => "subcritical",
        Some(Regime::Supercritical) => "supercritical",
        None => "undeclared",
    };
    writeln!(
        out,
        "fit     n {}..{}, {}, regime {regime}, intercept {:.4}",
        xi.n_min,
        xi.n_max,
        if xi.poly_corrected {
            "with n^beta prefactor"
        } else {
            "pure exponential"
        },
        xi.intercept
    )?;
    if let Some(beta) = xi.log_coefficient {
        writeln!(out, "beta    {beta:.4}")?;
    }
    if !xi.dropped.is_empty() {
        writeln!(out, "dropped {:?} (fewer than 10 successes)", xi.dropped)?;
    }
    if !censor_rates.is_empty() {
        let worst = censor_rates.iter().map(|c| c.1).fold(0.0, f64::max);
        writeln!(out, "censor  max {worst:.6}")?;
        for (n, rate) in censor_rates.iter().filter(|c| c.1 > 0.0) {
            writeln!(out, "        n={n} {rate:.6}")?;
        }
    }
    Ok(())
}

/// Rows of `n,successes,trials`; a non-numeric first row is taken as a header.
fn read_tail_csv(path: &Path) -> Result<Vec<(u32, BinomialEstimate)>, CliError> {
    let bad = |msg: String| CliError::invalid(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut points = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != 3 {
            return Err(bad(format!(
                "row {} has {} fields, expected 3",
                i + 1,
                row.len()
            )));
        }
        let n = row[0].parse::<u32>();
        if i == 0 && n.is_err() {
            continue;
        }
        let parse = |k: usize| {
            row[k]
                .parse::<u64>()
                .map_err(|_| bad(format!("row {}: bad field `{}`", i + 1, &row[k])))
        };
        let n = n.map_err(|_| bad(format!("row {}: bad n `{}`", i + 1, &row[0])))?;
        let (successes, trials) = (parse(1)?, parse(2)?);
        points.push((n, BinomialEstimate::new(successes, trials, 0, Z_95)?));
    }
    Ok(points)
}

pub fn render(args: &RenderArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    if args.d != 2 {
        return Err(CliError::invalid(format!(
            "render draws d = 2 only, got d = {}",
            args.d
        )));
    }
    if !(0.0..=1.0).contains(&args.p) {
        return Err(CliError::invalid(format!(
            "p must lie in [0, 1], got {}",
            args.p
        )));
    }
    let sampler = EdgeSampler::new(args.seed, args.p);
    let bytes = match args.format {
        ImageFormat::Ascii => render_ascii(args.n, sampler).into_bytes(),
        ImageFormat::Ppm => render_ppm(args.n, sampler, args.cell as usize),
    };
    match &args.out {
        Some(path) => {
            fs::write(path, &bytes)?;
            writeln!(err, "wrote {} ({} bytes)", path.display(), bytes.len())?;
        }
        None => out.write_all(&bytes)?,
    }
    Ok(())
}
