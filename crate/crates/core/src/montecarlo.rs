//! Experiment orchestration.
//!
//! Every trial draws its own edge sampler from `mix(seed, n, trial)`, so trials
//! are independent and can run on any worker. Per-trial outcomes are collected
//! in trial order and reduced with a fixed tree, which makes the numerical
//! results byte-identical for any worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{
    diam_tail_from_record, explore_origin, forest_bytes_per_vertex, one_arm_from_record,
    outer_touching_clusters, r_fb, r_pair, s_n, scan_outer, stream_max_diameter, ClusterError,
    ClusterForest, ExploreScratch, MarginPolicy, MarginSource, SimFrame, SlabScratch, TailOutcome,
};
use crate::estimate::{
    fit_decay, select_fit_window, tree_merge, BinomialEstimate, EstimateError, Regime, StreamStats,
    XiEstimate, Z_95,
};
use crate::lattice::BoxSpec;
use crate::percolation::{mix_seed, EdgeSampler};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MEMORY_BUDGET: u64 = 8 << 30;
pub const MARGIN_FLOOR: u32 = 16;
/// Runs whose censor rate exceeds this are marked unreliable.
pub const CENSOR_LIMIT: f64 = 0.01;
const PILOT_TRIALS: u64 = 100;
const PILOT_RADIUS: u32 = 64;
const PILOT_TAG: u64 = 0x0917_07a9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error(
        "a single trial needs {required} bytes, over the {budget}-byte memory budget; \
         reduce n or the margin, or raise the budget"
    )]
    ResourceRefusal { required: u64, budget: u64 },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExperimentKind {
    /// `0 ↔ ∂B_n`, optionally restricted to finite clusters.
    OneArm,
    /// `diam(C_0) ≥ n` with `C_0` finite.
    DiamTail,
    /// `R_n` (free or zero boundary) and optionally `R_n > ρ ln n`.
    RnScan,
    /// Paired `R_n^{(fb)}`, `R_n^{(zb)}` and whether they differ.
    RnCompare,
    /// `S_n(ρ)`.
    Sn,
}

impl ExperimentKind {
    fn code(self) -> u64 {
        match self {
            ExperimentKind::OneArm => 1,
            ExperimentKind::DiamTail => 2,
            ExperimentKind::RnScan => 3,
            ExperimentKind::RnCompare => 4,
            ExperimentKind::Sn => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Fb,
    Zb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub d: usize,
    pub p: f64,
    pub seed: u64,
    pub ns: Vec<u32>,
    pub trials: u64,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub finite_only: bool,
    /// Fixed margin `N − n`; overrides everything else.
    #[serde(default)]
    pub margin: Option<u32>,
    /// Decay-rate guess used to size the margin; a pilot run supplies one when absent.
    #[serde(default)]
    pub xi_guess: Option<f64>,
    #[serde(default)]
    pub regime: Option<Regime>,
    pub z: f64,
    pub memory_budget: u64,
}

impl ExperimentSpec {
    pub fn new(
        kind: ExperimentKind,
        d: usize,
        p: f64,
        ns: Vec<u32>,
        trials: u64,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            d,
            p,
            seed,
            ns,
            trials,
            rho: None,
            boundary: Boundary::Fb,
            finite_only: false,
            margin: None,
            xi_guess: None,
            regime: None,
            z: Z_95,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<(), McError> {
        let bad = |msg: String| Err(McError::InvalidSpec(msg));
        if self.d < 2 {
            return bad(format!("dimension must be at least 2, got {}", self.d));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p must lie in [0, 1], got {}", self.p));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.ns.is_empty() {
            return bad("at least one n is required".into());
        }
        let min_n = if self.kind == ExperimentKind::Sn {
            2
        } else {
            1
        };
        if let Some(n) = self.ns.iter().find(|&&n| n < min_n) {
            return bad(format!("n must be at least {min_n}, got {n}"));
        }
        // The bare one-arm event is a finite-volume quantity, meaningful at any p.
        let mechanics_only = self.kind == ExperimentKind::OneArm && !self.finite_only;
        // Box kinds censor on the regime, so it must be known.
        let box_kind = matches!(
            self.kind,
            ExperimentKind::RnScan | ExperimentKind::RnCompare | ExperimentKind::Sn
        );
        if !mechanics_only {
            match Regime::classify(self.d, self.p, self.regime) {
                Err(e @ EstimateError::AtCritical { .. }) => return bad(e.to_string()),
                Err(e @ EstimateError::RegimeUndeclared(_)) if box_kind => {
                    return bad(e.to_string())
                }
                _ => {}
            }
        }
        match self.rho {
            Some(r) if !(r.is_finite() && r > 0.0) => {
                return bad(format!("rho must be positive, got {r}"))
            }
            None if self.kind == ExperimentKind::Sn => return bad("SN requires rho".into()),
            _ => {}
        }
        if let Some(x) = self.xi_guess {
            if !(x.is_finite() && x > 0.0) {
                return bad(format!("xi guess must be positive, got {x}"));
            }
        }
        if !(self.z.is_finite() && self.z > 0.0) {
            return bad(format!("z must be positive, got {}", self.z));
        }
        Ok(())
    }

    /// Clusters allowed to touch `∂B_N` before a box trial counts as censored:
    /// one (the infinite cluster) above `p_c`, none below.
    fn allowed_touching(&self) -> u64 {
        match Regime::classify(self.d, self.p, self.regime) {
            Ok(Regime::Supercritical) => 1,
            _ => 0,
        }
    }
}

/// `max(⌈3 (d/ξ) ln max(n, 2)⌉, 16)`.
pub fn margin_for(n: u32, d: usize, xi_guess: f64) -> Result<u32, McError> {
    if xi_guess.is_nan() || xi_guess <= 0.0 {
        return Err(McError::InvalidSpec(format!(
            "xi guess must be positive, got {xi_guess}"
        )));
    }
    let kappa = d as f64 / xi_guess;
    let m = (3.0 * kappa * (n.max(2) as f64).ln()).ceil();
    Ok((m.min(u32::MAX as f64) as u32).max(MARGIN_FLOOR))
}

/// Rough decay-rate guess from 100 explorations of the origin's cluster: treats
/// finite-cluster diameters as geometric, `ξ ≈ ln(1 + 1/mean)`. `None` when no
/// finite cluster has positive diameter.
pub fn pilot_xi_guess(d: usize, p: f64, seed: u64) -> Option<f64> {
    let frame = SimFrame::with_margin(d, 0, PILOT_RADIUS);
    let mut scratch = ExploreScratch::default();
    let mut stats = StreamStats::default();
    for t in 0..PILOT_TRIALS {
        let sampler = EdgeSampler::new(mix_seed(seed, &[t]), p);
        let rec = explore_origin(&frame, sampler, &mut scratch);
        if !rec.touches_outer {
            stats.push(rec.diameter() as f64);
        }
    }
    (stats.count > 0 && stats.mean > 0.0).then(|| (1.0 + 1.0 / stats.mean).ln())
}

fn margin_policy(spec: &ExperimentSpec, n: u32) -> Result<MarginPolicy, McError> {
    if let Some(margin) = spec.margin {
        return Ok(MarginPolicy::fixed(margin));
    }
    // a path from 0 leaving B_n crosses ∂B_n first, so edges beyond B_n never matter
    if spec.kind == ExperimentKind::OneArm && !spec.finite_only {
        return Ok(MarginPolicy {
            margin: 0,
            xi_guess: None,
            source: MarginSource::Unused,
        });
    }
    let (xi_guess, source) = match spec.xi_guess {
        Some(x) => (Some(x), MarginSource::Declared),
        None => {
            let pilot_seed = mix_seed(spec.seed, &[PILOT_TAG, spec.kind.code(), n as u64]);
            match pilot_xi_guess(spec.d, spec.p, pilot_seed) {
                Some(x) => (Some(x), MarginSource::Pilot),
                None => (None, MarginSource::Floor),
            }
        }
    };
    let margin = match xi_guess {
        Some(x) => margin_for(n, spec.d, x)?,
        None => MARGIN_FLOOR,
    };
    Ok(MarginPolicy {
        margin,
        xi_guess,
        source,
    })
}

/// Working memory for one trial of `kind` on `frame`.
fn trial_bytes(spec: &ExperimentSpec, frame: &SimFrame) -> u64 {
    let outer = frame.outer.vertex_count();
    let inner = frame.inner.vertex_count();
    let per = forest_bytes_per_vertex(spec.d);
    match spec.kind {
        ExperimentKind::OneArm | ExperimentKind::DiamTail => 4 * outer,
        // the streaming pass needs two slabs; full forests are only a fallback
        ExperimentKind::RnScan if spec.boundary == Boundary::Zb => per * (outer + inner),
        ExperimentKind::RnScan | ExperimentKind::Sn => {
            let slab = frame.outer.side().pow(spec.d as u32 - 1);
            4 * per * slab
        }
        ExperimentKind::RnCompare => per * (outer + inner),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub n: u32,
    pub outer_n: u32,
    pub margin: MarginPolicy,
    pub trials: u64,
    pub censored: u64,
    pub censor_rate: f64,
    /// False when the censor rate exceeds 1%.
    pub reliable: bool,
    /// Indicator kinds; `R_n > ρ ln n` for RN_SCAN with ρ; `R^{zb} ≠ R^{fb}` for RN_COMPARE.
    pub estimate: Option<BinomialEstimate>,
    /// `R_n` for RN_SCAN, `R_n^{(fb)}` for RN_COMPARE, `S_n(ρ)` for SN.
    pub stats: Option<StreamStats>,
    /// `R_n^{(zb)}` for RN_COMPARE.
    pub zb_stats: Option<StreamStats>,
    /// RN_COMPARE trials with `R^{zb} > R^{fb}`; always 0.
    pub zb_above_fb: Option<u64>,
}

impl PointResult {
    /// `(estimate, ci_low, ci_high)` for tabular output.
    pub fn summary(&self, z: f64) -> (f64, f64, f64) {
        if let Some(b) = &self.estimate {
            (b.point, b.ci_low, b.ci_high)
        } else if let Some(s) = &self.stats {
            let (lo, hi) = s.mean_ci(z);
            (s.mean, lo, hi)
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub seed: u64,
    pub spec: ExperimentSpec,
    pub results: Vec<PointResult>,
    pub workers: usize,
    pub wall_time_seconds: f64,
}

pub const CSV_HEADER: &str = "n,estimate,ci_low,ci_high,censored,trials";

impl RunManifest {
    /// The reproducible part of the manifest: spec echo and results.
    pub fn payload(&self) -> String {
        serde_json::to_string(&(&self.spec, &self.results)).expect("manifest serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.results {
            let (est, lo, hi) = r.summary(self.spec.z);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n, est, lo, hi, r.censored, r.trials
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Indicator {
        hit: bool,
        censored: bool,
    },
    Value {
        value: f64,
        exceeds: bool,
        censored: bool,
    },
    Pair {
        fb: u32,
        zb: u32,
        censored: bool,
    },
}

impl Outcome {
    fn censored(&self) -> bool {
        match *self {
            Outcome::Indicator { censored, .. }
            | Outcome::Value { censored, .. }
            | Outcome::Pair { censored, .. } => censored,
        }
    }
}

#[derive(Default)]
struct Scratch {
    explore: ExploreScratch,
    slab: SlabScratch,
    outer: ClusterForest,
    inner: ClusterForest,
    /// Skip the streaming pass and label everything with full forests.
    forest_only: bool,
}

fn run_trial(
    spec: &ExperimentSpec,
    frame: &SimFrame,
    trial: u64,
    scratch: &mut Scratch,
) -> Result<Outcome, McError> {
    let n = frame.inner.n;
    let sampler = EdgeSampler::new(mix_seed(spec.seed, &[n as u64, trial]), spec.p);
    let log_n = (n as f64).ln();
    let allowed = spec.allowed_touching();
    Ok(match spec.kind {
        ExperimentKind::OneArm => {
            let rec = explore_origin(frame, sampler, &mut scratch.explore);
            let hit = one_arm_from_record(frame, &rec, spec.finite_only);
            Outcome::Indicator {
                hit,
                censored: spec.finite_only && rec.touches_outer,
            }
        }
        ExperimentKind::DiamTail => {
            let rec = explore_origin(frame, sampler, &mut scratch.explore);
            match diam_tail_from_record(&rec, n) {
                TailOutcome::Hit => Outcome::Indicator {
                    hit: true,
                    censored: false,
                },
                TailOutcome::Miss => Outcome::Indicator {
                    hit: false,
                    censored: false,
                },
                TailOutcome::Censored => Outcome::Indicator {
                    hit: false,
                    censored: true,
                },
            }
        }
        ExperimentKind::RnScan | ExperimentKind::RnCompare | ExperimentKind::Sn => {
            let rho = spec.rho;
            let (fb, touching, s_count) = if scratch.forest_only {
                scratch.outer.rebuild(&frame.outer, sampler)?;
                let f = &scratch.outer;
                (
                    r_fb(frame, f),
                    outer_touching_clusters(frame, f),
                    rho.map_or(0, |r| s_n(frame, f, r)),
                )
            } else {
                let scan = scan_outer(frame, sampler, rho, &mut scratch.slab);
                (scan.r_fb, scan.touching, scan.s_count)
            };
            let censored = touching > allowed;
            let needs_zb = spec.kind == ExperimentKind::RnCompare
                || (spec.kind == ExperimentKind::RnScan && spec.boundary == Boundary::Zb);
            let zb = if !needs_zb {
                0
            } else if touching == 0 && !scratch.forest_only {
                // every vertex of B_n has a finite outer cluster, so no filtering is needed
                stream_max_diameter(&frame.inner, sampler, &mut scratch.slab)
            } else {
                if !scratch.forest_only {
                    scratch.outer.rebuild(&frame.outer, sampler)?;
                }
                scratch.inner.rebuild(&frame.inner, sampler)?;
                r_pair(frame, &scratch.outer, &scratch.inner).1
            };
            match spec.kind {
                ExperimentKind::RnCompare => Outcome::Pair { fb, zb, censored },
                ExperimentKind::Sn => Outcome::Value {
                    value: s_count as f64,
                    exceeds: false,
                    censored,
                },
                _ => {
                    let r = if spec.boundary == Boundary::Zb {
                        zb
                    } else {
                        fb
                    };
                    Outcome::Value {
                        value: r as f64,
                        exceeds: rho.is_some_and(|rho| r as f64 > rho * log_n),
                        censored,
                    }
                }
            }
        }
    })
}

fn aggregate(
    spec: &ExperimentSpec,
    frame: &SimFrame,
    outcomes: &[Outcome],
) -> Result<PointResult, McError> {
    let trials = outcomes.len() as u64;
    let censored = outcomes.iter().filter(|o| o.censored()).count() as u64;
    let censor_rate = censored as f64 / trials as f64;
    let mut result = PointResult {
        n: frame.inner.n,
        outer_n: frame.outer.n,
        margin: frame.margin,
        trials,
        censored,
        censor_rate,
        reliable: censor_rate <= CENSOR_LIMIT,
        estimate: None,
        stats: None,
        zb_stats: None,
        zb_above_fb: None,
    };
    let singles = |f: &dyn Fn(&Outcome) -> f64| -> StreamStats {
        let parts: Vec<StreamStats> = outcomes
            .iter()
            .map(|o| StreamStats::from_values([f(o)]))
            .collect();
        tree_merge(&parts)
    };
    match spec.kind {
        ExperimentKind::OneArm | ExperimentKind::DiamTail => {
            let hits = outcomes
                .iter()
                .filter(|o| matches!(o, Outcome::Indicator { hit: true, .. }))
                .count() as u64;
            result.estimate = Some(BinomialEstimate::new(hits, trials, censored, spec.z)?);
        }
        ExperimentKind::RnScan | ExperimentKind::Sn => {
            result.stats = Some(singles(&|o| match o {
                Outcome::Value { value, .. } => *value,
                _ => unreachable!(),
            }));
            if spec.kind == ExperimentKind::RnScan && spec.rho.is_some() {
                let hits = outcomes
                    .iter()
                    .filter(|o| matches!(o, Outcome::Value { exceeds: true, .. }))
                    .count() as u64;
                result.estimate = Some(BinomialEstimate::new(hits, trials, censored, spec.z)?);
            }
        }
        ExperimentKind::RnCompare => {
            let pairs: Vec<(u32, u32)> = outcomes
                .iter()
                .map(|o| match o {
                    Outcome::Pair { fb, zb, .. } => (*fb, *zb),
                    _ => unreachable!(),
                })
                .collect();
            let differ = pairs.iter().filter(|(fb, zb)| fb != zb).count() as u64;
            result.estimate = Some(BinomialEstimate::new(differ, trials, censored, spec.z)?);
            result.stats = Some(singles(&|o| match o {
                Outcome::Pair { fb, .. } => *fb as f64,
                _ => unreachable!(),
            }));
            result.zb_stats = Some(singles(&|o| match o {
                Outcome::Pair { zb, .. } => *zb as f64,
                _ => unreachable!(),
            }));
            result.zb_above_fb = Some(pairs.iter().filter(|(fb, zb)| zb > fb).count() as u64);
        }
    }
    Ok(result)
}

/// Runs every `n` of the experiment on a pool of `workers` threads.
pub fn run(spec: &ExperimentSpec, workers: usize) -> Result<RunManifest, McError> {
    spec.validate()?;
    let started = Instant::now();
    let mut frames = Vec::with_capacity(spec.ns.len());
    for &n in &spec.ns {
        let frame = SimFrame::new(BoxSpec::new(spec.d, n), margin_policy(spec, n)?);
        let required = trial_bytes(spec, &frame);
        if required > spec.memory_budget || frame.outer.vertex_count() > u32::MAX as u64 {
            return Err(McError::ResourceRefusal {
                required,
                budget: spec.memory_budget,
            });
        }
        frames.push((frame, required));
    }

    let mut results = Vec::with_capacity(frames.len());
    for (frame, required) in frames {
        // never hold more concurrent working sets than the budget allows
        let threads = workers
            .max(1)
            .min((spec.memory_budget / required.max(1)).max(1) as usize);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        let outcomes: Result<Vec<Outcome>, McError> = pool.install(|| {
            (0..spec.trials)
                .into_par_iter()
                .map_init(Scratch::default, |scratch, t| {
                    run_trial(spec, &frame, t, scratch)
                })
                .collect()
        });
        results.push(aggregate(spec, &frame, &outcomes?)?);
    }

    Ok(RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: "percolab".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: spec.seed,
        spec: spec.clone(),
        results,
        workers,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Result of a live decay-rate estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiRun {
    pub manifest: RunManifest,
    pub xi: XiEstimate,
    /// Largest censor rate over the scanned `n`.
    pub max_censor_rate: f64,
}

/// Estimates ξ(p) from `P(diam(C_0) ≥ n, |C_0| < ∞)` over `ns`, using the
/// default fit window.
#[allow(clippy::too_many_arguments)]
pub fn estimate_xi(
    d: usize,
    p: f64,
    regime: Option<Regime>,
    ns: Vec<u32>,
    trials: u64,
    seed: u64,
    poly_corrected: bool,
    workers: usize,
) -> Result<XiRun, McError> {
    let regime = Regime::classify(d, p, regime)?;
    let mut spec = ExperimentSpec::new(ExperimentKind::DiamTail, d, p, ns, trials, seed);
    spec.regime = Some(regime);
    let manifest = run(&spec, workers)?;
    let points: Vec<(u32, BinomialEstimate)> = manifest
        .results
        .iter()
        .filter_map(|r| r.estimate.map(|b| (r.n, b)))
        .collect();
    let window = select_fit_window(&points);
    let xi = fit_decay(&window, poly_corrected)?.with_regime(regime);
    let max_censor_rate = manifest
        .results
        .iter()
        .map(|r| r.censor_rate)
        .fold(0.0, f64::max);
    Ok(XiRun {
        manifest,
        xi,
        max_censor_rate,
    })
}
