//! Statistics: mergeable moments, Wilson intervals, and the decay-rate fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Two-sided 99.9% normal quantile.
pub const Z_999: f64 = 3.290_526_731_491_926;
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("successes ({successes}) exceed trials ({trials})")]
    TooManySuccesses { successes: u64, trials: u64 },
    #[error("need at least {needed} usable points, have {have} (dropped n = {dropped:?})")]
    InsufficientPoints {
        needed: usize,
        have: usize,
        dropped: Vec<u32>,
    },
    #[error("n = {0} appears more than once")]
    DuplicateN(u32),
    #[error("decay rate {0} is not positive; kappa is undefined (near-critical?)")]
    NonPositiveXi(f64),
    #[error("p = {p} is the critical point p_c({d})")]
    AtCritical { d: usize, p: f64 },
    #[error("p_c({0}) is unknown; declare the regime explicitly")]
    RegimeUndeclared(usize),
    #[error("regression normal equations are singular")]
    Singular,
}

/// Count, mean and sum of squared deviations; merges with the parallel formula.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamStats {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl StreamStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut s = Self::default();
        for x in values {
            s.push(x);
        }
        s
    }

    pub fn merge(&self, other: &StreamStats) -> StreamStats {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let count = self.count + other.count;
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * nb / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / count as f64;
        StreamStats { count, mean, m2 }
    }

    /// Unbiased sample variance; NaN below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    /// Normal-approximation interval for the mean.
    pub fn mean_ci(&self, z: f64) -> (f64, f64) {
        let half = if self.count < 2 {
            0.0
        } else {
            z * self.std_error()
        };
        (self.mean - half, self.mean + half)
    }
}

/// Combines a slice in a fixed pairwise tree. The tree shape depends only on
/// the slice length, so the floating-point result is reproducible.
pub fn tree_merge(items: &[StreamStats]) -> StreamStats {
    match items.len() {
        0 => StreamStats::default(),
        1 => items[0],
        len => {
            let mid = len / 2;
            tree_merge(&items[..mid]).merge(&tree_merge(&items[mid..]))
        }
    }
}

pub fn wilson_ci(successes: u64, trials: u64, z: f64) -> Result<(f64, f64), EstimateError> {
    if trials == 0 {
        return Err(EstimateError::NoTrials);
    }
    if successes > trials {
        return Err(EstimateError::TooManySuccesses { successes, trials });
    }
    Ok(wilson_from_point(
        successes as f64 / trials as f64,
        trials as f64,
        z,
    ))
}

fn wilson_from_point(point: f64, trials: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let denom = 1.0 + z2 / trials;
    let center = (point + z2 / (2.0 * trials)) / denom;
    let half = z * (point * (1.0 - point) / trials + z2 / (4.0 * trials * trials)).sqrt() / denom;
    let low = (center - half).clamp(0.0, point);
    let high = (center + half).clamp(point, 1.0);
    (low, high)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialEstimate {
    pub successes: u64,
    pub trials: u64,
    /// Trials whose outcome could not be resolved; never counted as successes.
    pub censored: u64,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub z: f64,
}

impl BinomialEstimate {
    pub fn new(successes: u64, trials: u64, censored: u64, z: f64) -> Result<Self, EstimateError> {
        let (ci_low, ci_high) = wilson_ci(successes, trials, z)?;
        Ok(Self {
            successes,
            trials,
            censored,
            point: successes as f64 / trials as f64,
            ci_low,
            ci_high,
            z,
        })
    }

    /// A synthetic estimate whose point value is exactly `p`.
    pub fn from_probability(p: f64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_from_point(p, trials as f64, Z_95);
        Self {
            successes: (p * trials as f64).round() as u64,
            trials,
            censored: 0,
            point: p,
            ci_low,
            ci_high,
            z: Z_95,
        }
    }

    pub fn censor_rate(&self) -> f64 {
        self.censored as f64 / self.trials as f64
    }

    pub fn std_error(&self) -> f64 {
        (self.point * (1.0 - self.point) / self.trials as f64).sqrt()
    }

    /// Inverse delta-method variance of `ln p̂`: `trials · p̂ / (1 − p̂)`.
    fn log_weight(&self) -> f64 {
        self.trials as f64 * self.point / (1.0 - self.point)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `p < p_c`; the decay rate is φ(p).
    Subcritical,
    /// `p > p_c`; the decay rate is σ(p).
    Supercritical,
}

/// Known critical points. Only `p_c(2) = 1/2` is known exactly.
pub fn known_pc(d: usize) -> Option<f64> {
    match d {
        2 => Some(0.5),
        _ => None,
    }
}

impl Regime {
    pub fn classify(d: usize, p: f64, declared: Option<Regime>) -> Result<Regime, EstimateError> {
        match known_pc(d) {
            Some(pc) if p == pc => Err(EstimateError::AtCritical { d, p }),
            Some(pc) if p < pc => Ok(Regime::Subcritical),
            Some(_) => Ok(Regime::Supercritical),
            None => declared.ok_or(EstimateError::RegimeUndeclared(d)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiEstimate {
    /// Decay rate per lattice unit.
    pub xi_hat: f64,
    pub stderr: f64,
    pub regime: Option<Regime>,
    pub poly_corrected: bool,
    pub n_min: u32,
    pub n_max: u32,
    /// `c` in `P(n) ≈ e^{c} n^{β} e^{−ξ n}`.
    pub intercept: f64,
    /// `β`, when the polynomial correction is fitted.
    pub log_coefficient: Option<f64>,
    /// Points left out for having too few successes.
    pub dropped: Vec<u32>,
    /// Set when `xi_hat` is not positive.
    pub nonpositive: bool,
}

impl XiEstimate {
    pub fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = Some(regime);
        self
    }
}

struct WlsFit {
    coef: Vec<f64>,
    cov: DMatrix<f64>,
}

fn weighted_least_squares(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<WlsFit, EstimateError> {
    let xtw = design.transpose() * DMatrix::from_diagonal(w);
    let normal = &xtw * design;
    let rhs = &xtw * y;
    let inv = normal.try_inverse().ok_or(EstimateError::Singular)?;
    let coef = &inv * rhs;
    Ok(WlsFit {
        coef: coef.iter().copied().collect(),
        cov: inv,
    })
}

type Points = Vec<(u32, BinomialEstimate)>;

/// Splits points into usable ones (enough successes and `p̂ < 1`) and the dropped `n`s.
fn usable_points(
    points: &[(u32, BinomialEstimate)],
    min_successes: u64,
) -> Result<(Points, Vec<u32>), EstimateError> {
    let mut ns: Vec<u32> = points.iter().map(|(n, _)| *n).collect();
    ns.sort_unstable();
    if let Some(w) = ns.windows(2).find(|w| w[0] == w[1]) {
        return Err(EstimateError::DuplicateN(w[0]));
    }
    let (usable, dropped): (Vec<_>, Vec<_>) = points
        .iter()
        .copied()
        .partition(|(_, b)| b.successes >= min_successes && b.point > 0.0 && b.point < 1.0);
    Ok((usable, dropped.into_iter().map(|(n, _)| n).collect()))
}

/// Weighted least-squares fit of `−ln p̂(n) = ξ n − c [− β ln n]`.
///
/// Points with fewer than 10 successes are dropped and reported. Weights are
/// the inverse delta-method variances of `ln p̂`.
pub fn fit_decay(
    points: &[(u32, BinomialEstimate)],
    poly_corrected: bool,
) -> Result<XiEstimate, EstimateError> {
    let (usable, dropped) = usable_points(points, 10)?;
    if usable.len() < 3 {
        return Err(EstimateError::InsufficientPoints {
            needed: 3,
            have: usable.len(),
            dropped,
        });
    }
    let cols = if poly_corrected { 3 } else { 2 };
    let design = DMatrix::from_fn(usable.len(), cols, |r, c| {
        let n = usable[r].0 as f64;
        match c {
            0 => n,
            1 => -1.0,
            _ => -n.ln(),
        }
    });
    let y = DVector::from_iterator(usable.len(), usable.iter().map(|(_, b)| -b.point.ln()));
    let w = DVector::from_iterator(usable.len(), usable.iter().map(|(_, b)| b.log_weight()));
    let fit = weighted_least_squares(&design, &y, &w)?;
    let xi_hat = fit.coef[0];
    Ok(XiEstimate {
        xi_hat,
        stderr: fit.cov[(0, 0)].max(0.0).sqrt(),
        regime: None,
        poly_corrected,
        n_min: usable.iter().map(|(n, _)| *n).min().unwrap(),
        n_max: usable.iter().map(|(n, _)| *n).max().unwrap(),
        intercept: fit.coef[1],
        log_coefficient: poly_corrected.then(|| fit.coef[2]),
        dropped,
        nonpositive: xi_hat <= 1e-9,
    })
}

/// Default fit window: from the smallest `n ≥ 5` with `p̂ < 0.5` up to the
/// largest `n` with at least 10 successes.
pub fn select_fit_window(points: &[(u32, BinomialEstimate)]) -> Vec<(u32, BinomialEstimate)> {
    let n_min = points
        .iter()
        .filter(|(n, b)| *n >= 5 && b.point < 0.5)
        .map(|(n, _)| *n)
        .min();
    let n_max = points
        .iter()
        .filter(|(_, b)| b.successes >= 10)
        .map(|(n, _)| *n)
        .max();
    match (n_min, n_max) {
        (Some(lo), Some(hi)) => points
            .iter()
            .copied()
            .filter(|(n, _)| (lo..=hi).contains(n))
            .collect(),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub value: f64,
    pub stderr: f64,
}

/// `κ = d / ξ`, stderr by the delta method.
pub fn kappa(xi: &XiEstimate, d: usize) -> Result<Derived, EstimateError> {
    if xi.xi_hat <= 0.0 || xi.nonpositive {
        return Err(EstimateError::NonPositiveXi(xi.xi_hat));
    }
    let value = d as f64 / xi.xi_hat;
    Ok(Derived {
        value,
        stderr: d as f64 / (xi.xi_hat * xi.xi_hat) * xi.stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarsigmaEstimate {
    pub value: f64,
    pub stderr: f64,
    /// `ρ ≤ κ`: outside the regime where the exponent formula applies.
    pub outside_regime: bool,
}

/// `ς(ρ) = ξ ρ − d`.
pub fn varsigma(xi: &XiEstimate, rho: f64, d: usize) -> VarsigmaEstimate {
    let value = xi.xi_hat * rho - d as f64;
    VarsigmaEstimate {
        value,
        stderr: rho * xi.stderr,
        outside_regime: value <= 1e-12 * d as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpFit {
    /// Fitted exponent `ς̂`.
    pub exponent: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub dropped: Vec<u32>,
}

/// Weighted least-squares slope of `−ln p̂(n)` against `ln n`.
pub fn ldp_exponent_fit(points: &[(u32, BinomialEstimate)]) -> Result<LdpFit, EstimateError> {
    let (usable, dropped) = usable_points(points, 5)?;
    if usable.len() < 3 {
        return Err(EstimateError::InsufficientPoints {
            needed: 3,
            have: usable.len(),
            dropped,
        });
    }
    let design = DMatrix::from_fn(usable.len(), 2, |r, c| match c {
        0 => (usable[r].0 as f64).ln(),
        _ => -1.0,
    });
    let y = DVector::from_iterator(usable.len(), usable.iter().map(|(_, b)| -b.point.ln()));
    let w = DVector::from_iterator(usable.len(), usable.iter().map(|(_, b)| b.log_weight()));
    let fit = weighted_least_squares(&design, &y, &w)?;
    Ok(LdpFit {
        exponent: fit.coef[0],
        stderr: fit.cov[(0, 0)].max(0.0).sqrt(),
        intercept: fit.coef[1],
        dropped,
    })
}
