//! Exact enumeration over every zero-boundary configuration of a tiny box.
//!
//! All `2^|E|` configurations of the interior edges are visited. Connectivity is
//! computed with bitmask flood fill, independently of [`crate::cluster`], so the
//! two can be checked against each other. Counts are kept per observable value
//! and per number of open edges; probabilities are then assembled exactly as
//! `Σ_k count_k · p^k (1-p)^{|E|-k}` in rational arithmetic.
//!
//! Every cluster of the enumerated world is treated as finite.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;
use thiserror::Error;

use crate::lattice::BoxSpec;

pub const EDGE_BUDGET: u64 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("box has {required} interior edges; exact enumeration is limited to {budget}")]
    EdgeBudget { required: u64, budget: u64 },
    #[error("probability {0:?} is not an exact rational (use a/b or a finite decimal)")]
    NotRational(String),
    #[error("probability {0} lies outside [0, 1]")]
    OutOfRange(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    /// Largest cluster diameter in the zero-boundary world on `B_n`.
    RZbWorld,
    /// Indicator of `0 ↔ ∂B_n`.
    OneArm,
    /// ℓ∞ diameter of the origin's cluster.
    DiamOrigin,
    /// Number of vertices in clusters with diameter `> ρ ln n`.
    SCount { rho: f64 },
}

impl Observable {
    pub fn tag(&self) -> &'static str {
        match self {
            Observable::RZbWorld => "R_ZB_WORLD",
            Observable::OneArm => "ONE_ARM",
            Observable::DiamOrigin => "DIAM_ORIGIN",
            Observable::SCount { .. } => "S_COUNT",
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::SCount { rho } => write!(f, "S_COUNT({rho})"),
            other => f.write_str(other.tag()),
        }
    }
}

/// Parses `a/b`, an integer, or a finite decimal such as `0.25` into an exact
/// rational in `[0, 1]`.
pub fn parse_probability(s: &str) -> Result<BigRational, OracleError> {
    let t = s.trim();
    let bad = || OracleError::NotRational(s.to_string());
    let q = if let Some((a, b)) = t.split_once('/') {
        let a = BigInt::from_str(a.trim()).map_err(|_| bad())?;
        let b = BigInt::from_str(b.trim()).map_err(|_| bad())?;
        if b.is_zero() {
            return Err(bad());
        }
        BigRational::new(a, b)
    } else if let Some((int, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int = if int.is_empty() { "0" } else { int };
        let digits = BigInt::from_str(&format!("{int}{frac}")).map_err(|_| bad())?;
        BigRational::new(digits, BigInt::from(10).pow(frac.len() as u32))
    } else {
        BigRational::from_integer(BigInt::from_str(t).map_err(|_| bad())?)
    };
    if q.is_negative() || q > BigRational::one() {
        return Err(OracleError::OutOfRange(s.to_string()));
    }
    Ok(q)
}

pub fn rational_string(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Exact law of an observable. Support values are distinct and ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub observable: Observable,
    pub d: usize,
    pub n: u32,
    pub p: BigRational,
    pub support: Vec<(u64, BigRational)>,
}

impl ExactDistribution {
    pub fn probability(&self, value: u64) -> BigRational {
        self.support
            .iter()
            .find(|(v, _)| *v == value)
            .map(|(_, q)| q.clone())
            .unwrap_or_else(BigRational::zero)
    }

    /// `P(X ≥ t)`.
    pub fn tail(&self, t: u64) -> BigRational {
        self.support
            .iter()
            .filter(|(v, _)| *v >= t)
            .fold(BigRational::zero(), |acc, (_, q)| acc + q)
    }

    pub fn total(&self) -> BigRational {
        self.tail(0)
    }

    pub fn expectation(&self) -> BigRational {
        self.support
            .iter()
            .fold(BigRational::zero(), |acc, (v, q)| {
                acc + BigRational::from_integer(BigInt::from(*v)) * q
            })
    }
}

impl Serialize for ExactDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Atom {
            value: u64,
            probability: String,
        }
        let support: Vec<Atom> = self
            .support
            .iter()
            .map(|(v, q)| Atom {
                value: *v,
                probability: rational_string(q),
            })
            .collect();
        let mut st = serializer.serialize_struct("ExactDistribution", 7)?;
        st.serialize_field("observable", self.observable.tag())?;
        if let Observable::SCount { rho } = self.observable {
            st.serialize_field("rho", &rho)?;
        }
        st.serialize_field("d", &self.d)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("p", &rational_string(&self.p))?;
        st.serialize_field("support", &support)?;
        st.serialize_field("expectation", &rational_string(&self.expectation()))?;
        st.end()
    }
}

/// Precomputed masks for flood fill on a box with at most 32 vertices.
struct Geometry {
    vertex_count: usize,
    edges: Vec<(u32, u32)>,
    /// `levels[axis][k]`: vertices whose coordinate along `axis` equals `k - n`.
    levels: Vec<Vec<u32>>,
    origin: u32,
    boundary: u32,
}

impl Geometry {
    fn new(bx: &BoxSpec) -> Self {
        let vertex_count = bx.vertex_count() as usize;
        assert!(vertex_count <= 32);
        let edges = bx
            .interior_edges()
            .map(|e| {
                let (a, b) = e.endpoints();
                (
                    bx.vertex_index(&a).unwrap() as u32,
                    bx.vertex_index(&b).unwrap() as u32,
                )
            })
            .collect();
        let side = bx.side() as usize;
        let mut levels = vec![vec![0u32; side]; bx.d];
        let mut boundary = 0u32;
        for (i, v) in bx.vertices().enumerate() {
            for (axis, &c) in v.coords.iter().enumerate() {
                levels[axis][(c + bx.n as i64) as usize] |= 1 << i;
            }
            if bx.on_boundary(&v.coords) {
                boundary |= 1 << i;
            }
        }
        Self {
            vertex_count,
            edges,
            levels,
            origin: (vertex_count / 2) as u32,
            boundary,
        }
    }

    fn diameter(&self, comp: u32) -> u64 {
        self.levels
            .iter()
            .map(|lv| {
                let lo = lv.iter().position(|&m| m & comp != 0).unwrap();
                let hi = lv.iter().rposition(|&m| m & comp != 0).unwrap();
                (hi - lo) as u64
            })
            .max()
            .unwrap_or(0)
    }

    /// Connected components of the configuration `config` (bit `j` = edge `j` open).
    fn components(&self, config: u32, adj: &mut [u32], out: &mut Vec<u32>) {
        adj.iter_mut().for_each(|a| *a = 0);
        for (j, &(a, b)) in self.edges.iter().enumerate() {
            if config >> j & 1 == 1 {
                adj[a as usize] |= 1 << b;
                adj[b as usize] |= 1 << a;
            }
        }
        out.clear();
        let all = if self.vertex_count == 32 {
            u32::MAX
        } else {
            (1u32 << self.vertex_count) - 1
        };
        let mut remaining = all;
        while remaining != 0 {
            let seed = remaining & remaining.wrapping_neg();
            let mut comp = seed;
            let mut frontier = seed;
            while frontier != 0 {
                let mut next = 0;
                let mut f = frontier;
                while f != 0 {
                    let v = f.trailing_zeros();
                    f &= f - 1;
                    next |= adj[v as usize];
                }
                frontier = next & !comp;
                comp |= next;
            }
            out.push(comp);
            remaining &= !comp;
        }
    }
}

fn observe(geo: &Geometry, obs: Observable, threshold: f64, comps: &[u32]) -> u64 {
    match obs {
        Observable::RZbWorld => comps.iter().map(|&c| geo.diameter(c)).max().unwrap_or(0),
        Observable::OneArm => {
            let c = comps.iter().find(|&&c| c >> geo.origin & 1 == 1).unwrap();
            (c & geo.boundary != 0) as u64
        }
        Observable::DiamOrigin => {
            let c = comps.iter().find(|&&c| c >> geo.origin & 1 == 1).unwrap();
            geo.diameter(*c)
        }
        Observable::SCount { .. } => comps
            .iter()
            .filter(|&&c| geo.diameter(c) as f64 > threshold)
            .map(|c| c.count_ones() as u64)
            .sum(),
    }
}

type Counts = BTreeMap<u64, Vec<u64>>;

fn merge_counts(mut a: Counts, b: Counts) -> Counts {
    for (v, ks) in b {
        let slot = a.entry(v).or_insert_with(|| vec![0; ks.len()]);
        for (x, y) in slot.iter_mut().zip(ks) {
            *x += y;
        }
    }
    a
}

fn check_budget(bx: &BoxSpec) -> Result<(), OracleError> {
    let required = bx.interior_edge_count();
    if required > EDGE_BUDGET {
        return Err(OracleError::EdgeBudget {
            required,
            budget: EDGE_BUDGET,
        });
    }
    Ok(())
}

/// Raw `(value, #open) → configuration count` table, computed over `parts`
/// contiguous slices of the configuration range.
fn count_table(bx: &BoxSpec, obs: Observable, parts: usize) -> Counts {
    let geo = Geometry::new(bx);
    let e = geo.edges.len();
    let total: u64 = 1 << e;
    let threshold = match obs {
        Observable::SCount { rho } => rho * (bx.n as f64).ln(),
        _ => 0.0,
    };
    let parts = parts.clamp(1, total as usize) as u64;
    let chunk = total.div_ceil(parts);
    (0..parts)
        .into_par_iter()
        .map(|part| {
            let mut counts = Counts::new();
            let mut adj = vec![0u32; geo.vertex_count];
            let mut comps = Vec::with_capacity(geo.vertex_count);
            let end = ((part + 1) * chunk).min(total);
            for config in part * chunk..end {
                let config = config as u32;
                geo.components(config, &mut adj, &mut comps);
                let value = observe(&geo, obs, threshold, &comps);
                counts.entry(value).or_insert_with(|| vec![0; e + 1])
                    [config.count_ones() as usize] += 1;
            }
            counts
        })
        .reduce(Counts::new, merge_counts)
}

pub fn enumerate(
    bx: &BoxSpec,
    p: &BigRational,
    obs: Observable,
) -> Result<ExactDistribution, OracleError> {
    enumerate_partitioned(bx, p, obs, rayon::current_num_threads() * 8)
}

/// As [`enumerate`], splitting the configuration range into `parts` slices.
/// The result does not depend on `parts`.
pub fn enumerate_partitioned(
    bx: &BoxSpec,
    p: &BigRational,
    obs: Observable,
    parts: usize,
) -> Result<ExactDistribution, OracleError> {
    check_budget(bx)?;
    if p.is_negative() || *p > BigRational::one() {
        return Err(OracleError::OutOfRange(rational_string(p)));
    }
    let e = bx.interior_edge_count() as usize;
    let q = BigRational::one() - p;
    let p_pow: Vec<BigRational> = powers(p, e);
    let q_pow: Vec<BigRational> = powers(&q, e);
    let support = count_table(bx, obs, parts)
        .into_iter()
        .map(|(value, ks)| {
            let prob = ks
                .iter()
                .enumerate()
                .fold(BigRational::zero(), |acc, (k, &c)| {
                    if c == 0 {
                        acc
                    } else {
                        acc + BigRational::from_integer(BigInt::from(c)) * &p_pow[k] * &q_pow[e - k]
                    }
                });
            (value, prob)
        })
        .filter(|(_, prob)| !prob.is_zero())
        .collect();
    Ok(ExactDistribution {
        observable: obs,
        d: bx.d,
        n: bx.n,
        p: p.clone(),
        support,
    })
}

fn powers(x: &BigRational, up_to: usize) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(up_to + 1);
    let mut acc = BigRational::one();
    for _ in 0..=up_to {
        out.push(acc.clone());
        acc *= x;
    }
    out
}

/// Exact `P_p(0 ↔ ∂B_n)`. The event only involves edges inside `B_n`, so the
/// zero-boundary value is the full-lattice value.
pub fn exact_one_arm(bx: &BoxSpec, p: &BigRational) -> Result<BigRational, OracleError> {
    Ok(enumerate(bx, p, Observable::OneArm)?.probability(1))
}
