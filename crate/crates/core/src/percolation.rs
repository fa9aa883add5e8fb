//! Edge states for the product measure `P_p`.
//!
//! Each bond of the infinite lattice gets a uniform variate from a counter-style
//! hash of `(seed, base coordinates, axis)`. The bond is open iff its uniform is
//! below `p`. Because the variate never depends on which box is being scanned,
//! configurations are coupled across nested boxes and monotone in `p`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::lattice::{BoxSpec, EdgeId};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a sequence of counters.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix64(seed ^ GOLDEN), |h, &x| {
        mix64(h.wrapping_add(GOLDEN) ^ mix64(x.wrapping_add(GOLDEN)))
    })
}

#[inline]
fn vertex_hash(seed: u64, base: &[i64]) -> u64 {
    base.iter()
        .fold(mix64(seed ^ GOLDEN), |h, &c| vertex_hash_step(h, c))
}

#[inline]
fn vertex_hash_step(h: u64, c: i64) -> u64 {
    mix64(h.wrapping_add(GOLDEN) ^ c as u64)
}

#[inline]
fn axis_hash(prefix: u64, axis: usize) -> u64 {
    mix64(prefix.wrapping_add(GOLDEN) ^ axis as u64)
}

/// Top 53 bits of the hash mapped onto `[0, 1)`.
#[inline]
fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Anything that can answer "is this bond open?".
pub trait EdgeStates {
    fn is_open(&self, base: &[i64], axis: usize) -> bool;

    fn edge_open(&self, e: &EdgeId) -> bool {
        self.is_open(&e.base.coords, e.axis)
    }

    /// Bit `i` set iff the bond `{base, base + e_i}` is open.
    fn open_mask(&self, base: &[i64]) -> u32 {
        (0..base.len()).fold(0, |m, axis| m | (self.is_open(base, axis) as u32) << axis)
    }

    /// Pushes `open_mask(prefix ++ [x])` for `x` in `lo..=hi`.
    fn open_row(&self, prefix: &[i64], lo: i64, hi: i64, out: &mut Vec<u32>) {
        let mut base = prefix.to_vec();
        base.push(lo);
        for x in lo..=hi {
            base[prefix.len()] = x;
            out.push(self.open_mask(&base));
        }
    }
}

impl<T: EdgeStates + ?Sized> EdgeStates for &T {
    fn is_open(&self, base: &[i64], axis: usize) -> bool {
        (**self).is_open(base, axis)
    }

    fn open_mask(&self, base: &[i64]) -> u32 {
        (**self).open_mask(base)
    }

    fn open_row(&self, prefix: &[i64], lo: i64, hi: i64, out: &mut Vec<u32>) {
        (**self).open_row(prefix, lo, hi, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSampler {
    pub seed: u64,
    pub p: f64,
}

impl EdgeSampler {
    pub fn new(seed: u64, p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "p must lie in [0, 1], got {p}");
        Self { seed, p }
    }

    #[inline]
    fn mask_from_hash(&self, h: u64, d: usize) -> u32 {
        (0..d).fold(0, |m, axis| {
            m | ((to_unit(axis_hash(h, axis)) < self.p) as u32) << axis
        })
    }

    #[inline]
    pub fn uniform(&self, base: &[i64], axis: usize) -> f64 {
        to_unit(axis_hash(vertex_hash(self.seed, base), axis))
    }

    pub fn edge_uniform(&self, e: &EdgeId) -> f64 {
        self.uniform(&e.base.coords, e.axis)
    }

    pub fn edge_state(&self, e: &EdgeId) -> bool {
        self.edge_open(e)
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self::new(self.seed, p)
    }
}

impl EdgeStates for EdgeSampler {
    #[inline]
    fn is_open(&self, base: &[i64], axis: usize) -> bool {
        self.uniform(base, axis) < self.p
    }

    #[inline]
    fn open_mask(&self, base: &[i64]) -> u32 {
        self.mask_from_hash(vertex_hash(self.seed, base), base.len())
    }

    fn open_row(&self, prefix: &[i64], lo: i64, hi: i64, out: &mut Vec<u32>) {
        let d = prefix.len() + 1;
        let h = vertex_hash(self.seed, prefix);
        out.extend((lo..=hi).map(|x| self.mask_from_hash(vertex_hash_step(h, x), d)));
    }
}

/// `ω_{B_n}`: the sampled configuration with every bond not inside the box closed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestrictedConfig {
    pub sampler: EdgeSampler,
    pub bx: BoxSpec,
}

impl RestrictedConfig {
    pub fn new(sampler: EdgeSampler, bx: BoxSpec) -> Self {
        Self { sampler, bx }
    }

    pub fn restricted_state(&self, e: &EdgeId) -> bool {
        self.edge_open(e)
    }
}

impl EdgeStates for RestrictedConfig {
    #[inline]
    fn is_open(&self, base: &[i64], axis: usize) -> bool {
        let n = self.bx.n as i64;
        let inside = base.len() == self.bx.d
            && base.iter().enumerate().all(|(i, &c)| {
                let hi = if i == axis { n - 1 } else { n };
                (-n..=hi).contains(&c)
            });
        inside && self.sampler.is_open(base, axis)
    }
}

/// A hand-written configuration: exactly the listed bonds are open.
#[derive(Debug, Clone, Default)]
pub struct ExplicitConfig {
    open: HashSet<EdgeId>,
}

impl ExplicitConfig {
    pub fn new(open: impl IntoIterator<Item = EdgeId>) -> Self {
        Self {
            open: open.into_iter().collect(),
        }
    }

    /// Opens the bonds along a nearest-neighbour path of vertices.
    pub fn path(points: &[&[i64]]) -> Self {
        use crate::lattice::Vertex;
        let open = points
            .windows(2)
            .map(|w| {
                EdgeId::between(&Vertex::new(w[0]), &Vertex::new(w[1]))
                    .expect("path steps must be nearest neighbours")
            })
            .collect();
        Self { open }
    }
}

impl EdgeStates for ExplicitConfig {
    fn is_open(&self, base: &[i64], axis: usize) -> bool {
        // allocation is fine: explicit configurations are test-sized
        self.open.contains(&EdgeId::new(
            crate::lattice::Vertex::new(base.to_vec()),
            axis,
        ))
    }
}

/// Every bond open (`p = 1`) or every bond closed (`p = 0`) without hashing.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub bool);

impl EdgeStates for Constant {
    fn is_open(&self, _: &[i64], _: usize) -> bool {
        self.0
    }
}
