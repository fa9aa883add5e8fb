//! Cluster labelling over a simulation box and the maximum-diameter observables.
//!
//! [`ClusterForest`] is a union-find over the vertices of a box, union by size
//! with path compression, that also keeps per-root coordinate extents. After a
//! build every vertex points straight at its root, so lookups need only `&self`.
//!
//! Finiteness of a cluster on the infinite lattice is approximated inside a
//! [`SimFrame`]: the observables live on the inner box `B_n`, the configuration
//! is sampled on a larger outer box `B_N`, and a cluster counts as finite iff it
//! never reaches `∂B_N`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::BoxSpec;
use crate::percolation::EdgeStates;

mod slab;
pub use slab::{
    scan_outer, stream_clusters, stream_max_diameter, ClusterSummary, OuterScan, SlabScratch,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("vertex {0} is not a root of the forest")]
    NotRoot(u32),
    #[error("box with {0} vertices exceeds the u32 index space")]
    TooLarge(u64),
}

/// Snapshot of one cluster's root record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterRecord {
    pub size: u64,
    pub ext_min: Vec<i64>,
    pub ext_max: Vec<i64>,
    pub touches_outer: bool,
}

impl ClusterRecord {
    /// `D_i`, the width in coordinate direction `i`.
    pub fn width(&self, i: usize) -> i64 {
        self.ext_max[i] - self.ext_min[i]
    }

    /// ℓ∞ diameter, `max_i D_i`.
    pub fn diameter(&self) -> i64 {
        (0..self.ext_min.len())
            .map(|i| self.width(i))
            .max()
            .unwrap_or(0)
    }

    /// Largest `|y_i|` over the cluster, i.e. how far from the origin it reaches in ℓ∞.
    pub fn reach(&self) -> i64 {
        self.ext_min
            .iter()
            .chain(&self.ext_max)
            .map(|c| c.abs())
            .max()
            .unwrap_or(0)
    }
}

/// Outcome of the diameter-tail test on the origin's cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailOutcome {
    Hit,
    Miss,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginSource {
    /// Margin given explicitly.
    Override,
    /// Computed from a user-supplied decay-rate guess.
    Declared,
    /// Computed from a pilot run's decay-rate guess.
    Pilot,
    /// Only the floor applies.
    Floor,
    /// The observable reads edges of `B_n` only, so no margin is simulated.
    Unused,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginPolicy {
    pub margin: u32,
    pub xi_guess: Option<f64>,
    pub source: MarginSource,
}

impl MarginPolicy {
    pub fn fixed(margin: u32) -> Self {
        Self {
            margin,
            xi_guess: None,
            source: MarginSource::Override,
        }
    }
}

/// Inner box `B_n` (where observables are read) inside the simulated box `B_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimFrame {
    pub inner: BoxSpec,
    pub outer: BoxSpec,
    pub margin: MarginPolicy,
}

impl SimFrame {
    pub fn new(inner: BoxSpec, margin: MarginPolicy) -> Self {
        let outer = BoxSpec::new(inner.d, inner.n + margin.margin);
        Self {
            inner,
            outer,
            margin,
        }
    }

    pub fn with_margin(d: usize, n: u32, margin: u32) -> Self {
        Self::new(BoxSpec::new(d, n), MarginPolicy::fixed(margin))
    }

    pub fn origin_outer_index(&self) -> u32 {
        (self.outer.vertex_count() / 2) as u32
    }

    /// Calls `f(inner_index, outer_index)` for every vertex of the inner box, in
    /// inner-index order.
    pub fn for_each_inner(&self, mut f: impl FnMut(u64, u32)) {
        let d = self.inner.d;
        let n = self.inner.n as i64;
        let shift = (self.outer.n - self.inner.n) as u64;
        let outer_strides = self.outer.strides();
        let row = self.inner.side();
        let mut prefix = vec![-n; d - 1];
        let mut inner_idx = 0u64;
        loop {
            let mut start = shift;
            for (i, &c) in prefix.iter().enumerate() {
                start += (c + self.outer.n as i64) as u64 * outer_strides[i];
            }
            for k in 0..row {
                f(inner_idx, (start + k) as u32);
                inner_idx += 1;
            }
            // advance the odometer over the first d-1 coordinates
            let mut axis = d - 1;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                if prefix[axis] < n {
                    prefix[axis] += 1;
                    break;
                }
                prefix[axis] = -n;
            }
        }
    }
}

/// Odometer step over `[-n, n]^d`, last coordinate fastest; wraps to the first vertex.
#[inline]
fn advance(coords: &mut [i64], n: i64) {
    for c in coords.iter_mut().rev() {
        if *c < n {
            *c += 1;
            return;
        }
        *c = -n;
    }
}

/// High bit of a root's size marks its extent record as seeded during the flatten pass.
const SEEDED: u32 = 1 << 31;
const SIZE_MASK: u32 = SEEDED - 1;

#[derive(Debug, Clone, Default)]
pub struct ClusterForest {
    bx: Option<BoxSpec>,
    parent: Vec<u32>,
    size: Vec<u32>,
    /// `2d` entries per vertex: mins then maxes. Only meaningful at roots, and
    /// only filled in once the build has finished.
    ext: Vec<i32>,
}

/// Bytes of working memory per vertex for a forest in dimension `d`.
pub fn forest_bytes_per_vertex(d: usize) -> u64 {
    4 + 4 + 8 * d as u64
}

impl ClusterForest {
    pub fn build(bx: &BoxSpec, states: impl EdgeStates) -> Result<Self, ClusterError> {
        let mut f = Self::default();
        f.rebuild(bx, states)?;
        Ok(f)
    }

    /// Builds over `bx` reusing this forest's allocations.
    ///
    /// Edges are visited once in canonical order (base index, then axis).
    pub fn rebuild(&mut self, bx: &BoxSpec, states: impl EdgeStates) -> Result<(), ClusterError> {
        let count = bx.vertex_count();
        if count > SIZE_MASK as u64 {
            return Err(ClusterError::TooLarge(count));
        }
        let d = bx.d;
        let count = count as usize;
        self.bx = Some(*bx);
        self.parent.clear();
        self.parent.extend(0..count as u32);
        self.size.clear();
        self.size.resize(count, 1);
        // stale contents are fine: each root's record is seeded on first visit below
        self.ext.resize(count * 2 * d, 0);

        let n = bx.n as i64;
        let side = bx.side() as usize;
        let strides: Vec<u32> = bx.strides().into_iter().map(|s| s as u32).collect();
        let last = d - 1;
        let mut prefix = vec![-n; last];
        let mut masks = Vec::with_capacity(side);
        let mut coords = vec![0i64; d];

        let mut row_start = 0usize;
        while row_start < count {
            // axes whose forward edge leaves the box along this whole row
            let mut row_axes = (1u32 << d) - 1;
            for (axis, &c) in prefix.iter().enumerate() {
                if c == n {
                    row_axes &= !(1 << axis);
                }
            }
            masks.clear();
            states.open_row(&prefix, -n, n, &mut masks);
            for (j, &m) in masks.iter().enumerate() {
                let mut open = m & row_axes;
                if j + 1 == side {
                    open &= !(1 << last);
                }
                let v = (row_start + j) as u32;
                while open != 0 {
                    let axis = open.trailing_zeros() as usize;
                    open &= open - 1;
                    self.union(v, v + strides[axis]);
                }
            }
            advance(&mut prefix, n);
            row_start += side;
        }

        // flatten, then fold every vertex's coordinates into its root's extents
        let mut row_start = 0usize;
        while row_start < count {
            coords[..last].copy_from_slice(&prefix);
            for j in 0..side {
                coords[last] = j as i64 - n;
                let v = row_start + j;
                let r = self.find(v as u32) as usize;
                self.parent[v] = r as u32;
                let rec = &mut self.ext[r * 2 * d..(r + 1) * 2 * d];
                if self.size[r] & SEEDED == 0 {
                    self.size[r] |= SEEDED;
                    for i in 0..d {
                        rec[i] = coords[i] as i32;
                        rec[d + i] = coords[i] as i32;
                    }
                } else {
                    for i in 0..d {
                        let c = coords[i] as i32;
                        rec[i] = rec[i].min(c);
                        rec[d + i] = rec[d + i].max(c);
                    }
                }
            }
            advance(&mut prefix, n);
            row_start += side;
        }
        Ok(())
    }

    fn find(&mut self, mut v: u32) -> u32 {
        let mut root = v;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[v as usize] != root {
            let next = self.parent[v as usize];
            self.parent[v as usize] = root;
            v = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        let (sa, sb) = (self.size[ra as usize], self.size[rb as usize]);
        let (root, child) = if sa > sb || (sa == sb && ra < rb) {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[child as usize] = root;
        self.size[root as usize] = sa + sb;
    }

    pub fn box_spec(&self) -> BoxSpec {
        self.bx.expect("forest has not been built")
    }

    pub fn dim(&self) -> usize {
        self.bx.map(|b| b.d).unwrap_or(0)
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    #[inline]
    pub fn root(&self, v: u32) -> u32 {
        self.parent[v as usize]
    }

    pub fn is_root(&self, v: u32) -> bool {
        (v as usize) < self.parent.len() && self.parent[v as usize] == v
    }

    pub fn roots(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.parent.len() as u32).filter(move |&v| self.parent[v as usize] == v)
    }

    #[inline]
    fn diameter_unchecked(&self, root: u32) -> u32 {
        let d = self.dim();
        let rec = &self.ext[root as usize * 2 * d..(root as usize + 1) * 2 * d];
        (0..d)
            .map(|i| (rec[d + i] - rec[i]) as u32)
            .max()
            .unwrap_or(0)
    }

    #[inline]
    fn touches_unchecked(&self, root: u32) -> bool {
        let d = self.dim();
        let n = self.box_spec().n as i32;
        let rec = &self.ext[root as usize * 2 * d..(root as usize + 1) * 2 * d];
        rec[..d].iter().any(|&c| c == -n) || rec[d..].contains(&n)
    }

    pub fn record(&self, root: u32) -> Result<ClusterRecord, ClusterError> {
        if !self.is_root(root) {
            return Err(ClusterError::NotRoot(root));
        }
        let d = self.dim();
        let rec = &self.ext[root as usize * 2 * d..(root as usize + 1) * 2 * d];
        Ok(ClusterRecord {
            size: (self.size[root as usize] & SIZE_MASK) as u64,
            ext_min: rec[..d].iter().map(|&c| c as i64).collect(),
            ext_max: rec[d..].iter().map(|&c| c as i64).collect(),
            touches_outer: self.touches_unchecked(root),
        })
    }

    /// Record of the cluster containing vertex `v`.
    pub fn cluster_of(&self, v: u32) -> ClusterRecord {
        self.record(self.root(v))
            .expect("parent array is flattened")
    }

    pub fn diameter(&self, root: u32) -> Result<u32, ClusterError> {
        if !self.is_root(root) {
            return Err(ClusterError::NotRoot(root));
        }
        Ok(self.diameter_unchecked(root))
    }

    pub fn touches_outer(&self, root: u32) -> Result<bool, ClusterError> {
        if !self.is_root(root) {
            return Err(ClusterError::NotRoot(root));
        }
        Ok(self.touches_unchecked(root))
    }
}

/// `R_n^{(fb)}` with the finiteness proxy: the largest diameter among clusters
/// meeting `B_n` that stay clear of `∂B_N`, or 0.
pub fn r_fb(frame: &SimFrame, f: &ClusterForest) -> u32 {
    let mut best = 0;
    frame.for_each_inner(|_, v| {
        let r = f.root(v);
        if !f.touches_unchecked(r) {
            best = best.max(f.diameter_unchecked(r));
        }
    });
    best
}

/// `R_n^{(zb)}`: diameters taken in the zero-boundary forest `f_inner`, over
/// vertices whose unrestricted cluster (in `f_outer`) passes the finiteness proxy.
pub fn r_zb(frame: &SimFrame, f_outer: &ClusterForest, f_inner: &ClusterForest) -> u32 {
    let mut best = 0;
    frame.for_each_inner(|inner, outer| {
        if !f_outer.touches_unchecked(f_outer.root(outer)) {
            best = best.max(f_inner.diameter_unchecked(f_inner.root(inner as u32)));
        }
    });
    best
}

/// Computes `R_n^{(fb)}` and `R_n^{(zb)}` in one sweep over `B_n`.
pub fn r_pair(frame: &SimFrame, f_outer: &ClusterForest, f_inner: &ClusterForest) -> (u32, u32) {
    let (mut fb, mut zb) = (0, 0);
    frame.for_each_inner(|inner, outer| {
        let r = f_outer.root(outer);
        if !f_outer.touches_unchecked(r) {
            fb = fb.max(f_outer.diameter_unchecked(r));
            zb = zb.max(f_inner.diameter_unchecked(f_inner.root(inner as u32)));
        }
    });
    (fb, zb)
}

/// Largest diameter over every cluster of the forest, with no finiteness filter.
/// This is the zero-boundary world observable when `f` is built on `B_n` itself.
pub fn max_diameter(f: &ClusterForest) -> u32 {
    f.roots()
        .map(|r| f.diameter_unchecked(r))
        .max()
        .unwrap_or(0)
}

/// Number of distinct clusters meeting `B_n` that reach `∂B_N`.
pub fn outer_touching_clusters(frame: &SimFrame, f: &ClusterForest) -> u64 {
    let mut seen: Vec<u32> = Vec::new();
    frame.for_each_inner(|_, v| {
        let r = f.root(v);
        if f.touches_unchecked(r) && !seen.contains(&r) {
            seen.push(r);
        }
    });
    seen.len() as u64
}

pub fn one_arm_from_record(frame: &SimFrame, origin: &ClusterRecord, finite_only: bool) -> bool {
    origin.reach() >= frame.inner.n as i64 && !(finite_only && origin.touches_outer)
}

/// `0 ↔ ∂B_n`, optionally intersected with the finiteness proxy.
pub fn one_arm_indicator(frame: &SimFrame, f: &ClusterForest, finite_only: bool) -> bool {
    let origin = f.cluster_of(frame.origin_outer_index());
    one_arm_from_record(frame, &origin, finite_only)
}

pub fn diam_tail_from_record(origin: &ClusterRecord, t: u32) -> TailOutcome {
    if origin.touches_outer {
        TailOutcome::Censored
    } else if origin.diameter() >= t as i64 {
        TailOutcome::Hit
    } else {
        TailOutcome::Miss
    }
}

/// `{diam(C_0) ≥ t, |C_0| < ∞}`, censored when the origin's cluster reaches `∂B_N`.
pub fn diam_tail_indicator(frame: &SimFrame, f: &ClusterForest, t: u32) -> TailOutcome {
    diam_tail_from_record(&f.cluster_of(frame.origin_outer_index()), t)
}

/// `S_n(ρ)`: vertices of `B_n` in finite clusters with diameter strictly above `ρ ln n`.
pub fn s_n(frame: &SimFrame, f: &ClusterForest, rho: f64) -> u64 {
    let threshold = rho * (frame.inner.n as f64).ln();
    let mut count = 0;
    frame.for_each_inner(|_, v| {
        let r = f.root(v);
        if !f.touches_unchecked(r) && f.diameter_unchecked(r) as f64 > threshold {
            count += 1;
        }
    });
    count
}

/// Reusable scratch for [`explore_cluster`].
#[derive(Debug, Default)]
pub struct ExploreScratch {
    stamp: Vec<u32>,
    epoch: u32,
    stack: Vec<u32>,
}

/// Depth-first exploration of the single cluster containing `start` inside `bx`.
///
/// Produces the same record a full [`ClusterForest`] build would for that
/// cluster, at a cost proportional to the cluster's size.
pub fn explore_cluster(
    bx: &BoxSpec,
    start: &[i64],
    states: impl EdgeStates,
    scratch: &mut ExploreScratch,
) -> ClusterRecord {
    let d = bx.d;
    let n = bx.n as i64;
    let count = bx.vertex_count() as usize;
    if scratch.stamp.len() != count {
        scratch.stamp.clear();
        scratch.stamp.resize(count, 0);
        scratch.epoch = 0;
    }
    scratch.epoch = scratch.epoch.wrapping_add(1);
    if scratch.epoch == 0 {
        scratch.stamp.iter_mut().for_each(|s| *s = 0);
        scratch.epoch = 1;
    }
    let epoch = scratch.epoch;
    let strides: Vec<u32> = bx.strides().into_iter().map(|s| s as u32).collect();

    let start_idx = bx
        .index_of(start)
        .expect("start vertex must lie in the box") as u32;
    let mut ext_min = start.to_vec();
    let mut ext_max = start.to_vec();
    let mut size = 0u64;
    let mut coords = vec![0i64; d];
    let mut nb = vec![0i64; d];
    scratch.stack.clear();
    scratch.stack.push(start_idx);
    scratch.stamp[start_idx as usize] = epoch;
    while let Some(v) = scratch.stack.pop() {
        size += 1;
        bx.write_coords(v as u64, &mut coords);
        for i in 0..d {
            ext_min[i] = ext_min[i].min(coords[i]);
            ext_max[i] = ext_max[i].max(coords[i]);
        }
        for axis in 0..d {
            if coords[axis] < n && states.is_open(&coords, axis) {
                let w = v + strides[axis];
                if scratch.stamp[w as usize] != epoch {
                    scratch.stamp[w as usize] = epoch;
                    scratch.stack.push(w);
                }
            }
            if coords[axis] > -n {
                nb.copy_from_slice(&coords);
                nb[axis] -= 1;
                if states.is_open(&nb, axis) {
                    let w = v - strides[axis];
                    if scratch.stamp[w as usize] != epoch {
                        scratch.stamp[w as usize] = epoch;
                        scratch.stack.push(w);
                    }
                }
            }
        }
    }
    let touches_outer = ext_min.iter().any(|&c| c == -n) || ext_max.contains(&n);
    ClusterRecord {
        size,
        ext_min,
        ext_max,
        touches_outer,
    }
}

/// Record of the origin's cluster in the frame's outer box.
pub fn explore_origin(
    frame: &SimFrame,
    states: impl EdgeStates,
    scratch: &mut ExploreScratch,
) -> ClusterRecord {
    let origin = vec![0i64; frame.outer.d];
    explore_cluster(&frame.outer, &origin, states, scratch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{EdgeId, Vertex};
    use crate::percolation::{Constant, EdgeSampler, ExplicitConfig, RestrictedConfig};

    fn path4() -> ExplicitConfig {
        ExplicitConfig::path(&[&[0, 0], &[1, 0], &[2, 0], &[3, 0]])
    }

    #[test]
    fn all_closed() {
        let b = BoxSpec::new(2, 3);
        let f = ClusterForest::build(&b, Constant(false)).unwrap();
        assert_eq!(f.roots().count() as u64, b.vertex_count());
        for r in f.roots() {
            let rec = f.record(r).unwrap();
            assert_eq!(rec.size, 1);
            assert_eq!(rec.diameter(), 0);
        }
    }

    #[test]
    fn all_open() {
        let b = BoxSpec::new(2, 3);
        let f = ClusterForest::build(&b, Constant(true)).unwrap();
        let roots: Vec<u32> = f.roots().collect();
        assert_eq!(roots.len(), 1);
        let rec = f.record(roots[0]).unwrap();
        assert_eq!(rec.size, 49);
        assert_eq!(rec.ext_min, vec![-3, -3]);
        assert_eq!(rec.ext_max, vec![3, 3]);
        assert!(rec.touches_outer);
    }

    #[test]
    fn l_shape() {
        let b = BoxSpec::new(2, 2);
        let cfg = ExplicitConfig::path(&[&[0, 0], &[1, 0], &[1, 1]]);
        let f = ClusterForest::build(&b, &cfg).unwrap();
        assert_eq!(f.roots().count() as u64, b.vertex_count() - 2);
        let origin = b.vertex_index(&Vertex::new([0, 0])).unwrap() as u32;
        let rec = f.cluster_of(origin);
        assert_eq!(rec.size, 3);
        assert_eq!(
            (rec.ext_min.clone(), rec.ext_max.clone()),
            (vec![0, 0], vec![1, 1])
        );
        assert_eq!(f.diameter(f.root(origin)).unwrap(), 1);
        assert_eq!(rec.width(0), 1);
        assert_eq!(rec.width(1), 1);
    }

    #[test]
    fn straight_path_diameter() {
        let b = BoxSpec::new(2, 4);
        let f = ClusterForest::build(&b, path4()).unwrap();
        let origin = b.vertex_index(&Vertex::new([0, 0])).unwrap() as u32;
        assert_eq!(f.diameter(f.root(origin)).unwrap(), 3);
        let rec = f.cluster_of(origin);
        assert_eq!((rec.width(0), rec.width(1)), (3, 0));
    }

    #[test]
    fn diameter_rejects_non_root() {
        let b = BoxSpec::new(2, 2);
        let f =
            ClusterForest::build(&b, ExplicitConfig::path(&[&[0, 0], &[1, 0], &[2, 0]])).unwrap();
        let non_root = (0..b.vertex_count() as u32)
            .find(|&v| !f.is_root(v))
            .unwrap();
        assert_eq!(f.diameter(non_root), Err(ClusterError::NotRoot(non_root)));
    }

    #[test]
    fn tie_breaks_toward_smaller_index() {
        let b = BoxSpec::new(1, 2);
        let cfg = ExplicitConfig::path(&[&[0], &[1]]);
        let f = ClusterForest::build(&b, &cfg).unwrap();
        // vertices 0 and 1 have indices 2 and 3
        assert!(f.is_root(2));
        assert_eq!(f.root(3), 2);
    }

    #[test]
    fn r_fb_examples() {
        let frame = SimFrame::with_margin(2, 2, 3);
        let closed = ClusterForest::build(&frame.outer, Constant(false)).unwrap();
        assert_eq!(r_fb(&frame, &closed), 0);
        let open = ClusterForest::build(&frame.outer, Constant(true)).unwrap();
        assert_eq!(r_fb(&frame, &open), 0);
        let f = ClusterForest::build(&frame.outer, path4()).unwrap();
        assert_eq!(r_fb(&frame, &f), 3);
    }

    #[test]
    fn r_zb_examples() {
        let frame = SimFrame::with_margin(2, 2, 3);
        let cfg = path4();
        let outer = ClusterForest::build(&frame.outer, &cfg).unwrap();
        let inner = ClusterForest::build(&frame.inner, &cfg).unwrap();
        assert_eq!(r_zb(&frame, &outer, &inner), 2);
        assert_eq!(r_pair(&frame, &outer, &inner), (3, 2));

        for state in [false, true] {
            let o = ClusterForest::build(&frame.outer, Constant(state)).unwrap();
            let i = ClusterForest::build(&frame.inner, Constant(state)).unwrap();
            assert_eq!(r_zb(&frame, &o, &i), 0);
        }
    }

    #[test]
    fn one_arm_examples() {
        let frame = SimFrame::with_margin(2, 3, 4);
        let open = ClusterForest::build(&frame.outer, Constant(true)).unwrap();
        assert!(one_arm_indicator(&frame, &open, false));
        assert!(!one_arm_indicator(&frame, &open, true));
        let closed = ClusterForest::build(&frame.outer, Constant(false)).unwrap();
        assert!(!one_arm_indicator(&frame, &closed, false));
        let f = ClusterForest::build(&frame.outer, path4()).unwrap();
        assert!(one_arm_indicator(&frame, &f, true));
        let frame4 = SimFrame::with_margin(2, 4, 4);
        let f = ClusterForest::build(&frame4.outer, path4()).unwrap();
        assert!(!one_arm_indicator(&frame4, &f, false));
    }

    #[test]
    fn diam_tail_examples() {
        let frame = SimFrame::with_margin(2, 3, 4);
        let closed = ClusterForest::build(&frame.outer, Constant(false)).unwrap();
        assert_eq!(diam_tail_indicator(&frame, &closed, 1), TailOutcome::Miss);
        let open = ClusterForest::build(&frame.outer, Constant(true)).unwrap();
        for t in [0, 1, 5, 100] {
            assert_eq!(diam_tail_indicator(&frame, &open, t), TailOutcome::Censored);
        }
        let f = ClusterForest::build(&frame.outer, path4()).unwrap();
        assert_eq!(diam_tail_indicator(&frame, &f, 3), TailOutcome::Hit);
        assert_eq!(diam_tail_indicator(&frame, &f, 4), TailOutcome::Miss);
    }

    #[test]
    fn s_n_examples() {
        let frame = SimFrame::with_margin(2, 2, 3);
        let f = ClusterForest::build(&frame.outer, path4()).unwrap();
        let rho = 1.5 / 2f64.ln();
        assert_eq!(s_n(&frame, &f, rho), 3);
        let closed = ClusterForest::build(&frame.outer, Constant(false)).unwrap();
        assert_eq!(s_n(&frame, &closed, 0.5), 0);
        let open = ClusterForest::build(&frame.outer, Constant(true)).unwrap();
        assert_eq!(s_n(&frame, &open, 0.5), 0);
    }

    #[test]
    fn s_n_threshold_is_strict() {
        // ρ ln 2 = 3 exactly would need diam > 3; the path has diam 3
        let frame = SimFrame::with_margin(2, 2, 3);
        let f = ClusterForest::build(&frame.outer, path4()).unwrap();
        let rho = 2.999_999 / 2f64.ln();
        assert_eq!(s_n(&frame, &f, rho), 3);
        let rho = 3.000_001 / 2f64.ln();
        assert_eq!(s_n(&frame, &f, rho), 0);
    }

    #[test]
    fn for_each_inner_maps_coordinates() {
        for (d, n, m) in [(1, 2, 3), (2, 2, 1), (3, 1, 2)] {
            let frame = SimFrame::with_margin(d, n, m);
            let mut seen = 0u64;
            frame.for_each_inner(|inner, outer| {
                assert_eq!(inner, seen);
                seen += 1;
                let a = frame.inner.index_vertex(inner).unwrap();
                let b = frame.outer.index_vertex(outer as u64).unwrap();
                assert_eq!(a, b);
            });
            assert_eq!(seen, frame.inner.vertex_count());
        }
    }

    #[test]
    fn exploration_matches_forest() {
        let mut scratch = ExploreScratch::default();
        for seed in 0..200u64 {
            for p in [0.3, 0.5, 0.7] {
                let frame = SimFrame::with_margin(2, 3, 3);
                let s = EdgeSampler::new(seed, p);
                let f = ClusterForest::build(&frame.outer, s).unwrap();
                let want = f.cluster_of(frame.origin_outer_index());
                let got = explore_origin(&frame, s, &mut scratch);
                assert_eq!(got, want, "seed {seed} p {p}");
            }
        }
    }

    #[test]
    fn exploration_in_three_dimensions() {
        let mut scratch = ExploreScratch::default();
        let bx = BoxSpec::new(3, 3);
        for seed in 0..50u64 {
            let s = EdgeSampler::new(seed, 0.3);
            let f = ClusterForest::build(&bx, s).unwrap();
            let start = [1i64, -2, 0];
            let idx = bx.index_of(&start).unwrap() as u32;
            assert_eq!(
                explore_cluster(&bx, &start, s, &mut scratch),
                f.cluster_of(idx)
            );
        }
    }

    #[test]
    fn zero_boundary_world_max() {
        let b = BoxSpec::new(2, 1);
        let f = ClusterForest::build(&b, Constant(true)).unwrap();
        assert_eq!(max_diameter(&f), 2);
        let cfg = RestrictedConfig::new(EdgeSampler::new(0, 1.0), b);
        let f = ClusterForest::build(&b, cfg).unwrap();
        assert_eq!(max_diameter(&f), 2);
        let e = EdgeId::new(Vertex::new([-1, -1]), 0);
        let f = ClusterForest::build(&b, ExplicitConfig::new([e])).unwrap();
        assert_eq!(max_diameter(&f), 1);
    }

    #[test]
    fn rebuild_reuses_buffers() {
        let mut f = ClusterForest::default();
        f.rebuild(&BoxSpec::new(2, 4), Constant(true)).unwrap();
        f.rebuild(&BoxSpec::new(2, 2), Constant(false)).unwrap();
        assert_eq!(f.roots().count(), 25);
    }
}
