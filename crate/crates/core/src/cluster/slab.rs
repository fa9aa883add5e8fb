//! Streaming cluster summaries, one slab of constant first coordinate at a time.
//!
//! Labels are kept for the previous slab only, and finished clusters are
//! flushed periodically, so the working set grows with `side^(d-1)` instead
//! of the box volume.

use super::{advance, SimFrame};
use crate::lattice::BoxSpec;
use crate::percolation::EdgeStates;

const NONE: u32 = u32::MAX;

/// Aggregates of one completed cluster.
#[derive(Debug, Clone, Copy)]
pub struct ClusterSummary<'a> {
    pub size: u64,
    /// How many of the cluster's vertices lie in the designated inner box.
    pub inner: u64,
    pub lo: &'a [i32],
    pub hi: &'a [i32],
}

impl ClusterSummary<'_> {
    pub fn diameter(&self) -> u32 {
        self.lo
            .iter()
            .zip(self.hi)
            .map(|(a, b)| (b - a) as u32)
            .max()
            .unwrap_or(0)
    }

    pub fn touches(&self, n: u32) -> bool {
        let n = n as i32;
        self.lo.iter().any(|&c| c == -n) || self.hi.contains(&n)
    }
}

#[derive(Debug, Clone, Default)]
struct Table {
    parent: Vec<u32>,
    size: Vec<u64>,
    inner: Vec<u64>,
    /// `2d` entries per label: mins then maxes.
    ext: Vec<i32>,
}

impl Table {
    fn clear(&mut self) {
        self.parent.clear();
        self.size.clear();
        self.inner.clear();
        self.ext.clear();
    }

    fn len(&self) -> usize {
        self.parent.len()
    }

    #[inline]
    fn push(&mut self, size: u64, inner: u64, lo: &[i32], hi: &[i32]) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.size.push(size);
        self.inner.push(inner);
        self.ext.extend(lo.iter().chain(hi).copied());
        id
    }

    #[inline]
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

    /// Merges two distinct roots and returns the surviving one.
    fn union_roots(&mut self, ra: u32, rb: u32, d: usize) -> u32 {
        let (root, child) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra as usize, rb as usize)
        } else {
            (rb as usize, ra as usize)
        };
        self.parent[child] = root as u32;
        self.size[root] += self.size[child];
        self.inner[root] += self.inner[child];
        for i in 0..d {
            let (r, c) = (root * 2 * d, child * 2 * d);
            self.ext[r + i] = self.ext[r + i].min(self.ext[c + i]);
            self.ext[r + d + i] = self.ext[r + d + i].max(self.ext[c + d + i]);
        }
        root as u32
    }

    #[inline]
    fn add_vertex(&mut self, root: u32, inside: bool, coords: &[i32]) {
        let r = root as usize;
        let d = coords.len();
        self.size[r] += 1;
        self.inner[r] += inside as u64;
        let rec = &mut self.ext[r * 2 * d..(r + 1) * 2 * d];
        let (lo, hi) = rec.split_at_mut(d);
        for ((l, h), &c) in lo.iter_mut().zip(hi).zip(coords) {
            *l = (*l).min(c);
            *h = (*h).max(c);
        }
    }

    fn summary(&self, id: u32, d: usize) -> ClusterSummary<'_> {
        let rec = &self.ext[id as usize * 2 * d..(id as usize + 1) * 2 * d];
        ClusterSummary {
            size: self.size[id as usize],
            inner: self.inner[id as usize],
            lo: &rec[..d],
            hi: &rec[d..],
        }
    }
}

/// Labels allowed per slab vertex before finished clusters are flushed.
const COMPACT_AFTER: usize = 8;

/// Reusable buffers for [`stream_clusters`].
#[derive(Debug, Clone, Default)]
pub struct SlabScratch {
    table: Table,
    spare: Table,
    labels: Vec<u32>,
    current: Vec<u32>,
    masks: Vec<u32>,
    prev_masks: Vec<u32>,
    fresh: Vec<u32>,
}

impl SlabScratch {
    /// Emits roots the current slab no longer reaches and renumbers the rest.
    fn compact(&mut self, d: usize, emit: &mut impl FnMut(ClusterSummary<'_>)) {
        self.fresh.clear();
        self.fresh.resize(self.table.len(), NONE);
        self.spare.clear();
        for k in 0..self.current.len() {
            let r = self.table.find(self.current[k]) as usize;
            if self.fresh[r] == NONE {
                let c = self.table.summary(r as u32, d);
                self.fresh[r] = self.spare.push(c.size, c.inner, c.lo, c.hi);
            }
            self.current[k] = self.fresh[r];
        }
        for e in 0..self.table.len() {
            if self.table.parent[e] == e as u32 && self.fresh[e] == NONE {
                emit(self.table.summary(e as u32, d));
            }
        }
        std::mem::swap(&mut self.table, &mut self.spare);
    }
}

/// Calls `emit` once per cluster of `bx`, in a deterministic order.
///
/// `inner` counts vertices with `‖x‖∞ ≤ inner_n`.
pub fn stream_clusters(
    bx: &BoxSpec,
    inner_n: u32,
    states: impl EdgeStates,
    s: &mut SlabScratch,
    mut emit: impl FnMut(ClusterSummary<'_>),
) {
    let d = bx.d;
    let n = bx.n as i64;
    let side = bx.side() as usize;
    let slab = side.pow(d as u32 - 1);
    // in-slab offset of the neighbour one step back along axis `i >= 1`
    let back: Vec<usize> = (0..d).map(|i| side.pow((d - 1 - i) as u32)).collect();
    let inner_n = inner_n as i64;

    s.table.clear();
    s.labels.clear();
    s.labels.resize(slab, NONE);
    s.current.clear();
    s.current.resize(slab, NONE);
    s.prev_masks.clear();
    let mut coords = vec![-n; d];
    let mut prefix = vec![-n; d.saturating_sub(1)];
    let mut ext = vec![0i32; d];

    for x0 in -n..=n {
        s.masks.clear();
        if d == 1 {
            s.masks.push(states.open_mask(&[x0]));
        } else {
            prefix[0] = x0;
            for _ in 0..slab / side {
                states.open_row(&prefix, -n, n, &mut s.masks);
                advance(&mut prefix[1..], n);
            }
        }

        coords[0] = x0;
        coords[1..].fill(-n);
        for k in 0..slab {
            for (e, &c) in ext.iter_mut().zip(&coords) {
                *e = c as i32;
            }
            let inside = coords.iter().all(|c| c.abs() <= inner_n);
            let mut root = NONE;
            let mut join = |s: &mut SlabScratch, label: u32| {
                let r = s.table.find(label);
                root = if root == NONE || root == r {
                    r
                } else {
                    s.table.union_roots(root, r, d)
                };
            };
            if x0 > -n && s.prev_masks[k] & 1 == 1 {
                join(s, s.labels[k]);
            }
            for axis in 1..d {
                if coords[axis] > -n {
                    let j = k - back[axis];
                    if s.masks[j] >> axis & 1 == 1 {
                        join(s, s.current[j]);
                    }
                }
            }
            s.current[k] = if root == NONE {
                s.table.push(1, inside as u64, &ext, &ext)
            } else {
                s.table.add_vertex(root, inside, &ext);
                root
            };
            advance(&mut coords[1..], n);
        }

        if s.table.len() >= COMPACT_AFTER * slab {
            s.compact(d, &mut emit);
        }
        std::mem::swap(&mut s.current, &mut s.labels);
        std::mem::swap(&mut s.masks, &mut s.prev_masks);
    }
    for e in 0..s.table.len() as u32 {
        if s.table.parent[e as usize] == e {
            emit(s.table.summary(e, d));
        }
    }
}

/// Observables of the outer box of a frame, read off in one streaming pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OuterScan {
    /// Same value as [`super::r_fb`].
    pub r_fb: u32,
    /// Same value as [`super::outer_touching_clusters`].
    pub touching: u64,
    /// Same value as [`super::s_n`] when a `rho` was given, else 0.
    pub s_count: u64,
}

pub fn scan_outer(
    frame: &SimFrame,
    states: impl EdgeStates,
    rho: Option<f64>,
    scratch: &mut SlabScratch,
) -> OuterScan {
    let threshold = rho.map(|r| r * (frame.inner.n as f64).ln());
    let mut out = OuterScan::default();
    stream_clusters(&frame.outer, frame.inner.n, states, scratch, |c| {
        if c.inner == 0 {
            return;
        }
        if c.touches(frame.outer.n) {
            out.touching += 1;
            return;
        }
        let diam = c.diameter();
        out.r_fb = out.r_fb.max(diam);
        if threshold.is_some_and(|t| diam as f64 > t) {
            out.s_count += c.inner;
        }
    });
    out
}

/// Largest cluster diameter in `bx`; matches [`super::max_diameter`].
pub fn stream_max_diameter(
    bx: &BoxSpec,
    states: impl EdgeStates,
    scratch: &mut SlabScratch,
) -> u32 {
    let mut best = 0;
    stream_clusters(bx, bx.n, states, scratch, |c| best = best.max(c.diameter()));
    best
}
