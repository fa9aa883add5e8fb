//! Integer-lattice geometry: boxes `B_n = {x : ‖x‖∞ ≤ n}`, their boundaries,
//! and canonical vertex and edge identities.
//!
//! Vertices of a box are indexed lexicographically in the shifted coordinates
//! `x + n`, first coordinate most significant. An edge is stored as its lower
//! endpoint plus the axis it points along, so every unordered bond
//! `{x, x + e_i}` has exactly one representation.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("vertex {coords:?} lies outside the box of radius {n}")]
    OutOfBox { coords: Vec<i64>, n: u32 },
    #[error("vertex has {got} coordinates, box has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index {index} is out of range for a box with {count} vertices")]
    IndexOutOfRange { index: u64, count: u64 },
}

/// The box `B_n` in `Z^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxSpec {
    pub d: usize,
    pub n: u32,
}

/// A lattice point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub coords: Vec<i64>,
}

/// The bond `{base, base + e_axis}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId {
    pub base: Vertex,
    pub axis: usize,
}

pub fn linf_norm(coords: &[i64]) -> i64 {
    coords.iter().map(|c| c.abs()).max().unwrap_or(0)
}

impl Vertex {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Self {
            coords: coords.into(),
        }
    }

    pub fn origin(d: usize) -> Self {
        Self { coords: vec![0; d] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn linf_norm(&self) -> i64 {
        linf_norm(&self.coords)
    }

    /// The neighbour `self + e_axis`.
    pub fn step(&self, axis: usize) -> Vertex {
        let mut coords = self.coords.clone();
        coords[axis] += 1;
        Vertex { coords }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl EdgeId {
    pub fn new(base: Vertex, axis: usize) -> Self {
        debug_assert!(axis < base.dim());
        Self { base, axis }
    }

    /// Canonical identity of the bond joining two nearest neighbours, or
    /// `None` if `a` and `b` are not at ℓ1 distance 1.
    pub fn between(a: &Vertex, b: &Vertex) -> Option<EdgeId> {
        if a.dim() != b.dim() {
            return None;
        }
        let mut axis = None;
        for (i, (x, y)) in a.coords.iter().zip(&b.coords).enumerate() {
            match y - x {
                0 => {}
                1 | -1 if axis.is_none() => axis = Some((i, y - x)),
                _ => return None,
            }
        }
        let (axis, dir) = axis?;
        let base = if dir == 1 { a.clone() } else { b.clone() };
        Some(EdgeId { base, axis })
    }

    pub fn endpoints(&self) -> (Vertex, Vertex) {
        (self.base.clone(), self.base.step(self.axis))
    }

    pub fn is_interior(&self, b: &BoxSpec) -> bool {
        let n = b.n as i64;
        self.base.dim() == b.d
            && self.base.coords.iter().enumerate().all(|(i, &c)| {
                let hi = if i == self.axis { n - 1 } else { n };
                (-n..=hi).contains(&c)
            })
    }
}

impl BoxSpec {
    pub fn new(d: usize, n: u32) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        Self { d, n }
    }

    pub fn side(&self) -> u64 {
        2 * self.n as u64 + 1
    }

    pub fn vertex_count(&self) -> u64 {
        self.side().pow(self.d as u32)
    }

    /// `d · 2n · (2n+1)^{d−1}`.
    pub fn interior_edge_count(&self) -> u64 {
        self.d as u64 * 2 * self.n as u64 * self.side().pow(self.d as u32 - 1)
    }

    /// `|∂B_n|`; the boundary of `B_0` is the origin itself.
    pub fn boundary_size(&self) -> u64 {
        if self.n == 0 {
            return 1;
        }
        let inner = 2 * self.n as u64 - 1;
        self.vertex_count() - inner.pow(self.d as u32)
    }

    pub fn contains(&self, coords: &[i64]) -> bool {
        coords.len() == self.d && linf_norm(coords) <= self.n as i64
    }

    pub fn on_boundary(&self, coords: &[i64]) -> bool {
        coords.len() == self.d && linf_norm(coords) == self.n as i64
    }

    /// Index strides: `strides[i] = side^(d-1-i)`.
    pub fn strides(&self) -> Vec<u64> {
        let side = self.side();
        let mut strides = vec![1u64; self.d];
        for i in (0..self.d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * side;
        }
        strides
    }

    pub fn vertex_index(&self, v: &Vertex) -> Result<u64, LatticeError> {
        self.index_of(&v.coords)
    }

    pub fn index_of(&self, coords: &[i64]) -> Result<u64, LatticeError> {
        if coords.len() != self.d {
            return Err(LatticeError::DimensionMismatch {
                expected: self.d,
                got: coords.len(),
            });
        }
        if !self.contains(coords) {
            return Err(LatticeError::OutOfBox {
                coords: coords.to_vec(),
                n: self.n,
            });
        }
        let n = self.n as i64;
        let side = self.side();
        Ok(coords
            .iter()
            .fold(0u64, |acc, &c| acc * side + (c + n) as u64))
    }

    pub fn index_vertex(&self, index: u64) -> Result<Vertex, LatticeError> {
        let count = self.vertex_count();
        if index >= count {
            return Err(LatticeError::IndexOutOfRange { index, count });
        }
        let mut coords = vec![0i64; self.d];
        self.write_coords(index, &mut coords);
        Ok(Vertex { coords })
    }

    /// Decodes `index` into `out` without allocating. `index` must be in range.
    pub fn write_coords(&self, mut index: u64, out: &mut [i64]) {
        let side = self.side();
        let n = self.n as i64;
        for c in out.iter_mut().rev() {
            *c = (index % side) as i64 - n;
            index /= side;
        }
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.vertex_count()).map(move |i| {
            let mut coords = vec![0i64; self.d];
            self.write_coords(i, &mut coords);
            Vertex { coords }
        })
    }

    /// Every bond with both endpoints in the box, ordered by base vertex index
    /// and then by axis.
    pub fn interior_edges(&self) -> InteriorEdges {
        InteriorEdges {
            bx: *self,
            next_vertex: 0,
            axis: 0,
            coords: vec![0; self.d],
        }
    }
}

pub struct InteriorEdges {
    bx: BoxSpec,
    next_vertex: u64,
    axis: usize,
    coords: Vec<i64>,
}

impl Iterator for InteriorEdges {
    type Item = EdgeId;

    fn next(&mut self) -> Option<EdgeId> {
        let n = self.bx.n as i64;
        let count = self.bx.vertex_count();
        loop {
            if self.next_vertex >= count {
                return None;
            }
            if self.axis == 0 {
                self.bx.write_coords(self.next_vertex, &mut self.coords);
            }
            let axis = self.axis;
            self.axis += 1;
            if self.axis == self.bx.d {
                self.axis = 0;
                self.next_vertex += 1;
            }
            if self.coords[axis] < n {
                return Some(EdgeId {
                    base: Vertex {
                        coords: self.coords.clone(),
                    },
                    axis,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;

    #[test]
    fn vertex_index_examples() {
        let b = BoxSpec::new(2, 1);
        assert_eq!(b.vertex_index(&Vertex::new([-1, -1])).unwrap(), 0);
        assert_eq!(b.vertex_index(&Vertex::new([-1, 0])).unwrap(), 1);
        assert_eq!(b.vertex_index(&Vertex::new([1, 1])).unwrap(), 8);
    }

    #[test]
    fn vertex_index_rejects_outside() {
        let b = BoxSpec::new(2, 1);
        assert!(matches!(
            b.vertex_index(&Vertex::new([2, 0])),
            Err(LatticeError::OutOfBox { .. })
        ));
        assert!(matches!(
            b.vertex_index(&Vertex::new([0, 0, 0])),
            Err(LatticeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn interior_edge_counts() {
        assert_eq!(BoxSpec::new(2, 1).interior_edges().count(), 12);
        assert_eq!(BoxSpec::new(2, 2).interior_edges().count(), 40);
        assert_eq!(BoxSpec::new(3, 1).interior_edges().count(), 54);
        for d in 1..=4 {
            for n in 0..=8 {
                let b = BoxSpec::new(d, n);
                if b.vertex_count() > 200_000 {
                    continue;
                }
                assert_eq!(b.interior_edges().count() as u64, b.interior_edge_count());
            }
        }
    }

    #[test]
    fn closed_form_count_large_boxes() {
        // the enumeration above skips d=4 n>=7; spot-check the closed form there
        let b = BoxSpec::new(4, 8);
        assert_eq!(b.interior_edge_count(), 4 * 16 * 17u64.pow(3));
    }

    #[test]
    fn interior_edges_cover_all_adjacent_pairs_once() {
        for (d, n) in [(1, 3), (2, 2), (3, 1)] {
            let b = BoxSpec::new(d, n);
            let edges: Vec<EdgeId> = b.interior_edges().collect();
            let set: HashSet<&EdgeId> = edges.iter().collect();
            assert_eq!(set.len(), edges.len());
            for e in &edges {
                let (x, y) = e.endpoints();
                assert!(b.contains(&x.coords) && b.contains(&y.coords));
                assert!(e.is_interior(&b));
            }
            let verts: Vec<Vertex> = b.vertices().collect();
            let mut pairs = 0;
            for (i, x) in verts.iter().enumerate() {
                for y in &verts[i + 1..] {
                    if let Some(e) = EdgeId::between(x, y) {
                        assert!(set.contains(&e));
                        pairs += 1;
                    }
                }
            }
            assert_eq!(pairs, edges.len());
        }
    }

    #[test]
    fn canonical_edge_order() {
        let b = BoxSpec::new(2, 1);
        let keys: Vec<(u64, usize)> = b
            .interior_edges()
            .map(|e| (b.vertex_index(&e.base).unwrap(), e.axis))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn boundary_sizes() {
        assert_eq!(BoxSpec::new(2, 1).boundary_size(), 8);
        assert_eq!(BoxSpec::new(3, 1).boundary_size(), 26);
        assert_eq!(BoxSpec::new(2, 0).boundary_size(), 1);
        for (d, n) in [(2, 3), (3, 2), (1, 4)] {
            let b = BoxSpec::new(d, n);
            let counted = b.vertices().filter(|v| b.on_boundary(&v.coords)).count() as u64;
            assert_eq!(counted, b.boundary_size());
        }
    }

    #[test]
    fn linf_examples() {
        assert_eq!(linf_norm(&[3, -5]), 5);
        assert_eq!(linf_norm(&[0, 0]), 0);
        assert_eq!(linf_norm(&[-2, 2]), 2);
    }

    #[test]
    fn edge_between() {
        let a = Vertex::new([0, 0]);
        let b = Vertex::new([0, -1]);
        let e = EdgeId::between(&a, &b).unwrap();
        assert_eq!(e, EdgeId::new(Vertex::new([0, -1]), 1));
        assert_eq!(EdgeId::between(&a, &Vertex::new([1, 1])), None);
        assert_eq!(EdgeId::between(&a, &a), None);
    }

    proptest! {
        #[test]
        fn index_round_trip(d in 1usize..=4, n in 0u32..6, seed in any::<u64>()) {
            let b = BoxSpec::new(d, n);
            let idx = seed % b.vertex_count();
            let v = b.index_vertex(idx).unwrap();
            prop_assert!(b.contains(&v.coords));
            prop_assert_eq!(b.vertex_index(&v).unwrap(), idx);
        }
    }
}
