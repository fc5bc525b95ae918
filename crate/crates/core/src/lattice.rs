//! Geometry of the closed box `[0, L]^d ∩ Z^d`.
//!
//! Vertices are indexed lexicographically by their coordinates (coordinate 0
//! most significant). Edges are indexed by `(lower endpoint, axis)` in the same
//! order, so the edge list is lexicographic by endpoint coordinates, then axis.
//! The last coordinate is the vertical one: `T` is the face `x_{d-1} = L` and
//! `B` is the face `x_{d-1} = 0`.
//!
//! Midpoints are stored doubled (`2 m_e`) so that every geometric predicate is
//! evaluated in integer arithmetic; only the final distances are real.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default ceiling on the number of vertices a box may have.
pub const DEFAULT_VERTEX_BUDGET: usize = 1 << 26;

const NO_EDGE: u32 = u32::MAX;

/// Index of an edge in [`BoxLattice::edges`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// One of the two horizontal faces of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Top,
    Bottom,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Top => Side::Bottom,
            Side::Bottom => Side::Top,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension must be at least 2 (got {0})")]
    DimensionTooSmall(usize),
    #[error("side length must be at least 1 (got {0})")]
    SideTooSmall(usize),
    #[error("box with d={d}, L={side} exceeds the vertex budget of {budget}")]
    TooLarge { d: usize, side: usize, budget: usize },
    #[error("edge index {index} out of range (edge count {count})")]
    InvalidEdge { index: u32, count: usize },
}

/// An unordered nearest-neighbour pair `{lo, lo + e_axis}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub lo: u32,
    pub hi: u32,
    pub axis: u8,
}

/// Compressed adjacency lists.
#[derive(Clone, Debug, Default)]
pub(crate) struct Csr {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl Csr {
    fn from_lists(lists: impl IntoIterator<Item = Vec<u32>>) -> Self {
        let mut offsets = vec![0u32];
        let mut targets = Vec::new();
        for list in lists {
            targets.extend_from_slice(&list);
            offsets.push(targets.len() as u32);
        }
        Csr { offsets, targets }
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

/// The box one cell larger in every direction, `[-1, L+1]^d`, together with
/// the embedding of the original edges. Edges of `∂ext A` that leave the box
/// live here.
#[derive(Debug)]
pub struct ExtendedBox {
    pub lattice: BoxLattice,
    to_ext: Vec<u32>,
    from_ext: Vec<u32>,
    vertex_to_ext: Vec<u32>,
    vertex_from_ext: Vec<u32>,
}

impl ExtendedBox {
    /// Id in the extended box of an edge of the original box.
    #[inline]
    pub fn embed(&self, e: EdgeId) -> EdgeId {
        EdgeId(self.to_ext[e.index()])
    }

    /// The original edge, if `ext` lies inside the original box.
    #[inline]
    pub fn restrict(&self, ext: EdgeId) -> Option<EdgeId> {
        match self.from_ext[ext.index()] {
            NO_EDGE => None,
            i => Some(EdgeId(i)),
        }
    }

    #[inline]
    pub fn embed_vertex(&self, v: u32) -> u32 {
        self.vertex_to_ext[v as usize]
    }

    #[inline]
    pub fn restrict_vertex(&self, ext: u32) -> Option<u32> {
        match self.vertex_from_ext[ext as usize] {
            NO_EDGE => None,
            v => Some(v),
        }
    }
}

/// Immutable geometry of the box `Λ = [0, L]^d`.
#[derive(Debug)]
pub struct BoxLattice {
    dim: usize,
    side: usize,
    vertex_count: usize,
    strides: Vec<usize>,
    edges: Vec<Edge>,
    /// `edge_at[v * d + axis]` is the edge with lower endpoint `v` along `axis`.
    edge_at: Vec<u32>,
    /// Doubled midpoints, `d` integers per edge.
    mid2: Vec<i32>,
    incident: Csr,
    top: Vec<u32>,
    bottom: Vec<u32>,
    on_top: Vec<bool>,
    on_bottom: Vec<bool>,
    /// `star_offsets[a][b]`: lower-endpoint displacements from an edge along
    /// `a` to its *-neighbours along `b`.
    star_offsets: Vec<Vec<Vec<Vec<i32>>>>,
    star: OnceLock<Csr>,
    extended: OnceLock<Box<ExtendedBox>>,
}

impl BoxLattice {
    pub fn new(dim: usize, side: usize) -> Result<Self, LatticeError> {
        Self::with_budget(dim, side, DEFAULT_VERTEX_BUDGET)
    }

    pub fn with_budget(dim: usize, side: usize, budget: usize) -> Result<Self, LatticeError> {
        if dim < 2 {
            return Err(LatticeError::DimensionTooSmall(dim));
        }
        if side < 1 {
            return Err(LatticeError::SideTooSmall(side));
        }
        let too_large = LatticeError::TooLarge { d: dim, side, budget };
        let n = side.checked_add(1).ok_or(too_large.clone())?;
        let mut vertex_count: usize = 1;
        for _ in 0..dim {
            vertex_count = vertex_count.checked_mul(n).ok_or(too_large.clone())?;
        }
        if vertex_count > budget || vertex_count.saturating_mul(dim) >= NO_EDGE as usize {
            return Err(too_large);
        }

        let mut strides = vec![1usize; dim];
        for i in (0..dim - 1).rev() {
            strides[i] = strides[i + 1] * n;
        }

        let mut edges = Vec::with_capacity(dim * side * vertex_count / n);
        let mut edge_at = vec![NO_EDGE; vertex_count * dim];
        let mut mid2 = Vec::with_capacity(edges.capacity() * dim);
        let mut coords = vec![0usize; dim];
        for v in 0..vertex_count {
            decode(v, &strides, &mut coords);
            for axis in 0..dim {
                if coords[axis] < side {
                    edge_at[v * dim + axis] = edges.len() as u32;
                    edges.push(Edge {
                        lo: v as u32,
                        hi: (v + strides[axis]) as u32,
                        axis: axis as u8,
                    });
                    for (i, &c) in coords.iter().enumerate() {
                        mid2.push(2 * c as i32 + i32::from(i == axis));
                    }
                }
            }
        }

        let mut incident = vec![Vec::new(); vertex_count];
        for (i, e) in edges.iter().enumerate() {
            incident[e.lo as usize].push(i as u32);
            incident[e.hi as usize].push(i as u32);
        }
        for list in &mut incident {
            list.sort_unstable();
        }

        let vertical = dim - 1;
        let mut top = Vec::new();
        let mut bottom = Vec::new();
        let mut on_top = vec![false; vertex_count];
        let mut on_bottom = vec![false; vertex_count];
        for v in 0..vertex_count {
            let h = (v / strides[vertical]) % n;
            if h == side {
                top.push(v as u32);
                on_top[v] = true;
            }
            if h == 0 {
                bottom.push(v as u32);
                on_bottom[v] = true;
            }
        }

        Ok(BoxLattice {
            dim,
            side,
            vertex_count,
            strides,
            edges,
            edge_at,
            mid2,
            incident: Csr::from_lists(incident),
            top,
            bottom,
            on_top,
            on_bottom,
            star_offsets: star_offset_table(dim),
            star: OnceLock::new(),
            extended: OnceLock::new(),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    /// `|Λ|`, the number of lattice points `(L+1)^d`.
    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// `N_E = d·L·(L+1)^(d-1)`.
    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e.index()]
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len() as u32).map(EdgeId)
    }

    pub fn check_edge(&self, e: EdgeId) -> Result<(), LatticeError> {
        if e.index() < self.edges.len() {
            Ok(())
        } else {
            Err(LatticeError::InvalidEdge {
                index: e.0,
                count: self.edges.len(),
            })
        }
    }

    #[inline]
    pub fn endpoints(&self, e: EdgeId) -> (u32, u32) {
        let edge = self.edges[e.index()];
        (edge.lo, edge.hi)
    }

    /// The formula `d·L·(L+1)^(d-1)`.
    pub fn expected_edge_count(dim: usize, side: usize) -> usize {
        dim * side * (side + 1).pow(dim as u32 - 1)
    }

    pub fn vertex_coords(&self, v: u32) -> Vec<usize> {
        let mut coords = vec![0; self.dim];
        decode(v as usize, &self.strides, &mut coords);
        coords
    }

    pub fn vertex_at(&self, coords: &[usize]) -> Option<u32> {
        if coords.len() != self.dim || coords.iter().any(|&c| c > self.side) {
            return None;
        }
        Some(coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum::<usize>() as u32)
    }

    /// The edge with lower endpoint `coords` along `axis`.
    pub fn edge_at(&self, coords: &[usize], axis: usize) -> Option<EdgeId> {
        let v = self.vertex_at(coords)?;
        match self.edge_at[v as usize * self.dim + axis] {
            NO_EDGE => None,
            i => Some(EdgeId(i)),
        }
    }

    /// Edge joining two vertices, if they are nearest neighbours.
    pub fn edge_between(&self, a: u32, b: u32) -> Option<EdgeId> {
        self.incident(a)
            .iter()
            .copied()
            .find(|&i| {
                let e = self.edges[i as usize];
                (e.lo == a && e.hi == b) || (e.lo == b && e.hi == a)
            })
            .map(EdgeId)
    }

    /// Edges incident to a vertex, ascending.
    #[inline]
    pub fn incident(&self, v: u32) -> &[u32] {
        self.incident.row(v as usize)
    }

    #[inline]
    pub fn other_end(&self, e: u32, v: u32) -> u32 {
        let edge = self.edges[e as usize];
        if edge.lo == v {
            edge.hi
        } else {
            edge.lo
        }
    }

    pub fn top(&self) -> &[u32] {
        &self.top
    }

    pub fn bottom(&self) -> &[u32] {
        &self.bottom
    }

    pub fn side_vertices(&self, side: Side) -> &[u32] {
        match side {
            Side::Top => &self.top,
            Side::Bottom => &self.bottom,
        }
    }

    #[inline]
    pub fn is_top(&self, v: u32) -> bool {
        self.on_top[v as usize]
    }

    #[inline]
    pub fn is_bottom(&self, v: u32) -> bool {
        self.on_bottom[v as usize]
    }

    #[inline]
    pub fn is_on_side(&self, v: u32, side: Side) -> bool {
        match side {
            Side::Top => self.is_top(v),
            Side::Bottom => self.is_bottom(v),
        }
    }

    /// Doubled midpoint `2 m_e`.
    #[inline]
    pub fn midpoint2(&self, e: EdgeId) -> &[i32] {
        let i = e.index() * self.dim;
        &self.mid2[i..i + self.dim]
    }

    pub fn midpoint(&self, e: EdgeId) -> Vec<f64> {
        self.midpoint2(e).iter().map(|&c| f64::from(c) / 2.0).collect()
    }

    /// `‖m_e − m_f‖_∞ ≤ 1`, evaluated on doubled midpoints.
    #[inline]
    pub fn are_star_neighbors(&self, e: EdgeId, f: EdgeId) -> bool {
        e != f
            && self
                .midpoint2(e)
                .iter()
                .zip(self.midpoint2(f))
                .all(|(a, b)| (a - b).abs() <= 2)
    }

    /// Edges sharing an endpoint.
    #[inline]
    pub fn are_neighbors(&self, e: EdgeId, f: EdgeId) -> bool {
        if e == f {
            return false;
        }
        let (a, b) = self.endpoints(e);
        let (c, d) = self.endpoints(f);
        a == c || a == d || b == c || b == d
    }

    /// All `f ≠ e` inside the box with `‖m_e − m_f‖_∞ ≤ 1`, ascending.
    pub fn star_neighbors(&self, e: EdgeId) -> Vec<EdgeId> {
        let edge = self.edges[e.index()];
        let base = self.vertex_coords(edge.lo);
        let mut out = Vec::new();
        let mut c = vec![0usize; self.dim];
        for b in 0..self.dim {
            for delta in &self.star_offsets[edge.axis as usize][b] {
                let mut inside = true;
                for i in 0..self.dim {
                    let v = base[i] as i64 + i64::from(delta[i]);
                    if v < 0 || v > self.side as i64 || (i == b && v == self.side as i64) {
                        inside = false;
                        break;
                    }
                    c[i] = v as usize;
                }
                if inside {
                    let v = self.vertex_at(&c).expect("inside the box");
                    let f = self.edge_at[v as usize * self.dim + b];
                    debug_assert_ne!(f, NO_EDGE);
                    if f != e.0 {
                        out.push(EdgeId(f));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Vertices at ℓ∞ distance exactly 1 from `v`, inside the box.
    pub fn for_each_star_vertex(&self, v: u32, mut f: impl FnMut(u32)) {
        let n = self.side as i64 + 1;
        let mut coords = vec![0usize; self.dim];
        decode(v as usize, &self.strides, &mut coords);
        let total = 3usize.pow(self.dim as u32);
        'offsets: for code in 0..total {
            if code == total / 2 {
                continue;
            }
            let mut rest = code;
            let mut w = 0i64;
            for i in 0..self.dim {
                let delta = (rest % 3) as i64 - 1;
                rest /= 3;
                let c = coords[i] as i64 + delta;
                if c < 0 || c >= n {
                    continue 'offsets;
                }
                w += c * self.strides[i] as i64;
            }
            f(w as u32);
        }
    }

    /// Precomputed *-adjacency of every edge.
    pub(crate) fn star_table(&self) -> &Csr {
        self.star.get_or_init(|| {
            Csr::from_lists(
                self.edge_ids()
                    .map(|e| self.star_neighbors(e).into_iter().map(|f| f.0).collect()),
            )
        })
    }

    #[inline]
    pub fn star_row(&self, e: EdgeId) -> &[u32] {
        self.star_table().row(e.index())
    }

    /// Euclidean distance between midpoints.
    #[inline]
    pub fn edge_distance(&self, e: EdgeId, f: EdgeId) -> f64 {
        let sq: i64 = self
            .midpoint2(e)
            .iter()
            .zip(self.midpoint2(f))
            .map(|(a, b)| {
                let d = i64::from(a - b);
                d * d
            })
            .sum();
        (sq as f64).sqrt() / 2.0
    }

    /// Distance from `m_e` to the complement of the solid box.
    #[inline]
    pub fn distance_to_boundary(&self, e: EdgeId) -> f64 {
        let twice_l = 2 * self.side as i32;
        let m = self
            .midpoint2(e)
            .iter()
            .map(|&c| c.min(twice_l - c))
            .min()
            .expect("dim >= 2");
        f64::from(m) / 2.0
    }

    /// Whether the closed unit segment of `e` touches a face of the box.
    #[inline]
    pub fn meets_boundary(&self, e: EdgeId) -> bool {
        let (a, b) = self.endpoints(e);
        self.is_boundary_vertex(a) || self.is_boundary_vertex(b)
    }

    pub fn is_boundary_vertex(&self, v: u32) -> bool {
        let n = self.side + 1;
        self.strides.iter().any(|&s| {
            let c = (v as usize / s) % n;
            c == 0 || c == self.side
        })
    }

    /// `min_{f ∈ set} d(e, f)`, optionally combined with the distance to `Λ^c`.
    /// Empty set without the boundary gives `+∞`.
    pub fn set_distance<I>(&self, e: EdgeId, set: I, include_boundary: bool) -> f64
    where
        I: IntoIterator<Item = EdgeId>,
    {
        let mut best = if include_boundary {
            self.distance_to_boundary(e)
        } else {
            f64::INFINITY
        };
        for f in set {
            let d = self.edge_distance(e, f);
            if d < best {
                best = d;
            }
        }
        best
    }

    /// The box `[-1, L+1]^d` with the embedding of this box's edges.
    pub fn extended(&self) -> &ExtendedBox {
        self.extended.get_or_init(|| {
            let lattice = BoxLattice::with_budget(self.dim, self.side + 2, usize::MAX)
                .expect("extended box fits whenever the box does");
            let mut to_ext = Vec::with_capacity(self.edges.len());
            let mut from_ext = vec![NO_EDGE; lattice.edge_count()];
            let mut coords = vec![0usize; self.dim];
            for (i, e) in self.edges.iter().enumerate() {
                decode(e.lo as usize, &self.strides, &mut coords);
                coords.iter_mut().for_each(|c| *c += 1);
                let ext = lattice
                    .edge_at(&coords, e.axis as usize)
                    .expect("shifted edge exists");
                to_ext.push(ext.0);
                from_ext[ext.index()] = i as u32;
            }
            let vertex_to_ext: Vec<u32> = (0..self.vertex_count as u32)
                .map(|v| {
                    decode(v as usize, &self.strides, &mut coords);
                    coords.iter_mut().for_each(|c| *c += 1);
                    lattice.vertex_at(&coords).expect("shifted vertex exists")
                })
                .collect();
            let mut vertex_from_ext = vec![NO_EDGE; lattice.vertex_count()];
            for (v, &x) in vertex_to_ext.iter().enumerate() {
                vertex_from_ext[x as usize] = v as u32;
            }
            Box::new(ExtendedBox {
                lattice,
                to_ext,
                from_ext,
                vertex_to_ext,
                vertex_from_ext,
            })
        })
    }
}

#[inline]
fn decode(mut v: usize, strides: &[usize], out: &mut [usize]) {
    for (o, &s) in out.iter_mut().zip(strides) {
        *o = v / s;
        v %= s;
    }
}

/// For an edge along `a` and a candidate along `b`, the admissible lower
/// endpoint displacements `δ` with `|2δ_i + [i=b] − [i=a]| ≤ 2` for all `i`.
fn star_offset_table(dim: usize) -> Vec<Vec<Vec<Vec<i32>>>> {
    let mut table = vec![vec![Vec::new(); dim]; dim];
    for (a, row) in table.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            let ranges: Vec<Vec<i32>> = (0..dim)
                .map(|i| {
                    (-1..=1)
                        .filter(|&dl| {
                            let m = 2 * dl + i32::from(i == b) - i32::from(i == a);
                            m.abs() <= 2
                        })
                        .collect()
                })
                .collect();
            let mut delta = vec![0i32; dim];
            cartesian(&ranges, 0, &mut delta, cell);
        }
    }
    table
}

fn cartesian(ranges: &[Vec<i32>], i: usize, cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) {
    if i == ranges.len() {
        out.push(cur.clone());
        return;
    }
    for &v in &ranges[i] {
        cur[i] = v;
        cartesian(ranges, i + 1, cur, out);
    }
}

/// `α(d) = 3^d + 4(d−1)3^(d−2) − 1`, the number of *-neighbours of an edge of `Z^d`.
pub fn alpha(dim: usize) -> usize {
    3usize.pow(dim as u32) + 4 * (dim - 1) * 3usize.pow(dim as u32 - 2) - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l1() -> BoxLattice {
        BoxLattice::new(2, 1).unwrap()
    }

    /// Named edges of the unit square: bottom, left, top, right.
    fn unit_square_edges(lat: &BoxLattice) -> [EdgeId; 4] {
        [
            lat.edge_at(&[0, 0], 0).unwrap(),
            lat.edge_at(&[0, 0], 1).unwrap(),
            lat.edge_at(&[0, 1], 0).unwrap(),
            lat.edge_at(&[1, 0], 1).unwrap(),
        ]
    }

    #[test]
    fn smallest_boxes() {
        let lat = l1();
        assert_eq!(lat.vertex_count(), 4);
        assert_eq!(lat.edge_count(), 4);
        let lat = BoxLattice::new(2, 2).unwrap();
        assert_eq!(lat.vertex_count(), 9);
        assert_eq!(lat.edge_count(), 12);
    }

    #[test]
    fn edge_count_matches_enumeration() {
        // Independent enumeration: all pairs of lattice points at distance 1.
        for (d, l) in [(2, 1), (2, 5), (3, 4), (4, 2), (5, 1)] {
            let lat = BoxLattice::new(d, l).unwrap();
            let pts: Vec<Vec<usize>> = (0..lat.vertex_count() as u32)
                .map(|v| lat.vertex_coords(v))
                .collect();
            let mut count = 0;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let sq: usize = pts[i]
                        .iter()
                        .zip(&pts[j])
                        .map(|(a, b)| a.abs_diff(*b).pow(2))
                        .sum();
                    if sq == 1 {
                        count += 1;
                    }
                }
            }
            assert_eq!(count, lat.edge_count(), "d={d} L={l}");
            assert_eq!(count, BoxLattice::expected_edge_count(d, l));
        }
        assert_eq!(BoxLattice::new(3, 4).unwrap().edge_count(), 300);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            BoxLattice::new(1, 4).unwrap_err(),
            LatticeError::DimensionTooSmall(1)
        );
        assert_eq!(BoxLattice::new(2, 0).unwrap_err(), LatticeError::SideTooSmall(0));
        assert!(matches!(
            BoxLattice::with_budget(3, 10, 100),
            Err(LatticeError::TooLarge { .. })
        ));
        assert!(matches!(
            BoxLattice::new(64, usize::MAX / 2),
            Err(LatticeError::TooLarge { .. })
        ));
    }

    #[test]
    fn faces() {
        let lat = BoxLattice::new(3, 3).unwrap();
        assert_eq!(lat.top().len(), 16);
        assert_eq!(lat.bottom().len(), 16);
        assert!(lat.top().iter().all(|v| !lat.bottom().contains(v)));
        for &v in lat.top() {
            assert_eq!(lat.vertex_coords(v)[2], 3);
        }
    }

    #[test]
    fn ordering_is_lexicographic_and_deterministic() {
        let a = BoxLattice::new(3, 2).unwrap();
        let b = BoxLattice::new(3, 2).unwrap();
        assert_eq!(a.edges(), b.edges());
        let keys: Vec<(Vec<usize>, u8)> = a
            .edges()
            .iter()
            .map(|e| (a.vertex_coords(e.lo), e.axis))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn every_edge_has_unit_length() {
        let lat = BoxLattice::new(3, 3).unwrap();
        for e in lat.edges() {
            let a = lat.vertex_coords(e.lo);
            let b = lat.vertex_coords(e.hi);
            let sq: usize = a.iter().zip(&b).map(|(x, y)| x.abs_diff(*y).pow(2)).sum();
            assert_eq!(sq, 1);
        }
    }

    /// Brute force: scan a big enough box for edges whose midpoints are within
    /// ℓ∞ distance 1 of an interior edge.
    fn brute_star_count(d: usize) -> usize {
        let lat = BoxLattice::new(d, 4).unwrap();
        let centre = vec![2; d];
        let e = lat.edge_at(&centre, 0).unwrap();
        let me = lat.midpoint(e);
        lat.edge_ids()
            .filter(|&f| f != e)
            .filter(|&f| {
                lat.midpoint(f)
                    .iter()
                    .zip(&me)
                    .all(|(a, b)| (a - b).abs() <= 1.0)
            })
            .count()
    }

    #[test]
    fn star_neighbour_count_is_alpha() {
        assert_eq!(alpha(2), 12);
        assert_eq!(alpha(3), 50);
        assert_eq!(alpha(4), 188);
        assert_eq!(alpha(5), 674);
        for d in 2..=5 {
            let lat = BoxLattice::new(d, 4).unwrap();
            let centre = vec![2; d];
            for axis in 0..d {
                let e = lat.edge_at(&centre, axis).unwrap();
                assert_eq!(lat.star_neighbors(e).len(), alpha(d), "d={d} axis={axis}");
            }
            assert_eq!(brute_star_count(d), alpha(d));
        }
    }

    #[test]
    fn unit_square_star_neighbours() {
        let lat = l1();
        for e in lat.edge_ids() {
            let nb = lat.star_neighbors(e);
            assert_eq!(nb.len(), 3);
            assert!(!nb.contains(&e));
        }
    }

    #[test]
    fn star_neighbours_match_predicate_everywhere() {
        let lat = BoxLattice::new(3, 2).unwrap();
        for e in lat.edge_ids() {
            let brute: Vec<EdgeId> = lat
                .edge_ids()
                .filter(|&f| lat.are_star_neighbors(e, f))
                .collect();
            assert_eq!(lat.star_neighbors(e), brute);
            assert_eq!(lat.star_row(e).len(), brute.len());
        }
    }

    #[test]
    fn distances() {
        let lat = BoxLattice::new(2, 4).unwrap();
        let a = lat.edge_at(&[1, 1], 0).unwrap();
        let b = lat.edge_at(&[1, 2], 0).unwrap();
        assert_eq!(lat.edge_distance(a, a), 0.0);
        assert_eq!(lat.edge_distance(a, b), 1.0);
        let h = lat.edge_at(&[0, 0], 0).unwrap();
        let v = lat.edge_at(&[0, 0], 1).unwrap();
        assert!((lat.edge_distance(h, v) - 0.5f64.sqrt()).abs() < 1e-12);
        let central = lat.edge_at(&[2, 2], 1).unwrap();
        assert_eq!(lat.midpoint(central), vec![2.0, 2.5]);
        assert_eq!(lat.distance_to_boundary(central), 1.5);
    }

    #[test]
    fn unit_square_boundary_distances() {
        let lat = l1();
        let [b, l, t, r] = unit_square_edges(&lat);
        assert_eq!(lat.distance_to_boundary(l), 0.0);
        // Every midpoint of the unit square lies on a face.
        for e in [b, l, t, r] {
            let d = lat.distance_to_boundary(e);
            assert!(d == 0.0 || d == 0.5);
            assert!(lat.meets_boundary(e));
        }
    }

    #[test]
    fn set_distance_conventions() {
        let lat = BoxLattice::new(2, 4).unwrap();
        let e = lat.edge_at(&[2, 2], 1).unwrap();
        assert_eq!(lat.set_distance(e, [e], false), 0.0);
        assert_eq!(lat.set_distance(e, [], false), f64::INFINITY);
        assert_eq!(lat.set_distance(e, [], true), lat.distance_to_boundary(e));
    }

    #[test]
    fn extended_box_embedding() {
        let lat = BoxLattice::new(2, 3).unwrap();
        let ext = lat.extended();
        assert_eq!(ext.lattice.side(), 5);
        for e in lat.edge_ids() {
            let x = ext.embed(e);
            assert_eq!(ext.restrict(x), Some(e));
            let m: Vec<i32> = lat.midpoint2(e).iter().map(|c| c + 2).collect();
            assert_eq!(ext.lattice.midpoint2(x), &m[..]);
        }
        let inside = ext
            .lattice
            .edge_ids()
            .filter(|&x| ext.restrict(x).is_some())
            .count();
        assert_eq!(inside, lat.edge_count());
    }

    proptest! {
        #[test]
        fn edge_distance_is_a_metric(a in 0u32..144, b in 0u32..144, c in 0u32..144) {
            let lat = BoxLattice::new(2, 8).unwrap();
            let (a, b, c) = (EdgeId(a), EdgeId(b), EdgeId(c));
            prop_assert_eq!(lat.edge_distance(a, b), lat.edge_distance(b, a));
            prop_assert_eq!(lat.edge_distance(a, b) == 0.0, a == b);
            prop_assert!(lat.edge_distance(a, c) <= lat.edge_distance(a, b) + lat.edge_distance(b, c) + 1e-12);
        }
    }
}
