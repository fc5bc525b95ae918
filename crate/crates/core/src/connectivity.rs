//! Cluster structure of a single edge configuration.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edge_set::EdgeSet;
use crate::lattice::{BoxLattice, EdgeId, Side};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConnectivityError {
    #[error("edge set does not separate T from B")]
    NotSeparating,
    #[error("configuration length {got} does not match edge count {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Edge-indexed open/closed map. `true` means open.
///
/// The version counter increments on every mutation and ties derived
/// labelings to the configuration they were computed from. Equality ignores it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Config {
    bits: Vec<bool>,
    #[serde(skip)]
    version: u64,
}

impl PartialEq for Config {
    fn eq(&self, other: &Self) -> bool {
        self.bits == other.bits
    }
}

impl Eq for Config {}

impl Config {
    pub fn all_closed(lattice: &BoxLattice) -> Self {
        Config {
            bits: vec![false; lattice.edge_count()],
            version: 0,
        }
    }

    pub fn all_open(lattice: &BoxLattice) -> Self {
        Config {
            bits: vec![true; lattice.edge_count()],
            version: 0,
        }
    }

    pub fn from_bits(lattice: &BoxLattice, bits: Vec<bool>) -> Result<Self, ConnectivityError> {
        if bits.len() != lattice.edge_count() {
            return Err(ConnectivityError::LengthMismatch {
                got: bits.len(),
                expected: lattice.edge_count(),
            });
        }
        Ok(Config { bits, version: 0 })
    }

    /// Bit `i` of `mask` is the state of edge `i`. Only for boxes with at most 64 edges.
    pub fn from_mask(lattice: &BoxLattice, mask: u64) -> Self {
        assert!(lattice.edge_count() <= 64);
        Config {
            bits: (0..lattice.edge_count()).map(|i| mask >> i & 1 == 1).collect(),
            version: 0,
        }
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.bits.len() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &b)| m | (u64::from(b) << i))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn is_open(&self, e: EdgeId) -> bool {
        self.bits[e.index()]
    }

    #[inline]
    pub fn set(&mut self, e: EdgeId, open: bool) {
        self.bits[e.index()] = open;
        self.version += 1;
    }

    #[inline]
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn open_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn open_edges(&self) -> EdgeSet {
        EdgeSet::from_mask(&self.bits)
    }

    /// `self(e) ≤ other(e)` for every edge.
    pub fn is_dominated_by(&self, other: &Config) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// Open clusters of a configuration.
#[derive(Clone, Debug)]
pub struct ClusterLabels {
    /// Smallest vertex index in the cluster of each vertex.
    labels: Vec<u32>,
    touches_top: Vec<bool>,
    touches_bottom: Vec<bool>,
    generation: u64,
}

impl ClusterLabels {
    #[inline]
    pub fn label(&self, v: u32) -> u32 {
        self.labels[v as usize]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Version of the configuration these labels were computed from.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// `v ∈ O(T)`.
    #[inline]
    pub fn in_top(&self, v: u32) -> bool {
        self.touches_top[self.labels[v as usize] as usize]
    }

    /// `v ∈ O(B)`.
    #[inline]
    pub fn in_bottom(&self, v: u32) -> bool {
        self.touches_bottom[self.labels[v as usize] as usize]
    }

    #[inline]
    pub fn in_side(&self, v: u32, side: Side) -> bool {
        match side {
            Side::Top => self.in_top(v),
            Side::Bottom => self.in_bottom(v),
        }
    }

    pub fn connects_top_bottom(&self) -> bool {
        self.touches_top
            .iter()
            .zip(&self.touches_bottom)
            .any(|(&t, &b)| t && b)
    }

    pub fn cluster_count(&self) -> usize {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(v, &l)| v as u32 == l)
            .count()
    }
}

fn find(parent: &mut [u32], mut v: u32) -> u32 {
    while parent[v as usize] != v {
        let gp = parent[parent[v as usize] as usize];
        parent[v as usize] = gp;
        v = gp;
    }
    v
}

/// Union-find labeling; each cluster is labeled by its smallest vertex.
pub fn label_clusters(lattice: &BoxLattice, config: &Config) -> ClusterLabels {
    let n = lattice.vertex_count();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    for (i, e) in lattice.edges().iter().enumerate() {
        if config.bits[i] {
            let (a, b) = (find(&mut parent, e.lo), find(&mut parent, e.hi));
            if a != b {
                // Keep the smaller index as root so roots are representatives.
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                parent[hi as usize] = lo;
            }
        }
    }
    let mut labels = vec![0u32; n];
    for v in 0..n as u32 {
        labels[v as usize] = find(&mut parent, v);
    }
    let mut touches_top = vec![false; n];
    let mut touches_bottom = vec![false; n];
    for &v in lattice.top() {
        touches_top[labels[v as usize] as usize] = true;
    }
    for &v in lattice.bottom() {
        touches_bottom[labels[v as usize] as usize] = true;
    }
    ClusterLabels {
        labels,
        touches_top,
        touches_bottom,
        generation: config.version,
    }
}

/// Vertices joined to `side` by an open path, i.e. the mask of `O(side)`.
pub fn open_cluster(lattice: &BoxLattice, config: &Config, side: Side) -> Vec<bool> {
    reach(lattice, lattice.side_vertices(side), |e| config.bits[e as usize])
}

fn reach(lattice: &BoxLattice, sources: &[u32], usable: impl Fn(u32) -> bool) -> Vec<bool> {
    let mut seen = vec![false; lattice.vertex_count()];
    let mut queue: VecDeque<u32> = VecDeque::new();
    for &v in sources {
        seen[v as usize] = true;
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        for &e in lattice.incident(v) {
            if usable(e) {
                let w = lattice.other_end(e, v);
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    seen
}

/// No open path joins T and B.
pub fn disconnected(lattice: &BoxLattice, config: &Config) -> bool {
    let top = open_cluster(lattice, config, Side::Top);
    lattice.bottom().iter().all(|&v| !top[v as usize])
}

/// `O'(side)`: the open cluster of `side` together with every *-component of
/// its complement that does not reach the shell of the box `[-1, L+1]^d`.
pub fn filled_cluster(lattice: &BoxLattice, config: &Config, side: Side) -> Vec<bool> {
    fill_holes(lattice, &open_cluster(lattice, config, side))
}

/// Adds to `set` every *-component of its complement that does not meet the
/// shell of the extended box.
pub fn fill_holes(lattice: &BoxLattice, set: &[bool]) -> Vec<bool> {
    let ext = lattice.extended();
    let big = &ext.lattice;
    let mut blocked = vec![false; big.vertex_count()];
    for (v, &inside) in set.iter().enumerate() {
        if inside {
            blocked[ext.embed_vertex(v as u32) as usize] = true;
        }
    }
    let mut outside = vec![false; big.vertex_count()];
    let mut queue = VecDeque::new();
    for w in 0..big.vertex_count() as u32 {
        if ext.restrict_vertex(w).is_none() {
            outside[w as usize] = true;
            queue.push_back(w);
        }
    }
    while let Some(v) = queue.pop_front() {
        big.for_each_star_vertex(v, |w| {
            if !blocked[w as usize] && !outside[w as usize] {
                outside[w as usize] = true;
                queue.push_back(w);
            }
        });
    }
    (0..lattice.vertex_count() as u32)
        .map(|v| set[v as usize] || !outside[ext.embed_vertex(v) as usize])
        .collect()
}

/// Edges of the box with exactly one endpoint in `set`.
pub fn external_boundary_in_box(lattice: &BoxLattice, set: &[bool]) -> EdgeSet {
    EdgeSet::from_sorted(
        lattice
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| set[e.lo as usize] != set[e.hi as usize])
            .map(|(i, _)| EdgeId(i as u32))
            .collect(),
    )
}

/// Edges of `[-1, L+1]^d` with exactly one endpoint in `set` (a subset of the
/// box vertices), as ids of the extended box, ascending.
pub fn external_boundary_full(lattice: &BoxLattice, set: &[bool]) -> Vec<EdgeId> {
    let ext = lattice.extended();
    let big = &ext.lattice;
    let in_set = |w: u32| ext.restrict_vertex(w).is_some_and(|v| set[v as usize]);
    let mut out = Vec::new();
    for (v, &inside) in set.iter().enumerate() {
        if !inside {
            continue;
        }
        let w = ext.embed_vertex(v as u32);
        for &f in big.incident(w) {
            if !in_set(big.other_end(f, w)) {
                out.push(EdgeId(f));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Every path of box edges from T to B uses an edge of `set`.
pub fn separates(lattice: &BoxLattice, set: &EdgeSet) -> bool {
    separates_mask(lattice, &set.to_mask(lattice.edge_count()))
}

fn separates_mask(lattice: &BoxLattice, removed: &[bool]) -> bool {
    let top = reach(lattice, lattice.top(), |e| !removed[e as usize]);
    lattice.bottom().iter().all(|&v| !top[v as usize])
}

/// A minimal separating subset of `set`, pruning greedily in ascending edge
/// order. One pass suffices because supersets of separating sets separate.
pub fn minimal_cut_from(lattice: &BoxLattice, set: &EdgeSet) -> Result<EdgeSet, ConnectivityError> {
    let mut mask = set.to_mask(lattice.edge_count());
    if !separates_mask(lattice, &mask) {
        return Err(ConnectivityError::NotSeparating);
    }
    for e in set.iter() {
        mask[e.index()] = false;
        if !separates_mask(lattice, &mask) {
            mask[e.index()] = true;
        }
    }
    Ok(EdgeSet::from_mask(&mask))
}

/// `separates(C)` holds and fails for `C ∖ {e}` for every member.
pub fn is_minimal_cut(lattice: &BoxLattice, set: &EdgeSet) -> bool {
    separates(lattice, set) && set.iter().all(|e| !separates(lattice, &set.without(e)))
}
