//! Interface, pivotal edges, the separating sets `S⁺`/`S⁻`, and the distances
//! built on them.

use std::collections::VecDeque;

use thiserror::Error;

use crate::connectivity::{
    external_boundary_full, external_boundary_in_box, filled_cluster, label_clusters, ClusterLabels,
    Config,
};
use crate::dynamics::CoupledState;
use crate::edge_set::EdgeSet;
use crate::lattice::{BoxLattice, EdgeId, Side};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObservableError {
    #[error("configuration connects T and B")]
    Connected,
}

/// `I = {e : X(e) = 1, Y(e) = 0}`.
pub fn interface(x: &Config, y: &Config) -> EdgeSet {
    EdgeSet::from_sorted(
        x.bits()
            .iter()
            .zip(y.bits())
            .enumerate()
            .filter(|(_, (&a, &b))| a && !b)
            .map(|(i, _)| EdgeId(i as u32))
            .collect(),
    )
}

pub fn interface_of(state: &CoupledState<'_>) -> EdgeSet {
    interface(state.x(), state.y())
}

/// Edges with one endpoint in `O(T)` and the other in `O(B)`.
pub fn pivotal(lattice: &BoxLattice, y: &Config) -> Result<EdgeSet, ObservableError> {
    let labels = label_clusters(lattice, y);
    if labels.connects_top_bottom() {
        return Err(ObservableError::Connected);
    }
    Ok(pivotal_from_labels(lattice, &labels))
}

pub fn pivotal_from_labels(lattice: &BoxLattice, labels: &ClusterLabels) -> EdgeSet {
    EdgeSet::from_sorted(
        lattice
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                (labels.in_top(e.lo) && labels.in_bottom(e.hi))
                    || (labels.in_top(e.hi) && labels.in_bottom(e.lo))
            })
            .map(|(i, _)| EdgeId(i as u32))
            .collect(),
    )
}

/// Pivotal set of a live state from its maintained labels.
pub fn pivotal_of(state: &CoupledState<'_>) -> EdgeSet {
    EdgeSet::from_sorted(state.pivotal_edges())
}

fn require_disconnected(lattice: &BoxLattice, y: &Config) -> Result<(), ObservableError> {
    if crate::connectivity::disconnected(lattice, y) {
        Ok(())
    } else {
        Err(ObservableError::Connected)
    }
}

/// In-box edges of `∂ext O'(side)`.
pub fn s_side(lattice: &BoxLattice, y: &Config, side: Side) -> Result<EdgeSet, ObservableError> {
    require_disconnected(lattice, y)?;
    Ok(external_boundary_in_box(lattice, &filled_cluster(lattice, y, side)))
}

pub fn s_plus(lattice: &BoxLattice, y: &Config) -> Result<EdgeSet, ObservableError> {
    s_side(lattice, y, Side::Top)
}

pub fn s_minus(lattice: &BoxLattice, y: &Config) -> Result<EdgeSet, ObservableError> {
    s_side(lattice, y, Side::Bottom)
}

/// All of `∂ext O'(side)`, including edges leaving the box, as ids of the
/// extended box `[-1, L+1]^d`.
pub fn full_boundary(lattice: &BoxLattice, y: &Config, side: Side) -> Result<Vec<EdgeId>, ObservableError> {
    require_disconnected(lattice, y)?;
    Ok(external_boundary_full(lattice, &filled_cluster(lattice, y, side)))
}

/// `S⁺ ∩ S⁻`.
pub fn pivotal_via_sets(lattice: &BoxLattice, y: &Config) -> Result<EdgeSet, ObservableError> {
    Ok(s_plus(lattice, y)?.intersection(&s_minus(lattice, y)?))
}

/// Whether `edges` (ids of `lattice`) form one component under *-adjacency.
/// The empty set counts as connected.
pub fn is_star_connected(lattice: &BoxLattice, edges: &[EdgeId]) -> bool {
    star_component_count(lattice, edges) <= 1
}

pub fn star_component_count(lattice: &BoxLattice, edges: &[EdgeId]) -> usize {
    let mut member = vec![false; lattice.edge_count()];
    for e in edges {
        member[e.index()] = true;
    }
    let mut seen = vec![false; lattice.edge_count()];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for &s in edges {
        if seen[s.index()] {
            continue;
        }
        components += 1;
        seen[s.index()] = true;
        queue.push_back(s.0);
        while let Some(e) = queue.pop_front() {
            for &f in lattice.star_row(EdgeId(e)) {
                if member[f as usize] && !seen[f as usize] {
                    seen[f as usize] = true;
                    queue.push_back(f);
                }
            }
        }
    }
    components
}

/// `d(e, Λ^c ∪ P ∖ {e})`.
pub fn isolation_radius(lattice: &BoxLattice, pivotal: &EdgeSet, e: EdgeId) -> f64 {
    lattice.set_distance(e, pivotal.iter().filter(|&f| f != e), true)
}

/// Largest isolation radius over `P`; `None` when `P` is empty.
pub fn max_isolation(lattice: &BoxLattice, pivotal: &EdgeSet) -> Option<f64> {
    pivotal
        .iter()
        .map(|e| isolation_radius(lattice, pivotal, e))
        .fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
}

/// `max_{e ∈ P ∪ I} d(e, Λ^c ∪ P ∖ {e})`; `None` when `P ∪ I` is empty.
pub fn localization_statistic(lattice: &BoxLattice, pivotal: &EdgeSet, interface: &EdgeSet) -> Option<f64> {
    pivotal
        .union(interface)
        .iter()
        .map(|e| isolation_radius(lattice, pivotal, e))
        .fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
}

fn semi_one_way(lattice: &BoxLattice, a: &EdgeSet, b: &EdgeSet, ell: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for e in a.iter().filter(|&e| lattice.distance_to_boundary(e) >= ell) {
        worst = worst.max(lattice.set_distance(e, b.iter(), false));
        if worst == f64::INFINITY {
            break;
        }
    }
    worst
}

/// `d_H^ℓ(A, B)`: the Hausdorff distance that ignores points of either set
/// lying within `ℓ` of `Λ^c`. Points are still matched against the whole
/// other set, so the value is `+∞` when one trimmed set is nonempty and the
/// other set is empty.
pub fn hausdorff_semi(lattice: &BoxLattice, a: &EdgeSet, b: &EdgeSet, ell: f64) -> f64 {
    semi_one_way(lattice, a, b, ell).max(semi_one_way(lattice, b, a, ell))
}

/// Hausdorff distance between `A ∪ Λ^c` and `B ∪ Λ^c`.
pub fn hausdorff_union_boundary(lattice: &BoxLattice, a: &EdgeSet, b: &EdgeSet) -> f64 {
    let one = |a: &EdgeSet, b: &EdgeSet| {
        a.iter()
            .map(|e| lattice.set_distance(e, b.iter(), true))
            .fold(0.0f64, f64::max)
    };
    one(a, b).max(one(b, a))
}
