use serde::{Deserialize, Serialize};

use crate::edge_set::EdgeSet;
use crate::lattice::{BoxLattice, EdgeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeEdge {
    pub edge: EdgeId,
    pub t: u64,
}

impl TimeEdge {
    pub fn new(edge: EdgeId, t: u64) -> Self {
        TimeEdge { edge, t }
    }
}

/// How a time-edge is reached from its predecessor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Start,
    Spatial,
    TimeChange,
}

/// Neighbour relation used for spatial moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adjacency {
    /// Shared endpoint; used by open paths.
    Usual,
    /// `‖m_e − m_f‖_∞ ≤ 1`; used by closed paths.
    Star,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpaceTimePath {
    steps: Vec<TimeEdge>,
}

#[derive(Serialize)]
struct JsonStep {
    edge_index: u32,
    t: u64,
    move_kind: MoveKind,
}

impl SpaceTimePath {
    pub fn new(steps: Vec<TimeEdge>) -> Self {
        SpaceTimePath { steps }
    }

    pub fn from_pairs(pairs: &[(u32, u64)]) -> Self {
        SpaceTimePath {
            steps: pairs.iter().map(|&(e, t)| TimeEdge::new(EdgeId(e), t)).collect(),
        }
    }

    pub fn steps(&self) -> &[TimeEdge] {
        &self.steps
    }

    pub fn into_steps(self) -> Vec<TimeEdge> {
        self.steps
    }

    /// Number of time-edges.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn first(&self) -> Option<TimeEdge> {
        self.steps.first().copied()
    }

    pub fn last(&self) -> Option<TimeEdge> {
        self.steps.last().copied()
    }

    pub fn move_kinds(&self) -> Vec<MoveKind> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if i == 0 {
                    MoveKind::Start
                } else if self.steps[i - 1].edge == s.edge {
                    MoveKind::TimeChange
                } else {
                    MoveKind::Spatial
                }
            })
            .collect()
    }

    pub fn time_change_count(&self) -> usize {
        self.steps.windows(2).filter(|w| w[0].edge == w[1].edge).count()
    }

    /// Drops the second time-edge of every time change, following
    /// `φ(i+1) = φ(i) + 1` or `φ(i) + 2`.
    pub fn space_projection(&self) -> Vec<EdgeId> {
        let n = self.steps.len();
        let m = self.time_change_count();
        let mut out = Vec::with_capacity(n - m);
        let mut phi = 0usize;
        while out.len() < n - m && phi < n {
            out.push(self.steps[phi].edge);
            phi += if phi + 1 < n && self.steps[phi].edge == self.steps[phi + 1].edge {
                2
            } else {
                1
            };
        }
        out
    }

    /// Length of the space projection.
    pub fn length(&self) -> usize {
        self.space_projection().len()
    }

    pub fn support(&self) -> EdgeSet {
        self.steps.iter().map(|s| s.edge).collect()
    }

    /// Every consecutive pair is a time change or a spatial move between
    /// neighbours at equal times.
    pub fn is_well_formed(&self, lattice: &BoxLattice, adjacency: Adjacency) -> bool {
        self.steps.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            a.edge == b.edge
                || (a.t == b.t
                    && match adjacency {
                        Adjacency::Star => lattice.are_star_neighbors(a.edge, b.edge),
                        Adjacency::Usual => lattice.are_neighbors(a.edge, b.edge),
                    })
        })
    }

    pub fn is_decreasing(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].t >= w[1].t)
    }

    pub fn is_increasing(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].t <= w[1].t)
    }

    /// `[{edge_index, t, move_kind}, ...]`.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<JsonStep> = self
            .steps
            .iter()
            .zip(self.move_kinds())
            .map(|(s, k)| JsonStep {
                edge_index: s.edge.0,
                t: s.t,
                move_kind: k,
            })
            .collect();
        serde_json::to_value(rows).expect("plain data serializes")
    }

    /// Removes repeated identical time-edges and shortens runs of three or
    /// more visits of one edge to their first and last entries.
    pub(crate) fn normalize(&mut self) {
        self.steps.dedup();
        let mut out: Vec<TimeEdge> = Vec::with_capacity(self.steps.len());
        for s in self.steps.drain(..) {
            let n = out.len();
            if n >= 2 && out[n - 1].edge == s.edge && out[n - 2].edge == s.edge {
                out[n - 1] = s;
            } else {
                out.push(s);
            }
        }
        self.steps = out;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotonicity_examples() {
        let single = SpaceTimePath::from_pairs(&[(0, 4)]);
        assert!(single.is_decreasing() && single.is_increasing());
        let p = SpaceTimePath::from_pairs(&[(0, 5), (0, 3), (1, 3), (1, 1)]);
        assert!(p.is_decreasing());
        assert!(!SpaceTimePath::from_pairs(&[(0, 1), (0, 2)]).is_decreasing());
    }

    #[test]
    fn projection_drops_one_edge_per_time_change() {
        let p = SpaceTimePath::from_pairs(&[(0, 9), (1, 9), (1, 7), (2, 7), (2, 3), (3, 3)]);
        assert_eq!(p.time_change_count(), 2);
        assert_eq!(p.space_projection(), vec![EdgeId(0), EdgeId(1), EdgeId(2), EdgeId(3)]);
        assert_eq!(p.length(), p.len() - p.time_change_count());
        assert_eq!(p.support().len(), 4);
        assert_eq!(
            p.move_kinds(),
            vec![
                MoveKind::Start,
                MoveKind::Spatial,
                MoveKind::TimeChange,
                MoveKind::Spatial,
                MoveKind::TimeChange,
                MoveKind::Spatial
            ]
        );
    }

    #[test]
    fn json_shape() {
        let p = SpaceTimePath::from_pairs(&[(3, 5), (3, 2)]);
        assert_eq!(
            p.to_json().to_string(),
            r#"[{"edge_index":3,"move_kind":"start","t":5},{"edge_index":3,"move_kind":"time_change","t":2}]"#
        );
    }

    #[test]
    fn well_formedness() {
        let lat = BoxLattice::new(2, 1).unwrap();
        let b = lat.edge_at(&[0, 0], 0).unwrap();
        let t = lat.edge_at(&[0, 1], 0).unwrap();
        // Parallel edges at distance 1 are *-neighbours but share no endpoint.
        let p = SpaceTimePath::new(vec![TimeEdge::new(b, 2), TimeEdge::new(t, 2)]);
        assert!(p.is_well_formed(&lat, Adjacency::Star));
        assert!(!p.is_well_formed(&lat, Adjacency::Usual));
        let q = SpaceTimePath::new(vec![TimeEdge::new(b, 2), TimeEdge::new(t, 1)]);
        assert!(!q.is_well_formed(&lat, Adjacency::Star));
    }

    #[test]
    fn normalize_merges_runs() {
        let mut p = SpaceTimePath::from_pairs(&[(1, 9), (1, 9), (1, 6), (1, 4), (2, 4), (2, 4)]);
        p.normalize();
        assert_eq!(p, SpaceTimePath::from_pairs(&[(1, 9), (1, 4), (2, 4)]));
    }
}
