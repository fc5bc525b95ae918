//! Random access to `X_r`, `Y_r`, `E_r`, `P_r` and `I_r` over a window of
//! recorded history.

use serde::{Deserialize, Serialize};

use crate::clusters::DynamicClusters;
use crate::connectivity::Config;
use crate::dynamics::{replay, History, HistoryError, UpdateEvent};
use crate::edge_set::EdgeSet;
use crate::lattice::{BoxLattice, EdgeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Process {
    X,
    Y,
}

/// What the validators need to know about the past.
pub trait StateHistory {
    /// Inclusive range of times with known states.
    fn window(&self) -> (u64, u64);

    fn is_open(&self, process: Process, e: EdgeId, t: u64) -> Result<bool, HistoryError>;

    /// `E_t`, the edge drawn by update `t`, for `t` in `(lo, hi]`.
    fn updated_edge(&self, t: u64) -> Result<EdgeId, HistoryError>;

    fn check(&self, t: u64) -> Result<(), HistoryError> {
        let (lo, hi) = self.window();
        if t < lo || t > hi {
            Err(HistoryError::OutOfWindow { r: t, lo, hi })
        } else {
            Ok(())
        }
    }
}

/// Per-edge change lists plus the pivotal set at every time of the window.
#[derive(Clone, Debug)]
pub struct Trajectory<'a> {
    lattice: &'a BoxLattice,
    lo: u64,
    hi: u64,
    x0: Config,
    y0: Config,
    changes: [Vec<Vec<(u64, bool)>>; 2],
    updated: Vec<EdgeId>,
    pivotal: Vec<EdgeSet>,
}

impl<'a> Trajectory<'a> {
    /// Built from the recorded history over `[lo, hi]`.
    pub fn from_history(lattice: &'a BoxLattice, history: &History, lo: u64, hi: u64) -> Result<Self, HistoryError> {
        history.check(lo)?;
        history.check(hi)?;
        let (x0, y0) = history.reconstruct(lo)?;
        let events: Vec<UpdateEvent> = history.events_between(lo, hi).copied().collect();
        Ok(Self::from_events(lattice, lo, x0, y0, &events))
    }

    /// `events` must be the updates numbered `lo+1, lo+2, ...` in order.
    pub fn from_events(lattice: &'a BoxLattice, lo: u64, x0: Config, y0: Config, events: &[UpdateEvent]) -> Self {
        let n = lattice.edge_count();
        let mut changes = [vec![Vec::new(); n], vec![Vec::new(); n]];
        let (mut x, mut y) = (x0.clone(), y0.clone());
        let mut dc = DynamicClusters::new(lattice, &y);
        let pivotal_now = |dc: &DynamicClusters| -> EdgeSet {
            EdgeSet::from_sorted(lattice.edge_ids().filter(|&e| dc.joins_top_bottom(lattice, e)).collect())
        };
        let mut pivotal = vec![pivotal_now(&dc)];
        let mut updated = Vec::with_capacity(events.len());
        for (k, ev) in events.iter().enumerate() {
            assert_eq!(ev.t, lo + 1 + k as u64, "events must be consecutive");
            let (bx, by) = (x.is_open(ev.edge), y.is_open(ev.edge));
            replay(&mut x, &mut y, ev);
            let e = ev.edge.index();
            if x.is_open(ev.edge) != bx {
                changes[0][e].push((ev.t, !bx));
            }
            if y.is_open(ev.edge) != by {
                changes[1][e].push((ev.t, !by));
                if by {
                    dc.on_close(lattice, &y, ev.edge);
                } else {
                    dc.on_open(lattice, &y, ev.edge);
                }
                pivotal.push(pivotal_now(&dc));
            } else {
                let last = pivotal.last().expect("nonempty").clone();
                pivotal.push(last);
            }
            updated.push(ev.edge);
        }
        Trajectory {
            lattice,
            lo,
            hi: lo + events.len() as u64,
            x0,
            y0,
            changes,
            updated,
            pivotal,
        }
    }

    pub fn lattice(&self) -> &'a BoxLattice {
        self.lattice
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    fn slot(process: Process) -> usize {
        match process {
            Process::X => 0,
            Process::Y => 1,
        }
    }

    fn state_unchecked(&self, process: Process, e: EdgeId, t: u64) -> bool {
        let list = &self.changes[Self::slot(process)][e.index()];
        let k = list.partition_point(|&(ct, _)| ct <= t);
        if k == 0 {
            match process {
                Process::X => self.x0.is_open(e),
                Process::Y => self.y0.is_open(e),
            }
        } else {
            list[k - 1].1
        }
    }

    /// The whole configuration of a process at time `t`.
    pub fn config(&self, process: Process, t: u64) -> Result<Config, HistoryError> {
        self.check(t)?;
        let bits = self
            .lattice
            .edge_ids()
            .map(|e| self.state_unchecked(process, e, t))
            .collect();
        Ok(Config::from_bits(self.lattice, bits).expect("length matches"))
    }

    pub fn pivotal(&self, t: u64) -> Result<&EdgeSet, HistoryError> {
        self.check(t)?;
        Ok(&self.pivotal[(t - self.lo) as usize])
    }

    pub fn is_pivotal(&self, e: EdgeId, t: u64) -> Result<bool, HistoryError> {
        Ok(self.pivotal(t)?.contains(e))
    }

    /// `X_t(e) = 1` and `Y_t(e) = 0`.
    pub fn in_interface(&self, e: EdgeId, t: u64) -> Result<bool, HistoryError> {
        self.check(t)?;
        Ok(self.state_unchecked(Process::X, e, t) && !self.state_unchecked(Process::Y, e, t))
    }

    pub fn interface(&self, t: u64) -> Result<EdgeSet, HistoryError> {
        self.check(t)?;
        Ok(self
            .lattice
            .edge_ids()
            .filter(|&e| self.state_unchecked(Process::X, e, t) && !self.state_unchecked(Process::Y, e, t))
            .collect())
    }

    /// Times in the window at which `e` changes state in `process`.
    pub fn changes(&self, process: Process, e: EdgeId) -> &[(u64, bool)] {
        &self.changes[Self::slot(process)][e.index()]
    }
}

impl StateHistory for Trajectory<'_> {
    fn window(&self) -> (u64, u64) {
        (self.lo, self.hi)
    }

    fn is_open(&self, process: Process, e: EdgeId, t: u64) -> Result<bool, HistoryError> {
        self.check(t)?;
        Ok(self.state_unchecked(process, e, t))
    }

    fn updated_edge(&self, t: u64) -> Result<EdgeId, HistoryError> {
        if t <= self.lo || t > self.hi {
            return Err(HistoryError::OutOfWindow {
                r: t,
                lo: self.lo + 1,
                hi: self.hi,
            });
        }
        Ok(self.updated[(t - self.lo - 1) as usize])
    }
}
