//! Direct evaluations of the path predicates, one time step at a time.
//!
//! These deliberately share no logic with the constructors: every predicate is
//! read off the definitions through point queries on a [`StateHistory`].

use serde::Serialize;

use crate::connectivity::Config;
use crate::dynamics::HistoryError;
use crate::lattice::{BoxLattice, EdgeId};
use crate::observables::{interface, pivotal};
use crate::stp::path::{Adjacency, SpaceTimePath};
use crate::stp::trajectory::{Process, StateHistory};

fn closed_on<H: StateHistory>(h: &H, process: Process, e: EdgeId, a: u64, b: u64) -> Result<bool, HistoryError> {
    for t in a.min(b)..=a.max(b) {
        if h.is_open(process, e, t)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every visited time-edge is closed and every time change runs through
/// closed states only.
pub fn is_closed_in<H: StateHistory>(stp: &SpaceTimePath, h: &H, process: Process) -> Result<bool, HistoryError> {
    let s = stp.steps();
    for st in s {
        if h.is_open(process, st.edge, st.t)? {
            return Ok(false);
        }
    }
    for w in s.windows(2) {
        if w[0].edge == w[1].edge && !closed_on(h, process, w[0].edge, w[0].t, w[1].t)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// For non-consecutive visits `i, j` of one edge with `t_i < t_j`, the edge is
/// open at some time in `]t_i, t_j]`.
pub fn is_simple<H: StateHistory>(stp: &SpaceTimePath, h: &H, process: Process) -> Result<bool, HistoryError> {
    let s = stp.steps();
    for i in 0..s.len() {
        for j in i + 2..s.len() {
            // Equal times impose nothing.
            if s[i].edge != s[j].edge || s[i].t == s[j].t {
                continue;
            }
            let (a, b) = (s[i].t.min(s[j].t), s[i].t.max(s[j].t));
            let mut opened = false;
            for t in a + 1..=b {
                if h.is_open(process, s[i].edge, t)? {
                    opened = true;
                    break;
                }
            }
            if !opened {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Every time change except a final one ends on an edge updated right after:
/// `e_i = e_{i+1} ⇒ E_{t_{i+1}+1} = e_{i+1}` for `i ≤ n − 2` (1-based).
pub fn is_impatient<H: StateHistory>(stp: &SpaceTimePath, h: &H) -> Result<bool, HistoryError> {
    let s = stp.steps();
    for i in 0..s.len().saturating_sub(2) {
        if s[i].edge == s[i + 1].edge && h.updated_edge(s[i + 1].t + 1)? != s[i + 1].edge {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every spatial move leaves from an edge closed in `X`, except moves leaving
/// from `except`.
pub fn is_x_closed_moving<H: StateHistory>(
    stp: &SpaceTimePath,
    h: &H,
    except: Option<EdgeId>,
) -> Result<bool, HistoryError> {
    for w in stp.steps().windows(2) {
        if w[0].edge != w[1].edge && Some(w[0].edge) != except && h.is_open(Process::X, w[0].edge, w[0].t)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A configuration assembled from point queries.
pub fn config_at<H: StateHistory>(
    lattice: &BoxLattice,
    h: &H,
    process: Process,
    t: u64,
) -> Result<Config, HistoryError> {
    let bits = lattice
        .edge_ids()
        .map(|e| h.is_open(process, e, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Config::from_bits(lattice, bits).expect("length matches"))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub well_formed: bool,
    pub starts_at_origin: bool,
    pub decreasing: bool,
    pub simple: bool,
    /// Closed in `Y` for the pivotal construction, impatient for the other.
    pub closed_or_impatient: bool,
    /// Always true for the pivotal construction.
    pub x_closed_moving: bool,
    pub endpoint: bool,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.well_formed
            && self.starts_at_origin
            && self.decreasing
            && self.simple
            && self.closed_or_impatient
            && self.x_closed_moving
            && self.endpoint
    }
}

fn pivotal_at<H: StateHistory>(lattice: &BoxLattice, h: &H, t: u64) -> Result<crate::EdgeSet, HistoryError> {
    let y = config_at(lattice, h, Process::Y, t)?;
    Ok(pivotal(lattice, &y).unwrap_or_default())
}

/// Checks a path claimed to join `(e, t)` to `P_s` at time `s`, or to an edge
/// meeting `∂Λ` at a time in `[s, t]`, decreasing, simple and closed in `Y`.
pub fn validate_pivotal_path<H: StateHistory>(
    lattice: &BoxLattice,
    h: &H,
    stp: &SpaceTimePath,
    e: EdgeId,
    t: u64,
    s: u64,
) -> Result<Verdict, HistoryError> {
    let (Some(first), Some(last)) = (stp.first(), stp.last()) else {
        return Ok(Verdict::default());
    };
    let endpoint = (last.t == s && pivotal_at(lattice, h, s)?.contains(last.edge))
        || (lattice.meets_boundary(last.edge) && last.t >= s && last.t <= t);
    Ok(Verdict {
        well_formed: stp.is_well_formed(lattice, Adjacency::Star),
        starts_at_origin: first.edge == e && first.t == t,
        decreasing: stp.is_decreasing(),
        simple: is_simple(stp, h, Process::Y)?,
        closed_or_impatient: is_closed_in(stp, h, Process::Y)?,
        x_closed_moving: true,
        endpoint,
    })
}

/// Checks a path claimed to join `(e, t)` to `P_s ∪ I_s ∖ {e}` at time `s`, or
/// to an edge meeting `∂Λ` at a time `≥ s`: decreasing, simple in `X`,
/// impatient and `X`-closed-moving except on `e`.
pub fn validate_impatient_path<H: StateHistory>(
    lattice: &BoxLattice,
    h: &H,
    stp: &SpaceTimePath,
    e: EdgeId,
    t: u64,
    s: u64,
) -> Result<Verdict, HistoryError> {
    let (Some(first), Some(last)) = (stp.first(), stp.last()) else {
        return Ok(Verdict::default());
    };
    let at_target = last.t == s && last.edge != e && {
        let x = config_at(lattice, h, Process::X, s)?;
        let y = config_at(lattice, h, Process::Y, s)?;
        interface(&x, &y).contains(last.edge) || pivotal(lattice, &y).unwrap_or_default().contains(last.edge)
    };
    let endpoint = at_target || (lattice.meets_boundary(last.edge) && last.t >= s && last.t <= t);
    Ok(Verdict {
        well_formed: stp.is_well_formed(lattice, Adjacency::Star),
        starts_at_origin: first.edge == e && first.t == t,
        decreasing: stp.is_decreasing(),
        simple: is_simple(stp, h, Process::X)?,
        closed_or_impatient: is_impatient(stp, h)?,
        x_closed_moving: is_x_closed_moving(stp, h, Some(e))?,
        endpoint,
    })
}
