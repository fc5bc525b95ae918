//! Constructive searches for decreasing space-time paths.
//!
//! Both constructors walk backwards in time: a spatial segment at a fixed time
//! found by breadth-first search, then a time change on the edge where the
//! segment stopped.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::HistoryError;
use crate::edge_set::EdgeSet;
use crate::lattice::{BoxLattice, EdgeId, Side};
use crate::observables::{full_boundary, s_plus};
use crate::stp::path::{SpaceTimePath, TimeEdge};
use crate::stp::trajectory::{Process, StateHistory, Trajectory};
use crate::stp::validate::{is_impatient, is_simple};

/// Rounds of simplification and impatient modification before giving up.
const MAX_STEP2_ROUNDS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StpOutcome {
    /// Ends at the target set at time `s`.
    Reached,
    /// Ends at an edge meeting `∂Λ`.
    BoundaryExit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Construction {
    pub path: SpaceTimePath,
    pub outcome: StpOutcome,
    /// The successive `θ` (or `η`) times, starting with `t`.
    pub times: Vec<u64>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StpError {
    #[error(transparent)]
    Window(#[from] HistoryError),
    #[error("precondition failed at r = {r}: {reason}")]
    Precondition { reason: String, r: u64 },
    #[error("construction claim violated: {0}")]
    ClaimViolated(String),
    #[error("no closed path from edge {edge} at time {t}")]
    NoPath { edge: EdgeId, t: u64 },
}

fn check_times(traj: &Trajectory<'_>, t: u64, s: u64) -> Result<(), StpError> {
    traj.check(s)?;
    traj.check(t)?;
    if s >= t {
        return Err(StpError::Precondition {
            reason: format!("s = {s} is not below t = {t}"),
            r: s,
        });
    }
    Ok(())
}

/// Earliest `r ≥ s` with `ε ∈ P_q` for every `q ∈ [r, τ]`.
fn run_start(traj: &Trajectory<'_>, eps: EdgeId, tau: u64, s: u64) -> Result<u64, HistoryError> {
    let mut r = tau;
    while r > s && traj.is_pivotal(eps, r - 1)? {
        r -= 1;
    }
    Ok(r)
}

/// Shortest *-path from `from` to `to` in the extended box through `member`.
fn ext_path(lattice: &BoxLattice, member: &[bool], from: EdgeId, to: EdgeId) -> Option<Vec<EdgeId>> {
    let ext = &lattice.extended().lattice;
    let mut parent = vec![u32::MAX; ext.edge_count()];
    let mut queue = VecDeque::from([from.0]);
    parent[from.index()] = from.0;
    while let Some(e) = queue.pop_front() {
        if e == to.0 {
            let mut path = vec![to];
            let mut cur = e;
            while cur != from.0 {
                cur = parent[cur as usize];
                path.push(EdgeId(cur));
            }
            path.reverse();
            return Some(path);
        }
        for &f in ext.star_row(EdgeId(e)) {
            if member[f as usize] && parent[f as usize] == u32::MAX {
                parent[f as usize] = e;
                queue.push_back(f);
            }
        }
    }
    None
}

/// A decreasing simple path closed in `Y` from `(e, t)` to `P_s` at time `s`,
/// or to an edge meeting `∂Λ` at a time in `[s, t]`.
///
/// Each round moves at time `τ` through `∂ext O'(T)` to the edge of `P_τ`
/// whose current pivotal run began earliest, then changes time to that start.
/// Runs are cut off at `s`; among equally old edges the current edge is
/// preferred, then the smallest index.
pub fn construct_decreasing_stp(traj: &Trajectory<'_>, e: EdgeId, t: u64, s: u64) -> Result<Construction, StpError> {
    check_times(traj, t, s)?;
    let lattice = traj.lattice();
    if !traj.is_pivotal(e, t)? {
        return Err(StpError::Precondition {
            reason: format!("edge {e} is not pivotal"),
            r: t,
        });
    }
    for r in s..=t {
        if traj.pivotal(r)?.is_empty() {
            return Err(StpError::Precondition {
                reason: "pivotal set is empty".into(),
                r,
            });
        }
    }
    let ext = lattice.extended();
    let mut steps = vec![TimeEdge::new(e, t)];
    let mut times = vec![t];
    let (mut cur, mut tau) = (e, t);
    let outcome = loop {
        let mut best: Option<(u64, EdgeId)> = None;
        for &eps in traj.pivotal(tau)?.as_slice() {
            let r = run_start(traj, eps, tau, s)?;
            let better = match best {
                None => true,
                Some((br, be)) => r < br || (r == br && eps == cur && be != cur),
            };
            if better {
                best = Some((r, eps));
            }
        }
        let (theta, e1) = best.expect("pivotal set checked nonempty");
        if theta >= tau {
            return Err(StpError::ClaimViolated(format!("theta = {theta} is not below tau = {tau}")));
        }
        let y = traj.config(Process::Y, tau)?;
        let boundary = full_boundary(lattice, &y, Side::Top)
            .map_err(|err| StpError::ClaimViolated(format!("at time {tau}: {err}")))?;
        let mut member = vec![false; ext.lattice.edge_count()];
        for f in &boundary {
            member[f.index()] = true;
        }
        let path = ext_path(lattice, &member, ext.embed(cur), ext.embed(e1))
            .ok_or(StpError::NoPath { edge: cur, t: tau })?;
        if let Some(out) = path.iter().position(|&f| ext.restrict(f).is_none()) {
            let inside: Vec<EdgeId> = path[..out].iter().map(|&f| ext.restrict(f).expect("in box")).collect();
            let stop = inside
                .iter()
                .position(|&f| lattice.meets_boundary(f))
                .ok_or_else(|| StpError::ClaimViolated("path left the box without meeting its boundary".into()))?;
            steps.extend(inside[1..=stop].iter().map(|&f| TimeEdge::new(f, tau)));
            break StpOutcome::BoundaryExit;
        }
        steps.extend(path[1..].iter().map(|&f| TimeEdge::new(ext.restrict(f).expect("in box"), tau)));
        steps.push(TimeEdge::new(e1, theta));
        times.push(theta);
        if theta <= s {
            break StpOutcome::Reached;
        }
        cur = e1;
        tau = theta;
    };
    let mut path = SpaceTimePath::new(steps);
    path.normalize();
    let path = simplify(&path, traj, Process::Y)?;
    Ok(Construction { path, outcome, times })
}

/// In-box breadth-first search through `member` from `from`. Stops at the
/// first discovered edge satisfying `target`; otherwise returns the path to the
/// nearest reachable edge meeting `∂Λ`, flagged `false`.
fn search(
    lattice: &BoxLattice,
    member: &EdgeSet,
    from: EdgeId,
    target: impl Fn(EdgeId) -> bool,
) -> Option<(Vec<EdgeId>, bool)> {
    let mut parent = vec![u32::MAX; lattice.edge_count()];
    parent[from.index()] = from.0;
    let mut queue = VecDeque::from([from.0]);
    let mut exit: Option<u32> = None;
    let trace = |parent: &[u32], end: u32| {
        let mut path = vec![EdgeId(end)];
        let mut cur = end;
        while cur != from.0 {
            cur = parent[cur as usize];
            path.push(EdgeId(cur));
        }
        path.reverse();
        path
    };
    while let Some(e) = queue.pop_front() {
        if exit.is_none() && lattice.meets_boundary(EdgeId(e)) {
            exit = Some(e);
        }
        for &f in lattice.star_row(EdgeId(e)) {
            if parent[f as usize] != u32::MAX || !member.contains(EdgeId(f)) {
                continue;
            }
            parent[f as usize] = e;
            if target(EdgeId(f)) {
                return Some((trace(&parent, f), true));
            }
            queue.push_back(f);
        }
    }
    exit.map(|x| (trace(&parent, x), false))
}

/// A decreasing simple impatient path from `(e, t)` to `P_s ∪ I_s ∖ {e}` at
/// time `s`, or to an edge meeting `∂Λ` at a time `≥ s`, `X`-closed-moving
/// except on `e`.
pub fn construct_impatient_stp(traj: &Trajectory<'_>, e: EdgeId, t: u64, s: u64) -> Result<Construction, StpError> {
    check_times(traj, t, s)?;
    let lattice = traj.lattice();
    if !traj.is_pivotal(e, t)? {
        return Err(StpError::Precondition {
            reason: format!("edge {e} is not pivotal"),
            r: t,
        });
    }
    let mut steps = vec![TimeEdge::new(e, t)];
    let mut times = vec![t];
    let (mut cur, mut tau) = (e, t);
    let outcome = loop {
        let y = traj.config(Process::Y, tau)?;
        let cut = s_plus(lattice, &y).map_err(|err| StpError::ClaimViolated(format!("at time {tau}: {err}")))?;
        let before = traj.pivotal(tau - 1)?;
        let iface = traj.interface(tau)?;
        let target = |f: EdgeId| f != e && f != cur && (iface.contains(f) || before.contains(f));
        let found = search(lattice, &cut, cur, target);
        let (path, hit) = found.ok_or(StpError::NoPath { edge: cur, t: tau })?;
        steps.extend(path[1..].iter().map(|&f| TimeEdge::new(f, tau)));
        if !hit {
            break StpOutcome::BoundaryExit;
        }
        let e1 = *path.last().expect("nonempty");
        let mut eta = None;
        for r in (s..tau).rev() {
            if traj.is_open(Process::X, e1, r)? == traj.is_open(Process::Y, e1, r)? {
                eta = Some(r);
                break;
            }
        }
        match eta {
            Some(r) if r > s => {
                if traj.is_open(Process::X, e1, r)? || !traj.is_pivotal(e1, r)? {
                    return Err(StpError::ClaimViolated(format!(
                        "edge {e1} is open in X or not pivotal at eta = {r}"
                    )));
                }
                steps.push(TimeEdge::new(e1, r));
                times.push(r);
                cur = e1;
                tau = r;
            }
            _ => {
                steps.push(TimeEdge::new(e1, s));
                times.push(s);
                break StpOutcome::Reached;
            }
        }
    };
    let mut path = SpaceTimePath::new(steps);
    path.normalize();
    for _ in 0..MAX_STEP2_ROUNDS {
        path = simplify(&path, traj, Process::X)?;
        path = impatient_modify(&path, traj)?;
        if is_simple(&path, traj, Process::X)? && is_impatient(&path, traj)? {
            return Ok(Construction { path, outcome, times });
        }
    }
    Err(StpError::ClaimViolated(format!(
        "no simple impatient path after {MAX_STEP2_ROUNDS} rounds"
    )))
}

/// Removes the time-edges strictly between a visit `i` and the next
/// non-consecutive visit `k` of the same edge whenever the edge stays closed
/// in `process` on `]t_k, t_i]`.
pub fn simplify<H: StateHistory>(stp: &SpaceTimePath, h: &H, process: Process) -> Result<SpaceTimePath, HistoryError> {
    let mut p = stp.clone();
    p.normalize();
    let mut i = 0;
    while i < p.len() {
        let s = p.steps();
        let Some(k) = (i + 2..s.len()).find(|&k| s[k].edge == s[i].edge) else {
            i += 1;
            continue;
        };
        let (lo, hi) = (s[i].t.min(s[k].t), s[i].t.max(s[k].t));
        let mut closed = true;
        for r in lo + 1..=hi {
            if h.is_open(process, s[i].edge, r)? {
                closed = false;
                break;
            }
        }
        if closed {
            let mut steps = p.into_steps();
            steps.drain(i + 1..k);
            p = SpaceTimePath::new(steps);
            p.normalize();
            i = i.saturating_sub(1);
        } else {
            i += 1;
        }
    }
    Ok(p)
}

/// End of the maximal `X`-closed interval of `e` containing `from`, capped at
/// `cap`. When `e` is open at `from` the time just before its first update
/// after `from` is used instead.
fn closed_until<H: StateHistory>(h: &H, e: EdgeId, from: u64, cap: u64) -> Result<u64, HistoryError> {
    if h.is_open(Process::X, e, from)? {
        for r in from + 1..=cap {
            if h.updated_edge(r)? == e {
                return Ok(r - 1);
            }
        }
        return Ok(cap);
    }
    let mut beta = from;
    while beta < cap && !h.is_open(Process::X, e, beta + 1)? {
        beta += 1;
    }
    Ok(beta)
}

/// Moves every non-final time change that is not ended by an update of its
/// edge, by moving in space earlier (when the edge stays closed through the
/// time change) or ending the time change just before the edge opens.
pub fn impatient_modify<H: StateHistory>(stp: &SpaceTimePath, h: &H) -> Result<SpaceTimePath, HistoryError> {
    let mut p = stp.clone();
    p.normalize();
    let mut v = p.into_steps();
    let mut k = 0;
    while k + 2 < v.len() {
        if v[k].edge != v[k + 1].edge || h.updated_edge(v[k + 1].t + 1)? == v[k + 1].edge {
            k += 1;
            continue;
        }
        let (ek, tk, tk1) = (v[k].edge, v[k].t, v[k + 1].t);
        let e2 = v[k + 2].edge;
        let joined = k + 3 < v.len() && v[k + 3].edge == e2;
        let beta = closed_until(h, ek, tk1, tk)?;
        if beta >= tk {
            if joined {
                let t3 = v[k + 3].t;
                v.splice(k + 1..=k + 3, [TimeEdge::new(e2, tk), TimeEdge::new(e2, t3)]);
            } else {
                let t2 = v[k + 2].t;
                v.splice(k + 1..=k + 2, [TimeEdge::new(e2, tk), TimeEdge::new(e2, t2)]);
            }
            k += 1;
        } else {
            let end = if joined { k + 2 } else { k + 1 };
            v.splice(k + 1..=end, [TimeEdge::new(ek, beta), TimeEdge::new(e2, beta)]);
            k += 2;
        }
    }
    let mut p = SpaceTimePath::new(v);
    p.normalize();
    Ok(p)
}
