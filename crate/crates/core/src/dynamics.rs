//! The coupled chain `(X_t, Y_t)` driven by a shared stream of uniform edge
//! choices and Bernoulli coins.
//!
//! Time convention: the state at time `t` is the result of the first `t`
//! updates, and update number `t` draws `(E_t, B_t)`.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clusters::DynamicClusters;
use crate::connectivity::{disconnected, Config};
use crate::lattice::{BoxLattice, EdgeId};

/// Identifier of the generator recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), stream = replica id";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("p must lie strictly between 0 and 1 (got {0})")]
    InvalidProbability(f64),
    #[error("burn-in multiplier must be at least 1 (got {0})")]
    InvalidBurnIn(f64),
    #[error("initial configurations violate the coupling invariants: {0}")]
    InvalidState(String),
}

/// Seeded driving stream. Replicas share the seed and differ by stream id.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::for_replica(seed, 0)
    }

    pub fn for_replica(seed: u64, replica: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replica);
        RngStream {
            rng,
            seed,
            stream: replica,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    #[inline]
    pub fn draw_edge(&mut self, edge_count: usize) -> EdgeId {
        EdgeId(self.rng.random_range(0..edge_count as u32))
    }

    #[inline]
    pub fn draw_coin(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Effect of an update on `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YOutcome {
    Closed,
    Opened,
    Veto,
}

impl YOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            YOutcome::Closed => "closed",
            YOutcome::Opened => "opened",
            YOutcome::Veto => "veto",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateEvent {
    pub t: u64,
    pub edge: EdgeId,
    pub coin: bool,
    pub y_outcome: YOutcome,
}

/// The pair `(X, Y)` with `Y ≤ X` and `T ↮ B` in `Y`.
#[derive(Clone, Debug)]
pub struct CoupledState<'a> {
    lattice: &'a BoxLattice,
    p: f64,
    x: Config,
    y: Config,
    t: u64,
    clusters: DynamicClusters,
}

pub fn check_probability(p: f64) -> Result<(), DynamicsError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(DynamicsError::InvalidProbability(p))
    }
}

impl<'a> CoupledState<'a> {
    /// `Y_0` all closed, `X_0` i.i.d. Bernoulli(`p`).
    pub fn init(lattice: &'a BoxLattice, p: f64, rng: &mut RngStream) -> Result<Self, DynamicsError> {
        check_probability(p)?;
        let bits = (0..lattice.edge_count()).map(|_| rng.draw_coin(p)).collect();
        let x = Config::from_bits(lattice, bits).expect("length matches");
        Self::from_configs(lattice, p, x, Config::all_closed(lattice), 0)
    }

    pub fn from_configs(
        lattice: &'a BoxLattice,
        p: f64,
        x: Config,
        y: Config,
        t: u64,
    ) -> Result<Self, DynamicsError> {
        check_probability(p)?;
        if x.len() != lattice.edge_count() || y.len() != lattice.edge_count() {
            return Err(DynamicsError::InvalidState("configuration length".into()));
        }
        if !y.is_dominated_by(&x) {
            return Err(DynamicsError::InvalidState("Y is not dominated by X".into()));
        }
        if !disconnected(lattice, &y) {
            return Err(DynamicsError::InvalidState("Y connects T and B".into()));
        }
        let clusters = DynamicClusters::new(lattice, &y);
        Ok(CoupledState {
            lattice,
            p,
            x,
            y,
            t,
            clusters,
        })
    }

    pub fn lattice(&self) -> &'a BoxLattice {
        self.lattice
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn x(&self) -> &Config {
        &self.x
    }

    pub fn y(&self) -> &Config {
        &self.y
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn clusters(&self) -> &DynamicClusters {
        &self.clusters
    }

    /// Opening `e` in `Y` would join `T` and `B`.
    #[inline]
    pub fn would_connect(&self, e: EdgeId) -> bool {
        self.clusters.joins_top_bottom(self.lattice, e)
    }

    pub fn step(&mut self, rng: &mut RngStream) -> UpdateEvent {
        let e = rng.draw_edge(self.lattice.edge_count());
        let b = rng.draw_coin(self.p);
        self.apply(e, b)
    }

    /// Applies the update `(E, B) = (e, coin)` as step `t + 1`.
    pub fn apply(&mut self, e: EdgeId, coin: bool) -> UpdateEvent {
        self.t += 1;
        if self.x.is_open(e) != coin {
            self.x.set(e, coin);
        }
        let y_outcome = if !coin {
            if self.y.is_open(e) {
                self.y.set(e, false);
                self.clusters.on_close(self.lattice, &self.y, e);
            }
            YOutcome::Closed
        } else if self.y.is_open(e) {
            YOutcome::Opened
        } else if self.would_connect(e) {
            YOutcome::Veto
        } else {
            self.y.set(e, true);
            self.clusters.on_open(self.lattice, &self.y, e);
            YOutcome::Opened
        };
        UpdateEvent {
            t: self.t,
            edge: e,
            coin,
            y_outcome,
        }
    }

    /// Domination and disconnection, checked from scratch.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.y.is_dominated_by(&self.x) {
            let e = (0..self.x.len())
                .find(|&i| self.y.bits()[i] && !self.x.bits()[i])
                .unwrap_or(0);
            return Err(format!("domination broken at edge {e}"));
        }
        if !disconnected(self.lattice, &self.y) {
            return Err("Y connects T and B".into());
        }
        Ok(())
    }

    /// Pivotal edges of the current `Y` from the maintained labels.
    pub fn pivotal_edges(&self) -> Vec<EdgeId> {
        self.lattice
            .edge_ids()
            .filter(|&e| self.would_connect(e))
            .collect()
    }
}

/// `⌈c_b · N_E · ln N_E⌉`.
pub fn burn_in_steps(edge_count: usize, multiplier: f64) -> u64 {
    let n = edge_count as f64;
    (multiplier * n * n.ln()).ceil() as u64
}

pub fn burn_in(state: &mut CoupledState<'_>, multiplier: f64, rng: &mut RngStream) -> Result<u64, DynamicsError> {
    if !(multiplier >= 1.0) || !multiplier.is_finite() {
        return Err(DynamicsError::InvalidBurnIn(multiplier));
    }
    let steps = burn_in_steps(state.lattice().edge_count(), multiplier);
    for _ in 0..steps {
        state.step(rng);
    }
    Ok(steps)
}

pub trait Observer {
    fn observe(&mut self, state: &CoupledState<'_>) -> Result<(), String>;
}

impl<F> Observer for F
where
    F: FnMut(&CoupledState<'_>) -> Result<(), String>,
{
    fn observe(&mut self, state: &CoupledState<'_>) -> Result<(), String> {
        self(state)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Observers fire when `t` is a multiple of this; 0 disables them.
    pub cadence: u64,
    /// Invariants are checked when `t` is a multiple of this; 0 disables.
    pub check_every: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub steps: u64,
    pub closed: u64,
    pub opened: u64,
    pub vetoed: u64,
    pub observations: u64,
    pub invariant_checks: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("run aborted at step {step} (seed {seed}, stream {stream}): {message}")]
pub struct RunError {
    pub step: u64,
    pub seed: u64,
    pub stream: u64,
    pub message: String,
}

pub fn run(
    state: &mut CoupledState<'_>,
    n_steps: u64,
    rng: &mut RngStream,
    options: RunOptions,
    observers: &mut [&mut dyn Observer],
    mut history: Option<&mut History>,
) -> Result<RunSummary, RunError> {
    let mut summary = RunSummary::default();
    let fail = |step: u64, message: String, rng: &RngStream| RunError {
        step,
        seed: rng.seed(),
        stream: rng.stream(),
        message,
    };
    for _ in 0..n_steps {
        let ev = state.step(rng);
        summary.steps += 1;
        match ev.y_outcome {
            YOutcome::Closed => summary.closed += 1,
            YOutcome::Opened => summary.opened += 1,
            YOutcome::Veto => summary.vetoed += 1,
        }
        if let Some(h) = history.as_deref_mut() {
            h.record(state, &ev);
        }
        if options.check_every > 0 && ev.t % options.check_every == 0 {
            summary.invariant_checks += 1;
            state.check_invariants().map_err(|m| fail(ev.t, m, rng))?;
        }
        if options.cadence > 0 && ev.t % options.cadence == 0 {
            summary.observations += 1;
            for obs in observers.iter_mut() {
                obs.observe(state).map_err(|m| fail(ev.t, m, rng))?;
            }
        }
    }
    Ok(summary)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HistoryError {
    #[error("step {r} outside the retained window [{lo}, {hi}]")]
    OutOfWindow { r: u64, lo: u64, hi: u64 },
}

#[derive(Clone, Debug)]
struct Snapshot {
    t: u64,
    x: Config,
    y: Config,
}

/// Recent events plus periodic snapshots, enough to rebuild `(X_r, Y_r)` for
/// every `r` in the window.
#[derive(Clone, Debug)]
pub struct History {
    window: u64,
    cadence: u64,
    now: u64,
    snapshots: VecDeque<Snapshot>,
    events: VecDeque<UpdateEvent>,
}

impl History {
    /// Retains at least the last `window` steps; snapshots every `cadence` steps.
    pub fn new(state: &CoupledState<'_>, window: u64, cadence: u64) -> Self {
        let cadence = cadence.max(1);
        History {
            window,
            cadence,
            now: state.t(),
            snapshots: VecDeque::from([Snapshot {
                t: state.t(),
                x: state.x().clone(),
                y: state.y().clone(),
            }]),
            events: VecDeque::new(),
        }
    }

    pub fn record(&mut self, state: &CoupledState<'_>, event: &UpdateEvent) {
        assert_eq!(event.t, self.now + 1, "events must be recorded in order");
        self.events.push_back(*event);
        self.now = event.t;
        if self.now % self.cadence == 0 {
            self.snapshots.push_back(Snapshot {
                t: self.now,
                x: state.x().clone(),
                y: state.y().clone(),
            });
        }
        let keep_from = self.now.saturating_sub(self.window);
        while self.snapshots.len() >= 2 && self.snapshots[1].t <= keep_from {
            self.snapshots.pop_front();
        }
        let lo = self.snapshots[0].t;
        while self.events.front().is_some_and(|e| e.t <= lo) {
            self.events.pop_front();
        }
    }

    /// Earliest reconstructable step.
    pub fn earliest(&self) -> u64 {
        self.snapshots[0].t
    }

    pub fn latest(&self) -> u64 {
        self.now
    }

    pub fn snapshot_cadence(&self) -> u64 {
        self.cadence
    }

    pub fn check(&self, r: u64) -> Result<(), HistoryError> {
        if r < self.earliest() || r > self.now {
            Err(HistoryError::OutOfWindow {
                r,
                lo: self.earliest(),
                hi: self.now,
            })
        } else {
            Ok(())
        }
    }

    /// The update numbered `t`, for `t` in `(earliest, latest]`.
    pub fn event(&self, t: u64) -> Option<&UpdateEvent> {
        let first = self.events.front()?.t;
        if t < first {
            return None;
        }
        self.events.get((t - first) as usize)
    }

    /// Updates numbered `lo+1 ..= hi`.
    pub fn events_between(&self, lo: u64, hi: u64) -> impl Iterator<Item = &UpdateEvent> {
        self.events.iter().filter(move |e| e.t > lo && e.t <= hi)
    }

    pub fn reconstruct(&self, r: u64) -> Result<(Config, Config), HistoryError> {
        self.check(r)?;
        let snap = self
            .snapshots
            .iter()
            .rev()
            .find(|s| s.t <= r)
            .expect("window check guarantees a snapshot");
        let (mut x, mut y) = (snap.x.clone(), snap.y.clone());
        for ev in self.events_between(snap.t, r) {
            replay(&mut x, &mut y, ev);
        }
        Ok((x, y))
    }
}

/// Applies a recorded update without consulting connectivity.
pub fn replay(x: &mut Config, y: &mut Config, ev: &UpdateEvent) {
    x.set(ev.edge, ev.coin);
    match ev.y_outcome {
        YOutcome::Closed => y.set(ev.edge, false),
        YOutcome::Opened => y.set(ev.edge, true),
        YOutcome::Veto => {}
    }
}

/// Header of the event-log dump.
pub const EVENT_LOG_HEADER: &str = "t,edge_index,coin,y_outcome";

/// Writes `t,edge_index,coin,y_outcome` lines after a header.
pub fn write_event_log<'e, W: Write>(
    mut w: W,
    events: impl IntoIterator<Item = &'e UpdateEvent>,
) -> io::Result<()> {
    writeln!(w, "{EVENT_LOG_HEADER}")?;
    for e in events {
        writeln!(w, "{},{},{},{}", e.t, e.edge.0, u8::from(e.coin), e.y_outcome.as_str())?;
    }
    Ok(())
}
