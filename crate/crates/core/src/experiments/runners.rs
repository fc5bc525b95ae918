use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::config::{ExperimentConfig, ExperimentKind};
use super::stats::{exceedance, fit_envelope, mean, quantile, tail_curve, wilson};
use super::{Cell, ExperimentError, Row};
use crate::dynamics::{burn_in, CoupledState, History, RngStream, UpdateEvent};
use crate::edge_set::EdgeSet;
use crate::lattice::{alpha, BoxLattice, EdgeId};
use crate::observables::{
    hausdorff_semi, interface_of, localization_statistic, max_isolation, pivotal_of, s_minus, s_plus,
};
use crate::stp::{
    construct_decreasing_stp, construct_impatient_stp, validate_impatient_path, validate_pivotal_path, Construction,
    StpError, StpOutcome, Trajectory, Verdict,
};

/// Failure records kept in a summary.
const MAX_FORENSICS: usize = 20;

pub(super) struct RunResult {
    pub rows: Vec<Row>,
    /// `|P|` at each measurement, one stream per replica.
    pub pivotal_counts: Vec<Vec<f64>>,
    pub summary: Map<String, Value>,
}

/// A burnt-in chain with its stream and a pivotal set refreshed only when
/// the cluster structure changes.
struct Chain<'a> {
    state: CoupledState<'a>,
    rng: RngStream,
    pivotal: EdgeSet,
    version: Option<u64>,
}

impl<'a> Chain<'a> {
    fn start(cfg: &ExperimentConfig, lattice: &'a BoxLattice, replica: u64) -> Result<Self, ExperimentError> {
        let mut rng = RngStream::for_replica(cfg.seed, replica);
        let mut state = CoupledState::init(lattice, cfg.p, &mut rng)?;
        burn_in(&mut state, cfg.burn_in, &mut rng)?;
        Ok(Chain {
            state,
            rng,
            pivotal: EdgeSet::new(),
            version: None,
        })
    }

    fn step(&mut self) -> UpdateEvent {
        self.state.step(&mut self.rng)
    }

    fn advance(&mut self, n: u64) {
        for _ in 0..n {
            self.step();
        }
    }

    fn pivotal(&mut self) -> &EdgeSet {
        let v = self.state.clusters().structure_version();
        if self.version != Some(v) {
            self.pivotal = pivotal_of(&self.state);
            self.version = Some(v);
        }
        &self.pivotal
    }

    fn prefix(&self, replica: u64, sample: u64) -> Row {
        vec![
            replica.into(),
            sample.into(),
            self.state.t().into(),
            self.rng.position().into(),
        ]
    }
}

fn nan_if_none(v: Option<f64>) -> Cell {
    Cell::Float(v.unwrap_or(f64::NAN))
}

fn to_value<T: serde::Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("summary data serializes")
}

fn per_replica<T, F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(u64) -> Result<T, ExperimentError> + Send + Sync,
{
    (0..cfg.replicas).into_par_iter().map(f).collect()
}

struct Sampled {
    rows: Vec<Row>,
    counts: Vec<Vec<f64>>,
}

/// Burn in, then measure every `cadence` steps.
fn sample_replicas<F>(cfg: &ExperimentConfig, lattice: &BoxLattice, measure: F) -> Result<Sampled, ExperimentError>
where
    F: Fn(&mut Chain<'_>) -> Vec<Cell> + Sync,
{
    let parts = per_replica(cfg, |r| {
        let mut chain = Chain::start(cfg, lattice, r)?;
        let mut rows = Vec::with_capacity(cfg.samples as usize);
        let mut counts = Vec::with_capacity(cfg.samples as usize);
        for i in 0..cfg.samples {
            chain.advance(cfg.cadence);
            let mut row = chain.prefix(r, i);
            counts.push(chain.pivotal().len() as f64);
            row.extend(measure(&mut chain));
            rows.push(row);
        }
        Ok((rows, counts))
    })?;
    let mut out = Sampled {
        rows: Vec::new(),
        counts: Vec::new(),
    };
    for (rows, counts) in parts {
        out.rows.extend(rows);
        out.counts.push(counts);
    }
    Ok(out)
}

pub(super) fn run(cfg: &ExperimentConfig, lattice: &BoxLattice) -> Result<RunResult, ExperimentError> {
    match cfg.experiment {
        ExperimentKind::Isolation => isolation(cfg, lattice),
        ExperimentKind::Localization => localization(cfg, lattice),
        ExperimentKind::Speed => speed(cfg, lattice),
        ExperimentKind::EmptyPivotal => empty_pivotal(cfg, lattice),
        ExperimentKind::StpValidity => stp_validity(cfg, lattice),
    }
}

fn log_volume(lattice: &BoxLattice) -> f64 {
    (lattice.vertex_count() as f64).ln()
}

fn isolation(cfg: &ExperimentConfig, lattice: &BoxLattice) -> Result<RunResult, ExperimentError> {
    let sampled = sample_replicas(cfg, lattice, |chain| {
        let iface = interface_of(&chain.state).len();
        let p = chain.pivotal();
        vec![
            p.len().into(),
            iface.into(),
            p.is_empty().into(),
            nan_if_none(max_isolation(lattice, p)),
        ]
    })?;
    let values: Vec<f64> = sampled.rows.iter().map(|r| r[7].as_f64().unwrap_or(f64::NAN)).collect();
    let empties = values.iter().filter(|v| v.is_nan()).count() as u64;
    let base = alpha(cfg.d) as f64 * (1.0 - cfg.p);
    let reference: Vec<Value> = cfg
        .ell_grid
        .iter()
        .map(|&l| json!({"threshold": l, "value": base.powf(l / (2.0 * cfg.d as f64))}))
        .collect();
    let at_4 = 4.0 * log_volume(lattice);
    let mut summary = Map::new();
    summary.insert("tail".into(), to_value(tail_curve(&values, &cfg.ell_grid)));
    summary.insert("reference_curve".into(), Value::Array(reference));
    summary.insert("tail_at_4_ln_volume".into(), to_value(&tail_curve(&values, &[at_4])[0]));
    summary.insert("empty_fraction".into(), to_value(wilson(empties, values.len() as u64)));
    Ok(RunResult {
        rows: sampled.rows,
        pivotal_counts: sampled.counts,
        summary,
    })
}

/// `max_{e ∈ I} max(d(e, S⁺), d(e, S⁻))`, the cut-distance proxy.
fn proxy_cut_distance(lattice: &BoxLattice, iface: &EdgeSet, plus: &EdgeSet, minus: &EdgeSet) -> Option<f64> {
    iface
        .iter()
        .map(|e| {
            let a = lattice.set_distance(e, plus.iter(), false);
            let b = lattice.set_distance(e, minus.iter(), false);
            a.max(b)
        })
        .reduce(f64::max)
}

fn quantile_triple(values: &[f64]) -> Value {
    json!({
        "p50": to_value(quantile(values, 0.50)),
        "p90": to_value(quantile(values, 0.90)),
        "p99": to_value(quantile(values, 0.99)),
    })
}

fn localization(cfg: &ExperimentConfig, lattice: &BoxLattice) -> Result<RunResult, ExperimentError> {
    let sampled = sample_replicas(cfg, lattice, |chain| {
        let iface = interface_of(&chain.state);
        let y = chain.state.y().clone();
        let p = chain.pivotal();
        let plus = s_plus(lattice, &y).expect("Y is disconnected");
        let minus = s_minus(lattice, &y).expect("Y is disconnected");
        vec![
            p.len().into(),
            iface.len().into(),
            (p.is_empty() && iface.is_empty()).into(),
            nan_if_none(localization_statistic(lattice, p, &iface)),
            nan_if_none(proxy_cut_distance(lattice, &iface, &plus, &minus)),
            plus.len().into(),
        ]
    })?;
    let col = |i: usize| -> Vec<f64> {
        sampled
            .rows
            .iter()
            .map(|r| r[i].as_f64().unwrap_or(f64::NAN))
            .collect()
    };
    let (stat, proxy) = (col(7), col(8));
    let empties = sampled.rows.iter().filter(|r| r[6] == Cell::Bool(true)).count() as u64;
    let lv = log_volume(lattice);
    let scaled = |f: f64| -> Vec<f64> { cfg.ell_grid.iter().map(|c| c * f).collect() };
    let mut summary = Map::new();
    summary.insert("quantiles".into(), quantile_triple(&stat));
    summary.insert("tail_log".into(), to_value(tail_curve(&stat, &scaled(lv))));
    summary.insert("tail_log2".into(), to_value(tail_curve(&stat, &scaled(lv * lv))));
    summary.insert("proxy_quantiles".into(), quantile_triple(&proxy));
    summary.insert("empty_fraction".into(), to_value(wilson(empties, stat.len() as u64)));
    Ok(RunResult {
        rows: sampled.rows,
        pivotal_counts: sampled.counts,
        summary,
    })
}

fn empty_pivotal(cfg: &ExperimentConfig, lattice: &BoxLattice) -> Result<RunResult, ExperimentError> {
    let sampled = sample_replicas(cfg, lattice, |chain| {
        let iface = interface_of(&chain.state).len();
        let p = chain.pivotal();
        vec![p.len().into(), iface.into(), p.is_empty().into()]
    })?;
    let empties = sampled.counts.iter().flatten().filter(|&&c| c == 0.0).count() as u64;
    let total = sampled.counts.iter().map(Vec::len).sum::<usize>() as u64;
    let mut summary = Map::new();
    summary.insert("empty_fraction".into(), to_value(wilson(empties, total)));
    Ok(RunResult {
        rows: sampled.rows,
        pivotal_counts: sampled.counts,
        summary,
    })
}

/// `⌈c · N_E · ln N_E⌉`, at least 1.
pub(crate) fn union_window(edge_count: usize, c: f64) -> u64 {
    let n = edge_count as f64;
    ((c * n * n.ln()).ceil() as u64).max(1)
}

struct SpeedWindow {
    row: Row,
    /// `d_H^0(P_t, P_{t+s})` at each configured lag.
    lag_values: Vec<f64>,
    /// `max_s d_H^0(P_t, P_{t+s})` for the tail curve.
    d_h_max: f64,
    d_h_max_trimmed: f64,
    d_h_union: f64,
    pivotal_count: f64,
}

fn speed_window(chain: &mut Chain<'_>, cfg: &ExperimentConfig, replica: u64, index: u64, w: u64) -> SpeedWindow {
    let lattice = chain.state.lattice();
    let n = lattice.edge_count() as u64;
    let lv = log_volume(lattice);
    let trim = 2.0 * cfg.d as f64 * lv;
    let union_trim = trim * cfg.window_c;
    chain.advance(cfg.cadence);
    let mut past = chain.pivotal().clone();
    for _ in 0..w {
        chain.step();
        let p = chain.pivotal();
        if !p.is_subset(&past) {
            past = past.union(p);
        }
    }
    let t = chain.state.t();
    let position = chain.rng.position();
    let p_t = chain.pivotal().clone();
    let mut future = p_t.clone();
    let (mut best, mut best_s, mut best_trimmed) = (0.0f64, 0u64, 0.0f64);
    let mut lag_values = Vec::with_capacity(cfg.lags.len());
    let (mut cached_version, mut cached) = (chain.version, (0.0, 0.0));
    for s in 1..=n.max(w) {
        chain.step();
        let version = chain.state.clusters().structure_version();
        let p = chain.pivotal();
        if s <= w && !p.is_subset(&future) {
            future = future.union(p);
        }
        if s <= n {
            if cached_version != Some(version) {
                cached = (hausdorff_semi(lattice, &p_t, p, 0.0), hausdorff_semi(lattice, &p_t, p, trim));
                cached_version = Some(version);
            }
            if cached.0 > best {
                best = cached.0;
                best_s = s;
            }
            best_trimmed = best_trimmed.max(cached.1);
            if cfg.lags.contains(&s) {
                lag_values.push(cached.0);
            }
        }
    }
    // With no change in `P` the maximum is attained at the first lag.
    if best_s == 0 {
        best_s = 1;
    }
    let d_h_union = hausdorff_semi(lattice, &past, &future, 0.0);
    let d_h_union_trimmed = hausdorff_semi(lattice, &past, &future, union_trim);
    let row = vec![
        replica.into(),
        index.into(),
        t.into(),
        position.into(),
        p_t.len().into(),
        best.into(),
        best_s.into(),
        best_trimmed.into(),
        d_h_union.into(),
        d_h_union_trimmed.into(),
        past.len().into(),
        future.len().into(),
    ];
    SpeedWindow {
        row,
        lag_values,
        d_h_max: best,
        d_h_max_trimmed: best_trimmed,
        d_h_union,
        pivotal_count: p_t.len() as f64,
    }
}

fn speed(cfg: &ExperimentConfig, lattice: &BoxLattice) -> Result<RunResult, ExperimentError> {
    let w = union_window(lattice.edge_count(), cfg.window_c);
    let lags: Vec<u64> = cfg.lags.iter().copied().filter(|&s| s <= lattice.edge_count() as u64).collect();
    let mut cfg_lags = cfg.clone();
    cfg_lags.lags = lags.clone();
    let parts = per_replica(cfg, |r| {
        let mut chain = Chain::start(&cfg_lags, lattice, r)?;
        Ok((0..cfg.samples)
            .map(|i| speed_window(&mut chain, &cfg_lags, r, i, w))
            .collect::<Vec<_>>())
    })?;
    let pivotal_counts = parts
        .iter()
        .map(|ws| ws.iter().map(|w| w.pivotal_count).collect())
        .collect();
    let windows: Vec<SpeedWindow> = parts.into_iter().flatten().collect();
    let lv = log_volume(lattice);
    let threshold = 2.0 * cfg.d as f64 * lv;
    let union_threshold = threshold * cfg.window_c;
    let maxima: Vec<f64> = windows.iter().map(|w| w.d_h_max).collect();
    let trimmed: Vec<f64> = windows.iter().map(|w| w.d_h_max_trimmed).collect();
    let unions: Vec<f64> = windows.iter().map(|w| w.d_h_union).collect();
    let lag_curve: Vec<Value> = lags
        .iter()
        .enumerate()
        .map(|(k, &lag)| {
            let values: Vec<f64> = windows.iter().map(|w| w.lag_values[k]).collect();
            let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            json!({
                "lag": lag,
                "mean": to_value(mean(&finite)),
                "infinite": values.len() - finite.len(),
                "exceed": to_value(exceedance(&values, threshold)),
            })
        })
        .collect();
    let mut summary = Map::new();
    summary.insert("threshold".into(), json!(threshold));
    summary.insert("exceed".into(), to_value(exceedance(&maxima, threshold)));
    summary.insert("exceed_trimmed".into(), to_value(exceedance(&trimmed, threshold)));
    summary.insert("union_threshold".into(), json!(union_threshold));
    summary.insert("union_exceed".into(), to_value(exceedance(&unions, union_threshold)));
    summary.insert("tail".into(), to_value(tail_curve(&maxima, &cfg.ell_grid)));
    summary.insert("lag_curve".into(), Value::Array(lag_curve));
    summary.insert("window".into(), json!(w));
    Ok(RunResult {
        pivotal_counts,
        rows: windows.into_iter().map(|w| w.row).collect(),
        summary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Constructor {
    Decreasing,
    Impatient,
}

impl Constructor {
    fn as_str(self) -> &'static str {
        match self {
            Constructor::Decreasing => "decreasing",
            Constructor::Impatient => "impatient",
        }
    }
}

enum Status {
    Pass,
    Fail(String),
    /// Grouping key and detail.
    Skipped(&'static str, String),
}

fn failed_checks(v: &Verdict) -> String {
    let checks = [
        ("well_formed", v.well_formed),
        ("starts_at_origin", v.starts_at_origin),
        ("decreasing", v.decreasing),
        ("simple", v.simple),
        ("closed_or_impatient", v.closed_or_impatient),
        ("x_closed_moving", v.x_closed_moving),
        ("endpoint", v.endpoint),
    ];
    let bad: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    format!("validator rejected: {}", bad.join(", "))
}

struct Trial {
    row: Row,
    constructor: Constructor,
    status: Status,
    forensics: Option<Value>,
}

/// Runs one constructor and its validator over the trajectory.
#[allow(clippy::too_many_arguments)]
fn stp_trial(
    traj: &Trajectory<'_>,
    history: &History,
    which: Constructor,
    e: EdgeId,
    t: u64,
    s: u64,
    prefix: &[Cell],
    position: u128,
) -> Trial {
    let lattice = traj.lattice();
    let built = match which {
        Constructor::Decreasing => construct_decreasing_stp(traj, e, t, s),
        Constructor::Impatient => construct_impatient_stp(traj, e, t, s),
    };
    let (status, construction): (Status, Option<&Construction>) = match &built {
        Ok(c) => {
            let verdict = match which {
                Constructor::Decreasing => validate_pivotal_path(lattice, traj, &c.path, e, t, s),
                Constructor::Impatient => validate_impatient_path(lattice, traj, &c.path, e, t, s),
            };
            let status = match verdict {
                Ok(v) if v.passed() => Status::Pass,
                Ok(v) => Status::Fail(failed_checks(&v)),
                Err(err) => Status::Fail(format!("validator could not read history: {err}")),
            };
            (status, Some(c))
        }
        Err(StpError::Precondition { reason, r }) => (
            Status::Skipped("precondition", format!("precondition at r = {r}: {reason}")),
            None,
        ),
        Err(StpError::Window(err)) => (Status::Skipped("window", format!("window: {err}")), None),
        Err(err) => (Status::Fail(err.to_string()), None),
    };
    let (word, reason) = match &status {
        Status::Pass => ("pass", String::new()),
        Status::Fail(m) => ("fail", m.clone()),
        Status::Skipped(_, m) => ("skipped", m.clone()),
    };
    let outcome = construction.map_or("", |c| match c.outcome {
        StpOutcome::Reached => "reached",
        StpOutcome::BoundaryExit => "boundary_exit",
    });
    let mut row: Row = prefix.to_vec();
    row.extend([
        Cell::from(which.as_str()),
        word.into(),
        outcome.into(),
        construction.map_or(0, |c| c.path.len()).into(),
        construction.map_or(0, |c| c.path.time_change_count()).into(),
        construction.map_or(0, |c| c.path.length()).into(),
        position.into(),
        reason.clone().into(),
    ]);
    let forensics = matches!(status, Status::Fail(_)).then(|| {
        let events: Vec<&UpdateEvent> = history.events_between(s, t).collect();
        json!({
            "constructor": which.as_str(),
            "t": t,
            "s": s,
            "edge": e.0,
            "reason": reason,
            "path": construction.map(|c| c.path.to_json()),
            "events": to_value(events),
        })
    });
    Trial {
        row,
        constructor: which,
        status,
        forensics,
    }
}

fn stp_validity(cfg: &ExperimentConfig, lattice: &BoxLattice) -> Result<RunResult, ExperimentError> {
    let n = lattice.edge_count() as u64;
    let lookback = cfg.max_lookback.max(1);
    let parts = per_replica(cfg, |r| {
        let mut chain = Chain::start(cfg, lattice, r)?;
        let mut history = History::new(&chain.state, lookback + n, n);
        let record = |chain: &mut Chain<'_>, history: &mut History, steps: u64| {
            for _ in 0..steps {
                let ev = chain.step();
                history.record(&chain.state, &ev);
            }
        };
        record(&mut chain, &mut history, lookback);
        let mut trials = Vec::new();
        let mut counts = Vec::new();
        for i in 0..cfg.trials {
            record(&mut chain, &mut history, cfg.cadence);
            let t = chain.state.t();
            let position = chain.rng.position();
            let k = chain.rng.rng_mut().random_range(1..=lookback);
            let s = t.saturating_sub(k);
            let pivotal = chain.pivotal().clone();
            counts.push(pivotal.len() as f64);
            let e = (!pivotal.is_empty()).then(|| pivotal.as_slice()[chain.rng.rng_mut().random_range(0..pivotal.len())]);
            let prefix: Vec<Cell> = vec![
                r.into(),
                i.into(),
                t.into(),
                s.into(),
                Cell::Int(e.map_or(-1, |e| i128::from(e.0))),
            ];
            let Some(e) = e else {
                for which in [Constructor::Decreasing, Constructor::Impatient] {
                    trials.push(skipped_trial(&prefix, which, position, "empty_pivotal", "pivotal set at t is empty"));
                }
                continue;
            };
            match Trajectory::from_history(lattice, &history, s, t) {
                Ok(traj) => {
                    for which in [Constructor::Decreasing, Constructor::Impatient] {
                        trials.push(stp_trial(&traj, &history, which, e, t, s, &prefix, position));
                    }
                }
                Err(err) => {
                    for which in [Constructor::Decreasing, Constructor::Impatient] {
                        trials.push(skipped_trial(&prefix, which, position, "window", &format!("window: {err}")));
                    }
                }
            }
        }
        Ok((trials, counts))
    })?;
    let mut rows = Vec::new();
    let mut pivotal_counts = Vec::new();
    let mut tallies: BTreeMap<Constructor, [u64; 3]> = BTreeMap::new();
    let mut skip_reasons: BTreeMap<&str, u64> = BTreeMap::new();
    let mut failures = Vec::new();
    for (trials, counts) in parts {
        pivotal_counts.push(counts);
        for trial in trials {
            let tally = tallies.entry(trial.constructor).or_default();
            match &trial.status {
                Status::Pass => tally[0] += 1,
                Status::Fail(_) => tally[1] += 1,
                Status::Skipped(key, _) => {
                    tally[2] += 1;
                    *skip_reasons.entry(key).or_default() += 1;
                }
            }
            if let Some(f) = trial.forensics {
                if failures.len() < MAX_FORENSICS {
                    failures.push(f);
                }
            }
            rows.push(trial.row);
        }
    }
    let mut summary = Map::new();
    for which in [Constructor::Decreasing, Constructor::Impatient] {
        let [passed, failed, skipped] = tallies.get(&which).copied().unwrap_or_default();
        summary.insert(
            which.as_str().into(),
            json!({
                "passed": passed,
                "failed": failed,
                "skipped": skipped,
                "pass_rate": to_value(wilson(passed, passed + failed)),
            }),
        );
    }
    summary.insert("skip_reasons".into(), to_value(skip_reasons));
    summary.insert("failures".into(), Value::Array(failures));
    Ok(RunResult {
        rows,
        pivotal_counts,
        summary,
    })
}

fn skipped_trial(prefix: &[Cell], which: Constructor, position: u128, key: &'static str, reason: &str) -> Trial {
    let mut row: Row = prefix.to_vec();
    row.extend([
        Cell::from(which.as_str()),
        "skipped".into(),
        "".into(),
        0usize.into(),
        0usize.into(),
        0usize.into(),
        position.into(),
        reason.into(),
    ]);
    Trial {
        row,
        constructor: which,
        status: Status::Skipped(key, reason.to_string()),
        forensics: None,
    }
}

/// Least-squares `a + b·ln²|Λ|` through per-size 99th percentiles, lifted to
/// cover every point.
pub fn localization_envelope(sizes: &[(usize, f64)], d: usize) -> super::stats::Envelope {
    let xs: Vec<f64> = sizes
        .iter()
        .map(|&(l, _)| {
            let v = ((l + 1) as f64).powi(d as i32).ln();
            v * v
        })
        .collect();
    let ys: Vec<f64> = sizes.iter().map(|&(_, q)| q).collect();
    fit_envelope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::run_experiment;

    #[test]
    fn cached_pivotal_set_tracks_the_chain() {
        let lat = BoxLattice::new(2, 6).unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::Isolation, 2, 6, 0.7);
        cfg.burn_in = 1.0;
        let mut chain = Chain::start(&cfg, &lat, 0).unwrap();
        for _ in 0..20_000 {
            chain.step();
            let fresh = pivotal_of(&chain.state);
            let t = chain.state.t();
            assert_eq!(chain.pivotal(), &fresh, "t = {t}");
        }
    }

    fn unit_box(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(kind, 2, 1, 0.9);
        cfg.samples = 50;
        cfg.trials = 50;
        cfg
    }

    #[test]
    fn unit_box_degenerate_values() {
        let out = run_experiment(&unit_box(ExperimentKind::Isolation)).unwrap();
        assert!(out.column_f64("max_isolation").unwrap().iter().all(|&v| v == 0.0));
        let out = run_experiment(&unit_box(ExperimentKind::EmptyPivotal)).unwrap();
        assert_eq!(out.summary["empty_fraction"]["count"], 0);
        let out = run_experiment(&unit_box(ExperimentKind::Speed)).unwrap();
        assert!(out.column_f64("d_h_max").unwrap().iter().all(|&v| v == 0.0));
        let out = run_experiment(&unit_box(ExperimentKind::StpValidity)).unwrap();
        for which in ["decreasing", "impatient"] {
            assert_eq!(out.summary[which]["failed"], 0, "{which}");
            assert_eq!(out.summary[which]["passed"], 50, "{which}");
        }
    }

    #[test]
    fn localization_flags_empty_samples_and_tails_decrease() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Localization, 2, 6, 0.6);
        cfg.samples = 200;
        let out = run_experiment(&cfg).unwrap();
        let stat = out.column_f64("localization").unwrap();
        let empty = out.column_f64("empty").unwrap();
        for (s, e) in stat.iter().zip(&empty) {
            assert_eq!(s.is_nan(), *e == 1.0);
            assert!(s.is_nan() || *s >= 0.0);
        }
        for key in ["tail_log", "tail_log2"] {
            let counts: Vec<u64> = out.summary[key]
                .as_array()
                .unwrap()
                .iter()
                .map(|p| p["count"].as_u64().unwrap())
                .collect();
            assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{key}: {counts:?}");
        }
    }

    #[test]
    fn envelope_uses_log_squared_volume() {
        let env = localization_envelope(&[(1, 1.0), (3, 2.0)], 2);
        let x = |l: f64| ((l + 1.0) * (l + 1.0)).ln().powi(2);
        assert!((env.at(x(1.0)) - 1.0).abs() < 1e-9 && (env.at(x(3.0)) - 2.0).abs() < 1e-9);
    }
}
