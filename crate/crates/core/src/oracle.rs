//! Exhaustive ground truth for tiny boxes: the conditioned measure, the exact
//! stationary law of the coupled chain, and pivotality by trial opening.
//!
//! Connectivity here is recomputed from scratch by a plain search over edge
//! masks and does not go through the incremental cluster code.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::connectivity::Config;
use crate::dynamics::{burn_in_steps, check_probability, CoupledState, DynamicsError, RngStream};
use crate::edge_set::EdgeSet;
use crate::lattice::{BoxLattice, EdgeId};

pub const DEFAULT_EDGE_CAP: usize = 20;
pub const DEFAULT_STATE_CAP: usize = 100_000;
/// Power iteration stops once `‖πK − π‖₁` drops below this.
pub const STATIONARY_TOLERANCE: f64 = 1e-12;
const MAX_POWER_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{what} needs a cap of at least {required}, configured cap is {cap}")]
    CapExceeded { what: &'static str, required: usize, cap: usize },
    #[error("power iteration stopped after {iterations} iterations at residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("configuration connects T and B")]
    Connected,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl std::iter::Sum<f64> for KahanSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::default();
        iter.for_each(|x| k.add(x));
        k
    }
}

/// A finite law as parallel lists of states and probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDistribution<S> {
    pub states: Vec<S>,
    pub probs: Vec<f64>,
}

impl<S: Copy + Eq + std::hash::Hash> ExactDistribution<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().copied().sum::<KahanSum>().value()
    }

    pub fn prob_of(&self, s: S) -> f64 {
        self.states.iter().position(|&x| x == s).map_or(0.0, |i| self.probs[i])
    }

    /// Image law under `f`, states in order of first appearance.
    pub fn marginal<T: Copy + Eq + std::hash::Hash>(&self, f: impl Fn(S) -> T) -> ExactDistribution<T> {
        let mut index: HashMap<T, usize> = HashMap::new();
        let mut out = ExactDistribution {
            states: Vec::new(),
            probs: Vec::new(),
        };
        let mut sums: Vec<KahanSum> = Vec::new();
        for (&s, &p) in self.states.iter().zip(&self.probs) {
            let k = *index.entry(f(s)).or_insert_with(|| {
                out.states.push(f(s));
                sums.push(KahanSum::default());
                sums.len() - 1
            });
            sums[k].add(p);
        }
        out.probs = sums.iter().map(KahanSum::value).collect();
        out
    }

    /// Total variation distance to `other`, summed in state order so the
    /// result is reproducible bit for bit.
    pub fn tv_distance(&self, other: &ExactDistribution<S>) -> f64 {
        let mine: HashMap<S, f64> = self.states.iter().copied().zip(self.probs.iter().copied()).collect();
        let theirs: HashMap<S, f64> = other.states.iter().copied().zip(other.probs.iter().copied()).collect();
        let mut acc = KahanSum::default();
        for (s, &p) in self.states.iter().zip(&self.probs) {
            acc.add((p - theirs.get(s).copied().unwrap_or(0.0)).abs());
        }
        for (s, &q) in other.states.iter().zip(&other.probs) {
            if !mine.contains_key(s) {
                acc.add(q);
            }
        }
        acc.value() / 2.0
    }
}

/// Whether the open edges (given by `open`) join the top and bottom faces.
pub fn connects(lattice: &BoxLattice, open: impl Fn(usize) -> bool) -> bool {
    let mut seen = vec![false; lattice.vertex_count()];
    let mut stack: Vec<u32> = lattice.top().to_vec();
    for &v in &stack {
        seen[v as usize] = true;
    }
    while let Some(v) = stack.pop() {
        if lattice.is_bottom(v) {
            return true;
        }
        for &e in lattice.incident(v) {
            if open(e as usize) {
                let w = lattice.other_end(e, v);
                if !seen[w as usize] {
                    seen[w as usize] = true;
                    stack.push(w);
                }
            }
        }
    }
    false
}

fn mask_connects(lattice: &BoxLattice, mask: u64) -> bool {
    connects(lattice, |e| mask >> e & 1 == 1)
}

fn weight(mask: u64, n: usize, p: f64) -> f64 {
    let k = mask.count_ones() as i32;
    p.powi(k) * (1.0 - p).powi(n as i32 - k)
}

/// The law `P_p(· | T ↮ B)` together with `P_p(T ↮ B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conditioned {
    pub law: ExactDistribution<u64>,
    pub disconnection_probability: f64,
}

pub fn enumerate_conditioned(lattice: &BoxLattice, p: f64) -> Result<Conditioned, OracleError> {
    enumerate_conditioned_with_cap(lattice, p, DEFAULT_EDGE_CAP)
}

/// Every `2^{N_E}` configuration as an edge mask, bit `i` for edge `i`.
pub fn enumerate_conditioned_with_cap(lattice: &BoxLattice, p: f64, cap: usize) -> Result<Conditioned, OracleError> {
    check_probability(p)?;
    let n = lattice.edge_count();
    if n > cap.min(63) {
        return Err(OracleError::CapExceeded {
            what: "edge enumeration",
            required: n,
            cap,
        });
    }
    let total = 1u64 << n;
    let block = (total / 256).max(1);
    let blocks: Vec<(Vec<u64>, Vec<f64>)> = (0..total.div_ceil(block))
        .into_par_iter()
        .map(|b| {
            let (mut states, mut probs) = (Vec::new(), Vec::new());
            for mask in b * block..((b + 1) * block).min(total) {
                if !mask_connects(lattice, mask) {
                    states.push(mask);
                    probs.push(weight(mask, n, p));
                }
            }
            (states, probs)
        })
        .collect();
    let (mut states, mut probs) = (Vec::new(), Vec::new());
    for (s, q) in blocks {
        states.extend(s);
        probs.extend(q);
    }
    let z = probs.iter().copied().sum::<KahanSum>().value();
    probs.iter_mut().for_each(|q| *q /= z);
    Ok(Conditioned {
        law: ExactDistribution { states, probs },
        disconnection_probability: z,
    })
}

/// One step of the coupled chain on masks: `X(e) = B`; `Y(e) = 0` on `B = 0`,
/// `Y(e) = 1` on `B = 1` unless that would join `T` and `B`.
fn coupled_step(lattice: &BoxLattice, (x, y): (u64, u64), e: usize, coin: bool) -> (u64, u64) {
    let bit = 1u64 << e;
    if coin {
        let opened = y | bit;
        (x | bit, if mask_connects(lattice, opened) { y } else { opened })
    } else {
        (x & !bit, y & !bit)
    }
}

/// Every pair `(x, y)` with `y ⊆ x` and `y` disconnected.
pub fn coupled_states(lattice: &BoxLattice) -> Result<Vec<(u64, u64)>, OracleError> {
    coupled_states_with_cap(lattice, DEFAULT_STATE_CAP)
}

fn coupled_states_with_cap(lattice: &BoxLattice, cap: usize) -> Result<Vec<(u64, u64)>, OracleError> {
    let n = lattice.edge_count();
    if n > 30 {
        return Err(OracleError::CapExceeded {
            what: "coupled state space",
            required: usize::MAX,
            cap,
        });
    }
    let full = (1u64 << n) - 1;
    let mut out = Vec::new();
    for y in 0..=full {
        if mask_connects(lattice, y) {
            continue;
        }
        // Supersets of y.
        let free = full & !y;
        let mut sub = free;
        loop {
            out.push((y | sub, y));
            if out.len() > cap {
                return Err(OracleError::CapExceeded {
                    what: "coupled state space",
                    required: out.len(),
                    cap,
                });
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Sparse kernel rows: `(to, probability)` with duplicates merged.
fn kernel<S: Copy + Eq + std::hash::Hash>(
    states: &[S],
    p: f64,
    n: usize,
    step: impl Fn(S, usize, bool) -> S,
) -> Vec<Vec<(usize, f64)>> {
    let index: HashMap<S, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    states
        .iter()
        .map(|&s| {
            let mut row: HashMap<usize, f64> = HashMap::new();
            for e in 0..n {
                for (coin, w) in [(true, p), (false, 1.0 - p)] {
                    let to = index[&step(s, e, coin)];
                    *row.entry(to).or_default() += w / n as f64;
                }
            }
            let mut row: Vec<(usize, f64)> = row.into_iter().collect();
            row.sort_unstable_by_key(|r| r.0);
            row
        })
        .collect()
}

fn apply_kernel(k: &[Vec<(usize, f64)>], pi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pi.len()];
    for (i, row) in k.iter().enumerate() {
        for &(j, w) in row {
            out[j] += pi[i] * w;
        }
    }
    out
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<KahanSum>().value()
}

/// The stationary law of the coupled chain with its consistency checks.
#[derive(Clone, Debug)]
pub struct Stationary {
    pub law: ExactDistribution<(u64, u64)>,
    pub iterations: usize,
    /// `‖πK − π‖₁`.
    pub residual: f64,
    /// TV distance of the `Y` marginal to `P_p(· | T ↮ B)`.
    pub y_marginal_tv: f64,
    /// TV distance of the `X` marginal to the product measure.
    pub x_marginal_tv: f64,
}

pub fn exact_stationary(lattice: &BoxLattice, p: f64) -> Result<Stationary, OracleError> {
    check_probability(p)?;
    let states = coupled_states(lattice)?;
    let n = lattice.edge_count();
    let k = kernel(&states, p, n, |s, e, c| coupled_step(lattice, s, e, c));
    let mut pi = vec![1.0 / states.len() as f64; states.len()];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while residual >= STATIONARY_TOLERANCE {
        if iterations == MAX_POWER_ITERATIONS {
            return Err(OracleError::NotConverged { iterations, residual });
        }
        let next = apply_kernel(&k, &pi);
        residual = l1(&next, &pi);
        pi = next;
        iterations += 1;
    }
    let z = pi.iter().copied().sum::<KahanSum>().value();
    pi.iter_mut().for_each(|q| *q /= z);
    let residual = l1(&apply_kernel(&k, &pi), &pi);
    let law = ExactDistribution { states, probs: pi };
    let conditioned = enumerate_conditioned_with_cap(lattice, p, 63)?;
    let y_marginal_tv = law.marginal(|(_, y)| y).tv_distance(&conditioned.law);
    let product = ExactDistribution {
        states: (0..1u64 << n).collect(),
        probs: (0..1u64 << n).map(|m| weight(m, n, p)).collect(),
    };
    let x_marginal_tv = law.marginal(|(x, _)| x).tv_distance(&product);
    Ok(Stationary {
        law,
        iterations,
        residual,
        y_marginal_tv,
        x_marginal_tv,
    })
}

/// `max |P_D(y) K(y, y') − P_D(y') K(y', y)|` for the kernel of `Y` alone.
pub fn y_detailed_balance_defect(lattice: &BoxLattice, p: f64) -> Result<f64, OracleError> {
    let cond = enumerate_conditioned(lattice, p)?;
    let n = lattice.edge_count();
    let k = kernel(&cond.law.states, p, n, |y, e, c| coupled_step(lattice, (y, y), e, c).1);
    let dense = |i: usize, j: usize| k[i].iter().find(|r| r.0 == j).map_or(0.0, |r| r.1);
    let pd = &cond.law.probs;
    let mut worst: f64 = 0.0;
    for (i, row) in k.iter().enumerate() {
        for &(j, w) in row {
            worst = worst.max((pd[i] * w - pd[j] * dense(j, i)).abs());
        }
    }
    Ok(worst)
}

/// Closed edges whose opening alone joins `T` and `B`.
pub fn pivotal_bruteforce(lattice: &BoxLattice, config: &Config) -> Result<EdgeSet, OracleError> {
    let bits = config.bits();
    if connects(lattice, |e| bits[e]) {
        return Err(OracleError::Connected);
    }
    Ok(lattice
        .edge_ids()
        .filter(|f| !bits[f.index()] && connects(lattice, |e| bits[e] || e == f.index()))
        .collect())
}

/// Empirical dynamics against the exact stationary law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    pub p: f64,
    pub seed: u64,
    pub n_steps: u64,
    pub burn_in: u64,
    /// False when there is nothing to compare.
    pub valid: bool,
    /// Over every post-burn-in state.
    pub tv_distance: f64,
    pub tv_tolerance: f64,
    /// Over states thinned by `thinning`, with expected counts below 5 pooled.
    pub chi2: f64,
    pub chi2_dof: usize,
    pub chi2_p_value: f64,
    pub significance: f64,
    pub thinning: u64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainCheckOptions {
    pub burn_in_multiplier: f64,
    pub tv_tolerance: f64,
    pub significance: f64,
}

impl Default for ChainCheckOptions {
    fn default() -> Self {
        ChainCheckOptions {
            burn_in_multiplier: 10.0,
            tv_tolerance: 0.01,
            significance: 1e-3,
        }
    }
}

pub fn stationary_chain_check(
    lattice: &BoxLattice,
    p: f64,
    n_steps: u64,
    seed: u64,
    options: ChainCheckOptions,
) -> Result<ChainReport, OracleError> {
    let exact = exact_stationary(lattice, p)?;
    let n = lattice.edge_count();
    let burn = burn_in_steps(n, options.burn_in_multiplier);
    let thinning = burn.max(1);
    let index: HashMap<(u64, u64), usize> = exact.law.states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut rng = RngStream::new(seed);
    let mut state = CoupledState::init(lattice, p, &mut rng)?;
    for _ in 0..burn {
        state.step(&mut rng);
    }
    let mut all = vec![0u64; exact.law.len()];
    let mut thinned = vec![0u64; exact.law.len()];
    for k in 1..=n_steps {
        state.step(&mut rng);
        let i = index[&(state.x().to_mask(), state.y().to_mask())];
        all[i] += 1;
        if k % thinning == 0 {
            thinned[i] += 1;
        }
    }
    let mut report = ChainReport {
        d: lattice.dim(),
        side: lattice.side(),
        p,
        seed,
        n_steps,
        burn_in: burn,
        valid: n_steps > 0,
        tv_distance: f64::NAN,
        tv_tolerance: options.tv_tolerance,
        chi2: f64::NAN,
        chi2_dof: 0,
        chi2_p_value: f64::NAN,
        significance: options.significance,
        thinning,
        pass: false,
    };
    if n_steps == 0 {
        return Ok(report);
    }
    let empirical = ExactDistribution {
        states: exact.law.states.clone(),
        probs: all.iter().map(|&c| c as f64 / n_steps as f64).collect(),
    };
    report.tv_distance = empirical.tv_distance(&exact.law);
    let m: u64 = thinned.iter().sum();
    if m > 0 {
        let (mut bins, mut pooled_o, mut pooled_e) = (Vec::new(), 0.0, 0.0);
        for (&o, &q) in thinned.iter().zip(&exact.law.probs) {
            let e = q * m as f64;
            if e >= 5.0 {
                bins.push((o as f64, e));
            } else {
                pooled_o += o as f64;
                pooled_e += e;
            }
        }
        if pooled_e > 0.0 {
            bins.push((pooled_o, pooled_e));
        }
        report.chi2 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
        report.chi2_dof = bins.len().saturating_sub(1);
        if report.chi2_dof > 0 {
            let dist = ChiSquared::new(report.chi2_dof as f64).expect("positive dof");
            report.chi2_p_value = 1.0 - dist.cdf(report.chi2);
        }
    }
    report.pass = report.tv_distance < options.tv_tolerance
        && (report.chi2_p_value.is_nan() || report.chi2_p_value > options.significance);
    Ok(report)
}

/// Stored output of an oracle, compared by later runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub lattice: GoldenLattice,
    pub p: f64,
    pub quantity: String,
    pub value: f64,
    pub tolerance: f64,
    pub generator_version: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenLattice {
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
}

impl GoldenRecord {
    pub fn new(lattice: &BoxLattice, p: f64, quantity: &str, value: f64, tolerance: f64) -> Self {
        GoldenRecord {
            lattice: GoldenLattice {
                d: lattice.dim(),
                side: lattice.side(),
            },
            p,
            quantity: quantity.to_string(),
            value,
            tolerance,
            generator_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Same instance and quantity, values within the stored tolerance.
    pub fn agrees_with(&self, other: &GoldenRecord) -> bool {
        self.lattice == other.lattice
            && self.p == other.p
            && self.quantity == other.quantity
            && (self.value - other.value).abs() <= self.tolerance
    }
}

pub fn edges_of_mask(mask: u64) -> Vec<EdgeId> {
    (0..64).filter(|&i| mask >> i & 1 == 1).map(EdgeId).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::pivotal;
    use rand::Rng;

    fn unit() -> BoxLattice {
        BoxLattice::new(2, 1).unwrap()
    }

    #[test]
    fn unit_box_conditioned_law() {
        let lat = unit();
        for p in [0.3, 0.9] {
            let c = enumerate_conditioned(&lat, p).unwrap();
            assert!((c.disconnection_probability - (1.0 - p) * (1.0 - p)).abs() < 1e-15);
            assert_eq!(c.law.len(), 4);
            assert!((c.law.total_mass() - 1.0).abs() < 1e-12);
        }
        // Point mass on l, r closed; t and b independent Bernoulli(0.9).
        let c = enumerate_conditioned(&lat, 0.9).unwrap();
        let t = lat.edge_at(&[0, 1], 0).unwrap();
        let b = lat.edge_at(&[0, 0], 0).unwrap();
        let both = (1u64 << t.0) | (1u64 << b.0);
        assert!((c.law.prob_of(both) - 0.81).abs() < 1e-12);
        assert!((c.law.prob_of(1u64 << t.0) - 0.09).abs() < 1e-12);
        assert!((c.law.prob_of(0) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let lat = BoxLattice::new(2, 3).unwrap();
        match enumerate_conditioned(&lat, 0.5) {
            Err(OracleError::CapExceeded { required, cap, .. }) => assert_eq!((required, cap), (24, 20)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(exact_stationary(&BoxLattice::new(2, 2).unwrap(), 0.5).is_err());
    }

    #[test]
    fn unit_box_stationary_law() {
        let lat = unit();
        let s = exact_stationary(&lat, 0.9).unwrap();
        assert_eq!(s.law.len(), 36);
        assert!(s.residual < 1e-10);
        assert!(s.y_marginal_tv < 1e-10, "{}", s.y_marginal_tv);
        assert!(s.x_marginal_tv < 1e-10, "{}", s.x_marginal_tv);
        assert!((s.law.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn y_kernel_is_reversible() {
        for (d, l) in [(2, 1), (2, 2), (3, 1)] {
            let lat = BoxLattice::new(d, l).unwrap();
            assert!(y_detailed_balance_defect(&lat, 0.7).unwrap() < 1e-15);
        }
    }

    #[test]
    fn brute_pivotal_agrees() {
        let lat = BoxLattice::new(2, 4).unwrap();
        let mut rng = RngStream::new(77);
        let u = unit();
        let l = u.edge_at(&[0, 0], 1).unwrap();
        let r = u.edge_at(&[1, 0], 1).unwrap();
        assert_eq!(pivotal_bruteforce(&u, &Config::all_closed(&u)).unwrap(), vec![l, r].into_iter().collect::<EdgeSet>());
        let mut checked = 0;
        for _ in 0..2000 {
            let p = rng.rng_mut().random_range(0.2..0.6);
            let bits = (0..lat.edge_count()).map(|_| rng.draw_coin(p)).collect();
            let cfg = Config::from_bits(&lat, bits).unwrap();
            if let Ok(fast) = pivotal(&lat, &cfg) {
                assert_eq!(pivotal_bruteforce(&lat, &cfg).unwrap(), fast);
                checked += 1;
            } else {
                assert_eq!(pivotal_bruteforce(&lat, &cfg), Err(OracleError::Connected));
            }
        }
        assert!(checked > 200);
    }

    #[test]
    fn chain_report_edge_cases() {
        let lat = unit();
        let empty = stationary_chain_check(&lat, 0.9, 0, 1, ChainCheckOptions::default()).unwrap();
        assert!(!empty.valid && !empty.pass);
        let a = stationary_chain_check(&lat, 0.9, 20_000, 4, ChainCheckOptions::default()).unwrap();
        let b = stationary_chain_check(&lat, 0.9, 20_000, 4, ChainCheckOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn golden_round_trip() {
        let g = GoldenRecord::new(&unit(), 0.9, "disconnection_probability", 0.01, 1e-12);
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains(r#""lattice":{"d":2,"L":1}"#));
        let back: GoldenRecord = serde_json::from_str(&json).unwrap();
        assert!(back.agrees_with(&g));
    }
}
