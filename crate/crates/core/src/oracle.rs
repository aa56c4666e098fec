//! Monte Carlo ground truth: full regime-switching price paths with running
//! maxima, and evaluation of stopping policies on them.
//!
//! Regime jump times are sampled exactly. Between monitoring times each
//! constant-regime segment gets an exact Gaussian log-increment, and the
//! segment maximum is drawn from the Brownian-bridge maximum law given the
//! two endpoints,
//!
//! ```text
//! M = (X + sqrt(X^2 - 2 s^2 h ln U)) / 2,
//! ```
//!
//! so the simulated running maximum carries no discretization bias.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::boundary::BoundaryCurve;
use crate::chain::{sample_chain_path, ChainPath};
use crate::error::{Error, Result};
use crate::model::RegimeModel;
use crate::rng::stream_rng;
use crate::stats::{Accumulator, Estimate};

/// Paths simulated per batch when streaming large path counts.
pub const CHUNK_PATHS: u64 = 8192;

/// How the maximum within a simulated segment is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxSampling {
    /// Exact draw from the Brownian-bridge maximum law.
    #[default]
    Bridge,
    /// Segment endpoints only (biased low; kept for comparison).
    Endpoints,
}

/// Times at which the path state is recorded and policies may stop.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorGrid {
    times: Vec<f64>,
}

impl MonitorGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidArgument("monitor grid needs at least two times".into()));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("monitor times must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    /// `steps` equal intervals on `[t0, t1]`.
    pub fn uniform(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if !(t1 > t0) || steps == 0 {
            return Err(Error::InvalidArgument(format!("bad monitor interval [{t0}, {t1}] / {steps}")));
        }
        let mut times: Vec<f64> = (0..steps).map(|i| t0 + (t1 - t0) * i as f64 / steps as f64).collect();
        times.push(t1);
        Self::new(times)
    }

    /// `t0` followed by every grid time strictly after it.
    pub fn from_times_after(grid_times: &[f64], t0: f64) -> Result<Self> {
        let mut times = vec![t0];
        times.extend(grid_times.iter().copied().filter(|&t| t > t0 + 1e-12));
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }
}

/// Everything needed to reproduce a set of paths.
#[derive(Debug, Clone)]
pub struct PathSpec<'a> {
    pub model: &'a RegimeModel,
    pub monitor: &'a MonitorGrid,
    /// Max-to-price ratio at the start time.
    pub a: f64,
    pub state: usize,
    /// Equal subdivisions of each monitoring interval.
    pub substeps: usize,
    pub seed: u64,
    /// Pair path `2i + 1` with path `2i` by negating every normal draw.
    pub antithetic: bool,
    pub max_sampling: MaxSampling,
}

/// Simulated paths recorded at the monitoring times. Log-prices are relative
/// to the price at the start time; the running maximum starts at `log a`.
#[derive(Debug, Clone)]
pub struct PathBatch {
    pub times: Vec<f64>,
    pub first_path: u64,
    pub paths: usize,
    pub antithetic: bool,
    pub seed: u64,
    pub chains: Vec<ChainPath>,
    log_price: Vec<f64>,
    log_max: Vec<f64>,
    states: Vec<u16>,
}

impl PathBatch {
    fn stride(&self) -> usize {
        self.times.len()
    }

    /// `log(Y_t / Y_t0)` at monitor index `p` of path `i` (batch-local).
    pub fn log_price(&self, i: usize, p: usize) -> f64 {
        self.log_price[i * self.stride() + p]
    }

    /// `log(max_{s<=t} Y_s / Y_t0)`, including the initial ratio.
    pub fn log_max(&self, i: usize, p: usize) -> f64 {
        self.log_max[i * self.stride() + p]
    }

    pub fn state(&self, i: usize, p: usize) -> usize {
        self.states[i * self.stride() + p] as usize
    }

    /// Max-to-price ratio in log form at monitor index `p`.
    pub fn log_ratio(&self, i: usize, p: usize) -> f64 {
        self.log_max(i, p) - self.log_price(i, p)
    }

    pub fn terminal_log_ratio(&self, i: usize) -> f64 {
        self.log_ratio(i, self.stride() - 1)
    }

    pub fn terminal_state(&self, i: usize) -> usize {
        self.state(i, self.stride() - 1)
    }
}

struct PathRecord {
    chain: ChainPath,
    log_price: Vec<f64>,
    log_max: Vec<f64>,
    states: Vec<u16>,
}

fn simulate_one(spec: &PathSpec<'_>, path: u64) -> Result<PathRecord> {
    let (stream, sign) = if spec.antithetic { (path / 2, if path % 2 == 1 { -1.0 } else { 1.0 }) } else { (path, 1.0) };
    let mut rng = stream_rng(spec.seed, stream);
    let times = spec.monitor.times();
    let chain = sample_chain_path(spec.model, spec.state, spec.monitor.start(), spec.monitor.end(), &mut rng)?;

    let mu = spec.model.mu();
    let sig = spec.model.sigma();
    let mut log_y = 0.0f64;
    let mut log_m = spec.a.ln();
    let mut state = chain.states[0];
    let mut jump = 0usize;
    let mut rec = PathRecord {
        log_price: Vec::with_capacity(times.len()),
        log_max: Vec::with_capacity(times.len()),
        states: Vec::with_capacity(times.len()),
        chain: ChainPath { t0: 0.0, t1: 0.0, jump_times: Vec::new(), states: Vec::new() },
    };
    rec.log_price.push(log_y);
    rec.log_max.push(log_m);
    rec.states.push(state as u16);

    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        for sub in 0..spec.substeps {
            let s0 = a + (b - a) * sub as f64 / spec.substeps as f64;
            let s1 = if sub + 1 == spec.substeps { b } else { a + (b - a) * (sub + 1) as f64 / spec.substeps as f64 };
            let mut t = s0;
            loop {
                let next_jump = chain.jump_times.get(jump).copied().unwrap_or(f64::INFINITY);
                let end = s1.min(next_jump);
                let dt = end - t;
                if dt > 0.0 {
                    let (m_j, s_j) = (mu[state], sig[state]);
                    let z: f64 = rng.sample(StandardNormal);
                    let x = (m_j - 0.5 * s_j * s_j) * dt + s_j * dt.sqrt() * sign * z;
                    let seg_max = match spec.max_sampling {
                        MaxSampling::Bridge => {
                            let u: f64 = 1.0 - rng.random::<f64>();
                            0.5 * (x + (x * x - 2.0 * s_j * s_j * dt * u.ln()).sqrt())
                        }
                        MaxSampling::Endpoints => x.max(0.0),
                    };
                    log_m = log_m.max(log_y + seg_max);
                    log_y += x;
                }
                t = end;
                if next_jump <= s1 {
                    jump += 1;
                    state = chain.states[jump];
                }
                if t >= s1 {
                    break;
                }
            }
        }
        rec.log_price.push(log_y);
        rec.log_max.push(log_m);
        rec.states.push(state as u16);
    }
    rec.chain = chain;
    Ok(rec)
}

/// Simulates the paths with indices in `paths`. Each index owns its random
/// stream, so any split of an index range yields the same paths.
pub fn simulate_paths(spec: &PathSpec<'_>, paths: Range<u64>) -> Result<PathBatch> {
    if spec.substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1".into()));
    }
    if !(spec.a >= 1.0) {
        return Err(Error::InvalidArgument(format!("initial ratio a = {} must be >= 1", spec.a)));
    }
    if spec.state >= spec.model.num_states() {
        return Err(Error::InvalidArgument(format!("state {} out of range", spec.state)));
    }
    if spec.antithetic && (paths.start % 2 != 0 || paths.end % 2 != 0) {
        return Err(Error::InvalidArgument("antithetic batches must cover whole pairs".into()));
    }
    let records: Vec<PathRecord> =
        paths.clone().into_par_iter().map(|p| simulate_one(spec, p)).collect::<Result<_>>()?;
    let mut batch = PathBatch {
        times: spec.monitor.times().to_vec(),
        first_path: paths.start,
        paths: records.len(),
        antithetic: spec.antithetic,
        seed: spec.seed,
        chains: Vec::with_capacity(records.len()),
        log_price: Vec::with_capacity(records.len() * spec.monitor.times().len()),
        log_max: Vec::with_capacity(records.len() * spec.monitor.times().len()),
        states: Vec::with_capacity(records.len() * spec.monitor.times().len()),
    };
    for r in records {
        batch.log_price.extend(r.log_price);
        batch.log_max.extend(r.log_max);
        batch.states.extend(r.states);
        batch.chains.push(r.chain);
    }
    Ok(batch)
}

/// A stopping rule that only looks at `(t, ratio, regime)`.
#[derive(Debug, Clone)]
pub enum PolicySpec {
    /// Stop at the first monitoring time.
    Immediate,
    /// Stop at the first monitoring time at or after `t`.
    FixedTime(f64),
    /// Stop at the first monitoring time where `ratio >= b(t, regime)`, with
    /// `b` held at its value from the last grid time at or before `t`.
    HitBoundary(BoundaryCurve),
}

impl PolicySpec {
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::Immediate => "immediate",
            PolicySpec::FixedTime(_) => "fixed_time",
            PolicySpec::HitBoundary(_) => "hit_boundary",
        }
    }

    /// Monitor index at which path `i` stops; `T` when nothing triggers.
    pub fn stopping_index(&self, batch: &PathBatch, i: usize) -> usize {
        let last = batch.times.len() - 1;
        match self {
            PolicySpec::Immediate => 0,
            PolicySpec::FixedTime(t) => batch.times.iter().position(|&s| s >= *t - 1e-12).unwrap_or(last),
            PolicySpec::HitBoundary(curve) => (0..=last)
                .find(|&p| batch.log_ratio(i, p) >= curve.b_at(batch.times[p], batch.state(i, p)).ln())
                .unwrap_or(last),
        }
    }

    /// `max_{s<=T} Y_s / Y_tau` for path `i`.
    pub fn payoff(&self, batch: &PathBatch, i: usize) -> f64 {
        let p = self.stopping_index(batch, i);
        let last = batch.times.len() - 1;
        (batch.log_max(i, last) - batch.log_price(i, p)).exp()
    }
}

/// Folds per-path samples into an accumulator, averaging antithetic pairs.
fn accumulate(batch: &PathBatch, sample: impl Fn(usize) -> f64) -> Accumulator {
    let mut acc = Accumulator::default();
    if batch.antithetic {
        for i in (0..batch.paths).step_by(2) {
            acc.push(0.5 * (sample(i) + sample(i + 1)));
        }
    } else {
        for i in 0..batch.paths {
            acc.push(sample(i));
        }
    }
    acc
}

pub fn evaluate_policy(batch: &PathBatch, policy: &PolicySpec) -> Estimate {
    accumulate(batch, |i| policy.payoff(batch, i)).estimate()
}

/// Mean and standard error of an arbitrary per-path functional.
pub fn evaluate_functional(batch: &PathBatch, f: impl Fn(&PathBatch, usize) -> f64) -> Estimate {
    accumulate(batch, |i| f(batch, i)).estimate()
}

/// Evaluates several policies on the same `paths` paths, simulated in
/// chunks of [`CHUNK_PATHS`] to bound memory. Chunk results are merged in
/// index order, so the output does not depend on the thread count.
pub fn evaluate_policies(spec: &PathSpec<'_>, paths: u64, policies: &[PolicySpec]) -> Result<Vec<Estimate>> {
    if paths < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    let paths = if spec.antithetic { paths + paths % 2 } else { paths };
    let mut accs = vec![Accumulator::default(); policies.len()];
    let mut start = 0;
    while start < paths {
        let end = (start + CHUNK_PATHS).min(paths);
        let batch = simulate_paths(spec, start..end)?;
        for (acc, policy) in accs.iter_mut().zip(policies) {
            acc.merge(&accumulate(&batch, |i| policy.payoff(&batch, i)));
        }
        start = end;
    }
    Ok(accs.iter().map(Accumulator::estimate).collect())
}

/// Monte Carlo value of stopping at the first hit of `boundary`, started at
/// `(t0, a, state)`.
pub fn oracle_value(
    model: &RegimeModel,
    boundary: &BoundaryCurve,
    t0: f64,
    a: f64,
    state: usize,
    paths: u64,
    substeps: usize,
    seed: u64,
) -> Result<Estimate> {
    if t0 >= model.horizon() - 1e-12 {
        return Ok(Estimate::exact(a));
    }
    let monitor = MonitorGrid::from_times_after(&boundary.times, t0)?;
    let spec = PathSpec {
        model,
        monitor: &monitor,
        a,
        state,
        substeps,
        seed,
        antithetic: false,
        max_sampling: MaxSampling::Bridge,
    };
    let policy = PolicySpec::HitBoundary(boundary.clone());
    Ok(evaluate_policies(&spec, paths, std::slice::from_ref(&policy))?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(mu: f64, sigma: f64) -> RegimeModel {
        RegimeModel::constant(mu, sigma, 1.0).unwrap()
    }

    #[test]
    fn driftless_price_is_a_martingale() {
        let m = constant(0.0, 0.5);
        let monitor = MonitorGrid::uniform(0.0, 1.0, 4).unwrap();
        let spec = PathSpec {
            model: &m,
            monitor: &monitor,
            a: 1.0,
            state: 0,
            substeps: 2,
            seed: 3,
            antithetic: false,
            max_sampling: MaxSampling::Bridge,
        };
        let batch = simulate_paths(&spec, 0..100_000).unwrap();
        let e = evaluate_functional(&batch, |b, i| b.log_price(i, 4).exp());
        assert!((e.mean - 1.0).abs() < 3.0 * e.se, "{e:?}");
    }

    #[test]
    fn running_max_dominates_price() {
        let m = RegimeModel::new(vec![0.3, -0.4], vec![0.2, 0.6], vec![vec![-3.0, 3.0], vec![1.0, -1.0]], 1.0).unwrap();
        let monitor = MonitorGrid::uniform(0.0, 1.0, 10).unwrap();
        let spec = PathSpec {
            model: &m,
            monitor: &monitor,
            a: 1.0,
            state: 1,
            substeps: 3,
            seed: 9,
            antithetic: true,
            max_sampling: MaxSampling::Bridge,
        };
        let batch = simulate_paths(&spec, 0..2000).unwrap();
        for i in 0..batch.paths {
            assert_eq!(batch.log_ratio(i, 0), 0.0);
            for p in 0..=10 {
                assert!(batch.log_ratio(i, p) >= 0.0);
                if p > 0 {
                    assert!(batch.log_max(i, p) >= batch.log_max(i, p - 1));
                }
            }
            assert_eq!(batch.state(i, 0), 1);
            assert_eq!(batch.terminal_state(i), batch.chains[i].final_state());
        }
    }

    #[test]
    fn chunking_does_not_change_paths() {
        let m = RegimeModel::new(vec![0.2, -0.2], vec![0.5, 0.3], vec![vec![-2.5, 2.5], vec![2.0, -2.0]], 0.5).unwrap();
        let monitor = MonitorGrid::uniform(0.0, 0.5, 5).unwrap();
        let spec = PathSpec {
            model: &m,
            monitor: &monitor,
            a: 1.2,
            state: 0,
            substeps: 2,
            seed: 1,
            antithetic: false,
            max_sampling: MaxSampling::Bridge,
        };
        let whole = simulate_paths(&spec, 0..40).unwrap();
        let tail = simulate_paths(&spec, 24..40).unwrap();
        for i in 0..16 {
            for p in 0..6 {
                assert_eq!(whole.log_max(24 + i, p), tail.log_max(i, p));
                assert_eq!(whole.log_price(24 + i, p), tail.log_price(i, p));
            }
        }
    }

    #[test]
    fn antithetic_pairs_mirror_increments() {
        let m = constant(0.0, 0.4);
        let monitor = MonitorGrid::uniform(0.0, 1.0, 1).unwrap();
        let spec = PathSpec {
            model: &m,
            monitor: &monitor,
            a: 1.0,
            state: 0,
            substeps: 1,
            seed: 5,
            antithetic: true,
            max_sampling: MaxSampling::Bridge,
        };
        let b = simulate_paths(&spec, 0..10).unwrap();
        for i in (0..10).step_by(2) {
            let drift = -0.5 * 0.16;
            assert!(((b.log_price(i, 1) - drift) + (b.log_price(i + 1, 1) - drift)).abs() < 1e-12);
        }
        assert!(simulate_paths(&spec, 1..10).is_err());
    }

    #[test]
    fn immediate_policy_at_terminal_time() {
        let m = constant(0.1, 0.3);
        let monitor = MonitorGrid::uniform(0.0, 1.0, 2).unwrap();
        let spec = PathSpec {
            model: &m,
            monitor: &monitor,
            a: 1.0,
            state: 0,
            substeps: 1,
            seed: 1,
            antithetic: false,
            max_sampling: MaxSampling::Bridge,
        };
        let batch = simulate_paths(&spec, 0..500).unwrap();
        for i in 0..500 {
            assert!(PolicySpec::Immediate.payoff(&batch, i) >= 1.0);
            assert!(PolicySpec::FixedTime(1.0).payoff(&batch, i) >= 1.0);
            assert_eq!(PolicySpec::FixedTime(0.4).stopping_index(&batch, i), 1);
        }
    }
}
