//! Continuous-time Markov chain utilities for the regime process.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::RegimeModel;

const TAYLOR_TERMS: usize = 12;

/// Row-stochastic matrix `exp(dt Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub dt: f64,
    pub probs: Vec<Vec<f64>>,
    /// Largest `|row sum - 1|` before rows were renormalized.
    pub raw_residual: f64,
}

impl TransitionMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i][j]
    }

    pub fn max_row_residual(&self) -> f64 {
        self.probs.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len();
    let mut c = vec![vec![0.0; m]; m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

fn identity(m: usize) -> Vec<Vec<f64>> {
    (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

pub fn matrix_product(a: &TransitionMatrix, b: &TransitionMatrix) -> Vec<Vec<f64>> {
    matmul(&a.probs, &b.probs)
}

/// `exp(dt Q)` by scaling and squaring around a fixed-order Taylor core.
pub fn transition_matrix(model: &RegimeModel, dt: f64) -> Result<TransitionMatrix> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be a nonnegative finite time")));
    }
    let m = model.num_states();
    if dt == 0.0 {
        return Ok(TransitionMatrix { dt, probs: identity(m), raw_residual: 0.0 });
    }
    let q = model.generator();
    let norm = q.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max) * dt;
    let mut squarings = 0;
    while norm / f64::powi(2.0, squarings) > 0.5 {
        squarings += 1;
    }
    let scale = dt / f64::powi(2.0, squarings);
    let a: Vec<Vec<f64>> = q.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();

    // Horner: I + A (I + A/2 (I + A/3 (...)))
    let mut e = identity(m);
    for k in (1..=TAYLOR_TERMS).rev() {
        let mut t = matmul(&a, &e);
        for (i, row) in t.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
            row[i] += 1.0;
        }
        e = t;
    }
    for _ in 0..squarings {
        e = matmul(&e, &e);
    }

    let mut raw_residual: f64 = 0.0;
    for row in e.iter_mut() {
        for v in row.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let s: f64 = row.iter().sum();
        raw_residual = raw_residual.max((s - 1.0).abs());
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    Ok(TransitionMatrix { dt, probs: e, raw_residual })
}

/// Holding time in `state` and the state entered at the end of it.
///
/// Absorbing states (`q_jj = 0`, in particular every single-regime model)
/// return an infinite holding time and no next state.
pub fn sample_holding_and_jump<R: Rng + ?Sized>(model: &RegimeModel, state: usize, rng: &mut R) -> (f64, Option<usize>) {
    let rate = -model.q(state, state);
    if rate <= 0.0 {
        return (f64::INFINITY, None);
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let hold = -u.ln() / rate;
    let mut v = rng.random::<f64>() * rate;
    let m = model.num_states();
    let mut last = None;
    for i in (0..m).filter(|&i| i != state) {
        let q = model.q(state, i);
        if q <= 0.0 {
            continue;
        }
        last = Some(i);
        if v < q {
            return (hold, Some(i));
        }
        v -= q;
    }
    (hold, last)
}

/// Piecewise-constant regime path on `[t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath {
    pub t0: f64,
    pub t1: f64,
    /// Strictly increasing jump times in `(t0, t1]`.
    pub jump_times: Vec<f64>,
    /// Initial state followed by the state entered at each jump.
    pub states: Vec<usize>,
}

impl ChainPath {
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.states[k]
    }

    pub fn final_state(&self) -> usize {
        *self.states.last().expect("chain path always has an initial state")
    }
}

/// Exact simulation of the chain from `state` at `t0` up to `t1`.
pub fn sample_chain_path<R: Rng + ?Sized>(
    model: &RegimeModel,
    state: usize,
    t0: f64,
    t1: f64,
    rng: &mut R,
) -> Result<ChainPath> {
    if !(t1 >= t0) {
        return Err(Error::InvalidArgument(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    let mut path = ChainPath { t0, t1, jump_times: Vec::new(), states: vec![state] };
    let mut t = t0;
    let mut current = state;
    loop {
        let (hold, next) = sample_holding_and_jump(model, current, rng);
        let Some(next) = next else { break };
        t += hold;
        if t > t1 {
            break;
        }
        path.jump_times.push(t);
        path.states.push(next);
        current = next;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn two_state() -> RegimeModel {
        RegimeModel::new(vec![0.2, -0.2], vec![0.5, 0.3], vec![vec![-2.5, 2.5], vec![2.0, -2.0]], 0.5).unwrap()
    }

    /// Closed form for two states: `Pi + exp(-(q1+q2) t) (I - Pi)`.
    fn two_state_exact(q1: f64, q2: f64, t: f64) -> [[f64; 2]; 2] {
        let s = q1 + q2;
        let pi = [q2 / s, q1 / s];
        let e = (-s * t).exp();
        [[pi[0] + e * (1.0 - pi[0]), pi[1] - e * pi[1]], [pi[0] - e * pi[0], pi[1] + e * (1.0 - pi[1])]]
    }

    #[test]
    fn zero_time_is_identity() {
        let p = transition_matrix(&two_state(), 0.0).unwrap();
        assert_eq!(p.probs, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn long_time_reaches_stationary_law() {
        let p = transition_matrix(&two_state(), 100.0).unwrap();
        for row in &p.probs {
            assert!((row[0] - 4.0 / 9.0).abs() < 1e-10);
            assert!((row[1] - 5.0 / 9.0).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_two_state_closed_form() {
        for t in [0.001, 0.1, 0.5, 3.0] {
            let p = transition_matrix(&two_state(), t).unwrap();
            let e = two_state_exact(2.5, 2.0, t);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((p.get(i, j) - e[i][j]).abs() < 1e-13, "t={t} ({i},{j})");
                }
            }
            assert!(p.raw_residual < 1e-12);
            assert!(p.max_row_residual() < 1e-10);
        }
    }

    #[test]
    fn chapman_kolmogorov() {
        let q = RegimeModel::new(
            vec![0.0; 3],
            vec![1.0; 3],
            vec![vec![-3.0, 1.0, 2.0], vec![0.5, -0.5, 0.0], vec![4.0, 1.0, -5.0]],
            1.0,
        )
        .unwrap();
        let (s, t) = (0.37, 1.21);
        let ps = transition_matrix(&q, s).unwrap();
        let pt = transition_matrix(&q, t).unwrap();
        let pst = transition_matrix(&q, s + t).unwrap();
        let prod = matrix_product(&ps, &pt);
        for i in 0..3 {
            for j in 0..3 {
                assert!((prod[i][j] - pst.get(i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn holding_time_mean_and_embedded_jump() {
        let m = two_state();
        let mut rng = stream_rng(11, 0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let (h, next) = sample_holding_and_jump(&m, 0, &mut rng);
            assert_eq!(next, Some(1));
            sum += h;
            sum2 += h * h;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 0.4).abs() < 4.0 * se, "mean {mean} se {se}");
        let (_, next) = sample_holding_and_jump(&m, 1, &mut rng);
        assert_eq!(next, Some(0));
    }

    #[test]
    fn single_regime_never_jumps() {
        let m = RegimeModel::constant(0.1, 0.2, 1.0).unwrap();
        let mut rng = stream_rng(1, 1);
        assert_eq!(sample_holding_and_jump(&m, 0, &mut rng), (f64::INFINITY, None));
        let p = sample_chain_path(&m, 0, 0.0, 1.0, &mut rng).unwrap();
        assert!(p.jump_times.is_empty());
        assert_eq!(p.states, vec![0]);
    }

    #[test]
    fn empty_interval_has_no_jumps() {
        let mut rng = stream_rng(1, 2);
        let p = sample_chain_path(&two_state(), 0, 0.3, 0.3, &mut rng).unwrap();
        assert!(p.jump_times.is_empty());
        assert!(sample_chain_path(&two_state(), 0, 0.3, 0.2, &mut rng).is_err());
    }

    #[test]
    fn path_invariants() {
        let m = two_state();
        let mut rng = stream_rng(5, 0);
        for _ in 0..1000 {
            let p = sample_chain_path(&m, 1, 0.0, 2.0, &mut rng).unwrap();
            assert_eq!(p.states.len(), p.jump_times.len() + 1);
            assert!(p.jump_times.windows(2).all(|w| w[0] < w[1]));
            assert!(p.states.windows(2).all(|w| w[0] != w[1]));
            assert!(p.jump_times.iter().all(|&t| t > 0.0 && t <= 2.0));
        }
    }
}
