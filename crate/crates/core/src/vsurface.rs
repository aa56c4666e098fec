//! The value function by backward induction over the time grid.
//!
//! With stopping restricted to grid times, the continuation value is the
//! one-step expectation of the value at the next time, and the value is the
//! smaller of stopping now and continuing:
//!
//! ```text
//! C(t_{k-1}, a, j) = E[ V(t_k, A', beta') | a, j ]
//! V(t_{k-1}, a, j) = min( G(t_{k-1}, a, j), C(t_{k-1}, a, j) )
//! ```
//!
//! `V(t_k, .) = min(G, V)(t_k, .)`, so `C` is the expectation of `G ∧ V`.
//! The expectation uses the untilted kernel: the payoff is a ratio to the
//! price at the stopping time, not at `t_{k-1}`.

use std::time::{Duration, Instant};

use crate::density::QuadratureSpec;
use crate::error::{Error, Result};
use crate::grid::{Layer, SolverGrid};
use crate::gsurface::{compute_g_surface, GStepMode, GSurface};
use crate::kernel::{build_operators, StepOperator, Tilt};
use crate::model::RegimeModel;
use crate::oracle::{evaluate_functional, simulate_paths, MaxSampling, MonitorGrid, PathSpec};
use crate::stats::Estimate;

/// `V_n` and the continuation value on every `(t_k, a_i, j)`.
#[derive(Debug, Clone)]
pub struct VSurface {
    grid: SolverGrid,
    values: Vec<Layer>,
    continuation: Vec<Layer>,
}

impl VSurface {
    pub fn grid(&self) -> &SolverGrid {
        &self.grid
    }

    pub fn num_states(&self) -> usize {
        self.values[0].num_states()
    }

    pub fn layer(&self, k: usize) -> &Layer {
        &self.values[k]
    }

    /// Expected value of waiting at least one step; equals `a` at `T`.
    pub fn continuation(&self, k: usize) -> &Layer {
        &self.continuation[k]
    }

    pub fn value(&self, k: usize, state: usize, i: usize) -> f64 {
        self.values[k].get(state, i)
    }

    pub fn at(&self, k: usize, state: usize, a: f64) -> Result<f64> {
        if !(a >= 1.0) {
            return Err(Error::InterpolationOutOfRange(a.ln()));
        }
        self.values[k].interpolate(state, a.ln())
    }
}

/// One backward step: returns `(C, V)` at `t_{k-1}` from `V` at `t_k` and
/// `G` at `t_{k-1}`.
///
/// The next layer already satisfies `V <= G` at every node, and the
/// integrand `G ∧ V` is taken as the interpolant of `V`.
pub fn v_step(op: &StepOperator, g_prev: &Layer, v_next: &Layer) -> (Layer, Layer) {
    debug_assert_eq!(op.tilt(), Tilt::V);
    let c = op.apply(v_next);
    let values = c.values().iter().zip(g_prev.values()).map(|(&c, &g)| c.min(g)).collect();
    let v = Layer::from_values(op.grid(), values).reflecting();
    (c, v)
}

/// Backward pass for `V` given a finished `G` surface.
pub fn compute_v_surface(op: &StepOperator, g: &GSurface) -> VSurface {
    let grid = g.grid().clone();
    let n = grid.n();
    let terminal = Layer::terminal(&grid, g.num_states());
    let mut values = vec![terminal.clone()];
    let mut continuation = vec![terminal];
    for k in (1..=n).rev() {
        let (c, v) = v_step(op, g.layer(k - 1), values.last().expect("layer present"));
        continuation.push(c);
        values.push(v);
    }
    values.reverse();
    continuation.reverse();
    VSurface { grid, values, continuation }
}

/// Wall-clock time per solver phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub assemble: Duration,
    pub g_pass: Duration,
    pub v_pass: Duration,
}

impl Timings {
    /// Time spent in the two backward inductions.
    pub fn induction(&self) -> Duration {
        self.g_pass + self.v_pass
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub v: VSurface,
    pub g: GSurface,
    pub timings: Timings,
}

/// Operators for one `(model, grid, quadrature)`, reusable across solves.
#[derive(Debug, Clone)]
pub struct Solver {
    num_states: usize,
    g_op: StepOperator,
    v_op: StepOperator,
    assemble: Duration,
    pub mode: GStepMode,
}

impl Solver {
    pub fn new(model: &RegimeModel, grid: &SolverGrid, spec: &QuadratureSpec) -> Result<Self> {
        model.validate()?;
        if (grid.horizon() - model.horizon()).abs() > 1e-12 * model.horizon() {
            return Err(Error::InvalidGrid(format!(
                "grid horizon {} differs from model horizon {}",
                grid.horizon(),
                model.horizon()
            )));
        }
        let start = Instant::now();
        let (g_op, v_op) = build_operators(model, grid, spec)?;
        Ok(Self { num_states: model.num_states(), g_op, v_op, assemble: start.elapsed(), mode: GStepMode::StepEnd })
    }

    pub fn grid(&self) -> &SolverGrid {
        self.g_op.grid()
    }

    /// Time spent assembling the step operators.
    pub fn assemble_time(&self) -> Duration {
        self.assemble
    }

    pub fn g_operator(&self) -> &StepOperator {
        &self.g_op
    }

    pub fn v_operator(&self) -> &StepOperator {
        &self.v_op
    }

    pub fn solve(&self) -> Solution {
        let start = Instant::now();
        let g = compute_g_surface(&self.g_op, self.num_states, self.mode);
        let g_pass = start.elapsed();
        let start = Instant::now();
        let v = compute_v_surface(&self.v_op, &g);
        let v_pass = start.elapsed();
        Solution { v, g, timings: Timings { assemble: self.assemble, g_pass, v_pass } }
    }
}

/// Full solve: `G` first, then `V`.
pub fn v_surface(model: &RegimeModel, grid: &SolverGrid, spec: &QuadratureSpec) -> Result<(VSurface, GSurface)> {
    let s = Solver::new(model, grid, spec)?.solve();
    Ok((s.v, s.g))
}

/// Monte Carlo estimate of the continuation value at `(t_{k-1}, a, j)`: the
/// expectation of `next` (the value layer at `t_k`) after one step of
/// length `delta`.
pub fn v_mc_step(
    model: &RegimeModel,
    t_prev: f64,
    a: f64,
    state: usize,
    delta: f64,
    next: &Layer,
    paths: u64,
    seed: u64,
) -> Result<Estimate> {
    if paths < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    let monitor = MonitorGrid::new(vec![t_prev, t_prev + delta])?;
    let spec = PathSpec {
        model,
        monitor: &monitor,
        a,
        state,
        substeps: 1,
        seed,
        antithetic: false,
        max_sampling: MaxSampling::Bridge,
    };
    let batch = simulate_paths(&spec, 0..paths)?;
    let values: Vec<f64> = (0..batch.paths)
        .map(|i| next.interpolate(batch.terminal_state(i), batch.terminal_log_ratio(i)))
        .collect::<Result<_>>()?;
    Ok(evaluate_functional(&batch, |_, i| values[i]))
}
