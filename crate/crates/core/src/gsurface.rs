//! The G-function `G(t, a, j) = E[max(a, max_{t<=s<=T} Y_s / Y_t) | beta_t = j]`:
//! backward recursion (production), a direct integral for constant
//! coefficients, and Monte Carlo.

use crate::density::{for_each_node, GaussLegendre, QuadratureSpec};
use crate::error::{Error, Result};
use crate::grid::{Layer, SolverGrid};
use crate::kernel::{build_operators, StepOperator, Tilt};
use crate::model::RegimeModel;
use crate::oracle::{evaluate_policy, simulate_paths, MaxSampling, MonitorGrid, PathSpec, PolicySpec};
use crate::stats::Estimate;

/// Where the single-switch term reads the post-switch layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GStepMode {
    /// At the end of the step, `t_k`.
    #[default]
    StepEnd,
    /// At the switch time, interpolating linearly in time between the two
    /// layers of the step.
    TimeInterpolated { iterations: usize },
}

/// `G_n` on every `(t_k, a_i, j)`.
#[derive(Debug, Clone)]
pub struct GSurface {
    grid: SolverGrid,
    layers: Vec<Layer>,
}

impl GSurface {
    pub fn grid(&self) -> &SolverGrid {
        &self.grid
    }

    pub fn num_states(&self) -> usize {
        self.layers[0].num_states()
    }

    pub fn layer(&self, k: usize) -> &Layer {
        &self.layers[k]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn value(&self, k: usize, state: usize, i: usize) -> f64 {
        self.layers[k].get(state, i)
    }

    /// `G_n(t_k, a, j)` off the grid nodes.
    pub fn at(&self, k: usize, state: usize, a: f64) -> Result<f64> {
        if !(a >= 1.0) {
            return Err(Error::InterpolationOutOfRange(a.ln()));
        }
        self.layers[k].interpolate(state, a.ln())
    }
}

pub fn g_terminal(grid: &SolverGrid, num_states: usize) -> Layer {
    Layer::terminal(grid, num_states)
}

/// One backward step of the recursion from the layer at `t_k`.
pub fn g_step(op: &StepOperator, next: &Layer, mode: GStepMode) -> Layer {
    debug_assert_eq!(op.tilt(), Tilt::G);
    match mode {
        GStepMode::StepEnd => op.apply(next),
        GStepMode::TimeInterpolated { iterations } => op.apply_time_interpolated(next, iterations),
    }
}

/// Full backward pass from the terminal layer.
pub fn compute_g_surface(op: &StepOperator, num_states: usize, mode: GStepMode) -> GSurface {
    let grid = op.grid().clone();
    let n = grid.n();
    let mut layers = Vec::with_capacity(n + 1);
    layers.push(g_terminal(&grid, num_states));
    for _ in 0..n {
        let next = layers.last().expect("terminal layer present");
        let prev = g_step(op, next, mode);
        layers.push(prev);
    }
    layers.reverse();
    GSurface { grid, layers }
}

/// Builds the operators and runs [`compute_g_surface`].
pub fn g_surface(model: &RegimeModel, grid: &SolverGrid, spec: &QuadratureSpec) -> Result<GSurface> {
    let (g, _) = build_operators(model, grid, spec)?;
    Ok(compute_g_surface(&g, model.num_states(), GStepMode::StepEnd))
}

/// Constant coefficients: `G(t, a) = E[max(a, exp(sigma S))]` with `S` the
/// maximum over `[0, T - t]` of a Brownian motion with drift `lambda`,
/// integrated directly against the joint density after removing the drift.
pub fn g_constant_direct(lambda: f64, sigma: f64, t: f64, a: f64, horizon: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(a >= 1.0) {
        return Err(Error::InvalidArgument(format!("a = {a} must be >= 1")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} must be positive")));
    }
    let tau = horizon - t;
    if tau < 0.0 {
        return Err(Error::InvalidArgument(format!("t = {t} exceeds the horizon {horizon}")));
    }
    if tau == 0.0 {
        return Ok(a);
    }
    let l = a.ln();
    let gy = GaussLegendre::new(spec.nodes_y);
    let gx = GaussLegendre::new(spec.nodes_x);
    let mut total = 0.0;
    for_each_node(&gy, &gx, spec.trunc_sd, tau, Some(l / sigma), |x, y, w| {
        total += w * (l.max(sigma * y) + lambda * x - 0.5 * lambda * lambda * tau).exp();
    });
    Ok(total)
}

/// Monte Carlo estimate of `G(t, a, j)`.
pub fn g_mc(
    model: &RegimeModel,
    t: f64,
    a: f64,
    state: usize,
    paths: u64,
    substeps: usize,
    seed: u64,
) -> Result<Estimate> {
    if paths < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    if t >= model.horizon() {
        return Ok(Estimate::exact(a));
    }
    let monitor = MonitorGrid::new(vec![t, model.horizon()])?;
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
    let batch = simulate_paths(&spec, 0..paths)?;
    Ok(evaluate_policy(&batch, &PolicySpec::Immediate))
}
