//! Time discretization and the log-spaced grid of max-to-price ratios.

use crate::error::{Error, Result};
use crate::model::RegimeModel;

/// How layer values are read between ratio nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Two-point linear in `log a`.
    Linear,
    /// Piecewise cubic Hermite in `log a` with fourth-order slopes,
    /// limited so that monotone data gives a monotone interpolant.
    #[default]
    Cubic,
}

/// Time steps `t_k = k T / n` and ratio nodes `a_i = exp(i h)` on
/// `[1, A_max]`, uniform in `l = log a`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverGrid {
    n: usize,
    horizon: f64,
    a_points: usize,
    log_a_max: f64,
    interpolation: Interpolation,
}

impl SolverGrid {
    pub fn new(n: usize, horizon: f64, a_points: usize, a_max: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidGrid("n must be at least 1".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!("horizon {horizon} must be positive")));
        }
        if a_points < 2 {
            return Err(Error::InvalidGrid(format!("a_points = {a_points} must be at least 2")));
        }
        if !(a_max > 1.0 && a_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("a_max = {a_max} must exceed 1")));
        }
        Ok(Self { n, horizon, a_points, log_a_max: a_max.ln(), interpolation: Interpolation::default() })
    }

    /// Grid for `model` with the default ratio range from [`default_a_max`].
    pub fn for_model(model: &RegimeModel, n: usize, a_points: usize) -> Result<Self> {
        Self::new(n, model.horizon(), a_points, default_a_max(model))
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n {
            self.horizon
        } else {
            k as f64 * self.delta()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|k| self.time(k)).collect()
    }

    pub fn a_points(&self) -> usize {
        self.a_points
    }

    pub fn log_a_max(&self) -> f64 {
        self.log_a_max
    }

    pub fn a_max(&self) -> f64 {
        self.a_node(self.a_points - 1)
    }

    /// Spacing in `log a`.
    pub fn h(&self) -> f64 {
        self.log_a_max / (self.a_points - 1) as f64
    }

    pub fn log_a_node(&self, i: usize) -> f64 {
        if i + 1 == self.a_points {
            self.log_a_max
        } else {
            i as f64 * self.h()
        }
    }

    pub fn a_node(&self, i: usize) -> f64 {
        self.log_a_node(i).exp()
    }

    pub fn a_nodes(&self) -> Vec<f64> {
        (0..self.a_points).map(|i| self.a_node(i)).collect()
    }

    /// Smallest step index `k` with `t_k >= s`.
    pub fn ceil_index(&self, s: f64) -> Result<usize> {
        if !(s >= 0.0 && s <= self.horizon) {
            return Err(Error::InvalidArgument(format!("time {s} outside [0, {}]", self.horizon)));
        }
        let x = s / self.delta();
        let mut k = x.ceil() as usize;
        // Times within rounding of a grid point belong to it.
        if k > 0 && (x - (k - 1) as f64) <= 1e-9 {
            k -= 1;
        }
        Ok(k.min(self.n))
    }

    /// `ceil_n(s) = min { t_k : t_k >= s }`.
    pub fn ceil_time(&self, s: f64) -> Result<f64> {
        Ok(self.time(self.ceil_index(s)?))
    }

    /// Largest step index `k` with `t_k <= s`.
    pub fn floor_index(&self, s: f64) -> usize {
        let x = (s / self.delta()).max(0.0);
        let k = x.floor() as usize;
        if (k + 1) as f64 - x <= 1e-9 {
            (k + 1).min(self.n)
        } else {
            k.min(self.n)
        }
    }
}

/// `exp(10 (max_j |u(j)| + max_j sigma(j)) sqrt(T))`.
pub fn default_a_max(model: &RegimeModel) -> f64 {
    let d = model.drift_params();
    let umax = d.u.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    let smax = model.sigma().iter().fold(0.0f64, |m, &s| m.max(s));
    (10.0 * (umax + smax) * model.horizon().sqrt()).exp()
}

/// One time layer of a surface: a value per `(state, a-node)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    a_points: usize,
    h: f64,
    log_a_max: f64,
    interpolation: Interpolation,
    values: Vec<f64>,
    /// Limited slopes of the excess per state, in units of one cell.
    slopes: Vec<f64>,
    reflecting: bool,
}

impl Layer {
    /// The terminal layer `f(T, a, j) = a`.
    pub fn terminal(grid: &SolverGrid, num_states: usize) -> Self {
        let nodes = grid.a_nodes();
        let values = (0..num_states).flat_map(|_| nodes.iter().copied()).collect();
        Self::from_values(grid, values)
    }

    pub fn from_values(grid: &SolverGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len() % grid.a_points(), 0, "layer length must be a multiple of a_points");
        let mut layer = Self {
            a_points: grid.a_points(),
            h: grid.h(),
            log_a_max: grid.log_a_max(),
            interpolation: grid.interpolation(),
            values,
            slopes: Vec::new(),
            reflecting: false,
        };
        layer.update_slopes();
        layer
    }

    /// Marks the layer as a function with zero `a`-derivative at `a = 1`,
    /// which every layer before the horizon is, and uses that slope at the
    /// first node.
    pub fn reflecting(mut self) -> Self {
        self.reflecting = true;
        self.update_slopes();
        self
    }

    fn update_slopes(&mut self) {
        let start = if self.reflecting { Some(-self.h) } else { None };
        self.slopes = (0..self.num_states())
            .flat_map(|s| limited_slopes(&self.excess(s), self.interpolation, start))
            .collect();
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.a_points
    }

    pub fn a_points(&self) -> usize {
        self.a_points
    }

    pub fn get(&self, state: usize, i: usize) -> f64 {
        self.values[state * self.a_points + i]
    }

    pub fn state(&self, state: usize) -> &[f64] {
        &self.values[state * self.a_points..(state + 1) * self.a_points]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Slopes of the excess used between nodes, scaled by the spacing.
    pub fn slopes(&self, state: usize) -> &[f64] {
        &self.slopes[state * self.a_points..(state + 1) * self.a_points]
    }

    fn log_node(&self, i: usize) -> f64 {
        if i + 1 == self.a_points {
            self.log_a_max
        } else {
            i as f64 * self.h
        }
    }

    /// Excess over the ratio, `f(a_i) - a_i`, for one state.
    pub fn excess(&self, state: usize) -> Vec<f64> {
        self.state(state).iter().enumerate().map(|(i, &v)| v - self.log_node(i).exp()).collect()
    }

    /// Value at log-ratio `l >= 0`: `exp(l)` plus the interpolated excess,
    /// held constant beyond `A_max`.
    pub fn interpolate(&self, state: usize, l: f64) -> Result<f64> {
        if !(l >= 0.0) {
            return Err(Error::InterpolationOutOfRange(l));
        }
        let st = stencil(l, self.h, self.a_points, self.interpolation);
        let row = self.state(state);
        let d = self.slopes(state);
        let excess: f64 = st.nodes().map(|(k, wv, ws)| wv * (row[k] - self.log_node(k).exp()) + ws * d[k]).sum();
        Ok(l.exp() + excess)
    }
}

/// Weights reading a grid function at one point: `value[m]` multiplies the
/// value at node `start + m`, `slope[m]` its slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Stencil {
    pub start: usize,
    pub len: usize,
    pub value: [f64; 2],
    pub slope: [f64; 2],
}

impl Stencil {
    pub fn nodes(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.len).map(move |m| (self.start + m, self.value[m], self.slope[m]))
    }
}

/// Interpolation stencil for `l` on the uniform grid `i h`, `i < points`;
/// beyond the last node the stencil is that node alone.
#[inline]
pub(crate) fn stencil(l: f64, h: f64, points: usize, scheme: Interpolation) -> Stencil {
    let pos = l / h;
    let last = points - 1;
    if pos >= last as f64 {
        return Stencil { start: last, len: 1, value: [1.0, 0.0], slope: [0.0; 2] };
    }
    let i = pos.floor() as usize;
    let s = pos - i as f64;
    if scheme == Interpolation::Linear || points < 4 {
        return Stencil { start: i, len: 2, value: [1.0 - s, s], slope: [0.0; 2] };
    }
    let (s2, s3) = (s * s, s * s * s);
    Stencil {
        start: i,
        len: 2,
        value: [2.0 * s3 - 3.0 * s2 + 1.0, 3.0 * s2 - 2.0 * s3],
        slope: [s3 - 2.0 * s2 + s, s3 - s2],
    }
}

/// Node slopes of `f` (per cell) for the Hermite interpolant.
///
/// Fourth-order centred differences inside, third-order one-sided ones at
/// the two nodes nearest each end. Where the data is monotone on both sides
/// the slope is forced to agree in sign and capped at three times the
/// smaller secant, which keeps every cell monotone; at a strict extremum
/// it is left as is. `start` replaces the raw slope at the first node.
pub fn limited_slopes(f: &[f64], scheme: Interpolation, start: Option<f64>) -> Vec<f64> {
    let p = f.len();
    if scheme == Interpolation::Linear || p < 4 {
        return vec![0.0; p];
    }
    let raw = |i: usize| -> f64 {
        if i >= 2 && i + 2 < p {
            (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / 12.0
        } else if i == 0 {
            if let Some(d) = start {
                return d;
            }
            (-11.0 * f[0] + 18.0 * f[1] - 9.0 * f[2] + 2.0 * f[3]) / 6.0
        } else if i == 1 {
            (-2.0 * f[0] - 3.0 * f[1] + 6.0 * f[2] - f[3]) / 6.0
        } else if i + 1 == p {
            (11.0 * f[p - 1] - 18.0 * f[p - 2] + 9.0 * f[p - 3] - 2.0 * f[p - 4]) / 6.0
        } else {
            (2.0 * f[p - 1] + 3.0 * f[p - 2] - 6.0 * f[p - 3] + f[p - 4]) / 6.0
        }
    };
    let secant = |i: usize| f[i + 1] - f[i];
    (0..p)
        .map(|i| {
            let d = raw(i);
            let (left, right) = (if i > 0 { Some(secant(i - 1)) } else { None }, if i + 1 < p { Some(secant(i)) } else { None });
            let (lo, hi) = match (left, right) {
                (Some(a), Some(b)) if a * b < 0.0 => return d,
                (Some(a), Some(b)) => (a, b),
                (Some(a), None) => (a, a),
                (None, Some(b)) => (b, b),
                (None, None) => return 0.0,
            };
            if lo == 0.0 || hi == 0.0 || d * lo <= 0.0 {
                return 0.0;
            }
            let cap = 3.0 * lo.abs().min(hi.abs());
            d.signum() * d.abs().min(cap)
        })
        .collect()
}
