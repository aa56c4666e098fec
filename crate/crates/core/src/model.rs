//! Regime-switching market model.

use crate::error::{Error, ModelViolation, Result};

/// Absolute tolerance on generator row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Per-state drift `mu`, volatility `sigma` and generator `Q` of the regime
/// chain over the horizon `[0, T]`. Only constructible through validation,
/// so holders can rely on every invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeModel {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    generator: Vec<Vec<f64>>,
    horizon: f64,
}

/// Drift of the log-price measured in units of volatility,
/// `u(j) = mu(j) / sigma(j) - sigma(j) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftParams {
    pub u: Vec<f64>,
    /// Single-regime alias of `u[0]`.
    pub lambda: Option<f64>,
}

impl RegimeModel {
    /// Validates and builds a model, reporting every violated invariant.
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, generator: Vec<Vec<f64>>, horizon: f64) -> Result<Self> {
        validate_model(mu, sigma, generator, horizon, false)
    }

    /// Constant-coefficient model: one regime with `Q = [[0]]`.
    pub fn constant(mu: f64, sigma: f64, horizon: f64) -> Result<Self> {
        Self::new(vec![mu], vec![sigma], vec![vec![0.0]], horizon)
    }

    pub fn num_states(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn generator(&self) -> &[Vec<f64>] {
        &self.generator
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.generator[i][j]
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Copy of the model with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::new(self.mu.clone(), self.sigma.clone(), self.generator.clone(), horizon)
    }

    /// Re-checks the invariants of an existing model.
    pub fn validate(&self) -> Result<()> {
        let violations = violations(&self.mu, &self.sigma, &self.generator, self.horizon);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    pub fn drift_params(&self) -> DriftParams {
        drift_params(self)
    }
}

/// Checks all model invariants and returns the model iff none is violated.
///
/// With `repair` set, each generator diagonal is first recomputed as the
/// negated sum of its row's off-diagonal entries.
pub fn validate_model(
    mu: Vec<f64>,
    sigma: Vec<f64>,
    mut generator: Vec<Vec<f64>>,
    horizon: f64,
    repair: bool,
) -> Result<RegimeModel> {
    if repair {
        for (i, row) in generator.iter_mut().enumerate() {
            if i < row.len() {
                let off: f64 = row.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, v)| v).sum();
                row[i] = -off;
            }
        }
    }
    let v = violations(&mu, &sigma, &generator, horizon);
    if !v.is_empty() {
        return Err(Error::InvalidModel(v));
    }
    Ok(RegimeModel { mu, sigma, generator, horizon })
}

fn violations(mu: &[f64], sigma: &[f64], generator: &[Vec<f64>], horizon: f64) -> Vec<ModelViolation> {
    let m = mu.len();
    let mut out = Vec::new();
    if m == 0 {
        out.push(ModelViolation::DimensionMismatch { what: "mu", expected: 1, found: 0 });
        return out;
    }
    if sigma.len() != m {
        out.push(ModelViolation::DimensionMismatch { what: "sigma", expected: m, found: sigma.len() });
    }
    if generator.len() != m {
        out.push(ModelViolation::DimensionMismatch { what: "generator", expected: m, found: generator.len() });
    }
    for (j, &x) in mu.iter().enumerate() {
        if !x.is_finite() {
            out.push(ModelViolation::NonFiniteDrift { state: j });
        }
    }
    for (j, &s) in sigma.iter().enumerate() {
        if !(s > 0.0 && s.is_finite()) {
            out.push(ModelViolation::NonPositiveSigma { state: j, value: s });
        }
    }
    for (i, row) in generator.iter().enumerate() {
        if row.len() != m {
            out.push(ModelViolation::DimensionMismatch { what: "generator row", expected: m, found: row.len() });
            continue;
        }
        let residual: f64 = row.iter().sum();
        if !(residual.abs() <= ROW_SUM_TOL) {
            out.push(ModelViolation::BadGeneratorRow { row: i, residual });
        }
        for (k, &q) in row.iter().enumerate() {
            if k == i {
                if q > 0.0 {
                    out.push(ModelViolation::PositiveDiagonal { row: i, value: q });
                }
            } else if !(q >= 0.0) {
                out.push(ModelViolation::NegativeOffDiagonal { row: i, col: k, value: q });
            }
        }
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        out.push(ModelViolation::NonPositiveHorizon { value: horizon });
    }
    out
}

pub fn drift_params(model: &RegimeModel) -> DriftParams {
    let u: Vec<f64> = model.mu.iter().zip(&model.sigma).map(|(&mu, &s)| mu / s - s / 2.0).collect();
    let lambda = (u.len() == 1).then(|| u[0]);
    DriftParams { u, lambda }
}
