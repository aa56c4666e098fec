//! Joint density of Brownian motion and its running maximum, and the
//! Gauss–Legendre rules used to integrate against it.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Node counts and truncation radius for the `(x, y, r)` integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub nodes_y: usize,
    pub nodes_x: usize,
    pub nodes_r: usize,
    /// Truncation radius in units of `sqrt(r)`.
    pub trunc_sd: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes_y: 48, nodes_x: 48, nodes_r: 4, trunc_sd: 8.0 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.nodes_y < 4 {
            bad.push(format!("nodes_y = {} < 4", self.nodes_y));
        }
        if self.nodes_x < 4 {
            bad.push(format!("nodes_x = {} < 4", self.nodes_x));
        }
        if self.nodes_r < 2 {
            bad.push(format!("nodes_r = {} < 2", self.nodes_r));
        }
        if !(self.trunc_sd > 0.0 && self.trunc_sd.is_finite()) {
            bad.push(format!("trunc_sd = {} must be positive", self.trunc_sd));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidQuadrature(bad.join(", ")))
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to `[lo, hi]`.
    pub fn on(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(lo, hi).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Joint density of `(B_r, max_{s<=r} B_s)` at `(x, y)`.
///
/// Zero outside the support `y >= 0, x <= y`.
pub fn phi_density(r: f64, x: f64, y: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveTime(r));
    }
    Ok(phi_unchecked(r, x, y))
}

#[inline]
pub(crate) fn phi_unchecked(r: f64, x: f64, y: f64) -> f64 {
    if y < 0.0 || x > y {
        return 0.0;
    }
    let z = 2.0 * y - x;
    (2.0 / PI).sqrt() * z / (r * r.sqrt()) * (-z * z / (2.0 * r)).exp()
}

/// One weighted quadrature node over the `(x, y)` triangle. The weight
/// already includes the density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleNode {
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

/// Tensor Gauss–Legendre rule on the truncated support of `phi_r`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub r: f64,
    pub nodes: Vec<RuleNode>,
}

impl TriangleRule {
    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.w).sum()
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.nodes.iter().map(|n| n.w * f(n.x, n.y)).sum()
    }
}

/// Builds the rule on `{0 <= y <= c sqrt(r), -c sqrt(r) <= x <= y}` with
/// `c = trunc_sd`: `y` outer, `x = x_lo + s (y - x_lo)` inner.
pub fn build_rule(spec: &QuadratureSpec, r: f64) -> Result<TriangleRule> {
    build_rule_split(spec, r, None)
}

/// As [`build_rule`], but with the outer `y` interval split at `y_split`
/// (when it lies strictly inside) so an integrand with a kink along that
/// line is integrated piecewise-smoothly. Each piece gets `nodes_y` nodes.
pub fn build_rule_split(spec: &QuadratureSpec, r: f64, y_split: Option<f64>) -> Result<TriangleRule> {
    spec.validate()?;
    if !(r > 0.0) {
        return Err(Error::NonPositiveTime(r));
    }
    let gy = GaussLegendre::new(spec.nodes_y);
    let gx = GaussLegendre::new(spec.nodes_x);
    let mut nodes = Vec::with_capacity(2 * spec.nodes_x * spec.nodes_y);
    for_each_node(&gy, &gx, spec.trunc_sd, r, y_split, |x, y, w| nodes.push(RuleNode { x, y, w }));
    Ok(TriangleRule { r, nodes })
}

/// Streams the nodes of [`build_rule_split`] without allocating.
pub(crate) fn for_each_node(
    gy: &GaussLegendre,
    gx: &GaussLegendre,
    trunc_sd: f64,
    r: f64,
    y_split: Option<f64>,
    mut f: impl FnMut(f64, f64, f64),
) {
    let sr = r.sqrt();
    let y_hi = trunc_sd * sr;
    let x_lo = -trunc_sd * sr;
    let mut piece = |a: f64, b: f64| {
        for (y, wy) in gy.on(a, b) {
            let width = y - x_lo;
            for (s, ws) in gx.on(0.0, 1.0) {
                let x = x_lo + s * width;
                let w = wy * ws * width * phi_unchecked(r, x, y);
                f(x, y, w);
            }
        }
    };
    match y_split {
        Some(c) if c > 0.0 && c < y_hi => {
            piece(0.0, c);
            piece(c, y_hi);
        }
        _ => piece(0.0, y_hi),
    }
}

/// Quadrature value of `P(max_{s<=r} B_s >= y)`, the mass of `phi_r` over
/// `y' >= y`. Used to check the density against the reflection principle
/// `2 Phi(-y / sqrt(r))`.
pub fn max_density_marginal_check(r: f64, y: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveTime(r));
    }
    if !(y >= 0.0) {
        return Err(Error::InvalidArgument(format!("y = {y} must be nonnegative")));
    }
    let spec = QuadratureSpec::default();
    let gy = GaussLegendre::new(spec.nodes_y);
    let gx = GaussLegendre::new(spec.nodes_x);
    let sr = r.sqrt();
    let x_lo = -spec.trunc_sd * sr;
    let y_hi = y + spec.trunc_sd * sr;
    let mut total = 0.0;
    for (yy, wy) in gy.on(y, y_hi) {
        let width = yy - x_lo;
        for (s, ws) in gx.on(0.0, 1.0) {
            let x = x_lo + s * width;
            total += wy * ws * width * phi_unchecked(r, x, yy);
        }
    }
    Ok(total)
}
