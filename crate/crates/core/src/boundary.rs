//! Stopping / continuation classification and the boundary curves
//! `b(t, j) = inf { a : V(t, a, j) = G(t, a, j) }`.

use crate::error::{Error, Result};
use crate::gsurface::GSurface;
use crate::vsurface::VSurface;

/// Band on `G - V` inside which a node counts as stopping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for BoundaryTolerance {
    fn default() -> Self {
        Self { abs: 1e-4, rel: 1e-4 }
    }
}

impl BoundaryTolerance {
    pub fn band(&self, g: f64) -> f64 {
        self.abs + self.rel * g.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Stop,
    Continue,
}

/// `Stop` iff `g - v <= tol_abs + tol_rel g`. A value above `g` by more
/// than the band is a [`Error::DominanceViolation`] with unknown location
/// (`t` and `a` set to NaN); [`extract_boundary`] fills the location in.
pub fn classify(v: f64, g: f64, tol: &BoundaryTolerance) -> Result<Classification> {
    let band = tol.band(g);
    if v > g + band {
        return Err(Error::DominanceViolation { t: f64::NAN, a: f64::NAN, state: 0, v, g });
    }
    Ok(if g - v <= band { Classification::Stop } else { Classification::Continue })
}

/// Stopping nodes found below the boundary at one `(t_k, j)`: the
/// stopping set there is not an up-set on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PocketWarning {
    pub k: usize,
    pub t: f64,
    pub state: usize,
    /// Ratios of the isolated stopping nodes.
    pub pockets: Vec<f64>,
}

impl std::fmt::Display for PocketWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NonMonotoneSetWarning: t = {}, state {}, {} stopping node(s) below the boundary, first at a = {}",
            self.t, self.state, self.pockets.len(), self.pockets[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurve {
    pub times: Vec<f64>,
    /// `b[k][j]`.
    pub b: Vec<Vec<f64>>,
    /// Moving median of `b` over time, window [`SMOOTHING_WINDOW`].
    pub b_smoothed: Vec<Vec<f64>>,
    pub tolerance: BoundaryTolerance,
    /// Spacing of the ratio grid in `log a`; sets the shape noise floor.
    pub log_spacing: f64,
    pub warnings: Vec<PocketWarning>,
}

pub const SMOOTHING_WINDOW: usize = 5;

impl BoundaryCurve {
    /// Curve from raw values, e.g. read back from a file.
    pub fn from_raw(times: Vec<f64>, b: Vec<Vec<f64>>, tolerance: BoundaryTolerance, log_spacing: f64) -> Result<Self> {
        if times.is_empty() || times.len() != b.len() {
            return Err(Error::InvalidArgument("boundary needs one row per time".into()));
        }
        let m = b[0].len();
        if m == 0 || b.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidArgument("boundary rows must have one value per state".into()));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("boundary times must be increasing".into()));
        }
        if let Some(&bad) = b.iter().flatten().find(|&&x| !(x >= 1.0)) {
            return Err(Error::InvalidArgument(format!("boundary value {bad} below 1")));
        }
        let b_smoothed = smooth(&b, SMOOTHING_WINDOW);
        Ok(Self { times, b, b_smoothed, tolerance, log_spacing, warnings: Vec::new() })
    }

    pub fn num_states(&self) -> usize {
        self.b[0].len()
    }

    /// `b(., j)` over the grid times.
    pub fn series(&self, state: usize) -> Vec<f64> {
        self.b.iter().map(|row| row[state]).collect()
    }

    /// Boundary at any `t`, held at the value of the last grid time `<= t`.
    pub fn b_at(&self, t: f64, state: usize) -> f64 {
        let k = self.times.partition_point(|&s| s <= t + 1e-12).max(1) - 1;
        self.b[k][state]
    }

    /// Every value multiplied by `factor` and floored at 1.
    pub fn scaled(&self, factor: f64) -> Self {
        let b: Vec<Vec<f64>> = self.b.iter().map(|row| row.iter().map(|x| (x * factor).max(1.0)).collect()).collect();
        let b_smoothed = smooth(&b, SMOOTHING_WINDOW);
        Self { b, b_smoothed, warnings: Vec::new(), ..self.clone() }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Centered moving median over time per state; windows shrink at the ends.
fn smooth(b: &[Vec<f64>], window: usize) -> Vec<Vec<f64>> {
    let n = b.len();
    let half = window / 2;
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            (0..b[k].len())
                .map(|j| {
                    let mut w: Vec<f64> = (lo..=hi).map(|i| b[i][j]).collect();
                    median(&mut w)
                })
                .collect()
        })
        .collect()
}

/// Boundary from solved surfaces. The curve sits just above the largest
/// continuation node; with `refine` it is placed at the linear root of
/// `(G - V) - band` in `log a` between that node and the next.
pub fn extract_boundary(v: &VSurface, g: &GSurface, tol: &BoundaryTolerance, refine: bool) -> Result<BoundaryCurve> {
    let grid = v.grid();
    if grid != g.grid() {
        return Err(Error::InvalidGrid("V and G surfaces are on different grids".into()));
    }
    let m = v.num_states();
    let p = grid.a_points();
    let mut b = Vec::with_capacity(grid.n() + 1);
    let mut warnings = Vec::new();
    for k in 0..=grid.n() {
        let t = grid.time(k);
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            let gaps: Vec<f64> = (0..p).map(|i| g.value(k, j, i) - v.value(k, j, i)).collect();
            let mut last_continue = None;
            let mut stops = Vec::new();
            for i in 0..p {
                let (vv, gg) = (v.value(k, j, i), g.value(k, j, i));
                match classify(vv, gg, tol) {
                    Ok(Classification::Continue) => last_continue = Some(i),
                    Ok(Classification::Stop) => stops.push(i),
                    Err(_) => {
                        return Err(Error::DominanceViolation { t, a: grid.a_node(i), state: j, v: vv, g: gg });
                    }
                }
            }
            let value = match last_continue {
                None => 1.0,
                Some(c) if c + 1 == p => return Err(Error::EmptyStopSet { t, state: j }),
                Some(c) => {
                    let pockets: Vec<f64> = stops.iter().filter(|&&i| i < c).map(|&i| grid.a_node(i)).collect();
                    if !pockets.is_empty() {
                        let w = PocketWarning { k, t, state: j, pockets };
                        log::warn!("{w}");
                        warnings.push(w);
                    }
                    if refine {
                        let d0 = gaps[c] - tol.band(g.value(k, j, c));
                        let d1 = gaps[c + 1] - tol.band(g.value(k, j, c + 1));
                        let theta = if d0 > d1 { (d0 / (d0 - d1)).clamp(0.0, 1.0) } else { 1.0 };
                        let (l0, l1) = (grid.log_a_node(c), grid.log_a_node(c + 1));
                        (l0 + theta * (l1 - l0)).exp()
                    } else {
                        grid.a_node(c + 1)
                    }
                }
            };
            row.push(value);
        }
        b.push(row);
    }
    let mut curve = BoundaryCurve::from_raw(grid.times(), b, *tol, grid.h())?;
    curve.warnings = warnings;
    Ok(curve)
}

/// Monotonicity summary of one state's boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSummary {
    pub state: usize,
    /// Number of grid times, from the start, over which `b` never rises by
    /// more than the noise threshold.
    pub nonincreasing_prefix: usize,
    /// Reversals between significant rises and falls.
    pub direction_changes: usize,
    /// Largest `b(t') - min_{t <= t'} b(t)`.
    pub max_rise: f64,
    /// Threshold on moves in `log b`.
    pub noise: f64,
    pub points: usize,
}

impl ShapeSummary {
    /// No rise above the noise threshold anywhere.
    pub fn is_nonincreasing(&self) -> bool {
        self.nonincreasing_prefix == self.points
    }
}

/// Shape summary per state, counting only moves in `log b` larger than
/// twice the ratio-grid spacing. Uses the smoothed curve when `smoothed`.
pub fn boundary_shape_report(curve: &BoundaryCurve, smoothed: bool) -> Vec<ShapeSummary> {
    let noise = 2.0 * curve.log_spacing;
    let source = if smoothed { &curve.b_smoothed } else { &curve.b };
    (0..curve.num_states())
        .map(|j| {
            let series: Vec<f64> = source.iter().map(|row| row[j]).collect();
            shape_of(&series, noise, j)
        })
        .collect()
}

fn shape_of(series: &[f64], noise: f64, state: usize) -> ShapeSummary {
    let logs: Vec<f64> = series.iter().map(|x| x.ln()).collect();

    let mut running_min = f64::INFINITY;
    let mut prefix = logs.len();
    let mut max_rise: f64 = 0.0;
    for (k, (&l, &x)) in logs.iter().zip(series).enumerate() {
        if l - running_min > noise && prefix == logs.len() {
            prefix = k;
        }
        running_min = running_min.min(l);
        max_rise = max_rise.max(x - running_min.exp());
    }

    // Hysteresis: a new direction is adopted once the series moves more
    // than `noise` away from the extreme of the current run.
    let mut changes = 0;
    let mut direction = 0i8;
    let mut anchor = logs.first().copied().unwrap_or(0.0);
    for &l in &logs[1.min(logs.len())..] {
        match direction {
            0 => {
                if l - anchor > noise {
                    direction = 1;
                    anchor = l;
                } else if anchor - l > noise {
                    direction = -1;
                    anchor = l;
                }
            }
            1 => {
                if l > anchor {
                    anchor = l;
                } else if anchor - l > noise {
                    direction = -1;
                    anchor = l;
                    changes += 1;
                }
            }
            _ => {
                if l < anchor {
                    anchor = l;
                } else if l - anchor > noise {
                    direction = 1;
                    anchor = l;
                    changes += 1;
                }
            }
        }
    }
    ShapeSummary { state, nonincreasing_prefix: prefix, direction_changes: changes, max_rise, noise, points: logs.len() }
}

/// Times in `(t_0, t_n)` at which `b(., i) - b(., j)` changes strict sign
/// between consecutive grid times (reported at the later time).
pub fn crossings(curve: &BoundaryCurve, i: usize, j: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last_sign = 0.0f64;
    let n = curve.times.len();
    for k in 0..n {
        let d = curve.b[k][i] - curve.b[k][j];
        if d == 0.0 {
            continue;
        }
        let s = d.signum();
        if last_sign != 0.0 && s != last_sign && k + 1 < n {
            out.push(curve.times[k]);
        }
        last_sign = s;
    }
    out
}
