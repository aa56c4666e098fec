//! One-step transition operators for the backward inductions.
//!
//! Over one step of length `delta`, starting from log-ratio `l` in regime
//! `j`, the log-ratio becomes
//!
//! ```text
//! l' = max(l, sigma(j) y) - sigma(j) x
//! ```
//!
//! where `(x, y)` are the endpoint and running maximum of the standardized
//! Brownian motion, distributed with density `phi_r(x, y)` tilted by
//! `exp(u(j) x - u(j)^2 r / 2)`. The step either stays in `j` for the whole
//! step (probability weight `exp(q_jj delta)`), or switches once to `i` at time
//! `r` with density `q_ji exp(q_jj r)`, after which the layer at `t_k` is read
//! in state `i`.
//!
//! Every layer is represented as `exp(l) + excess(l)` with the excess
//! interpolated cell by cell from its node values and node slopes. The step
//! is therefore affine in those two vectors; it is assembled once per
//! `(model, grid, quadrature)` and then applied `n` times, with the slopes
//! recomputed per layer in `O(p)`.

use rayon::prelude::*;

use crate::density::{for_each_node, GaussLegendre, QuadratureSpec};
use crate::error::Result;
use crate::grid::{stencil, Layer, SolverGrid, Stencil};
use crate::model::RegimeModel;

/// Which functional the step propagates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tilt {
    /// `G`, normalized by the price at the start of the step: carries the
    /// extra factor `exp(sigma(j) x)`.
    G,
    /// `V`, a ratio to the price at the stopping time: no extra factor.
    V,
}

/// Dense affine block: `out = constant + matrix * excess + slope * slopes`.
#[derive(Debug, Clone)]
struct Block {
    matrix: Vec<f64>,
    slope: Vec<f64>,
    constant: Vec<f64>,
}

impl Block {
    fn zeros(p: usize) -> Self {
        Self { matrix: vec![0.0; p * p], slope: vec![0.0; p * p], constant: vec![0.0; p] }
    }

    fn row_times(&self, i: usize, v: &Excess) -> f64 {
        let p = v.values.len();
        let row = i * p..(i + 1) * p;
        self.matrix[row.clone()].iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>()
            + self.slope[row].iter().zip(&v.slopes).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Node excesses of one state and their interpolation slopes.
#[derive(Debug, Clone)]
struct Excess {
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Excess {
    fn of(layer: &Layer, state: usize) -> Self {
        Self { values: layer.excess(state), slopes: layer.slopes(state).to_vec() }
    }

    fn zeros(p: usize) -> Self {
        Self { values: vec![0.0; p], slopes: vec![0.0; p] }
    }
}

/// Assembled one-step operator for one tilt.
#[derive(Debug, Clone)]
pub struct StepOperator {
    tilt: Tilt,
    grid: SolverGrid,
    generator: Vec<Vec<f64>>,
    /// Per target state: no-switch term.
    stay: Vec<Block>,
    /// Per target state: switch term with the post-switch layer read at the
    /// start of the step (weight `1 - r/delta`) and at its end (`r/delta`).
    /// The constants live in `switch_next`.
    switch_prev: Vec<Block>,
    switch_next: Vec<Block>,
}

/// Contributions of the two terms of a step, kept apart for inspection.
#[derive(Debug, Clone)]
pub struct StepTerms {
    pub stay: Layer,
    pub switch: Layer,
}

/// One row of every block, for both tilts; value weights occupy
/// `[0, p)` and slope weights `[p, 2p)`.
struct RowParts {
    stay: [Vec<f64>; 2],
    stay_c: [f64; 2],
    prev: [Vec<f64>; 2],
    next: [Vec<f64>; 2],
    switch_c: [f64; 2],
}

/// Builds the `G` and `V` operators together; they share every quadrature
/// node and differ only in the tilt.
pub fn build_operators(
    model: &RegimeModel,
    grid: &SolverGrid,
    spec: &QuadratureSpec,
) -> Result<(StepOperator, StepOperator)> {
    spec.validate()?;
    let m = model.num_states();
    let p = grid.a_points();
    let delta = grid.delta();
    let h = grid.h();
    let scheme = grid.interpolation();
    let drift = model.drift_params();
    let gy = GaussLegendre::new(spec.nodes_y);
    let gx = GaussLegendre::new(spec.nodes_x);
    let gr = GaussLegendre::new(spec.nodes_r);
    let r_nodes: Vec<(f64, f64)> = gr.on(0.0, delta).collect();

    let mut ops: Vec<StepOperator> = [Tilt::G, Tilt::V]
        .into_iter()
        .map(|tilt| StepOperator {
            tilt,
            grid: grid.clone(),
            generator: model.generator().to_vec(),
            stay: (0..m).map(|_| Block::zeros(p)).collect(),
            switch_prev: (0..m).map(|_| Block::zeros(p)).collect(),
            switch_next: (0..m).map(|_| Block::zeros(p)).collect(),
        })
        .collect();

    for j in 0..m {
        let sigma = model.sigma()[j];
        let u = drift.u[j];
        let qjj = model.q(j, j);
        let switches = m > 1 && qjj < 0.0;

        let rows: Vec<RowParts> = (0..p)
            .into_par_iter()
            .map(|i| {
                let l = grid.log_a_node(i);
                let mut parts = RowParts {
                    stay: [vec![0.0; 2 * p], vec![0.0; 2 * p]],
                    stay_c: [0.0; 2],
                    prev: [vec![0.0; 2 * p], vec![0.0; 2 * p]],
                    next: [vec![0.0; 2 * p], vec![0.0; 2 * p]],
                    switch_c: [0.0; 2],
                };
                let visit = |r: f64, factor: f64, sink: &mut dyn FnMut(&Stencil, [f64; 2], f64)| {
                    for_each_node(&gy, &gx, spec.trunc_sd, r, Some(l / sigma), |x, y, w| {
                        if w == 0.0 {
                            return;
                        }
                        let lp = l.max(sigma * y) - sigma * x;
                        let wv = factor * w * (u * x - 0.5 * u * u * r).exp();
                        let wg = wv * (sigma * x).exp();
                        sink(&stencil(lp, h, p, scheme), [wg, wv], lp.exp());
                    });
                };
                visit(delta, (qjj * delta).exp(), &mut |st, w, e| {
                    for t in 0..2 {
                        parts.stay_c[t] += w[t] * e;
                        for (q, cv, cs) in st.nodes() {
                            parts.stay[t][q] += w[t] * cv;
                            parts.stay[t][p + q] += w[t] * cs;
                        }
                    }
                });
                if switches {
                    for &(r, wr) in &r_nodes {
                        let frac = r / delta;
                        visit(r, wr * (qjj * r).exp(), &mut |st, w, e| {
                            for t in 0..2 {
                                parts.switch_c[t] += w[t] * e;
                                let (a, b) = (w[t] * (1.0 - frac), w[t] * frac);
                                for (q, cv, cs) in st.nodes() {
                                    parts.prev[t][q] += a * cv;
                                    parts.prev[t][p + q] += a * cs;
                                    parts.next[t][q] += b * cv;
                                    parts.next[t][p + q] += b * cs;
                                }
                            }
                        });
                    }
                }
                parts
            })
            .collect();

        for (i, parts) in rows.into_iter().enumerate() {
            for (t, op) in ops.iter_mut().enumerate() {
                let row = i * p..(i + 1) * p;
                for (block, src) in
                    [(&mut op.stay[j], &parts.stay[t]), (&mut op.switch_prev[j], &parts.prev[t]), (&mut op.switch_next[j], &parts.next[t])]
                {
                    block.matrix[row.clone()].copy_from_slice(&src[..p]);
                    block.slope[row.clone()].copy_from_slice(&src[p..]);
                }
                op.stay[j].constant[i] = parts.stay_c[t];
                op.switch_next[j].constant[i] = parts.switch_c[t];
            }
        }
    }
    let v = ops.pop().expect("two operators");
    let g = ops.pop().expect("two operators");
    Ok((g, v))
}

impl StepOperator {
    pub fn tilt(&self) -> Tilt {
        self.tilt
    }

    pub fn grid(&self) -> &SolverGrid {
        &self.grid
    }

    fn num_states(&self) -> usize {
        self.generator.len()
    }

    /// Generator-weighted mix of the other states' excess vectors.
    fn mixed_excess(&self, j: usize, excess: &[Excess]) -> Excess {
        let mut mix = Excess::zeros(self.grid.a_points());
        for (s, ex) in excess.iter().enumerate() {
            let q = self.generator[j][s];
            if s == j || q == 0.0 {
                continue;
            }
            for (m, e) in mix.values.iter_mut().zip(&ex.values) {
                *m += q * e;
            }
            for (m, e) in mix.slopes.iter_mut().zip(&ex.slopes) {
                *m += q * e;
            }
        }
        mix
    }

    /// One backward step with the post-switch layer read at `t_k`.
    pub fn apply(&self, next: &Layer) -> Layer {
        let terms = self.apply_terms(next);
        let values = terms.stay.values().iter().zip(terms.switch.values()).map(|(a, b)| a + b).collect();
        Layer::from_values(&self.grid, values).reflecting()
    }

    /// As [`StepOperator::apply`], returning the no-switch and switch
    /// contributions separately.
    pub fn apply_terms(&self, next: &Layer) -> StepTerms {
        let m = self.num_states();
        let p = self.grid.a_points();
        let excess: Vec<Excess> = (0..m).map(|s| Excess::of(next, s)).collect();
        let mut stay = vec![0.0; m * p];
        let mut switch = vec![0.0; m * p];
        for j in 0..m {
            let mix = self.mixed_excess(j, &excess);
            let out_rate = -self.generator[j][j];
            for i in 0..p {
                stay[j * p + i] = self.stay[j].constant[i] + self.stay[j].row_times(i, &excess[j]);
                if out_rate > 0.0 {
                    switch[j * p + i] = out_rate * self.switch_next[j].constant[i]
                        + self.switch_prev[j].row_times(i, &mix)
                        + self.switch_next[j].row_times(i, &mix);
                }
            }
        }
        StepTerms { stay: Layer::from_values(&self.grid, stay), switch: Layer::from_values(&self.grid, switch) }
    }

    /// Backward step with the post-switch layer interpolated in time between
    /// the (unknown) start layer and `next`; solved by fixed-point iteration
    /// started from [`StepOperator::apply`].
    pub fn apply_time_interpolated(&self, next: &Layer, iterations: usize) -> Layer {
        let m = self.num_states();
        let p = self.grid.a_points();
        let next_excess: Vec<Excess> = (0..m).map(|s| Excess::of(next, s)).collect();
        let mut fixed = vec![0.0; m * p];
        for j in 0..m {
            let mix = self.mixed_excess(j, &next_excess);
            let out_rate = -self.generator[j][j];
            for i in 0..p {
                let mut v = self.stay[j].constant[i] + self.stay[j].row_times(i, &next_excess[j]);
                if out_rate > 0.0 {
                    v += out_rate * self.switch_next[j].constant[i] + self.switch_next[j].row_times(i, &mix);
                }
                fixed[j * p + i] = v;
            }
        }
        let mut current = self.apply(next);
        for _ in 0..iterations {
            let cur_excess: Vec<Excess> = (0..m).map(|s| Excess::of(&current, s)).collect();
            let mut values = fixed.clone();
            for j in 0..m {
                if self.generator[j][j] >= 0.0 {
                    continue;
                }
                let mix = self.mixed_excess(j, &cur_excess);
                for i in 0..p {
                    values[j * p + i] += self.switch_prev[j].row_times(i, &mix);
                }
            }
            current = Layer::from_values(&self.grid, values).reflecting();
        }
        current
    }

    /// Sum of the weights in row `(state, i)`: the kernel's total mass,
    /// a probability for [`Tilt::V`].
    pub fn row_mass(&self, state: usize, i: usize) -> f64 {
        let p = self.grid.a_points();
        let stay: f64 = self.stay[state].matrix[i * p..(i + 1) * p].iter().sum();
        let out_rate = -self.generator[state][state];
        let sw: f64 = self.switch_prev[state].matrix[i * p..(i + 1) * p].iter().sum::<f64>()
            + self.switch_next[state].matrix[i * p..(i + 1) * p].iter().sum::<f64>();
        stay + if out_rate > 0.0 { out_rate * sw } else { 0.0 }
    }
}
