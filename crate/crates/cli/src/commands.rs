use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::json;

use regime_stop::boundary::{boundary_shape_report, extract_boundary, ShapeSummary};
use regime_stop::chain::transition_matrix;
use regime_stop::density::build_rule;
use regime_stop::oracle::{evaluate_policies, MaxSampling, MonitorGrid, PathSpec};
use regime_stop::vsurface::{Solution, Solver};
use regime_stop::{BoundaryCurve, Estimate, PolicySpec};

use crate::config::{RawConfig, RunConfig, DEFAULT_N};
use crate::error::CliError;
use crate::output::{self, OracleRow};

/// Normalization residual above which the quadrature is reported as
/// truncating too much mass.
pub const MASS_TOL: f64 = 1e-6;
pub const ROW_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidateReport {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl ValidateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("[{}] {}: {}\n", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail));
        }
        for w in &self.warnings {
            s.push_str(&format!("[warn] {w}\n"));
        }
        s
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.into(), passed, detail });
    }
}

/// Model invariants, quadrature mass at the step length, and `exp(Q)` row
/// sums at the step length and the horizon.
pub fn cmd_validate(raw: &RawConfig) -> ValidateReport {
    let mut report = ValidateReport::default();
    let model = match raw.model() {
        Ok(m) => {
            report.check("model", true, format!("{} regime(s), T = {}", m.num_states(), m.horizon()));
            Some(m)
        }
        Err(e) => {
            report.check("model", false, e.to_string());
            None
        }
    };
    let q = &raw.quadrature;
    let d = regime_stop::QuadratureSpec::default();
    let spec = regime_stop::QuadratureSpec {
        nodes_x: q.nodes_x.unwrap_or(d.nodes_x),
        nodes_y: q.nodes_y.unwrap_or(d.nodes_y),
        nodes_r: q.nodes_r.unwrap_or(d.nodes_r),
        trunc_sd: q.trunc_sd.unwrap_or(d.trunc_sd),
    };
    let n = raw.grid.n.unwrap_or(DEFAULT_N);
    let delta = raw.model.horizon / n.max(1) as f64;
    match build_rule(&spec, delta) {
        Ok(rule) => {
            let mass = rule.total_weight();
            let deficit = 1.0 - mass;
            report.check("quadrature", true, format!("mass at r = {delta}: {mass:.12} (deficit {deficit:.3e})"));
            if deficit.abs() > MASS_TOL {
                report.warnings.push(format!(
                    "quadrature mass deficit {deficit:.3e} exceeds {MASS_TOL:e}; raise quadrature.trunc_sd or node counts"
                ));
            }
        }
        Err(e) => report.check("quadrature", false, e.to_string()),
    }
    if let Some(m) = model {
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for dt in [delta, m.horizon()] {
            match transition_matrix(&m, dt) {
                Ok(p) => worst = worst.max(p.raw_residual).max(p.max_row_residual()),
                Err(_) => ok = false,
            }
        }
        report.check("exp(Q) rows", ok && worst <= ROW_SUM_TOL, format!("max |row sum - 1| = {worst:.3e}"));
    }
    report
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub solution: Solution,
    pub boundary: BoundaryCurve,
    pub shape: Vec<ShapeSummary>,
    pub surface_path: PathBuf,
    pub boundary_path: PathBuf,
    pub meta_path: PathBuf,
}

/// Solves the config, writes `surface.csv`, `boundary.csv` and
/// `meta.json` into `out`.
pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<SolveOutput, CliError> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let solver = Solver::new(&model, &grid, &cfg.quadrature())?;
    let solution = solver.solve();
    let start = Instant::now();
    let boundary = extract_boundary(&solution.v, &solution.g, &cfg.tolerance(), true)?;
    let boundary_time = start.elapsed();
    let shape = boundary_shape_report(&boundary, false);

    create_dir(out)?;
    let hash = cfg.hash();
    let digits = cfg.output.precision;
    let surface_path = out.join("surface.csv");
    let boundary_path = out.join("boundary.csv");
    let meta_path = out.join("meta.json");
    output::write_file(&surface_path, &output::surface_csv(&solution.v, &solution.g, &hash, digits))?;
    output::write_file(&boundary_path, &output::boundary_csv(&boundary, &hash, digits))?;

    let t = solution.timings;
    let meta = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": "solve",
        "config_sha256": hash,
        "config": cfg,
        "n": grid.n(),
        "delta": grid.delta(),
        "a_max": grid.a_max(),
        "timings_ms": {
            "assemble": ms(t.assemble),
            "g_pass": ms(t.g_pass),
            "v_pass": ms(t.v_pass),
            "boundary": ms(boundary_time),
        },
        "value_at_start": (0..model.num_states()).map(|j| json!({
            "state": j + 1,
            "V": solution.v.value(0, j, 0),
            "G": solution.g.value(0, j, 0),
        })).collect::<Vec<_>>(),
        "shape": shape.iter().map(|s| json!({
            "state": s.state + 1,
            "direction_changes": s.direction_changes,
            "nonincreasing_prefix": s.nonincreasing_prefix,
            "max_rise": s.max_rise,
        })).collect::<Vec<_>>(),
        "warnings": boundary.warnings.iter().map(ToString::to_string).collect::<Vec<_>>(),
    });
    output::write_file(&meta_path, &serde_json::to_string_pretty(&meta).expect("meta serializes"))?;
    Ok(SolveOutput { solution, boundary, shape, surface_path, boundary_path, meta_path })
}

#[derive(Debug, Clone)]
pub struct OracleOutput {
    /// `(policy label, estimate)` in file order.
    pub rows: Vec<(String, Estimate)>,
    pub path: PathBuf,
}

impl OracleOutput {
    pub fn get(&self, policy: &str) -> Option<Estimate> {
        self.rows.iter().find(|(p, _)| p == policy).map(|(_, e)| *e)
    }
}

/// Policy comparison at `(oracle.t0, oracle.a, oracle.state)`: the
/// boundary from `boundary_path`, immediate stopping, holding to `T`, and
/// the boundary scaled by 1.1 and 0.9. Writes `oracle.csv`.
pub fn cmd_oracle(cfg: &RunConfig, boundary_path: &Path, out: &Path) -> Result<OracleOutput, CliError> {
    let model = cfg.model()?;
    let grid = cfg.grid()?;
    let curve = output::read_boundary(boundary_path, &grid, model.num_states(), cfg.tolerance())?;
    let o = &cfg.oracle;
    if !(o.t0 >= 0.0 && o.t0 < model.horizon()) {
        return Err(CliError::Argument(format!("oracle.t0 = {} must lie in [0, T)", o.t0)));
    }
    let monitor = MonitorGrid::from_times_after(&curve.times, o.t0)?;
    let spec = PathSpec {
        model: &model,
        monitor: &monitor,
        a: o.a,
        state: o.state - 1,
        substeps: cfg.mc.substeps,
        seed: cfg.mc.seed,
        antithetic: cfg.mc.antithetic,
        max_sampling: MaxSampling::Bridge,
    };
    let labelled = [
        ("hit_boundary", PolicySpec::HitBoundary(curve.clone())),
        ("immediate", PolicySpec::Immediate),
        ("hold_to_T", PolicySpec::FixedTime(model.horizon())),
        ("hit_boundary_up10", PolicySpec::HitBoundary(curve.scaled(1.1))),
        ("hit_boundary_down10", PolicySpec::HitBoundary(curve.scaled(0.9))),
    ];
    let policies: Vec<PolicySpec> = labelled.iter().map(|(_, p)| p.clone()).collect();
    let estimates = evaluate_policies(&spec, cfg.mc.paths, &policies)?;
    let rows: Vec<OracleRow<'_>> = labelled
        .iter()
        .zip(&estimates)
        .map(|((label, _), &estimate)| OracleRow {
            policy: label,
            t0: o.t0,
            a: o.a,
            state: o.state,
            estimate,
            paths: cfg.mc.paths,
            seed: cfg.mc.seed,
        })
        .collect();
    create_dir(out)?;
    let path = out.join("oracle.csv");
    output::write_file(&path, &output::oracle_csv(&rows, &cfg.hash(), cfg.output.precision))?;
    Ok(OracleOutput { rows: labelled.iter().map(|(l, _)| l.to_string()).zip(estimates).collect(), path })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub a_points: usize,
    pub assemble: Duration,
    /// Fastest backward-induction time over `reps` repetitions.
    pub induction: Duration,
    pub reps: usize,
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `log(induction)` against `log(n)`.
    pub exponent: f64,
    pub path: PathBuf,
}

/// Minimum total timing per `n`; short solves are repeated until it is
/// reached.
pub const BENCH_BUDGET: Duration = Duration::from_millis(300);

/// Times the backward induction at a fixed grid and quadrature.
pub fn bench_runs(cfg: &RunConfig, n_list: &[usize], a_points: Option<usize>) -> Result<Vec<BenchRow>, CliError> {
    let model = cfg.model()?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut c = cfg.clone();
        c.grid.n = n;
        if let Some(p) = a_points {
            c.grid.a_points = p;
        }
        let grid = c.grid()?;
        let solver = Solver::new(&model, &grid, &c.quadrature())?;
        let mut best = Duration::MAX;
        let mut total = Duration::ZERO;
        let mut reps = 0;
        while reps < 3 || total < BENCH_BUDGET {
            let t = solver.solve().timings.induction();
            best = best.min(t);
            total += t;
            reps += 1;
        }
        rows.push(BenchRow { n, a_points: grid.a_points(), assemble: solver.assemble_time(), induction: best, reps });
    }
    Ok(rows)
}

pub fn fitted_exponent(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln() / k, b + y.ln() / k));
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    sxy / sxx
}

pub fn cmd_bench(cfg: &RunConfig, n_list: &[usize], out: &Path) -> Result<BenchOutput, CliError> {
    if n_list.len() < 3 {
        return Err(CliError::Argument(format!("bench needs at least 3 values of n, got {}", n_list.len())));
    }
    let rows = bench_runs(cfg, n_list, None)?;
    let exponent =
        fitted_exponent(&rows.iter().map(|r| (r.n as f64, r.induction.as_secs_f64())).collect::<Vec<_>>());
    let mut s = format!("# config_sha256={}\n# fitted_exponent={exponent:.4}\n{}\n", cfg.hash(), output::BENCH_HEADER);
    for r in &rows {
        s.push_str(&format!("{},{},{:.4},{:.4},{}\n", r.n, r.a_points, ms(r.assemble), ms(r.induction), r.reps));
    }
    create_dir(out)?;
    let path = out.join("bench.csv");
    output::write_file(&path, &s)?;
    Ok(BenchOutput { rows, exponent, path })
}
