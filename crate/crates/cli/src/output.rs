//! CSV writers and the boundary reader. Every file starts with a
//! `# config_sha256=<hash>` comment line.

use std::fmt::Write as _;
use std::path::Path;

use regime_stop::{BoundaryCurve, BoundaryTolerance, Estimate, GSurface, SolverGrid, VSurface};

use crate::error::CliError;

pub const SURFACE_HEADER: &str = "t,a,state,V,G";
pub const BOUNDARY_HEADER: &str = "t,state,b_raw,b_smoothed";
pub const ORACLE_HEADER: &str = "policy,t0,a,state,value,se,paths,seed";
pub const BENCH_HEADER: &str = "n,a_points,assemble_ms,induction_ms,reps";

/// Fixed significant-digit formatting.
pub fn num(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), x)
}

fn preamble(hash: &str, header: &str) -> String {
    format!("# config_sha256={hash}\n{header}\n")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

pub fn surface_csv(v: &VSurface, g: &GSurface, hash: &str, digits: usize) -> String {
    let grid = v.grid();
    let mut s = preamble(hash, SURFACE_HEADER);
    for k in 0..=grid.n() {
        let t = num(grid.time(k), digits);
        for j in 0..v.num_states() {
            for i in 0..grid.a_points() {
                let _ = writeln!(
                    s,
                    "{t},{},{},{},{}",
                    num(grid.a_node(i), digits),
                    j + 1,
                    num(v.value(k, j, i), digits),
                    num(g.value(k, j, i), digits)
                );
            }
        }
    }
    s
}

pub fn boundary_csv(curve: &BoundaryCurve, hash: &str, digits: usize) -> String {
    let mut s = preamble(hash, BOUNDARY_HEADER);
    for (k, &t) in curve.times.iter().enumerate() {
        for j in 0..curve.num_states() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                num(t, digits),
                j + 1,
                num(curve.b[k][j], digits),
                num(curve.b_smoothed[k][j], digits)
            );
        }
    }
    s
}

pub struct OracleRow<'a> {
    pub policy: &'a str,
    pub t0: f64,
    pub a: f64,
    /// 1-based.
    pub state: usize,
    pub estimate: Estimate,
    pub paths: u64,
    pub seed: u64,
}

pub fn oracle_csv(rows: &[OracleRow<'_>], hash: &str, digits: usize) -> String {
    let mut s = preamble(hash, ORACLE_HEADER);
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.policy,
            num(r.t0, digits),
            num(r.a, digits),
            r.state,
            num(r.estimate.mean, digits),
            num(r.estimate.se, digits),
            r.paths,
            r.seed
        );
    }
    s
}

/// Reads a boundary file written by [`boundary_csv`] and checks that its
/// times are those of `grid`.
pub fn read_boundary(path: &Path, grid: &SolverGrid, num_states: usize, tol: BoundaryTolerance) -> Result<BoundaryCurve, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let bad = |msg: String| CliError::Schema(path.to_path_buf(), msg);
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == BOUNDARY_HEADER => {}
        Some(h) => return Err(bad(format!("header {h:?}, expected {BOUNDARY_HEADER:?}"))),
        None => return Err(bad("empty file".into())),
    }
    let times = grid.times();
    let mut b = vec![vec![f64::NAN; num_states]; times.len()];
    let mut rows = 0;
    for (line_no, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(format!("data row {}: {} fields, expected 4", line_no + 1, fields.len())));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("data row {}: {e}", line_no + 1)));
        let t = parse(fields[0])?;
        let state: usize =
            fields[1].trim().parse().map_err(|e| bad(format!("data row {}: state: {e}", line_no + 1)))?;
        if state == 0 || state > num_states {
            return Err(bad(format!("data row {}: state {state} not in 1..={num_states}", line_no + 1)));
        }
        let k = grid.floor_index(t);
        if (times[k] - t).abs() > 1e-9 * grid.horizon().max(1.0) {
            return Err(bad(format!("time {t} is not on the solver grid")));
        }
        b[k][state - 1] = parse(fields[2])?;
        rows += 1;
    }
    if rows != times.len() * num_states || b.iter().flatten().any(|x| x.is_nan()) {
        return Err(bad(format!("expected {} rows covering every (t, state), found {rows}", times.len() * num_states)));
    }
    BoundaryCurve::from_raw(times, b, tol, grid.h()).map_err(|e| bad(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_is_fixed_width() {
        assert_eq!(num(1.0, 15), "1.00000000000000e0");
        assert_eq!(num(-0.000123456789012345678, 15), "-1.23456789012346e-4");
        assert_eq!(num(2.5, 3), "2.50e0");
    }
}
