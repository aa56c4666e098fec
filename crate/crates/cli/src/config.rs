//! Run configuration: a TOML file with `model`, `grid`, `quadrature`, `mc`,
//! `tolerance`, `oracle` and `output` blocks. Only `model` is required.
//!
//! ```toml
//! model.mu = [0.2, -0.2]
//! model.sigma = [0.5, 0.3]
//! model.q = [[-2.5, 2.5], [2.0, -2.0]]
//! model.T = 0.5
//! grid.n = 100
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use regime_stop::grid::{default_a_max, Interpolation};
use regime_stop::model::validate_model;
use regime_stop::{BoundaryTolerance, QuadratureSpec, RegimeModel, SolverGrid};

use crate::error::CliError;

/// Environment variable that overrides `output.directory`.
pub const OUT_DIR_ENV: &str = "REGIME_STOP_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Generator; may be omitted for a single regime.
    #[serde(default)]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Recompute generator diagonals from the off-diagonal entries.
    #[serde(default)]
    pub repair: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub n: Option<usize>,
    pub a_points: Option<usize>,
    pub a_max: Option<f64>,
    /// Only `"log"` is supported.
    pub spacing: Option<String>,
    /// `"cubic"` or `"linear"`.
    pub interpolation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureBlock {
    pub nodes_x: Option<usize>,
    pub nodes_y: Option<usize>,
    pub nodes_r: Option<usize>,
    pub trunc_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub paths: Option<u64>,
    pub substeps: Option<usize>,
    pub seed: Option<u64>,
    pub antithetic: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceBlock {
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub t0: Option<f64>,
    pub a: Option<f64>,
    /// 1-based regime.
    pub state: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
    /// Significant digits in CSV output.
    pub precision: Option<usize>,
}

macro_rules! empty_block {
    ($($t:ident { $($f:ident),* }),*) => {
        $(impl Default for $t {
            fn default() -> Self {
                Self { $($f: None),* }
            }
        })*
    };
}

empty_block!(
    GridBlock { n, a_points, a_max, spacing, interpolation },
    QuadratureBlock { nodes_x, nodes_y, nodes_r, trunc_sd },
    McBlock { paths, substeps, seed, antithetic },
    ToleranceBlock { tol_abs, tol_rel },
    OracleBlock { t0, a, state },
    OutputBlock { directory, precision }
);

/// The file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub quadrature: QuadratureBlock,
    #[serde(default)]
    pub mc: McBlock,
    #[serde(default)]
    pub tolerance: ToleranceBlock,
    #[serde(default)]
    pub oracle: OracleBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Every setting with defaults filled in. This is what gets hashed and
/// echoed into `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub grid: ResolvedGrid,
    pub quadrature: QuadratureSpecEcho,
    pub mc: ResolvedMc,
    pub tolerance: ResolvedTolerance,
    pub oracle: ResolvedOracle,
    pub output: ResolvedOutput,
    /// Dotted keys that were not in the file.
    pub defaults_applied: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedGrid {
    pub n: usize,
    pub a_points: usize,
    pub a_max: f64,
    pub spacing: String,
    pub interpolation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureSpecEcho {
    pub nodes_x: usize,
    pub nodes_y: usize,
    pub nodes_r: usize,
    pub trunc_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedMc {
    pub paths: u64,
    pub substeps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedTolerance {
    pub tol_abs: f64,
    pub tol_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedOracle {
    pub t0: f64,
    pub a: f64,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedOutput {
    pub directory: PathBuf,
    pub precision: usize,
}

pub const DEFAULT_N: usize = 50;
pub const DEFAULT_A_POINTS: usize = 200;
pub const DEFAULT_PATHS: u64 = 100_000;
pub const DEFAULT_SUBSTEPS: usize = 4;
pub const DEFAULT_SEED: u64 = 20240101;
pub const DEFAULT_PRECISION: usize = 15;

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The generator as given, or `[[0]]` for a single regime.
    pub fn generator(&self) -> Vec<Vec<f64>> {
        match &self.model.q {
            Some(q) => q.clone(),
            None => vec![vec![0.0; self.model.mu.len()]; self.model.mu.len()],
        }
    }

    /// Validated model (with diagonal repair if requested).
    pub fn model(&self) -> regime_stop::Result<RegimeModel> {
        validate_model(
            self.model.mu.clone(),
            self.model.sigma.clone(),
            self.generator(),
            self.model.horizon,
            self.model.repair,
        )
    }

    /// Fills every missing setting. `a_max` defaults from the model, so the
    /// model must be valid.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let model = self.model()?;
        let mut defaults = Vec::new();
        let mut pick = |key: &str, present: bool| {
            if !present {
                defaults.push(key.to_string());
            }
        };
        let g = &self.grid;
        pick("grid.n", g.n.is_some());
        pick("grid.a_points", g.a_points.is_some());
        pick("grid.a_max", g.a_max.is_some());
        pick("grid.spacing", g.spacing.is_some());
        pick("grid.interpolation", g.interpolation.is_some());
        let q = &self.quadrature;
        pick("quadrature.nodes_x", q.nodes_x.is_some());
        pick("quadrature.nodes_y", q.nodes_y.is_some());
        pick("quadrature.nodes_r", q.nodes_r.is_some());
        pick("quadrature.trunc_sd", q.trunc_sd.is_some());
        let mc = &self.mc;
        pick("mc.paths", mc.paths.is_some());
        pick("mc.substeps", mc.substeps.is_some());
        pick("mc.seed", mc.seed.is_some());
        pick("mc.antithetic", mc.antithetic.is_some());
        let t = &self.tolerance;
        pick("tolerance.tol_abs", t.tol_abs.is_some());
        pick("tolerance.tol_rel", t.tol_rel.is_some());
        let o = &self.oracle;
        pick("oracle.t0", o.t0.is_some());
        pick("oracle.a", o.a.is_some());
        pick("oracle.state", o.state.is_some());
        let out = &self.output;
        pick("output.directory", out.directory.is_some());
        pick("output.precision", out.precision.is_some());

        let spacing = g.spacing.clone().unwrap_or_else(|| "log".into());
        if spacing != "log" {
            return Err(CliError::Config(format!("grid.spacing = {spacing:?}: only \"log\" is supported")));
        }
        let interpolation = g.interpolation.clone().unwrap_or_else(|| "cubic".into());
        parse_interpolation(&interpolation)?;
        let qd = QuadratureSpec::default();
        let tol = BoundaryTolerance::default();
        let state = o.state.unwrap_or(1);
        if state == 0 || state > model.num_states() {
            return Err(CliError::Config(format!("oracle.state = {state} is not in 1..={}", model.num_states())));
        }
        let precision = out.precision.unwrap_or(DEFAULT_PRECISION);
        if !(1..=17).contains(&precision) {
            return Err(CliError::Config(format!("output.precision = {precision} must be in 1..=17")));
        }
        let mut model_block = self.model.clone();
        model_block.q = Some(model.generator().to_vec());
        Ok(RunConfig {
            model: model_block,
            grid: ResolvedGrid {
                n: g.n.unwrap_or(DEFAULT_N),
                a_points: g.a_points.unwrap_or(DEFAULT_A_POINTS),
                a_max: g.a_max.unwrap_or_else(|| default_a_max(&model)),
                spacing,
                interpolation,
            },
            quadrature: QuadratureSpecEcho {
                nodes_x: q.nodes_x.unwrap_or(qd.nodes_x),
                nodes_y: q.nodes_y.unwrap_or(qd.nodes_y),
                nodes_r: q.nodes_r.unwrap_or(qd.nodes_r),
                trunc_sd: q.trunc_sd.unwrap_or(qd.trunc_sd),
            },
            mc: ResolvedMc {
                paths: mc.paths.unwrap_or(DEFAULT_PATHS),
                substeps: mc.substeps.unwrap_or(DEFAULT_SUBSTEPS),
                seed: mc.seed.unwrap_or(DEFAULT_SEED),
                antithetic: mc.antithetic.unwrap_or(false),
            },
            tolerance: ResolvedTolerance { tol_abs: t.tol_abs.unwrap_or(tol.abs), tol_rel: t.tol_rel.unwrap_or(tol.rel) },
            oracle: ResolvedOracle { t0: o.t0.unwrap_or(0.0), a: o.a.unwrap_or(1.0), state },
            output: ResolvedOutput {
                directory: std::env::var_os(OUT_DIR_ENV)
                    .map(PathBuf::from)
                    .or_else(|| out.directory.clone())
                    .unwrap_or_else(|| PathBuf::from("out")),
                precision,
            },
            defaults_applied: defaults,
        })
    }
}

fn parse_interpolation(s: &str) -> Result<Interpolation, CliError> {
    match s {
        "cubic" => Ok(Interpolation::Cubic),
        "linear" => Ok(Interpolation::Linear),
        other => Err(CliError::Config(format!("grid.interpolation = {other:?}: expected \"cubic\" or \"linear\""))),
    }
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        RawConfig::parse(text)?.resolve()
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        RawConfig::load(path)?.resolve()
    }

    pub fn model(&self) -> Result<RegimeModel, CliError> {
        let m = &self.model;
        Ok(validate_model(m.mu.clone(), m.sigma.clone(), m.q.clone().unwrap_or_default(), m.horizon, false)?)
    }

    pub fn grid(&self) -> Result<SolverGrid, CliError> {
        let g = &self.grid;
        Ok(SolverGrid::new(g.n, self.model.horizon, g.a_points, g.a_max)?
            .with_interpolation(parse_interpolation(&g.interpolation)?))
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        let q = &self.quadrature;
        QuadratureSpec { nodes_x: q.nodes_x, nodes_y: q.nodes_y, nodes_r: q.nodes_r, trunc_sd: q.trunc_sd }
    }

    pub fn tolerance(&self) -> BoundaryTolerance {
        BoundaryTolerance { abs: self.tolerance.tol_abs, rel: self.tolerance.tol_rel }
    }

    /// Hash of everything that affects numerical output (the output block
    /// and the defaults list are excluded).
    pub fn hash(&self) -> String {
        let echo = serde_json::json!({
            "model": self.model,
            "grid": self.grid,
            "quadrature": self.quadrature,
            "mc": self.mc,
            "tolerance": self.tolerance,
            "oracle": self.oracle,
            "precision": self.output.precision,
        });
        hex::encode(Sha256::digest(echo.to_string().as_bytes()))
    }
}
