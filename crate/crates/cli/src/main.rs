use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use regime_stop_cli::{cmd_bench, cmd_oracle, cmd_solve, cmd_validate, RawConfig, RunConfig};

#[derive(Parser)]
#[command(name = "regime-stop", version, about = "Sell-at-the-maximum solver under regime-switching GBM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.directory` and `REGIME_STOP_OUT`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo seed (overrides `mc.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model, quadrature mass and exp(Q) row sums.
    Validate(Common),
    /// Solve for G, V and the boundary; write surface.csv, boundary.csv, meta.json.
    Solve(Common),
    /// Compare stopping policies by Monte Carlo; write oracle.csv.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Boundary file from `solve` (default: <out>/boundary.csv).
        #[arg(long)]
        boundary: Option<PathBuf>,
    },
    /// Time the backward induction over several n; write bench.csv.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "25,50,100")]
        n: Vec<usize>,
    },
}

fn load_raw(common: &Common) -> Result<RawConfig> {
    if let Some(k) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().context("building thread pool")?;
    }
    let mut raw = RawConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        raw.mc.seed = Some(seed);
    }
    Ok(raw)
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = load_raw(common)?.resolve()?;
    if let Some(out) = &common.out {
        cfg.output.directory = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate(common) => {
            let report = cmd_validate(&load_raw(&common)?);
            print!("{}", report.render());
            Ok(report.passed())
        }
        Command::Solve(common) => {
            let cfg = load(&common)?;
            let out = cmd_solve(&cfg, &cfg.output.directory)?;
            for w in &out.boundary.warnings {
                eprintln!("warning: {w}");
            }
            for j in 0..out.solution.v.num_states() {
                println!(
                    "state {}: V(0,1) = {:.6}, G(0,1) = {:.6}, b(0) = {:.6}",
                    j + 1,
                    out.solution.v.value(0, j, 0),
                    out.solution.g.value(0, j, 0),
                    out.boundary.b[0][j]
                );
            }
            println!("wrote {}", cfg.output.directory.display());
            Ok(true)
        }
        Command::Oracle { common, boundary } => {
            let cfg = load(&common)?;
            let path = boundary.unwrap_or_else(|| cfg.output.directory.join("boundary.csv"));
            let out = cmd_oracle(&cfg, &path, &cfg.output.directory)?;
            for (policy, e) in &out.rows {
                println!("{policy:<20} {:.6} +- {:.6}", e.mean, e.se);
            }
            println!("wrote {}", out.path.display());
            Ok(true)
        }
        Command::Bench { common, n } => {
            let cfg = load(&common)?;
            let out = cmd_bench(&cfg, &n, &cfg.output.directory)?;
            for r in &out.rows {
                println!("n = {:>5}: induction {:.3} ms ({} reps)", r.n, r.induction.as_secs_f64() * 1e3, r.reps);
            }
            println!("fitted exponent {:.3}", out.exponent);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
