//! `smx`: run the constrained minimization and verification pipeline from a
//! TOML config.
//!
//! Exit status: 0 when verification passed, 1 when it ran but failed,
//! 2 on configuration or runtime errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use smx_core::runner::{convergence_study, run_experiment, write_study_csv, ExperimentConfig, STUDY_FILE};

#[derive(Parser)]
#[command(name = "smx", version, about = "Constrained minimization solver for a Schrödinger-Maxwell system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and verify one configuration; writes report.json and trace.csv.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Repeat the run over several grid sizes; writes study.csv.
    Study {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly increasing grid sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::from_path(&self.config)
            .with_context(|| format!("reading config {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_path));
        cfg.output_path = out.display().to_string();
        cfg.validate()?;
        Ok((cfg, out))
    }
}

fn run(common: &Common) -> Result<bool> {
    let (cfg, out) = common.load()?;
    let run = run_experiment(&cfg)?;
    run.write(&out).with_context(|| format!("writing outputs to {}", out.display()))?;
    let r = &run.report;
    let v = &r.verification;
    println!("n = {}, p = {}, seed = {}", cfg.grid_n, cfg.p, cfg.seed);
    println!("r1 = {:.6e}, m = {:.6e}, |h|_3 = {:.6e}", r.ball.r1, r.ball.m, r.h_l3_norm);
    println!(
        "beta = {:.12e} after {} iterations ({:?})",
        r.beta, r.minimize.iterations, r.minimize.stop_reason
    );
    println!(
        "fixed point {:.3e}, pde {:.3e}, vi violations {}/{}",
        v.fixed_point_rel_residual, v.pde_rel_residual, v.vi_violations, v.vi_evaluated
    );
    println!("verification {}", if v.passed { "passed" } else { "FAILED" });
    println!("wrote {}", out.display());
    Ok(v.passed)
}

fn study(common: &Common, grids: &[usize]) -> Result<bool> {
    let (cfg, out) = common.load()?;
    let rows = convergence_study(&cfg, grids)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let path = Path::new(&out).join(STUDY_FILE);
    write_study_csv(&rows, &path)?;
    println!("{:>5} {:>12} {:>7} {:>16} {:>10} {:>6}", "n", "poisson_err", "order", "beta", "pde_res", "ok");
    let fmt = |x: Option<f64>, p: usize| x.map_or("-".to_string(), |v| format!("{v:.p$e}"));
    for r in &rows {
        println!(
            "{:>5} {:>12} {:>7} {:>16} {:>10} {:>6}",
            r.n,
            fmt(r.manufactured_l2_error, 3),
            r.observed_order.map_or("-".to_string(), |o| format!("{o:.3}")),
            fmt(r.beta, 8),
            fmt(r.pde_rel_residual, 2),
            r.passed.map_or("error", |p| if p { "yes" } else { "no" }),
        );
        if let Some(e) = &r.error {
            eprintln!("n = {}: {e}", r.n);
        }
    }
    println!("wrote {}", path.display());
    Ok(rows.iter().all(|r| r.passed == Some(true)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { common } => run(common),
        Command::Study { common, grids } => study(common, grids),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
