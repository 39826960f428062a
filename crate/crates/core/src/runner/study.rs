use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run_experiment;
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{lp_norm, DomainGrid, ScalarField};
use crate::poisson::{solve_dirichlet_poisson, LinearSolveOptions};

pub const STUDY_FILE: &str = "study.csv";

/// Relative discrete L² error of the Poisson solve for the manufactured
/// solution `sin(πx) sin(πy) sin(πz)` with `f = 3π² sin(πx) sin(πy) sin(πz)`.
pub fn manufactured_poisson_error(grid: DomainGrid, opts: &LinearSolveOptions) -> Result<f64> {
    let exact = ScalarField::sine_mode(grid, 1, 1, 1);
    let f = exact.scale(3.0 * PI * PI);
    let w = solve_dirichlet_poisson(&f, opts)?.w;
    Ok(lp_norm(&w.sub(&exact)?, 2.0)? / lp_norm(&exact, 2.0)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub manufactured_l2_error: Option<f64>,
    /// `log(e_prev/e) / log(n/n_prev)`; empty on the first row.
    pub observed_order: Option<f64>,
    pub beta: Option<f64>,
    pub pde_rel_residual: Option<f64>,
    pub passed: Option<bool>,
    pub error: Option<String>,
}

/// Manufactured Poisson error and full pipeline at every grid size.
/// Per-grid failures land in the row's `error` column; the study continues.
pub fn convergence_study(base: &ExperimentConfig, grids: &[usize]) -> Result<Vec<StudyRow>> {
    if grids.is_empty() {
        return Err(Error::InvalidParameter("need at least one grid".into()));
    }
    if grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid sizes must be strictly increasing".into()));
    }
    for &n in grids {
        DomainGrid::new(n)?;
    }

    let mut rows = exec::map_batch(grids, |&n| {
        let mut row = StudyRow {
            n,
            manufactured_l2_error: None,
            observed_order: None,
            beta: None,
            pde_rel_residual: None,
            passed: None,
            error: None,
        };
        let grid = DomainGrid::new(n).expect("validated");
        let mut errors = Vec::new();
        match manufactured_poisson_error(grid, &base.linear.options(grid)) {
            Ok(e) => row.manufactured_l2_error = Some(e),
            Err(e) => errors.push(format!("manufactured: {e}")),
        }
        let cfg = ExperimentConfig {
            grid_n: n,
            ..base.clone()
        };
        match run_experiment(&cfg) {
            Ok(run) => {
                row.beta = Some(run.report.beta);
                row.pde_rel_residual = Some(run.report.verification.pde_rel_residual);
                row.passed = Some(run.report.verification.passed);
            }
            Err(e) => errors.push(e.to_string()),
        }
        if !errors.is_empty() {
            row.error = Some(errors.join("; "));
        }
        row
    });

    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1], &rows[i]);
        if let (Some(ep), Some(ec)) = (prev.manufactured_l2_error, cur.manufactured_l2_error) {
            let order = (ep / ec).ln() / (cur.n as f64 / prev.n as f64).ln();
            rows[i].observed_order = Some(order);
        }
    }
    Ok(rows)
}

pub fn write_study_csv(rows: &[StudyRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
