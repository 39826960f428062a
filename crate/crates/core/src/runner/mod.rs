//! End-to-end pipeline: constants → `r₁` → forcing admission → minimize →
//! verify, plus reports and grid-convergence studies.
//!
//! Each stage consumes only the outputs of earlier stages. Failures are
//! wrapped in [`Error::Stage`] with the stage name.

mod config;
mod report;
mod study;

pub use config::{CoefficientSpec, ExperimentConfig, ForcingSpec, LinearConfig, Seeds, SCHEMA_VERSION};
pub use report::{write_trace_csv, MinimizeSummary, SolveReport, StageTimings, TRACE_FILE, REPORT_FILE};
pub use study::{convergence_study, manufactured_poisson_error, write_study_csv, StudyRow, STUDY_FILE};

use std::path::Path;
use std::time::Instant;

use crate::ball::{admissible_h_bound, compute_r1, estimate_constants, BallSpec};
use crate::energy::ProblemSpec;
use crate::error::{Error, Result};
use crate::grid::{lp_norm, DomainGrid, ScalarField, DIM};
use crate::minimize::{minimize, MinimizeOptions, TraceEntry};
use crate::verify::{verify, VerifyOptions};

/// Everything produced by one run.
#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub report: SolveReport,
    pub trace: Vec<TraceEntry>,
    pub u1: ScalarField,
}

impl ExperimentRun {
    /// Write `report.json` and `trace.csv` into `dir`, creating it if needed.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.report.write_json(dir.join(REPORT_FILE))?;
        write_trace_csv(&self.trace, dir.join(TRACE_FILE))?;
        Ok(())
    }
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    out
}

/// Run the full pipeline for one configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let grid = DomainGrid::new(config.grid_n)?;
    let seeds = config.seeds();
    let linear = config.linear.options(grid);
    let k = config.k.field(grid);
    let mut wall = StageTimings::default();

    // Constants depend on K and p only; the forcing is a placeholder here.
    let (c1, c2) = timed(&mut wall.estimate_constants, || {
        let provisional = ProblemSpec::new(config.p, k.clone(), config.h.provisional_field(grid), linear)?;
        estimate_constants(&provisional, config.samples, seeds.estimation, config.safety)
    })
    .map_err(|e| e.in_stage("estimate_constants"))?;

    let r1 = timed(&mut wall.compute_r1, || compute_r1(c1, c2, config.p)).map_err(|e| e.in_stage("compute_r1"))?;
    let ball = BallSpec {
        c1,
        c2,
        r1,
        m: admissible_h_bound(r1),
        p: config.p,
        sample_count: config.samples,
        seed: seeds.estimation,
    };

    let (spec, h_norm) = (|| -> Result<_> {
        let h = config.h.field(grid, ball.m);
        let h_norm = lp_norm(&h, DIM as f64)?;
        if h_norm > ball.m * (1.0 + crate::minimize::FORCING_SLACK) {
            return Err(Error::ForcingTooLarge { h_norm, m: ball.m });
        }
        Ok((ProblemSpec::new(config.p, k.clone(), h, linear)?, h_norm))
    })()
    .map_err(|e| e.in_stage("admit_forcing"))?;

    let min_opts = MinimizeOptions {
        seed: seeds.minimize,
        ..config.minimize
    };
    let result = timed(&mut wall.minimize, || minimize(&spec, &ball, &min_opts)).map_err(|e| e.in_stage("minimize"))?;

    let verify_opts = VerifyOptions {
        vi_seed: seeds.variational,
        phi_calibration_seed: seeds.phi_calibration,
        ..config.verify
    };
    let verification =
        timed(&mut wall.verify, || verify(&result.u1, &spec, &ball, &verify_opts)).map_err(|e| e.in_stage("verify"))?;

    let report = SolveReport {
        schema_version: SCHEMA_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        ball,
        h_l3_norm: h_norm,
        beta: result.beta,
        u1_l2_norm: lp_norm(&result.u1, 2.0)?,
        u1_w2n_norm: crate::grid::w2n_norm(&result.u1),
        minimize: MinimizeSummary::from_result(&result),
        verification,
        seeds,
        wall_time: wall,
    };
    Ok(ExperimentRun {
        report,
        trace: result.trace,
        u1: result.u1,
    })
}
