use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Seeds};
use crate::ball::BallSpec;
use crate::error::Result;
use crate::minimize::{MinimizeResult, StopReason, TraceEntry};
use crate::verify::VerificationReport;

pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.csv";

/// Seconds spent in each stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub estimate_constants: f64,
    pub compute_r1: f64,
    pub minimize: f64,
    pub verify: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeSummary {
    pub iterations: usize,
    pub converged: bool,
    pub on_boundary: bool,
    pub stop_reason: StopReason,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub final_displacement: f64,
}

impl MinimizeSummary {
    pub fn from_result(r: &MinimizeResult) -> Self {
        let first = r.trace.first().copied();
        let last = r.trace.last().copied();
        MinimizeSummary {
            iterations: r.iterations,
            converged: r.converged,
            on_boundary: r.on_boundary,
            stop_reason: r.stop_reason,
            initial_energy: first.map_or(r.beta, |t| t.energy),
            final_energy: r.beta,
            final_displacement: last.map_or(0.0, |t| t.displacement),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub artifact_version: String,
    pub config: ExperimentConfig,
    pub ball: BallSpec,
    pub h_l3_norm: f64,
    pub beta: f64,
    pub u1_l2_norm: f64,
    pub u1_w2n_norm: f64,
    pub minimize: MinimizeSummary,
    pub verification: VerificationReport,
    pub seeds: Seeds,
    pub wall_time: StageTimings,
}

impl SolveReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// Copy with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        SolveReport {
            wall_time: StageTimings::default(),
            ..self.clone()
        }
    }
}

/// `iteration,energy,step,displacement` rows.
pub fn write_trace_csv(trace: &[TraceEntry], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for t in trace {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}
