//! Experiment configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! grid_n = 16
//! p = 7.0
//! seed = 7
//! safety = 2.0
//! samples = 64
//! output_path = "out"
//!
//! [k]
//! kind = "constant"        # or "sine_bump" with `amplitude`
//! value = 1.0
//!
//! [h]
//! kind = "scaled_to_m"     # or "constant" (`value`), "sine_bump" (`amplitude`)
//! fraction = 1.0
//!
//! [linear]                 # optional
//! rel_tol = 1e-10
//!
//! [minimize]               # optional, any MinimizeOptions field
//! [verify]                 # optional, any VerifyOptions field
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_norm, DomainGrid, ScalarField, DIM};
use crate::minimize::MinimizeOptions;
use crate::poisson::LinearSolveOptions;
use crate::verify::VerifyOptions;

pub const SCHEMA_VERSION: u32 = 1;

/// `sin(πx) sin(πy) sin(πz)`
fn bump(grid: DomainGrid) -> ScalarField {
    ScalarField::from_fn(grid, |x, y, z| (PI * x).sin() * (PI * y).sin() * (PI * z).sin())
}

/// The coefficient `K(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant { value: f64 },
    SineBump { amplitude: f64 },
}

impl CoefficientSpec {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            CoefficientSpec::Constant { value } => value,
            CoefficientSpec::SineBump { amplitude } => amplitude,
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("K must be a finite value >= 0, got {v}")));
        }
        Ok(())
    }

    pub fn field(&self, grid: DomainGrid) -> ScalarField {
        match *self {
            CoefficientSpec::Constant { value } => ScalarField::constant(grid, value),
            CoefficientSpec::SineBump { amplitude } => bump(grid).scale(amplitude),
        }
    }
}

/// The forcing `h(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    Constant { value: f64 },
    SineBump { amplitude: f64 },
    /// Sine bump rescaled after `r₁` is known so that `‖h‖_{L³} = fraction·m`.
    ScaledToM { fraction: f64 },
}

impl ForcingSpec {
    pub fn validate(&self) -> Result<()> {
        let (v, ok) = match *self {
            ForcingSpec::Constant { value } => (value, value > 0.0),
            ForcingSpec::SineBump { amplitude } => (amplitude, amplitude > 0.0),
            ForcingSpec::ScaledToM { fraction } => (fraction, fraction > 0.0 && fraction <= 1.0),
        };
        if !ok || !v.is_finite() {
            return Err(Error::Config(format!("invalid forcing specification {self:?}")));
        }
        Ok(())
    }

    /// The forcing field given the admissible bound `m`.
    pub fn field(&self, grid: DomainGrid, m: f64) -> ScalarField {
        match *self {
            ForcingSpec::Constant { value } => ScalarField::constant(grid, value),
            ForcingSpec::SineBump { amplitude } => bump(grid).scale(amplitude),
            ForcingSpec::ScaledToM { fraction } => {
                let b = bump(grid);
                let norm = lp_norm(&b, DIM as f64).expect("valid exponent");
                b.scale(fraction * m / norm)
            }
        }
    }

    /// A positive stand-in used before `m` is known.
    pub fn provisional_field(&self, grid: DomainGrid) -> ScalarField {
        match self {
            ForcingSpec::ScaledToM { .. } => bump(grid),
            other => other.field(grid, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub rel_tol: Option<f64>,
    pub max_iters: Option<usize>,
}

impl LinearConfig {
    pub fn options(&self, grid: DomainGrid) -> LinearSolveOptions {
        let d = LinearSolveOptions::for_grid(grid);
        LinearSolveOptions {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
        }
    }
}

fn default_safety() -> f64 {
    crate::ball::DEFAULT_SAFETY
}

fn default_samples() -> usize {
    64
}

fn default_output() -> String {
    "out".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub grid_n: usize,
    pub p: f64,
    pub k: CoefficientSpec,
    pub h: ForcingSpec,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub linear: LinearConfig,
    #[serde(default)]
    pub minimize: MinimizeOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default = "default_output")]
    pub output_path: String,
}

impl ExperimentConfig {
    /// `K ≡ 1`, sine-bump forcing at the admissible bound.
    pub fn standard(grid_n: usize, p: f64, seed: u64) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            grid_n,
            p,
            k: CoefficientSpec::Constant { value: 1.0 },
            h: ForcingSpec::ScaledToM { fraction: 1.0 },
            safety: default_safety(),
            samples: default_samples(),
            seed,
            linear: LinearConfig::default(),
            minimize: MinimizeOptions::default(),
            verify: VerifyOptions::default(),
            output_path: default_output(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        DomainGrid::new(self.grid_n)?;
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::Config(format!("p must be > 1, got {}", self.p)));
        }
        if !(self.safety >= 1.0) {
            return Err(Error::Config(format!("safety must be >= 1, got {}", self.safety)));
        }
        if self.samples < 1 {
            return Err(Error::Config("samples must be >= 1".into()));
        }
        self.k.validate()?;
        self.h.validate()?;
        self.minimize.validate()?;
        Ok(())
    }

    /// Seeds used by each randomized stage, derived from `seed` so that
    /// estimation and auditing never share samples.
    pub fn seeds(&self) -> Seeds {
        Seeds {
            estimation: self.seed,
            minimize: self.seed,
            variational: self.seed.wrapping_mul(0x9E37_79B9).wrapping_add(self.verify.vi_seed),
            phi_calibration: self.seed.wrapping_mul(0x85EB_CA6B).wrapping_add(self.verify.phi_calibration_seed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub estimation: u64,
    pub minimize: u64,
    pub variational: u64,
    pub phi_calibration: u64,
}
