//! The energy
//!
//! ```text
//! I(u) = ½∫|∇u|² + ¼∫K φ_u u² − 1/(p+1) ∫|u|^{p+1} − ∫h u
//! ```
//!
//! its convex/remainder split `I = ψ − Φ`, the ball-restricted `I_K`, and
//! the first variation. All integrals use the node quadrature of
//! [`crate::grid`]; the kinetic term uses the face-wise gradient so that
//! the derivative is exact under summation by parts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{apply_laplacian, grad_inner, grad_l2_norm, w2n_norm, DomainGrid, ScalarField};
use crate::poisson::{compute_phi, ensure_nonnegative, solve_dirichlet_poisson, LinearSolveOptions};

/// Exponent, coefficient fields and linear-solver settings of one problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    p: f64,
    k: ScalarField,
    h: ScalarField,
    linear_opts: LinearSolveOptions,
    diagnostic: bool,
}

impl ProblemSpec {
    /// Validates `p > 1`, `K >= 0` and `h > 0` at every node.
    pub fn new(p: f64, k: ScalarField, h: ScalarField, linear_opts: LinearSolveOptions) -> Result<Self> {
        let spec = ProblemSpec::diagnostic(p, k, h, linear_opts)?;
        let min_h = spec.h.min_value();
        if !(min_h > 0.0) {
            return Err(Error::AssumptionViolation(format!(
                "h must be > 0 at every node, found {min_h}"
            )));
        }
        Ok(ProblemSpec {
            diagnostic: false,
            ..spec
        })
    }

    /// Like [`ProblemSpec::new`] but without the positivity requirement on
    /// `h`, e.g. for the unforced problem where `u = 0` is stationary.
    pub fn diagnostic(p: f64, k: ScalarField, h: ScalarField, linear_opts: LinearSolveOptions) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("exponent p must be > 1, got {p}")));
        }
        k.ensure_same_grid(&h)?;
        ensure_nonnegative(&k, "K")?;
        linear_opts.validate()?;
        Ok(ProblemSpec {
            p,
            k,
            h,
            linear_opts,
            diagnostic: true,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn k(&self) -> &ScalarField {
        &self.k
    }

    pub fn h(&self) -> &ScalarField {
        &self.h
    }

    pub fn grid(&self) -> DomainGrid {
        self.k.grid()
    }

    pub fn linear_opts(&self) -> &LinearSolveOptions {
        &self.linear_opts
    }

    /// True when built through [`ProblemSpec::diagnostic`].
    pub fn is_diagnostic(&self) -> bool {
        self.diagnostic
    }

    /// Same problem with the forcing replaced.
    pub fn with_forcing(&self, h: ScalarField) -> Result<Self> {
        if self.diagnostic {
            ProblemSpec::diagnostic(self.p, self.k.clone(), h, self.linear_opts)
        } else {
            ProblemSpec::new(self.p, self.k.clone(), h, self.linear_opts)
        }
    }

    /// `φ_u` for this problem's `K`.
    pub fn phi(&self, u: &ScalarField) -> Result<ScalarField> {
        compute_phi(u, &self.k, &self.linear_opts)
    }
}

/// `sign(u)|u|^p`, the odd extension of `|u|^{p−1}u`.
#[inline]
pub fn signed_power(u: f64, p: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(p)
    }
}

/// Nodewise `sign(u)|u|^p`.
pub fn signed_power_field(u: &ScalarField, p: f64) -> ScalarField {
    u.map(|v| signed_power(v, p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `½∫|∇u|²`
    pub kinetic: f64,
    /// `¼∫K φ_u u²`
    pub nonlocal: f64,
    /// `1/(p+1) ∫|u|^{p+1}`
    pub power: f64,
    /// `∫h u`
    pub forcing: f64,
    pub total: f64,
}

/// Energy terms given a precomputed `φ_u`.
pub(crate) fn energy_with_phi(u: &ScalarField, phi: &ScalarField, spec: &ProblemSpec) -> Result<EnergyBreakdown> {
    u.ensure_same_grid(&spec.k)?;
    let vol = u.grid().cell_volume();
    let (uv, kv, hv, pv) = (u.values(), spec.k.values(), spec.h.values(), phi.values());
    let p = spec.p;

    let kinetic = 0.5 * grad_l2_norm(u).powi(2);
    let nonlocal = 0.25 * vol * exec::sum_indexed(uv.len(), |i| kv[i] * pv[i] * uv[i] * uv[i]);
    let power = vol / (p + 1.0) * exec::sum_indexed(uv.len(), |i| uv[i].abs().powf(p + 1.0));
    let forcing = vol * exec::sum_indexed(uv.len(), |i| hv[i] * uv[i]);
    Ok(EnergyBreakdown {
        kinetic,
        nonlocal,
        power,
        forcing,
        total: kinetic + nonlocal - power - forcing,
    })
}

/// Evaluate `I(u)` term by term (one Poisson solve for `φ_u`).
pub fn energy(u: &ScalarField, spec: &ProblemSpec) -> Result<EnergyBreakdown> {
    let phi = spec.phi(u)?;
    energy_with_phi(u, &phi, spec)
}

/// `(ψ(u), Φ(u))` with `ψ = ½∫|∇u|²` and `Φ = −¼∫Kφ_u u² + 1/(p+1)∫|u|^{p+1} + ∫hu`,
/// so that `I = ψ − Φ`.
pub fn energy_split(u: &ScalarField, spec: &ProblemSpec) -> Result<(f64, f64)> {
    let e = energy(u, spec)?;
    Ok((e.kinetic, -e.nonlocal + e.power + e.forcing))
}

/// `I_K(u)`: the energy inside the closed ball `‖−Δ_h u‖_{L³} <= r`, `+∞`
/// outside.
pub fn i_k(u: &ScalarField, r: f64, spec: &ProblemSpec) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius must be > 0, got {r}")));
    }
    if w2n_norm(u) > r {
        return Ok(f64::INFINITY);
    }
    Ok(energy(u, spec)?.total)
}

/// `⟨I'(u), v⟩ = ∫∇u·∇v + ∫Kφ_u u v − ∫|u|^{p−1}u v − ∫h v`.
pub fn directional_derivative(u: &ScalarField, v: &ScalarField, spec: &ProblemSpec) -> Result<f64> {
    u.ensure_same_grid(v)?;
    u.ensure_same_grid(&spec.k)?;
    let phi = spec.phi(u)?;
    let vol = u.grid().cell_volume();
    let (uv, vv, kv, hv, pv) = (u.values(), v.values(), spec.k.values(), spec.h.values(), phi.values());
    let p = spec.p;
    let kinetic = grad_inner(u, v)?;
    let rest = exec::sum_indexed(uv.len(), |i| {
        (kv[i] * pv[i] * uv[i] - signed_power(uv[i], p) - hv[i]) * vv[i]
    });
    Ok(kinetic + vol * rest)
}

/// Inner product in which a gradient representative is taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMetric {
    /// Nodewise representative under `Σ u v h³`.
    L2,
    /// Riesz representative under `∫∇u·∇v`.
    #[default]
    Sobolev,
}

/// `−K φ_u u + sign(u)|u|^p + h`, the right-hand side of the auxiliary
/// linear problem.
pub(crate) fn nonlinear_source(u: &ScalarField, phi: &ScalarField, spec: &ProblemSpec) -> Result<ScalarField> {
    u.ensure_same_grid(&spec.k)?;
    let grid = u.grid();
    let (uv, kv, hv, pv) = (u.values(), spec.k.values(), spec.h.values(), phi.values());
    let p = spec.p;
    let mut out = vec![0.0; uv.len()];
    exec::fill_indexed(&mut out, |i| -kv[i] * pv[i] * uv[i] + signed_power(uv[i], p) + hv[i]);
    ScalarField::from_values(grid, out)
}

pub(crate) fn gradient_with_phi(
    u: &ScalarField,
    phi: &ScalarField,
    spec: &ProblemSpec,
    metric: GradientMetric,
) -> Result<ScalarField> {
    let g = apply_laplacian(u).sub(&nonlinear_source(u, phi, spec)?)?;
    match metric {
        GradientMetric::L2 => Ok(g),
        GradientMetric::Sobolev => Ok(solve_dirichlet_poisson(&g, &spec.linear_opts)?.w),
    }
}

/// Gradient of `I` at `u` in the chosen metric.
///
/// `L2` returns `g = −Δ_h u + Kφ_u u − sign(u)|u|^p − h`; `Sobolev` returns
/// `w` with `−Δ_h w = g`.
pub fn gradient_field(u: &ScalarField, spec: &ProblemSpec, metric: GradientMetric) -> Result<ScalarField> {
    let phi = spec.phi(u)?;
    gradient_with_phi(u, &phi, spec, metric)
}
