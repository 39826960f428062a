//! Certificates that a minimizer `u₁` is a discrete weak solution.
//!
//! Everything is recomputed from `u₁` alone:
//!
//! * the auxiliary solve `−Δ_h u₂ = −Kφ_{u₁}u₁ + sign(u₁)|u₁|^p + h` and
//!   membership of `u₂` in the ball;
//! * the coincidence `u₂ = u₁` in the H¹ seminorm;
//! * the strong-form PDE residual;
//! * the variational inequality
//!   `½∫|∇v|² − ½∫|∇u₁|² >= ∫F(u₁)(v − u₁)` on sampled `v` in the ball;
//! * the inequality pair at `v = u₂` (variational inequality plus convexity
//!   of `½∫|∇·|²`), which together force `½∫|∇(u₂ − u₁)|² ≈ 0`;
//! * nonnegativity, quadratic scaling and the quadratic bound of `φ_u`.

use serde::{Deserialize, Serialize};

use crate::ball::BallSpec;
use crate::energy::{nonlinear_source, ProblemSpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{grad_inner, grad_l2_norm, lp_norm, w2n_norm, ScalarField, DIM};
use crate::minimize::retract_to_ball;
use crate::poisson::solve_dirichlet_poisson;
use crate::sampling::{sample_family, sample_in_ball};

/// Ball membership slack for `u₂`.
pub const BALL_SLACK: f64 = 1e-8;

/// Relative slack of the variational inequality.
pub const VI_SLACK: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub fixed_point_tol: f64,
    pub pde_tol: f64,
    /// Random test functions for the variational inequality (on top of the
    /// deterministic ones).
    pub vi_samples: usize,
    pub vi_seed: u64,
    /// Scaling factor used in the `φ_{tu} = t²φ_u` check.
    pub phi_t: f64,
    pub phi_calibration_samples: usize,
    pub phi_calibration_seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            fixed_point_tol: 1e-6,
            pde_tol: 1e-5,
            vi_samples: 200,
            vi_seed: 0x5EED_0001,
            phi_t: 2.0,
            phi_calibration_samples: 16,
            phi_calibration_seed: 0x5EED_0002,
        }
    }
}

/// The inequality pair evaluated at `v = u₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityPair {
    /// `½‖∇u₂‖² − ½‖∇u₁‖² − ∫F(u₁)(u₂ − u₁)`; nonnegative at a critical point.
    pub vi_margin: f64,
    /// `½‖∇u₁‖² − ½‖∇u₂‖² − ∫∇u₂·∇(u₁ − u₂)`; nonnegative by convexity.
    pub convexity_margin: f64,
    /// `½‖∇(u₂ − u₁)‖²`, which the two margins force to be small.
    pub forced_gap: f64,
    pub slack: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub fixed_point_rel_residual: f64,
    pub pde_rel_residual: f64,
    pub u2_w2n_norm: f64,
    pub u2_in_ball: bool,
    pub vi_evaluated: usize,
    pub vi_violations: usize,
    pub inequality_pair: InequalityPair,
    pub phi_nonneg_ok: bool,
    pub phi_scaling_ok: bool,
    pub phi_bound_ok: bool,
    pub phi_bound_constant: f64,
    /// `C` in `pde_rel_residual <= C · fixed_point_rel_residual + cg_term`.
    pub closure_constant: f64,
    pub closure_cg_term: f64,
    pub closure_ok: bool,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct AuxiliarySolution {
    pub u2: ScalarField,
    pub w2n_norm: f64,
    /// `w2n_norm <= r₁ + 1e-8`. A failure flags the empirical constants as
    /// too optimistic; it is not an error.
    pub in_ball: bool,
    /// L² norm of the CG residual of the solve.
    pub solve_residual: f64,
}

/// Solve `−Δ_h u₂ = −Kφ_{u₁}u₁ + sign(u₁)|u₁|^p + h`.
pub fn auxiliary_solve(u1: &ScalarField, spec: &ProblemSpec, ball: &BallSpec) -> Result<AuxiliarySolution> {
    let norm = w2n_norm(u1);
    if norm > ball.r1 * (1.0 + 1e-12) {
        return Err(Error::OutsideBall { norm, radius: ball.r1 });
    }
    let phi = spec.phi(u1)?;
    let source = nonlinear_source(u1, &phi, spec)?;
    let sol = solve_dirichlet_poisson(&source, spec.linear_opts())?;
    let w2n = w2n_norm(&sol.w);
    Ok(AuxiliarySolution {
        in_ball: w2n <= ball.r1 + BALL_SLACK,
        w2n_norm: w2n,
        u2: sol.w,
        solve_residual: sol.final_residual,
    })
}

/// `‖∇(u₂ − u₁)‖ / max(‖∇u₁‖, ε)`.
pub fn fixed_point_residual(u1: &ScalarField, u2: &ScalarField) -> Result<f64> {
    let diff = u2.sub(u1)?;
    Ok(grad_l2_norm(&diff) / grad_l2_norm(u1).max(f64::MIN_POSITIVE))
}

/// `‖−Δ_h u₁ + Kφ u₁ − sign(u₁)|u₁|^p − h‖_{L³} / ‖h‖_{L³}`.
pub fn pde_residual(u1: &ScalarField, spec: &ProblemSpec) -> Result<f64> {
    let phi = spec.phi(u1)?;
    let strong = crate::grid::apply_laplacian(u1).sub(&nonlinear_source(u1, &phi, spec)?)?;
    let h_norm = lp_norm(spec.h(), DIM as f64)?;
    if h_norm == 0.0 {
        return Err(Error::InvalidParameter("PDE residual is relative to ||h||, which is zero".into()));
    }
    Ok(lp_norm(&strong, DIM as f64)? / h_norm)
}

/// Outcome of the sampled variational-inequality test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalCheck {
    pub evaluated: usize,
    pub violations: usize,
    /// Smallest `(lhs − rhs)/(1 + |lhs| + |rhs|)` seen.
    pub worst_margin: f64,
}

struct ViContext<'a> {
    u1: &'a ScalarField,
    source: ScalarField,
    half_u1: f64,
}

impl ViContext<'_> {
    /// `(lhs, rhs)` of the inequality at `v`.
    fn sides(&self, v: &ScalarField) -> Result<(f64, f64)> {
        let lhs = 0.5 * grad_l2_norm(v).powi(2) - self.half_u1;
        let rhs = self.source.integrate_product(&v.sub(self.u1)?)?;
        Ok((lhs, rhs))
    }
}

fn vi_context<'a>(u1: &'a ScalarField, spec: &ProblemSpec) -> Result<ViContext<'a>> {
    let phi = spec.phi(u1)?;
    Ok(ViContext {
        u1,
        source: nonlinear_source(u1, &phi, spec)?,
        half_u1: 0.5 * grad_l2_norm(u1).powi(2),
    })
}

/// Evaluate the variational inequality on `v = u₁`, `v = u₂`,
/// `v = t·u₁` for `t ∈ {0, 0.5, 2}` (retracted), and `samples` seeded random
/// `v` in the ball. Counts violations beyond `1e-8·(1 + |lhs| + |rhs|)`.
pub fn variational_inequality_check_detailed(
    u1: &ScalarField,
    spec: &ProblemSpec,
    ball: &BallSpec,
    samples: usize,
    seed: u64,
) -> Result<VariationalCheck> {
    let ctx = vi_context(u1, spec)?;
    let aux = auxiliary_solve(u1, spec, ball)?;
    let mut tests = vec![u1.clone(), aux.u2];
    tests.extend([0.0, 0.5, 2.0].map(|t| retract_to_ball(&u1.scale(t), ball.r1)));
    tests.extend(sample_in_ball(spec.grid(), samples, seed, ball.r1));

    let margins = exec::map_batch(&tests, |v| -> Result<f64> {
        let (lhs, rhs) = ctx.sides(v)?;
        Ok((lhs - rhs) / (1.0 + lhs.abs() + rhs.abs()))
    });
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for m in margins {
        let m = m?;
        worst = worst.min(m);
        if m < -VI_SLACK {
            violations += 1;
        }
    }
    Ok(VariationalCheck {
        evaluated: tests.len(),
        violations,
        worst_margin: worst,
    })
}

/// Violation count of [`variational_inequality_check_detailed`].
pub fn variational_inequality_check(
    u1: &ScalarField,
    spec: &ProblemSpec,
    ball: &BallSpec,
    samples: usize,
    seed: u64,
) -> Result<usize> {
    Ok(variational_inequality_check_detailed(u1, spec, ball, samples, seed)?.violations)
}

/// Evaluate the variational inequality and the convexity inequality at
/// `v = u₂` independently, then check the conclusion they force.
pub fn inequality_pair(u1: &ScalarField, u2: &ScalarField, spec: &ProblemSpec) -> Result<InequalityPair> {
    let ctx = vi_context(u1, spec)?;
    let (lhs, rhs) = ctx.sides(u2)?;
    let vi_margin = lhs - rhs;
    let slack = VI_SLACK * (1.0 + lhs.abs() + rhs.abs());

    let half_u2 = 0.5 * grad_l2_norm(u2).powi(2);
    let convexity_margin = ctx.half_u1 - half_u2 - grad_inner(u2, &u1.sub(u2)?)?;
    let forced_gap = 0.5 * grad_l2_norm(&u2.sub(u1)?).powi(2);

    // With ∫∇u₂·∇φ = ∫F(u₁)φ the two margins sum to zero, so the
    // convexity margin, which equals the gap, is bounded by the slack the
    // inequality leaves plus the defect of that identity.
    let defect = (vi_margin + convexity_margin).abs();
    let ok = vi_margin >= -slack && convexity_margin >= -slack && forced_gap <= slack + defect;
    Ok(InequalityPair {
        vi_margin,
        convexity_margin,
        forced_gap,
        slack,
        ok,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiBoundCalibration {
    /// `C` in `‖φ_u‖_{H¹} <= C ‖u‖²_{H¹}`.
    pub constant: f64,
    pub samples: usize,
    pub seed: u64,
}

impl PhiBoundCalibration {
    pub const SAFETY: f64 = 2.0;

    /// Largest ratio `‖φ_u‖_{H¹}/‖u‖²_{H¹}` over a seeded batch, times
    /// [`Self::SAFETY`].
    pub fn measure(spec: &ProblemSpec, samples: usize, seed: u64) -> Result<Self> {
        let family = sample_family(spec.grid(), samples.max(1), seed);
        let ratios = exec::map_batch(&family, |u| -> Result<f64> {
            let n = grad_l2_norm(u);
            if n == 0.0 {
                return Ok(0.0);
            }
            let unit = u.scale(1.0 / n);
            Ok(grad_l2_norm(&spec.phi(&unit)?))
        });
        let mut max = 0.0_f64;
        for r in ratios {
            max = max.max(r?);
        }
        Ok(PhiBoundCalibration {
            constant: Self::SAFETY * max,
            samples,
            seed,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiCheck {
    pub nonneg: bool,
    pub scaling: bool,
    pub bound: bool,
}

/// Audit `φ_u >= 0`, `φ_{tu} = t²φ_u` and the calibrated quadratic bound.
pub fn phi_property_check(
    u: &ScalarField,
    spec: &ProblemSpec,
    t: f64,
    calibration: &PhiBoundCalibration,
) -> Result<PhiCheck> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("scaling factor must be >= 0, got {t}")));
    }
    let phi = spec.phi(u)?;
    let sup = phi.max_abs();
    let nonneg = phi.min_value() >= -1e-8 * sup.max(1.0);

    let phi_norm = lp_norm(&phi, 2.0)?;
    let scaling = if phi_norm == 0.0 {
        true
    } else {
        let phi_t = spec.phi(&u.scale(t))?;
        lp_norm(&phi_t.axpy(-t * t, &phi)?, 2.0)? <= 1e-9 * phi_norm
    };

    let u_h1 = grad_l2_norm(u);
    let bound = grad_l2_norm(&phi) <= calibration.constant * u_h1 * u_h1 * (1.0 + 1e-12);
    Ok(PhiCheck { nonneg, scaling, bound })
}

/// Run every certificate on `u₁`.
pub fn verify(u1: &ScalarField, spec: &ProblemSpec, ball: &BallSpec, opts: &VerifyOptions) -> Result<VerificationReport> {
    let aux = auxiliary_solve(u1, spec, ball)?;
    let fixed_point_rel_residual = fixed_point_residual(u1, &aux.u2)?;
    let pde_rel_residual = pde_residual(u1, spec)?;
    let vi = variational_inequality_check_detailed(u1, spec, ball, opts.vi_samples, opts.vi_seed)?;
    let pair = inequality_pair(u1, &aux.u2, spec)?;

    let calibration = PhiBoundCalibration::measure(spec, opts.phi_calibration_samples, opts.phi_calibration_seed)?;
    let phi = phi_property_check(u1, spec, opts.phi_t, &calibration)?;

    // ‖v‖_{L³} <= h^{-1/2}‖v‖_{L²} and ‖Δ_h w‖_{L²} <= √λ_max ‖∇w‖ turn the
    // H¹ fixed-point residual into a bound on the strong residual.
    let grid = spec.grid();
    let h_norm = lp_norm(spec.h(), DIM as f64)?;
    let inv_sqrt_h = grid.spacing().powf(-0.5);
    let closure_constant = inv_sqrt_h * grid.largest_eigenvalue().sqrt() * grad_l2_norm(u1) / h_norm;
    let closure_cg_term = inv_sqrt_h * aux.solve_residual / h_norm;
    let closure_ok =
        pde_rel_residual <= (closure_constant * fixed_point_rel_residual + closure_cg_term) * (1.0 + 1e-9) + 1e-14;

    let passed = fixed_point_rel_residual <= opts.fixed_point_tol
        && pde_rel_residual <= opts.pde_tol
        && aux.in_ball
        && vi.violations == 0
        && pair.ok
        && phi.nonneg
        && phi.scaling
        && phi.bound
        && closure_ok;

    Ok(VerificationReport {
        fixed_point_rel_residual,
        pde_rel_residual,
        u2_w2n_norm: aux.w2n_norm,
        u2_in_ball: aux.in_ball,
        vi_evaluated: vi.evaluated,
        vi_violations: vi.violations,
        inequality_pair: pair,
        phi_nonneg_ok: phi.nonneg,
        phi_scaling_ok: phi.scaling,
        phi_bound_ok: phi.bound,
        phi_bound_constant: calibration.constant,
        closure_constant,
        closure_cg_term,
        closure_ok,
        passed,
    })
}
