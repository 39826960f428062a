//! Quantitative ball constants.
//!
//! `C₁`, `C₂` bound the nonlinear terms on the ball `K(r)`:
//!
//! ```text
//! ‖K φ_u u‖_{L³}       <= C₁ ‖u‖³
//! ‖sign(u)|u|^p‖_{L³}  <= C₂ ‖u‖^p        (‖u‖ = ‖Δ_h u‖_{L³})
//! ```
//!
//! On a fixed grid these are estimated empirically (max sampled ratio times
//! a safety factor); they are grid-dependent, not proven bounds. `r₁` is the
//! largest radius with `C₁r³ + C₂r^p <= r/2`, and forcing with
//! `‖h‖_{L³} <= m = r₁/2` keeps `K(r₁)` invariant under the auxiliary solve.

use serde::{Deserialize, Serialize};

use crate::energy::{signed_power_field, ProblemSpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{lp_norm, w2n_norm, ScalarField, DIM};
use crate::sampling::sample_family;

/// Lower floor for an estimated constant (e.g. `C₁` when `K ≡ 0`).
pub const CONSTANT_FLOOR: f64 = 1e-30;

/// Slack allowed on the ball inequalities.
pub const INVARIANT_SLACK: f64 = 1e-12;

/// Tolerance of [`check_lemma_k`].
pub const LEMMA_SLACK: f64 = 1e-10;

pub const DEFAULT_SAFETY: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub c1: f64,
    pub c2: f64,
    pub r1: f64,
    /// Admissible forcing bound `r₁/2`.
    pub m: f64,
    pub p: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl BallSpec {
    /// Assemble from constants, computing `r₁` and `m`.
    pub fn from_constants(c1: f64, c2: f64, p: f64, sample_count: usize, seed: u64) -> Result<Self> {
        let r1 = compute_r1(c1, c2, p)?;
        Ok(BallSpec {
            c1,
            c2,
            r1,
            m: admissible_h_bound(r1),
            p,
            sample_count,
            seed,
        })
    }

    /// `C₁ r³ + C₂ r^p`.
    pub fn growth(&self, r: f64) -> f64 {
        self.c1 * r.powi(3) + self.c2 * r.powf(self.p)
    }

    /// Both ball inequalities at `r = r₁`.
    pub fn invariants_hold(&self) -> bool {
        let g = self.growth(self.r1);
        g <= self.r1 / 2.0 + INVARIANT_SLACK && g + self.m <= self.r1 + INVARIANT_SLACK
    }
}

/// Per-sample ratios behind an estimate.
#[derive(Clone, Debug)]
pub struct ConstantEstimate {
    pub c1: f64,
    pub c2: f64,
    pub c1_ratios: Vec<f64>,
    pub c2_ratios: Vec<f64>,
    /// Samples with zero norm, left out of the maxima.
    pub skipped: usize,
}

/// `‖Kφ_u u‖_{L³} / ‖u‖³`, or `None` if `u` has zero norm.
pub fn nonlocal_ratio(u: &ScalarField, spec: &ProblemSpec) -> Result<Option<f64>> {
    let norm = w2n_norm(u);
    if norm == 0.0 {
        return Ok(None);
    }
    let phi = spec.phi(u)?;
    let term = spec.k().mul(&phi)?.mul(u)?;
    // divide before powering: large amplitudes would overflow norm³
    Ok(Some(lp_norm(&term.scale(1.0 / norm), DIM as f64)? / (norm * norm)))
}

/// `‖sign(u)|u|^p‖_{L³} / ‖u‖^p`, or `None` if `u` has zero norm.
pub fn power_ratio(u: &ScalarField, p: f64) -> Result<Option<f64>> {
    let norm = w2n_norm(u);
    if norm == 0.0 {
        return Ok(None);
    }
    let unit = u.scale(1.0 / norm);
    Ok(Some(lp_norm(&signed_power_field(&unit, p), DIM as f64)?))
}

/// Estimate `C₁`, `C₂` with the per-sample ratios retained.
pub fn estimate_constants_detailed(
    spec: &ProblemSpec,
    samples: usize,
    seed: u64,
    safety: f64,
) -> Result<ConstantEstimate> {
    if samples < 1 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if !(safety >= 1.0) {
        return Err(Error::InvalidParameter(format!("safety factor must be >= 1, got {safety}")));
    }
    let family = sample_family(spec.grid(), samples, seed);
    let results = exec::map_batch(&family, |u| -> Result<Option<(f64, f64)>> {
        let c1 = nonlocal_ratio(u, spec)?;
        let c2 = power_ratio(u, spec.p())?;
        Ok(c1.zip(c2))
    });

    let mut c1_ratios = Vec::with_capacity(samples);
    let mut c2_ratios = Vec::with_capacity(samples);
    let mut skipped = 0;
    for r in results {
        match r? {
            Some((a, b)) => {
                c1_ratios.push(a);
                c2_ratios.push(b);
            }
            None => skipped += 1,
        }
    }
    if c1_ratios.is_empty() {
        return Err(Error::EstimationFailure);
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(ConstantEstimate {
        c1: (safety * max(&c1_ratios)).max(CONSTANT_FLOOR),
        c2: (safety * max(&c2_ratios)).max(CONSTANT_FLOOR),
        c1_ratios,
        c2_ratios,
        skipped,
    })
}

/// `(C₁, C₂)` as safety × the largest sampled ratio.
pub fn estimate_constants(spec: &ProblemSpec, samples: usize, seed: u64, safety: f64) -> Result<(f64, f64)> {
    let est = estimate_constants_detailed(spec, samples, seed, safety)?;
    Ok((est.c1, est.c2))
}

/// Root of the increasing function `C₁r² + C₂r^{p−1} − ½`, by bisection to
/// machine precision. Returns the lower end of the final bracket, so
/// `C₁r₁³ + C₂r₁^p <= r₁/2` holds as evaluated in floating point.
pub fn compute_r1(c1: f64, c2: f64, p: f64) -> Result<f64> {
    if !(c1 >= 0.0 && c2 >= 0.0 && c1 + c2 > 0.0) || !c1.is_finite() || !c2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "constants must be nonnegative and not both zero, got C1 = {c1}, C2 = {c2}"
        )));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("exponent p must be > 1, got {p}")));
    }
    let g = |r: f64| c1 * r * r + c2 * r.powf(p - 1.0) - 0.5;

    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `g(lo) <= 0` and `C₁lo³ + C₂lo^p <= lo/2` can round differently by an
    // ulp; step down until the latter also holds.
    while lo > 0.0 && c1 * lo.powi(3) + c2 * lo.powf(p) > lo / 2.0 {
        lo = lo.next_down();
    }
    Ok(lo)
}

/// `m = r₁/2`.
pub fn admissible_h_bound(r1: f64) -> f64 {
    r1 / 2.0
}

/// Estimate constants and derive `r₁`, `m` in one go.
pub fn build_ball(spec: &ProblemSpec, samples: usize, seed: u64, safety: f64) -> Result<BallSpec> {
    let (c1, c2) = estimate_constants(spec, samples, seed, safety)?;
    BallSpec::from_constants(c1, c2, spec.p(), samples, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `‖−Kφ_u u + sign(u)|u|^p + h‖_{L³} <= C₁r₁³ + C₂r₁^p + ‖h‖_{L³}` for a
/// field inside the ball.
pub fn check_lemma_k(u: &ScalarField, ball: &BallSpec, spec: &ProblemSpec) -> Result<LemmaCheck> {
    let norm = w2n_norm(u);
    if norm > ball.r1 * (1.0 + INVARIANT_SLACK) {
        return Err(Error::OutsideBall { norm, radius: ball.r1 });
    }
    let phi = spec.phi(u)?;
    let source = crate::energy::nonlinear_source(u, &phi, spec)?;
    let lhs = lp_norm(&source, DIM as f64)?;
    let rhs = ball.growth(ball.r1) + lp_norm(spec.h(), DIM as f64)?;
    Ok(LemmaCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + LEMMA_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainGrid};
    use crate::poisson::LinearSolveOptions;
    use approx::assert_relative_eq;

    fn spec(grid: DomainGrid, k: f64, p: f64) -> ProblemSpec {
        ProblemSpec::new(
            p,
            ScalarField::constant(grid, k),
            ScalarField::first_eigenfunction(grid).scale(1e-3),
            LinearSolveOptions::for_grid(grid),
        )
        .unwrap()
    }

    #[test]
    fn closed_form_radii() {
        assert_relative_eq!(compute_r1(1.0, 0.0, 7.0).unwrap(), 0.5f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(compute_r1(1.0, 1e-300, 7.0).unwrap(), 0.5f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(compute_r1(1.0, 1.0, 3.0).unwrap(), 0.5, max_relative = 1e-12);
        let r = compute_r1(1.0, 1.0, 7.0).unwrap();
        assert!(r > 0.65 && r < 0.66);
        let g = |r: f64| r * r + r.powi(6) - 0.5;
        assert!(g(0.65) < 0.0 && g(0.66) > 0.0);
    }

    #[test]
    fn r1_rejects_bad_input() {
        assert!(compute_r1(0.0, 0.0, 3.0).is_err());
        assert!(compute_r1(-1.0, 1.0, 3.0).is_err());
        assert!(compute_r1(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn tiny_and_huge_constants() {
        for (c1, c2, p) in [(1e-20, 1e-25, 7.0), (1e12, 1e15, 3.0), (CONSTANT_FLOOR, 3.0, 11.5)] {
            let r = compute_r1(c1, c2, p).unwrap();
            let ball = BallSpec::from_constants(c1, c2, p, 1, 0).unwrap();
            assert_eq!(ball.r1, r);
            assert!(ball.invariants_hold(), "{c1} {c2} {p}");
            assert!(r > 0.0 && r.is_finite());
        }
    }

    #[test]
    fn admissible_bound_examples() {
        assert_eq!(admissible_h_bound(0.5), 0.25);
        assert_relative_eq!(admissible_h_bound(0.5f64.sqrt()), 1.0 / (2.0 * 2.0f64.sqrt()), max_relative = 1e-15);
        let ball = BallSpec::from_constants(1.0, 1.0, 3.0, 1, 0).unwrap();
        assert!(ball.invariants_hold());
    }

    #[test]
    fn zero_coefficient_gives_floor() {
        let g = build_grid(5).unwrap();
        let (c1, c2) = estimate_constants(&spec(g, 0.0, 3.0), 6, 1, 2.0).unwrap();
        assert_eq!(c1, CONSTANT_FLOOR);
        assert!(c2 > CONSTANT_FLOOR);
    }

    #[test]
    fn ratios_are_scale_invariant() {
        let g = build_grid(6).unwrap();
        let s = spec(g, 1.0, 7.0);
        for u in sample_family(g, 5, 3) {
            let a = nonlocal_ratio(&u, &s).unwrap().unwrap();
            let b = nonlocal_ratio(&u.scale(3.0), &s).unwrap().unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
            let a = power_ratio(&u, 7.0).unwrap().unwrap();
            let b = power_ratio(&u.scale(3.0), 7.0).unwrap().unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn estimate_dominates_samples() {
        let g = build_grid(5).unwrap();
        let safety = 2.0;
        let est = estimate_constants_detailed(&spec(g, 1.0, 7.0), 12, 9, safety).unwrap();
        assert!(est.c1_ratios.iter().all(|&r| r <= est.c1 / safety));
        assert!(est.c2_ratios.iter().all(|&r| r <= est.c2 / safety));
        assert_eq!(est.skipped, 0);
    }

    #[test]
    fn estimation_is_deterministic() {
        let g = build_grid(5).unwrap();
        let s = spec(g, 1.0, 3.0);
        let a = estimate_constants(&s, 9, 4, 2.0).unwrap();
        let b = estimate_constants(&s, 9, 4, 2.0).unwrap();
        let c = exec::sequential(|| estimate_constants(&s, 9, 4, 2.0).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn bad_estimation_params() {
        let g = build_grid(4).unwrap();
        let s = spec(g, 1.0, 3.0);
        assert!(estimate_constants(&s, 0, 1, 2.0).is_err());
        assert!(estimate_constants(&s, 3, 1, 0.5).is_err());
    }

    #[test]
    fn lemma_check_zero_field_and_outside() {
        let g = build_grid(5).unwrap();
        let s = spec(g, 1.0, 3.0);
        let ball = build_ball(&s, 8, 2, 2.0).unwrap();
        let c = check_lemma_k(&ScalarField::zeros(g), &ball, &s).unwrap();
        assert_relative_eq!(c.lhs, lp_norm(s.h(), 3.0).unwrap(), max_relative = 1e-15);
        assert!(c.holds);

        let e = ScalarField::first_eigenfunction(g);
        let on_boundary = e.scale(ball.r1 / w2n_norm(&e));
        assert!(check_lemma_k(&on_boundary, &ball, &s).unwrap().holds);
        assert!(matches!(
            check_lemma_k(&on_boundary.scale(1.5), &ball, &s),
            Err(Error::OutsideBall { .. })
        ));
    }
}
