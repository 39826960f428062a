//! Minimization of `I_K` over the ball `K(r₁)`.
//!
//! Iterates `u ← retract(u − s·∇_S I(u), r₁)` where `∇_S` is the Sobolev
//! gradient and `s` is backtracked from `initial_step` until the energy
//! does not increase. At `s = 1` a Sobolev step is exactly the auxiliary
//! linear solve, so near a small-data solution the scheme behaves like a
//! contracting Picard iteration.

use serde::{Deserialize, Serialize};

use crate::ball::BallSpec;
use crate::energy::{energy_with_phi, gradient_with_phi, i_k, GradientMetric, ProblemSpec};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{grad_l2_norm, lp_norm, w2n_norm, ScalarField, DIM};
use crate::sampling::sample_family;

/// Relative slack on the forcing admission test `‖h‖_{L³} <= m`.
pub const FORCING_SLACK: f64 = 1e-12;

/// Distance to `r₁` below which the minimizer is reported as on the sphere.
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop when the H¹ displacement of a step falls below
    /// `grad_tol · ‖∇u‖`.
    pub grad_tol: f64,
    /// Stop when the relative energy decrease of a step falls below this.
    pub energy_tol: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    pub metric: GradientMetric,
    /// Recorded for provenance; descent itself draws no random numbers.
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 5000,
            grad_tol: 1e-8,
            energy_tol: 1e-12,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            max_backtracks: 60,
            metric: GradientMetric::Sobolev,
            seed: 0,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be >= 1");
        }
        if !(self.grad_tol > 0.0) || !(self.energy_tol > 0.0) || !(self.initial_step > 0.0) {
            return bad("grad_tol, energy_tol and initial_step must be > 0");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if self.max_backtracks < 1 {
            return bad("max_backtracks must be >= 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub step: f64,
    /// `‖∇(u_{k+1} − u_k)‖`
    pub displacement: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Relative step displacement below `grad_tol`.
    Displacement,
    /// Relative energy decrease below `energy_tol`.
    EnergyStagnation,
    /// The gradient vanished identically.
    Stationary,
    /// No step length within `max_backtracks` reductions decreased the energy.
    BacktrackExhausted,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub u1: ScalarField,
    pub beta: f64,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub on_boundary: bool,
    pub stop_reason: StopReason,
}

/// Radial retraction onto `{‖−Δ_h u‖_{L³} <= r}`.
///
/// # Panics
///
/// If `r` is not positive.
pub fn retract_to_ball(u: &ScalarField, r: f64) -> ScalarField {
    assert!(r > 0.0, "ball radius must be positive, got {r}");
    let norm = w2n_norm(u);
    if norm <= r {
        return u.clone();
    }
    u.scale(r / norm)
}

/// Ray parameters searched by [`initial_guess`]: a uniform grid on `[0, 1]`
/// merged with a geometric grid down to `1e-12`.
fn ray_parameters() -> Vec<f64> {
    let mut ts: Vec<f64> = (0..=100).map(|j| j as f64 / 100.0).collect();
    ts.extend((0..=48).map(|k| 10f64.powf(-(k as f64) / 4.0)));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Best point `t*·e` on the ray through the positive eigenfunction `e`
/// scaled onto the ball boundary. Ties go to the smallest `t`.
pub fn initial_guess(spec: &ProblemSpec, r1: f64) -> Result<ScalarField> {
    if !(r1 > 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius must be > 0, got {r1}")));
    }
    let min_h = spec.h().min_value();
    if !(min_h > 0.0) {
        return Err(Error::AssumptionViolation(format!(
            "initial guess needs h > 0 at every node, found {min_h}"
        )));
    }
    let e = ScalarField::first_eigenfunction(spec.grid());
    let e = e.scale(r1 / w2n_norm(&e));
    let ts = ray_parameters();
    let energies = exec::map_batch(&ts, |&t| crate::energy::energy(&e.scale(t), spec).map(|b| b.total));

    let mut best: Option<(f64, f64)> = None;
    for (&t, en) in ts.iter().zip(energies) {
        let en = en?;
        if best.is_none_or(|(_, b)| en < b) {
            best = Some((t, en));
        }
    }
    match best {
        Some((t, en)) if en < 0.0 => Ok(e.scale(t)),
        _ => Err(Error::InitializationFailure),
    }
}

struct Iterate {
    u: ScalarField,
    phi: ScalarField,
    energy: f64,
}

impl Iterate {
    fn new(u: ScalarField, spec: &ProblemSpec) -> Result<Self> {
        let phi = spec.phi(&u)?;
        let energy = energy_with_phi(&u, &phi, spec)?.total;
        Ok(Iterate { u, phi, energy })
    }
}

/// Minimize `I_K` over `K(r₁)`.
///
/// Requires `‖h‖_{L³} <= m`. Problems built with
/// [`ProblemSpec::diagnostic`] start from `u = 0`; all others start from
/// [`initial_guess`], which already has negative energy.
pub fn minimize(spec: &ProblemSpec, ball: &BallSpec, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    opts.validate()?;
    let h_norm = lp_norm(spec.h(), DIM as f64)?;
    if h_norm > ball.m * (1.0 + FORCING_SLACK) {
        return Err(Error::ForcingTooLarge { h_norm, m: ball.m });
    }
    let r1 = ball.r1;
    let start = if spec.is_diagnostic() {
        ScalarField::zeros(spec.grid())
    } else {
        initial_guess(spec, r1)?
    };

    let mut cur = Iterate::new(start, spec)?;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        energy: cur.energy,
        step: 0.0,
        displacement: 0.0,
    }];
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    'outer: for k in 1..=opts.max_iters {
        let grad = gradient_with_phi(&cur.u, &cur.phi, spec, opts.metric)?;
        if grad.max_abs() == 0.0 {
            stop = StopReason::Stationary;
            break;
        }

        let mut step = opts.initial_step;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial = retract_to_ball(&cur.u.axpy(-step, &grad)?, r1);
            let next = Iterate::new(trial, spec)?;
            if next.energy <= cur.energy {
                accepted = Some(next);
                break;
            }
            step *= opts.backtrack_factor;
        }
        let Some(next) = accepted else {
            stop = StopReason::BacktrackExhausted;
            break 'outer;
        };

        let displacement = grad_l2_norm(&next.u.sub(&cur.u)?);
        let decrease = cur.energy - next.energy;
        let scale = grad_l2_norm(&next.u);
        let energy_scale = next.energy.abs().max(f64::MIN_POSITIVE);
        trace.push(TraceEntry {
            iteration: k,
            energy: next.energy,
            step,
            displacement,
        });
        cur = next;
        iterations = k;

        if displacement <= opts.grad_tol * scale {
            stop = StopReason::Displacement;
            break;
        }
        if decrease <= opts.energy_tol * energy_scale {
            stop = StopReason::EnergyStagnation;
            break;
        }
    }

    let norm = w2n_norm(&cur.u);
    Ok(MinimizeResult {
        on_boundary: (norm - r1).abs() <= BOUNDARY_TOL * r1.max(1.0),
        beta: cur.energy,
        iterations,
        trace,
        converged: matches!(
            stop,
            StopReason::Displacement | StopReason::EnergyStagnation | StopReason::Stationary
        ),
        stop_reason: stop,
        u1: cur.u,
    })
}

/// Count of perturbed points `v = retract(u₁ + δ z)` with
/// `I_K(v) < β − slack`, for `count` seeded directions `z` scaled to
/// relative H¹ size `delta`.
pub fn local_minimality_violations(
    result: &MinimizeResult,
    spec: &ProblemSpec,
    ball: &BallSpec,
    count: usize,
    seed: u64,
    delta: f64,
    slack: f64,
) -> Result<usize> {
    let u1 = &result.u1;
    let scale = grad_l2_norm(u1).max(f64::MIN_POSITIVE);
    let dirs = sample_family(spec.grid(), count, seed);
    let values = exec::map_batch(&dirs, |z| -> Result<f64> {
        let zn = grad_l2_norm(z);
        if zn == 0.0 {
            return Ok(f64::INFINITY);
        }
        let v = retract_to_ball(&u1.axpy(delta * scale / zn, z)?, ball.r1);
        i_k(&v, ball.r1 * (1.0 + 1e-12), spec)
    });
    let mut violations = 0;
    for v in values {
        if v? < result.beta - slack {
            violations += 1;
        }
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ball::{build_ball, BallSpec};
    use crate::grid::{build_grid, DomainGrid};
    use crate::poisson::LinearSolveOptions;
    use approx::assert_relative_eq;

    fn standard(grid: DomainGrid, p: f64, fraction: f64) -> (ProblemSpec, BallSpec) {
        let opts = LinearSolveOptions::for_grid(grid);
        let k = ScalarField::constant(grid, 1.0);
        let h0 = ScalarField::first_eigenfunction(grid);
        let provisional = ProblemSpec::new(p, k.clone(), h0.clone(), opts).unwrap();
        let ball = build_ball(&provisional, 16, 7, 2.0).unwrap();
        let h = h0.scale(fraction * ball.m / lp_norm(&h0, 3.0).unwrap());
        (ProblemSpec::new(p, k, h, opts).unwrap(), ball)
    }

    #[test]
    fn retraction_examples() {
        let g = build_grid(5).unwrap();
        let u = ScalarField::from_fn(g, |x, y, z| x * (1.0 - x) * y * z);
        let n = w2n_norm(&u);
        assert_eq!(retract_to_ball(&u, 2.0 * n), u);
        assert_relative_eq!(w2n_norm(&retract_to_ball(&u, n / 2.0)), n / 2.0, max_relative = 1e-13);
        let z = ScalarField::zeros(g);
        assert_eq!(retract_to_ball(&z, 1.0), z);
    }

    #[test]
    fn initial_guess_has_negative_energy() {
        let g = build_grid(6).unwrap();
        let (spec, ball) = standard(g, 7.0, 1.0);
        let u0 = initial_guess(&spec, ball.r1).unwrap();
        assert!(i_k(&u0, ball.r1, &spec).unwrap() < 0.0);
        assert!(u0.min_value() >= 0.0);

        let weak = spec.with_forcing(spec.h().scale(1e-3)).unwrap();
        let u0w = initial_guess(&weak, ball.r1).unwrap();
        assert!(i_k(&u0w, ball.r1, &weak).unwrap() < 0.0);
        assert!(w2n_norm(&u0w) < w2n_norm(&u0));
    }

    #[test]
    fn unforced_problem_stays_at_zero() {
        let g = build_grid(5).unwrap();
        let (spec, ball) = standard(g, 3.0, 1.0);
        let unforced = ProblemSpec::diagnostic(3.0, spec.k().clone(), ScalarField::zeros(g), *spec.linear_opts()).unwrap();
        let res = minimize(&unforced, &ball, &MinimizeOptions::default()).unwrap();
        assert_eq!(res.beta, 0.0);
        assert_eq!(res.u1.max_abs(), 0.0);
        assert!(res.converged);
        assert_eq!(res.stop_reason, StopReason::Stationary);
    }

    #[test]
    fn forcing_gate() {
        let g = build_grid(5).unwrap();
        let (spec, ball) = standard(g, 3.0, 1.0);
        let big = spec.with_forcing(spec.h().scale(1.01)).unwrap();
        assert!(matches!(
            minimize(&big, &ball, &MinimizeOptions::default()),
            Err(Error::ForcingTooLarge { .. })
        ));
    }

    #[test]
    fn descent_is_monotone_and_feasible() {
        let g = build_grid(6).unwrap();
        for metric in [GradientMetric::Sobolev, GradientMetric::L2] {
            let (spec, ball) = standard(g, 7.0, 1.0);
            let opts = MinimizeOptions { metric, max_iters: 300, ..Default::default() };
            let res = minimize(&spec, &ball, &opts).unwrap();
            assert!(res.beta < 0.0);
            assert!(w2n_norm(&res.u1) <= ball.r1 + 1e-12);
            for w in res.trace.windows(2) {
                assert!(w[1].energy <= w[0].energy);
            }
            assert_eq!(res.trace.last().unwrap().energy, res.beta);
        }
    }

    #[test]
    fn standard_run_converges_and_is_deterministic() {
        let g = build_grid(6).unwrap();
        let (spec, ball) = standard(g, 7.0, 1.0);
        let a = minimize(&spec, &ball, &MinimizeOptions::default()).unwrap();
        assert!(a.converged, "{:?}", a.stop_reason);
        assert!(!a.on_boundary);
        let b = minimize(&spec, &ball, &MinimizeOptions::default()).unwrap();
        assert_eq!(a.trace, b.trace);
        let c = exec::sequential(|| minimize(&spec, &ball, &MinimizeOptions::default()).unwrap());
        assert_eq!(a.trace, c.trace);
    }

    #[test]
    fn minimizer_is_locally_minimal() {
        let g = build_grid(6).unwrap();
        let (spec, ball) = standard(g, 3.0, 1.0);
        let res = minimize(&spec, &ball, &MinimizeOptions::default()).unwrap();
        let bad = local_minimality_violations(&res, &spec, &ball, 50, 1234, 1e-3, 1e-9).unwrap();
        assert_eq!(bad, 0);
    }

    #[test]
    fn options_validation() {
        let bad = MinimizeOptions { backtrack_factor: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MinimizeOptions { max_iters: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(MinimizeOptions::default().validate().is_ok());
    }
}
