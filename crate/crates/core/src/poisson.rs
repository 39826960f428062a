//! Dirichlet Poisson solves `−Δ_h w = f` by unpreconditioned conjugate
//! gradients on the 7-point stencil.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{apply_laplacian_into, DomainGrid, ScalarField};

/// Stopping rule for the CG solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSolveOptions {
    /// Target `‖−Δ_h w − f‖ / ‖f‖`.
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl LinearSolveOptions {
    pub const DEFAULT_REL_TOL: f64 = 1e-10;

    /// Defaults for a grid: `rel_tol = 1e-10`, `max_iters = 10 n³`.
    pub fn for_grid(grid: DomainGrid) -> Self {
        LinearSolveOptions {
            rel_tol: Self::DEFAULT_REL_TOL,
            max_iters: 10 * grid.n().pow(3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub w: ScalarField,
    pub iterations: usize,
    /// Discrete L² norm of the true residual `−Δ_h w − f`.
    pub final_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    exec::sum_indexed(a.len(), |i| a[i] * b[i])
}

/// Solve `−Δ_h w = f` with zero Dirichlet data.
///
/// Fails with [`Error::SolverFailure`] if the relative residual does not
/// reach `opts.rel_tol` within `opts.max_iters` iterations.
pub fn solve_dirichlet_poisson(f: &ScalarField, opts: &LinearSolveOptions) -> Result<PoissonSolution> {
    opts.validate()?;
    let grid = f.grid();
    let vol = grid.cell_volume();
    let len = f.len();
    let rhs = f.values();

    let f_norm2 = dot(rhs, rhs);
    if !f_norm2.is_finite() {
        return Err(Error::InvalidParameter("right-hand side is not finite".into()));
    }
    if f_norm2 == 0.0 {
        return Ok(PoissonSolution {
            w: ScalarField::zeros(grid),
            iterations: 0,
            final_residual: 0.0,
        });
    }
    let f_norm = f_norm2.sqrt();
    let target = opts.rel_tol * f_norm;

    let mut x = vec![0.0; len];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; len];
    let mut rr = f_norm2;
    let mut history = Vec::new();
    let mut iterations = 0;

    // The recurrence residual can drift from the true one; restart from the
    // current iterate a few times before giving up.
    for _restart in 0..4 {
        while rr.sqrt() > target && iterations < opts.max_iters {
            apply_laplacian_into(grid, &p, &mut ap);
            let pap = dot(&p, &ap);
            let alpha = rr / pap;
            exec::update_indexed(&mut x, |i, xi| xi + alpha * p[i]);
            exec::update_indexed(&mut r, |i, ri| ri - alpha * ap[i]);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            exec::update_indexed(&mut p, |i, pi| r[i] + beta * pi);
            iterations += 1;
            history.push(rr.sqrt() / f_norm);
        }

        apply_laplacian_into(grid, &x, &mut ap);
        exec::fill_indexed(&mut r, |i| rhs[i] - ap[i]);
        rr = dot(&r, &r);
        if rr.sqrt() <= target {
            return Ok(PoissonSolution {
                w: ScalarField::from_values(grid, x)?,
                iterations,
                final_residual: (rr * vol).sqrt(),
            });
        }
        if iterations >= opts.max_iters {
            break;
        }
        p.copy_from_slice(&r);
    }

    Err(Error::SolverFailure {
        iterations,
        final_residual: rr.sqrt() / f_norm,
        residual_history: history,
    })
}

/// Reject coefficient fields with a negative node.
pub fn ensure_nonnegative(k: &ScalarField, what: &str) -> Result<()> {
    let min = k.min_value();
    if min < 0.0 {
        return Err(Error::AssumptionViolation(format!(
            "{what} must be >= 0 at every node, found {min}"
        )));
    }
    Ok(())
}

/// The nonlocal potential `φ_u` solving `−Δ_h φ = K u²`.
pub fn compute_phi(u: &ScalarField, k: &ScalarField, opts: &LinearSolveOptions) -> Result<ScalarField> {
    u.ensure_same_grid(k)?;
    ensure_nonnegative(k, "K")?;
    let rhs = u.zip_map(k, |uv, kv| kv * uv * uv)?;
    Ok(solve_dirichlet_poisson(&rhs, opts)?.w)
}
