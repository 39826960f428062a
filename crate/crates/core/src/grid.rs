//! Uniform grid on the unit cube, scalar fields with zero Dirichlet data,
//! and the discrete norms and operators built on them.
//!
//! Only interior nodes are stored. A node `(i, j, k)` with
//! `1 <= i, j, k <= n - 1` sits at `(i/n, j/n, k/n)`; boundary values are
//! identically zero. Integrals use the node rule `Σ u_i h³`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

/// Spatial dimension, which is also the Lebesgue exponent of the constraint
/// norm `‖Δu‖_{L³}`.
pub const DIM: usize = 3;

/// Uniform tensor grid on `(0,1)³` with `n` subdivisions per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct DomainGrid {
    n: usize,
}

impl TryFrom<usize> for DomainGrid {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        DomainGrid::new(n)
    }
}

impl From<DomainGrid> for usize {
    fn from(g: DomainGrid) -> usize {
        g.n
    }
}

/// Build a grid with `n >= 3` subdivisions per axis.
pub fn build_grid(n: usize) -> Result<DomainGrid> {
    DomainGrid::new(n)
}

impl DomainGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(n));
        }
        Ok(DomainGrid { n })
    }

    /// Subdivisions per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing `1/n`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Quadrature weight of one node, `h³`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(DIM as i32)
    }

    /// Interior nodes per axis, `n - 1`.
    pub fn interior_per_axis(&self) -> usize {
        self.n - 1
    }

    /// `(n - 1)³`.
    pub fn interior_count(&self) -> usize {
        self.interior_per_axis().pow(DIM as u32)
    }

    /// Flat storage index of interior node `(i, j, k)` (1-based, x slowest).
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let m = self.interior_per_axis();
        debug_assert!((1..=m).contains(&i) && (1..=m).contains(&j) && (1..=m).contains(&k));
        ((i - 1) * m + (j - 1)) * m + (k - 1)
    }

    /// Inverse of [`DomainGrid::index`].
    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let m = self.interior_per_axis();
        let k = idx % m;
        let j = (idx / m) % m;
        let i = idx / (m * m);
        (i + 1, j + 1, k + 1)
    }

    /// Physical position of a node. Computed as `i/n` so that `h·n = 1`
    /// holds exactly for the boundary.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords(idx);
        let n = self.n as f64;
        [i as f64 / n, j as f64 / n, k as f64 / n]
    }

    /// Eigenvalue of `−Δ_h` for the sine mode `(kx, ky, kz)`:
    /// `Σ 4 sin²(π k h / 2) / h²`.
    pub fn laplacian_eigenvalue(&self, kx: usize, ky: usize, kz: usize) -> f64 {
        let h = self.spacing();
        [kx, ky, kz]
            .iter()
            .map(|&k| 4.0 * (PI * k as f64 * h / 2.0).sin().powi(2) / (h * h))
            .sum()
    }

    /// Smallest eigenvalue `λ_h = 12 sin²(πh/2)/h²`.
    pub fn first_eigenvalue(&self) -> f64 {
        self.laplacian_eigenvalue(1, 1, 1)
    }

    /// Largest eigenvalue `12 cos²(πh/2)/h²`.
    pub fn largest_eigenvalue(&self) -> f64 {
        let m = self.interior_per_axis();
        self.laplacian_eigenvalue(m, m, m)
    }
}

/// Real values on the interior nodes of a [`DomainGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: DomainGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: DomainGrid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.interior_count()],
        }
    }

    pub fn constant(grid: DomainGrid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.interior_count()],
        }
    }

    /// Wrap raw node values. Rejects wrong lengths and non-finite entries.
    pub fn from_values(grid: DomainGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} node values, got {}",
                grid.interior_count(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value {} at node {pos}",
                values[pos]
            )));
        }
        Ok(ScalarField { grid, values })
    }

    /// Sample `f(x, y, z)` at every interior node.
    pub fn from_fn(grid: DomainGrid, f: impl Fn(f64, f64, f64) -> f64 + Sync) -> Self {
        let mut values = vec![0.0; grid.interior_count()];
        exec::fill_indexed(&mut values, |idx| {
            let [x, y, z] = grid.point(idx);
            f(x, y, z)
        });
        ScalarField { grid, values }
    }

    /// Discrete sine mode `sin(kx π x) sin(ky π y) sin(kz π z)`, an exact
    /// eigenvector of the 7-point Laplacian.
    pub fn sine_mode(grid: DomainGrid, kx: usize, ky: usize, kz: usize) -> Self {
        let (a, b, c) = (kx as f64 * PI, ky as f64 * PI, kz as f64 * PI);
        ScalarField::from_fn(grid, |x, y, z| (a * x).sin() * (b * y).sin() * (c * z).sin())
    }

    /// The positive first eigenfunction `e₁`.
    pub fn first_eigenfunction(grid: DomainGrid) -> Self {
        ScalarField::sine_mode(grid, 1, 1, 1)
    }

    pub fn grid(&self) -> DomainGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensure_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.n(),
                right: other.grid.n(),
            });
        }
        Ok(())
    }

    /// Nodewise map.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> ScalarField {
        let mut values = vec![0.0; self.values.len()];
        exec::fill_indexed(&mut values, |i| f(self.values[i]));
        ScalarField {
            grid: self.grid,
            values,
        }
    }

    /// Nodewise combination of two fields on the same grid.
    pub fn zip_map(
        &self,
        other: &ScalarField,
        f: impl Fn(f64, f64) -> f64 + Sync,
    ) -> Result<ScalarField> {
        self.ensure_same_grid(other)?;
        let mut values = vec![0.0; self.values.len()];
        exec::fill_indexed(&mut values, |i| f(self.values[i], other.values[i]));
        Ok(ScalarField {
            grid: self.grid,
            values,
        })
    }

    pub fn scale(&self, t: f64) -> ScalarField {
        self.map(|v| t * v)
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + a·x`.
    pub fn axpy(&self, a: f64, x: &ScalarField) -> Result<ScalarField> {
        self.zip_map(x, |s, xv| s + a * xv)
    }

    /// Nodewise product.
    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a * b)
    }

    /// Plain Euclidean dot product of node values (no `h³` weight).
    pub fn dot(&self, other: &ScalarField) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(exec::sum_indexed(self.values.len(), |i| {
            self.values[i] * other.values[i]
        }))
    }

    /// Quadrature of the product, `Σ u v h³`.
    pub fn integrate_product(&self, other: &ScalarField) -> Result<f64> {
        Ok(self.dot(other)? * self.grid.cell_volume())
    }

    /// Quadrature `Σ u h³`.
    pub fn integrate(&self) -> f64 {
        exec::sum_indexed(self.values.len(), |i| self.values[i]) * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        exec::max_indexed(self.values.len(), |i| self.values[i].abs()).max(0.0)
    }

    pub fn min_value(&self) -> f64 {
        -exec::max_indexed(self.values.len(), |i| -self.values[i])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Discrete `L^m` norm `(Σ |u|^m h³)^{1/m}`.
pub fn lp_norm(u: &ScalarField, m: f64) -> Result<f64> {
    if !(m >= 1.0) {
        return Err(Error::InvalidExponent(m));
    }
    let vals = u.values();
    // Scale by the largest magnitude so large exponents cannot overflow.
    let scale = u.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let sum = if m == 2.0 {
        exec::sum_indexed(vals.len(), |i| {
            let a = vals[i] / scale;
            a * a
        })
    } else if m.fract() == 0.0 && m <= 64.0 {
        let e = m as i32;
        exec::sum_indexed(vals.len(), |i| (vals[i].abs() / scale).powi(e))
    } else {
        exec::sum_indexed(vals.len(), |i| (vals[i].abs() / scale).powf(m))
    };
    Ok(scale * (sum * u.grid().cell_volume()).powf(1.0 / m))
}

/// Discrete H¹₀ seminorm from forward differences over every face, including
/// the faces that touch the zero boundary.
pub fn grad_l2_norm(u: &ScalarField) -> f64 {
    let v = u.values();
    let h = u.grid().spacing();
    (face_sum(u.grid(), |a, b| (v[a] - b.map_or(0.0, |q| v[q])).powi(2), |a| v[a] * v[a]) / (h * h)
        * u.grid().cell_volume())
    .sqrt()
}

/// Face-wise inner product `Σ_faces (∇⁺u)(∇⁺v) h³`, the bilinear form whose
/// diagonal is `grad_l2_norm(u)²`.
pub fn grad_inner(u: &ScalarField, v: &ScalarField) -> Result<f64> {
    u.ensure_same_grid(v)?;
    let (a, b) = (u.values(), v.values());
    let h = u.grid().spacing();
    let sum = face_sum(
        u.grid(),
        |c, q| (a[c] - q.map_or(0.0, |q| a[q])) * (b[c] - q.map_or(0.0, |q| b[q])),
        |c| a[c] * b[c],
    );
    Ok(sum / (h * h) * u.grid().cell_volume())
}

/// Sum of `face(c, minus)` over the three backward faces of every node
/// (`minus = None` on the low boundary) plus `boundary(c)` for every high
/// boundary face.
fn face_sum(
    grid: DomainGrid,
    face: impl Fn(usize, Option<usize>) -> f64 + Sync + Send,
    boundary: impl Fn(usize) -> f64 + Sync + Send,
) -> f64 {
    let m = grid.interior_per_axis();
    let (sx, sy) = (m * m, m);
    exec::sum_rows(m * m, m, |row| {
        let (i, j) = (row / m + 1, row % m + 1);
        let base = row * m;
        let mut acc = 0.0;
        for k in 1..=m {
            let c = base + k - 1;
            acc += face(c, (i > 1).then(|| c - sx));
            acc += face(c, (j > 1).then(|| c - sy));
            acc += face(c, (k > 1).then(|| c - 1));
            let highs = (i == m) as u8 + (j == m) as u8 + (k == m) as u8;
            if highs > 0 {
                acc += f64::from(highs) * boundary(c);
            }
        }
        acc
    })
}

/// `−Δ_h u` with the 7-point stencil `(6u_c − Σ neighbors)/h²` and zero
/// Dirichlet ghosts.
pub fn apply_laplacian(u: &ScalarField) -> ScalarField {
    let grid = u.grid();
    let mut out = vec![0.0; u.len()];
    apply_laplacian_into(grid, u.values(), &mut out);
    ScalarField { grid, values: out }
}

pub(crate) fn apply_laplacian_into(grid: DomainGrid, vals: &[f64], out: &mut [f64]) {
    let m = grid.interior_per_axis();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let (sx, sy) = (m * m, m);
    exec::fill_rows(out, m, |row, line| {
        let (i, j) = (row / m + 1, row % m + 1);
        let base = row * m;
        let c = &vals[base..base + m];
        for (k, o) in line.iter_mut().enumerate() {
            let idx = base + k;
            let mut nb = 0.0;
            if i > 1 {
                nb += vals[idx - sx];
            }
            if i < m {
                nb += vals[idx + sx];
            }
            if j > 1 {
                nb += vals[idx - sy];
            }
            if j < m {
                nb += vals[idx + sy];
            }
            if k > 0 {
                nb += c[k - 1];
            }
            if k + 1 < m {
                nb += c[k + 1];
            }
            *o = (6.0 * c[k] - nb) * inv_h2;
        }
    });
}

/// The constraint norm `‖−Δ_h u‖_{L³}`, equivalent to the W^{2,3} norm on
/// H¹₀ ∩ W^{2,3}.
pub fn w2n_norm(u: &ScalarField) -> f64 {
    lp_norm(&apply_laplacian(u), DIM as f64).expect("exponent 3 is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: DomainGrid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = (0..grid.interior_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        ScalarField::from_values(grid, vals).unwrap()
    }

    #[test]
    fn build_grid_examples() {
        let g = build_grid(4).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.interior_count(), 27);
        let g = build_grid(3).unwrap();
        assert_eq!(g.spacing(), 1.0 / 3.0);
        assert_eq!(g.interior_count(), 8);
        assert!(matches!(build_grid(2), Err(Error::InvalidGrid(2))));
    }

    #[test]
    fn index_round_trip() {
        let g = build_grid(5).unwrap();
        for idx in 0..g.interior_count() {
            let (i, j, k) = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
        assert_eq!(g.point(g.index(4, 4, 4)), [0.8, 0.8, 0.8]);
    }

    #[test]
    fn lp_norm_of_constant() {
        let g = build_grid(4).unwrap();
        let u = ScalarField::constant(g, 1.0);
        assert_relative_eq!(lp_norm(&u, 2.0).unwrap(), (27.0f64 / 64.0).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(lp_norm(&u, 2.0).unwrap(), 0.649519, epsilon = 1e-6);
    }

    #[test]
    fn lp_norm_of_zero_and_bad_exponent() {
        let g = build_grid(4).unwrap();
        let z = ScalarField::zeros(g);
        for m in [1.0, 2.0, 3.0, 7.5] {
            assert_eq!(lp_norm(&z, m).unwrap(), 0.0);
        }
        assert!(matches!(lp_norm(&z, 0.5), Err(Error::InvalidExponent(_))));
        assert!(lp_norm(&z, f64::NAN).is_err());
    }

    #[test]
    fn grad_norm_of_eigenfunction() {
        let g = build_grid(8).unwrap();
        let e = ScalarField::first_eigenfunction(g);
        let e = e.scale(1.0 / lp_norm(&e, 2.0).unwrap());
        assert_relative_eq!(grad_l2_norm(&e), g.first_eigenvalue().sqrt(), max_relative = 1e-12);
        assert_eq!(grad_l2_norm(&ScalarField::zeros(g)), 0.0);
    }

    #[test]
    fn laplacian_eigenfunction_identity() {
        for n in [3, 4, 8, 11] {
            let g = build_grid(n).unwrap();
            let e = ScalarField::first_eigenfunction(g);
            let le = apply_laplacian(&e);
            let lam = g.first_eigenvalue();
            let h = g.spacing();
            assert_relative_eq!(lam, 12.0 * (PI * h / 2.0).sin().powi(2) / (h * h), max_relative = 1e-15);
            for (a, b) in le.values().iter().zip(e.values()) {
                assert_relative_eq!(*a, lam * b, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
        let g = build_grid(5).unwrap();
        assert!(apply_laplacian(&ScalarField::zeros(g)).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn higher_modes_are_eigenvectors() {
        let g = build_grid(7).unwrap();
        let u = ScalarField::sine_mode(g, 2, 5, 3);
        let lu = apply_laplacian(&u);
        let lam = g.laplacian_eigenvalue(2, 5, 3);
        let err = lu.axpy(-lam, &u).unwrap().max_abs();
        assert!(err < 1e-10 * lam);
    }

    #[test]
    fn w2n_examples() {
        let g = build_grid(6).unwrap();
        assert_eq!(w2n_norm(&ScalarField::zeros(g)), 0.0);
        let e = ScalarField::first_eigenfunction(g);
        assert_relative_eq!(
            w2n_norm(&e),
            g.first_eigenvalue() * lp_norm(&e, 3.0).unwrap(),
            max_relative = 1e-12
        );
        let u = random_field(g, 3);
        assert_relative_eq!(w2n_norm(&u.scale(-2.5)), 2.5 * w2n_norm(&u), max_relative = 1e-12);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = ScalarField::zeros(build_grid(4).unwrap());
        let b = ScalarField::zeros(build_grid(5).unwrap());
        assert!(matches!(a.add(&b), Err(Error::GridMismatch { left: 4, right: 5 })));
        assert!(a.dot(&b).is_err());
    }

    #[test]
    fn from_values_rejects_nan_and_bad_length() {
        let g = build_grid(3).unwrap();
        assert!(ScalarField::from_values(g, vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(ScalarField::from_values(g, v).is_err());
    }

    #[test]
    fn grid_serde_validates() {
        let g: DomainGrid = serde_json::from_str("9").unwrap();
        assert_eq!(g.n(), 9);
        assert!(serde_json::from_str::<DomainGrid>("2").is_err());
    }

    #[test]
    fn large_values_do_not_overflow_lp() {
        let g = build_grid(3).unwrap();
        let u = ScalarField::constant(g, 1e200);
        let expected = 1e200 * (8.0 * g.cell_volume()).powf(1.0 / 7.0);
        assert_relative_eq!(lp_norm(&u, 7.0).unwrap(), expected, max_relative = 1e-13);
    }
}
