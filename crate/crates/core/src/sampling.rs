//! Seeded family of random test fields: partial sums of random sine
//! products and locally smoothed white noise, drawn at several amplitudes.
//!
//! Generation is sequential from one ChaCha stream so the list depends only
//! on the seed; evaluating the samples may then run in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::{w2n_norm, DomainGrid, ScalarField};

/// Amplitudes cycled through by [`sample_family`].
pub const AMPLITUDES: [f64; 3] = [1e-2, 1.0, 1e2];

const MAX_MODE: usize = 4;
const MAX_TERMS: usize = 6;
const MAX_SMOOTHING_PASSES: usize = 4;

fn sine_sum(grid: DomainGrid, rng: &mut ChaCha8Rng) -> ScalarField {
    let kmax = MAX_MODE.min(grid.interior_per_axis());
    let terms = rng.random_range(1..=MAX_TERMS);
    let mut acc = ScalarField::zeros(grid);
    for _ in 0..terms {
        let (kx, ky, kz) = (
            rng.random_range(1..=kmax),
            rng.random_range(1..=kmax),
            rng.random_range(1..=kmax),
        );
        let c: f64 = rng.sample(StandardNormal);
        let weight = c / (kx * kx + ky * ky + kz * kz) as f64;
        let mode = ScalarField::sine_mode(grid, kx, ky, kz);
        acc = acc.axpy(weight, &mode).expect("same grid");
    }
    acc
}

/// One pass of 7-point averaging with zero boundary.
fn smooth(grid: DomainGrid, vals: &[f64]) -> Vec<f64> {
    let m = grid.interior_per_axis();
    (0..vals.len())
        .map(|idx| {
            let (i, j, k) = grid.coords(idx);
            let mut s = vals[idx];
            if i > 1 {
                s += vals[grid.index(i - 1, j, k)];
            }
            if i < m {
                s += vals[grid.index(i + 1, j, k)];
            }
            if j > 1 {
                s += vals[grid.index(i, j - 1, k)];
            }
            if j < m {
                s += vals[grid.index(i, j + 1, k)];
            }
            if k > 1 {
                s += vals[grid.index(i, j, k - 1)];
            }
            if k < m {
                s += vals[grid.index(i, j, k + 1)];
            }
            s / 7.0
        })
        .collect()
}

fn smoothed_noise(grid: DomainGrid, rng: &mut ChaCha8Rng) -> ScalarField {
    let mut vals: Vec<f64> = (0..grid.interior_count())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let passes = rng.random_range(1..=MAX_SMOOTHING_PASSES);
    for _ in 0..passes {
        vals = smooth(grid, &vals);
    }
    ScalarField::from_values(grid, vals).expect("finite")
}

/// `count` fields from the mixed family. Sample 0 is always the first
/// eigenfunction `e₁`; the rest alternate between sine sums and smoothed
/// noise with amplitudes cycling through [`AMPLITUDES`].
pub fn sample_family(grid: DomainGrid, count: usize, seed: u64) -> Vec<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            if i == 0 {
                return ScalarField::first_eigenfunction(grid);
            }
            let base = if i % 2 == 1 {
                sine_sum(grid, &mut rng)
            } else {
                smoothed_noise(grid, &mut rng)
            };
            base.scale(AMPLITUDES[i % AMPLITUDES.len()])
        })
        .collect()
}

/// Rescale `u` so that `w2n_norm` equals `radius`. Zero fields stay zero.
pub fn scale_to_w2n(u: &ScalarField, radius: f64) -> ScalarField {
    let norm = w2n_norm(u);
    if norm == 0.0 {
        return u.clone();
    }
    u.scale(radius / norm)
}

/// `count` random fields inside the ball of radius `r`, each with a radius
/// fraction drawn uniformly from `(0, 1]`.
pub fn sample_in_ball(grid: DomainGrid, count: usize, seed: u64, r: f64) -> Vec<ScalarField> {
    // radii come from a stream separate from the shapes
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    sample_family(grid, count, seed)
        .into_iter()
        .map(|u| {
            let frac: f64 = 1.0 - rng.random::<f64>();
            scale_to_w2n(&u, frac * r)
        })
        .collect()
}
