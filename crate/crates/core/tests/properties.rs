use proptest::prelude::*;
use smx_core::ball::compute_r1;
use smx_core::energy::{signed_power, ProblemSpec};
use smx_core::grid::{apply_laplacian, grad_l2_norm, lp_norm, w2n_norm, DomainGrid, ScalarField};
use smx_core::minimize::retract_to_ball;
use smx_core::poisson::{solve_dirichlet_poisson, LinearSolveOptions};

fn field_on(n: usize, amp: f64) -> impl Strategy<Value = ScalarField> {
    let g = DomainGrid::new(n).unwrap();
    prop::collection::vec(-amp..amp, g.interior_count()).prop_map(move |v| ScalarField::from_values(g, v).unwrap())
}

fn field_pair() -> impl Strategy<Value = (ScalarField, ScalarField)> {
    (3usize..7).prop_flat_map(|n| (field_on(n, 10.0), field_on(n, 10.0)))
}

fn field() -> impl Strategy<Value = ScalarField> {
    (3usize..7).prop_flat_map(|n| field_on(n, 10.0))
}

fn tight(g: DomainGrid) -> LinearSolveOptions {
    LinearSolveOptions {
        rel_tol: 1e-12,
        ..LinearSolveOptions::for_grid(g)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_norm_is_homogeneous(u in field(), t in -50.0f64..50.0, m in 1.0f64..9.0) {
        let lhs = lp_norm(&u.scale(t), m).unwrap();
        let rhs = t.abs() * lp_norm(&u, m).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn lp_norm_triangle_inequality((u, v) in field_pair(), m in 1.0f64..9.0) {
        let sum = lp_norm(&u.add(&v).unwrap(), m).unwrap();
        let bound = lp_norm(&u, m).unwrap() + lp_norm(&v, m).unwrap();
        prop_assert!(sum <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn lp_norms_are_monotone_in_exponent(u in field(), a in 1.0f64..4.0, b in 4.0f64..9.0) {
        // the interior nodes carry total measure below one
        prop_assert!(lp_norm(&u, a).unwrap() <= lp_norm(&u, b).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn laplacian_is_symmetric_positive_definite((u, v) in field_pair()) {
        let g = u.grid();
        let uau = u.integrate_product(&apply_laplacian(&u)).unwrap();
        prop_assert!(uau >= g.first_eigenvalue() * u.integrate_product(&u).unwrap() * (1.0 - 1e-12));
        let uav = u.integrate_product(&apply_laplacian(&v)).unwrap();
        let vau = v.integrate_product(&apply_laplacian(&u)).unwrap();
        prop_assert!((uav - vau).abs() <= 1e-12 * grad_l2_norm(&u) * grad_l2_norm(&v) + 1e-300);
    }

    #[test]
    fn w2n_norm_is_a_norm((u, v) in field_pair(), t in -20.0f64..20.0) {
        prop_assert!((w2n_norm(&u.scale(t)) - t.abs() * w2n_norm(&u)).abs() <= 1e-12 * t.abs() * w2n_norm(&u) + 1e-300);
        prop_assert!(w2n_norm(&u.add(&v).unwrap()) <= (w2n_norm(&u) + w2n_norm(&v)) * (1.0 + 1e-12));
    }

    #[test]
    fn poisson_is_linear((f, g) in field_pair(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let opts = tight(f.grid());
        let wf = solve_dirichlet_poisson(&f, &opts).unwrap().w;
        let wg = solve_dirichlet_poisson(&g, &opts).unwrap().w;
        let combo = solve_dirichlet_poisson(&f.scale(a).axpy(b, &g).unwrap(), &opts).unwrap().w;
        let expected = wf.scale(a).axpy(b, &wg).unwrap();
        let scale = lp_norm(&wf, 2.0).unwrap() * a.abs() + lp_norm(&wg, 2.0).unwrap() * b.abs();
        prop_assert!(lp_norm(&combo.sub(&expected).unwrap(), 2.0).unwrap() <= 1e-9 * scale + 1e-300);
    }

    #[test]
    fn poisson_residual_meets_tolerance(f in field()) {
        let opts = LinearSolveOptions::for_grid(f.grid());
        let sol = solve_dirichlet_poisson(&f, &opts).unwrap();
        let residual = apply_laplacian(&sol.w).sub(&f).unwrap();
        prop_assert!(lp_norm(&residual, 2.0).unwrap() <= 1.01 * opts.rel_tol * lp_norm(&f, 2.0).unwrap());
    }

    #[test]
    fn phi_is_nonnegative_and_quadratic(u in field(), t in 0.0f64..5.0) {
        let g = u.grid();
        let k = ScalarField::from_fn(g, |x, y, _| 1.0 + x * y);
        let spec = ProblemSpec::diagnostic(3.0, k, ScalarField::zeros(g), tight(g)).unwrap();
        let phi = spec.phi(&u).unwrap();
        let sup = phi.max_abs();
        prop_assert!(phi.min_value() >= -1e-10 * sup);
        let phi_t = spec.phi(&u.scale(t)).unwrap();
        let err = lp_norm(&phi_t.axpy(-t * t, &phi).unwrap(), 2.0).unwrap();
        prop_assert!(err <= 1e-9 * t * t * lp_norm(&phi, 2.0).unwrap() + 1e-300);
    }

    #[test]
    fn signed_power_is_odd_and_monotone(x in -1e3f64..1e3, y in -1e3f64..1e3, p in 1.01f64..9.0) {
        prop_assert_eq!(signed_power(-x, p), -signed_power(x, p));
        if x < y {
            prop_assert!(signed_power(x, p) <= signed_power(y, p));
        }
    }

    #[test]
    fn r1_decreases_with_constants(c1 in 1e-6f64..1e3, c2 in 1e-6f64..1e3, p in 1.5f64..9.0, f in 1.01f64..10.0) {
        let r = compute_r1(c1, c2, p).unwrap();
        let (r_c1, r_c2) = (compute_r1(c1 * f, c2, p).unwrap(), compute_r1(c1, c2 * f, p).unwrap());
        prop_assert!(r_c1 <= r && r_c2 <= r);
        // strict once the change in C₁r² + C₂r^{p−1} is resolvable next to ½
        if (f - 1.0) * c1 * r * r > 1e-12 {
            prop_assert!(r_c1 < r);
        }
        if (f - 1.0) * c2 * r.powf(p - 1.0) > 1e-12 {
            prop_assert!(r_c2 < r);
        }
        prop_assert!(c1 * r.powi(3) + c2 * r.powf(p) <= r / 2.0);
    }

    #[test]
    fn retraction_is_feasible_and_idempotent(u in field(), r in 1e-3f64..1e4) {
        let v = retract_to_ball(&u, r);
        prop_assert!(w2n_norm(&v) <= r * (1.0 + 1e-12));
        let again = retract_to_ball(&v, r);
        prop_assert!(lp_norm(&again.sub(&v).unwrap(), 2.0).unwrap() <= 1e-12 * lp_norm(&v, 2.0).unwrap() + 1e-300);
    }
}
