use robin_ucp::coefficients::{builtin_fields, estimate_bounds, manufacture_from_field, MatrixField, Region};
use robin_ucp::frequency::conformal_mu;
use robin_ucp::linalg::Mat;
use robin_ucp::solutions::{analytic_solution, residual};
use robin_ucp::quadrature::QuadratureCounts;
use std::sync::Arc;

// A(x) = I + [[x1² x2, 0.2 x1], [0.2 x1, x2³]] and its hand derivatives
fn poly(x: &[f64; 2]) -> Mat<2> {
    [[1.0 + x[0] * x[0] * x[1], 0.2 * x[0]], [0.2 * x[0], 1.0 + x[1].powi(3)]]
}

fn poly_grad(x: &[f64; 2]) -> [Mat<2>; 2] {
    [
        [[2.0 * x[0] * x[1], 0.2], [0.2, 0.0]],
        [[x[0] * x[0], 0.0], [0.0, 3.0 * x[1] * x[1]]],
    ]
}

#[test]
fn finite_difference_jacobian_matches_polynomial() {
    let field = MatrixField::<2>::new(poly);
    for &x in &[[0.1, 0.2], [-0.5, 0.3], [0.7, 0.0], [0.0, 0.9]] {
        let fd = field.gradient(&x);
        let exact = poly_grad(&x);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!((fd[i][j][k] - exact[i][j][k]).abs() < 1e-6, "{x:?} {i}{j}{k}");
                }
            }
        }
    }
}

#[test]
fn sine_perturbation_derivative_at_origin() {
    let cs = builtin_fields::<2>("sine-perturb", &[0.1]).unwrap();
    let da = cs.da(&[0.0, 0.0]);
    assert!((da[0][0][0] - 0.1).abs() < 1e-9);
    assert!(da[1][0][0].abs() < 1e-9);
}

#[test]
fn identity_bounds_are_trivial() {
    let b = estimate_bounds(&builtin_fields::<2>("identity", &[]).unwrap(), 512).unwrap();
    assert_eq!(b.lambda, 1.0);
    assert!(b.eps_samples.iter().all(|(_, e)| *e == 0.0));
    assert_eq!(b.i_eps, 0.0);
}

#[test]
fn diagonal_ellipticity_constant() {
    let b = estimate_bounds(&builtin_fields::<2>("diag", &[2.0, 0.5]).unwrap(), 512).unwrap();
    assert!((b.lambda - 0.5).abs() < 1e-12);
}

#[test]
fn lipschitz_modulus_is_linear() {
    let l = 0.1;
    let b = estimate_bounds(&builtin_fields::<2>("lipschitz-perturb", &[l]).unwrap(), 512).unwrap();
    // |x| |DA| = L|x| with r/2 ≤ |x| ≤ r
    for &(r, e) in &b.eps_samples {
        assert!(e <= l * r * (1.0 + 1e-9), "r={r}: {e}");
        assert!(e >= 0.5 * l * r * (1.0 - 1e-9), "r={r}: {e}");
    }
    assert!(b.i_eps <= l * (1.0 + 1e-9) && b.i_eps >= 0.5 * l, "{}", b.i_eps);
}

#[test]
fn doubling_the_potential_doubles_its_bound() {
    let cs = analytic_solution("robin-exponential", &[2.0]).unwrap().coefficients;
    let m = estimate_bounds(&cs, 512).unwrap().m;
    let m2 = estimate_bounds(&cs.with_scaled_potential(2.0), 512).unwrap().m;
    assert!((m - 4.0).abs() < 1e-12);
    assert!((m2 - 2.0 * m).abs() < 1e-12);
}

#[test]
fn manufactured_exponential() {
    let eta0 = 3.0;
    let cs = manufacture_from_field(
        "exp",
        Arc::new(move |x: &[f64; 2]| {
            let e = (eta0 * x[1]).exp();
            (e, [0.0, eta0 * e])
        }),
        MatrixField::identity(),
        Region::half_ball(1.0),
        None,
    )
    .unwrap();
    for &x in &[[0.1, 0.2], [-0.3, 0.6], [0.0, 0.01]] {
        assert!((cs.v(&x) - eta0 * eta0).abs() < 1e-5 * eta0 * eta0, "{x:?}: {}", cs.v(&x));
    }
    for t in [-0.9, -0.2, 0.0, 0.5] {
        assert!((cs.eta(&[t, 0.0]) + eta0).abs() < 1e-9);
    }
}

#[test]
fn manufactured_cos_exp() {
    let k = 1.0;
    let cs = manufacture_from_field(
        "cosexp",
        Arc::new(move |x: &[f64; 2]| {
            let e = (k * x[1]).exp();
            let (s, c) = (k * x[0]).sin_cos();
            (c * e, [-k * s * e, k * c * e])
        }),
        MatrixField::identity(),
        Region::half_ball(1.0),
        None,
    )
    .unwrap();
    for &x in &[[0.1, 0.2], [-0.3, 0.6], [0.7, 0.1]] {
        assert!(cs.v(&x).abs() < 1e-5, "{x:?}: {}", cs.v(&x));
    }
    for t in [-0.9, 0.0, 0.5] {
        assert!((cs.eta(&[t, 0.0]) + k).abs() < 1e-9);
    }
}

#[test]
fn manufacture_refuses_vanishing_fields() {
    let r = manufacture_from_field(
        "x1",
        Arc::new(|x: &[f64; 2]| (x[0], [1.0, 0.0])),
        MatrixField::identity(),
        Region::half_ball(1.0),
        None,
    );
    assert!(r.is_err());
}

#[test]
fn manufactured_sets_are_solved_by_their_field() {
    let a = builtin_fields::<2>("lipschitz-perturb", &[0.2]).unwrap().a_field().clone();
    let fields: Vec<robin_ucp::coefficients::FieldFn<2>> = vec![
        Arc::new(|x: &[f64; 2]| (2.0 + x[0], [1.0, 0.0])),
        Arc::new(|x: &[f64; 2]| {
            let e = x[1].exp();
            (e, [0.0, e])
        }),
        Arc::new(|x: &[f64; 2]| (3.0 + x[0] * x[1], [x[1], x[0]])),
    ];
    for (n, f) in fields.into_iter().enumerate() {
        let cs = manufacture_from_field(format!("m{n}"), f.clone(), a.clone(), Region::half_ball(1.0), None).unwrap();
        let res = residual(&f, &cs, QuadratureCounts::new(24, 48)).unwrap();
        assert!(res <= 1e-6, "field {n}: {res}");
    }
}

#[test]
fn block_field_keeps_conormal_tangent_free() {
    let cs = builtin_fields::<2>("block", &[0.3]).unwrap();
    for t in [-0.9, -0.4, 0.1, 0.8] {
        let a = cs.a(&[t, 0.0]);
        // a_{2j} x_j with x = (t, 0)
        assert!((a[1][0] * t).abs() < 1e-14, "t={t}");
    }
}

#[test]
fn conformal_factor_near_origin() {
    for name in ["identity", "block", "lipschitz-perturb"] {
        let params: &[f64] = if name == "identity" { &[] } else { &[0.3] };
        let cs = builtin_fields::<2>(name, params).unwrap();
        assert_eq!(conformal_mu(&cs, &[0.0, 0.0]).unwrap(), 1.0);
        let mu = conformal_mu(&cs, &[1e-8, 0.0]).unwrap();
        assert!((mu - 1.0).abs() < 1e-7, "{name}: {mu}");
    }
    let diag = builtin_fields::<2>("diag", &[2.0, 0.5]).unwrap();
    assert!(conformal_mu(&diag, &[0.0, 0.0]).is_err());
}
