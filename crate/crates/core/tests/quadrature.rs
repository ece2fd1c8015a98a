use std::f64::consts::PI;

use robin_ucp::quadrature::{weighted_boundary_integral, weighted_halfball_integral, QuadratureCounts};

fn counts() -> QuadratureCounts {
    QuadratureCounts::new(16, 32)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn half_ball_closed_forms() {
    let one = weighted_halfball_integral::<2>(|_| 1.0, 1.0, 1.0, counts()).unwrap();
    assert!(rel(one.value, PI / 4.0) < 1e-12);
    let zero = weighted_halfball_integral::<2>(|_| 0.0, 1.0, 1.0, counts()).unwrap();
    assert_eq!(zero.value, 0.0);
    // (x1² − x2²)² = s⁴ cos² 2θ; ∫_0^π cos² 2θ = π/2 and ∫_0^1 s⁵ (1 − s²) ds = 1/24
    let q = weighted_halfball_integral::<2>(|x| (x[0] * x[0] - x[1] * x[1]).powi(2), 1.0, 1.0, counts()).unwrap();
    let angular = PI / 2.0;
    let radial = 1.0 / 6.0 - 1.0 / 8.0;
    assert!(rel(q.value, angular * radial) < 1e-12);
    assert!(rel(q.value, PI / 48.0) < 1e-12);
}

#[test]
fn boundary_closed_forms() {
    let q = weighted_boundary_integral::<2>(|_| 1.0, 1.0, 2.0, counts()).unwrap();
    // 1 − 2/3 + 1/5 on each side
    assert!(rel(q.value, 2.0 * (1.0 - 2.0 / 3.0 + 1.0 / 5.0)) < 1e-12);
    assert_eq!(weighted_boundary_integral::<2>(|_| 0.0, 1.0, 2.0, counts()).unwrap().value, 0.0);
    for k in 0..6 {
        let q = weighted_boundary_integral::<2>(|x| x[0].powi(2 * k), 1.0, 0.0, counts()).unwrap();
        assert!(rel(q.value, 2.0 / (2 * k + 1) as f64) < 1e-12, "k={k}");
    }
}

#[test]
fn radius_scaling() {
    // ∫_{B_r^+} (r² − |x|²)^p = π r^{2p+2} / (2(p+1))
    for &(r, p) in &[(0.3, 1.0), (0.8, 2.5), (1.0, 0.0)] {
        let q = weighted_halfball_integral::<2>(|_| 1.0, r, p, counts()).unwrap();
        let exact = PI * f64::powf(r, 2.0 * p + 2.0) / (2.0 * (p + 1.0));
        assert!(rel(q.value, exact) < 1e-12, "r={r} p={p}");
    }
}

#[test]
fn rejects_bad_radius() {
    assert!(weighted_halfball_integral::<2>(|_| 1.0, 0.0, 1.0, counts()).is_err());
    assert!(weighted_boundary_integral::<2>(|_| 1.0, -1.0, 1.0, counts()).is_err());
}
