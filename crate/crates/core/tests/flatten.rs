use robin_ucp::coefficients::builtin_fields;
use robin_ucp::flatten::{
    distance_properties, flatten_step1, pushforward_problem, regularized_distance, transform_solution, C11Domain,
    FlatteningMap,
};
use robin_ucp::solutions::analytic_solution;

/// Distance to the graph of `φ(t) = t²/4` by brute-force minimization.
fn parabola_distance(x: &[f64; 2]) -> f64 {
    let mut best = f64::INFINITY;
    let (mut lo, mut hi) = (-3.0, 3.0);
    for _ in 0..6 {
        let n = 2000;
        let mut arg = 0.0;
        for k in 0..=n {
            let t = lo + (hi - lo) * k as f64 / n as f64;
            let d = (x[0] - t).hypot(x[1] - t * t / 4.0);
            if d < best {
                best = d;
                arg = t;
            }
        }
        let step = (hi - lo) / n as f64;
        lo = arg - 2.0 * step;
        hi = arg + 2.0 * step;
    }
    best
}

fn lattice(radius: f64, n: usize) -> Vec<[f64; 2]> {
    let mut pts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let th = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            let s = radius * (j as f64 + 0.5) / n as f64;
            pts.push([s * th.cos(), s * th.sin()]);
        }
    }
    pts
}

#[test]
fn half_plane_distance() {
    let dom = C11Domain::half_plane(1.0).unwrap();
    for x in lattice(0.9, 8) {
        let (rho, grad, _) = regularized_distance(&dom, &x).unwrap();
        assert!((rho - x[1]).abs() < 1e-14);
        assert!(grad[0].abs() < 1e-14 && (grad[1] - 1.0).abs() < 1e-14);
    }
    assert_eq!(regularized_distance(&dom, &[-0.3, 0.0]).unwrap().0, 0.0);
}

#[test]
fn parabola_projection_and_distance_ratio() {
    let dom = C11Domain::parabola(0.25, 1.0).unwrap();
    for x in lattice(0.9, 6).into_iter().filter(|x| dom.contains(x)) {
        let (_, d, _) = dom.project(&x).unwrap();
        assert!((d - parabola_distance(&x)).abs() < 1e-9, "{x:?}");
    }
    let p = distance_properties(&dom, 400).unwrap();
    assert!(p.lower > 0.0 && p.upper < f64::INFINITY);
    assert!(p.lower > 0.5 && p.upper < 2.0, "{p:?}");
    for t in [-0.5, 0.0, 0.3] {
        let x = [t, dom.phi(t).0];
        assert!(regularized_distance(&dom, &x).unwrap().0.abs() < 1e-12);
    }
}

#[test]
fn first_change_of_variables() {
    let id = builtin_fields::<2>("identity", &[]).unwrap();
    let flat = C11Domain::half_plane(1.0).unwrap();
    for x in lattice(0.9, 5) {
        let s = flatten_step1(&flat, &id, &x).unwrap();
        assert!((s.z[0] - x[0]).abs() < 1e-14 && (s.z[1] - x[1]).abs() < 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s.a_z[i][j] - e).abs() < 1e-14);
            }
        }
    }
    let dom = C11Domain::parabola(0.25, 1.0).unwrap();
    let s = flatten_step1(&dom, &id, &[0.0, 0.0]).unwrap();
    assert!(s.a_z.iter().flatten().zip([1.0, 0.0, 0.0, 1.0]).all(|(a, e)| (a - e).abs() < 1e-8), "{:?}", s.a_z);
    assert_eq!(s.z[1], 0.0);
    // det ∂z/∂x against a finite-difference Jacobian of x ↦ (x₁, ρ(x))
    for x in [[0.1, 0.3], [-0.4, 0.5], [0.2, 0.05]] {
        let s = flatten_step1(&dom, &id, &x).unwrap();
        let h = 1e-6;
        let rho = |y: [f64; 2]| regularized_distance(&dom, &y).unwrap().0;
        let d1 = (rho([x[0] + h, x[1]]) - rho([x[0] - h, x[1]])) / (2.0 * h);
        let d2 = (rho([x[0], x[1] + h]) - rho([x[0], x[1] - h])) / (2.0 * h);
        let det = linear_det(&s.jacobian);
        assert!((det - d2).abs() < 1e-6, "{x:?}");
        assert!((s.jacobian[1][0] - d1).abs() < 1e-6);
    }
    for t in [-0.6, 0.4] {
        let s = flatten_step1(&dom, &id, &[t, dom.phi(t).0]).unwrap();
        assert!(s.z[1].abs() < 1e-12);
        assert!(s.eta_z.is_some());
    }
}

fn linear_det(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[test]
fn identity_inputs_give_identity_map() {
    let dom = C11Domain::half_plane(1.0).unwrap();
    let map = FlatteningMap::new(&dom, &builtin_fields::<2>("identity", &[]).unwrap()).unwrap();
    for x in lattice(0.5, 5) {
        let y = map.forward(&x).unwrap();
        assert!((y[0] - x[0]).abs() < 1e-14 && (y[1] - x[1]).abs() < 1e-14);
    }
    let (tau, mu) = map.conormal_data(&[0.2, 0.1]);
    assert_eq!(tau, 0.0);
    assert!((mu - 1.0).abs() < 1e-15);
}

#[test]
fn constant_matrix_on_half_plane() {
    let dom = C11Domain::half_plane(1.0).unwrap();
    let cs = builtin_fields::<2>("constant", &[0.4]).unwrap();
    let map = FlatteningMap::new(&dom, &cs).unwrap();
    assert!(map.pushforward_residual(32).unwrap() <= 1e-6);
    let pushed = pushforward_problem(&cs, &map).unwrap();
    for k in 0..16 {
        let t = map.image_radius * (-0.9 + 1.8 * k as f64 / 15.0);
        assert!(pushed.a(&[t, 0.0])[1][0].abs() <= 1e-6, "t={t}");
    }
}

#[test]
fn curved_chart_normalization() {
    let dom = C11Domain::parabola(0.25, 1.0).unwrap();
    let cs = builtin_fields::<2>("identity", &[]).unwrap();
    let map = FlatteningMap::new(&dom, &cs).unwrap();
    let a0 = pushforward_problem(&cs, &map).unwrap().a(&[0.0, 0.0]);
    assert!(a0.iter().flatten().zip([1.0, 0.0, 0.0, 1.0]).all(|(a, e)| (a - e).abs() < 1e-8), "{a0:?}");
    assert!(map.inclusion_holds().unwrap());
    assert!(map.c0 > 0.0 && map.c0 <= map.big_c0);
}

#[test]
fn thousand_point_round_trip() {
    let dom = C11Domain::parabola(0.25, 1.0).unwrap();
    let cs = builtin_fields::<2>("block", &[0.3]).unwrap();
    let map = FlatteningMap::new(&dom, &cs).unwrap();
    let mut worst: f64 = 0.0;
    for y in lattice(0.95 * map.image_radius, 32).into_iter().take(1000) {
        let x = map.inverse(&y).unwrap();
        let back = map.forward(&x).unwrap();
        worst = worst.max((back[0] - y[0]).hypot(back[1] - y[1]));
    }
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn identity_map_leaves_solution_unchanged() {
    let dom = C11Domain::half_plane(1.0).unwrap();
    let sol = analytic_solution("homogeneous", &[2.0]).unwrap();
    let map = FlatteningMap::new(&dom, &sol.coefficients).unwrap();
    let t = transform_solution(&sol, &map).unwrap();
    for y in lattice(0.5 * map.image_radius, 5) {
        let (u, du) = t.value_grad(&y);
        let (v, dv) = sol.value_grad(&y);
        assert!((u - v).abs() < 1e-13, "{y:?}");
        // the map's Jacobian is a central difference
        assert!((du[0] - dv[0]).abs() < 1e-9 && (du[1] - dv[1]).abs() < 1e-9, "{y:?} {du:?} {dv:?}");
    }
    assert!(t.require_solution().is_ok());
}
