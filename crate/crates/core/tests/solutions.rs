use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robin_ucp::coefficients::builtin_fields;
use robin_ucp::solutions::{analytic_solution, fem_solution, solve_robin_field, Mesh, Solution};

fn sol(name: &str, params: &[f64]) -> Solution<2> {
    analytic_solution(name, params).unwrap()
}

fn half_ball_catalogue() -> Vec<Solution<2>> {
    vec![
        sol("constant", &[2.0]),
        sol("homogeneous", &[1.0]),
        sol("homogeneous", &[3.0]),
        sol("neumann-coshcos", &[1.5]),
        sol("robin-cosexp", &[2.0]),
        sol("robin-cosexp-decay", &[1.0]),
        sol("robin-exponential", &[3.0]),
        sol("separable", &[2.0, 1.0]),
    ]
}

fn random_half_disk(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 2] {
    let s = radius * rng.gen::<f64>().sqrt();
    let th = PI * rng.gen::<f64>();
    [s * th.cos(), s * th.sin()]
}

#[test]
fn catalogue_values() {
    let (u, du) = sol("homogeneous", &[2.0]).value_grad(&[1.0, 0.0]);
    assert_eq!((u, du), (1.0, [2.0, 0.0]));
    let (u, du) = sol("homogeneous", &[1.0]).value_grad(&[0.0, 1.0]);
    assert_eq!((u, du), (0.0, [1.0, 0.0]));
    let one = sol("robin-exponential", &[0.0]);
    for x in [[0.1, 0.2], [-0.7, 0.3]] {
        assert_eq!(one.value_grad(&x), (1.0, [0.0, 0.0]));
    }
    assert!(sol("homogeneous", &[2.0]).eval_solution(&[0.0, -0.1]).is_err());
    assert!(analytic_solution("no-such-entry", &[]).is_err());
}

// Δu by a fourth-order difference of the exact gradient, Robin data exactly
#[test]
fn catalogue_entries_solve_their_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-3;
    for s in half_ball_catalogue() {
        let cs = &s.coefficients;
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let x = random_half_disk(&mut rng, 0.99);
            let mut lap = 0.0;
            let mut mag = 0.0;
            for i in 0..2 {
                let g = |t: f64| {
                    let mut y = x;
                    y[i] += t;
                    s.value_grad(&y).1[i]
                };
                let d = (-g(2.0 * h) + 8.0 * g(h) - 8.0 * g(-h) + g(-2.0 * h)) / (12.0 * h);
                lap += d;
                mag += d.abs();
            }
            let vu = cs.v(&x) * s.value_grad(&x).0;
            if mag + vu.abs() > 0.0 {
                worst = worst.max((lap - vu).abs() / (mag + vu.abs()));
            }
            let b = [rng.gen_range(-1.0..1.0), 0.0];
            let (u, du) = s.value_grad(&b);
            let flux = -du[1];
            let scale = du[1].abs() + (cs.eta(&b) * u).abs();
            if scale > 0.0 {
                worst = worst.max((flux - cs.eta(&b) * u).abs() / scale);
            }
        }
        assert!(worst <= 1e-10, "{}: {worst}", s.name);
        assert!(s.require_solution().is_ok(), "{}", s.name);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut all = half_ball_catalogue();
    all.push(sol("robin-disk", &[1.0]));
    for s in &all {
        for _ in 0..200 {
            let x = random_half_disk(&mut rng, 0.8);
            let (_, du) = s.value_grad(&x);
            let h = 1e-6;
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (s.value_grad(&xp).0 - s.value_grad(&xm).0) / (2.0 * h);
                assert!((fd - du[i]).abs() <= 1e-5 * (du[i].abs() + 1.0), "{} {x:?}", s.name);
            }
        }
    }
}

/// `J_n(z) = (1/π) ∫_0^π cos(nτ − z sin τ) dτ` by the trapezoid rule, which is
/// spectrally accurate for this periodic integrand.
fn bessel(n: f64, z: f64) -> f64 {
    let m = 400;
    let mut s = 0.5 * ((0.0f64).cos() + (n * PI).cos());
    for j in 1..m {
        let t = PI * j as f64 / m as f64;
        s += (n * t - z * t.sin()).cos();
    }
    s / m as f64
}

#[test]
fn robin_disk_eigenvalue() {
    let b = 1.0;
    // f = J_0(k s): f′(1) + b f(1) = −k J_1(k) + b J_0(k)
    let cond = |k: f64| -k * bessel(1.0, k) + b * bessel(0.0, k);
    let (mut lo, mut hi) = (0.1, 2.4048);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cond(lo).signum() == cond(mid).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = (0.5 * (lo + hi)).powi(2);
    let disk = sol("robin-disk", &[b]);
    assert!((disk.coefficients.v(&[0.1, 0.2]) + lambda).abs() < 1e-8 * lambda, "{lambda}");
    assert!(disk.residual.unwrap() <= 1e-8, "{:?}", disk.residual);
}

#[test]
fn zero_data_gives_zero_field() {
    let cs = builtin_fields::<2>("identity", &[]).unwrap();
    let field = solve_robin_field(&cs, &Mesh::half_disk(1.0, 3).unwrap(), |_| 0.0).unwrap();
    assert!(field.values.iter().all(|v| *v == 0.0));
}

#[test]
fn fem_evaluation() {
    let truth = sol("neumann-coshcos", &[1.0]);
    let mut errs = Vec::new();
    for level in 3..=4 {
        let mesh = Mesh::half_disk(1.0, level).unwrap();
        let field = solve_robin_field(&truth.coefficients, &mesh, |x| truth.value_grad(x).0).unwrap();
        for (i, x) in mesh.nodes.iter().enumerate() {
            assert_eq!(field.eval(x).0, field.values[i]);
        }
        let mut worst: f64 = 0.0;
        for t in &mesh.triangles {
            let c = [
                (mesh.nodes[t[0]][0] + mesh.nodes[t[1]][0] + mesh.nodes[t[2]][0]) / 3.0,
                (mesh.nodes[t[0]][1] + mesh.nodes[t[1]][1] + mesh.nodes[t[2]][1]) / 3.0,
            ];
            worst = worst.max((field.eval(&c).0 - truth.value_grad(&c).0).abs());
        }
        // |D²u| ≤ cosh 1 on the half-disk
        assert!(worst <= mesh.h().powi(2) * 1f64.cosh(), "level {level}: {worst}");
        errs.push(worst);
        let s = fem_solution(field, &truth.coefficients).unwrap();
        assert!(s.require_solution().is_ok());
    }
    let ratio = errs[0] / errs[1];
    assert!((3.0..=5.0).contains(&ratio), "{ratio}");
}

#[test]
fn fem_convergence_order() {
    for (name, params) in [("neumann-coshcos", vec![1.0]), ("robin-cosexp", vec![1.0])] {
        let truth = sol(name, &params);
        let errs: Vec<f64> = (2..=5)
            .map(|level| {
                let mesh = Mesh::half_disk(1.0, level).unwrap();
                let field = solve_robin_field(&truth.coefficients, &mesh, |x| truth.value_grad(x).0).unwrap();
                field.l2_error(|x| truth.value_grad(x).0)
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.6..=4.4).contains(&ratio), "{name}: {ratio}");
        }
        let order = (errs[0] / errs[3]).log2() / 3.0;
        assert!((order - 2.0).abs() <= 0.1, "{name}: {order}");
    }
}
