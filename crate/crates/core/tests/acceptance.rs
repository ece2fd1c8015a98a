//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs with its own `main` so that every line is printed even when the
//! criteria pass. Exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use robin_ucp::cli::{analyse, run_experiment, ExperimentConfig};
use robin_ucp::coefficients::{builtin_fields, manufacture_from_field, MatrixField, ScalarField};
use robin_ucp::doubling::{
    boundary_stability_fit, boundary_vanishing_check, constant_eta_frequency_check, doubling_report,
    vanishing_order_estimate,
};
use robin_ucp::flatten::{pushforward_problem, transform_solution, C11Domain, FlatteningMap};
use robin_ucp::frequency::{
    build_profile, check_aux_inequalities, check_monotonicity, check_trace_inequality, energy_i, frequency_n,
    height_h, FrequencyConfig, LedgerEntry,
};
use robin_ucp::quadrature::QuadratureCounts;
use robin_ucp::solutions::{analytic_solution, solve_robin_field, Mesh, Provenance, Solution};
use statrs::function::beta::beta;

type Outcome = (bool, String);

fn sol(name: &str, params: &[f64]) -> Solution<2> {
    analytic_solution(name, params).unwrap()
}

/// Half-ball Robin cases of the catalogue with their parameters.
fn robin_family() -> Vec<Solution<2>> {
    vec![
        sol("robin-cosexp", &[1.0]),
        sol("robin-cosexp", &[2.0]),
        sol("robin-cosexp-decay", &[1.0]),
        sol("robin-exponential", &[1.0]),
        sol("robin-exponential", &[4.0]),
        sol("separable", &[2.0, 1.0]),
    ]
}

fn grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

// N = I/H for Re z^k with A = I from the polar factorization:
// H = (π/2) r^{2k+2α+2} B(k+1, α+1)/2, I = π k² r^{2k+2α+2} B(k, α+2)/2.
fn homogeneous_n_oracle(k: f64, alpha: f64) -> f64 {
    2.0 * k * k * beta(k, alpha + 2.0) / beta(k + 1.0, alpha + 1.0)
}

fn c1_frequency_exactness() -> Outcome {
    let t = Instant::now();
    let counts = QuadratureCounts::new(64, 128);
    let mut worst: f64 = 0.0;
    for k in [1.0, 2.0, 3.0] {
        let u = sol("homogeneous", &[k]);
        for alpha in [1.0, 2.0] {
            let exact = homogeneous_n_oracle(k, alpha);
            assert!((exact - 2.0 * (alpha + 1.0) * k).abs() < 1e-12 * exact);
            for r in [0.25, 0.5, 1.0] {
                let n = frequency_n(&u, r, alpha, counts).unwrap();
                worst = worst.max((n - exact).abs() / exact);
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    (worst <= 1e-8 && secs < 10.0, format!("max relative error {worst:.2e}, {secs:.2} s"))
}

fn c2_h_derivative_identity() -> Outcome {
    let counts = QuadratureCounts::default();
    let mut worst: f64 = 0.0;
    let mut family: Vec<Solution<2>> = (1..=3).map(|k| sol("homogeneous", &[k as f64])).collect();
    family.push(sol("robin-cosexp", &[1.0]));
    family.push(sol("robin-exponential", &[4.0]));
    for u in &family {
        for alpha in [1.0, 2.0] {
            for r in [0.25, 0.5, 0.75] {
                // fourth-order central difference of H, independent of the profile code
                let h = 1e-3 * r;
                let hh = |s: f64| height_h(u, s, alpha, counts).unwrap();
                let dh = (8.0 * (hh(r + h) - hh(r - h)) - (hh(r + 2.0 * h) - hh(r - 2.0 * h))) / (12.0 * h);
                let hr = hh(r);
                let i = energy_i(u, r, alpha, counts).unwrap();
                let formula = (2.0 * alpha + 2.0) / r * hr + i / ((alpha + 1.0) * r);
                let scale = dh.abs() + (2.0 * alpha + 2.0) / r * hr + i.abs() / ((alpha + 1.0) * r);
                worst = worst.max((dh - formula).abs() / scale);
            }
        }
    }
    (worst <= 1e-6, format!("max relative residual {worst:.2e} over {} solutions", family.len()))
}

fn c3_closed_form_anchors() -> Outcome {
    let counts = QuadratureCounts::default();
    let one = height_h(&sol("constant", &[1.0]), 1.0, 1.0, counts).unwrap();
    let quad = height_h(&sol("homogeneous", &[2.0]), 1.0, 1.0, counts).unwrap();
    let e1 = (one - PI / 4.0).abs() / (PI / 4.0);
    let e2 = (quad - PI / 48.0).abs() / (PI / 48.0);
    (e1 <= 1e-10 && e2 <= 1e-10, format!("relative errors {e1:.2e} (u = 1), {e2:.2e} (Re z^2)"))
}

fn c4_almost_monotonicity() -> Outcome {
    let mut worst_c: f64 = 0.0;
    let mut bad = Vec::new();
    for u in robin_family() {
        let fc = FrequencyConfig::new(1.0, grid());
        let profile = build_profile(&u, &fc).unwrap();
        let rep = check_monotonicity(&profile, &u.coefficients).unwrap();
        worst_c = worst_c.max(rep.c);
        if !(rep.c.is_finite() && rep.entry.violations.is_empty() && rep.monotone) {
            bad.push(u.name.clone());
        }
    }
    (bad.is_empty(), format!("largest fitted C {worst_c:.3}, failures {bad:?}"))
}

fn c5_weighted_inequalities() -> Outcome {
    let names = ["trace", "poincare", "majorant-V", "majorant-eta", "I1-bound"];
    let mut per_name: Vec<Vec<LedgerEntry>> = vec![Vec::new(); names.len()];
    for u in robin_family() {
        for alpha in [1.0, 2.0] {
            let profile = build_profile(&u, &FrequencyConfig::new(alpha, grid())).unwrap();
            let aux = check_aux_inequalities(&profile, &u.coefficients);
            per_name[0].push(check_trace_inequality(&profile, &[0.25, 0.5, 1.0, 2.0]));
            for (k, n) in names.iter().enumerate().skip(1) {
                per_name[k].push(aux.get(n).unwrap().clone());
            }
        }
    }
    let mut ok = true;
    let mut detail = Vec::new();
    for (n, entries) in names.iter().zip(&per_name) {
        let refs: Vec<&LedgerEntry> = entries.iter().collect();
        let shared = LedgerEntry::combine(*n, &refs);
        ok &= shared.holds() && shared.min_c.is_finite();
        detail.push(format!("{n} C={:.3}", shared.min_c));
    }
    (ok, detail.join(", "))
}

fn c6_doubling() -> Outcome {
    let counts = QuadratureCounts::default();
    let kappa = 4.0;
    let mut worst: f64 = 0.0;
    for k in 1..=3 {
        let rep = doubling_report(&sol("homogeneous", &[k as f64]), &[0.05, 0.1, 0.2, 0.25], kappa, counts).unwrap();
        let exact = kappa.powi(2 * k + 2);
        for row in &rep.rows {
            worst = worst.max((row.ratio - exact).abs() / exact);
        }
    }
    // separable(a, b) has V = b² − a² and η = −b, so V = −M, η = −M_η
    let mut prefactors = Vec::new();
    let mut sandwich = true;
    for m in [0.0, 1.0, 4.0] {
        for me in [0.0, 1.0, 4.0] {
            let a = f64::sqrt(me * me + m);
            let u = sol("separable", &[a, me]);
            let rep = doubling_report(&u, &[0.05, 0.1, 0.2, 0.25], kappa, counts).unwrap();
            sandwich &= rep.sandwich_holds();
            prefactors.push(rep.prefactor);
        }
    }
    let hi = prefactors.iter().copied().fold(0.0, f64::max);
    let lo = prefactors.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    (
        worst <= 1e-8 && sandwich && spread < 2.0,
        format!("ratio error {worst:.2e}, sandwich {sandwich}, E/alpha* in [{lo:.3}, {hi:.3}] (spread {spread:.2})"),
    )
}

fn c7_vanishing_order() -> Outcome {
    let r: Vec<f64> = (0..9).map(|k| 0.01 * 100f64.powf(k as f64 / 8.0)).collect();
    let mut worst: f64 = 0.0;
    for k in 1..=3 {
        let rep = vanishing_order_estimate(&sol("homogeneous", &[k as f64]), &r, QuadratureCounts::default()).unwrap();
        worst = worst.max((rep.order - k as f64).abs());
    }
    (worst <= 0.05, format!("max |order - k| = {worst:.2e}"))
}

fn c8_eta_independence() -> Outcome {
    let sols: Vec<Solution<2>> = [1.0, 4.0, 16.0].iter().map(|e| sol("robin-exponential", &[*e])).collect();
    let refs: Vec<&Solution<2>> = sols.iter().collect();
    let rep = constant_eta_frequency_check(&refs, &FrequencyConfig::new(1.0, grid())).unwrap();
    let cs: Vec<String> = rep.cases.iter().map(|(e, c)| format!("{e}: {:.4}", c.min_c)).collect();
    let holds = rep.cases.iter().all(|(_, c)| c.holds());
    let spread = rep.spread();
    (holds && spread < 2.0, format!("min C by eta0 [{}], spread {spread:.3}", cs.join(", ")))
}

fn c9_flattening() -> Outcome {
    let mut push: f64 = 0.0;
    let mut a0: f64 = 0.0;
    let mut trip: f64 = 0.0;
    let mut identical = true;
    for (dom, c) in [
        (C11Domain::half_plane(0.5).unwrap(), 0.5),
        (C11Domain::half_plane(0.5).unwrap(), -0.3),
        (C11Domain::parabola(0.25, 0.5).unwrap(), 0.5),
    ] {
        let cs = builtin_fields::<2>("constant", &[c]).unwrap();
        let map = FlatteningMap::new(&dom, &cs).unwrap();
        push = push.max(map.pushforward_residual(32).unwrap());
        let pushed = pushforward_problem(&cs, &map).unwrap();
        let a = pushed.a(&[0.0, 0.0]);
        a0 = a0
            .max((a[0][0] - 1.0).abs())
            .max((a[1][1] - 1.0).abs())
            .max(a[0][1].abs())
            .max(a[1][0].abs());
        for i in 0..12 {
            for j in 1..6 {
                let th = PI * (i as f64 + 0.5) / 12.0;
                let s = 0.9 * map.image_radius * j as f64 / 6.0;
                let y = [s * th.cos(), s * th.sin()];
                let back = map.forward(&map.inverse(&y).unwrap()).unwrap();
                trip = trip.max((back[0] - y[0]).hypot(back[1] - y[1]));
            }
        }
        let other = cs
            .with_lower_order("lower-order", ScalarField::constant(3.0), ScalarField::constant(-2.0))
            .unwrap();
        let map2 = FlatteningMap::new(&dom, &other).unwrap();
        identical &= map.metadata() == map2.metadata();
        for x in [[0.01, 0.2], [-0.1, 0.05], [0.2, 0.3]] {
            let (p, q) = (map.forward(&x).unwrap(), map2.forward(&x).unwrap());
            identical &= p[0].to_bits() == q[0].to_bits() && p[1].to_bits() == q[1].to_bits();
        }
    }
    (
        push <= 1e-6 && a0 <= 1e-8 && trip <= 1e-10 && identical,
        format!("pushforward residual {push:.2e}, |A(0) - I| {a0:.2e}, round trip {trip:.2e}, maps identical {identical}"),
    )
}

fn c10_fem() -> Outcome {
    let mut ratios = Vec::new();
    for (name, p) in [("robin-cosexp", 1.0), ("robin-exponential", 1.0)] {
        let truth = sol(name, &[p]);
        let g = |x: &[f64; 2]| truth.value_grad(x).0;
        let errs: Vec<f64> = (2..=5)
            .map(|level| {
                let mesh = Mesh::half_disk(1.0, level).unwrap();
                solve_robin_field(&truth.coefficients, &mesh, g).unwrap().l2_error(g)
            })
            .collect();
        ratios.extend(errs.windows(2).map(|w| w[0] / w[1]));
    }
    let rates_ok = ratios.iter().all(|r| (3.6..=4.4).contains(r));

    // harmonic u on a curved chart, carried to the half-ball
    let dom = C11Domain::parabola(0.25, 0.5).unwrap();
    let base = sol("neumann-coshcos", &[1.0]);
    let cs = manufacture_from_field("harmonic-on-chart", base.field().clone(), MatrixField::identity(), dom.region(), None)
        .unwrap();
    let curved = Solution::new("harmonic", base.field().clone(), Provenance::Analytic, cs)
        .with_measured_residual(QuadratureCounts::default())
        .unwrap();
    let map = FlatteningMap::new(&dom, &curved.coefficients).unwrap();
    let flat = transform_solution(&curved, &map).unwrap();
    let res = flat.residual.unwrap();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    (
        rates_ok && res <= 1e-4,
        format!("L2 ratios [{}], transformed residual {res:.2e}", shown.join(", ")),
    )
}

fn c11_boundary_chain() -> Outcome {
    let counts = QuadratureCounts::default();
    let mut family: Vec<Solution<2>> = (1..=3).map(|k| sol("homogeneous", &[k as f64])).collect();
    family.extend(robin_family());
    let refs: Vec<&Solution<2>> = family.iter().collect();
    let fit = boundary_stability_fit(&refs, &[0.1, 0.25, 0.5], &[0.25, 0.5], counts).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..=3 {
        let rep = boundary_vanishing_check(&family[k - 1], &[0.1, 0.25, 0.5], None, counts).unwrap();
        let exact = 2f64.powi(2 * k as i32 + 1);
        for r in &rep.ratios {
            worst = worst.max((r.1 - exact).abs() / exact);
        }
    }
    (
        fit.holds() && fit.min_c.is_finite() && worst <= 1e-8,
        format!("shared stability C {:.3} over {} solutions, boundary ratio error {worst:.2e}", fit.min_c, family.len()),
    )
}

fn c12_determinism() -> Outcome {
    let text = "alpha = \"auto\"\nr_grid = [0.1, 0.2, 0.25]\n[solution]\nname = \"robin-cosexp\"\nparams = [1.0]\n[quadrature]\nn_rad = 24\nn_ang = 48\n";
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    let tmp = std::env::temp_dir().join(format!("rucp-accept-{}", std::process::id()));
    let files = ["profile.csv", "ledger.csv", "doubling.csv", "vanishing.csv", "summary.txt"];
    let mut outputs = Vec::new();
    for run in 0..2 {
        let dir = tmp.join(run.to_string());
        run_experiment(&cfg, Some(&dir), false).unwrap();
        outputs.push(files.map(|f| std::fs::read(dir.join(f)).unwrap()));
    }
    let u = robin_ucp::cli::build_solution(&cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| analyse(&u, &cfg)).unwrap();
    let parallel = analyse(&u, &cfg).unwrap();
    std::fs::remove_dir_all(&tmp).unwrap();
    let same_runs = outputs[0] == outputs[1];
    let same_threads = serial == parallel;
    (same_runs && same_threads, format!("repeated runs identical {same_runs}, 1 vs many threads identical {same_threads}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("frequency exactness", c1_frequency_exactness),
        ("H' identity", c2_h_derivative_identity),
        ("closed-form anchors", c3_closed_form_anchors),
        ("almost-monotonicity", c4_almost_monotonicity),
        ("weighted inequalities", c5_weighted_inequalities),
        ("doubling", c6_doubling),
        ("vanishing order", c7_vanishing_order),
        ("eta0 independence", c8_eta_independence),
        ("flattening", c9_flattening),
        ("FEM", c10_fem),
        ("boundary chain", c11_boundary_chain),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failed += usize::from(!ok);
        println!(
            "{} {:>2} {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
