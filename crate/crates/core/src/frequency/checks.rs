use super::ledger::{InequalityLedger, LedgerEntry, LedgerSample};
use super::FrequencyProfile;
use crate::coefficients::{CoefficientSet, EpsModulus};
use crate::error::Result;
use crate::quadrature::{gauss_legendre, NeumaierSum};

/// Allowance for finite-difference noise, relative to the natural scale.
pub const FD_TOL: f64 = 1e-7;
/// Allowance for pure quadrature comparisons.
pub const QUAD_TOL: f64 = 1e-10;

/// `H′ = (2α + d + O(ε))/r · H + I/((α+1) r)`: the residual of the exact
/// part must be at most `C ε(r)/r · H` up to the larger of the finite-difference
/// tolerance and the solution residual. Returns the entry and the largest
/// residual relative to `|H′| + (2α+d)H/r + |I|/((α+1)r)`.
pub fn check_h_derivative<const D: usize>(profile: &FrequencyProfile, cs: &CoefficientSet<D>) -> (LedgerEntry, f64) {
    let alpha = profile.alpha;
    let d = profile.dimension as f64;
    let tol = FD_TOL.max(profile.solution_residual);
    let mut worst: f64 = 0.0;
    let samples = profile
        .valid_rows()
        .map(|row| {
            let g = &row.integrals;
            let r = g.r;
            let main = (2.0 * alpha + d) / r * g.h + g.i / ((alpha + 1.0) * r);
            let residual = row.dh - main;
            let scale = row.dh.abs() + (2.0 * alpha + d) / r * g.h + g.i.abs() / ((alpha + 1.0) * r);
            worst = worst.max(residual.abs() / scale);
            LedgerSample::new(r, f64::NAN, residual.abs(), 0.0, cs.eps.eval(r) / r * g.h, tol * scale)
        })
        .collect();
    (LedgerEntry::fit("H-derivative", samples), worst)
}

/// The weighted Poincaré, majorant and `I₁` inequalities, each with one
/// fitted constant over the grid.
pub fn check_aux_inequalities<const D: usize>(profile: &FrequencyProfile, cs: &CoefficientSet<D>) -> InequalityLedger {
    let alpha = profile.alpha;
    let (m, me, lambda) = (cs.m, cs.m_eta, cs.lambda);
    let slack = |a: f64, b: f64| QUAD_TOL * (a.abs() + b.abs()) + 1e-300;
    let mut poincare = Vec::new();
    let mut maj_v = Vec::new();
    let mut maj_eta = Vec::new();
    let mut i1_bound = Vec::new();
    for row in profile.valid_rows() {
        let g = &row.integrals;
        let r = g.r;
        let lhs = alpha * alpha * g.poincare;
        poincare.push(LedgerSample::new(r, f64::NAN, lhs, 0.0, alpha * g.h + g.i1, slack(lhs, 0.0)));
        maj_v.push(LedgerSample::new(r, f64::NAN, g.i2_maj, 0.0, m / lambda * r * r * g.h, slack(g.i2_maj, 0.0)));
        let lhs = g.i3_maj + g.trace_beta;
        let base = 0.5 * r * g.i1 + 0.5 * alpha * r * g.h;
        maj_eta.push(LedgerSample::new(r, f64::NAN, lhs, base, me * me * r * g.h, slack(lhs, base)));
        let base = 2.0 * g.i;
        i1_bound.push(LedgerSample::new(
            r,
            f64::NAN,
            g.i1,
            base,
            (m * r * r + alpha * r + me * me * r) * g.h,
            slack(g.i1, base),
        ));
    }
    let mut ledger = InequalityLedger::default();
    ledger.push(LedgerEntry::fit("poincare", poincare));
    ledger.push(LedgerEntry::fit("majorant-V", maj_v));
    ledger.push(LedgerEntry::fit("majorant-eta", maj_eta));
    ledger.push(LedgerEntry::fit("I1-bound", i1_bound));
    ledger
}

/// `∫_Γ u² w^{α+1} ≤ C(δ I₁ + δ α H + δ⁻¹ r² H)` over the grid and every δ.
pub fn check_trace_inequality(profile: &FrequencyProfile, deltas: &[f64]) -> LedgerEntry {
    let alpha = profile.alpha;
    let mut samples = Vec::new();
    for row in profile.valid_rows() {
        let g = &row.integrals;
        for &delta in deltas {
            let coef = delta * g.i1 + delta * alpha * g.h + g.r * g.r * g.h / delta;
            samples.push(LedgerSample::new(g.r, delta, g.trace, 0.0, coef, QUAD_TOL * g.trace + 1e-300));
        }
    }
    LedgerEntry::fit("trace", samples)
}

/// Result of the almost-monotonicity check.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// Smallest `C` with `N′ ≥ −C ε̃/r · N − C ε̃/r · (Mr + α + M_η²)` on the grid.
    pub c: f64,
    pub entry: LedgerEntry,
    /// Corrected frequency built with `c` (NaN on invalid rows).
    pub ntilde: Vec<f64>,
    /// `Ñ` nondecreasing over valid rows within tolerance.
    pub monotone: bool,
    /// Smallest `C` for the corollary bound on `N(r)`, fitted separately.
    pub corollary_c: f64,
    pub corollary: LedgerEntry,
}

fn eps_tilde(eps: &EpsModulus, r: f64) -> f64 {
    eps.eval(r) + r
}

/// `∫_0^s ε̃(t)/t dt`.
fn eps_tilde_integral(eps: &EpsModulus, s: f64) -> f64 {
    eps.dini_integral_to(s) + s
}

/// `Ñ(r) = N e^{C E(r)} + C ∫_0^r ε̃(s)/s · (M s + α + M_η²) e^{C E(s)} ds`,
/// `E(s) = ∫_0^s ε̃/t`. The integral uses 16-point Gauss–Legendre panels on
/// dyadic pieces of `(r 2^{-50}, r)` split at the kinks of a tabulated `ε`;
/// the neglected piece is at most `r 2^{-50}` times the integrand's bound.
pub fn corrected_frequency<const D: usize>(profile: &FrequencyProfile, cs: &CoefficientSet<D>, c: f64) -> Vec<f64> {
    let gl = gauss_legendre(16).expect("fixed rule");
    let alpha = profile.alpha;
    let integrand = |s: f64| {
        (eps_tilde(&cs.eps, s) / s) * (cs.m * s + alpha + cs.m_eta * cs.m_eta) * (c * eps_tilde_integral(&cs.eps, s)).exp()
    };
    let kinks: Vec<f64> = match &cs.eps {
        EpsModulus::Table(nodes) => nodes.iter().map(|n| n.0).collect(),
        _ => Vec::new(),
    };
    profile
        .rows
        .iter()
        .map(|row| {
            if !row.valid {
                return f64::NAN;
            }
            let r = row.r();
            let mut cuts: Vec<f64> = (0..=50).map(|k| r * 0.5f64.powi(k)).collect();
            let floor = cuts[50];
            cuts.extend(kinks.iter().copied().filter(|&k| k > floor && k < r));
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut acc = NeumaierSum::new();
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                for (&x, &wt) in gl.nodes.iter().zip(&gl.weights) {
                    let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    acc.add(0.5 * (b - a) * wt * integrand(s));
                }
            }
            row.n * (c * eps_tilde_integral(&cs.eps, r)).exp() + c * acc.value()
        })
        .collect()
}

/// Fit the almost-monotonicity constant, build `Ñ`, and fit the corollary bound.
pub fn check_monotonicity<const D: usize>(profile: &FrequencyProfile, cs: &CoefficientSet<D>) -> Result<MonotonicityReport> {
    let alpha = profile.alpha;
    let lower_order = |r: f64| cs.m * r + alpha + cs.m_eta * cs.m_eta;
    let samples: Vec<LedgerSample> = profile
        .valid_rows()
        .map(|row| {
            let r = row.r();
            let et = eps_tilde(&cs.eps, r) / r;
            let coef = et * (row.n + lower_order(r));
            LedgerSample::new(r, f64::NAN, -row.dn, 0.0, coef, FD_TOL * (row.n.abs() + 1.0) / r)
        })
        .collect();
    let entry = LedgerEntry::fit("almost-monotonicity", samples);
    let c = entry.min_c;
    let ntilde = if c.is_finite() {
        corrected_frequency(profile, cs, c)
    } else {
        vec![f64::NAN; profile.rows.len()]
    };
    let valid: Vec<f64> = ntilde.iter().copied().filter(|v| !v.is_nan()).collect();
    let monotone = c.is_finite() && valid.windows(2).all(|w| w[1] >= w[0] - 1e-6 * (w[0].abs() + 1.0));

    // corollary: N(r) ≤ (N(1))₊ e^{C(Iε+1)} + C(Iε+1) e^{C(Iε+1)} (M + α + M_η²)
    let n1 = profile.n_at_one.max(0.0);
    let k = cs.i_eps + 1.0;
    let tail = cs.m + alpha + cs.m_eta * cs.m_eta;
    let bound = |c: f64| n1 * (c * k).exp() + c * k * (c * k).exp() * tail;
    let worst = profile.valid_rows().map(|r| r.n).fold(f64::NEG_INFINITY, f64::max);
    let tol = |v: f64| 1e-9 * (v.abs() + 1.0);
    let corollary_c = if !worst.is_finite() || worst <= bound(0.0) + tol(worst) {
        0.0
    } else {
        let mut hi = 1.0;
        while bound(hi) < worst && hi < 1e6 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if bound(mid) >= worst {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let corollary_samples = profile
        .valid_rows()
        .map(|row| LedgerSample::new(row.r(), f64::NAN, row.n, bound(corollary_c), 0.0, tol(row.n)))
        .collect();
    let corollary = LedgerEntry::fit("corollary-bound", corollary_samples);
    Ok(MonotonicityReport {
        c,
        entry,
        ntilde,
        monotone,
        corollary_c,
        corollary,
    })
}

/// `I′ ≥ (d+2α)/r · I − Cε̃/r · I − Cε̃/r · (Mr+α+M_η²) H + 4(α+1)/r · J`.
/// Returns the entry and the largest relative gap
/// `|I′ − (d+2α)/r · I − 4(α+1)/r · J|`, which vanishes for `A = I`, `V = 0`, `η = 0`.
pub fn check_second_variation<const D: usize>(profile: &FrequencyProfile, cs: &CoefficientSet<D>) -> (LedgerEntry, f64) {
    let alpha = profile.alpha;
    let d = profile.dimension as f64;
    let mut worst: f64 = 0.0;
    let samples = profile
        .valid_rows()
        .map(|row| {
            let g = &row.integrals;
            let r = g.r;
            let main = (d + 2.0 * alpha) / r * g.i + 4.0 * (alpha + 1.0) / r * g.j;
            let scale = row.di.abs() + (d + 2.0 * alpha) / r * g.i.abs() + 4.0 * (alpha + 1.0) / r * g.j;
            worst = worst.max((row.di - main).abs() / scale.max(1e-300));
            let et = eps_tilde(&cs.eps, r) / r;
            let coef = et * (g.i + (cs.m * r + alpha + cs.m_eta * cs.m_eta) * g.h);
            LedgerSample::new(r, f64::NAN, main - row.di, 0.0, coef, FD_TOL * scale)
        })
        .collect();
    (LedgerEntry::fit("second-variation", samples), worst)
}
