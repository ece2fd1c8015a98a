//! Doubling index, vanishing order, the constant-`η` frequency inequality
//! and the boundary stability and doubling checks.
//!
//! All "constants" here are the smallest values admissible on the tested
//! grid; they are reported, not asserted against a universal bound.

use std::fmt::Write as _;

use serde::Serialize;

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::frequency::{
    build_profile, frequency_n, height_h, FrequencyConfig, LedgerEntry, LedgerSample, FD_TOL,
};
use crate::linalg::Point;
use crate::quadrature::{BoundaryRule, HalfBallRule, QuadratureCounts};
use crate::solutions::Solution;

/// Integrals below this count as zero.
pub const MASS_FLOOR: f64 = 1e-300;

/// `h̃(ρ) = ∫_{B_ρ^+} u²`.
pub fn half_ball_mass<const D: usize>(sol: &Solution<D>, rho: f64, counts: QuadratureCounts) -> Result<f64> {
    HalfBallRule::<D>::new(0.0, counts)?.integrate(rho, |x| sol.value_grad(x).0.powi(2))
}

/// `∫_{Γ_ρ} u² dσ`.
pub fn boundary_mass<const D: usize>(sol: &Solution<D>, rho: f64, counts: QuadratureCounts) -> Result<f64> {
    BoundaryRule::<D>::new(0.0, counts)?.integrate(rho, |x| sol.value_grad(x).0.powi(2))
}

fn check_fits<const D: usize>(cs: &CoefficientSet<D>, r: f64) -> Result<()> {
    if !(r > 0.0 && r <= cs.region.r_max() * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "radius {r} is outside (0, {}]",
            cs.region.r_max()
        )));
    }
    Ok(())
}

/// `√((N(1))₊) + √M + M_η + 1`, with `N(1)` taken at `α = 1` on the largest
/// admissible radius.
pub fn growth_parameter<const D: usize>(sol: &Solution<D>, counts: QuadratureCounts) -> Result<f64> {
    let cs = &sol.coefficients;
    let r = cs.region.r_max().min(1.0);
    let n1 = frequency_n(sol, r, 1.0, counts)?;
    Ok(n1.max(0.0).sqrt() + cs.m.sqrt() + cs.m_eta + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingRow {
    pub rho: f64,
    pub h_rho: f64,
    pub h_kappa_rho: f64,
    pub ratio: f64,
    /// `H(ρ)` with the weight exponent `α*`.
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingReport {
    pub kappa: f64,
    pub rows: Vec<DoublingRow>,
    /// `α* = √((N(1))₊) + √M + M_η + 1`.
    pub alpha_star: f64,
    /// Smallest `E` with `h̃(κρ) ≤ κ^E e^E h̃(ρ)` on the grid.
    pub exponent: f64,
    /// `E / α*`: the constant in front of the growth parameter.
    pub prefactor: f64,
    /// `H(ρ) ≤ C ρ^{2α} h̃(ρ)`; `C ≤ 1` when `μ ≤ 1`.
    pub sandwich_upper: LedgerEntry,
    /// `(τ² − ρ²)^α h̃(ρ) ≤ C H(τ)` for `ρ < τ`; `C ≤ 1` when `μ ≥ 1`.
    pub sandwich_lower: LedgerEntry,
}

impl DoublingReport {
    /// Both sandwich inequalities hold with constant one.
    pub fn sandwich_holds(&self) -> bool {
        let one = 1.0 + 1e-10;
        self.sandwich_upper.holds()
            && self.sandwich_lower.holds()
            && self.sandwich_upper.min_c <= one
            && self.sandwich_lower.min_c <= one
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho,kappa,htilde_rho,htilde_kappa_rho,ratio,H_rho,alpha_star,E,C\n");
        for row in &self.rows {
            let _ = writeln!(
                s,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                row.rho,
                self.kappa,
                row.h_rho,
                row.h_kappa_rho,
                row.ratio,
                row.height,
                self.alpha_star,
                self.exponent,
                self.prefactor
            );
        }
        s
    }
}

/// Doubling ratios `h̃(κρ)/h̃(ρ)` over `rho_grid`, the fitted exponent and
/// the sandwich between `H` (with `α = α*`) and `h̃`.
pub fn doubling_report<const D: usize>(
    sol: &Solution<D>,
    rho_grid: &[f64],
    kappa: f64,
    counts: QuadratureCounts,
) -> Result<DoublingReport> {
    if rho_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !(kappa > 2.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must exceed 2, got {kappa}")));
    }
    let cs = &sol.coefficients;
    for &rho in rho_grid {
        check_fits(cs, kappa * rho)?;
    }
    let alpha_star = growth_parameter(sol, counts)?;
    let mut rows = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        let h_rho = half_ball_mass(sol, rho, counts)?;
        if !(h_rho > MASS_FLOOR) {
            return Err(Error::DegenerateHeight(h_rho, rho));
        }
        let h_kappa_rho = half_ball_mass(sol, kappa * rho, counts)?;
        rows.push(DoublingRow {
            rho,
            h_rho,
            h_kappa_rho,
            ratio: h_kappa_rho / h_rho,
            height: height_h(sol, rho, alpha_star, counts)?,
        });
    }
    let exponent = rows
        .iter()
        .map(|row| row.ratio.ln() / (kappa.ln() + 1.0))
        .fold(0.0, f64::max);

    let tol = |v: f64| 1e-10 * v.abs();
    let upper = rows
        .iter()
        .map(|row| {
            let coef = row.rho.powf(2.0 * alpha_star) * row.h_rho;
            LedgerSample::new(row.rho, f64::NAN, row.height, 0.0, coef, tol(row.height))
        })
        .collect();
    // every τ in the grid (and κρ) above each ρ
    let mut taus: Vec<(f64, f64)> = rows.iter().map(|row| (row.rho, row.height)).collect();
    for row in &rows {
        taus.push((kappa * row.rho, height_h(sol, kappa * row.rho, alpha_star, counts)?));
    }
    let mut lower = Vec::new();
    for row in &rows {
        for &(tau, h_tau) in &taus {
            if tau > row.rho {
                let lhs = (tau * tau - row.rho * row.rho).powf(alpha_star) * row.h_rho;
                lower.push(LedgerSample::new(row.rho, tau, lhs, 0.0, h_tau, tol(lhs)));
            }
        }
    }
    Ok(DoublingReport {
        kappa,
        rows,
        alpha_star,
        exponent,
        prefactor: exponent / alpha_star,
        sandwich_upper: LedgerEntry::fit("sandwich-upper", upper),
        sandwich_lower: LedgerEntry::fit("sandwich-lower", lower),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VanishingOrderReport {
    pub r_grid: Vec<f64>,
    /// `log ∫_{Ω_r} u²` after normalizing `∫_{Ω_1} u² = 1`.
    pub log_mass: Vec<f64>,
    pub slope: f64,
    /// `(slope − d)/2`, clamped at zero.
    pub order: f64,
    /// Largest absolute deviation of `log_mass` from the fitted line.
    pub fit_residual: f64,
    /// Deviation above `0.05 · (slope + 1)`: the mass is not a clean power.
    pub nonlinear: bool,
    /// Growth parameter in the theoretical exponent `C · (…)`.
    pub growth: f64,
}

impl VanishingOrderReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,log_mass,slope,order,fit_residual\n");
        for (r, m) in self.r_grid.iter().zip(&self.log_mass) {
            let _ = writeln!(s, "{:?},{:?},{:?},{:?},{:?}", r, m, self.slope, self.order, self.fit_residual);
        }
        s
    }
}

/// Least-squares slope of `log ∫_{Ω_r} u²` against `log r`.
pub fn vanishing_order_estimate<const D: usize>(
    sol: &Solution<D>,
    r_grid: &[f64],
    counts: QuadratureCounts,
) -> Result<VanishingOrderReport> {
    if r_grid.len() < 2 {
        return Err(Error::EmptyGrid);
    }
    let (lo, hi) = r_grid
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "radius grid must span two decades, got [{lo}, {hi}]"
        )));
    }
    let cs = &sol.coefficients;
    check_fits(cs, hi)?;
    let unit = cs.region.r_max().min(1.0);
    let norm = half_ball_mass(sol, unit, counts)?;
    if !(norm > MASS_FLOOR) {
        return Err(Error::DegenerateHeight(norm, unit));
    }
    let mut log_mass = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let m = half_ball_mass(sol, r, counts)? / norm;
        if !(m > MASS_FLOOR) {
            return Err(Error::Underflow(format!("∫ u² over the half-ball of radius {r} is {m:e}")));
        }
        log_mass.push(m.ln());
    }
    let xs: Vec<f64> = r_grid.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = log_mass.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&log_mass).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let fit_residual = xs
        .iter()
        .zip(&log_mass)
        .map(|(x, y)| (y - my - slope * (x - mx)).abs())
        .fold(0.0, f64::max);
    Ok(VanishingOrderReport {
        r_grid: r_grid.to_vec(),
        log_mass,
        slope,
        order: ((slope - D as f64) / 2.0).max(0.0),
        fit_residual,
        nonlinear: fit_residual > 0.05 * (slope.abs() + 1.0),
        growth: growth_parameter(sol, counts)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantEtaReport {
    /// `η₀ = −η` of each case and its fitted entry.
    pub cases: Vec<(f64, LedgerEntry)>,
    /// Largest `|Ĩ₃ − I₃| / |I₃|` over all cases and radii.
    pub majorant_gap: f64,
}

impl ConstantEtaReport {
    /// Largest over smallest positive fitted constant; one when all vanish.
    pub fn spread(&self) -> f64 {
        let cs: Vec<f64> = self.cases.iter().map(|(_, e)| e.min_c).collect();
        let hi = cs.iter().copied().fold(0.0, f64::max);
        let lo = cs.iter().copied().filter(|c| *c > 0.0).fold(f64::INFINITY, f64::min);
        if hi == 0.0 {
            1.0
        } else if cs.iter().any(|c| *c == 0.0) || !lo.is_finite() {
            f64::INFINITY
        } else {
            hi / lo
        }
    }
}

/// For constant `η = −η₀ ≤ 0`, fit `C` in
/// `N′ ≥ −C ε̃/r · N − C ε̃ r M` separately for every solution.
pub fn constant_eta_frequency_check(sols: &[&Solution<2>], fc: &FrequencyConfig) -> Result<ConstantEtaReport> {
    let mut cases = Vec::with_capacity(sols.len());
    let mut majorant_gap: f64 = 0.0;
    for sol in sols {
        let cs = &sol.coefficients;
        let eta = cs
            .constant_eta()
            .ok_or_else(|| Error::NonConstantEta(format!("{} has a variable Robin coefficient", cs.name)))?;
        if eta > 0.0 {
            return Err(Error::NonConstantEta(format!("{} has eta = {eta} > 0", cs.name)));
        }
        sol.require_solution()?;
        let profile = build_profile(*sol, fc)?;
        let samples = profile
            .valid_rows()
            .map(|row| {
                let r = row.r();
                let et = cs.eps.eval(r) + r;
                let g = &row.integrals;
                if g.i3 != 0.0 {
                    majorant_gap = majorant_gap.max((g.i3_maj - g.i3).abs() / g.i3.abs());
                }
                let coef = et / r * row.n + et * r * cs.m;
                LedgerSample::new(r, -eta, -row.dn, 0.0, coef, FD_TOL * (row.n.abs() + 1.0) / r)
            })
            .collect();
        cases.push((-eta, LedgerEntry::fit(format!("constant-eta({})", -eta), samples)));
    }
    Ok(ConstantEtaReport { cases, majorant_gap })
}

/// One evaluation of `∫_{B_r^+} u² ≤ C r ∫_{Γ_{2r}} u² + δ ∫_{B_{2r}^+} u²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilitySample {
    pub sample: LedgerSample,
    /// Smallest `C ≥ 0` making this single inequality hold.
    pub min_c: f64,
    /// Boundary mass negligible while the interior mass is not.
    pub suspicious: bool,
}

pub fn boundary_stability_check<const D: usize>(
    sol: &Solution<D>,
    r: f64,
    delta: f64,
    counts: QuadratureCounts,
) -> Result<StabilitySample> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    check_fits(&sol.coefficients, 2.0 * r)?;
    sol.require_solution()?;
    let inner = half_ball_mass(sol, r, counts)?;
    let outer = half_ball_mass(sol, 2.0 * r, counts)?;
    let face = boundary_mass(sol, 2.0 * r, counts)?;
    let coef = r * face;
    let base = delta * outer;
    let slack = 1e-12 * (inner + base);
    let excess = inner - base - slack;
    let min_c = if excess <= 0.0 {
        0.0
    } else if coef > 0.0 {
        excess / coef
    } else {
        f64::INFINITY
    };
    Ok(StabilitySample {
        sample: LedgerSample::new(r, delta, inner, base, coef, slack),
        min_c,
        suspicious: coef <= 1e-12 * outer && inner > 1e-12 * outer,
    })
}

/// One shared constant over every solution, radius and `δ`.
pub fn boundary_stability_fit<const D: usize>(
    sols: &[&Solution<D>],
    radii: &[f64],
    deltas: &[f64],
    counts: QuadratureCounts,
) -> Result<LedgerEntry> {
    let mut samples = Vec::new();
    for sol in sols {
        for &r in radii {
            for &delta in deltas {
                samples.push(boundary_stability_check(*sol, r, delta, counts)?.sample);
            }
        }
    }
    Ok(LedgerEntry::fit("boundary-stability", samples))
}

/// A finite union of closed intervals `Σ` on the line `x₂ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMask {
    intervals: Vec<(f64, f64)>,
}

impl BoundaryMask {
    /// Sorted and merged; empty intervals are dropped.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.iter().any(|(a, b)| !(a.is_finite() && b.is_finite()) || a > b) {
            return Err(Error::InvalidParameter("mask intervals must be finite with a ≤ b".into()));
        }
        intervals.retain(|(a, b)| b > a);
        intervals.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(Self { intervals: merged })
    }

    /// `Σ = Γ_R` minus the given open intervals.
    pub fn complement_of(radius: f64, holes: &[(f64, f64)]) -> Result<Self> {
        let holes = Self::new(holes.to_vec())?;
        let mut out = Vec::new();
        let mut start = -radius;
        for &(a, b) in &holes.intervals {
            if a > start {
                out.push((start, a.min(radius)));
            }
            start = start.max(b);
        }
        if start < radius {
            out.push((start, radius));
        }
        Self::new(out)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= t && t <= b)
    }

    /// `|Γ_r ∩ Σᶜ| / |Γ_r|` with `Γ_r = (−r, r)`.
    pub fn complement_density(&self, r: f64) -> f64 {
        let covered: f64 = self
            .intervals
            .iter()
            .map(|&(a, b)| (b.min(r) - a.max(-r)).max(0.0))
            .sum();
        (1.0 - covered / (2.0 * r)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityCheck {
    /// `u` does not vanish on `Σ`; the decay inequality says nothing.
    NotApplicable { max_on_mask: f64 },
    Checked(LedgerEntry),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryVanishingReport {
    /// `(r, ∫_{Γ_{2r}} u² / ∫_{Γ_r} u²)`.
    pub ratios: Vec<(f64, f64)>,
    /// Smallest `E` with every ratio `≤ 2^E`.
    pub exponent: f64,
    pub density: Option<DensityCheck>,
}

/// Boundary doubling ratios and, with a mask, the density-point decay
/// `(⨍_{Γ_{r/2}} u²)^{1/2} ≤ C (⨍_{Γ_{2r}} u²)^{1/2} (|Γ_{r/2} ∩ Σᶜ|/|Γ_{r/2}|)^{1/2}`.
pub fn boundary_vanishing_check(
    sol: &Solution<2>,
    r_grid: &[f64],
    mask: Option<&BoundaryMask>,
    counts: QuadratureCounts,
) -> Result<BoundaryVanishingReport> {
    if r_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let cs = &sol.coefficients;
    for &r in r_grid {
        check_fits(cs, 2.0 * r)?;
    }
    let mut ratios = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let inner = boundary_mass(sol, r, counts)?;
        if !(inner > MASS_FLOOR) {
            return Err(Error::DegenerateHeight(inner, r));
        }
        ratios.push((r, boundary_mass(sol, 2.0 * r, counts)? / inner));
    }
    let exponent = ratios.iter().map(|(_, q)| q.log2()).fold(0.0, f64::max);
    let density = match mask {
        None => None,
        Some(mask) => Some(density_check(sol, r_grid, mask, counts)?),
    };
    Ok(BoundaryVanishingReport {
        ratios,
        exponent,
        density,
    })
}

fn density_check(
    sol: &Solution<2>,
    r_grid: &[f64],
    mask: &BoundaryMask,
    counts: QuadratureCounts,
) -> Result<DensityCheck> {
    let reach = 2.0 * r_grid.iter().copied().fold(0.0, f64::max);
    let mut max_on_mask: f64 = 0.0;
    let mut max_on_face: f64 = 0.0;
    const PER_UNIT: f64 = 4096.0;
    let steps = (2.0 * reach * PER_UNIT).ceil() as usize;
    for j in 0..=steps {
        let t = -reach + 2.0 * reach * j as f64 / steps as f64;
        let x: Point<2> = [t, 0.0];
        let u = sol.value_grad(&x).0.abs();
        max_on_face = max_on_face.max(u);
        if mask.contains(t) {
            max_on_mask = max_on_mask.max(u);
        }
    }
    if max_on_mask > 1e-12 * max_on_face.max(MASS_FLOOR) {
        return Ok(DensityCheck::NotApplicable { max_on_mask });
    }
    let mut samples = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let near = (boundary_mass(sol, 0.5 * r, counts)? / r).max(0.0).sqrt();
        let far = (boundary_mass(sol, 2.0 * r, counts)? / (4.0 * r)).max(0.0).sqrt();
        let coef = far * mask.complement_density(0.5 * r).sqrt();
        samples.push(LedgerSample::new(r, f64::NAN, near, 0.0, coef, 1e-12 * far));
    }
    Ok(DensityCheck::Checked(LedgerEntry::fit("density-decay", samples)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::analytic_solution;

    const COUNTS: QuadratureCounts = QuadratureCounts { n_rad: 32, n_ang: 64 };

    #[test]
    fn constant_doubles_by_area() {
        let s = analytic_solution("constant", &[1.0]).unwrap();
        let rep = doubling_report(&s, &[0.1, 0.2], 4.0, COUNTS).unwrap();
        for row in &rep.rows {
            assert!((row.ratio - 16.0).abs() < 1e-12 * 16.0);
        }
        assert!(rep.sandwich_holds());
    }

    #[test]
    fn kappa_must_exceed_two() {
        let s = analytic_solution("constant", &[1.0]).unwrap();
        assert!(doubling_report(&s, &[0.1], 2.0, COUNTS).is_err());
        assert!(doubling_report(&s, &[0.3], 4.0, COUNTS).is_err());
    }

    #[test]
    fn mask_density_is_exact() {
        let m = BoundaryMask::complement_of(1.0, &[(0.3, 0.35), (-0.5, -0.45)]).unwrap();
        assert_eq!(m.complement_density(0.2), 0.0);
        assert!((m.complement_density(0.4) - 0.05 / 0.8).abs() < 1e-15);
        assert!((m.complement_density(1.0) - 0.1 / 2.0).abs() < 1e-15);
        let merged = BoundaryMask::new(vec![(0.0, 0.5), (0.4, 0.6), (0.8, 0.8)]).unwrap();
        assert_eq!(merged.intervals(), &[(0.0, 0.6)]);
    }

    #[test]
    fn full_mask_with_constant_is_not_applicable() {
        let s = analytic_solution("constant", &[1.0]).unwrap();
        let mask = BoundaryMask::new(vec![(-1.0, 1.0)]).unwrap();
        let rep = boundary_vanishing_check(&s, &[0.1, 0.2], Some(&mask), COUNTS).unwrap();
        assert!(matches!(rep.density, Some(DensityCheck::NotApplicable { .. })));
    }

    #[test]
    fn positive_eta_is_rejected() {
        let s = analytic_solution("robin-cosexp-decay", &[1.0]).unwrap();
        let fc = FrequencyConfig::new(1.0, vec![0.5]);
        assert!(matches!(constant_eta_frequency_check(&[&s], &fc), Err(Error::NonConstantEta(_))));
    }
}
