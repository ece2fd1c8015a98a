//! Weighted height `H`, energy `I`, frequency `N = I/H` and the inequalities
//! relating them, for weights `w = r² − |x|²` raised to `α ≥ 1`.
//!
//! With `μ = ⟨Ax, x⟩/|x|²`:
//!
//! * `H(r) = ∫ u² w^α μ`,
//! * `I(r) = 2(α+1) ∫ ⟨A Du, x⟩ u w^α = I₁ + I₂ + I₃` for solutions, where
//!   `I₁ = ∫ ⟨A Du, Du⟩ w^{α+1}`, `I₂ = ∫ V u² w^{α+1}`, `I₃ = −∫_Γ η u² w^{α+1}`.

mod checks;
mod ledger;

pub use checks::{
    check_aux_inequalities, check_h_derivative, check_monotonicity, check_second_variation,
    check_trace_inequality, corrected_frequency, MonotonicityReport, FD_TOL, QUAD_TOL,
};
pub use ledger::{InequalityLedger, LedgerEntry, LedgerSample};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Point};
use crate::quadrature::{BoundaryRule, HalfBallRule, NeumaierSum, QuadratureCounts};
use crate::solutions::Solution;

/// Tolerance for `A(0) = I` when taking limits at the origin.
const ORIGIN_TOL: f64 = 1e-10;

fn origin_is_identity<const D: usize>(cs: &CoefficientSet<D>) -> bool {
    linalg::max_abs_diff(&cs.a(&[0.0; D]), &linalg::identity()) <= ORIGIN_TOL
}

/// `μ(x) = ⟨A(x)x, x⟩/|x|²`, with `μ(0) = 1` when `A(0) = I`.
pub fn conformal_mu<const D: usize>(cs: &CoefficientSet<D>, x: &Point<D>) -> Result<f64> {
    let n2 = linalg::norm2(x);
    if n2 == 0.0 {
        return if origin_is_identity(cs) {
            Ok(1.0)
        } else {
            Err(Error::DegenerateNormalization("μ(0) is undefined unless A(0) = I".into()))
        };
    }
    Ok(mu_unchecked(&cs.a(x), x))
}

#[inline]
fn mu_unchecked<const D: usize>(a: &Mat<D>, x: &Point<D>) -> f64 {
    linalg::dot(&linalg::mat_vec(a, x), x) / linalg::norm2(x)
}

/// `β = A x / μ` and its Jacobian `jac[k][i] = ∂_i β_k` by the chain rule.
pub fn beta_field<const D: usize>(cs: &CoefficientSet<D>, x: &Point<D>) -> Result<(Point<D>, Mat<D>)> {
    let n2 = linalg::norm2(x);
    if n2 == 0.0 {
        return if origin_is_identity(cs) {
            Ok(([0.0; D], linalg::identity()))
        } else {
            Err(Error::DegenerateNormalization("β is undefined at 0 unless A(0) = I".into()))
        };
    }
    let a = cs.a(x);
    let da = cs.da(x);
    let ax = linalg::mat_vec(&a, x);
    let q = linalg::dot(&ax, x);
    let mu = q / n2;
    let mut dmu = [0.0; D];
    for i in 0..D {
        let mut dq = 2.0 * ax[i];
        for j in 0..D {
            for k in 0..D {
                dq += da[i][j][k] * x[j] * x[k];
            }
        }
        dmu[i] = (dq - 2.0 * mu * x[i]) / n2;
    }
    let mut beta = [0.0; D];
    let mut jac = [[0.0; D]; D];
    for k in 0..D {
        beta[k] = ax[k] / mu;
        for i in 0..D {
            let mut d = a[k][i];
            for l in 0..D {
                d += da[i][k][l] * x[l];
            }
            jac[k][i] = d / mu - ax[k] * dmu[i] / (mu * mu);
        }
    }
    Ok((beta, jac))
}

/// Weighted integrals at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RadiusIntegrals {
    pub r: f64,
    pub h: f64,
    pub i: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// `∫ |V| u² w^{α+1}`
    pub i2_maj: f64,
    /// `∫_Γ |η| u² w^{α+1}`
    pub i3_maj: f64,
    /// `∫ ⟨A Du, x⟩² μ⁻¹ w^α`
    pub j: f64,
    /// `∫ u² w^{α−1} |x|²`
    pub poincare: f64,
    /// `∫_Γ u² w^{α+1}`
    pub trace: f64,
    /// `∫_Γ u² |β · D_T η| w^{α+1}`
    pub trace_beta: f64,
}

/// Evaluate every weighted integral at radius `r` with one set of nodes.
pub fn radius_integrals<const D: usize>(
    sol: &Solution<D>,
    r: f64,
    alpha: f64,
    counts: QuadratureCounts,
) -> Result<RadiusIntegrals> {
    let cs = &sol.coefficients;
    let bulk = HalfBallRule::<D>::new(alpha - 1.0, counts)?;
    let mut acc = [NeumaierSum::new(); 7];
    let mut bad = None;
    bulk.for_each_node(r, |x, wt| {
        let (u, du) = sol.value_grad(x);
        let a = cs.a(x);
        let v = cs.v(x);
        let w = r * r - linalg::norm2(x);
        let adu = linalg::mat_vec(&a, &du);
        let mu = mu_unchecked(&a, x);
        let adux = linalg::dot(&adu, x);
        let u2 = u * u;
        let terms = [
            u2 * mu * w,
            2.0 * (alpha + 1.0) * adux * u * w,
            linalg::dot(&adu, &du) * w * w,
            v * u2 * w * w,
            v.abs() * u2 * w * w,
            adux * adux / mu * w,
            u2 * linalg::norm2(x),
        ];
        if terms.iter().any(|t| !t.is_finite()) && bad.is_none() {
            bad = Some(x.to_vec());
        }
        for (k, t) in terms.iter().enumerate() {
            acc[k].add(wt * t);
        }
    });
    if let Some(p) = bad {
        return Err(Error::NonFinite(p));
    }
    let face = BoundaryRule::<D>::new(alpha + 1.0, counts)?;
    let mut bacc = [NeumaierSum::new(); 4];
    face.for_each_node(r, |x, wt| {
        let (u, _) = sol.value_grad(x);
        let eta = cs.eta(x);
        let u2 = u * u;
        let beta_deta = if linalg::norm2(x) > 0.0 {
            let a = cs.a(x);
            let mu = mu_unchecked(&a, x);
            let beta = linalg::mat_vec(&a, x).map(|c| c / mu);
            linalg::dot(&beta, &cs.deta_tangential(x)).abs()
        } else {
            0.0
        };
        bacc[0].add(-wt * eta * u2);
        bacc[1].add(wt * eta.abs() * u2);
        bacc[2].add(wt * u2);
        bacc[3].add(wt * u2 * beta_deta);
    });
    Ok(RadiusIntegrals {
        r,
        h: acc[0].value(),
        i: acc[1].value(),
        i1: acc[2].value(),
        i2: acc[3].value(),
        i3: bacc[0].value(),
        i2_maj: acc[4].value(),
        i3_maj: bacc[1].value(),
        j: acc[5].value(),
        poincare: acc[6].value(),
        trace: bacc[2].value(),
        trace_beta: bacc[3].value(),
    })
}

/// `(H(r), I(r))` only; used for finite differences in `r`.
fn height_energy<const D: usize>(sol: &Solution<D>, r: f64, rule: &HalfBallRule<D>) -> Result<(f64, f64)> {
    let cs = &sol.coefficients;
    let alpha = rule.power();
    let mut h = NeumaierSum::new();
    let mut i = NeumaierSum::new();
    let mut bad = None;
    rule.for_each_node(r, |x, wt| {
        let (u, du) = sol.value_grad(x);
        let a = cs.a(x);
        let mu = mu_unchecked(&a, x);
        let adux = linalg::dot(&linalg::mat_vec(&a, &du), x);
        let (th, ti) = (u * u * mu, 2.0 * (alpha + 1.0) * adux * u);
        if !(th.is_finite() && ti.is_finite()) && bad.is_none() {
            bad = Some(x.to_vec());
        }
        h.add(wt * th);
        i.add(wt * ti);
    });
    match bad {
        Some(p) => Err(Error::NonFinite(p)),
        None => Ok((h.value(), i.value())),
    }
}

fn check_radius_alpha(r: f64, alpha: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParameter(format!("radius must lie in (0, 1], got {r}")));
    }
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be at least 1, got {alpha}")));
    }
    Ok(())
}

/// `H(r) = ∫_{B_r^+} u² (r² − |x|²)^α μ`.
pub fn height_h<const D: usize>(sol: &Solution<D>, r: f64, alpha: f64, counts: QuadratureCounts) -> Result<f64> {
    check_radius_alpha(r, alpha)?;
    Ok(height_energy(sol, r, &HalfBallRule::new(alpha, counts)?)?.0)
}

/// `I(r) = 2(α+1) ∫_{B_r^+} ⟨A Du, x⟩ u (r² − |x|²)^α`.
pub fn energy_i<const D: usize>(sol: &Solution<D>, r: f64, alpha: f64, counts: QuadratureCounts) -> Result<f64> {
    check_radius_alpha(r, alpha)?;
    Ok(height_energy(sol, r, &HalfBallRule::new(alpha, counts)?)?.1)
}

/// `(I₁, I₂, I₃, Ĩ₂, Ĩ₃)`; refused unless `sol` is a measured solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub i: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i2_maj: f64,
    pub i3_maj: f64,
}

impl Decomposition {
    /// `|I − (I₁ + I₂ + I₃)| / (|I₁| + Ĩ₂ + Ĩ₃)`.
    pub fn relative_defect(&self) -> f64 {
        let scale = self.i1.abs() + self.i2_maj + self.i3_maj;
        if scale == 0.0 {
            return (self.i - self.i1 - self.i2 - self.i3).abs();
        }
        (self.i - self.i1 - self.i2 - self.i3).abs() / scale
    }
}

pub fn energy_decomposition<const D: usize>(
    sol: &Solution<D>,
    r: f64,
    alpha: f64,
    counts: QuadratureCounts,
) -> Result<Decomposition> {
    check_radius_alpha(r, alpha)?;
    sol.require_solution()?;
    let ri = radius_integrals(sol, r, alpha, counts)?;
    Ok(Decomposition {
        i: ri.i,
        i1: ri.i1,
        i2: ri.i2,
        i3: ri.i3,
        i2_maj: ri.i2_maj,
        i3_maj: ri.i3_maj,
    })
}

/// Smallest height treated as nonzero at a single radius.
pub const HEIGHT_FLOOR: f64 = 1e-300;

/// `N(r) = I(r)/H(r)`.
pub fn frequency_n<const D: usize>(sol: &Solution<D>, r: f64, alpha: f64, counts: QuadratureCounts) -> Result<f64> {
    check_radius_alpha(r, alpha)?;
    let (h, i) = height_energy(sol, r, &HalfBallRule::new(alpha, counts)?)?;
    if !(h > HEIGHT_FLOOR) {
        return Err(Error::DegenerateHeight(h, r));
    }
    Ok(i / h)
}

/// Weight exponent, radius grid and differentiation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyConfig {
    pub alpha: f64,
    pub r_grid: Vec<f64>,
    /// Relative step: derivatives use `h = fd_step · r`.
    pub fd_step: f64,
    pub counts: QuadratureCounts,
}

impl FrequencyConfig {
    pub fn new(alpha: f64, r_grid: Vec<f64>) -> Self {
        Self {
            alpha,
            r_grid,
            fd_step: 1e-3,
            counts: QuadratureCounts::default(),
        }
    }

    pub fn with_counts(mut self, counts: QuadratureCounts) -> Self {
        self.counts = counts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be at least 1, got {}", self.alpha)));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.1) {
            return Err(Error::InvalidParameter(format!("fd_step must lie in (0, 0.1), got {}", self.fd_step)));
        }
        for w in self.r_grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter("radius grid must be strictly increasing".into()));
            }
        }
        for &r in &self.r_grid {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::InvalidParameter(format!("grid radius {r} is outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// One radius of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub integrals: RadiusIntegrals,
    /// False when `H` is below `1e-14 · max H` on the grid.
    pub valid: bool,
    pub n: f64,
    pub dh: f64,
    pub di: f64,
    pub dn: f64,
    pub ntilde: f64,
}

impl ProfileRow {
    pub fn r(&self) -> f64 {
        self.integrals.r
    }
}

/// Frequency quantities over a radius grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyProfile {
    pub dimension: usize,
    pub alpha: f64,
    pub rows: Vec<ProfileRow>,
    /// `N` at radius `min(1, r_max)` (used by the corollary bound and the optimal `α`).
    pub n_at_one: f64,
    /// Constant used to build the `Ntilde` column, if the fit succeeded.
    pub ntilde_c: Option<f64>,
    /// Weak residual of the solution, which bounds how exactly the
    /// differential identities can hold.
    pub solution_residual: f64,
}

impl FrequencyProfile {
    pub fn valid_rows(&self) -> impl Iterator<Item = &ProfileRow> {
        self.rows.iter().filter(|r| r.valid)
    }

    /// CSV with symbol-named columns.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,valid,H,I,I1,I2,I3,I2tilde,I3tilde,J,P,T,Tbeta,N,dH,dI,dN,Ntilde\n");
        for row in &self.rows {
            let g = &row.integrals;
            let _ = writeln!(
                s,
                "{:?},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                g.r,
                row.valid,
                g.h,
                g.i,
                g.i1,
                g.i2,
                g.i3,
                g.i2_maj,
                g.i3_maj,
                g.j,
                g.poincare,
                g.trace,
                g.trace_beta,
                row.n,
                row.dh,
                row.di,
                row.dn,
                row.ntilde
            );
        }
        s
    }
}

/// Central difference with step `h` and `h/2`, combined by one Richardson step.
fn richardson(f: &dyn Fn(f64) -> Result<f64>, r: f64, h: f64) -> Result<f64> {
    let d1 = (f(r + h)? - f(r - h)?) / (2.0 * h);
    let d2 = (f(r + 0.5 * h)? - f(r - 0.5 * h)?) / h;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// Fill every column of the profile; radii are processed in parallel and
/// assembled in grid order.
pub fn build_profile<const D: usize>(sol: &Solution<D>, fc: &FrequencyConfig) -> Result<FrequencyProfile> {
    fc.validate()?;
    let alpha = fc.alpha;
    let hi_rule = HalfBallRule::<D>::new(alpha, fc.counts)?;
    let rows: Vec<Result<(RadiusIntegrals, f64, f64)>> = fc
        .r_grid
        .par_iter()
        .map(|&r| {
            let integrals = radius_integrals(sol, r, alpha, fc.counts)?;
            let step = fc.fd_step * r;
            let dh = richardson(&|s| Ok(height_energy(sol, s, &hi_rule)?.0), r, step)?;
            let di = richardson(&|s| Ok(height_energy(sol, s, &hi_rule)?.1), r, step)?;
            Ok((integrals, dh, di))
        })
        .collect();
    let rows: Vec<(RadiusIntegrals, f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let max_h = rows.iter().map(|r| r.0.h).fold(0.0, f64::max);
    let rows: Vec<ProfileRow> = rows
        .into_iter()
        .map(|(g, dh, di)| {
            let valid = g.h > 1e-14 * max_h && g.h > HEIGHT_FLOOR;
            let (n, dn) = if valid {
                (g.i / g.h, (di * g.h - g.i * dh) / (g.h * g.h))
            } else {
                (f64::NAN, f64::NAN)
            };
            ProfileRow {
                integrals: g,
                valid,
                n,
                dh,
                di,
                dn,
                ntilde: f64::NAN,
            }
        })
        .collect();
    let (h1, i1) = height_energy(sol, sol.coefficients.region.r_max().min(1.0), &hi_rule)?;
    let n_at_one = if h1 > HEIGHT_FLOOR { i1 / h1 } else { f64::NAN };
    let mut profile = FrequencyProfile {
        dimension: D,
        alpha,
        rows,
        n_at_one,
        ntilde_c: None,
        solution_residual: sol.residual.unwrap_or(0.0),
    };
    let report = check_monotonicity(&profile, &sol.coefficients)?;
    if report.c.is_finite() {
        for (row, nt) in profile.rows.iter_mut().zip(&report.ntilde) {
            row.ntilde = *nt;
        }
        profile.ntilde_c = Some(report.c);
    }
    Ok(profile)
}

