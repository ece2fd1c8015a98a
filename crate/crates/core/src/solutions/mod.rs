//! Test solutions: closed-form Robin solutions and a P1 finite-element solver
//! on half-disks.

mod analytic;
pub mod fem;
pub mod mesh;
pub mod radial;

pub use analytic::{analytic_solution, ANALYTIC_CATALOGUE};
pub use fem::{fem_solution, mesh_weak_residual, solve_robin_fem, solve_robin_field, FemField};
pub use mesh::{BoundaryTag, Mesh};

use std::fmt;
use std::sync::Arc;

use crate::coefficients::{CoefficientSet, FieldFn, Region};
use crate::error::{Error, Result};
use crate::linalg::{self, central_diff, Point};
use crate::quadrature::{BoundaryRule, HalfBallRule, NeumaierSum, QuadratureCounts};

/// Where a solution came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Analytic,
    Fem { h: f64, nodes: usize, elements: usize },
    /// Pulled back through a flattening map.
    Transformed(Box<Provenance>),
}

/// A scalar field `u` with gradient access and the problem it solves.
#[derive(Clone)]
pub struct Solution<const D: usize> {
    pub name: String,
    field: FieldFn<D>,
    pub provenance: Provenance,
    pub coefficients: CoefficientSet<D>,
    /// Relative weak-form residual, when it has been measured.
    pub residual: Option<f64>,
}

impl<const D: usize> fmt::Debug for Solution<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solution")
            .field("name", &self.name)
            .field("provenance", &self.provenance)
            .field("coefficients", &self.coefficients.name)
            .field("residual", &self.residual)
            .finish()
    }
}

/// Residual accepted for closed-form solutions.
pub const ANALYTIC_RESIDUAL_TOL: f64 = 1e-8;

impl<const D: usize> Solution<D> {
    pub fn new(
        name: impl Into<String>,
        field: FieldFn<D>,
        provenance: Provenance,
        coefficients: CoefficientSet<D>,
    ) -> Self {
        Self {
            name: name.into(),
            field,
            provenance,
            coefficients,
            residual: None,
        }
    }

    /// A field that is not claimed to solve anything; operations that need
    /// a solution refuse it.
    pub fn field_only(
        name: impl Into<String>,
        field: impl Fn(&Point<D>) -> (f64, Point<D>) + Send + Sync + 'static,
        coefficients: CoefficientSet<D>,
    ) -> Self {
        Self::new(name, Arc::new(field), Provenance::Analytic, coefficients)
    }

    /// Measure and attach the relative weak-form residual.
    pub fn with_measured_residual(mut self, counts: QuadratureCounts) -> Result<Self> {
        self.residual = Some(residual(&self.field, &self.coefficients, counts)?);
        Ok(self)
    }

    pub fn field(&self) -> &FieldFn<D> {
        &self.field
    }

    /// `(u, Du)` without a domain check.
    #[inline]
    pub fn value_grad(&self, x: &Point<D>) -> (f64, Point<D>) {
        (self.field)(x)
    }

    /// `(u, Du)` at a point of the closed domain.
    pub fn eval_solution(&self, x: &Point<D>) -> Result<(f64, Point<D>)> {
        if !self.coefficients.region.contains(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        Ok((self.field)(x))
    }

    /// Residual level under which the field counts as a solution.
    pub fn residual_threshold(&self) -> f64 {
        threshold_for(&self.provenance)
    }

    /// Error unless the measured residual is below [`Self::residual_threshold`].
    pub fn require_solution(&self) -> Result<()> {
        let threshold = self.residual_threshold();
        match self.residual {
            Some(r) if r <= threshold => Ok(()),
            Some(r) => Err(Error::NotASolution { residual: r, threshold }),
            None => Err(Error::NotASolution {
                residual: f64::INFINITY,
                threshold,
            }),
        }
    }
}

fn threshold_for(p: &Provenance) -> f64 {
    match p {
        Provenance::Analytic => ANALYTIC_RESIDUAL_TOL,
        Provenance::Fem { h, .. } => (h * h).max(ANALYTIC_RESIDUAL_TOL),
        Provenance::Transformed(inner) => (10.0 * threshold_for(inner)).max(1e-4),
    }
}

/// Relative residual appropriate to the region: the weak form on a half-ball,
/// the pointwise strong form on a curved chart.
pub fn residual<const D: usize>(field: &FieldFn<D>, cs: &CoefficientSet<D>, counts: QuadratureCounts) -> Result<f64> {
    match &cs.region {
        Region::HalfBall(h) => weak_residual(field, cs, h.r_max.min(1.0), counts),
        Region::Graph(_) => Ok(strong_residual(field, cs, 400)),
    }
}

pub(crate) fn test_monomials<const D: usize>() -> Vec<Vec<usize>> {
    // exponent lists for 1, y_i, y_i y_j (i ≤ j)
    let mut out = vec![vec![]];
    for i in 0..D {
        out.push(vec![i]);
    }
    for i in 0..D {
        for j in i..D {
            out.push(vec![i, j]);
        }
    }
    out
}

/// Value and gradient of the monomial `q(y/R)` with exponent list `mono`.
pub(crate) fn monomial<const D: usize>(y: &Point<D>, mono: &[usize], radius: f64) -> (f64, Point<D>) {
    let s: Point<D> = std::array::from_fn(|k| y[k] / radius);
    let mut g = [0.0; D];
    let val = match mono {
        [] => 1.0,
        [i] => {
            g[*i] = 1.0 / radius;
            s[*i]
        }
        [i, j] => {
            g[*i] += s[*j] / radius;
            g[*j] += s[*i] / radius;
            s[*i] * s[*j]
        }
        _ => unreachable!(),
    };
    (val, g)
}

/// Relative weak-form residual of `B(u, ψ) = ∫ A Du·Dψ + V u ψ − ∫_Γ η u ψ`
/// over `ψ = (R² − |y|²)² q(y/R)` with `q` running over monomials of degree ≤ 2.
/// Each `|B(u, ψ)|` is divided by `∫|A Du·Dψ| + ∫|V u ψ| + ∫_Γ |η u ψ|`.
pub fn weak_residual<const D: usize>(
    field: &FieldFn<D>,
    cs: &CoefficientSet<D>,
    radius: f64,
    counts: QuadratureCounts,
) -> Result<f64> {
    let monomials = test_monomials::<D>();
    let nq = monomials.len();
    let q_and_grad = |y: &Point<D>, mono: &[usize]| monomial(y, mono, radius);
    // Bulk rule with weight w = R² − |y|²: ψ = w² q, Dψ = w(−4 y q + w Dq).
    let bulk = HalfBallRule::<D>::new(1.0, counts)?;
    let mut form = vec![NeumaierSum::new(); nq];
    let mut scale = vec![NeumaierSum::new(); nq];
    let mut bad = None;
    bulk.for_each_node(radius, |y, wt| {
        let (u, du) = field(y);
        let a = cs.a(y);
        let v = cs.v(y);
        let flux = linalg::mat_vec(&a, &du);
        let w = radius * radius - linalg::norm2(y);
        for (j, mono) in monomials.iter().enumerate() {
            let (q, dq) = q_and_grad(y, mono);
            let mut grad_term = 0.0;
            for k in 0..D {
                grad_term += flux[k] * (-4.0 * y[k] * q + w * dq[k]);
            }
            let pot = v * u * w * q;
            if !(grad_term.is_finite() && pot.is_finite()) && bad.is_none() {
                bad = Some(y.to_vec());
            }
            form[j].add(wt * (grad_term + pot));
            scale[j].add(wt * (grad_term.abs() + pot.abs()));
        }
    });
    if let Some(p) = bad {
        return Err(Error::NonFinite(p));
    }
    let face = BoundaryRule::<D>::new(2.0, counts)?;
    face.for_each_node(radius, |y, wt| {
        let (u, _) = field(y);
        let eta = cs.eta(y);
        for (j, mono) in monomials.iter().enumerate() {
            let (q, _) = q_and_grad(y, mono);
            let t = eta * u * q;
            form[j].add(-wt * t);
            scale[j].add(wt * t.abs());
        }
    });
    let mut worst: f64 = 0.0;
    for j in 0..nq {
        let s = scale[j].value();
        if s > 0.0 {
            worst = worst.max(form[j].value().abs() / s);
        }
    }
    Ok(worst)
}

/// Largest relative pointwise residual of the PDE and of the Robin condition
/// at deterministic samples; derivatives of the flux by central differences.
pub fn strong_residual<const D: usize>(field: &FieldFn<D>, cs: &CoefficientSet<D>, samples: usize) -> f64 {
    let (interior, boundary) = cs.region.sample_points(samples);
    let mut worst: f64 = 0.0;
    for x in &interior {
        let h = 1e-3 * (1.0 + linalg::norm(x));
        let mut div = 0.0;
        let mut mag = 0.0;
        for i in 0..D {
            let flux_i = |y: &Point<D>| linalg::mat_vec(&cs.a(y), &field(y).1)[i];
            let d = central_diff(&flux_i, x, i, h);
            div += d;
            mag += d.abs();
        }
        let vu = cs.v(x) * field(x).0;
        let denom = mag + vu.abs();
        if denom > 0.0 {
            worst = worst.max((div - vu).abs() / denom);
        }
    }
    for x in &boundary {
        let (u, du) = field(x);
        let flux = linalg::mat_vec(&cs.a(x), &du);
        let fn_ = linalg::dot(&flux, &cs.region.outward_normal(x));
        let eu = cs.eta(x) * u;
        let denom = linalg::norm(&flux) + eu.abs();
        if denom > 0.0 {
            worst = worst.max((fn_ - eu).abs() / denom);
        }
    }
    worst
}
