//! Quadrature on half-balls `B_r^+ = {|x| < r, x_d > 0}` and on their flat
//! faces `Γ_r = {|x| < r, x_d = 0}` against the weights `(r² − |x|²)^p`.
//!
//! The radial factor is handled by a Gauss–Jacobi rule for `(1 − t)^p t^{d−1}`
//! on `[0, 1]`; the remaining `(1 + t)^p` is folded into the weights, so the
//! rule stays spectrally accurate for non-integer `p` and for integrands that
//! are odd in the radius. Directions come from Gauss–Legendre in the polar
//! angle (and a trapezoid rule in the azimuth when `d = 3`).

mod gauss_jacobi;
mod sum;

pub use gauss_jacobi::{gauss_jacobi, gauss_legendre, GaussRule};
pub use sum::{compensated_sum, NeumaierSum};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::linalg::Point;

/// Radial and angular node counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureCounts {
    pub n_rad: usize,
    pub n_ang: usize,
}

impl Default for QuadratureCounts {
    fn default() -> Self {
        Self { n_rad: 64, n_ang: 128 }
    }
}

impl QuadratureCounts {
    pub fn new(n_rad: usize, n_ang: usize) -> Self {
        Self { n_rad, n_ang }
    }

    fn halved(self) -> Self {
        Self {
            n_rad: (self.n_rad / 2).max(1),
            n_ang: (self.n_ang / 2).max(1),
        }
    }

    fn doubled(self) -> Self {
        Self {
            n_rad: self.n_rad * 2,
            n_ang: self.n_ang * 2,
        }
    }
}

/// Largest radial count the adaptive drivers will try.
pub const NODE_CAP: usize = 1024;

/// Relative tolerance used by the adaptive drivers.
pub const DEFAULT_TOL: f64 = 1e-11;

/// A converged integral together with its refinement error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

fn check_dimension<const D: usize>() -> Result<()> {
    if D == 2 || D == 3 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("quadrature supports d = 2 or 3, not {D}")))
    }
}

/// Product rule for `∫_{B_r^+} f (r² − |x|²)^p dx`.
#[derive(Debug, Clone)]
pub struct HalfBallRule<const D: usize> {
    power: f64,
    counts: QuadratureCounts,
    /// `(t, W)` on the unit radius; `W` already contains `(1 + t)^p`.
    radial: Vec<(f64, f64)>,
    /// Unit directions with `x_d ≥ 0` and their weights.
    angular: Vec<(Point<D>, f64)>,
}

impl<const D: usize> HalfBallRule<D> {
    pub fn new(power: f64, counts: QuadratureCounts) -> Result<Self> {
        check_dimension::<D>()?;
        if counts.n_rad == 0 || counts.n_ang == 0 {
            return Err(Error::InvalidParameter("node counts must be positive".into()));
        }
        let gj = gauss_jacobi(counts.n_rad, power, D as f64 - 1.0)?;
        let scale = 2f64.powf(-(power + D as f64));
        let radial = gj
            .nodes
            .iter()
            .zip(&gj.weights)
            .map(|(&x, &w)| {
                let t = 0.5 * (1.0 + x);
                (t, w * scale * (1.0 + t).powf(power))
            })
            .collect();
        Ok(Self {
            power,
            counts,
            radial,
            angular: half_sphere_directions::<D>(counts.n_ang)?,
        })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn counts(&self) -> QuadratureCounts {
        self.counts
    }

    /// Visit every node of the rule scaled to radius `r`, in a fixed order.
    /// Weights include `r^{2p+d}`; the caller multiplies by the integrand only.
    pub fn for_each_node(&self, r: f64, mut visit: impl FnMut(&Point<D>, f64)) {
        let scale = r.powf(2.0 * self.power + D as f64);
        for &(t, wr) in &self.radial {
            let s = r * t;
            for (dir, wa) in &self.angular {
                let mut x = [0.0; D];
                for k in 0..D {
                    x[k] = s * dir[k];
                }
                visit(&x, scale * wr * wa);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.radial.len() * self.angular.len()
    }

    /// `∫_{B_r^+} f (r² − |x|²)^p dx` with this rule; rejects non-finite samples.
    pub fn integrate(&self, r: f64, f: impl Fn(&Point<D>) -> f64) -> Result<f64> {
        let mut acc = NeumaierSum::new();
        let mut bad = None;
        self.for_each_node(r, |x, w| {
            let v = f(x);
            if !v.is_finite() && bad.is_none() {
                bad = Some(x.to_vec());
            }
            acc.add(v * w);
        });
        match bad {
            Some(x) => Err(Error::NonFinite(x)),
            None => Ok(acc.value()),
        }
    }

    /// Closed form of `∫_{B_r^+} (r² − |x|²)^p dx`.
    pub fn weight_integral(&self, r: f64) -> f64 {
        weight_integral::<D>(r, self.power)
    }
}

/// `∫_{B_r^+} (r² − |x|²)^p dx = |S^{d−1}_+| r^{2p+d} B(d/2, p+1) / 2`.
pub fn weight_integral<const D: usize>(r: f64, p: f64) -> f64 {
    let dim = D as f64;
    let half_sphere = match D {
        2 => PI,
        3 => 2.0 * PI,
        _ => f64::NAN,
    };
    half_sphere * r.powf(2.0 * p + dim) * 0.5 * beta(dim / 2.0, p + 1.0)
}

fn half_sphere_directions<const D: usize>(n_ang: usize) -> Result<Vec<(Point<D>, f64)>> {
    let mut out = Vec::new();
    match D {
        2 => {
            let gl = gauss_legendre(n_ang)?;
            for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
                let theta = 0.5 * PI * (1.0 + x);
                let mut p = [0.0; D];
                p[0] = theta.cos();
                p[1] = theta.sin();
                out.push((p, 0.5 * PI * w));
            }
        }
        3 => {
            let n_pol = (n_ang / 2).max(1);
            let gl = gauss_legendre(n_pol)?;
            for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
                let c = 0.5 * (1.0 + x);
                let s = (1.0 - c * c).max(0.0).sqrt();
                for j in 0..n_ang {
                    let phi = 2.0 * PI * j as f64 / n_ang as f64;
                    let mut p = [0.0; D];
                    p[0] = s * phi.cos();
                    p[1] = s * phi.sin();
                    p[2] = c;
                    out.push((p, 0.5 * w * 2.0 * PI / n_ang as f64));
                }
            }
        }
        _ => return Err(Error::InvalidParameter(format!("no angular rule for d = {D}"))),
    }
    Ok(out)
}

/// Rule for `∫_{Γ_r} g (r² − |x|²)^p dσ` on the flat face `x_d = 0`.
#[derive(Debug, Clone)]
pub struct BoundaryRule<const D: usize> {
    power: f64,
    /// Unit-radius nodes (last coordinate zero) with weights.
    nodes: Vec<(Point<D>, f64)>,
}

impl<const D: usize> BoundaryRule<D> {
    pub fn new(power: f64, counts: QuadratureCounts) -> Result<Self> {
        check_dimension::<D>()?;
        if power < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "boundary weight exponent must be nonnegative, got {power}"
            )));
        }
        let mut nodes = Vec::new();
        match D {
            2 => {
                let gj = gauss_jacobi(counts.n_ang.max(1), power, power)?;
                for (&x, &w) in gj.nodes.iter().zip(&gj.weights) {
                    let mut p = [0.0; D];
                    p[0] = x;
                    nodes.push((p, w));
                }
            }
            _ => {
                let gj = gauss_jacobi(counts.n_rad.max(1), power, 1.0)?;
                let n_azi = counts.n_ang.max(1);
                let scale = 2f64.powf(-(power + 2.0));
                for (&x, &w) in gj.nodes.iter().zip(&gj.weights) {
                    let t = 0.5 * (1.0 + x);
                    let wr = w * scale * (1.0 + t).powf(power);
                    for j in 0..n_azi {
                        let phi = 2.0 * PI * j as f64 / n_azi as f64;
                        let mut p = [0.0; D];
                        p[0] = t * phi.cos();
                        p[1] = t * phi.sin();
                        nodes.push((p, wr * 2.0 * PI / n_azi as f64));
                    }
                }
            }
        }
        Ok(Self { power, nodes })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn for_each_node(&self, r: f64, mut visit: impl FnMut(&Point<D>, f64)) {
        let scale = r.powf(2.0 * self.power + D as f64 - 1.0);
        for (p, w) in &self.nodes {
            let mut x = [0.0; D];
            for k in 0..D {
                x[k] = r * p[k];
            }
            visit(&x, scale * w);
        }
    }

    pub fn integrate(&self, r: f64, g: impl Fn(&Point<D>) -> f64) -> Result<f64> {
        let mut acc = NeumaierSum::new();
        let mut bad = None;
        self.for_each_node(r, |x, w| {
            let v = g(x);
            if !v.is_finite() && bad.is_none() {
                bad = Some(x.to_vec());
            }
            acc.add(v * w);
        });
        match bad {
            Some(x) => Err(Error::NonFinite(x)),
            None => Ok(acc.value()),
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("radius must be positive, got {r}")))
    }
}

/// Drives a rule family by comparing each rule with its half-count sibling
/// and doubling counts until the difference is within tolerance.
fn adaptive(
    counts: QuadratureCounts,
    tol: f64,
    mut eval: impl FnMut(QuadratureCounts) -> Result<(f64, f64)>,
) -> Result<Integral> {
    let mut counts = counts;
    let (mut coarse, _) = eval(counts.halved())?;
    loop {
        let (fine, magnitude) = eval(counts)?;
        let error = (fine - coarse).abs();
        if error <= tol * magnitude.max(fine.abs()) || magnitude == 0.0 {
            return Ok(Integral { value: fine, error });
        }
        if counts.n_rad * 2 > NODE_CAP {
            return Err(Error::NoConvergence {
                estimate: error,
                cap: NODE_CAP,
            });
        }
        coarse = fine;
        counts = counts.doubled();
    }
}

/// `∫_{B_r^+} f (r² − |x|²)^p dx` with an error estimate from one level of
/// rule refinement; counts are doubled until the estimate meets `DEFAULT_TOL`.
pub fn weighted_halfball_integral<const D: usize>(
    f: impl Fn(&Point<D>) -> f64,
    r: f64,
    p: f64,
    counts: QuadratureCounts,
) -> Result<Integral> {
    check_radius(r)?;
    adaptive(counts, DEFAULT_TOL, |c| {
        let rule = HalfBallRule::<D>::new(p, c)?;
        let value = rule.integrate(r, &f)?;
        let magnitude = rule.integrate(r, |x| f(x).abs())?;
        Ok((value, magnitude))
    })
}

/// `∫_{Γ_r} g (r² − |x|²)^p dσ` with the same refinement strategy.
pub fn weighted_boundary_integral<const D: usize>(
    g: impl Fn(&Point<D>) -> f64,
    r: f64,
    p: f64,
    counts: QuadratureCounts,
) -> Result<Integral> {
    check_radius(r)?;
    adaptive(counts, DEFAULT_TOL, |c| {
        let rule = BoundaryRule::<D>::new(p, c)?;
        let value = rule.integrate(r, &g)?;
        let magnitude = rule.integrate(r, |x| g(x).abs())?;
        Ok((value, magnitude))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn constant_against_weight_closed_form() {
        let rule = HalfBallRule::<2>::new(1.0, QuadratureCounts::default()).unwrap();
        let v = rule.integrate(1.0, |_| 1.0).unwrap();
        assert!(rel(v, PI / 4.0) < 1e-12);
        let rule3 = HalfBallRule::<3>::new(2.5, QuadratureCounts::new(16, 16)).unwrap();
        let v3 = rule3.integrate(0.7, |_| 1.0).unwrap();
        assert!(rel(v3, rule3.weight_integral(0.7)) < 1e-12);
    }

    #[test]
    fn squared_harmonic_closed_form() {
        let f = |x: &Point<2>| (x[0] * x[0] - x[1] * x[1]).powi(2);
        let v = weighted_halfball_integral(f, 1.0, 1.0, QuadratureCounts::default()).unwrap();
        assert!(rel(v.value, PI / 48.0) < 1e-12);
    }

    #[test]
    fn odd_in_radius_integrand() {
        // ∫_{B_1^+} |x| dx = π/3 in the plane.
        let v = weighted_halfball_integral(|x: &Point<2>| crate::linalg::norm(x), 1.0, 0.0, QuadratureCounts::new(8, 8))
            .unwrap();
        assert!(rel(v.value, PI / 3.0) < 1e-12);
    }

    #[test]
    fn boundary_closed_forms() {
        let v = weighted_boundary_integral(|_: &Point<2>| 1.0, 1.0, 2.0, QuadratureCounts::default()).unwrap();
        assert!(rel(v.value, 16.0 / 15.0) < 1e-12);
        for k in 0..5 {
            let v = weighted_boundary_integral(|x: &Point<2>| x[0].powi(2 * k), 1.0, 0.0, QuadratureCounts::default())
                .unwrap();
            assert!(rel(v.value, 2.0 / (2 * k + 1) as f64) < 1e-12);
        }
        // Unit disk in 3-D with weight (1 − |x|²): π/2.
        let v = weighted_boundary_integral(|_: &Point<3>| 1.0, 1.0, 1.0, QuadratureCounts::new(8, 8)).unwrap();
        assert!(rel(v.value, PI / 2.0) < 1e-12);
    }

    #[test]
    fn zero_integrand() {
        let v = weighted_halfball_integral(|_: &Point<2>| 0.0, 1.0, 1.0, QuadratureCounts::default()).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn non_finite_sample_is_an_error() {
        let e = weighted_halfball_integral(|_: &Point<2>| f64::NAN, 1.0, 1.0, QuadratureCounts::new(4, 4));
        assert!(matches!(e, Err(Error::NonFinite(_))));
    }

    #[test]
    fn bad_radius_rejected() {
        assert!(weighted_halfball_integral(|_: &Point<2>| 1.0, 0.0, 1.0, QuadratureCounts::default()).is_err());
    }
}
