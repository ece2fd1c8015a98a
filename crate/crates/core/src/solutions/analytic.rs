use std::sync::Arc;

use super::radial::{bessel_j0, bessel_j1, first_robin_eigenvalue};
use super::{Provenance, Solution};
use crate::coefficients::{CoefficientSet, EpsModulus, FieldFn, GraphRegion, MatrixField, Region, ScalarField};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureCounts;

/// Planar closed-form solutions, alphabetized, with parameter descriptions.
pub const ANALYTIC_CATALOGUE: &[(&str, &str)] = &[
    ("constant", "c: u = c, V = 0, eta = 0"),
    ("homogeneous", "k: u = Re (x1 + i x2)^k, V = 0, eta = 0"),
    ("neumann-coshcos", "k: u = cos(k x1) cosh(k x2), V = 0, eta = 0"),
    ("robin-cosexp", "k: u = cos(k x1) exp(k x2), V = 0, eta = -k"),
    ("robin-cosexp-decay", "k: u = cos(k x1) exp(-k x2), V = 0, eta = k"),
    ("robin-disk", "b: first Robin eigenfunction of the unit disk centred at (0,1), eta = -b, V = -lambda"),
    ("robin-exponential", "eta0: u = exp(eta0 x2), V = eta0^2, eta = -eta0"),
    ("separable", "a, b: u = cos(a x1) exp(b x2), V = b^2 - a^2, eta = -b"),
];

fn get(params: &[f64], i: usize, name: &str) -> Result<f64> {
    match params.get(i) {
        Some(v) if v.is_finite() => Ok(*v),
        Some(v) => Err(Error::InvalidParameter(format!("{name} must be finite, got {v}"))),
        None => Err(Error::InvalidParameter(format!("missing parameter `{name}`"))),
    }
}

/// Coefficients with `A = I` and constant `V`, `η` on the unit half-disk.
fn flat_set(name: &str, v: f64, eta: f64) -> CoefficientSet<2> {
    CoefficientSet::with_declared_bounds(
        name,
        MatrixField::identity(),
        ScalarField::constant(v),
        ScalarField::constant(eta),
        Region::half_ball(1.0),
        1.0,
        v.abs(),
        eta.abs(),
        EpsModulus::Zero,
    )
}

/// `(Re z^k, D Re z^k)` for integer `k ≥ 0`.
fn re_power(k: u32, x: &[f64; 2]) -> (f64, [f64; 2]) {
    if k == 0 {
        return (1.0, [0.0, 0.0]);
    }
    // z^{k-1} by repeated multiplication
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..k - 1 {
        let (r2, i2) = (re * x[0] - im * x[1], re * x[1] + im * x[0]);
        re = r2;
        im = i2;
    }
    let u = re * x[0] - im * x[1];
    let kf = k as f64;
    // d/dx1 Re z^k = Re(k z^{k-1}), d/dx2 Re z^k = -Im(k z^{k-1})
    (u, [kf * re, -kf * im])
}

/// Look up a closed-form solution by name.
pub fn analytic_solution(name: &str, params: &[f64]) -> Result<Solution<2>> {
    let (label, field, cs): (String, FieldFn<2>, CoefficientSet<2>) = match name {
        "constant" => {
            let c = get(params, 0, "c")?;
            (format!("constant({c})"), Arc::new(move |_| (c, [0.0, 0.0])), flat_set("identity", 0.0, 0.0))
        }
        "homogeneous" => {
            let k = get(params, 0, "k")?;
            if k < 0.0 || k.fract() != 0.0 || k > 64.0 {
                return Err(Error::InvalidParameter(format!("k must be an integer in [0, 64], got {k}")));
            }
            let k = k as u32;
            (format!("homogeneous({k})"), Arc::new(move |x| re_power(k, x)), flat_set("identity", 0.0, 0.0))
        }
        "neumann-coshcos" => {
            let k = get(params, 0, "k")?;
            (
                format!("neumann-coshcos({k})"),
                Arc::new(move |x| {
                    let (c, s) = ((k * x[0]).cos(), (k * x[0]).sin());
                    let (ch, sh) = ((k * x[1]).cosh(), (k * x[1]).sinh());
                    (c * ch, [-k * s * ch, k * c * sh])
                }),
                flat_set("identity", 0.0, 0.0),
            )
        }
        "robin-cosexp" | "robin-cosexp-decay" | "separable" => {
            let (a, b) = match name {
                "robin-cosexp" => {
                    let k = get(params, 0, "k")?;
                    (k, k)
                }
                "robin-cosexp-decay" => {
                    let k = get(params, 0, "k")?;
                    (k, -k)
                }
                _ => (get(params, 0, "a")?, get(params, 1, "b")?),
            };
            let label = match name {
                "separable" => format!("separable({a},{b})"),
                _ => format!("{name}({})", params[0]),
            };
            (
                label.clone(),
                Arc::new(move |x| {
                    let (c, s) = ((a * x[0]).cos(), (a * x[0]).sin());
                    let e = (b * x[1]).exp();
                    (c * e, [-a * s * e, b * c * e])
                }),
                flat_set(&label, b * b - a * a, -b),
            )
        }
        "robin-exponential" => {
            let eta0 = get(params, 0, "eta0")?;
            (
                format!("robin-exponential({eta0})"),
                Arc::new(move |x| {
                    let e = (eta0 * x[1]).exp();
                    (e, [0.0, eta0 * e])
                }),
                flat_set("robin-exponential", eta0 * eta0, -eta0),
            )
        }
        "robin-disk" => {
            let b = get(params, 0, "b")?;
            let lambda = first_robin_eigenvalue(b)?;
            let k = lambda.sqrt();
            let region = Region::Graph(GraphRegion {
                chart: Arc::new(|t: f64| {
                    let s = (1.0 - t * t).max(0.0).sqrt();
                    (1.0 - s, t / s)
                }),
                r_max: 0.9,
            });
            let cs = CoefficientSet::with_declared_bounds(
                format!("robin-disk({b})"),
                MatrixField::identity(),
                ScalarField::constant(-lambda),
                ScalarField::constant(-b),
                region,
                1.0,
                lambda,
                b,
                EpsModulus::Zero,
            );
            (
                format!("robin-disk({b})"),
                Arc::new(move |x| {
                    let (dx, dy) = (x[0], x[1] - 1.0);
                    let s = dx.hypot(dy);
                    let u = bessel_j0(k * s);
                    if s == 0.0 {
                        return (u, [0.0, 0.0]);
                    }
                    let g = -k * bessel_j1(k * s) / s;
                    (u, [g * dx, g * dy])
                }),
                cs,
            )
        }
        other => return Err(Error::UnknownName(other.to_string())),
    };
    Solution::new(label, field, Provenance::Analytic, cs).with_measured_residual(QuadratureCounts::new(24, 48))
}
