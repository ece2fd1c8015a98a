//! Radial Robin eigenfunctions of the unit disk, found by shooting on
//! `f'' + f'/s + λ f = 0`, `f(0) = 1`, `f'(0) = 0`.

use crate::error::{Error, Result};

/// `J_0(z)` by its power series (adequate for `|z| ≤ 20`).
pub fn bessel_j0(z: f64) -> f64 {
    let q = -0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..200 {
        term *= q / (m as f64 * m as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `J_1(z)` by its power series.
pub fn bessel_j1(z: f64) -> f64 {
    let q = -0.25 * z * z;
    let mut term = 0.5 * z;
    let mut sum = term;
    for m in 1..200 {
        term *= q / (m as f64 * (m + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

const START: f64 = 1e-3;
const STEPS: usize = 4000;

/// Integrate the radial ODE to `s = 1`, returning `(f(1), f'(1))`.
pub fn shoot(lambda: f64) -> (f64, f64) {
    // series start away from the regular singular point
    let s0 = START;
    let mut f = 1.0 - lambda * s0 * s0 / 4.0 + lambda * lambda * s0.powi(4) / 64.0;
    let mut g = -lambda * s0 / 2.0 + lambda * lambda * s0.powi(3) / 16.0;
    let h = (1.0 - s0) / STEPS as f64;
    let rhs = |s: f64, f: f64, g: f64| (g, -g / s - lambda * f);
    let mut s = s0;
    for _ in 0..STEPS {
        let (k1f, k1g) = rhs(s, f, g);
        let (k2f, k2g) = rhs(s + 0.5 * h, f + 0.5 * h * k1f, g + 0.5 * h * k1g);
        let (k3f, k3g) = rhs(s + 0.5 * h, f + 0.5 * h * k2f, g + 0.5 * h * k2g);
        let (k4f, k4g) = rhs(s + h, f + h * k3f, g + h * k3g);
        f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        s += h;
    }
    (f, g)
}

/// Smallest `λ > 0` with `f'(1) + b f(1) = 0`, i.e. the first eigenvalue of
/// `−Δu = λu` in the unit disk with `∂_n u + b u = 0`, for `b > 0`.
pub fn first_robin_eigenvalue(b: f64) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Robin constant must be positive, got {b}"
        )));
    }
    let residual = |lambda: f64| {
        let (f, g) = shoot(lambda);
        g + b * f
    };
    let mut lo = 1e-8;
    let f_lo = residual(lo);
    let mut hi = lo;
    let mut step = 0.1;
    loop {
        let next = hi + step;
        if residual(next).signum() != f_lo.signum() {
            lo = hi;
            hi = next;
            break;
        }
        hi = next;
        step *= 1.2;
        if hi > 1e3 {
            return Err(Error::InvalidParameter("no Robin eigenvalue bracket found".into()));
        }
    }
    let mut f_lo = residual(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = residual(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
