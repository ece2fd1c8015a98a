use nalgebra::DMatrix;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Gauss–Jacobi rule on `[-1, 1]` for the weight `(1 − x)^a (1 + x)^b`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `P_n^{(a,b)}(x)` and `P_{n-1}^{(a,b)}(x)` by the three-term recurrence.
fn jacobi_pair(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    if n == 0 {
        return (p0, 0.0);
    }
    let mut p1 = 0.5 * ((a + b + 2.0) * x + (a - b));
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + a + b;
        let a1 = 2.0 * k * (k + a + b) * (c - 2.0);
        let a2 = (c - 1.0) * (c * (c - 2.0) * x + a * a - b * b);
        let a3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c;
        let p2 = (a2 * p1 - a3 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

fn jacobi_derivative(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let (pn, pm) = jacobi_pair(n, a, b, x);
    let nf = n as f64;
    let c = 2.0 * nf + a + b;
    let num = nf * (a - b - c * x) * pn + 2.0 * (nf + a) * (nf + b) * pm;
    (pn, num / (c * (1.0 - x * x)))
}

/// Nodes from the eigenvalues of the Jacobi matrix, polished by Newton steps
/// on the recurrence, with weights from the closed-form Christoffel numbers.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<GaussRule> {
    if n == 0 {
        return Err(Error::InvalidParameter("Gauss rule needs at least one node".into()));
    }
    if !(a > -1.0 && b > -1.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Jacobi exponents must exceed -1 (got a = {a}, b = {b})"
        )));
    }
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        jm[(k, k)] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            let c = 2.0 * kf + a + b;
            (b * b - a * a) / (c * (c + 2.0))
        };
        if k > 0 {
            let c = 2.0 * kf + a + b;
            let v = 4.0 * kf * (kf + a) * (kf + b) * (kf + a + b) / (c * c * (c + 1.0) * (c - 1.0));
            jm[(k, k - 1)] = v.sqrt();
            jm[(k - 1, k)] = v.sqrt();
        }
    }
    let mut nodes: Vec<f64> = jm.symmetric_eigen().eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    // Γ(n+a+1)Γ(n+b+1) / (Γ(n+a+b+1) n!) as Γ(a+1)Γ(b+1)/Γ(a+b+1) times a
    // telescoping product, which avoids the round-off of large log-gammas.
    let mut ratio = gamma(a + 1.0) * gamma(b + 1.0) / gamma(a + b + 1.0);
    for k in 1..=n {
        let k = k as f64;
        ratio *= (k + a) * (k + b) / ((k + a + b) * k);
    }
    let constant = ratio * 2f64.powf(a + b + 1.0);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = jacobi_derivative(n, a, b, *x);
            let step = p / dp;
            if !step.is_finite() {
                break;
            }
            let next = *x - step;
            if next.abs() < 1.0 {
                *x = next;
            }
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = jacobi_derivative(n, a, b, *x);
        let w = constant / ((1.0 - *x * *x) * dp * dp);
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Gauss–Jacobi weight breakdown for n = {n}, a = {a}, b = {b}"
            )));
        }
        weights.push(w);
    }
    Ok(GaussRule { nodes, weights })
}

pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    gauss_jacobi(n, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta;

    #[test]
    fn legendre_three_point() {
        let r = gauss_legendre(3).unwrap();
        let x = (0.6f64).sqrt();
        assert!((r.nodes[0] + x).abs() < 1e-15 && r.nodes[1].abs() < 1e-15);
        assert!((r.weights[0] - 5.0 / 9.0).abs() < 1e-15);
        assert!((r.weights[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn moments_match_beta_function() {
        // ∫ (1−x)^a (1+x)^b x^0 dx = 2^{a+b+1} B(a+1, b+1)
        for &(a, b) in &[(0.0, 1.0), (1.5, 1.0), (3.0, 2.0), (0.25, 0.25)] {
            let rule = gauss_jacobi(20, a, b).unwrap();
            let total: f64 = rule.weights.iter().sum();
            let exact = 2f64.powf(a + b + 1.0) * beta(a + 1.0, b + 1.0);
            assert!((total - exact).abs() < 1e-12 * exact, "a={a} b={b}");
            // degree-(2n-1) monomial in (1+x): ∫ (1−x)^a (1+x)^{b+m} = 2^{a+b+m+1} B(a+1, b+m+1)
            let m = 39;
            let q: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * (1.0 + x).powi(m))
                .sum();
            let exact = 2f64.powf(a + b + m as f64 + 1.0) * beta(a + 1.0, b + m as f64 + 1.0);
            assert!((q - exact).abs() < 1e-12 * exact, "a={a} b={b}: {q} vs {exact}");
        }
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(gauss_jacobi(4, -1.0, 0.0).is_err());
        assert!(gauss_jacobi(0, 0.0, 0.0).is_err());
    }
}
