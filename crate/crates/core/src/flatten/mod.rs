//! Planar boundary flattening `x → z → w → y`.
//!
//! * `z = (x₁, ρ(x))` with `ρ` a regularized distance to the graph boundary,
//! * `w = (z₁ − z₂ τ̃(z), z₂)` straightens the conormal of `A_(z)`,
//! * `y = L (w₁, σ w₂)` with `σ = D₂ρ / (μ̃₂ |Dρ|)` and a constant diagonal
//!   `L` chosen so the pushed matrix is a multiple of `I` at the origin.
//!
//! The pushed problem is then divided by `√det A(0)`, which makes `A(0) = I`
//! in two dimensions. Only `A` enters the construction.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use crate::coefficients::{CoefficientSet, EpsModulus, GraphRegion, MatrixField, Region, ScalarField};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Point};
use crate::quadrature::{gauss_legendre, QuadratureCounts};
use crate::solutions::{Provenance, Solution};

/// Mollifier width relative to the current distance.
pub const MOLLIFIER_THETA: f64 = 0.25;
/// Step of the finite-difference Jacobian of `Φ`.
pub const JACOBIAN_STEP: f64 = 1e-5;
/// Inverse-map tolerance and iteration cap.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_CAP: usize = 50;

type Chart = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Chart domain `{x₂ > φ(x₁), |x| < R}` with `φ(0) = φ′(0) = 0`.
#[derive(Clone)]
pub struct C11Domain {
    chart: Chart,
    pub chart_radius: f64,
    /// Sampled Lipschitz constant of `φ′` on `[−R, R]`.
    pub c11_norm: f64,
}

impl std::fmt::Debug for C11Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("C11Domain")
            .field("chart_radius", &self.chart_radius)
            .field("c11_norm", &self.c11_norm)
            .finish()
    }
}

impl C11Domain {
    /// `chart(t) = (φ(t), φ′(t))`.
    pub fn new(chart: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static, chart_radius: f64) -> Result<Self> {
        if !(chart_radius > 0.0 && chart_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("chart radius must be positive, got {chart_radius}")));
        }
        let (p0, d0) = chart(0.0);
        if p0.abs() > 1e-12 || d0.abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "chart must satisfy φ(0) = φ'(0) = 0, got ({p0}, {d0})"
            )));
        }
        let n = 2000;
        let mut lip: f64 = 0.0;
        let mut prev = chart(-chart_radius).1;
        for k in 1..=n {
            let t = -chart_radius + 2.0 * chart_radius * k as f64 / n as f64;
            let d = chart(t).1;
            if !d.is_finite() {
                return Err(Error::NonFinite(vec![t]));
            }
            lip = lip.max((d - prev).abs() / (2.0 * chart_radius / n as f64));
            prev = d;
        }
        Ok(Self {
            chart: Arc::new(chart),
            chart_radius,
            c11_norm: lip,
        })
    }

    pub fn half_plane(chart_radius: f64) -> Result<Self> {
        Self::new(|_| (0.0, 0.0), chart_radius)
    }

    /// `φ(t) = a t²`.
    pub fn parabola(a: f64, chart_radius: f64) -> Result<Self> {
        Self::new(move |t| (a * t * t, 2.0 * a * t), chart_radius)
    }

    pub fn phi(&self, t: f64) -> (f64, f64) {
        (self.chart)(t)
    }

    /// The domain as a coefficient region.
    pub fn region(&self) -> Region<2> {
        Region::Graph(GraphRegion {
            chart: self.chart.clone(),
            r_max: self.chart_radius,
        })
    }

    pub fn contains(&self, x: &Point<2>) -> bool {
        linalg::norm(x) <= self.chart_radius * (1.0 + 1e-12) && x[1] >= self.phi(x[0]).0 - 1e-12
    }

    /// Nearest boundary parameter `t`, signed distance (positive inside) and
    /// inward unit normal, by damped Newton on `|x − (t, φ(t))|²`.
    pub fn project(&self, x: &Point<2>) -> Result<(f64, f64, Point<2>)> {
        let objective = |t: f64| {
            let p = self.phi(t).0;
            (t - x[0]).powi(2) + (p - x[1]).powi(2)
        };
        let mut t = x[0];
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = self.phi(t);
            let h = 1e-6 * (1.0 + t.abs());
            let ddp = (self.phi(t + h).1 - self.phi(t - h).1) / (2.0 * h);
            let g = (t - x[0]) + (p - x[1]) * dp;
            let gp = 1.0 + dp * dp + (p - x[1]) * ddp;
            if g == 0.0 {
                converged = true;
                break;
            }
            let mut step = if gp > 0.1 { g / gp } else { g };
            let f0 = objective(t);
            let mut halvings = 0;
            // damping only away from the minimum, where `objective` resolves the step
            while step.abs() > 1e-6 * (1.0 + t.abs()) && objective(t - step) > f0 && halvings < 40 {
                step *= 0.5;
                halvings += 1;
            }
            t -= step;
            if step.abs() <= 1e-15 * (1.0 + t.abs()) {
                converged = true;
                break;
            }
        }
        let (p, dp) = self.phi(t);
        let g = (t - x[0]) + (p - x[1]) * dp;
        if !converged && g.abs() > 1e-10 * (1.0 + linalg::norm(x)) {
            return Err(Error::NewtonFailed(format!("projection of {x:?} onto the boundary")));
        }
        let s = (1.0 + dp * dp).sqrt();
        let n = [-dp / s, 1.0 / s];
        let d = (x[0] - t) * n[0] + (x[1] - p) * n[1];
        Ok((t, d, n))
    }
}

/// 64-node bump kernel on the unit disk, symmetric under `y ↦ −y`.
fn disk_kernel() -> &'static [([f64; 2], f64)] {
    static K: OnceLock<Vec<([f64; 2], f64)>> = OnceLock::new();
    K.get_or_init(|| {
        let gl = gauss_legendre(8).expect("fixed rule");
        let mut nodes = Vec::with_capacity(64);
        for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
            let s = 0.5 * (1.0 + x);
            let radial = 0.5 * w * s * (-1.0 / (1.0 - s * s)).exp();
            for j in 0..8 {
                let a = 2.0 * PI * (j as f64 + 0.5) / 8.0;
                nodes.push(([s * a.cos(), s * a.sin()], radial));
            }
        }
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        nodes.iter().map(|&(p, w)| (p, w / total)).collect()
    })
}

/// 64-node bump kernel on `[−1, 1]`, symmetric.
fn line_kernel() -> &'static [(f64, f64)] {
    static K: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    K.get_or_init(|| {
        let gl = gauss_legendre(64).expect("fixed rule");
        let raw: Vec<(f64, f64)> = gl
            .nodes
            .iter()
            .zip(&gl.weights)
            .map(|(&s, &w)| (s, w * (-1.0 / (1.0 - s * s)).exp()))
            .collect();
        let total: f64 = raw.iter().map(|n| n.1).sum();
        raw.iter().map(|&(s, w)| (s, w / total)).collect()
    })
}

/// `ρ(x) = Σ ψ_k d(x − θ d(x) y_k)` and its exact gradient.
fn rho_grad(dom: &C11Domain, x: &Point<2>) -> Result<(f64, Point<2>)> {
    let (_, d, n) = dom.project(x)?;
    if d == 0.0 {
        return Ok((0.0, n));
    }
    let width = MOLLIFIER_THETA * d;
    let mut rho = 0.0;
    let mut grad = [0.0; 2];
    for &(y, w) in disk_kernel() {
        let p = [x[0] - width * y[0], x[1] - width * y[1]];
        let (_, dk, nk) = dom.project(&p)?;
        rho += w * dk;
        let shift = MOLLIFIER_THETA * (nk[0] * y[0] + nk[1] * y[1]);
        grad[0] += w * (nk[0] - shift * n[0]);
        grad[1] += w * (nk[1] - shift * n[1]);
    }
    Ok((rho, grad))
}

/// `(ρ, Dρ, D²ρ)`; the Hessian by central differences of the exact gradient.
pub fn regularized_distance(dom: &C11Domain, x: &Point<2>) -> Result<(f64, Point<2>, Mat<2>)> {
    if !dom.contains(x) {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let (rho, grad) = rho_grad(dom, x)?;
    let h = 1e-5 * (1.0 + linalg::norm(x));
    let mut hess = [[0.0; 2]; 2];
    for j in 0..2 {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += h;
        xm[j] -= h;
        let (gp, gm) = (rho_grad(dom, &xp)?.1, rho_grad(dom, &xm)?.1);
        for i in 0..2 {
            hess[i][j] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    Ok((rho, grad, hess))
}

/// Sampled properties of the regularized distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceProperties {
    /// `min ρ/d` and `max ρ/d` over interior samples.
    pub lower: f64,
    pub upper: f64,
    /// `min |Dρ|` over boundary samples.
    pub min_boundary_gradient: f64,
    /// `max ρ |D³ρ|` over interior samples.
    pub third_derivative: f64,
}

pub fn distance_properties(dom: &C11Domain, samples: usize) -> Result<DistanceProperties> {
    let (interior, boundary) = dom.region().sample_points(samples);
    let mut lower = f64::INFINITY;
    let mut upper: f64 = 0.0;
    let mut third: f64 = 0.0;
    for x in &interior {
        let (_, d, _) = dom.project(x)?;
        if d <= 1e-3 * dom.chart_radius {
            continue;
        }
        let (rho, _) = rho_grad(dom, x)?;
        lower = lower.min(rho / d);
        upper = upper.max(rho / d);
        // second differences of the gradient at scale ρ/20
        let h = rho / 20.0;
        for j in 0..2 {
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += h;
            xm[j] -= h;
            let (gp, g0, gm) = (rho_grad(dom, &xp)?.1, rho_grad(dom, x)?.1, rho_grad(dom, &xm)?.1);
            for i in 0..2 {
                third = third.max(rho * ((gp[i] - 2.0 * g0[i] + gm[i]) / (h * h)).abs());
            }
        }
    }
    let mut min_grad = f64::INFINITY;
    for x in &boundary {
        min_grad = min_grad.min(linalg::norm(&rho_grad(dom, x)?.1));
    }
    Ok(DistanceProperties {
        lower,
        upper,
        min_boundary_gradient: min_grad,
        third_derivative: third,
    })
}

/// Result of the first change of variables at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step1 {
    pub z: Point<2>,
    /// `∂z/∂x`.
    pub jacobian: Mat<2>,
    /// `A_(z) = (∂z/∂x) A (∂z/∂x)ᵀ / D₂ρ`.
    pub a_z: Mat<2>,
    /// `V / D₂ρ`.
    pub v_z: f64,
    /// `|Dρ| / D₂ρ · η`, on boundary points only.
    pub eta_z: Option<f64>,
}

fn step1_jacobian(grad: &Point<2>) -> Mat<2> {
    [[1.0, 0.0], [grad[0], grad[1]]]
}

pub fn flatten_step1(dom: &C11Domain, cs: &CoefficientSet<2>, x: &Point<2>) -> Result<Step1> {
    if !dom.contains(x) {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let (rho, grad) = rho_grad(dom, x)?;
    if !(grad[1] > 1e-12) {
        return Err(Error::DegenerateNormalization(format!("D₂ρ = {} at {x:?}", grad[1])));
    }
    let j = step1_jacobian(&grad);
    let a_z = linalg::scale_mat(&linalg::congruence(&j, &cs.a(x)), 1.0 / grad[1]);
    let on_boundary = (x[1] - dom.phi(x[0]).0).abs() <= 1e-12;
    Ok(Step1 {
        z: [x[0], rho],
        jacobian: j,
        a_z,
        v_z: cs.v(x) / grad[1],
        eta_z: on_boundary.then(|| linalg::norm(&grad) / grad[1] * cs.eta(x)),
    })
}

/// `(τ, μ₂)` at the boundary point over `z₁`: with `m = A_(z) e₂` the inward
/// conormal, `τ = m₁/m₂` and `μ₂ = m₂`.
fn conormal_boundary(dom: &C11Domain, a: &MatrixField<2>, t: f64) -> (f64, f64) {
    let (p, dp) = dom.phi(t);
    let s = (1.0 + dp * dp).sqrt();
    let grad = [-dp / s, 1.0 / s];
    let a_z = linalg::scale_mat(&linalg::congruence(&step1_jacobian(&grad), &a.value(&[t, p])), 1.0 / grad[1]);
    (a_z[0][1] / a_z[1][1], a_z[1][1])
}

static NEXT_MAP_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static LOCATE_CACHE: RefCell<Option<(u64, [u64; 2], Point<2>, Mat<2>)>> = const { RefCell::new(None) };
}

/// The composite map `Φ = y ∘ w ∘ z` and the constants of its image.
#[derive(Clone)]
pub struct FlatteningMap {
    id: u64,
    pub domain: C11Domain,
    a: MatrixField<2>,
    /// Diagonal of `L`.
    pub normalization: [f64; 2],
    /// `√det A(0)`, divided out of the pushed problem.
    pub scale: f64,
    /// `∂Φ/∂x` at the origin.
    pub jacobian_at_origin: Mat<2>,
    /// `B⁺_{c₀r} ⊂ Φ(Ω_r) ⊂ B⁺_{C₀r}` on the sampled radii.
    pub c0: f64,
    pub big_c0: f64,
    /// Radius of a half-ball inside the image of the chart.
    pub image_radius: f64,
}

impl std::fmt::Debug for FlatteningMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlatteningMap")
            .field("domain", &self.domain)
            .field("normalization", &self.normalization)
            .field("scale", &self.scale)
            .field("c0", &self.c0)
            .field("big_c0", &self.big_c0)
            .finish()
    }
}

impl FlatteningMap {
    /// Build the map for the chart and the matrix of `cs`; `V` and `η` are
    /// not read.
    pub fn new(dom: &C11Domain, cs: &CoefficientSet<2>) -> Result<Self> {
        let a0 = cs.a(&[0.0, 0.0]);
        let det = linalg::det2(&a0);
        if !(det > 0.0) || linalg::sym_eigenvalues(&a0)[0] <= 0.0 {
            return Err(Error::DegenerateNormalization(format!("A(0) = {a0:?} is not positive definite")));
        }
        let mut map = Self {
            id: NEXT_MAP_ID.fetch_add(1, Ordering::Relaxed),
            domain: dom.clone(),
            a: cs.a_field().clone(),
            normalization: [1.0, 1.0],
            scale: det.sqrt(),
            jacobian_at_origin: linalg::identity(),
            c0: f64::NAN,
            big_c0: f64::NAN,
            image_radius: f64::NAN,
        };
        let k_raw = map.jacobian(&[0.0, 0.0])?;
        let pushed = linalg::scale_mat(&linalg::congruence(&k_raw, &a0), 1.0 / linalg::det2(&k_raw));
        if !(pushed[0][0] > 0.0 && pushed[1][1] > 0.0) {
            return Err(Error::DegenerateNormalization(format!("pushed A(0) = {pushed:?}")));
        }
        map.normalization = [1.0 / pushed[0][0].sqrt(), 1.0 / pushed[1][1].sqrt()];
        map.jacobian_at_origin = map.jacobian(&[0.0, 0.0])?;
        let (c0, big_c0) = map.sandwich_constants()?;
        map.c0 = c0;
        map.big_c0 = big_c0;
        map.image_radius = 0.9 * c0 * dom.chart_radius;
        Ok(map)
    }

    /// `(τ̃, μ̃₂)(z)`: boundary values extended constantly in `z₂` and
    /// mollified at scale `z₂/2`.
    pub fn conormal_data(&self, z: &Point<2>) -> (f64, f64) {
        if z[1] == 0.0 {
            return conormal_boundary(&self.domain, &self.a, z[0]);
        }
        let mut tau = 0.0;
        let mut mu = 0.0;
        for &(s, w) in line_kernel() {
            let (t, m) = conormal_boundary(&self.domain, &self.a, z[0] - 0.5 * z[1] * s);
            tau += w * t;
            mu += w * m;
        }
        (tau, mu)
    }

    /// `Φ(x)`.
    pub fn forward(&self, x: &Point<2>) -> Result<Point<2>> {
        let (rho, grad) = rho_grad(&self.domain, x)?;
        if !(grad[1] > 1e-12) {
            return Err(Error::DegenerateNormalization(format!("D₂ρ = {} at {x:?}", grad[1])));
        }
        let (tau, mu) = self.conormal_data(&[x[0], rho]);
        let w1 = x[0] - rho * tau;
        let sigma = grad[1] / (mu * linalg::norm(&grad));
        Ok([self.normalization[0] * w1, self.normalization[1] * sigma * rho])
    }

    /// `∂Φ/∂x` by fourth-order central differences.
    pub fn jacobian(&self, x: &Point<2>) -> Result<Mat<2>> {
        let h = JACOBIAN_STEP;
        let mut j = [[0.0; 2]; 2];
        for k in 0..2 {
            let at = |s: f64| {
                let mut p = *x;
                p[k] += s;
                self.forward(&p)
            };
            let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
            for i in 0..2 {
                j[i][k] = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h);
            }
        }
        Ok(j)
    }

    /// `Φ⁻¹(y)` by Newton's method.
    pub fn inverse(&self, y: &Point<2>) -> Result<Point<2>> {
        let j0 = linalg::inv2(&self.jacobian_at_origin)
            .ok_or_else(|| Error::DegenerateNormalization("singular Jacobian at the origin".into()))?;
        let mut x = linalg::mat_vec(&j0, y);
        let scale = 1.0 + linalg::norm(y);
        for _ in 0..NEWTON_CAP {
            let f = self.forward(&x)?;
            let r = [f[0] - y[0], f[1] - y[1]];
            if linalg::norm(&r) <= 0.01 * NEWTON_TOL * scale {
                return Ok(x);
            }
            let h = 1e-7;
            let mut j = [[0.0; 2]; 2];
            for k in 0..2 {
                let mut p = x;
                let mut m = x;
                p[k] += h;
                m[k] -= h;
                let (fp, fm) = (self.forward(&p)?, self.forward(&m)?);
                for i in 0..2 {
                    j[i][k] = (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            let ji = linalg::inv2(&j).ok_or_else(|| Error::NewtonFailed(format!("singular Jacobian at {x:?}")))?;
            let step = linalg::mat_vec(&ji, &r);
            x = [x[0] - step[0], x[1] - step[1]];
            if linalg::norm(&step) <= 1e-15 * (1.0 + linalg::norm(&x)) {
                let f = self.forward(&x)?;
                if (f[0] - y[0]).hypot(f[1] - y[1]) <= NEWTON_TOL * scale {
                    return Ok(x);
                }
            }
        }
        let f = self.forward(&x)?;
        if (f[0] - y[0]).hypot(f[1] - y[1]) <= NEWTON_TOL * scale {
            return Ok(x);
        }
        Err(Error::NewtonFailed(format!("inverse of Φ at {y:?}")))
    }

    /// `(Φ⁻¹(y), ∂Φ/∂x at Φ⁻¹(y))`, cached per thread for repeated `y`.
    pub fn locate(&self, y: &Point<2>) -> Result<(Point<2>, Mat<2>)> {
        let key = [y[0].to_bits(), y[1].to_bits()];
        let hit = LOCATE_CACHE.with(|c| match *c.borrow() {
            Some((id, k, x, j)) if id == self.id && k == key => Some((x, j)),
            _ => None,
        });
        if let Some(v) = hit {
            return Ok(v);
        }
        let x = self.inverse(y)?;
        let j = self.jacobian(&x)?;
        LOCATE_CACHE.with(|c| *c.borrow_mut() = Some((self.id, key, x, j)));
        Ok((x, j))
    }

    fn sandwich_constants(&self) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for r in sandwich_radii(self.domain.chart_radius) {
            for x in arc_points(&self.domain, r, 64)? {
                let q = linalg::norm(&self.forward(&x)?) / r;
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
        Ok((lo, hi))
    }

    /// Check `B⁺_{c₀r/2} ⊂ Φ(Ω_{r/2}) ⊂ Φ(Ω_r) ⊂ B⁺_{C₀r}` on the sampled radii:
    /// the image of each arc `|x| = s` must stay between the two balls.
    pub fn inclusion_holds(&self) -> Result<bool> {
        for r in sandwich_radii(self.domain.chart_radius) {
            for x in arc_points(&self.domain, 0.5 * r, 64)? {
                if linalg::norm(&self.forward(&x)?) < self.c0 * r / 2.0 * (1.0 - 1e-12) {
                    return Ok(false);
                }
            }
            for x in arc_points(&self.domain, r, 64)? {
                if linalg::norm(&self.forward(&x)?) > self.big_c0 * r * (1.0 + 1e-12) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Largest `|m × v| / (|m| |v|)` at boundary samples, where `v = ∂z/∂y e₂`
    /// and `m = A_(z) e₂`: zero when `∂/∂y₂` is pushed onto the conormal.
    pub fn pushforward_residual(&self, samples: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let reach = 0.5 * self.domain.chart_radius;
        for k in 0..samples {
            let t = -reach + 2.0 * reach * (k as f64 + 0.5) / samples as f64;
            let x = [t, self.domain.phi(t).0];
            let (_, grad) = rho_grad(&self.domain, &x)?;
            let jz = step1_jacobian(&grad);
            let jy = linalg::inv2(&self.jacobian(&x)?)
                .ok_or_else(|| Error::DegenerateNormalization(format!("singular Jacobian at {x:?}")))?;
            let dzdy = linalg::mat_mul(&jz, &jy);
            let v = [dzdy[0][1], dzdy[1][1]];
            let a_z = linalg::scale_mat(&linalg::congruence(&jz, &self.a.value(&x)), 1.0 / grad[1]);
            let m = [a_z[0][1], a_z[1][1]];
            worst = worst.max((m[0] * v[1] - m[1] * v[0]).abs() / (linalg::norm(&m) * linalg::norm(&v)));
        }
        Ok(worst)
    }

    /// Largest `z₂^{k−1} |∂^k τ̃|` and the same for `μ̃₂`, `k = 1, 2`, over
    /// interior samples; errors when a value is not finite.
    pub fn mollifier_bounds(&self) -> Result<[f64; 2]> {
        let mut out = [0.0f64; 2];
        let r = 0.5 * self.domain.chart_radius;
        for i in 0..8 {
            for j in 1..=8 {
                let z = [r * (2.0 * i as f64 / 7.0 - 1.0), r * j as f64 / 8.0];
                let h = 0.01 * z[1];
                for k in 0..2 {
                    let at = |s: f64| {
                        let mut p = z;
                        p[k] += s;
                        self.conormal_data(&p)
                    };
                    let (p, c, m) = (at(h), at(0.0), at(-h));
                    let d1 = [((p.0 - m.0) / (2.0 * h)).abs(), ((p.1 - m.1) / (2.0 * h)).abs()];
                    let d2 = [
                        ((p.0 - 2.0 * c.0 + m.0) / (h * h)).abs() * z[1],
                        ((p.1 - 2.0 * c.1 + m.1) / (h * h)).abs() * z[1],
                    ];
                    for q in 0..2 {
                        if !(d1[q].is_finite() && d2[q].is_finite()) {
                            return Err(Error::MollifierBound(format!("non-finite derivative at {z:?}")));
                        }
                        out[q] = out[q].max(d1[q]).max(d2[q]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Plain-text record of the construction choices.
    pub fn metadata(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "chart_radius = {:?}", self.domain.chart_radius);
        let _ = writeln!(s, "c11_norm = {:?}", self.domain.c11_norm);
        let _ = writeln!(s, "distance_kernel = bump on unit disk, 8 radial x 8 angular nodes");
        let _ = writeln!(s, "distance_width = {MOLLIFIER_THETA} * d(x)");
        let _ = writeln!(s, "conormal_kernel = bump on [-1, 1], 64 Gauss-Legendre nodes, width z2/2");
        let _ = writeln!(s, "conormal = inward, m = A_z e2, tau = m1/m2, mu = m2");
        let _ = writeln!(s, "y2_scale = D2 rho / (mu |D rho|)");
        let _ = writeln!(s, "normalization = {:?}", self.normalization);
        let _ = writeln!(s, "scale = {:?}", self.scale);
        let _ = writeln!(s, "c0 = {:?}", self.c0);
        let _ = writeln!(s, "C0 = {:?}", self.big_c0);
        s
    }
}

fn sandwich_radii(chart_radius: f64) -> Vec<f64> {
    [0.1, 0.2, 0.3, 0.4, 0.5]
        .into_iter()
        .map(|s| s * chart_radius.min(1.0))
        .collect()
}

/// Points of `{|x| = r} ∩ closure of the domain`, boundary ends included.
fn arc_points(dom: &C11Domain, r: f64, count: usize) -> Result<Vec<Point<2>>> {
    // boundary crossing on each side: |(t, φ(t))| = r
    let crossing = |sign: f64| -> f64 {
        let (mut lo, mut hi) = (0.0, r);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let t = sign * mid;
            if t.hypot(dom.phi(t).0) < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        sign * 0.5 * (lo + hi)
    };
    let (tr, tl) = (crossing(1.0), crossing(-1.0));
    let a0 = dom.phi(tr).0.atan2(tr);
    let mut a1 = dom.phi(tl).0.atan2(tl);
    if a1 < a0 {
        a1 += 2.0 * PI;
    }
    Ok((0..count)
        .map(|k| {
            let a = a0 + (a1 - a0) * k as f64 / (count - 1) as f64;
            [r * a.cos(), r * a.sin()]
        })
        .collect())
}

/// Sample-based bounds for a pushed set.
fn pushed_bounds(a: &MatrixField<2>, v: &ScalarField<2>, eta: &ScalarField<2>, radius: f64) -> (f64, f64, f64, f64) {
    let mut lambda = f64::INFINITY;
    let mut big: f64 = 0.0;
    let mut sup_v: f64 = 0.0;
    let mut sup_dv: f64 = 0.0;
    let mut lip: f64 = 0.0;
    for i in 0..6 {
        for j in 0..6 {
            let s = radius * (0.1 + 0.8 * i as f64 / 5.0);
            let th = PI * (0.1 + 0.8 * j as f64 / 5.0);
            let x = [s * th.cos(), s * th.sin()];
            let ev = linalg::sym_eigenvalues(&a.value(&x));
            lambda = lambda.min(ev[0]);
            big = big.max(ev[1]);
            sup_v = sup_v.max(v.value(&x).abs());
            sup_dv = sup_dv.max(linalg::norm(&v.gradient(&x)));
            lip = lip.max(crate::coefficients::derivative_norm(&a.gradient(&x)));
        }
    }
    let mut sup_eta: f64 = 0.0;
    let mut sup_deta: f64 = 0.0;
    for k in 0..16 {
        let x = [radius * (2.0 * (k as f64 + 0.5) / 16.0 - 1.0), 0.0];
        sup_eta = sup_eta.max(eta.value(&x).abs());
        sup_deta = sup_deta.max(eta.gradient(&x)[0].abs());
    }
    (lambda.min(1.0 / big), sup_v + sup_dv, sup_eta + sup_deta, lip)
}

/// The problem in `y` coordinates on `B⁺_{image_radius}`:
/// `A_y = K A Kᵀ / (det K · s)`, `V_y = V / (det K · s)` and
/// `η_y = η / (|K T| · s)` with `K = ∂Φ/∂x`, `T` the unit boundary tangent
/// and `s = √det A(0)`.
pub fn pushforward_problem(cs: &CoefficientSet<2>, map: &FlatteningMap) -> Result<CoefficientSet<2>> {
    if linalg::max_abs_diff(&cs.a(&[0.0, 0.0]), &map.a.value(&[0.0, 0.0])) != 0.0 {
        return Err(Error::InvalidParameter("the map was built for a different matrix field".into()));
    }
    let s = map.scale;
    let (ma, mv, me) = (map.clone(), map.clone(), map.clone());
    let (ca, cv, ce) = (cs.clone(), cs.clone(), cs.clone());
    let a = MatrixField::new(move |y: &Point<2>| match ma.locate(y) {
        Ok((x, k)) => linalg::scale_mat(&linalg::congruence(&k, &ca.a(&x)), 1.0 / (linalg::det2(&k) * s)),
        Err(_) => [[f64::NAN; 2]; 2],
    });
    let v = ScalarField::new(move |y: &Point<2>| match mv.locate(y) {
        Ok((x, k)) => cv.v(&x) / (linalg::det2(&k) * s),
        Err(_) => f64::NAN,
    });
    let eta = ScalarField::new(move |y: &Point<2>| match me.locate(y) {
        Ok((x, k)) => {
            let dp = me.domain.phi(x[0]).1;
            let n = (1.0 + dp * dp).sqrt();
            let t = linalg::mat_vec(&k, &[1.0 / n, dp / n]);
            ce.eta(&x) / (linalg::norm(&t) * s)
        }
        Err(_) => f64::NAN,
    });
    let radius = map.image_radius;
    let (lambda, m, m_eta, lip) = pushed_bounds(&a, &v, &eta, radius);
    Ok(CoefficientSet::with_declared_bounds(
        format!("{}-flattened", cs.name),
        a,
        v,
        eta,
        Region::half_ball(radius),
        lambda,
        m,
        m_eta,
        EpsModulus::lipschitz(lip),
    ))
}

/// Counts for the residual of a transformed solution.
pub const TRANSFORMED_COUNTS: QuadratureCounts = QuadratureCounts { n_rad: 16, n_ang: 32 };

/// `u ∘ Φ⁻¹` with the pushed problem; its weak residual is measured.
pub fn transform_solution(sol: &Solution<2>, map: &FlatteningMap) -> Result<Solution<2>> {
    let cs = pushforward_problem(&sol.coefficients, map)?;
    let (m, inner) = (map.clone(), sol.clone());
    let field = Arc::new(move |y: &Point<2>| match m.locate(y) {
        Ok((x, k)) => {
            let (u, du) = inner.value_grad(&x);
            // D_y u = K^{-T} D_x u
            match linalg::inv2(&linalg::transpose(&k)) {
                Some(kit) => (u, linalg::mat_vec(&kit, &du)),
                None => (f64::NAN, [f64::NAN; 2]),
            }
        }
        Err(_) => (f64::NAN, [f64::NAN; 2]),
    });
    let prov = Provenance::Transformed(Box::new(sol.provenance.clone()));
    Solution::new(format!("{}-flattened", sol.name), field, prov, cs).with_measured_residual(TRANSFORMED_COUNTS)
}
