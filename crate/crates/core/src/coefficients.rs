//! Coefficient data `(A, V, η)` of the Robin problem and the scalar bounds
//! `λ`, `M`, `M_η`, `ε(r)`, `I_ε` consumed by the frequency estimates.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, central_diff, fd_step, Mat, Point};

pub type ScalarFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> f64 + Send + Sync>;
pub type GradFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> Point<D> + Send + Sync>;
pub type MatrixFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> Mat<D> + Send + Sync>;
/// `dA[k][i][j] = ∂_k a_ij`.
pub type MatrixGradFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> [Mat<D>; D] + Send + Sync>;
/// A function returning `(u, Du)`.
pub type FieldFn<const D: usize> = Arc<dyn Fn(&Point<D>) -> (f64, Point<D>) + Send + Sync>;

/// Scalar field with an optional analytic gradient. Without one, gradients
/// fall back to fourth-order central differences with step `1e-5 (1 + |x|)`.
#[derive(Clone)]
pub struct ScalarField<const D: usize> {
    value: ScalarFn<D>,
    gradient: Option<GradFn<D>>,
    constant: Option<f64>,
}

impl<const D: usize> fmt::Debug for ScalarField<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("analytic_gradient", &self.gradient.is_some())
            .field("constant", &self.constant)
            .finish()
    }
}

impl<const D: usize> ScalarField<D> {
    pub fn new(value: impl Fn(&Point<D>) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
            constant: None,
        }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&Point<D>) -> Point<D> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn constant(c: f64) -> Self {
        Self {
            value: Arc::new(move |_| c),
            gradient: Some(Arc::new(|_| [0.0; D])),
            constant: Some(c),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// The value when the field was built with [`ScalarField::constant`].
    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    #[inline]
    pub fn value(&self, x: &Point<D>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Point<D>) -> Point<D> {
        match &self.gradient {
            Some(g) => g(x),
            None => self.fd_gradient(x),
        }
    }

    pub fn fd_gradient(&self, x: &Point<D>) -> Point<D> {
        let h = fd_step(x);
        let f = |y: &Point<D>| (self.value)(y);
        let mut g = [0.0; D];
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = central_diff(&f, x, i, h);
        }
        g
    }

    pub fn scaled(&self, s: f64) -> Self {
        let value = self.value.clone();
        let gradient = self.gradient.clone();
        Self {
            value: Arc::new(move |x| s * value(x)),
            gradient: gradient.map(|g| -> GradFn<D> {
                Arc::new(move |x| {
                    let mut v = g(x);
                    v.iter_mut().for_each(|c| *c *= s);
                    v
                })
            }),
            constant: self.constant.map(|c| s * c),
        }
    }
}

/// Symmetric-matrix field with an optional analytic derivative.
#[derive(Clone)]
pub struct MatrixField<const D: usize> {
    value: MatrixFn<D>,
    gradient: Option<MatrixGradFn<D>>,
}

impl<const D: usize> fmt::Debug for MatrixField<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixField")
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl<const D: usize> MatrixField<D> {
    pub fn new(value: impl Fn(&Point<D>) -> Mat<D> + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&Point<D>) -> [Mat<D>; D] + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn constant(m: Mat<D>) -> Self {
        Self::new(move |_| m).with_gradient(|_| [[[0.0; D]; D]; D])
    }

    pub fn identity() -> Self {
        Self::constant(linalg::identity())
    }

    #[inline]
    pub fn value(&self, x: &Point<D>) -> Mat<D> {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Point<D>) -> [Mat<D>; D] {
        match &self.gradient {
            Some(g) => g(x),
            None => self.fd_gradient(x),
        }
    }

    pub fn fd_gradient(&self, x: &Point<D>) -> [Mat<D>; D] {
        let h = fd_step(x);
        let mut out = [[[0.0; D]; D]; D];
        for (k, dk) in out.iter_mut().enumerate() {
            let at = |s: f64| {
                let mut y = *x;
                y[k] += s;
                (self.value)(&y)
            };
            let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
            for i in 0..D {
                for j in 0..D {
                    dk[i][j] = (-p2[i][j] + 8.0 * p1[i][j] - 8.0 * m1[i][j] + m2[i][j]) / (12.0 * h);
                }
            }
        }
        out
    }
}

/// `max_{ij} |D a_ij(x)|` with the Euclidean norm of each entry's gradient.
pub fn derivative_norm<const D: usize>(da: &[Mat<D>; D]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..D {
        for j in 0..D {
            let g2: f64 = (0..D).map(|k| da[k][i][j] * da[k][i][j]).sum();
            worst = worst.max(g2.sqrt());
        }
    }
    worst
}

/// Modulus of continuity `ε(r)` controlling `|x| |DA(x)| ≤ ε(|x|)`.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsModulus {
    Zero,
    /// `c r^q` with `q > 0`.
    Power { coefficient: f64, exponent: f64 },
    /// Piecewise-linear interpolant through `(r_k, ε_k)` (ascending `r`),
    /// through the origin below the first node, constant past the last.
    Table(Vec<(f64, f64)>),
}

impl EpsModulus {
    pub fn lipschitz(l: f64) -> Self {
        EpsModulus::Power {
            coefficient: l.abs(),
            exponent: 1.0,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            EpsModulus::Zero => 0.0,
            EpsModulus::Power { coefficient, exponent } => coefficient * r.max(0.0).powf(*exponent),
            EpsModulus::Table(nodes) => {
                let Some(&(r0, e0)) = nodes.first() else { return 0.0 };
                if r <= r0 {
                    return e0 * r.max(0.0) / r0;
                }
                for w in nodes.windows(2) {
                    let ((ra, ea), (rb, eb)) = (w[0], w[1]);
                    if r <= rb {
                        return ea + (eb - ea) * (r - ra) / (rb - ra);
                    }
                }
                nodes.last().map(|n| n.1).unwrap_or(0.0)
            }
        }
    }

    /// `∫_0^1 ε(r)/r dr`, exact for each variant.
    pub fn dini_integral(&self) -> f64 {
        self.dini_integral_to(1.0)
    }

    /// `∫_0^R ε(r)/r dr`.
    pub fn dini_integral_to(&self, upper: f64) -> f64 {
        if upper <= 0.0 {
            return 0.0;
        }
        match self {
            EpsModulus::Zero => 0.0,
            EpsModulus::Power { coefficient, exponent } => coefficient * upper.powf(*exponent) / exponent,
            EpsModulus::Table(nodes) => {
                let Some(&(r0, e0)) = nodes.first() else { return 0.0 };
                // first piece ε = e0 r / r0
                if upper <= r0 {
                    return e0 * upper / r0;
                }
                let mut total = e0;
                for w in nodes.windows(2) {
                    let ((ra, ea), (rb, eb)) = (w[0], w[1]);
                    let top = upper.min(rb);
                    let slope = (eb - ea) / (rb - ra);
                    let intercept = ea - slope * ra;
                    total += intercept * (top / ra).ln() + slope * (top - ra);
                    if upper <= rb {
                        return total;
                    }
                }
                let &(rl, el) = nodes.last().unwrap();
                total + el * (upper / rl).ln()
            }
        }
    }
}

/// Closed half-ball `{|x| ≤ r_max, x_d ≥ 0}` with flat face `Γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfBallDomain<const D: usize> {
    pub r_max: f64,
}

impl<const D: usize> HalfBallDomain<D> {
    pub fn new(r_max: f64) -> Self {
        Self { r_max }
    }

    pub fn dimension(&self) -> usize {
        D
    }
}

/// Chart `{x_d > φ(x_1)}` intersected with `|x| ≤ r_max` (planar use).
#[derive(Clone)]
pub struct GraphRegion {
    /// Returns `(φ(t), φ'(t))`.
    pub chart: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
    pub r_max: f64,
}

impl fmt::Debug for GraphRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphRegion").field("r_max", &self.r_max).finish()
    }
}

#[derive(Debug, Clone)]
pub enum Region<const D: usize> {
    HalfBall(HalfBallDomain<D>),
    Graph(GraphRegion),
}

const DOMAIN_TOL: f64 = 1e-12;

impl<const D: usize> Region<D> {
    pub fn half_ball(r_max: f64) -> Self {
        Region::HalfBall(HalfBallDomain::new(r_max))
    }

    pub fn r_max(&self) -> f64 {
        match self {
            Region::HalfBall(h) => h.r_max,
            Region::Graph(g) => g.r_max,
        }
    }

    fn boundary_height(&self, x: &Point<D>) -> f64 {
        match self {
            Region::HalfBall(_) => 0.0,
            Region::Graph(g) => (g.chart)(x[0]).0,
        }
    }

    pub fn contains(&self, x: &Point<D>) -> bool {
        let r = self.r_max();
        linalg::norm(x) <= r * (1.0 + DOMAIN_TOL) + DOMAIN_TOL
            && x[D - 1] >= self.boundary_height(x) - DOMAIN_TOL * (1.0 + r)
    }

    pub fn on_boundary(&self, x: &Point<D>) -> bool {
        self.contains(x) && (x[D - 1] - self.boundary_height(x)).abs() <= 1e-9 * (1.0 + self.r_max())
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, x: &Point<D>) -> Point<D> {
        let mut n = [0.0; D];
        match self {
            Region::HalfBall(_) => n[D - 1] = -1.0,
            Region::Graph(g) => {
                let (_, dphi) = (g.chart)(x[0]);
                let s = (1.0 + dphi * dphi).sqrt();
                n[0] = dphi / s;
                n[D - 1] = -1.0 / s;
            }
        }
        n
    }

    /// Deterministic interior and boundary sample points, roughly `count` of each.
    pub fn sample_points(&self, count: usize) -> (Vec<Point<D>>, Vec<Point<D>>) {
        let r = self.r_max();
        let per_axis = ((count as f64).powf(1.0 / D as f64).ceil() as usize).max(2);
        let mut interior = Vec::new();
        let total = per_axis.pow(D as u32);
        for idx in 0..total {
            let mut x = [0.0; D];
            let mut rem = idx;
            for (k, xk) in x.iter_mut().enumerate() {
                let i = rem % per_axis;
                rem /= per_axis;
                let s = i as f64 / (per_axis - 1) as f64;
                *xk = if k == D - 1 { s * r } else { (2.0 * s - 1.0) * r };
            }
            if linalg::norm(&x) <= r {
                x[D - 1] += self.boundary_height(&x);
                if linalg::norm(&x) <= r {
                    interior.push(x);
                }
            }
        }
        let per_face = ((count as f64).powf(1.0 / (D as f64 - 1.0)).ceil() as usize).max(2);
        let mut boundary = Vec::new();
        for idx in 0..per_face.pow(D as u32 - 1) {
            let mut x = [0.0; D];
            let mut rem = idx;
            for xk in x.iter_mut().take(D - 1) {
                let i = rem % per_face;
                rem /= per_face;
                *xk = (2.0 * i as f64 / (per_face - 1) as f64 - 1.0) * r;
            }
            x[D - 1] = self.boundary_height(&x);
            if linalg::norm(&x) <= r {
                boundary.push(x);
            }
        }
        (interior, boundary)
    }
}

/// Everything known about `A`, `V`, `η` at one point.
#[derive(Debug, Clone, Copy)]
pub struct PointEval<const D: usize> {
    pub a: Mat<D>,
    pub da: [Mat<D>; D],
    pub v: f64,
    pub dv: Point<D>,
}

/// Coefficients of `div(A Du) = V u`, `A Du · n = η u`, with their bounds.
#[derive(Clone, Debug)]
pub struct CoefficientSet<const D: usize> {
    pub name: String,
    a: MatrixField<D>,
    v: ScalarField<D>,
    eta: ScalarField<D>,
    pub lambda: f64,
    pub m: f64,
    pub m_eta: f64,
    pub eps: EpsModulus,
    pub i_eps: f64,
    pub region: Region<D>,
}

impl<const D: usize> CoefficientSet<D> {
    /// Assemble a set with every bound estimated from samples.
    pub fn from_fields(
        name: impl Into<String>,
        a: MatrixField<D>,
        v: ScalarField<D>,
        eta: ScalarField<D>,
        region: Region<D>,
    ) -> Result<Self> {
        let mut cs = Self {
            name: name.into(),
            a,
            v,
            eta,
            lambda: 1.0,
            m: 0.0,
            m_eta: 0.0,
            eps: EpsModulus::Zero,
            i_eps: 0.0,
            region,
        };
        let est = estimate_bounds(&cs, 1024)?;
        cs.lambda = est.lambda;
        cs.m = est.m;
        cs.m_eta = est.m_eta;
        cs.eps = est.eps;
        cs.i_eps = est.i_eps;
        Ok(cs)
    }

    /// Assemble a set with declared bounds (no sampling).
    #[allow(clippy::too_many_arguments)]
    pub fn with_declared_bounds(
        name: impl Into<String>,
        a: MatrixField<D>,
        v: ScalarField<D>,
        eta: ScalarField<D>,
        region: Region<D>,
        lambda: f64,
        m: f64,
        m_eta: f64,
        eps: EpsModulus,
    ) -> Self {
        let i_eps = eps.dini_integral();
        Self {
            name: name.into(),
            a,
            v,
            eta,
            lambda,
            m,
            m_eta,
            eps,
            i_eps,
            region,
        }
    }

    pub fn a_field(&self) -> &MatrixField<D> {
        &self.a
    }

    pub fn v_field(&self) -> &ScalarField<D> {
        &self.v
    }

    pub fn eta_field(&self) -> &ScalarField<D> {
        &self.eta
    }

    /// Replace `V` and `η`, keeping `A` and the ellipticity/modulus data.
    /// `M` and `M_η` are re-estimated from samples.
    pub fn with_lower_order(&self, name: impl Into<String>, v: ScalarField<D>, eta: ScalarField<D>) -> Result<Self> {
        let mut cs = self.clone();
        cs.name = name.into();
        cs.v = v;
        cs.eta = eta;
        let est = estimate_bounds(&cs, 1024)?;
        cs.m = est.m;
        cs.m_eta = est.m_eta;
        Ok(cs)
    }

    /// Same set with `V` replaced by `s V`; `M` scales by `|s|`.
    pub fn with_scaled_potential(&self, s: f64) -> Self {
        let mut cs = self.clone();
        cs.v = self.v.scaled(s);
        cs.m = self.m * s.abs();
        cs
    }

    #[inline]
    pub fn a(&self, x: &Point<D>) -> Mat<D> {
        self.a.value(x)
    }

    pub fn da(&self, x: &Point<D>) -> [Mat<D>; D] {
        self.a.gradient(x)
    }

    #[inline]
    pub fn v(&self, x: &Point<D>) -> f64 {
        self.v.value(x)
    }

    #[inline]
    pub fn eta(&self, x: &Point<D>) -> f64 {
        self.eta.value(x)
    }

    /// Tangential part of `Dη` at a boundary point.
    pub fn deta_tangential(&self, x: &Point<D>) -> Point<D> {
        let g = self.eta.gradient(x);
        let n = self.region.outward_normal(x);
        let gn = linalg::dot(&g, &n);
        let mut t = g;
        for k in 0..D {
            t[k] -= gn * n[k];
        }
        t
    }

    /// `(A, DA, V, DV)` at an interior or boundary point.
    pub fn eval(&self, x: &Point<D>) -> Result<PointEval<D>> {
        if !self.region.contains(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        Ok(PointEval {
            a: self.a(x),
            da: self.da(x),
            v: self.v(x),
            dv: self.v.gradient(x),
        })
    }

    /// `(η, D_T η)` at a boundary point.
    pub fn eval_eta(&self, x: &Point<D>) -> Result<(f64, Point<D>)> {
        if !self.region.on_boundary(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        Ok((self.eta(x), self.deta_tangential(x)))
    }

    /// Whether `η` was declared as a constant, and its value.
    pub fn constant_eta(&self) -> Option<f64> {
        self.eta.as_constant()
    }
}

/// Sampled bounds for a coefficient set.
#[derive(Debug, Clone)]
pub struct BoundsEstimate {
    pub lambda: f64,
    pub m: f64,
    pub m_eta: f64,
    /// `(r, ε̂(r))` at the outer radii of the dyadic annuli, ascending.
    pub eps_samples: Vec<(f64, f64)>,
    pub eps: EpsModulus,
    pub i_eps: f64,
}

const ANNULI: usize = 20;
const ANNULUS_RADII: usize = 8;
const ANNULUS_ANGLES: usize = 8;

/// Estimate `λ`, `M`, `M_η`, `ε` and `I_ε` by sampling.
///
/// `ε̂(r)` is the largest `|x| |DA(x)|` over 64 fixed points of the annulus
/// `r/2 ≤ |x| ≤ r`, for the 20 dyadic radii `r = 2^{-j}`. This is an
/// estimate, not a certificate.
pub fn estimate_bounds<const D: usize>(cs: &CoefficientSet<D>, sample_count: usize) -> Result<BoundsEstimate> {
    let (interior, boundary) = cs.region.sample_points(sample_count);
    let mut min_eig = f64::INFINITY;
    let mut max_eig: f64 = 0.0;
    let mut sup_v: f64 = 0.0;
    let mut sup_dv: f64 = 0.0;
    for x in interior.iter().chain(&boundary) {
        let a = cs.a(x);
        let scale = a.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        if linalg::asymmetry(&a) > 1e-12 * scale {
            return Err(Error::Ellipticity {
                point: x.to_vec(),
                reason: "matrix is not symmetric".into(),
            });
        }
        let ev = linalg::sym_eigenvalues(&a);
        if !(ev[0] > 0.0) {
            return Err(Error::Ellipticity {
                point: x.to_vec(),
                reason: format!("smallest eigenvalue {} is not positive", ev[0]),
            });
        }
        min_eig = min_eig.min(ev[0]);
        max_eig = max_eig.max(ev[D - 1]);
        sup_v = sup_v.max(cs.v(x).abs());
        sup_dv = sup_dv.max(linalg::norm(&cs.v.gradient(x)));
    }
    let mut sup_eta: f64 = 0.0;
    let mut sup_deta: f64 = 0.0;
    for x in &boundary {
        sup_eta = sup_eta.max(cs.eta(x).abs());
        sup_deta = sup_deta.max(linalg::norm(&cs.deta_tangential(x)));
    }

    let r_top = cs.region.r_max().min(1.0);
    let mut eps_samples = Vec::with_capacity(ANNULI);
    for j in (0..ANNULI).rev() {
        let outer = r_top * 0.5f64.powi(j as i32);
        let mut sup: f64 = 0.0;
        for i in 0..ANNULUS_RADII {
            let s = outer * (0.5 + 0.5 * i as f64 / (ANNULUS_RADII - 1) as f64);
            for k in 0..ANNULUS_ANGLES {
                let theta = std::f64::consts::PI * k as f64 / (ANNULUS_ANGLES - 1) as f64;
                let mut x = [0.0; D];
                x[k % (D - 1)] = s * theta.cos();
                x[D - 1] = s * theta.sin();
                if let Region::Graph(_) = cs.region {
                    x[D - 1] += cs.region.boundary_height(&x);
                }
                let norm = linalg::norm(&x);
                sup = sup.max(norm * derivative_norm(&cs.da(&x)));
            }
        }
        eps_samples.push((outer, sup));
    }
    let eps = if eps_samples.iter().all(|&(_, e)| e == 0.0) {
        EpsModulus::Zero
    } else {
        EpsModulus::Table(eps_samples.clone())
    };
    let i_eps = eps.dini_integral();
    Ok(BoundsEstimate {
        lambda: min_eig.min(1.0 / max_eig),
        m: sup_v + sup_dv,
        m_eta: sup_eta + sup_deta,
        eps_samples,
        eps,
        i_eps,
    })
}

/// Build `(V, η)` so that `u` solves the Robin problem with the given `A`:
/// `V = div(A Du)/u` inside and `η = ⟨A Du, n⟩/u` on the boundary.
///
/// `u_min` defaults to `1e-6 max|u|`; the set is refused if `|u|` drops below
/// it anywhere on the sampled closed domain or if `u` changes sign there.
pub fn manufacture_from_field<const D: usize>(
    name: impl Into<String>,
    u: FieldFn<D>,
    a: MatrixField<D>,
    region: Region<D>,
    u_min: Option<f64>,
) -> Result<CoefficientSet<D>> {
    let (interior, boundary) = region.sample_points(4096);
    let max_u = interior
        .iter()
        .chain(&boundary)
        .map(|x| u(x).0.abs())
        .fold(0.0f64, f64::max);
    let threshold = u_min.unwrap_or(1e-6 * max_u);
    let sign = u(&interior[0]).0.signum();
    for x in interior.iter().chain(&boundary) {
        let value = u(x).0;
        // a sign change means u vanishes between samples
        if !(value.abs() >= threshold) || value == 0.0 || value.signum() != sign {
            return Err(Error::SmallSolution {
                value: value.abs(),
                threshold,
                point: x.to_vec(),
            });
        }
    }
    let (uv, av) = (u.clone(), a.clone());
    let v = ScalarField::new(move |x: &Point<D>| {
        let h = 1e-4 * (1.0 + linalg::norm(x));
        let mut div = 0.0;
        for i in 0..D {
            let flux_i = |y: &Point<D>| linalg::mat_vec(&av.value(y), &uv(y).1)[i];
            div += central_diff(&flux_i, x, i, h);
        }
        div / uv(x).0
    });
    let (ue, ae, re) = (u.clone(), a.clone(), region.clone());
    let eta = ScalarField::new(move |x: &Point<D>| {
        let (val, du) = ue(x);
        let flux = linalg::mat_vec(&ae.value(x), &du);
        linalg::dot(&flux, &re.outward_normal(x)) / val
    });
    CoefficientSet::from_fields(name, a, v, eta, region)
}

fn block_matrix<const D: usize>(c: f64, x: &Point<D>) -> Mat<D> {
    let mut m = linalg::identity::<D>();
    for i in 0..D - 1 {
        for j in 0..D - 1 {
            m[i][j] += c * x[i] * x[j];
        }
    }
    m[D - 1][D - 1] += c * linalg::norm2(x);
    m
}

fn block_gradient<const D: usize>(c: f64, x: &Point<D>) -> [Mat<D>; D] {
    let mut g = [[[0.0; D]; D]; D];
    for (k, gk) in g.iter_mut().enumerate() {
        for i in 0..D - 1 {
            for j in 0..D - 1 {
                let mut v = 0.0;
                if k == i {
                    v += x[j];
                }
                if k == j {
                    v += x[i];
                }
                gk[i][j] = c * v;
            }
        }
        gk[D - 1][D - 1] = 2.0 * c * x[k];
    }
    g
}

fn param(params: &[f64], i: usize, name: &str, default: Option<f64>) -> Result<f64> {
    match params.get(i).copied().or(default) {
        Some(v) if v.is_finite() => Ok(v),
        Some(v) => Err(Error::InvalidParameter(format!("{name} must be finite, got {v}"))),
        None => Err(Error::InvalidParameter(format!("missing parameter `{name}`"))),
    }
}

/// Names accepted by [`builtin_fields`], alphabetized.
pub const BUILTIN_COEFFICIENTS: &[(&str, &str)] = &[
    ("block", "c: A = I + c x'x'^T (tangential block), a_dd = 1 + c|x|^2; A(0) = I"),
    ("constant", "c: constant symmetric A with a_12 = a_21 = c"),
    ("diag", "a_1 .. a_d: constant diagonal A"),
    ("identity", "A = I, V = 0, eta = 0"),
    ("lipschitz-perturb", "L: A = I + L x_1 E_11"),
    ("sine-perturb", "amp: A = I + amp sin(x_1) E_11"),
];

/// Named coefficient sets on the unit half-ball with `V = 0`, `η = 0`.
pub fn builtin_fields<const D: usize>(name: &str, params: &[f64]) -> Result<CoefficientSet<D>> {
    if D < 2 {
        return Err(Error::InvalidParameter("dimension must be at least 2".into()));
    }
    let region = Region::half_ball(1.0);
    let zero = ScalarField::<D>::zero;
    let cs = match name {
        "identity" => CoefficientSet::with_declared_bounds(
            "identity",
            MatrixField::identity(),
            zero(),
            zero(),
            region,
            1.0,
            0.0,
            0.0,
            EpsModulus::Zero,
        ),
        "constant" => {
            let c = param(params, 0, "c", None)?;
            if c.abs() >= 1.0 {
                return Err(Error::InvalidParameter(format!("|c| must be below 1, got {c}")));
            }
            let mut m = linalg::identity::<D>();
            m[0][1] = c;
            m[1][0] = c;
            let lambda = linalg::sym_eigenvalues(&m)[0].min(1.0 / (1.0 + c.abs()));
            CoefficientSet::with_declared_bounds(
                format!("constant({c})"),
                MatrixField::constant(m),
                zero(),
                zero(),
                region,
                lambda,
                0.0,
                0.0,
                EpsModulus::Zero,
            )
        }
        "diag" => {
            if params.len() != D {
                return Err(Error::InvalidParameter(format!("diag needs {D} entries")));
            }
            if params.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
                return Err(Error::InvalidParameter("diag entries must be positive".into()));
            }
            let mut m = [[0.0; D]; D];
            for i in 0..D {
                m[i][i] = params[i];
            }
            let lo = params.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = params.iter().copied().fold(0.0, f64::max);
            CoefficientSet::with_declared_bounds(
                "diag",
                MatrixField::constant(m),
                zero(),
                zero(),
                region,
                lo.min(1.0 / hi),
                0.0,
                0.0,
                EpsModulus::Zero,
            )
        }
        "block" => {
            let c = param(params, 0, "c", None)?;
            if c <= -1.0 {
                return Err(Error::InvalidParameter(format!("block needs c > -1, got {c}")));
            }
            let lambda = (1.0 + c.min(0.0)).min(1.0 / (1.0 + c.max(0.0)));
            CoefficientSet::with_declared_bounds(
                format!("block({c})"),
                MatrixField::new(move |x| block_matrix(c, x)).with_gradient(move |x| block_gradient(c, x)),
                zero(),
                zero(),
                region,
                lambda,
                0.0,
                0.0,
                EpsModulus::Power {
                    coefficient: 2.0 * c.abs(),
                    exponent: 2.0,
                },
            )
        }
        "lipschitz-perturb" => {
            let l = param(params, 0, "L", None)?;
            if l.abs() >= 1.0 {
                return Err(Error::InvalidParameter(format!("|L| must be below 1, got {l}")));
            }
            let field = MatrixField::new(move |x: &Point<D>| {
                let mut m = linalg::identity::<D>();
                m[0][0] += l * x[0];
                m
            })
            .with_gradient(move |_| {
                let mut g = [[[0.0; D]; D]; D];
                g[0][0][0] = l;
                g
            });
            CoefficientSet::with_declared_bounds(
                format!("lipschitz-perturb({l})"),
                field,
                zero(),
                zero(),
                region,
                1.0 - l.abs(),
                0.0,
                0.0,
                EpsModulus::lipschitz(l),
            )
        }
        "sine-perturb" => {
            let amp = param(params, 0, "amp", None)?;
            if amp.abs() >= 1.0 {
                return Err(Error::InvalidParameter(format!("|amp| must be below 1, got {amp}")));
            }
            let field = MatrixField::new(move |x: &Point<D>| {
                let mut m = linalg::identity::<D>();
                m[0][0] += amp * x[0].sin();
                m
            })
            .with_gradient(move |x| {
                let mut g = [[[0.0; D]; D]; D];
                g[0][0][0] = amp * x[0].cos();
                g
            });
            CoefficientSet::with_declared_bounds(
                format!("sine-perturb({amp})"),
                field,
                zero(),
                zero(),
                region,
                1.0 - amp.abs() * 1f64.sin(),
                0.0,
                0.0,
                EpsModulus::lipschitz(amp),
            )
        }
        other => return Err(Error::UnknownName(other.to_string())),
    };
    Ok(cs)
}
