//! P1 finite elements for `div(A Du) = V u` on a half-disk mesh with the
//! Robin condition imposed weakly on the flat face and Dirichlet data on the arc.

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::SparseColMat;
use faer::Col;
use rayon::prelude::*;

use super::mesh::{BoundaryTag, Mesh};
use super::{Provenance, Solution};
use crate::coefficients::{CoefficientSet, FieldFn};
use crate::error::{Error, Result};
use crate::linalg::{self, Point};
use crate::quadrature::NeumaierSum;

/// Seven-point degree-5 rule on the reference triangle: barycentric
/// coordinates and weights summing to one.
pub fn triangle_rule() -> [([f64; 3], f64); 7] {
    let s = 15f64.sqrt();
    let a1 = (6.0 - s) / 21.0;
    let a2 = (6.0 + s) / 21.0;
    let w1 = (155.0 - s) / 1200.0;
    let w2 = (155.0 + s) / 1200.0;
    let b1 = 1.0 - 2.0 * a1;
    let b2 = 1.0 - 2.0 * a2;
    [
        ([1.0 / 3.0; 3], 9.0 / 40.0),
        ([b1, a1, a1], w1),
        ([a1, b1, a1], w1),
        ([a1, a1, b1], w1),
        ([b2, a2, a2], w2),
        ([a2, b2, a2], w2),
        ([a2, a2, b2], w2),
    ]
}

/// Three-point Gauss rule on `[0, 1]`.
fn edge_rule() -> [(f64, f64); 3] {
    let d = 0.5 * (0.6f64).sqrt();
    [(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)]
}

fn bary_point(p: &[[f64; 2]; 3], l: &[f64; 3]) -> [f64; 2] {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

/// Gradients of the three hat functions on a triangle and its area.
fn hat_gradients(p: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let (b, c) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        g[k] = [(b[1] - c[1]) / area2, (c[0] - b[0]) / area2];
    }
    (g, 0.5 * area2)
}

/// Piecewise-linear field on a mesh with bucketed point location.
#[derive(Debug, Clone)]
pub struct FemField {
    pub mesh: Mesh,
    pub values: Vec<f64>,
    gradients: Vec<[f64; 2]>,
    grid: Vec<Vec<usize>>,
    cells: usize,
}

impl FemField {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Self {
        let gradients = mesh
            .triangles
            .iter()
            .map(|t| {
                let p = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
                let (g, _) = hat_gradients(&p);
                let mut out = [0.0; 2];
                for k in 0..3 {
                    out[0] += values[t[k]] * g[k][0];
                    out[1] += values[t[k]] * g[k][1];
                }
                out
            })
            .collect();
        let cells = ((mesh.triangles.len() as f64).sqrt().ceil() as usize).max(1);
        let mut grid = vec![Vec::new(); cells * cells];
        let r = mesh.radius;
        for (e, t) in mesh.triangles.iter().enumerate() {
            let xs = t.map(|i| mesh.nodes[i][0]);
            let ys = t.map(|i| mesh.nodes[i][1]);
            let (i0, j0) = Self::cell_of(r, cells, xs.iter().copied().fold(f64::INFINITY, f64::min), ys.iter().copied().fold(f64::INFINITY, f64::min));
            let (i1, j1) = Self::cell_of(r, cells, xs.iter().copied().fold(f64::NEG_INFINITY, f64::max), ys.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    grid[j * cells + i].push(e);
                }
            }
        }
        Self {
            mesh,
            values,
            gradients,
            grid,
            cells,
        }
    }

    fn cell_of(r: f64, cells: usize, x: f64, y: f64) -> (usize, usize) {
        let fx = ((x + r) / (2.0 * r) * cells as f64).floor();
        let fy = (y / r * cells as f64).floor();
        let clamp = |v: f64| (v.max(0.0) as usize).min(cells - 1);
        (clamp(fx), clamp(fy))
    }

    fn barycentric(&self, e: usize, x: &[f64; 2]) -> [f64; 3] {
        let t = self.mesh.triangles[e];
        let p = [self.mesh.nodes[t[0]], self.mesh.nodes[t[1]], self.mesh.nodes[t[2]]];
        let (g, _) = hat_gradients(&p);
        let mut l = [0.0; 3];
        for k in 0..3 {
            l[k] = 1.0 + g[k][0] * (x[0] - p[k][0]) + g[k][1] * (x[1] - p[k][1]);
        }
        l
    }

    /// Element containing `x`, or the nearest one for points in the thin
    /// sliver between the polygonal mesh and the true arc.
    pub fn locate(&self, x: &[f64; 2]) -> usize {
        let (i, j) = Self::cell_of(self.mesh.radius, self.cells, x[0], x[1]);
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        let scan = |cands: &[usize], best: &mut (f64, usize)| {
            for &e in cands {
                let l = self.barycentric(e, x);
                let m = l[0].min(l[1]).min(l[2]);
                if m > best.0 {
                    *best = (m, e);
                }
            }
        };
        scan(&self.grid[j * self.cells + i], &mut best);
        if best.0 >= -1e-12 {
            return best.1;
        }
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                if ii >= 0 && jj >= 0 && (ii as usize) < self.cells && (jj as usize) < self.cells {
                    scan(&self.grid[jj as usize * self.cells + ii as usize], &mut best);
                }
            }
        }
        if best.1 == usize::MAX {
            scan(&(0..self.mesh.triangles.len()).collect::<Vec<_>>(), &mut best);
        }
        best.1
    }

    /// `(u_h, Du_h)`; the gradient is the raw element gradient.
    pub fn eval(&self, x: &[f64; 2]) -> (f64, [f64; 2]) {
        let e = self.locate(x);
        let l = self.barycentric(e, x);
        let t = self.mesh.triangles[e];
        for k in 0..3 {
            if l[k] == 1.0 || (l[k] - 1.0).abs() < 1e-14 && l[(k + 1) % 3].abs() < 1e-14 {
                return (self.values[t[k]], self.gradients[e]);
            }
        }
        let u = l[0] * self.values[t[0]] + l[1] * self.values[t[1]] + l[2] * self.values[t[2]];
        (u, self.gradients[e])
    }

    /// `‖u_h − u‖_{L²}` over the mesh with the seven-point rule.
    pub fn l2_error(&self, truth: impl Fn(&[f64; 2]) -> f64) -> f64 {
        let rule = triangle_rule();
        let mut acc = NeumaierSum::new();
        for t in &self.mesh.triangles {
            let p = [self.mesh.nodes[t[0]], self.mesh.nodes[t[1]], self.mesh.nodes[t[2]]];
            let area = self.mesh.signed_area(t);
            for (l, w) in &rule {
                let x = bary_point(&p, l);
                let uh = l[0] * self.values[t[0]] + l[1] * self.values[t[1]] + l[2] * self.values[t[2]];
                let d = uh - truth(&x);
                acc.add(area * w * d * d);
            }
        }
        acc.value().sqrt()
    }

    /// Node-value CSV: `node,x1,x2,u`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,x1,x2,u\n");
        for (i, (p, u)) in self.mesh.nodes.iter().zip(&self.values).enumerate() {
            s.push_str(&format!("{i},{:?},{:?},{:?}\n", p[0], p[1], u));
        }
        s
    }
}

type LocalSystem = ([usize; 3], [[f64; 3]; 3]);

/// Solve the Robin problem for `cs` on `mesh` with `u = g` on the arc and
/// wrap the result as a [`Solution`] with its residual measured.
pub fn solve_robin_fem(
    cs: &CoefficientSet<2>,
    mesh: &Mesh,
    g: impl Fn(&[f64; 2]) -> f64,
) -> Result<Solution<2>> {
    fem_solution(solve_robin_field(cs, mesh, g)?, cs)
}

/// The discrete field of [`solve_robin_fem`].
///
/// The bilinear form is `∫ A Du·Dv + ∫ V u v − ∫_Γ η u v`; no sign is assumed
/// for `η`. A singular or non-finite discrete system is reported as an error.
pub fn solve_robin_field(cs: &CoefficientSet<2>, mesh: &Mesh, g: impl Fn(&[f64; 2]) -> f64) -> Result<FemField> {
    let n = mesh.nodes.len();
    let rule = triangle_rule();
    let locals: Vec<LocalSystem> = mesh
        .triangles
        .par_iter()
        .map(|t| {
            let p = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
            let (grad, area) = hat_gradients(&p);
            let mut k = [[0.0; 3]; 3];
            for (l, w) in &rule {
                let x = bary_point(&p, l);
                let a = cs.a(&x);
                let v = cs.v(&x);
                for i in 0..3 {
                    let ag = linalg::mat_vec(&a, &grad[i]);
                    for j in 0..3 {
                        k[i][j] += area * w * (ag[0] * grad[j][0] + ag[1] * grad[j][1] + v * l[i] * l[j]);
                    }
                }
            }
            (*t, k)
        })
        .collect();
    let mut entries: BTreeMap<(usize, usize), NeumaierSum> = BTreeMap::new();
    let mut add = |i: usize, j: usize, v: f64| entries.entry((i, j)).or_default().add(v);
    for (t, k) in &locals {
        for i in 0..3 {
            for j in 0..3 {
                add(t[i], t[j], k[i][j]);
            }
        }
    }
    for ([a, b], tag) in &mesh.boundary {
        if *tag != BoundaryTag::Flat {
            continue;
        }
        let (pa, pb) = (mesh.nodes[*a], mesh.nodes[*b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        let ids = [*a, *b];
        for (s, w) in edge_rule() {
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let phi = [1.0 - s, s];
            let eta = cs.eta(&x);
            for i in 0..2 {
                for j in 0..2 {
                    add(ids[i], ids[j], -len * w * eta * phi[i] * phi[j]);
                }
            }
        }
    }

    let arc = mesh.arc_nodes();
    let mut fixed = vec![None; n];
    for &i in &arc {
        fixed[i] = Some(g(&mesh.nodes[i]));
    }
    let mut index = vec![usize::MAX; n];
    let mut free = 0;
    for i in 0..n {
        if fixed[i].is_none() {
            index[i] = free;
            free += 1;
        }
    }
    let mut triplets = Vec::new();
    let mut rhs = vec![NeumaierSum::new(); free];
    for (&(i, j), v) in &entries {
        let v = v.value();
        if index[i] == usize::MAX {
            continue;
        }
        match fixed[j] {
            Some(gj) => rhs[index[i]].add(-v * gj),
            None => triplets.push((index[i], index[j], v)),
        }
    }
    let mut values: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    if free > 0 {
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(free, free, &triplets)
            .map_err(|e| Error::SingularSystem(format!("assembly failed: {e:?}")))?;
        let lu = matrix
            .sp_lu()
            .map_err(|e| Error::SingularSystem(format!("LU factorization failed: {e:?}")))?;
        let b = Col::<f64>::from_fn(free, |i| rhs[i].value());
        let x = lu.solve(&b);
        for i in 0..n {
            if index[i] != usize::MAX {
                values[i] = x[index[i]];
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("solution contains non-finite values".into()));
        }
        // a tiny pivot leaves a large residual rather than an infinity
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut row = vec![NeumaierSum::new(); free];
        for &(i, j, v) in &triplets {
            row[i].add(v * x[j]);
        }
        for i in 0..free {
            worst = worst.max((row[i].value() - rhs[i].value()).abs());
            scale = scale.max(rhs[i].value().abs());
        }
        let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if worst > 1e-8 * (scale + xmax) {
            return Err(Error::SingularSystem(format!("solve residual {worst:e} too large")));
        }
    }
    Ok(FemField::new(mesh.clone(), values))
}

/// A [`Solution`] backed by `field`, posed for `cs` on the mesh's half-disk.
pub fn fem_solution(field: FemField, cs: &CoefficientSet<2>) -> Result<Solution<2>> {
    let provenance = Provenance::Fem {
        h: field.mesh.h(),
        nodes: field.mesh.nodes.len(),
        elements: field.mesh.triangles.len(),
    };
    let mut cs = cs.clone();
    cs.region = crate::coefficients::Region::half_ball(field.mesh.radius);
    let residual = mesh_weak_residual(&field, &cs);
    let field = Arc::new(field);
    let fn_: FieldFn<2> = Arc::new(move |x: &Point<2>| field.eval(x));
    let mut sol = Solution::new(format!("fem[{}]", cs.name), fn_, provenance, cs);
    sol.residual = Some(residual);
    Ok(sol)
}

/// The weak residual of [`super::weak_residual`] for a P1 field, integrated
/// element by element so that the kinks of `u_h` never fall inside a rule.
pub fn mesh_weak_residual(field: &FemField, cs: &CoefficientSet<2>) -> f64 {
    let mesh = &field.mesh;
    let radius = mesh.radius;
    let monomials = super::test_monomials::<2>();
    let nq = monomials.len();
    let rule = triangle_rule();
    let mut form = vec![NeumaierSum::new(); nq];
    let mut scale = vec![NeumaierSum::new(); nq];
    for (e, t) in mesh.triangles.iter().enumerate() {
        let p = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
        let area = mesh.signed_area(t).abs();
        let flux_du = field.gradients[e];
        for (l, wq) in &rule {
            let y = bary_point(&p, l);
            let u = l[0] * field.values[t[0]] + l[1] * field.values[t[1]] + l[2] * field.values[t[2]];
            let flux = linalg::mat_vec(&cs.a(&y), &flux_du);
            let v = cs.v(&y);
            let w = radius * radius - linalg::norm2(&y);
            for (j, mono) in monomials.iter().enumerate() {
                let (q, dq) = super::monomial(&y, mono, radius);
                let grad_term = w * (flux[0] * (-4.0 * y[0] * q + w * dq[0]) + flux[1] * (-4.0 * y[1] * q + w * dq[1]));
                let pot = v * u * w * w * q;
                form[j].add(area * wq * (grad_term + pot));
                scale[j].add(area * wq * (grad_term.abs() + pot.abs()));
            }
        }
    }
    for ([a, b], tag) in &mesh.boundary {
        if *tag != BoundaryTag::Flat {
            continue;
        }
        let (pa, pb) = (mesh.nodes[*a], mesh.nodes[*b]);
        let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
        for (s, wq) in edge_rule() {
            let y = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let u = (1.0 - s) * field.values[*a] + s * field.values[*b];
            let w = radius * radius - linalg::norm2(&y);
            for (j, mono) in monomials.iter().enumerate() {
                let (q, _) = super::monomial(&y, mono, radius);
                let t = cs.eta(&y) * u * w * w * q;
                form[j].add(-len * wq * t);
                scale[j].add(len * wq * t.abs());
            }
        }
    }
    (0..nq)
        .filter(|&j| scale[j].value() > 0.0)
        .map(|j| form[j].value().abs() / scale[j].value())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_quintics() {
        // ∫ over the reference triangle of x^a y^b = a! b! / (a+b+2)!
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let fact = |n: u32| (1..=n).product::<u32>() as f64;
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let q: f64 = triangle_rule()
                    .iter()
                    .map(|(l, w)| {
                        let x = bary_point(&p, l);
                        0.5 * w * x[0].powi(a as i32) * x[1].powi(b as i32)
                    })
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-15, "{a} {b}");
            }
        }
    }
}
