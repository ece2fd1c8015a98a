//! Conforming triangulations of the half-disk `{|x| < R, x_2 > 0}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// The flat face `Γ` where the Robin condition holds.
    Flat,
    /// The curved arc carrying Dirichlet data.
    Arc,
}

impl BoundaryTag {
    fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Flat => "flat",
            BoundaryTag::Arc => "arc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub radius: f64,
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<([usize; 2], BoundaryTag)>,
}

impl Mesh {
    /// Twelve-triangle starting mesh refined `level` times by edge bisection;
    /// new arc nodes are projected onto the circle.
    pub fn half_disk(radius: f64, level: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("mesh radius must be positive, got {radius}")));
        }
        if level > 9 {
            return Err(Error::InvalidParameter(format!("refinement level {level} exceeds 9")));
        }
        let mut mesh = Self::coarse(radius);
        for _ in 0..level {
            mesh = mesh.refine();
        }
        Ok(mesh)
    }

    fn coarse(radius: f64) -> Self {
        let mut nodes = vec![[0.0, 0.0]];
        for ring in [0.5 * radius, radius] {
            for j in 0..5 {
                let a = PI * j as f64 / 4.0;
                nodes.push([ring * a.cos(), ring * a.sin()]);
            }
        }
        let mut triangles = Vec::new();
        for j in 0..4 {
            triangles.push([0, 1 + j, 2 + j]);
        }
        for j in 0..4 {
            triangles.push([1 + j, 6 + j, 7 + j]);
            triangles.push([1 + j, 7 + j, 2 + j]);
        }
        let mut boundary = vec![
            ([0, 1], BoundaryTag::Flat),
            ([1, 6], BoundaryTag::Flat),
            ([5, 0], BoundaryTag::Flat),
            ([10, 5], BoundaryTag::Flat),
        ];
        for j in 0..4 {
            boundary.push(([6 + j, 7 + j], BoundaryTag::Arc));
        }
        Self {
            radius,
            nodes,
            triangles,
            boundary,
        }
    }

    /// Red refinement: every triangle splits into four.
    pub fn refine(&self) -> Self {
        let mut nodes = self.nodes.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let arc_edges: HashMap<(usize, usize), ()> = self
            .boundary
            .iter()
            .filter(|(_, t)| *t == BoundaryTag::Arc)
            .map(|(e, _)| ((e[0].min(e[1]), e[0].max(e[1])), ()))
            .collect();
        let radius = self.radius;
        let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
            let key = (a.min(b), a.max(b));
            if let Some(&m) = mid.get(&key) {
                return m;
            }
            let (p, q) = (nodes[a], nodes[b]);
            let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            if arc_edges.contains_key(&key) {
                let s = radius / m[0].hypot(m[1]);
                m = [m[0] * s, m[1] * s];
            }
            nodes.push(m);
            mid.insert(key, nodes.len() - 1);
            nodes.len() - 1
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut nodes);
            let bc = midpoint(b, c, &mut nodes);
            let ca = midpoint(c, a, &mut nodes);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for &([a, b], tag) in &self.boundary {
            let m = midpoint(a, b, &mut nodes);
            boundary.push(([a, m], tag));
            boundary.push(([m, b], tag));
        }
        Self {
            radius,
            nodes,
            triangles,
            boundary,
        }
    }

    /// Longest edge.
    pub fn h(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in &self.triangles {
            for k in 0..3 {
                let (p, q) = (self.nodes[t[k]], self.nodes[t[(k + 1) % 3]]);
                h = h.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        h
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut worst = PI;
        for t in &self.triangles {
            for k in 0..3 {
                let o = self.nodes[t[k]];
                let p = self.nodes[t[(k + 1) % 3]];
                let q = self.nodes[t[(k + 2) % 3]];
                let u = [p[0] - o[0], p[1] - o[1]];
                let v = [q[0] - o[0], q[1] - o[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                worst = worst.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        worst
    }

    /// Every edge is shared by two triangles or is a tagged boundary edge,
    /// and every triangle is positively oriented.
    pub fn is_conforming(&self) -> bool {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            if self.signed_area(t) <= 0.0 {
                return false;
            }
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let tagged: HashMap<(usize, usize), ()> = self
            .boundary
            .iter()
            .map(|(e, _)| ((e[0].min(e[1]), e[0].max(e[1])), ()))
            .collect();
        count.iter().all(|(e, &c)| match c {
            2 => !tagged.contains_key(e),
            1 => tagged.contains_key(e),
            _ => false,
        }) && tagged.len() == self.boundary.len()
    }

    pub fn signed_area(&self, t: &[usize; 3]) -> f64 {
        let (a, b, c) = (self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Nodes lying on the arc, sorted.
    pub fn arc_nodes(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary
            .iter()
            .filter(|(_, t)| *t == BoundaryTag::Arc)
            .flat_map(|(e, _)| *e)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Plain-text export: `radius`, then `nodes`, `triangles`, `boundary` blocks.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "radius {}", self.radius);
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
        }
        let _ = writeln!(s, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "boundary {}", self.boundary.len());
        for (e, tag) in &self.boundary {
            let _ = writeln!(s, "{} {} {}", e[0], e[1], tag.as_str());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidParameter(format!("mesh text: {msg}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("unexpected end"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(&format!("expected `{key}`")));
            }
            parts.next().map(str::to_string).ok_or_else(|| bad("missing count"))
        };
        let radius: f64 = header("radius")?.parse().map_err(|_| bad("radius"))?;
        let n: usize = header("nodes")?.parse().map_err(|_| bad("node count"))?;
        let mut body: Vec<&str> = Vec::new();
        let rest: Vec<&str> = lines.collect();
        let mut it = rest.into_iter();
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let l = it.next().ok_or_else(|| bad("missing node"))?;
            let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().map_err(|_| bad("node"))).collect::<Result<_>>()?;
            if v.len() != 2 {
                return Err(bad("node needs two coordinates"));
            }
            nodes.push([v[0], v[1]]);
        }
        let count = |line: Option<&str>, key: &str| -> Result<usize> {
            let l = line.ok_or_else(|| bad("unexpected end"))?;
            let mut p = l.split_whitespace();
            if p.next() != Some(key) {
                return Err(bad(&format!("expected `{key}`")));
            }
            p.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad("count"))
        };
        let m = count(it.next(), "triangles")?;
        let mut triangles = Vec::with_capacity(m);
        for _ in 0..m {
            let l = it.next().ok_or_else(|| bad("missing triangle"))?;
            let v: Vec<usize> = l.split_whitespace().map(|x| x.parse().map_err(|_| bad("triangle"))).collect::<Result<_>>()?;
            if v.len() != 3 || v.iter().any(|&i| i >= n) {
                return Err(bad("triangle needs three valid node indices"));
            }
            triangles.push([v[0], v[1], v[2]]);
        }
        let b = count(it.next(), "boundary")?;
        let mut boundary = Vec::with_capacity(b);
        for _ in 0..b {
            let l = it.next().ok_or_else(|| bad("missing boundary edge"))?;
            body.clear();
            body.extend(l.split_whitespace());
            if body.len() != 3 {
                return Err(bad("boundary edge needs `a b tag`"));
            }
            let a: usize = body[0].parse().map_err(|_| bad("edge"))?;
            let c: usize = body[1].parse().map_err(|_| bad("edge"))?;
            let tag = match body[2] {
                "flat" => BoundaryTag::Flat,
                "arc" => BoundaryTag::Arc,
                _ => return Err(bad("tag must be `flat` or `arc`")),
            };
            boundary.push(([a, c], tag));
        }
        Ok(Self {
            radius,
            nodes,
            triangles,
            boundary,
        })
    }
}
