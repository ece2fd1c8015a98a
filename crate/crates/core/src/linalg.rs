//! Small fixed-size vector and matrix helpers.

use nalgebra::DMatrix;

pub type Point<const D: usize> = [f64; D];
pub type Mat<const D: usize> = [[f64; D]; D];

pub fn dot<const D: usize>(a: &Point<D>, b: &Point<D>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm<const D: usize>(a: &Point<D>) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm2<const D: usize>(a: &Point<D>) -> f64 {
    dot(a, a)
}

pub fn identity<const D: usize>() -> Mat<D> {
    let mut m = [[0.0; D]; D];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn zeros<const D: usize>() -> Mat<D> {
    [[0.0; D]; D]
}

pub fn mat_vec<const D: usize>(m: &Mat<D>, v: &Point<D>) -> Point<D> {
    let mut out = [0.0; D];
    for i in 0..D {
        out[i] = dot(&m[i], v);
    }
    out
}

pub fn transpose<const D: usize>(m: &Mat<D>) -> Mat<D> {
    let mut t = [[0.0; D]; D];
    for i in 0..D {
        for j in 0..D {
            t[j][i] = m[i][j];
        }
    }
    t
}

pub fn mat_mul<const D: usize>(a: &Mat<D>, b: &Mat<D>) -> Mat<D> {
    let mut c = [[0.0; D]; D];
    for i in 0..D {
        for j in 0..D {
            c[i][j] = (0..D).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// `J A Jᵀ`.
pub fn congruence<const D: usize>(j: &Mat<D>, a: &Mat<D>) -> Mat<D> {
    mat_mul(&mat_mul(j, a), &transpose(j))
}

pub fn scale_mat<const D: usize>(m: &Mat<D>, s: f64) -> Mat<D> {
    let mut out = *m;
    out.iter_mut().flatten().for_each(|x| *x *= s);
    out
}

pub fn max_abs_diff<const D: usize>(a: &Mat<D>, b: &Mat<D>) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Largest absolute asymmetry `|a_ij − a_ji|`.
pub fn asymmetry<const D: usize>(m: &Mat<D>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..D {
        for j in 0..i {
            worst = worst.max((m[i][j] - m[j][i]).abs());
        }
    }
    worst
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues<const D: usize>(m: &Mat<D>) -> Vec<f64> {
    let dm = DMatrix::from_fn(D, D, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let mut ev: Vec<f64> = dm.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn det2(m: &Mat<2>) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inv2(m: &Mat<2>) -> Option<Mat<2>> {
    let det = det2(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

/// Symmetric positive-definite inverse square root via the eigen decomposition.
pub fn spd_inv_sqrt<const D: usize>(m: &Mat<D>) -> Option<Mat<D>> {
    let dm = DMatrix::from_fn(D, D, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let eig = dm.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
        return None;
    }
    let mut out = [[0.0; D]; D];
    for k in 0..D {
        let s = 1.0 / eig.eigenvalues[k].sqrt();
        for i in 0..D {
            for j in 0..D {
                out[i][j] += s * eig.eigenvectors[(i, k)] * eig.eigenvectors[(j, k)];
            }
        }
    }
    Some(out)
}

/// Fourth-order central difference of a scalar function along coordinate `i`.
pub fn central_diff<const D: usize>(f: &dyn Fn(&Point<D>) -> f64, x: &Point<D>, i: usize, h: f64) -> f64 {
    let shifted = |s: f64| {
        let mut y = *x;
        y[i] += s;
        f(&y)
    };
    (-shifted(2.0 * h) + 8.0 * shifted(h) - 8.0 * shifted(-h) + shifted(-2.0 * h)) / (12.0 * h)
}

/// Default finite-difference step `1e-5 (1 + |x|)`.
pub fn fd_step<const D: usize>(x: &Point<D>) -> f64 {
    1e-5 * (1.0 + norm(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_sqrt_of_diagonal() {
        let m = spd_inv_sqrt(&[[4.0, 0.0], [0.0, 0.25]]).unwrap();
        assert!((m[0][0] - 0.5).abs() < 1e-14 && (m[1][1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_sorted() {
        let ev = sym_eigenvalues(&[[1.0, 0.5], [0.5, 1.0]]);
        assert!((ev[0] - 0.5).abs() < 1e-14 && (ev[1] - 1.5).abs() < 1e-14);
    }
}
