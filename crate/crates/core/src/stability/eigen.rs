//! Eigen-decomposition of real 3x3 matrices: closed-form cubic roots,
//! inverse-iteration eigenvectors, biorthonormal left/right sets.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative separation below which two eigenvalues count as coincident.
pub const DEGENERACY_TOL: f64 = 1e-8;

type C3 = [Complex64; 3];
type M3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    /// `lambdas[0..2]` is the complex pair (positive imaginary part first),
    /// `lambdas[2]` the real eigenvalue closest to zero.
    pub lambdas: C3,
    /// Right eigenvectors, unit Euclidean norm.
    pub right: [C3; 3],
    /// Left eigenvectors scaled so that `left[i] . right[j] = delta_ij`
    /// under the bilinear (unconjugated) product.
    pub left: [C3; 3],
}

impl EigenSystem {
    /// `1 / min |Re lambda|`.
    pub fn relaxation_time(&self) -> f64 {
        let m = self.lambdas.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
        1.0 / m
    }

    pub fn is_stable(&self) -> bool {
        self.lambdas.iter().all(|l| l.re < 0.0)
    }
}

pub fn dot(a: &C3, b: &C3) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn dot_real(a: &[f64; 3], b: &C3) -> Complex64 {
    b[0] * a[0] + b[1] * a[1] + b[2] * a[2]
}

fn norm(v: &C3) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt()
}

pub(crate) fn mat_norm(m: &M3) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

fn transpose(m: &M3) -> M3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

/// Coefficients `(a, b, c)` of `lambda^3 + a lambda^2 + b lambda + c`.
pub fn char_poly(m: &M3) -> [f64; 3] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    [-tr, minors, -det(m)]
}

pub fn det(m: &M3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// `det(M - lambda I)`, evaluated directly.
pub fn char_residual(m: &M3, lambda: Complex64) -> Complex64 {
    let s = shifted(m, lambda);
    s[0][0] * (s[1][1] * s[2][2] - s[1][2] * s[2][1]) - s[0][1] * (s[1][0] * s[2][2] - s[1][2] * s[2][0])
        + s[0][2] * (s[1][0] * s[2][1] - s[1][1] * s[2][0])
}

fn shifted(m: &M3, lambda: Complex64) -> [C3; 3] {
    let mut s = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = Complex64::new(m[i][j], 0.0);
        }
        s[i][i] -= lambda;
    }
    s
}

fn poly_eval(c: &[f64; 3], z: Complex64) -> (Complex64, Complex64) {
    let v = ((z + c[0]) * z + c[1]) * z + c[2];
    let d = (z * 3.0 + 2.0 * c[0]) * z + c[1];
    (v, d)
}

/// Roots of the monic cubic, polished by Newton steps.
pub fn cubic_roots(c: &[f64; 3]) -> C3 {
    let [a, b, cc] = *c;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + cc;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let shift = -a / 3.0;
    let mut roots = if disc > 0.0 {
        let s = disc.sqrt();
        let t = (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt();
        let r = t + shift;
        // deflate: lambda^2 + (a + r) lambda + (b + r (a + r))
        let b2 = a + r;
        let c2 = b + r * b2;
        let d2 = Complex64::new(b2 * b2 - 4.0 * c2, 0.0).sqrt();
        [
            Complex64::new(r, 0.0),
            (-d2 - b2) * 0.5,
            (d2 - b2) * 0.5,
        ]
    } else if p == 0.0 {
        [Complex64::new(shift, 0.0); 3]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let tau = std::f64::consts::TAU / 3.0;
        [0.0, 1.0, 2.0].map(|k| Complex64::new(m * (phi - k * tau).cos() + shift, 0.0))
    };
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (v, d) = poly_eval(c, *r);
            if d.norm() == 0.0 {
                break;
            }
            let step = v / d;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
        if r.im.abs() <= 1e-14 * r.norm() {
            r.im = 0.0;
        }
    }
    roots
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting; exact
/// zero pivots are replaced by a tiny value so that near-singular systems
/// (the point of inverse iteration) still return the dominant direction.
fn solve(mut a: [C3; 3], mut b: C3, scale: f64) -> C3 {
    let tiny = Complex64::new(scale * 1e-300_f64.max(f64::EPSILON * f64::EPSILON), 0.0);
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        if a[col][col].norm() == 0.0 {
            a[col][col] = tiny;
        }
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); 3];
    for i in (0..3).rev() {
        let mut s = b[i];
        for k in i + 1..3 {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    x
}

fn cross(a: &C3, b: &C3) -> C3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Unit eigenvector of `m` for `lambda`: null vector from row cross products,
/// refined by one inverse-iteration step.
fn eigenvector(m: &M3, lambda: Complex64) -> C3 {
    let s = shifted(m, lambda);
    let candidates = [cross(&s[0], &s[1]), cross(&s[0], &s[2]), cross(&s[1], &s[2])];
    let mut v = *candidates.iter().max_by(|a, b| norm(a).total_cmp(&norm(b))).unwrap();
    if norm(&v) == 0.0 {
        // rank <= 1: any vector orthogonal to the nonzero row works; start from the
        // coordinate axis least aligned with it
        v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
    }
    let scale = mat_norm(m).max(lambda.norm()).max(f64::MIN_POSITIVE);
    let mu = lambda + Complex64::new(scale * 1e-13, 0.0);
    let refined = solve(shifted(m, mu), normalize(v), scale);
    if refined.iter().all(|z| z.is_finite()) && norm(&refined) > 0.0 {
        v = refined;
    }
    normalize(v)
}

/// Unit norm with the largest component real and positive.
fn normalize(v: C3) -> C3 {
    let n = norm(&v);
    let big = *v.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { Complex64::new(1.0, 0.0) };
    v.map(|z| z * phase / n)
}

fn order(roots: C3) -> C3 {
    let mut r = roots;
    let has_pair = r.iter().any(|z| z.im != 0.0);
    if has_pair {
        r.sort_by(|a, b| b.im.total_cmp(&a.im));
        // [+im, real, -im] -> [+im, -im, real]
        [r[0], r[2], r[1]]
    } else {
        // slowest (closest to zero) last, remaining by descending real part
        r.sort_by(|a, b| b.re.abs().total_cmp(&a.re.abs()));
        let (mut first, slow) = ([r[0], r[1]], r[2]);
        first.sort_by(|a, b| b.re.total_cmp(&a.re));
        [first[0], first[1], slow]
    }
}

/// Rounding splits an exact double root by about `sqrt(eps)`; such a pair is
/// recognised by the polynomial vanishing at the nearby critical point.
fn is_double_root(c: &[f64; 3], a: Complex64, b: Complex64, scale: f64) -> bool {
    if (a - b).norm() > 1e-6 * scale {
        return false;
    }
    // critical points of the cubic: 3 z^2 + 2 c0 z + c1 = 0
    let disc = Complex64::new(c[0] * c[0] - 3.0 * c[1], 0.0).sqrt();
    let mid = (a + b) * 0.5;
    let z = [(-c[0] + disc) / 3.0, (-c[0] - disc) / 3.0]
        .into_iter()
        .min_by(|u, v| (u - mid).norm().total_cmp(&(v - mid).norm()))
        .unwrap();
    poly_eval(c, z).0.norm() <= 64.0 * f64::EPSILON * scale.powi(3)
}

pub fn eigensystem_of(m: &M3) -> Result<EigenSystem> {
    if !m.iter().flatten().all(|x| x.is_finite()) {
        return Err(Error::InvalidParams("matrix has non-finite entries".into()));
    }
    let lambdas = order(cubic_roots(&char_poly(m)));
    let poly = char_poly(m);
    let scale = lambdas.iter().map(|l| l.norm()).fold(0.0, f64::max);
    for i in 0..3 {
        for j in i + 1..3 {
            if (lambdas[i] - lambdas[j]).norm() <= DEGENERACY_TOL * scale || is_double_root(&poly, lambdas[i], lambdas[j], scale) {
                return Err(Error::DegenerateSpectrum {
                    a: format!("{}", lambdas[i]),
                    b: format!("{}", lambdas[j]),
                });
            }
        }
    }
    let mt = transpose(m);
    let mut right = [[Complex64::new(0.0, 0.0); 3]; 3];
    let mut left = right;
    for k in 0..3 {
        let paired = k == 1 && lambdas[1] == lambdas[0].conj() && lambdas[0].im != 0.0;
        if paired {
            right[1] = right[0].map(|z| z.conj());
            left[1] = left[0].map(|z| z.conj());
            continue;
        }
        right[k] = eigenvector(m, lambdas[k]);
        let l = eigenvector(&mt, lambdas[k]);
        let s = dot(&l, &right[k]);
        left[k] = l.map(|z| z / s);
    }
    Ok(EigenSystem { lambdas, right, left })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix() {
        let m = [[-3.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -0.2]];
        let e = eigensystem_of(&m).unwrap();
        for (l, want) in e.lambdas.iter().zip([-1.0, -3.0, -0.2]) {
            assert!((l - want).norm() < 1e-14);
        }
        for k in 0..3 {
            let big = e.right[k].iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!((big - 1.0).abs() < 1e-14);
            assert!((norm(&e.right[k]) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_reported() {
        let m = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -2.0]];
        assert!(matches!(eigensystem_of(&m), Err(Error::DegenerateSpectrum { .. })));
    }

    #[test]
    fn rotation_block_gives_conjugate_pair() {
        let m = [[-1.0, 2.0, 0.0], [-2.0, -1.0, 0.5], [0.3, 0.1, -0.01]];
        let e = eigensystem_of(&m).unwrap();
        assert!(e.lambdas[0].im > 0.0);
        assert_eq!(e.lambdas[1], e.lambdas[0].conj());
        assert_eq!(e.lambdas[2].im, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(&e.left[i], &e.right[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).norm() < 1e-12, "{i}{j}: {d}");
            }
        }
    }
}
