//! Small dense Hermitian matrices (d <= 3), stored row-major.

use nalgebra::{Complex, Matrix3};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Makes the diagonal real and the lower triangle the conjugate of the upper one.
pub(crate) fn hermitize(d: usize, m: &mut [Complex64]) {
    for i in 0..d {
        m[i * d + i].im = 0.0;
        for j in i + 1..d {
            m[j * d + i] = m[i * d + j].conj();
        }
    }
}

/// Determinant of a Hermitian matrix (real part; the imaginary part vanishes).
pub fn det(d: usize, m: &[Complex64]) -> f64 {
    match d {
        1 => m[0].re,
        2 => m[0].re * m[3].re - m[1].norm_sqr(),
        3 => {
            let (a, b, c) = (m[0].re, m[4].re, m[8].re);
            let (x, y, z) = (m[1], m[2], m[5]);
            a * b * c - a * z.norm_sqr() - b * y.norm_sqr() - c * x.norm_sqr()
                + 2.0 * (x * z * y.conj()).re
        }
        _ => general_det(d, m).re,
    }
}

fn general_det(d: usize, m: &[Complex64]) -> Complex64 {
    let mut a = m.to_vec();
    let mut acc = Complex64::new(1.0, 0.0);
    for k in 0..d {
        let piv = (k..d).max_by(|&i, &j| a[i * d + k].norm().total_cmp(&a[j * d + k].norm())).unwrap();
        if a[piv * d + k].norm() == 0.0 {
            return ZERO;
        }
        if piv != k {
            for j in 0..d {
                a.swap(k * d + j, piv * d + j);
            }
            acc = -acc;
        }
        let p = a[k * d + k];
        acc *= p;
        for i in k + 1..d {
            let f = a[i * d + k] / p;
            for j in k..d {
                let v = a[k * d + j];
                a[i * d + j] -= f * v;
            }
        }
    }
    acc
}

/// Inverse of a Hermitian matrix via the adjugate; returns the determinant.
pub fn inverse(d: usize, m: &[Complex64], out: &mut [Complex64]) -> f64 {
    match d {
        1 => {
            out[0] = Complex64::new(1.0 / m[0].re, 0.0);
            m[0].re
        }
        2 => {
            let det = det(2, m);
            out[0] = Complex64::new(m[3].re / det, 0.0);
            out[3] = Complex64::new(m[0].re / det, 0.0);
            out[1] = -m[1] / det;
            out[2] = -m[2] / det;
            det
        }
        3 => {
            let det = det(3, m);
            let e = |i: usize, j: usize| m[i * 3 + j];
            for i in 0..3 {
                for j in 0..3 {
                    // adj(M)_{ij} = cofactor_{ji}
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    out[i * 3 + j] = (e(r0, c0) * e(r1, c1) - e(r0, c1) * e(r1, c0)) / det;
                }
            }
            hermitize(3, out);
            det
        }
        _ => panic!("dimension {d} not supported"),
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(d: usize, m: &[Complex64]) -> f64 {
    match d {
        1 => m[0].re,
        2 => {
            let (a, b) = (m[0].re, m[3].re);
            let h = 0.5 * (a - b);
            0.5 * (a + b) - (h * h + m[1].norm_sqr()).sqrt()
        }
        3 => {
            let mat = Matrix3::from_fn(|i, j| Complex::new(m[i * 3 + j].re, m[i * 3 + j].im));
            mat.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
        }
        _ => panic!("dimension {d} not supported"),
    }
}

/// Operator norm of a positive Hermitian matrix (its largest eigenvalue).
pub fn max_eigenvalue(d: usize, m: &[Complex64]) -> f64 {
    match d {
        1 => m[0].re,
        2 => {
            let (a, b) = (m[0].re, m[3].re);
            let h = 0.5 * (a - b);
            0.5 * (a + b) + (h * h + m[1].norm_sqr()).sqrt()
        }
        3 => {
            let mat = Matrix3::from_fn(|i, j| Complex::new(m[i * 3 + j].re, m[i * 3 + j].im));
            mat.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
        _ => panic!("dimension {d} not supported"),
    }
}

/// `tr(A B)` for `d x d` matrices; real for Hermitian inputs.
pub fn trace_product(d: usize, a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += (a[i * d + j] * b[j * d + i]).re;
        }
    }
    s
}

/// Mixed-discriminant sum `sum_{s,p} sgn(s) sgn(p) prod_k A_k[s(k)][p(k)]`.
pub fn mixed_sum(d: usize, factors: &[&[Complex64]]) -> f64 {
    let perms = permutations(d);
    let mut acc = ZERO;
    for (s, ss) in &perms {
        for (p, sp) in &perms {
            let mut prod = Complex64::new(ss * sp, 0.0);
            for k in 0..d {
                prod *= factors[k][s[k] * d + p[k]];
            }
            acc += prod;
        }
    }
    acc.re
}

/// Permutations of `0..d` with their signs.
pub(crate) fn permutations(d: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, d: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        for i in 0..d {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, d, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; d], d, &mut out);
    out.into_iter()
        .map(|p| {
            let mut inv = 0;
            for i in 0..d {
                for j in i + 1..d {
                    if p[i] > p[j] {
                        inv += 1;
                    }
                }
            }
            (p, if inv % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample3() -> Vec<Complex64> {
        let mut m = vec![c(2.0, 0.0), c(0.3, 0.1), c(-0.2, 0.4), ZERO, c(1.5, 0.0), c(0.1, -0.3), ZERO, ZERO, c(1.2, 0.0)];
        hermitize(3, &mut m);
        m
    }

    #[test]
    fn det_matches_elimination() {
        let m = sample3();
        assert!((det(3, &m) - general_det(3, &m).re).abs() < 1e-14);
        assert!(general_det(3, &m).im.abs() < 1e-14);
    }

    #[test]
    fn inverse_is_inverse() {
        for d in 1..=3 {
            let m: Vec<Complex64> = sample3().chunks(3).take(d).flat_map(|r| r[..d].to_vec()).collect();
            let mut inv = vec![ZERO; d * d];
            inverse(d, &m, &mut inv);
            for i in 0..d {
                for j in 0..d {
                    let s: Complex64 = (0..d).map(|k| m[i * d + k] * inv[k * d + j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((s - want).norm() < 1e-14, "d={d} ({i},{j}) {s}");
                }
            }
        }
    }

    #[test]
    fn eigen_bounds() {
        let m = sample3();
        let lo = min_eigenvalue(3, &m);
        let hi = max_eigenvalue(3, &m);
        let mut prod = 1.0;
        let mat = Matrix3::from_fn(|i, j| Complex::new(m[i * 3 + j].re, m[i * 3 + j].im));
        for e in mat.symmetric_eigenvalues().iter() {
            prod *= e;
        }
        assert!((prod - det(3, &m)).abs() < 1e-12);
        assert!(lo > 0.0 && lo <= hi);
        let m2 = [c(1.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(2.0, 0.0)];
        let (l, h) = (min_eigenvalue(2, &m2), max_eigenvalue(2, &m2));
        assert!((l * h - det(2, &m2)).abs() < 1e-14);
        assert!((l + h - 3.0).abs() < 1e-14);
    }

    #[test]
    fn mixed_sum_of_equal_factors_is_factorial_det() {
        let m = sample3();
        assert!((mixed_sum(3, &[&m, &m, &m]) - 6.0 * det(3, &m)).abs() < 1e-12);
        let a = [c(1.0, 0.0), ZERO, ZERO, ZERO];
        let b = [ZERO, ZERO, ZERO, c(1.0, 0.0)];
        assert!((mixed_sum(2, &[&a, &b]) - 1.0).abs() < 1e-15);
    }
}
