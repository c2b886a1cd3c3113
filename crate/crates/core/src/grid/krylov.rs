use super::quadrature::dot;

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    /// Relative residual target `|b - A x| / |b|`.
    pub tol: f64,
    /// Absolute target on the root-mean-square residual; a solve also converges below it.
    pub abs_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-10, abs_tol: 0.0, restart: 60, max_iter: 600 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GmresStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Restarted GMRES with right preconditioning and modified Gram-Schmidt.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<Vec<f64>>,
    opts: &GmresOptions,
) -> (Vec<f64>, GmresStats) {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
    if bnorm == 0.0 {
        return (vec![0.0; n], GmresStats { iterations: 0, relative_residual: 0.0, converged: true });
    }
    let target = (opts.tol * bnorm).max(opts.abs_tol * (n as f64).sqrt());
    let mut iterations = 0;
    let m = opts.restart.max(1);
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        if beta <= target || iterations >= opts.max_iter {
            return (x, GmresStats { iterations, relative_residual: rel, converged: beta <= target });
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < opts.max_iter {
            let z = precond(&v[k]);
            let mut w = apply(&z);
            for i in 0..=k {
                let hik = dot(&w, &v[i]);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            if g[k].abs() <= target || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|w| w / hn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        let mut u = vec![0.0; n];
        for (i, yi) in y.iter().enumerate() {
            for (uj, vj) in u.iter_mut().zip(&v[i]) {
                *uj += yi * vj;
            }
        }
        let du = precond(&u);
        for (xj, dj) in x.iter_mut().zip(&du) {
            *xj += dj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let mut s = 4.0 * x[i];
                    if i > 0 {
                        s -= 1.5 * x[i - 1];
                    }
                    if i + 1 < n {
                        s -= 0.5 * x[i + 1];
                    }
                    s
                })
                .collect()
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let opts = GmresOptions { tol: 1e-12, abs_tol: 0.0, restart: 10, max_iter: 500 };
        let (x, st) = gmres(apply, |r| r.to_vec(), &b, None, &opts);
        assert!(st.converged);
        let r: Vec<f64> = apply(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm(&r) / norm(&b) < 1e-11);
    }
}
