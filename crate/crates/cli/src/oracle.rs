//! Dense one-dimensional reference solution of the twisted equation for x-only data.

/// Periodic tridiagonal solve (Thomas algorithm with a Sherman-Morrison corner correction).
fn cyclic_tridiag(sub: f64, diag: &[f64], sup: f64, r: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let thomas = |b: &[f64], r: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = sup / b[0];
        d[0] = r[0] / b[0];
        for i in 1..n {
            let m = b[i] - sub * c[i - 1];
            c[i] = sup / m;
            d[i] = (r[i] - sub * d[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    };
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= sup * sub / gamma;
    let x = thomas(&b, r);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = sub;
    let z = thomas(&b, &u);
    let fact = (x[0] + sup * x[n - 1] / gamma) / (1.0 + z[0] + sup * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(x, z)| x - fact * z).collect()
}

/// Undamped Newton for `phi''/4 = c (F e^phi - 1)` on an `m`-point periodic line with
/// second-order differences.
fn line_solve(m: usize, c: f64, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let h = 1.0 / m as f64;
    let k = 1.0 / (4.0 * h * h);
    let fx: Vec<f64> = (0..m).map(|i| f(i as f64 * h)).collect();
    let mut phi = vec![0.0; m];
    for _ in 0..50 {
        let g: Vec<f64> = (0..m)
            .map(|i| {
                let (l, r) = (phi[(i + m - 1) % m], phi[(i + 1) % m]);
                k * (l - 2.0 * phi[i] + r) - c * (fx[i] * phi[i].exp() - 1.0)
            })
            .collect();
        if g.iter().fold(0.0f64, |a, v| a.max(v.abs())) < 1e-13 {
            break;
        }
        let diag: Vec<f64> = (0..m).map(|i| -2.0 * k - c * fx[i] * phi[i].exp()).collect();
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let d = cyclic_tridiag(k, &diag, k, &rhs);
        for (p, d) in phi.iter_mut().zip(&d) {
            *p += d;
        }
    }
    phi
}

/// Solution of `(c + ddbar phi) = F e^phi c` for `F = F(x)` on `tau = i`, sampled at `n`
/// equispaced points; Richardson extrapolation of 4096- and 2048-point solves.
pub fn line_oracle(n: usize, c: f64, f: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let fine = line_solve(4096, c, f);
    let coarse = line_solve(2048, c, f);
    (0..n).map(|i| (4.0 * fine[i * 4096 / n] - coarse[i * 2048 / n]) / 3.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_density_has_the_log_solution() {
        let phi = line_oracle(16, 1.0, &|_| 2.0);
        assert!(phi.iter().all(|p| (p + 2f64.ln()).abs() < 1e-12));
    }

    #[test]
    fn tridiagonal_solve_inverts_the_operator() {
        let n = 7;
        let diag: Vec<f64> = (0..n).map(|i| -3.0 - i as f64 * 0.1).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let r: Vec<f64> = (0..n).map(|i| x[(i + n - 1) % n] + diag[i] * x[i] + x[(i + 1) % n]).collect();
        let y = cyclic_tridiag(1.0, &diag, 1.0, &r);
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
