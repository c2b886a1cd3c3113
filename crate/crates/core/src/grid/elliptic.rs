use std::sync::Arc;

use num_complex::Complex64;

use super::field::{HermitianFormField, ScalarField};
use super::krylov::{gmres, GmresOptions, GmresStats};
use super::quadrature::{dot, pairwise_sum};
use super::spectral::Spectral;
use crate::error::{Error, Result};
use crate::linalg;

/// `L u = tr_g(ddbar u) - sigma u` for a positive metric `g`, `sigma >= 0`.
///
/// When `sigma = 0` the operator is solved on mean-zero functions: internally it is bordered
/// with the grid mean so the discrete system stays nonsingular.
pub struct EllipticOperator {
    sp: Arc<Spectral>,
    metric: HermitianFormField,
    hinv: Vec<Complex64>,
    det: Vec<f64>,
    sigma: f64,
    precond: Vec<f64>,
    constant: bool,
}

#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub x: Vec<f64>,
    /// For `sigma = 0`: the constant `c` with `L x = b - c` (the discrete mean of the source).
    pub shift: f64,
    pub stats: GmresStats,
}

impl EllipticOperator {
    pub fn new(metric: &HermitianFormField, sigma: f64) -> Result<Self> {
        metric.check_positive(f64::MIN_POSITIVE, "elliptic operator metric")?;
        if !(sigma >= 0.0) {
            return Err(Error::Contract(format!("sigma = {sigma} must be nonnegative")));
        }
        let chart = metric.chart();
        let d = chart.dim();
        let sp = Spectral::get(chart);
        let mut hinv = vec![Complex64::new(0.0, 0.0); chart.len() * d * d];
        let mut det = vec![0.0; chart.len()];
        for p in 0..chart.len() {
            det[p] = linalg::inverse(d, metric.at(p), &mut hinv[p * d * d..(p + 1) * d * d]);
        }
        let first = metric.at(0);
        let constant = (1..chart.len()).all(|p| metric.at(p) == first);
        let hbar = mean_blocks(&hinv, d);
        let mut precond = vec![0.0; chart.len()];
        for (p, v) in precond.iter_mut().enumerate() {
            let mut sym = -sigma;
            for i in 0..d {
                sym += hbar[i * d + i].re * sp.ddbar_symbol(i, i, p).re;
                for j in i + 1..d {
                    sym += 2.0 * (hbar[j * d + i] * sp.ddbar_symbol(i, j, p)).re;
                }
            }
            if p == 0 && sigma == 0.0 {
                sym = 1.0;
            }
            *v = 1.0 / sym;
        }
        Ok(Self { sp, metric: metric.clone(), hinv, det, sigma, precond, constant })
    }

    pub fn metric(&self) -> &HermitianFormField {
        &self.metric
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Pointwise determinant of the metric.
    pub fn det(&self) -> &[f64] {
        &self.det
    }

    /// `tr_g(ddbar u) - sigma u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let d = self.sp.dim();
        let dd = d * d;
        let hat = self.sp.forward(u);
        let mut out: Vec<f64> = u.iter().map(|v| -self.sigma * v).collect();
        for i in 0..d {
            let diag = self.sp.apply_real(&hat, |p| self.sp.ddbar_symbol(i, i, p));
            for (p, v) in diag.iter().enumerate() {
                out[p] += self.hinv[p * dd + i * d + i].re * v;
            }
            for j in i + 1..d {
                let off = self.sp.apply_complex(&hat, |p| self.sp.ddbar_symbol(i, j, p));
                for (p, v) in off.iter().enumerate() {
                    out[p] += 2.0 * (self.hinv[p * dd + j * d + i] * v).re;
                }
            }
        }
        out
    }

    fn apply_bordered(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.apply(u);
        if self.sigma == 0.0 {
            let m = pairwise_sum(u) / u.len() as f64;
            for v in out.iter_mut() {
                *v += m;
            }
        }
        out
    }

    /// Constant-coefficient spectral inverse built from the mean of `g^{-1}`.
    pub fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let hat = self.sp.forward(r);
        self.sp.apply_real(&hat, |p| Complex64::new(self.precond[p], 0.0))
    }

    /// Largest eigenvalue bound of `-L`.
    pub fn spectral_radius_bound(&self) -> f64 {
        let d = self.sp.dim();
        let hmax = self
            .hinv
            .chunks(d * d)
            .map(|b| linalg::max_eigenvalue(d, b))
            .fold(0.0, f64::max);
        let kmax = (0..self.sp.len())
            .map(|p| (0..d).map(|i| -self.sp.ddbar_symbol(i, i, p).re).sum::<f64>())
            .fold(0.0, f64::max);
        hmax * kmax + self.sigma
    }

    /// Solves `L x = b` (for `sigma = 0`: `L x = b - c`, `mean(x) = 0`).
    pub fn solve(&self, b: &[f64], x0: Option<Vec<f64>>, opts: &GmresOptions) -> Result<LinearSolution> {
        if let Some(index) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "linear source".into(), index });
        }
        let (mut x, stats) = if self.constant {
            let x = self.precondition(b);
            let r: Vec<f64> = self.apply_bordered(&x).iter().zip(b).map(|(a, b)| a - b).collect();
            let bn = dot(b, b).sqrt();
            let rel = if bn > 0.0 { dot(&r, &r).sqrt() / bn } else { 0.0 };
            (x, GmresStats { iterations: 1, relative_residual: rel, converged: rel <= opts.tol.max(1e-13) })
        } else {
            gmres(|u| self.apply_bordered(u), |r| self.precondition(r), b, x0, opts)
        };
        if !stats.converged {
            return Err(Error::NonConvergence {
                what: "elliptic linear solve".into(),
                iterations: stats.iterations,
                residual: stats.relative_residual,
                report: None,
            });
        }
        let mut shift = 0.0;
        if self.sigma == 0.0 {
            shift = pairwise_sum(&x) / x.len() as f64;
            for v in x.iter_mut() {
                *v -= shift;
            }
        }
        Ok(LinearSolution { x, shift, stats })
    }
}

fn mean_blocks(data: &[Complex64], d: usize) -> Vec<Complex64> {
    let n = data.len() / (d * d);
    (0..d * d)
        .map(|k| {
            let re: Vec<f64> = data.iter().skip(k).step_by(d * d).map(|c| c.re).collect();
            let im: Vec<f64> = data.iter().skip(k).step_by(d * d).map(|c| c.im).collect();
            Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) / n as f64
        })
        .collect()
}

/// Solves `tr_{omega_ref}(ddbar phi) = rho - mean(rho)` with `mean(phi) = 0`, the mean of
/// `rho` taken against `omega_ref^d`.
pub fn poisson_solve(rho: &ScalarField, omega_ref: &HermitianFormField) -> Result<ScalarField> {
    rho.chart().check_same(omega_ref.chart(), "poisson_solve")?;
    rho.check_finite()?;
    let op = EllipticOperator::new(omega_ref, 0.0)?;
    let w = op.det();
    let mean = dot(rho.values(), w) / pairwise_sum(w);
    let b: Vec<f64> = rho.values().iter().map(|v| v - mean).collect();
    let opts = GmresOptions { tol: 1e-12, ..Default::default() };
    let sol = op.solve(&b, None, &opts)?;
    ScalarField::new(rho.chart().clone(), sol.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ddbar, TorusChart};
    use std::f64::consts::PI;

    fn trace_ddbar(phi: &ScalarField, g: &HermitianFormField) -> Vec<f64> {
        let h = ddbar(phi).unwrap();
        let d = g.dim();
        (0..phi.chart().len())
            .map(|p| {
                let mut inv = vec![Complex64::new(0.0, 0.0); d * d];
                linalg::inverse(d, g.at(p), &mut inv);
                linalg::trace_product(d, &inv, h.at(p))
            })
            .collect()
    }

    #[test]
    fn constant_source_gives_zero() {
        let c = TorusChart::square(1, 16).unwrap();
        let g = HermitianFormField::identity(&c, 1.0);
        let phi = poisson_solve(&ScalarField::constant(&c, 3.0), &g).unwrap();
        assert!(phi.sup_norm() < 1e-14);
    }

    #[test]
    fn cosine_on_flat_metric() {
        // tr(ddbar) = (1/g) (d_xx + d_yy)/4 so phi = -cos / (pi^2 / g).
        let c = TorusChart::square(1, 16).unwrap();
        let g = 2.5;
        let metric = HermitianFormField::identity(&c, g);
        let rho = ScalarField::from_fn(&c, |x| (2.0 * PI * x[0]).cos());
        let phi = poisson_solve(&rho, &metric).unwrap();
        for p in 0..c.len() {
            let want = -g * (2.0 * PI * c.coords(p)[0]).cos() / (PI * PI);
            assert!((phi.values()[p] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn variable_metric_residual() {
        let c = TorusChart::new(vec![16, 12], vec![Complex64::i(), Complex64::new(0.2, 0.9)]).unwrap();
        let bump = ScalarField::from_fn(&c, |x| 0.02 * (2.0 * PI * (x[0] + x[3])).cos() + 0.03 * (2.0 * PI * x[2]).sin());
        let metric = HermitianFormField::identity(&c, 1.0).add(&ddbar(&bump).unwrap()).unwrap();
        metric.check_positive(0.1, "test").unwrap();
        let rho = ScalarField::from_fn(&c, |x| (2.0 * PI * x[1]).sin() * (2.0 * PI * x[2]).cos() + 0.4);
        let phi = poisson_solve(&rho, &metric).unwrap();
        assert!(phi.mean().abs() < 1e-14);
        let op = EllipticOperator::new(&metric, 0.0).unwrap();
        let w = op.det();
        let mean = dot(rho.values(), w) / pairwise_sum(w);
        let lhs = trace_ddbar(&phi, &metric);
        let err = lhs.iter().zip(rho.values()).map(|(l, r)| (l - (r - mean)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10 * rho.sup_norm(), "residual {err}");
    }

    #[test]
    fn helmholtz_type_solve() {
        let c = TorusChart::square(1, 32).unwrap();
        let bump = ScalarField::from_fn(&c, |x| 0.01 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos());
        let metric = HermitianFormField::identity(&c, 1.0).add(&ddbar(&bump).unwrap()).unwrap();
        let op = EllipticOperator::new(&metric, 3.0).unwrap();
        let b: Vec<f64> = (0..c.len()).map(|p| (p as f64 * 0.1).sin()).collect();
        let sol = op.solve(&b, None, &GmresOptions { tol: 1e-12, ..Default::default() }).unwrap();
        let r: Vec<f64> = op.apply(&sol.x).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(dot(&r, &r).sqrt() < 1e-11 * dot(&b, &b).sqrt());
    }
}
