use crate::error::{Error, Result};
use crate::forms::ma_top;
use crate::grid::{
    ddbar, integrate, integrate_weighted, EllipticOperator, GmresOptions, HermitianFormField, ScalarField,
    VolumeDensity,
};

use super::SolveReport;

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Target for `sup |lhs - rhs| / sup rhs`.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest admissible eigenvalue of `omega + ddbar phi`.
    pub eig_floor: f64,
    /// Line search gives up below this step length.
    pub min_damping: f64,
    pub linear: GmresOptions,
}

impl NewtonOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            max_iter: 80,
            eig_floor: 1e-8,
            min_damping: 1.0 / 4096.0,
            linear: GmresOptions { tol: 1e-2, abs_tol: 0.0, restart: 60, max_iter: 1200 },
        }
    }
}

/// Shifted metric `omega + ddbar phi` if every eigenvalue clears `floor`.
pub(crate) fn shifted(omega: &HermitianFormField, phi: &ScalarField, floor: f64) -> Result<Option<HermitianFormField>> {
    let w = omega.add(&ddbar(phi)?)?;
    let (min_eig, _) = w.min_eigenvalue();
    Ok(if min_eig >= floor { Some(w) } else { None })
}

fn log_values(v: &VolumeDensity) -> Vec<f64> {
    v.values().iter().map(|x| x.ln()).collect()
}

fn sup_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn axpy(phi: &ScalarField, alpha: f64, delta: &[f64]) -> ScalarField {
    let values = phi.values().iter().zip(delta).map(|(p, d)| p + alpha * d).collect();
    ScalarField::from_vec_unchecked(phi.chart().clone(), values)
}

/// Forcing term: loose far from the solution, tight near it.
fn forcing(g_sup: f64, opts: &NewtonOptions) -> GmresOptions {
    let tol = (0.1 * g_sup).clamp(1e-10, opts.linear.tol);
    GmresOptions { tol, ..opts.linear }
}

fn nonconvergence(what: &str, report: SolveReport) -> Error {
    Error::NonConvergence {
        what: what.into(),
        iterations: report.iterations,
        residual: report.residual_history.last().copied().unwrap_or(f64::NAN),
        report: Some(Box::new(report)),
    }
}

/// Solves `(chi + ddbar phi)^d = F e^phi chi^d` with `tol` as in [`NewtonOptions::tol`].
pub fn solve_twisted_ma(chi: &HermitianFormField, f: &ScalarField, tol: f64) -> Result<(ScalarField, SolveReport)> {
    solve_twisted_ma_with(chi, f, None, &NewtonOptions::with_tol(tol))
}

/// [`solve_twisted_ma`] with an initial guess and explicit options.
pub fn solve_twisted_ma_with(
    chi: &HermitianFormField,
    f: &ScalarField,
    init: Option<&ScalarField>,
    opts: &NewtonOptions,
) -> Result<(ScalarField, SolveReport)> {
    chi.chart().check_same(f.chart(), "solve_twisted_ma")?;
    f.check_finite()?;
    if let Some(index) = f.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Contract(format!("F must be positive (grid index {index})")));
    }
    chi.check_positive(0.0, "chi")?;
    let rhs0 = ma_top(chi);
    if let Some((_, index)) = rhs0.nonpositive() {
        return Err(Error::Positivity { what: "chi^d".into(), index, min_eig: 0.0 });
    }
    // log(F chi^d) and the scale of the right-hand side
    let target: Vec<f64> = f.values().iter().zip(rhs0.values()).map(|(f, m)| (f * m).ln()).collect();
    let scale = target.iter().fold(0.0f64, |m, t| m.max(t.exp()));

    // G = log (chi + ddbar phi)^d - log(F chi^d) - phi
    let eval = |phi: &ScalarField| -> Result<Option<(HermitianFormField, Vec<f64>, f64)>> {
        let Some(w) = shifted(chi, phi, opts.eig_floor)? else { return Ok(None) };
        let lhs = ma_top(&w);
        let mut g = Vec::with_capacity(lhs.values().len());
        let mut res = 0.0f64;
        for ((l, t), p) in lhs.values().iter().zip(&target).zip(phi.values()) {
            g.push(l.ln() - t - p);
            res = res.max((l - (t + p).exp()).abs());
        }
        Ok(Some((w, g, res / scale)))
    };

    let mut phi = init.cloned().unwrap_or_else(|| ScalarField::zeros(chi.chart()));
    phi.check_finite()?;
    let mut report = SolveReport::default();
    let Some(mut state) = eval(&phi)? else {
        return Err(Error::Positivity {
            what: "initial guess".into(),
            index: chi.add(&ddbar(&phi)?)?.min_eigenvalue().1,
            min_eig: chi.add(&ddbar(&phi)?)?.min_eigenvalue().0,
        });
    };
    loop {
        let (w, g, res) = &state;
        report.residual_history.push(*res);
        if !res.is_finite() {
            return Err(nonconvergence("twisted Monge-Ampere", report));
        }
        if *res <= opts.tol {
            report.converged = true;
            break;
        }
        if report.iterations >= opts.max_iter {
            report.oscillation = phi.oscillation();
            return Err(nonconvergence("twisted Monge-Ampere", report));
        }
        let g_sup = sup_abs(g);
        let op = EllipticOperator::new(w, 1.0)?;
        let b: Vec<f64> = g.iter().map(|v| -v).collect();
        let delta = op.solve(&b, None, &forcing(g_sup, opts))?.x;
        let mut alpha = 1.0;
        let next = loop {
            let trial = axpy(&phi, alpha, &delta);
            if let Some(s) = eval(&trial)? {
                if sup_abs(&s.1) <= (1.0 - 1e-4 * alpha) * g_sup {
                    break Some((trial, s));
                }
            }
            alpha *= 0.5;
            if alpha < opts.min_damping {
                break None;
            }
        };
        report.iterations += 1;
        match next {
            Some((trial, s)) => {
                report.damping_history.push(alpha);
                phi = trial;
                state = s;
            }
            None => {
                report.damping_history.push(0.0);
                report.oscillation = phi.oscillation();
                return Err(nonconvergence("twisted Monge-Ampere (damping floor)", report));
            }
        }
    }
    report.oscillation = phi.oscillation();
    Ok((phi, report))
}

/// Solves `(omega + ddbar phi)^d = Omega` with `mean(phi) = 0`.
pub fn solve_calabi(omega: &HermitianFormField, big_omega: &VolumeDensity, tol: f64) -> Result<(ScalarField, SolveReport)> {
    solve_calabi_with(omega, big_omega, None, &NewtonOptions::with_tol(tol))
}

pub fn solve_calabi_with(
    omega: &HermitianFormField,
    big_omega: &VolumeDensity,
    init: Option<&ScalarField>,
    opts: &NewtonOptions,
) -> Result<(ScalarField, SolveReport)> {
    omega.chart().check_same(big_omega.chart(), "solve_calabi")?;
    omega.check_positive(0.0, "omega")?;
    if let Some((_, index)) = big_omega.nonpositive() {
        return Err(Error::Contract(format!("Omega must be strictly positive (grid index {index})")));
    }
    let mass = integrate(&ma_top(omega));
    let given = integrate(big_omega);
    if (given - mass).abs() > 1e-10 * mass.abs() {
        return Err(Error::Normalization(format!("int Omega = {given} but int omega^d = {mass}")));
    }
    // Remove the admissible mismatch so the discrete problem is exactly consistent.
    let big_omega = big_omega.scale(mass / given);
    let target = log_values(&big_omega);
    let scale = big_omega.max();

    let eval = |phi: &ScalarField| -> Result<Option<(HermitianFormField, VolumeDensity, Vec<f64>, f64, f64)>> {
        let Some(w) = shifted(omega, phi, opts.eig_floor)? else { return Ok(None) };
        let lhs = ma_top(&w);
        let mut g = Vec::with_capacity(target.len());
        let mut res = 0.0f64;
        for ((l, t), o) in lhs.values().iter().zip(&target).zip(big_omega.values()) {
            g.push(l.ln() - t);
            res = res.max((l - o).abs());
        }
        let c = integrate_weighted(&g, &lhs) / integrate(&lhs);
        let centered = sup_abs(&g.iter().map(|v| v - c).collect::<Vec<_>>());
        Ok(Some((w, lhs, g, res / scale, centered)))
    };

    let mut phi = match init {
        Some(p) => p.shift(-p.mean()),
        None => ScalarField::zeros(omega.chart()),
    };
    let mut report = SolveReport::default();
    let Some(mut state) = eval(&phi)? else {
        return Err(Error::Positivity { what: "initial guess".into(), index: 0, min_eig: f64::NAN });
    };
    loop {
        let (w, lhs, g, res, centered) = &state;
        report.residual_history.push(*res);
        if *res <= opts.tol {
            report.converged = true;
            break;
        }
        if report.iterations >= opts.max_iter || !res.is_finite() {
            report.oscillation = phi.oscillation();
            return Err(nonconvergence("Calabi equation", report));
        }
        let c = integrate_weighted(g, lhs) / integrate(lhs);
        let b: Vec<f64> = g.iter().map(|v| c - v).collect();
        let op = EllipticOperator::new(w, 0.0)?;
        let delta = op.solve(&b, None, &forcing(*centered, opts))?.x;
        let mut alpha = 1.0;
        let next = loop {
            let trial = axpy(&phi, alpha, &delta);
            if let Some(s) = eval(&trial)? {
                if s.4 <= (1.0 - 1e-4 * alpha) * centered || s.3 <= opts.tol {
                    break Some((trial, s));
                }
            }
            alpha *= 0.5;
            if alpha < opts.min_damping {
                break None;
            }
        };
        report.iterations += 1;
        match next {
            Some((trial, s)) => {
                report.damping_history.push(alpha);
                phi = trial;
                state = s;
            }
            None => {
                report.damping_history.push(0.0);
                report.oscillation = phi.oscillation();
                return Err(nonconvergence("Calabi equation (damping floor)", report));
            }
        }
    }
    report.oscillation = phi.oscillation();
    Ok((phi, report))
}

/// Directional derivative of `phi -> log (chi + ddbar phi)^d - phi` at `phi` along `delta`,
/// i.e. the operator used in each Newton step.
pub fn linearized_twisted(chi: &HermitianFormField, phi: &ScalarField, delta: &ScalarField) -> Result<ScalarField> {
    let w = chi.add(&ddbar(phi)?)?;
    let op = EllipticOperator::new(&w, 1.0)?;
    ScalarField::new(phi.chart().clone(), op.apply(delta.values()))
}
