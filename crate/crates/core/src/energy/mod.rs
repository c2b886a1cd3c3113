//! Mabuchi and generalized Mabuchi functionals, extremal residuals and the small-`t`
//! asymptotics of the Mabuchi energy in the collapsing classes `chi + t omega0`.

mod adjunction;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{ma_top, ricci, trace, wedge_density, WedgeWord};
use crate::grid::{ddbar, integrate, integrate_weighted, HermitianFormField, ScalarField};

pub use adjunction::{
    a_closed_form, a_formal_expansion, a_resolved, adjunction_expansion, fit_expansion, surface_adjunction,
    surface_twist, CoefficientTable, ExpansionReport, EXPANSION_CSV_COLUMNS,
};

/// `mu = int (ric - theta) ^ omega^{n-1} / int omega^n`.
///
/// With `n theta ^ omega^{n-1} = tr_omega(theta) omega^n`, the `omega^n`-average of
/// `S - tr theta` is `n mu`.
pub fn mu_constant(omega: &HermitianFormField, theta: &HermitianFormField, ric: &HermitianFormField) -> Result<f64> {
    let n = omega.dim();
    let den = integrate(&ma_top(omega));
    if !(den.abs() > 1e-300) || !den.is_finite() {
        return Err(Error::Contract(format!("degenerate class: int omega^n = {den:e}")));
    }
    let a = ric.sub(theta)?;
    let num = integrate(&wedge_density(&WedgeWord::new().with(&a, 1).with(omega, n - 1))?);
    Ok(num / den)
}

fn positive_metric(omega: &HermitianFormField, phi: &ScalarField) -> Result<HermitianFormField> {
    let w = omega.add(&ddbar(phi)?)?;
    w.check_positive(f64::MIN_POSITIVE, "omega_phi")?;
    Ok(w)
}

/// `K_omega(phi)`, the generalized functional at `theta = 0`.
pub fn mabuchi(omega: &HermitianFormField, phi: &ScalarField) -> Result<f64> {
    generalized_mabuchi(omega, &HermitianFormField::zeros(omega.chart()), phi)
}

/// `K_{omega,theta}(phi) = int log(omega_phi^n / omega^n) omega_phi^n
///   - sum_{j<n} int phi (Ric(omega) - theta) ^ omega^j ^ omega_phi^{n-1-j}
///   + n mu / (n+1) sum_{j<=n} int phi omega^j ^ omega_phi^{n-j}`.
pub fn generalized_mabuchi(omega: &HermitianFormField, theta: &HermitianFormField, phi: &ScalarField) -> Result<f64> {
    omega.chart().check_same(phi.chart(), "mabuchi potential")?;
    omega.check_positive(f64::MIN_POSITIVE, "reference metric")?;
    let n = omega.dim();
    let w = positive_metric(omega, phi)?;
    let (mw, m0) = (ma_top(&w), ma_top(omega));
    let log_ratio: Vec<f64> = mw.values().iter().zip(m0.values()).map(|(a, b)| (a / b).ln()).collect();
    let entropy = integrate_weighted(&log_ratio, &mw);

    let ric = ricci(omega)?;
    let mu = mu_constant(omega, theta, &ric)?;
    let a = ric.sub(theta)?;
    let mut pairing = 0.0;
    for j in 0..n {
        let d = wedge_density(&WedgeWord::new().with(&a, 1).with(omega, j).with(&w, n - 1 - j))?;
        pairing += integrate_weighted(phi.values(), &d);
    }
    let mut aubin = 0.0;
    for j in 0..=n {
        let d = wedge_density(&WedgeWord::new().with(omega, j).with(&w, n - j))?;
        aubin += integrate_weighted(phi.values(), &d);
    }
    Ok(entropy - pairing + n as f64 * mu / (n as f64 + 1.0) * aubin)
}

/// `S(omega_phi) - tr_{omega_phi}(theta) - n mu`, whose `omega_phi^n`-mean vanishes.
pub fn extremal_residual(omega_phi: &HermitianFormField, theta: &HermitianFormField) -> Result<ScalarField> {
    omega_phi.check_positive(f64::MIN_POSITIVE, "omega_phi")?;
    let ric = ricci(omega_phi)?;
    let n = omega_phi.dim() as f64;
    let mu = mu_constant(omega_phi, theta, &ric)?;
    let s = trace(omega_phi, &ric.sub(theta)?)?;
    Ok(s.shift(-n * mu))
}

/// `-int delta (S - tr theta - n mu) omega_phi^n`, the derivative of `K_{omega,theta}` at `phi`
/// in the direction `delta`.
pub fn mabuchi_variation(
    omega: &HermitianFormField,
    theta: &HermitianFormField,
    phi: &ScalarField,
    delta: &ScalarField,
) -> Result<f64> {
    let w = positive_metric(omega, phi)?;
    let r = extremal_residual(&w, theta)?;
    let rd: Vec<f64> = r.values().iter().zip(delta.values()).map(|(a, b)| a * b).collect();
    Ok(-integrate_weighted(&rd, &ma_top(&w)))
}

/// Gauss-Legendre nodes and weights on `[0, 1]` (Golub-Welsch).
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut out: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let v = eig.eigenvectors[(0, i)];
            ((eig.eigenvalues[i] + 1.0) / 2.0, v * v)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Path of potentials `s -> (phi_s, d/ds phi_s)` from `0` at `s = 0`.
pub type PotentialPath<'a> = dyn Fn(f64) -> Result<(ScalarField, ScalarField)> + Sync + 'a;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathShape {
    /// `s phi`.
    Linear,
    /// `(3 s^2 - 2 s^3) phi`.
    Cubic,
}

/// Straight path to `phi` with the given time parametrization.
pub fn straight_path(phi: &ScalarField, shape: PathShape) -> impl Fn(f64) -> Result<(ScalarField, ScalarField)> + Sync + '_ {
    move |s| {
        let (r, dr) = match shape {
            PathShape::Linear => (s, 1.0),
            PathShape::Cubic => (3.0 * s * s - 2.0 * s * s * s, 6.0 * s - 6.0 * s * s),
        };
        Ok((phi.scale(r), phi.scale(dr)))
    }
}

/// `-int_0^1 int phidot_s (S - tr theta - n mu) omega_s^n ds` by `nodes`-point Gauss-Legendre.
pub fn path_mabuchi(omega: &HermitianFormField, theta: &HermitianFormField, path: &PotentialPath, nodes: usize) -> Result<f64> {
    let terms: Vec<f64> = gauss_legendre(nodes)
        .into_par_iter()
        .map(|(s, wt)| {
            let (phi, dphi) = path(s)?;
            Ok(wt * mabuchi_variation(omega, theta, &phi, &dphi)?)
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// Evaluation of an energy functional.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    pub path_value: Option<f64>,
    pub residual_field: Option<ScalarField>,
    pub expansion: Option<ExpansionReport>,
}

/// Direct value, optional path value and extremal residual of `K_{omega,theta}(phi)`.
pub fn energy_report(
    omega: &HermitianFormField,
    theta: &HermitianFormField,
    phi: &ScalarField,
    path: Option<(PathShape, usize)>,
) -> Result<EnergyReport> {
    let value = generalized_mabuchi(omega, theta, phi)?;
    let path_value = match path {
        Some((shape, nodes)) => Some(path_mabuchi(omega, theta, &straight_path(phi, shape), nodes)?),
        None => None,
    };
    let residual_field = Some(extremal_residual(&positive_metric(omega, phi)?, theta)?);
    Ok(EnergyReport { value, path_value, residual_field, expansion: None })
}

#[cfg(test)]
mod tests;
