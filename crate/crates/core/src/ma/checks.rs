use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::ma_top;
use crate::grid::{ddbar, HermitianFormField, ScalarField, TorusChart, VolumeDensity};

use super::newton::{solve_twisted_ma_with, NewtonOptions};
use super::SolveReport;

/// Calibration constant of the sublevel-set allowance `C h^2`.
pub const DISC_CONSTANT: f64 = 1.0;

/// `C h^2` with `h` the coarsest unit-square grid spacing of the chart.
pub fn disc_allowance(chart: &TorusChart) -> f64 {
    let n = *chart.resolutions().iter().min().expect("nonempty chart") as f64;
    DISC_CONSTANT / (n * n)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// `int_{phi < psi} (omega + ddbar psi)^d`
    pub lhs: f64,
    /// `int_{phi < psi} (omega + ddbar phi)^d`
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative in the continuum.
    pub gap: f64,
    pub eps_disc: f64,
    pub set_points: usize,
    pub passed: bool,
}

/// Evaluates both sides of the comparison principle on the discrete set `{phi < psi}`.
pub fn comparison_check(phi: &ScalarField, psi: &ScalarField, omega: &HermitianFormField) -> Result<ComparisonReport> {
    phi.chart().check_same(psi.chart(), "comparison_check")?;
    phi.chart().check_same(omega.chart(), "comparison_check")?;
    let w_phi = omega.add(&ddbar(phi)?)?;
    let w_psi = omega.add(&ddbar(psi)?)?;
    w_phi.check_positive(0.0, "omega + ddbar phi")?;
    w_psi.check_positive(0.0, "omega + ddbar psi")?;
    let (m_phi, m_psi) = (ma_top(&w_phi), ma_top(&w_psi));
    let mask: Vec<f64> = phi.values().iter().zip(psi.values()).map(|(a, b)| if a < b { 1.0 } else { 0.0 }).collect();
    let lhs = crate::grid::integrate_weighted(&mask, &m_psi);
    let rhs = crate::grid::integrate_weighted(&mask, &m_phi);
    let eps_disc = disc_allowance(phi.chart());
    let gap = rhs - lhs;
    Ok(ComparisonReport {
        lhs,
        rhs,
        gap,
        eps_disc,
        set_points: mask.iter().filter(|&&m| m > 0.0).count(),
        passed: gap >= -eps_disc,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// `sup (e^{phi_a} Omega_a - e^{phi_b} Omega_b)`, clipped at 0.
    pub worst_violation: f64,
    pub eps_disc: f64,
    pub passed: bool,
    pub report_a: SolveReport,
    pub report_b: SolveReport,
}

/// Reference form attached to a density in the coupled convention:
/// `chi_Omega = chi + ddbar log(Omega / Omega_a)`.
pub fn coupled_reference(chi: &HermitianFormField, omega_a: &VolumeDensity, omega: &VolumeDensity) -> Result<HermitianFormField> {
    let ratio = ScalarField::new(
        omega.chart().clone(),
        omega.values().iter().zip(omega_a.values()).map(|(b, a)| (b / a).ln()).collect(),
    )?;
    chi.add(&ddbar(&ratio)?)
}

/// Solves `(chi_* + ddbar phi_*)^d = e^{phi_*} Omega_*` for both densities and scans
/// `e^{phi_a} Omega_a <= e^{phi_b} Omega_b` pointwise.
///
/// `chi_a = chi` and `chi_b` is the coupled reference of `Omega_b` (see [`coupled_reference`]),
/// so that each reference form moves with its volume form as the curvature of the
/// corresponding metric does.
pub fn monotonicity_check(
    omega_a: &VolumeDensity,
    omega_b: &VolumeDensity,
    chi: &HermitianFormField,
    opts: &NewtonOptions,
) -> Result<MonotonicityReport> {
    omega_a.chart().check_same(omega_b.chart(), "monotonicity_check")?;
    omega_a.chart().check_same(chi.chart(), "monotonicity_check")?;
    if omega_a.nonpositive().is_some() || omega_b.nonpositive().is_some() {
        return Err(Error::Contract("both densities must be positive".into()));
    }
    if let Some(p) = omega_a.values().iter().zip(omega_b.values()).position(|(a, b)| a > b) {
        return Err(Error::Contract(format!("Omega_a <= Omega_b violated at grid index {p}")));
    }
    let chi_b = coupled_reference(chi, omega_a, omega_b)?;
    let solve = |c: &HermitianFormField, o: &VolumeDensity| -> Result<(ScalarField, SolveReport)> {
        let m = ma_top(c);
        let f = ScalarField::new(c.chart().clone(), o.values().iter().zip(m.values()).map(|(o, m)| o / m).collect())?;
        solve_twisted_ma_with(c, &f, None, opts)
    };
    let (phi_a, report_a) = solve(chi, omega_a)?;
    let (phi_b, report_b) = solve(&chi_b, omega_b)?;
    let mut worst = 0.0f64;
    for p in 0..phi_a.values().len() {
        let a = phi_a.values()[p].exp() * omega_a.values()[p];
        let b = phi_b.values()[p].exp() * omega_b.values()[p];
        worst = worst.max(a - b);
    }
    let eps_disc = disc_allowance(chi.chart());
    Ok(MonotonicityReport { worst_violation: worst, eps_disc, passed: worst <= eps_disc, report_a, report_b })
}
