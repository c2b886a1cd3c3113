use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::ma_top;
use crate::grid::{HermitianFormField, ScalarField, VolumeDensity};

use super::newton::{shifted, solve_twisted_ma_with, NewtonOptions};
use super::SolveReport;

/// One solve along the continuity path.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuityStep {
    pub j: usize,
    pub oscillation: f64,
    pub sup: f64,
    pub inf: f64,
    pub report: SolveReport,
}

#[derive(Clone, Debug)]
pub struct ContinuityResult {
    pub phi: ScalarField,
    pub steps: Vec<ContinuityStep>,
    /// Solution of every step, in schedule order.
    pub solutions: Vec<ScalarField>,
}

/// Geometric schedule `1, 2, 4, ...` with `steps` entries.
pub fn geometric_schedule(steps: usize) -> Vec<usize> {
    (0..steps).map(|k| 1usize << k).collect()
}

/// Solves `(chi_j + ddbar phi_j)^d = e^{phi_j} target` for `chi_j = chi + omega_aux / j` along
/// `schedule`, warm-starting every step from the previous solution.
///
/// In terms of the twisted equation this is `F_j = target / chi_j^d`. If `chi` is already
/// positive no regularization is needed and a single solve with `chi` itself is returned.
pub fn continuity_path(
    chi: &HermitianFormField,
    omega_aux: &HermitianFormField,
    target: &VolumeDensity,
    schedule: &[usize],
    opts: &NewtonOptions,
) -> Result<ContinuityResult> {
    chi.chart().check_same(omega_aux.chart(), "continuity_path")?;
    chi.chart().check_same(target.chart(), "continuity_path")?;
    omega_aux.check_positive(f64::MIN_POSITIVE, "omega_aux")?;
    if let Some((_, index)) = target.nonpositive() {
        return Err(Error::Contract(format!("target density must be positive (grid index {index})")));
    }
    let (min_eig, index) = chi.min_eigenvalue();
    if min_eig < -1e-12 {
        return Err(Error::Positivity { what: "chi must be semi-positive".into(), index, min_eig });
    }
    let single = min_eig > opts.eig_floor;
    let plan: Vec<(usize, HermitianFormField)> = if single {
        vec![(0, chi.clone())]
    } else {
        if schedule.is_empty() {
            return Err(Error::Contract("degenerate chi needs a nonempty schedule".into()));
        }
        schedule
            .iter()
            .map(|&j| Ok((j, chi.add_scaled(1.0 / j as f64, omega_aux)?)))
            .collect::<Result<_>>()?
    };
    let mut steps = Vec::new();
    let mut solutions: Vec<ScalarField> = Vec::new();
    for (k, (j, chi_j)) in plan.into_iter().enumerate() {
        let rhs = ma_top(&chi_j);
        let f = ScalarField::new(
            chi.chart().clone(),
            target.values().iter().zip(rhs.values()).map(|(t, m)| t / m).collect(),
        )?;
        // Warm start only when it is admissible for the new reference form.
        let init = match solutions.last() {
            Some(prev) if shifted(&chi_j, prev, opts.eig_floor)?.is_some() => Some(prev.clone()),
            _ => None,
        };
        let (phi, report) = solve_twisted_ma_with(&chi_j, &f, init.as_ref(), opts)
            .map_err(|e| Error::ContinuityStep { step: k, source: Box::new(e) })?;
        steps.push(ContinuityStep { j, oscillation: phi.oscillation(), sup: phi.sup(), inf: phi.inf(), report });
        solutions.push(phi);
    }
    let phi = solutions.last().cloned().expect("at least one step");
    Ok(ContinuityResult { phi, steps, solutions })
}
