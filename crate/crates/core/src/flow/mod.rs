//! Normalized Kahler-Ricci flow on the potential level,
//! `d/dt phi = log(e^{(n-k)t} (omega_t + ddbar phi)^n / Omega) - phi`,
//! with `omega_t = chi + e^{-t}(omega0 - chi)`.

mod limit;
mod run;
mod stepper;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibration::{binomial, FibrationModel};
use crate::forms::ma_top;
use crate::grid::{ddbar, HermitianFormField, ScalarField, TorusChart, VolumeDensity};

pub use limit::{canonical_limit, convergence_check, limit_identity, CanonicalLimit, ConvergenceReport, LimitResidual};
pub use run::{diagnostics, run_flow, Checkpoint, DiagnosticsRecord, FlowSchedule, Trajectory, CSV_COLUMNS};
pub use stepper::{step, stability_limit, Scheme, StepOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    /// Potential on the whole product.
    Full,
    /// Potential on the base only; needs fiber-homogeneous data.
    Reduced,
}

/// `chi + e^{-t}(omega0 - chi)`.
pub fn reference_metric(t: f64, chi: &HermitianFormField, omega0: &HermitianFormField) -> Result<HermitianFormField> {
    let e = (-t).exp();
    chi.add_scaled(e, &omega0.sub(chi)?)
}

/// Time-independent data of the flow in either mode.
///
/// Both modes evaluate `log ma_top(omega_t + ddbar phi) + a t + b - log target - phi`:
/// in full mode `a = n - k`, `b = 0` and the target is `Omega`; in reduced mode the fiber
/// factor `(e^{-t} omega_fiber)^{n-k}` cancels the exponential, `a = 0`,
/// `b = log binom(n, k)` and the target is `f_* Omega` on the base.
#[derive(Clone, Debug)]
pub struct FlowSystem {
    mode: FlowMode,
    model: FibrationModel,
    chi: HermitianFormField,
    omega0: HermitianFormField,
    target: VolumeDensity,
    log_target: Vec<f64>,
    rate: f64,
    offset: f64,
}

/// Relative deviation from constancy along the fibers.
fn fiber_spread(model: &FibrationModel, values: &[f64]) -> f64 {
    (0..model.base().len())
        .map(|b| {
            let s = model.fiber_slice(values, b);
            let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            (hi - lo) / hi.abs().max(lo.abs()).max(1e-300)
        })
        .fold(0.0, f64::max)
}

impl FlowSystem {
    pub fn new(model: &FibrationModel, mode: FlowMode) -> Result<Self> {
        let (n, k) = (model.n(), model.kappa());
        match mode {
            FlowMode::Full => {
                if !model.is_isotrivial() {
                    return Err(Error::Contract("full mode needs a constant fiber modulus".into()));
                }
                let target = model.big_omega().clone();
                Ok(Self {
                    mode,
                    model: model.clone(),
                    chi: model.pullback_form(model.chi())?,
                    omega0: model.omega0().clone(),
                    log_target: target.values().iter().map(|v| v.ln()).collect(),
                    target,
                    rate: (n - k) as f64,
                    offset: 0.0,
                })
            }
            FlowMode::Reduced => {
                let omega0 = model.omega0();
                let d = n;
                let tol = 1e-10;
                // block-diagonal omega0 whose base block is constant along the fibers
                let mixed = omega0
                    .data()
                    .chunks(d * d)
                    .flat_map(|b| (0..k).flat_map(move |i| (k..d).map(move |j| b[i * d + j].norm())))
                    .fold(0.0, f64::max);
                if mixed > tol {
                    return Err(Error::Contract(format!("reduced mode needs a block-diagonal omega0 (mixed {mixed:e})")));
                }
                let nf = model.fiber().len();
                let blk = omega0.block(0..k);
                let mut base_data = Vec::with_capacity(model.base().len() * k * k);
                for b in 0..model.base().len() {
                    let first = blk.at(b * nf);
                    for q in 1..nf {
                        let dev = blk.at(b * nf + q).iter().zip(first).map(|(a, c)| (a - c).norm()).fold(0.0, f64::max);
                        if dev > tol {
                            return Err(Error::Contract("reduced mode needs omega0 constant along the fibers".into()));
                        }
                    }
                    base_data.extend_from_slice(first);
                }
                let fiber_top = model.fiber_top(omega0);
                let ratio: Vec<f64> =
                    model.big_omega().values().iter().zip(fiber_top.values()).map(|(o, t)| o / t).collect();
                let spread = fiber_spread(model, &ratio);
                if spread > tol {
                    return Err(Error::Contract(format!(
                        "reduced mode needs Omega / omega0_fiber^(n-k) constant along the fibers (spread {spread:e})"
                    )));
                }
                let target = model.pushforward(model.big_omega())?;
                Ok(Self {
                    mode,
                    model: model.clone(),
                    chi: model.chi().clone(),
                    omega0: HermitianFormField::new(model.base().clone(), base_data)?,
                    log_target: target.values().iter().map(|v| v.ln()).collect(),
                    target,
                    rate: 0.0,
                    offset: binomial(n, k).ln(),
                })
            }
        }
    }

    pub fn mode(&self) -> FlowMode {
        self.mode
    }

    pub fn model(&self) -> &FibrationModel {
        &self.model
    }

    /// Chart the potential lives on.
    pub fn chart(&self) -> &TorusChart {
        self.chi.chart()
    }

    /// `chi` on the working chart.
    pub fn chi(&self) -> &HermitianFormField {
        &self.chi
    }

    /// Reference form at `t = 0` on the working chart (the base block in reduced mode).
    pub fn omega0(&self) -> &HermitianFormField {
        &self.omega0
    }

    /// `Omega` (full) or `f_* Omega` (reduced).
    pub fn target(&self) -> &VolumeDensity {
        &self.target
    }

    /// Base field expressed on the working chart.
    pub fn lift(&self, f: &ScalarField) -> Result<ScalarField> {
        match self.mode {
            FlowMode::Full => self.model.pullback(f),
            FlowMode::Reduced => Ok(f.clone()),
        }
    }

    /// `omega_t + ddbar phi`, not checked for positivity.
    pub fn metric(&self, t: f64, phi: &ScalarField) -> Result<HermitianFormField> {
        reference_metric(t, &self.chi, &self.omega0)?.add(&ddbar(phi)?)
    }

    /// `omega_t + ddbar phi`, or a cone-exit error.
    pub fn positive_metric(&self, t: f64, phi: &ScalarField) -> Result<HermitianFormField> {
        let w = self.metric(t, phi)?;
        let (min_eig, index) = w.min_eigenvalue();
        if !(min_eig > 0.0) {
            return Err(Error::ConeExit { t, index, min_eig });
        }
        Ok(w)
    }

    /// `u = log(e^{(n-k)t} omega^n / Omega)` in the units of the working chart.
    pub(crate) fn log_density(&self, t: f64, w: &HermitianFormField) -> Vec<f64> {
        let shift = self.rate * t + self.offset;
        ma_top(w).values().iter().zip(&self.log_target).map(|(m, l)| m.ln() + shift - l).collect()
    }

    /// Right-hand side together with the metric it was evaluated at.
    pub(crate) fn rhs_with_metric(&self, t: f64, phi: &ScalarField) -> Result<(HermitianFormField, ScalarField)> {
        self.chart().check_same(phi.chart(), "flow potential")?;
        let w = self.positive_metric(t, phi)?;
        let u = self.log_density(t, &w);
        let rhs = u.iter().zip(phi.values()).map(|(u, p)| u - p).collect();
        Ok((w, ScalarField::new(self.chart().clone(), rhs)?))
    }

    /// `d/dt phi` at `(t, phi)`.
    pub fn rhs(&self, t: f64, phi: &ScalarField) -> Result<ScalarField> {
        Ok(self.rhs_with_metric(t, phi)?.1)
    }
}

/// `d/dt phi` at `(t, phi)` for `system`.
pub fn flow_rhs(phi: &ScalarField, t: f64, system: &FlowSystem) -> Result<ScalarField> {
    system.rhs(t, phi)
}

/// Position of the flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    pub phi: ScalarField,
    pub mode: FlowMode,
    pub step_count: usize,
}

impl FlowState {
    pub fn initial(system: &FlowSystem) -> Self {
        Self { t: 0.0, phi: ScalarField::zeros(system.chart()), mode: system.mode(), step_count: 0 }
    }
}
