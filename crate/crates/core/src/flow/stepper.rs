use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EllipticOperator, GmresOptions, ScalarField};

use super::{FlowState, FlowSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitRk4,
    /// Two-stage linearly implicit Rosenbrock (ROS2) with the Jacobian
    /// `tr_omega ddbar - 1` frozen at the start of the step; second order for any Jacobian.
    SemiImplicit,
}

#[derive(Clone, Copy, Debug)]
pub struct StepOptions {
    pub scheme: Scheme,
    pub linear: GmresOptions,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { scheme: Scheme::SemiImplicit, linear: GmresOptions { tol: 1e-12, abs_tol: 1e-13, restart: 60, max_iter: 1200 } }
    }
}

const ROS2_GAMMA: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

/// Largest explicit step, `0.4 / lambda_max` of the linearized operator at `(t, phi)`.
pub fn stability_limit(system: &FlowSystem, t: f64, phi: &ScalarField) -> Result<f64> {
    let w = system.positive_metric(t, phi)?;
    Ok(0.4 / EllipticOperator::new(&w, 1.0)?.spectral_radius_bound())
}

fn axpy(phi: &ScalarField, terms: &[(f64, &ScalarField)]) -> ScalarField {
    let mut v = phi.values().to_vec();
    for (c, f) in terms {
        for (a, b) in v.iter_mut().zip(f.values()) {
            *a += c * b;
        }
    }
    ScalarField::new(phi.chart().clone(), v).expect("same chart")
}

/// Advances `state` by `dt`; the new potential is checked to stay in the cone.
pub fn step(system: &FlowSystem, state: &FlowState, dt: f64, opts: &StepOptions) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(Error::Contract(format!("time step {dt} must be positive")));
    }
    let (t, phi) = (state.t, &state.phi);
    let next = match opts.scheme {
        Scheme::ExplicitRk4 => {
            let (w, k1) = system.rhs_with_metric(t, phi)?;
            let limit = 0.4 / EllipticOperator::new(&w, 1.0)?.spectral_radius_bound();
            if dt > limit {
                return Err(Error::Contract(format!("explicit step {dt:e} exceeds the stability limit {limit:e}")));
            }
            let h = dt;
            let k2 = system.rhs(t + h / 2.0, &axpy(phi, &[(h / 2.0, &k1)]))?;
            let k3 = system.rhs(t + h / 2.0, &axpy(phi, &[(h / 2.0, &k2)]))?;
            let k4 = system.rhs(t + h, &axpy(phi, &[(h, &k3)]))?;
            axpy(phi, &[(h / 6.0, &k1), (h / 3.0, &k2), (h / 3.0, &k3), (h / 6.0, &k4)])
        }
        Scheme::SemiImplicit => {
            // (I - g h J) k = r with J = tr ddbar - 1 becomes
            // tr ddbar k - (1 + g h)/(g h) k = -r / (g h).
            let (w, r1) = system.rhs_with_metric(t, phi)?;
            let gh = ROS2_GAMMA * dt;
            let op = EllipticOperator::new(&w, (1.0 + gh) / gh)?;
            let solve = |r: &ScalarField| -> Result<ScalarField> {
                let b: Vec<f64> = r.values().iter().map(|v| -v / gh).collect();
                ScalarField::new(r.chart().clone(), op.solve(&b, None, &opts.linear)?.x)
            };
            let k1 = solve(&r1)?;
            let r2 = system.rhs(t + dt, &axpy(phi, &[(dt, &k1)]))?;
            let k2 = solve(&axpy(&r2, &[(-2.0, &k1)]))?;
            axpy(phi, &[(1.5 * dt, &k1), (0.5 * dt, &k2)])
        }
    };
    next.check_finite()?;
    system.positive_metric(t + dt, &next)?;
    Ok(FlowState { t: t + dt, phi: next, mode: state.mode, step_count: state.step_count + 1 })
}
