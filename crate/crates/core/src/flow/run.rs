use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{gradient_norm_sq, ma_top, scalar_curvature};
use crate::grid::ScalarField;

use super::stepper::{stability_limit, step, Scheme, StepOptions};
use super::{FlowMode, FlowState, FlowSystem};

/// Horizon, time step and output cadence of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSchedule {
    pub horizon: f64,
    /// Fixed step of the semi-implicit scheme; upper bound for the explicit one, which
    /// otherwise uses `0.4 / lambda_max` at the current state.
    pub dt: f64,
    pub scheme: Scheme,
    pub probes: Vec<f64>,
    #[serde(default)]
    pub checkpoint_interval: Option<f64>,
}

impl FlowSchedule {
    /// Probes every `spacing` on `[0, horizon]`.
    pub fn uniform(horizon: f64, dt: f64, scheme: Scheme, spacing: f64) -> Self {
        let count = (horizon / spacing).round() as usize;
        let probes = (0..=count).map(|k| k as f64 * spacing).collect();
        Self { horizon, dt, scheme, probes, checkpoint_interval: None }
    }
}

/// Diagnostics of one probe time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub sup_phi: f64,
    pub inf_phi: f64,
    pub sup_phidot: f64,
    pub inf_phidot: f64,
    /// `sup e^{(n-k)t} omega^n / Omega`.
    pub sup_e_nt_vol_ratio: f64,
    /// `sup_y e^{(n-k)t} int_{X_y} omega^{n-k}`.
    pub fiber_vol_ratio: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// `sup |du|^2_omega` for `u = phidot + phi`.
    pub grad_u_sup: f64,
    /// `sup_y osc_{X_y} phi`.
    pub fiber_osc: f64,
    pub c0_dist_to_limit: Option<f64>,
    /// `sup |u - log(e^{(n-k)t} omega^n / Omega)|`, recomputed from the metric.
    pub u_identity_error: f64,
    pub min_eigenvalue: f64,
}

pub type Checkpoint = FlowState;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub final_state: FlowState,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "t",
    "sup_phi",
    "inf_phi",
    "sup_phidot",
    "sup_e_nt_vol_ratio",
    "fiber_vol_ratio",
    "R_min",
    "R_max",
    "grad_u_sup",
    "fiber_osc",
    "c0_dist_to_limit",
];

impl Trajectory {
    /// One row per probe; an unknown limit distance is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for r in &self.records {
            let c0 = r.c0_dist_to_limit.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.sup_phi,
                r.inf_phi,
                r.sup_phidot,
                r.sup_e_nt_vol_ratio,
                r.fiber_vol_ratio,
                r.r_min,
                r.r_max,
                r.grad_u_sup,
                r.fiber_osc,
                c0
            );
        }
        out
    }
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)))
}

/// Diagnostics at `state`; `limit` is a base potential to measure the distance to.
pub fn diagnostics(system: &FlowSystem, state: &FlowState, limit: Option<&ScalarField>) -> Result<DiagnosticsRecord> {
    let (t, phi) = (state.t, &state.phi);
    let model = system.model();
    let (w, phidot) = system.rhs_with_metric(t, phi)?;
    let u = phi.add(&phidot)?;
    let collapse = (model.n() - model.kappa()) as i32;
    let e_nt = (collapse as f64 * t).exp();

    let m = ma_top(&w);
    let direct: Vec<f64> = match system.mode() {
        FlowMode::Full => m.values().iter().zip(system.target().values()).map(|(m, o)| (e_nt * m / o).ln()).collect(),
        FlowMode::Reduced => {
            let b = crate::fibration::binomial(model.n(), model.kappa());
            m.values().iter().zip(system.target().values()).map(|(m, p)| (b * m / p).ln()).collect()
        }
    };
    let u_identity_error = u.values().iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let sup_e_nt_vol_ratio = direct.iter().map(|v| v.exp()).fold(0.0, f64::max);

    let (fiber_vol_ratio, fiber_osc) = match system.mode() {
        FlowMode::Full => {
            let mass = model.pushforward(&model.fiber_top(&w))?;
            let osc = (0..model.base().len())
                .map(|b| {
                    let (lo, hi) = extrema(model.fiber_slice(phi.values(), b));
                    hi - lo
                })
                .fold(0.0, f64::max);
            (mass.values().iter().map(|v| e_nt * v).fold(0.0, f64::max), osc)
        }
        FlowMode::Reduced => {
            // omega restricted to a fiber is e^{-t} times the fiber block of omega0
            let mass = model.pushforward(&model.fiber_top(model.omega0()))?;
            let shrink = (-(collapse as f64) * t).exp();
            (mass.values().iter().map(|v| e_nt * shrink * v).fold(0.0, f64::max), 0.0)
        }
    };
    let (r_min, r_max) = extrema(scalar_curvature(&w)?.values());
    let grad_u_sup = gradient_norm_sq(&w, &u)?.sup();
    let c0_dist_to_limit = match limit {
        Some(l) => Some(phi.sub(&system.lift(l)?)?.sup_norm()),
        None => None,
    };
    Ok(DiagnosticsRecord {
        t,
        sup_phi: phi.sup(),
        inf_phi: phi.inf(),
        sup_phidot: phidot.sup(),
        inf_phidot: phidot.inf(),
        sup_e_nt_vol_ratio,
        fiber_vol_ratio,
        r_min,
        r_max,
        grad_u_sup,
        fiber_osc,
        c0_dist_to_limit,
        u_identity_error,
        min_eigenvalue: w.min_eigenvalue().0,
    })
}

/// Integrates from `init` to the horizon, recording diagnostics at the probe times and the
/// state at every checkpoint. Steps are truncated to land exactly on probe and checkpoint
/// times, so a run restarted from a checkpoint reproduces the uninterrupted one bit for bit.
pub fn run_flow(
    system: &FlowSystem,
    init: FlowState,
    schedule: &FlowSchedule,
    limit: Option<&ScalarField>,
) -> Result<Trajectory> {
    if init.mode != system.mode() {
        return Err(Error::Contract("initial state and flow system use different modes".into()));
    }
    if !(schedule.dt > 0.0) || !(schedule.horizon >= init.t) {
        return Err(Error::Contract("schedule needs dt > 0 and a horizon past the start".into()));
    }
    let opts = StepOptions { scheme: schedule.scheme, ..Default::default() };
    let mut stops: Vec<(f64, bool, bool)> = Vec::new();
    for &p in &schedule.probes {
        if p >= init.t && p <= schedule.horizon {
            stops.push((p, true, false));
        }
    }
    if let Some(every) = schedule.checkpoint_interval {
        if !(every > 0.0) {
            return Err(Error::Contract("checkpoint interval must be positive".into()));
        }
        let mut k = 1;
        while k as f64 * every <= schedule.horizon + 1e-12 {
            let c = k as f64 * every;
            if c > init.t {
                stops.push((c.min(schedule.horizon), false, true));
            }
            k += 1;
        }
    }
    stops.push((schedule.horizon, false, false));
    stops.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, bool, bool)> = Vec::new();
    for s in stops {
        match merged.last_mut() {
            Some(last) if (last.0 - s.0).abs() <= 1e-12 => {
                last.1 |= s.1;
                last.2 |= s.2;
            }
            _ => merged.push(s),
        }
    }

    let mut state = init;
    let mut records = Vec::new();
    let mut checkpoints = Vec::new();
    for (stop, probe, checkpoint) in merged {
        while state.t < stop {
            let mut h = schedule.dt;
            if schedule.scheme == Scheme::ExplicitRk4 {
                h = h.min(stability_limit(system, state.t, &state.phi)?);
            }
            let land = stop - state.t <= h * (1.0 + 1e-9);
            if land {
                h = stop - state.t;
            }
            state = step(system, &state, h, &opts)?;
            if land {
                state.t = stop;
            }
        }
        if probe {
            records.push(diagnostics(system, &state, limit)?);
        }
        if checkpoint {
            checkpoints.push(state.clone());
        }
    }
    Ok(Trajectory { records, checkpoints, final_state: state })
}
