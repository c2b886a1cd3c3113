//! Built-in scenario registry.

use std::f64::consts::PI;

use kahler_lab::flow::{FlowMode, Scheme};

use crate::config::{EnergyKind, EnergySpec, ExperimentConfig, FlowSpec, SolverSpec};
use crate::error::{CliError, Result};
use crate::model::{FormSpec, Mode, ModelSpec, OmegaSpec};

pub const NAMES: [&str; 6] =
    ["stationary", "product_generic", "varying_tau", "degenerate_chi", "mabuchi_adjunction", "surface_adjunction"];

const FIBER_TAU: [f64; 2] = [0.2, 1.1];

/// Probes every `spacing` on `[0, horizon]`.
fn probes(horizon: f64, spacing: f64) -> Vec<f64> {
    let count = (horizon / spacing).round() as usize;
    (0..=count).map(|k| k as f64 * spacing).collect()
}

fn flow(horizon: f64, dt: f64, spacing: f64) -> FlowSpec {
    FlowSpec {
        mode: FlowMode::Reduced,
        horizon,
        dt,
        scheme: Scheme::SemiImplicit,
        probes: probes(horizon, spacing),
        checkpoint_interval: None,
    }
}

/// `chi = 1 + ddbar(0.01 cos 2pi x)`.
fn chi() -> FormSpec {
    FormSpec { scale: 1.0, potential: vec![Mode::new(0.01, &[1.0])] }
}

/// `n = 2, kappa = 1` product with the generic flow data.
fn generic_model(nb: usize, nf: usize) -> ModelSpec {
    ModelSpec {
        base_resolution: nb,
        base_dim: 1,
        fiber_resolution: nf,
        fiber_tau: FIBER_TAU,
        im_tau_log: vec![],
        chi: chi(),
        omega0_base: FormSpec {
            scale: 1.0,
            potential: vec![Mode::new(0.01, &[1.0]), Mode::new(0.01, &[1.0, 1.0]).with_phase(-PI / 2.0)],
        },
        fiber_density: vec![Mode::new(0.3, &[1.0])],
        omega0_mix: vec![],
        big_omega: OmegaSpec {
            scale: 2.0,
            log_base: vec![Mode::new(0.3, &[1.0]), Mode::new(0.2, &[0.0, 1.0]).with_phase(-PI / 2.0)],
            times_chi_top: false,
        },
    }
}

/// Model for the energy expansions: flat base block of `omega0`, `Omega` irrelevant.
fn energy_model(fiber_density: f64, mix: f64) -> ModelSpec {
    let mut m = generic_model(16, 16);
    m.omega0_base = FormSpec { scale: 1.0, potential: vec![] };
    m.fiber_density = if fiber_density != 0.0 { vec![Mode::new(fiber_density, &[1.0])] } else { vec![] };
    m.omega0_mix =
        if mix != 0.0 { vec![Mode::new(mix / 2.0, &[1.0, 0.0, 1.0]), Mode::new(mix / 2.0, &[1.0, 0.0, -1.0])] } else { vec![] };
    m.big_omega = OmegaSpec { scale: 1.0, log_base: vec![], times_chi_top: false };
    m
}

/// Geometric parameter list `0.1 * 0.2^{k/4}`.
fn t_list() -> Vec<f64> {
    (0..5).map(|k| 0.1 * 0.2f64.powf(k as f64 / 4.0)).collect()
}

fn config(name: &str, model: ModelSpec) -> ExperimentConfig {
    ExperimentConfig {
        scenario: name.into(),
        model,
        solver: SolverSpec::default(),
        flow: None,
        energy: None,
        out: None,
        seed: 20240917,
    }
}

pub fn scenario(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "stationary" => {
            let mut m = generic_model(32, 8);
            m.omega0_base = chi();
            m.big_omega = OmegaSpec { scale: 2.0, log_base: vec![], times_chi_top: true };
            ExperimentConfig { flow: Some(flow(10.0, 0.1, 1.0)), ..config(name, m) }
        }
        "product_generic" => ExperimentConfig { flow: Some(flow(10.0, 0.05, 0.5)), ..config(name, generic_model(64, 8)) },
        "varying_tau" => {
            let mut m = generic_model(32, 8);
            m.im_tau_log = vec![Mode::new(0.2, &[1.0])];
            ExperimentConfig { flow: Some(flow(10.0, 0.05, 0.5)), ..config(name, m) }
        }
        "degenerate_chi" => {
            let mut m = generic_model(64, 8);
            // chi = 1 + cos(2 pi x) degenerates along x = 1/2
            m.chi = FormSpec { scale: 1.0, potential: vec![Mode::new(-1.0 / (PI * PI), &[1.0])] };
            m.omega0_base = FormSpec { scale: 1.0, potential: vec![] };
            // the regularized solves bottom out near 1e-12 as chi_j degenerates
            ExperimentConfig { solver: SolverSpec { tol: 1e-11, ..SolverSpec::default() }, ..config(name, m) }
        }
        "mabuchi_adjunction" => {
            let energy = EnergySpec {
                kind: EnergyKind::Adjunction,
                phi: vec![Mode::new(0.05, &[1.0])],
                psi: vec![
                    Mode::new(0.02, &[0.0, 0.0, 1.0]),
                    Mode::new(0.005, &[1.0, 0.0, 1.0]),
                    Mode::new(0.005, &[1.0, 0.0, -1.0]),
                ],
                t_list: t_list(),
                path_nodes: 24,
                theta_scale: 0.0,
            };
            ExperimentConfig { energy: Some(energy), ..config(name, energy_model(0.3, 0.0)) }
        }
        "surface_adjunction" => {
            let energy = EnergySpec {
                kind: EnergyKind::Surface,
                phi: vec![
                    Mode::new(0.02, &[1.0]),
                    Mode::new(0.01, &[0.0, 1.0]).with_phase(-PI / 2.0),
                    Mode::new(0.006, &[2.0]),
                ],
                psi: vec![],
                t_list: t_list(),
                path_nodes: 24,
                theta_scale: 0.0,
            };
            ExperimentConfig { energy: Some(energy), ..config(name, energy_model(0.0, 0.03)) }
        }
        other => return Err(CliError::UnknownScenario(other.into())),
    };
    Ok(cfg)
}
