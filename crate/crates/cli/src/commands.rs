//! Drivers behind the subcommands. Each writes its files into the output directory and
//! returns what it wrote for programmatic use.

use std::fmt::Write as _;
use std::path::Path;

use kahler_lab::energy::{
    adjunction_expansion, energy_report, path_mabuchi, straight_path, surface_adjunction, surface_twist, EnergyReport,
    PathShape,
};
use kahler_lab::fibration::FibrationModel;
use kahler_lab::flow::{
    canonical_limit, convergence_check, limit_identity, run_flow, ConvergenceReport, FlowSchedule, FlowState,
    FlowSystem, LimitResidual, Trajectory,
};
use kahler_lab::forms::ma_top;
use kahler_lab::grid::{integrate, integrate_weighted, HermitianFormField, ScalarField};
use kahler_lab::ma::{
    continuity_path, geometric_schedule, solve_calabi_with, ContinuityStep, NewtonOptions, SolveReport,
};
use serde::Serialize;

use crate::config::{EnergyKind, ExperimentConfig, SECOND_PATH};
use crate::error::{CliError, Result};
use crate::model::series;
use crate::output::OutputDir;

/// Probe times of the convergence check.
pub const CONVERGENCE_PROBES: [f64; 5] = [2.0, 4.0, 6.0, 8.0, 10.0];

/// Schedule length of the continuity path for degenerate `chi`.
pub const CONTINUITY_STEPS: usize = 8;

pub fn newton_options(cfg: &ExperimentConfig) -> NewtonOptions {
    let mut opts = NewtonOptions::with_tol(cfg.solver.tol);
    opts.max_iter = cfg.solver.max_iter;
    opts
}

fn build(cfg: &ExperimentConfig) -> Result<FibrationModel> {
    cfg.model.build().map_err(|e| e.in_scenario(&cfg.scenario))
}

fn ctx<T>(cfg: &ExperimentConfig, r: kahler_lab::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::from(e).in_scenario(&cfg.scenario))
}

/// `x_0, ..., x_{2d-1}, phi` rows in unit-square coordinates.
fn potential_csv(phi: &ScalarField) -> String {
    let ch = phi.chart();
    let axes = ch.shape().len();
    let mut out: Vec<String> = (0..axes).map(|a| format!("x{a}")).collect();
    out.push("phi".into());
    let mut text = out.join(",") + "\n";
    for (p, v) in phi.values().iter().enumerate() {
        for c in ch.coords(p) {
            let _ = write!(text, "{c},");
        }
        let _ = writeln!(text, "{v}");
    }
    text
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveMaOutcome {
    /// `single` for a positive `chi`, `continuity` otherwise.
    pub method: &'static str,
    pub sup_phi: f64,
    pub inf_phi: f64,
    pub report: Option<SolveReport>,
    /// `sup |Omega / (Theta chi^kappa) - F| / F`.
    pub density_consistency: Option<f64>,
    pub limit_residual: Option<LimitResidual>,
    pub continuity: Vec<ContinuityStep>,
    #[serde(skip)]
    pub phi: Option<ScalarField>,
}

/// Limit equation `(chi + ddbar phi)^kappa = F e^phi chi^kappa` on the base; a degenerate
/// `chi` goes through the continuity path with `chi_j = chi + omega_flat / j`.
pub fn solve_ma(cfg: &ExperimentConfig, out: &Path) -> Result<SolveMaOutcome> {
    let dir = OutputDir::create(out, cfg)?;
    let model = build(cfg)?;
    let opts = newton_options(cfg);
    let outcome = if model.chi().min_eigenvalue().0 > opts.eig_floor {
        let lim = ctx(cfg, canonical_limit(&model, &opts))?;
        let res = ctx(cfg, limit_identity(&model, &lim.phi_ma))?;
        SolveMaOutcome {
            method: "single",
            sup_phi: lim.phi_ma.sup(),
            inf_phi: lim.phi_ma.inf(),
            report: Some(lim.report),
            density_consistency: Some(lim.density.consistency),
            limit_residual: Some(res),
            continuity: vec![],
            phi: Some(lim.phi_ma),
        }
    } else {
        let target = ctx(cfg, model.pushforward(model.big_omega()))?;
        let aux = HermitianFormField::identity(model.base(), 1.0);
        let schedule = geometric_schedule(CONTINUITY_STEPS);
        let res = ctx(cfg, continuity_path(model.chi(), &aux, &target, &schedule, &opts))?;
        SolveMaOutcome {
            method: "continuity",
            sup_phi: res.phi.sup(),
            inf_phi: res.phi.inf(),
            report: None,
            density_consistency: None,
            limit_residual: None,
            continuity: res.steps,
            phi: Some(res.phi),
        }
    };
    dir.csv("potential.csv", &potential_csv(outcome.phi.as_ref().expect("set above")))?;
    dir.json("solve_ma.json", &outcome)?;
    Ok(outcome)
}

#[derive(Clone, Debug, Serialize)]
pub struct CalabiOutcome {
    /// Factor applied to `Omega` to match the mass of `omega0^n`.
    pub normalization: f64,
    pub sup_phi: f64,
    pub inf_phi: f64,
    pub report: SolveReport,
}

/// `(omega0 + ddbar phi)^n = c Omega` on the product, `c` fixing the total mass.
pub fn solve_calabi(cfg: &ExperimentConfig, out: &Path) -> Result<CalabiOutcome> {
    let dir = OutputDir::create(out, cfg)?;
    let model = build(cfg)?;
    let omega = model.omega0();
    let c = integrate(&ma_top(omega)) / integrate(model.big_omega());
    let target = model.big_omega().scale(c);
    let (phi, report) = ctx(cfg, solve_calabi_with(omega, &target, None, &newton_options(cfg)))?;
    let outcome = CalabiOutcome { normalization: c, sup_phi: phi.sup(), inf_phi: phi.inf(), report };
    dir.csv("potential.csv", &potential_csv(&phi))?;
    dir.json("calabi.json", &outcome)?;
    Ok(outcome)
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowOutcome {
    pub mode: kahler_lab::flow::FlowMode,
    pub final_t: f64,
    pub steps: usize,
    pub convergence: Option<ConvergenceReport>,
    pub limit_residual: Option<LimitResidual>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

/// Runs the flow from `phi = 0`; the canonical limit is solved when `chi` is positive and
/// used for the distance column.
pub fn flow(cfg: &ExperimentConfig, out: &Path) -> Result<FlowOutcome> {
    let spec = cfg.flow_spec()?;
    let dir = OutputDir::create(out, cfg)?;
    let model = build(cfg)?;
    let system = ctx(cfg, FlowSystem::new(&model, spec.mode))?;
    let opts = newton_options(cfg);
    let limit = if model.chi().min_eigenvalue().0 > opts.eig_floor {
        Some(ctx(cfg, canonical_limit(&model, &opts))?)
    } else {
        None
    };
    let schedule = FlowSchedule {
        horizon: spec.horizon,
        dt: spec.dt,
        scheme: spec.scheme,
        probes: spec.probes.clone(),
        checkpoint_interval: spec.checkpoint_interval,
    };
    let tr = ctx(cfg, run_flow(&system, FlowState::initial(&system), &schedule, limit.as_ref().map(|l| &l.phi_flow)))?;
    let has_probes = CONVERGENCE_PROBES.iter().all(|p| tr.records.iter().any(|r| (r.t - p).abs() <= 1e-9));
    let convergence = match &limit {
        Some(_) if has_probes => Some(ctx(cfg, convergence_check(&tr.records, &CONVERGENCE_PROBES))?),
        _ => None,
    };
    let limit_residual = match &limit {
        Some(l) => Some(ctx(cfg, limit_identity(&model, &l.phi_ma))?),
        None => None,
    };
    dir.csv("trajectory.csv", &tr.to_csv())?;
    for (k, cp) in tr.checkpoints.iter().enumerate() {
        dir.json(&format!("checkpoints/checkpoint_{k:03}.json"), cp)?;
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        #[serde(flatten)]
        outcome: &'a FlowOutcome,
        records: &'a [kahler_lab::flow::DiagnosticsRecord],
    }
    let outcome = FlowOutcome {
        mode: spec.mode,
        final_t: tr.final_state.t,
        steps: tr.final_state.step_count,
        convergence,
        limit_residual,
        trajectory: None,
    };
    dir.json("summary.json", &Summary { outcome: &outcome, records: &tr.records })?;
    Ok(FlowOutcome { trajectory: Some(tr), ..outcome })
}

/// Forms and potential of a plain evaluation: `omega = chi + t omega0` on the product,
/// `phi = phibar + t psi` and `theta = theta_scale omega0`.
pub struct MabuchiSetup {
    pub omega: HermitianFormField,
    pub theta: HermitianFormField,
    pub phi: ScalarField,
}

pub fn mabuchi_setup(cfg: &ExperimentConfig, model: &FibrationModel) -> Result<MabuchiSetup> {
    let spec = cfg.energy_spec()?;
    let t = spec.t_list[0];
    let omega = ctx(cfg, model.pullback_form(model.chi()).and_then(|c| c.add_scaled(t, model.omega0())))?;
    let phi_bar = ctx(cfg, model.pullback(&series(model.base(), &spec.phi)?))?;
    let phi = ctx(cfg, phi_bar.add(&series(model.product(), &spec.psi)?.scale(t)))?;
    Ok(MabuchiSetup { omega, theta: model.omega0().scale(spec.theta_scale), phi })
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyOutcome {
    pub kind: EnergyKind,
    pub report: EnergyReport,
    /// Path value along the second parametrization (plain evaluation only).
    pub second_path_value: Option<f64>,
    pub residual_sup: Option<f64>,
    /// `omega_phi^n`-weighted mean of the extremal residual.
    pub residual_mean: Option<f64>,
}

pub fn energy(cfg: &ExperimentConfig, out: &Path) -> Result<EnergyOutcome> {
    let spec = cfg.energy_spec()?;
    let dir = OutputDir::create(out, cfg)?;
    let model = build(cfg)?;
    let outcome = match spec.kind {
        EnergyKind::Mabuchi => {
            let s = mabuchi_setup(cfg, &model)?;
            let mut report = ctx(cfg, energy_report(&s.omega, &s.theta, &s.phi, Some((PathShape::Linear, spec.path_nodes))))?;
            let second = ctx(cfg, path_mabuchi(&s.omega, &s.theta, &straight_path(&s.phi, SECOND_PATH), spec.path_nodes))?;
            let field = report.residual_field.take().expect("energy_report sets the residual");
            let w = ctx(cfg, s.omega.add(&kahler_lab::grid::ddbar(&s.phi)?))?;
            let m = ma_top(&w);
            let mean = integrate_weighted(field.values(), &m) / integrate(&m);
            EnergyOutcome {
                kind: spec.kind,
                report,
                second_path_value: Some(second),
                residual_sup: Some(field.sup_norm()),
                residual_mean: Some(mean),
            }
        }
        EnergyKind::Adjunction => {
            let phi_bar = series(model.base(), &spec.phi)?;
            let psi = series(model.product(), &spec.psi)?;
            let report = ctx(cfg, adjunction_expansion(&model, &phi_bar, &psi, &spec.t_list))?;
            EnergyOutcome { kind: spec.kind, report, second_path_value: None, residual_sup: None, residual_mean: None }
        }
        EnergyKind::Surface => {
            let phi = series(model.base(), &spec.phi)?;
            let theta = ctx(cfg, surface_twist(&model))?;
            let report = ctx(cfg, surface_adjunction(&model, &phi, &theta, &spec.t_list))?;
            EnergyOutcome { kind: spec.kind, report, second_path_value: None, residual_sup: None, residual_mean: None }
        }
    };
    if let Some(e) = &outcome.report.expansion {
        dir.csv("expansion.csv", &e.to_csv())?;
    }
    dir.json("energy.json", &outcome)?;
    Ok(outcome)
}
