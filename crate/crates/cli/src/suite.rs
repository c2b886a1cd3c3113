//! Acceptance battery and its machine-readable verdict.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kahler_lab::energy::{generalized_mabuchi, mabuchi_variation, path_mabuchi, straight_path, PathShape};
use kahler_lab::flow::{
    canonical_limit, convergence_check, limit_identity, run_flow, Checkpoint, FlowMode, FlowSchedule, FlowState,
    FlowSystem, Trajectory,
};
use kahler_lab::forms::ma_top;
use kahler_lab::grid::{ddbar, integrate, HermitianFormField, ScalarField, TorusChart, VolumeDensity};
use kahler_lab::ma::{
    comparison_check, monotonicity_check, solve_calabi_with, solve_twisted_ma_with, NewtonOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::{self, newton_options, CONVERGENCE_PROBES};
use crate::config::{EnergyKind, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::model::{series, Mode};
use crate::oracle::line_oracle;
use crate::output::{Meta, OutputDir, TOOL, VERSION};
use crate::scenarios::scenario;

pub const SUITE_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub status: Status,
    pub measured: BTreeMap<String, f64>,
    pub bound: BTreeMap<String, String>,
    pub runtime_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub suite_version: String,
    pub criteria: Vec<CriterionResult>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status == Status::Pass)
    }

    pub fn get(&self, id: &str) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

/// Measurements and bounds of one criterion; it passes when every requirement holds.
struct Check {
    measured: BTreeMap<String, f64>,
    bound: BTreeMap<String, String>,
    ok: bool,
    note: Option<String>,
}

impl Check {
    fn new() -> Self {
        Self { measured: BTreeMap::new(), bound: BTreeMap::new(), ok: true, note: None }
    }

    fn measure(&mut self, key: &str, v: f64) -> &mut Self {
        self.measured.insert(key.into(), v);
        self
    }

    /// `key <= limit`.
    fn at_most(&mut self, key: &str, v: f64, limit: f64) -> &mut Self {
        self.measure(key, v);
        self.bound.insert(key.into(), format!("<= {limit:e}"));
        self.ok &= v <= limit;
        self
    }

    /// `key >= limit`.
    fn at_least(&mut self, key: &str, v: f64, limit: f64) -> &mut Self {
        self.measure(key, v);
        self.bound.insert(key.into(), format!(">= {limit}"));
        self.ok &= v >= limit;
        self
    }

    fn holds(&mut self, key: &str, cond: bool) -> &mut Self {
        self.measure(key, if cond { 1.0 } else { 0.0 });
        self.bound.insert(key.into(), "== 1".into());
        self.ok &= cond;
        self
    }

    fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.note = Some(text.into());
        self
    }
}

fn timed(id: &str, f: impl FnOnce() -> Result<Check>) -> CriterionResult {
    let start = Instant::now();
    let outcome = f();
    let runtime_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(c) => CriterionResult {
            id: id.into(),
            status: if c.ok { Status::Pass } else { Status::Fail },
            measured: c.measured,
            bound: c.bound,
            runtime_s,
            note: c.note,
        },
        Err(e) => CriterionResult {
            id: id.into(),
            status: Status::Fail,
            measured: BTreeMap::new(),
            bound: BTreeMap::new(),
            runtime_s,
            note: Some(format!("error: {e}")),
        },
    }
}

/// `|a - b|` beyond `floor`, relative to `max(|a|, |b|)`.
fn relative_gap(a: f64, b: f64, floor: f64) -> f64 {
    let d = ((a - b).abs() - floor).max(0.0);
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// Sum of five random modes scaled so that `sup |ddbar u| = amp`.
pub fn random_potential(chart: &TorusChart, rng: &mut ChaCha8Rng, amp: f64, modes: i32) -> Result<ScalarField> {
    let axes = chart.shape().len();
    let terms: Vec<Mode> = (0..5)
        .map(|_| {
            let k: Vec<f64> = (0..axes).map(|_| rng.gen_range(-modes..=modes) as f64).collect();
            Mode::new(rng.gen_range(-1.0..1.0), &k).with_phase(rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    let raw = series(chart, &terms)?;
    let lap = ddbar(&raw)?.sup_norm().max(1e-12);
    Ok(raw.scale(amp / lap))
}

fn rng_for(seed: u64, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ id.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn line_chart(n: usize) -> Result<TorusChart> {
    Ok(TorusChart::square(1, n)?)
}

/// Flow runs shared between criteria, keyed by scenario, resolutions, mode, horizon and step.
#[derive(Default)]
struct FlowCache {
    runs: HashMap<String, Trajectory>,
}

impl FlowCache {
    /// Run from `phi = 0`; with `limit` the canonical limit is solved for the distance column.
    #[allow(clippy::too_many_arguments)]
    fn run(
        &mut self,
        cfg: &ExperimentConfig,
        mode: FlowMode,
        horizon: f64,
        dt: f64,
        spacing: f64,
        every: Option<f64>,
        limit: bool,
    ) -> Result<&Trajectory> {
        let key = format!(
            "{}|{}|{}|{:?}|{horizon}|{dt}|{spacing}|{every:?}|{limit}",
            cfg.sha256(),
            cfg.model.base_resolution,
            cfg.model.fiber_resolution,
            mode
        );
        if !self.runs.contains_key(&key) {
            let model = cfg.model.build()?;
            let system = FlowSystem::new(&model, mode)?;
            let opts = newton_options(cfg);
            let limit = if limit {
                Some(canonical_limit(&model, &opts)?.phi_flow)
            } else {
                None
            };
            let mut schedule = FlowSchedule::uniform(horizon, dt, cfg.flow_spec()?.scheme, spacing);
            schedule.checkpoint_interval = every;
            let tr = run_flow(&system, FlowState::initial(&system), &schedule, limit.as_ref())
                .map_err(|e| CliError::from(e).in_scenario(&cfg.scenario))?;
            self.runs.insert(key.clone(), tr);
        }
        Ok(&self.runs[&key])
    }
}

fn with_resolution(cfg: &ExperimentConfig, nb: usize, nf: usize) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.model.base_resolution = nb;
    c.model.fiber_resolution = nf;
    c
}

fn probe_spacing(cfg: &ExperimentConfig) -> Result<f64> {
    let p = &cfg.flow_spec()?.probes;
    Ok(if p.len() >= 2 { p[1] - p[0] } else { 0.5 })
}

fn c1() -> Result<Check> {
    let ch = line_chart(64)?;
    let chi = HermitianFormField::identity(&ch, 1.0);
    let start = Instant::now();
    let (phi, _) = solve_twisted_ma_with(&chi, &ScalarField::constant(&ch, 1.0), None, &NewtonOptions::with_tol(1e-12))?;
    let runtime = start.elapsed().as_secs_f64();
    let mut c = Check::new();
    c.at_most("sup_phi", phi.sup_norm(), 1e-10).at_most("solve_runtime_s", runtime, 1.0);
    Ok(c)
}

fn c2() -> Result<Check> {
    let ch = line_chart(64)?;
    let f = |x: f64| (0.1 * (2.0 * PI * x).cos()).exp();
    let chi = HermitianFormField::identity(&ch, 1.0);
    let (phi, _) = solve_twisted_ma_with(&chi, &ScalarField::from_fn(&ch, |x| f(x[0])), None, &NewtonOptions::with_tol(1e-12))?;
    let oracle = line_oracle(64, 1.0, &f);
    let dev = (0..ch.len())
        .map(|p| {
            let i = (ch.coords(p)[0] * 64.0).round() as usize % 64;
            (phi.values()[p] - oracle[i]).abs()
        })
        .fold(0.0, f64::max);
    let mut c = Check::new();
    c.at_most("sup_deviation", dev, 1e-7);
    Ok(c)
}

fn c3(seed: u64) -> Result<Check> {
    let ch = TorusChart::square(2, 12)?;
    let mut rng = rng_for(seed, 3);
    let omega = HermitianFormField::identity(&ch, 1.0).add(&ddbar(&random_potential(&ch, &mut rng, 0.2, 2)?)?)?;
    let opts = NewtonOptions::with_tol(1e-11);
    let (trivial, _) = solve_calabi_with(&omega, &ma_top(&omega), None, &opts)?;
    let target = ma_top(&omega.add(&ddbar(&random_potential(&ch, &mut rng, 0.3, 2)?)?)?);
    let target = target.scale(integrate(&ma_top(&omega)) / integrate(&target));
    let (a, ra) = solve_calabi_with(&omega, &target, None, &opts)?;
    let init = random_potential(&ch, &mut rng, 0.3, 2)?;
    let (b, _) = solve_calabi_with(&omega, &target, Some(&init), &opts)?;
    let mut c = Check::new();
    c.at_most("sup_phi_identity", trivial.sup_norm(), 1e-10)
        .at_most("residual", *ra.residual_history.last().unwrap_or(&f64::INFINITY), 1e-8)
        .at_most("init_disagreement", a.sub(&b)?.sup_norm(), 1e-8);
    Ok(c)
}

fn c4(seed: u64) -> Result<Check> {
    let ch = line_chart(64)?;
    let omega = HermitianFormField::identity(&ch, 1.0);
    let mut rng = rng_for(seed, 4);
    let mut worst = f64::INFINITY;
    for _ in 0..50 {
        let a = random_potential(&ch, &mut rng, 0.5, 3)?;
        let b = random_potential(&ch, &mut rng, 0.5, 3)?;
        worst = worst.min(comparison_check(&a, &b, &omega)?.gap);
    }
    let mut c = Check::new();
    c.at_least("min_gap", worst, -1e-6).measure("pairs", 50.0);
    Ok(c)
}

fn c5(seed: u64) -> Result<Check> {
    let ch = line_chart(64)?;
    let chi = HermitianFormField::identity(&ch, 10.0);
    let opts = NewtonOptions::with_tol(1e-12);
    let mut rng = rng_for(seed, 5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = random_potential(&ch, &mut rng, 1.0, 2)?;
        let s = random_potential(&ch, &mut rng, 3.0, 2)?;
        let s = s.shift(-s.inf());
        let oa = VolumeDensity::from_field(&a.map(|v| 10.0 * v.exp()));
        let ob = oa.times_exp(&s)?;
        worst = worst.max(monotonicity_check(&oa, &ob, &chi, &opts)?.worst_violation);
    }
    let mut c = Check::new();
    c.at_most("worst_violation", worst, 1e-7).measure("pairs", 20.0);
    c.note("reference forms move with the densities, chi_b = chi + ddbar log(Omega_b / Omega_a)");
    Ok(c)
}

fn maxima(tr: &Trajectory, upto: f64) -> [f64; 3] {
    let rs = tr.records.iter().filter(|r| r.t <= upto + 1e-9);
    let mut m = [f64::NEG_INFINITY; 3];
    for r in rs {
        m[0] = m[0].max(r.sup_phi);
        m[1] = m[1].max(r.sup_phidot);
        m[2] = m[2].max(r.sup_e_nt_vol_ratio);
    }
    m
}

/// Absolute floor below which two maxima count as equal (solver noise).
const NOISE_FLOOR: f64 = 1e-10;

fn c6(cache: &mut FlowCache, cfg: &ExperimentConfig) -> Result<Check> {
    let spec = cfg.flow_spec()?.clone();
    let spacing = probe_spacing(cfg)?;
    let short = maxima(cache.run(cfg, FlowMode::Reduced, 10.0, spec.dt, spacing, None, false)?, 10.0);
    let long = maxima(cache.run(cfg, FlowMode::Reduced, 20.0, spec.dt, spacing, None, false)?, 20.0);
    let mut c = Check::new();
    for (k, name) in ["sup_phi", "sup_phidot", "sup_vol_ratio"].iter().enumerate() {
        c.measure(&format!("{name}_T10"), short[k]).measure(&format!("{name}_T20"), long[k]);
        c.at_most(&format!("{name}_rel_change"), relative_gap(short[k], long[k], NOISE_FLOOR), 0.01);
    }
    Ok(c)
}

fn c7(cache: &mut FlowCache, cfg: &ExperimentConfig) -> Result<Check> {
    let small = with_resolution(cfg, 8, 8);
    let dt = small.flow_spec()?.dt;
    let tr = cache.run(&small, FlowMode::Full, 10.0, dt, 1.0, None, false)?;
    let vals: Vec<f64> = tr.records.iter().filter(|r| r.t >= 1.0 - 1e-9).map(|r| r.fiber_vol_ratio).collect();
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    let mut c = Check::new();
    c.measure("c", lo).measure("C", hi).at_least("c_positive", lo, f64::MIN_POSITIVE);
    c.at_most("C_over_c", hi / lo, 4.0);
    Ok(c)
}

fn c8a(cache: &mut FlowCache, cfg: &ExperimentConfig) -> Result<Check> {
    let dt = cfg.flow_spec()?.dt;
    let spacing = probe_spacing(cfg)?;
    let tr = cache.run(cfg, FlowMode::Reduced, 10.0, dt, spacing, None, true)?;
    let rep = convergence_check(&tr.records, &CONVERGENCE_PROBES)?;
    let mut c = Check::new();
    for (t, d) in rep.times.iter().zip(&rep.distances) {
        c.measure(&format!("dist_t{t}"), *d);
    }
    c.holds("strictly_decreasing", rep.strictly_decreasing).at_least("rate", rep.rate, 0.5);
    Ok(c)
}

fn c8b(cfg: &ExperimentConfig) -> Result<Check> {
    let model = cfg.model.build()?;
    let opts = newton_options(cfg);
    let lim = canonical_limit(&model, &opts)?;
    let res = limit_identity(&model, &lim.phi_ma)?;
    let mut c = Check::new();
    c.at_most("raw_residual", res.raw, 10.0 * opts.tol).measure("eta", res.eta).measure("twisted_residual", res.twisted);
    c.note(
        "Ric + omega - omega_WP equals eta = chi - ddbar log(f_* Omega / Im tau) at the limit; \
         eta has the positive mass of chi and cannot vanish on a torus base",
    );
    Ok(c)
}

fn c9(cache: &mut FlowCache, cfg: &ExperimentConfig) -> Result<Check> {
    let dt = cfg.flow_spec()?.dt;
    let spacing = probe_spacing(cfg)?;
    let band = |tr: &Trajectory| {
        tr.records.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(r.r_min), h.max(r.r_max)))
    };
    let coarse = band(cache.run(&with_resolution(cfg, 64, cfg.model.fiber_resolution), FlowMode::Reduced, 10.0, dt, spacing, None, false)?);
    let fine = band(cache.run(&with_resolution(cfg, 128, cfg.model.fiber_resolution), FlowMode::Reduced, 10.0, dt, spacing, None, false)?);
    let scale = coarse.0.abs().max(coarse.1.abs()).max(fine.0.abs()).max(fine.1.abs());
    let mut c = Check::new();
    c.measure("R_min_64", coarse.0).measure("R_max_64", coarse.1).measure("R_min_128", fine.0).measure("R_max_128", fine.1);
    c.holds("finite", [coarse.0, coarse.1, fine.0, fine.1].iter().all(|v| v.is_finite()));
    c.at_most("R_min_rel_change", (coarse.0 - fine.0).abs() / scale.max(f64::MIN_POSITIVE), 0.05);
    c.at_most("R_max_rel_change", (coarse.1 - fine.1).abs() / scale.max(f64::MIN_POSITIVE), 0.05);
    c.note("changes relative to the largest |R| of both runs");
    Ok(c)
}

fn c10(cache: &mut FlowCache, cfg: &ExperimentConfig) -> Result<Check> {
    const TIMES: [f64; 3] = [0.5, 1.0, 2.0];
    let dt = 0.01;
    let full_cfg = with_resolution(cfg, 16, 16);
    let reduced_cfg = with_resolution(cfg, 64, cfg.model.fiber_resolution);
    let full: Vec<Checkpoint> = cache.run(&full_cfg, FlowMode::Full, 2.0, dt, 0.5, Some(0.5), false)?.checkpoints.clone();
    let reduced: Vec<Checkpoint> = cache.run(&reduced_cfg, FlowMode::Reduced, 2.0, dt, 0.5, Some(0.5), false)?.checkpoints.clone();
    let nf = 16;
    let mut c = Check::new();
    for t in TIMES {
        let find = |cps: &[Checkpoint]| cps.iter().find(|s| (s.t - t).abs() <= 1e-9).cloned();
        let (f, r) = match (find(&full), find(&reduced)) {
            (Some(f), Some(r)) => (f, r),
            _ => return Err(CliError::Config(format!("missing checkpoint at t = {t}"))),
        };
        let mut dev = 0.0f64;
        for i in 0..16 {
            for j in 0..16 {
                let b = i * 16 + j;
                for q in 0..nf * nf {
                    let full_v = f.phi.values()[b * nf * nf + q];
                    let red_v = r.phi.values()[(4 * i) * 64 + 4 * j];
                    dev = dev.max((full_v - red_v).abs());
                }
            }
        }
        c.at_most(&format!("sup_dev_t{t}"), dev, 1e-4);
    }
    Ok(c)
}

fn c11(cfg: &ExperimentConfig) -> Result<Check> {
    let mut cfg = cfg.clone();
    let spec = cfg.energy_spec()?.clone();
    cfg.energy = Some(crate::config::EnergySpec { kind: EnergyKind::Mabuchi, t_list: vec![0.5], theta_scale: 0.3, ..spec.clone() });
    let model = cfg.model.build()?;
    let s = commands::mabuchi_setup(&cfg, &model)?;
    let nodes = spec.path_nodes;
    let eta = series(model.product(), &[Mode::new(0.006, &[1.0, 0.0, 1.0, 1.0]).with_phase(0.5)])?;
    let phi = &s.phi;
    let detour = |t: f64| -> kahler_lab::Result<(ScalarField, ScalarField)> {
        let r = 3.0 * t * t - 2.0 * t * t * t;
        let dr = 6.0 * t - 6.0 * t * t;
        Ok((phi.scale(r).add(&eta.scale(t * (1.0 - t)))?, phi.scale(dr).add(&eta.scale(1.0 - 2.0 * t))?))
    };
    let linear = path_mabuchi(&s.omega, &s.theta, &straight_path(phi, PathShape::Linear), nodes)?;
    let curved = path_mabuchi(&s.omega, &s.theta, &detour, nodes)?;
    let direct = generalized_mabuchi(&s.omega, &s.theta, phi)?;

    let wave = series(model.product(), &[Mode::new(0.5, &[1.0, 0.0, 1.0])])?;
    let delta = phi.scale(60.0).add(&wave)?;
    // central differences: the truncation error is about 2.5e-4 h^2 relative here
    let h = 1e-5;
    let k = |e: f64| -> Result<f64> { Ok(generalized_mabuchi(&s.omega, &s.theta, &phi.add(&delta.scale(e))?)?) };
    let fd = (k(h)? - k(-h)?) / (2.0 * h);
    let v = mabuchi_variation(&s.omega, &s.theta, phi, &delta)?;
    let mut c = Check::new();
    c.measure("K_direct", direct).measure("K_linear_path", linear).measure("K_detour_path", curved);
    c.at_most("path_difference", (linear - curved).abs(), 1e-8);
    c.measure("variation", v).measure("finite_difference", fd);
    c.at_most("variation_rel_error", (fd - v).abs() / v.abs(), 1e-6);
    Ok(c)
}

fn c12(cfg: &ExperimentConfig, out: &Path, rel: f64) -> Result<Check> {
    let o = commands::energy(cfg, out)?;
    let e = o.report.expansion.ok_or_else(|| CliError::Config("energy kind has no expansion".into()))?;
    let mut c = Check::new();
    c.measure("prediction", e.prediction).measure("leading_fit", e.leading_fit);
    if let Some(closed) = e.prediction_closed_form {
        c.measure("prediction_closed_form", closed);
    }
    c.at_most("rel_error", (e.leading_fit - e.prediction).abs() / e.prediction.abs(), rel);
    c.at_least("remainder_slope", e.remainder_slope, e.exponent as f64 + 0.8);
    Ok(c)
}

fn continuity(cfg: &ExperimentConfig, out: &Path) -> Result<Check> {
    let o = commands::solve_ma(cfg, out)?;
    let osc: Vec<f64> = o.continuity.iter().map(|s| s.oscillation).collect();
    let (lo, hi) = osc.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    let mut c = Check::new();
    c.holds("continuity_path_used", o.method == "continuity");
    c.holds("all_steps_converged", !o.continuity.is_empty() && o.continuity.iter().all(|s| s.report.converged));
    c.at_most("oscillation_spread", hi / lo, 2.0);
    Ok(c)
}

/// Runs the scenario's main command twice and compares every output file byte for byte.
fn determinism(cfgs: &[ExperimentConfig], out: &Path) -> Result<Check> {
    let mut c = Check::new();
    let mut files = 0usize;
    for cfg in cfgs {
        let dirs: Vec<PathBuf> = ["run_a", "run_b"].iter().map(|r| out.join(&cfg.scenario).join(r)).collect();
        for d in &dirs {
            if d.exists() {
                std::fs::remove_dir_all(d).map_err(|source| CliError::Io { path: d.clone(), source })?;
            }
            if cfg.flow.is_some() {
                commands::flow(cfg, d)?;
            } else if cfg.energy.is_some() {
                commands::energy(cfg, d)?;
            } else {
                commands::solve_ma(cfg, d)?;
            }
        }
        let (a, b) = (read_tree(&dirs[0])?, read_tree(&dirs[1])?);
        files += a.len();
        c.holds(&format!("{}_identical", cfg.scenario), !a.is_empty() && a == b);
    }
    c.measure("files_compared", files as f64);
    Ok(c)
}

fn read_tree(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = std::fs::read_dir(&d).map_err(|source| CliError::Io { path: d.clone(), source })?;
        for entry in entries {
            let path = entry.map_err(|source| CliError::Io { path: d.clone(), source })?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                out.insert(path.strip_prefix(dir).expect("inside dir").to_path_buf(), bytes);
            }
        }
    }
    Ok(out)
}

/// Criteria of a single scenario, by name; custom configs are classified by their sections.
fn scenario_plan(cfg: &ExperimentConfig, out: &Path) -> Vec<CriterionResult> {
    let mut cache = FlowCache::default();
    let det = out.join("determinism");
    let mut v = Vec::new();
    match cfg.scenario.as_str() {
        "stationary" => {
            v.push(timed("6", || c6(&mut cache, cfg)));
            v.push(timed("7", || c7(&mut cache, cfg)));
        }
        "product_generic" => {
            v.push(timed("6", || c6(&mut cache, cfg)));
            v.push(timed("7", || c7(&mut cache, cfg)));
            v.push(timed("8a", || c8a(&mut cache, cfg)));
            v.push(timed("9", || c9(&mut cache, cfg)));
            v.push(timed("10", || c10(&mut cache, cfg)));
        }
        "varying_tau" => {
            v.push(timed("6", || c6(&mut cache, cfg)));
            v.push(timed("8b", || c8b(cfg)));
        }
        _ if cfg.flow.is_some() => {
            v.push(timed("6", || c6(&mut cache, cfg)));
        }
        _ => match cfg.energy.as_ref().map(|e| e.kind) {
            Some(EnergyKind::Adjunction) => {
                v.push(timed("11", || c11(cfg)));
                v.push(timed("12a", || c12(cfg, &out.join("energy"), 0.01)));
            }
            Some(EnergyKind::Surface) => v.push(timed("12b", || c12(cfg, &out.join("energy"), 0.02))),
            Some(EnergyKind::Mabuchi) => v.push(timed("11", || c11(cfg))),
            None => v.push(timed("continuity", || continuity(cfg, &out.join("solve_ma")))),
        },
    }
    v.push(timed("13", || determinism(std::slice::from_ref(cfg), &det)));
    v
}

fn registry(name: &str, seed: u64) -> Result<ExperimentConfig> {
    let mut cfg = scenario(name)?;
    cfg.seed = seed;
    Ok(cfg)
}

/// Every criterion, each on its designated scenario.
fn full_plan(out: &Path, seed: u64) -> Result<(Vec<CriterionResult>, Vec<ExperimentConfig>)> {
    let generic = registry("product_generic", seed)?;
    let varying = registry("varying_tau", seed)?;
    let adj = registry("mabuchi_adjunction", seed)?;
    let surf = registry("surface_adjunction", seed)?;
    let degenerate = registry("degenerate_chi", seed)?;
    let mut short = with_resolution(&generic, 32, 8);
    if let Some(f) = short.flow.as_mut() {
        f.horizon = 2.0;
        f.probes.retain(|p| *p <= 2.0);
    }
    let mut cache = FlowCache::default();
    let v = vec![
        timed("1", c1),
        timed("2", c2),
        timed("3", || c3(seed)),
        timed("4", || c4(seed)),
        timed("5", || c5(seed)),
        timed("6", || c6(&mut cache, &generic)),
        timed("7", || c7(&mut cache, &generic)),
        timed("8a", || c8a(&mut cache, &generic)),
        timed("8b", || c8b(&varying)),
        timed("9", || c9(&mut cache, &generic)),
        timed("10", || c10(&mut cache, &generic)),
        timed("11", || c11(&adj)),
        timed("12a", || c12(&adj, &out.join("energy").join("mabuchi_adjunction"), 0.01)),
        timed("12b", || c12(&surf, &out.join("energy").join("surface_adjunction"), 0.02)),
        timed("13", || determinism(&[short.clone(), adj.clone(), degenerate.clone()], &out.join("determinism"))),
    ];
    Ok((v, vec![generic, varying, adj, surf, degenerate, short]))
}

/// Runs the battery (all criteria, or those of `cfg`'s scenario) and writes `verdict.json`.
pub fn run_suite(cfg: Option<&ExperimentConfig>, out: &Path, seed: u64) -> Result<Verdict> {
    let (criteria, used) = match cfg {
        Some(c) => (scenario_plan(c, out), vec![c.clone()]),
        None => full_plan(out, seed)?,
    };
    let canonical = serde_json::to_string(&used)?;
    let meta = Meta {
        tool: TOOL,
        version: VERSION,
        scenario: cfg.map(|c| c.scenario.clone()).unwrap_or_else(|| "all".into()),
        config_sha256: Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect(),
    };
    let verdict = Verdict { suite_version: SUITE_VERSION.into(), criteria };
    OutputDir::with_meta(out, meta)?.json("verdict.json", &verdict)?;
    Ok(verdict)
}

/// One line per criterion.
pub fn summary_lines(v: &Verdict) -> Vec<String> {
    v.criteria
        .iter()
        .map(|c| {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
            };
            let measured: Vec<String> = c.measured.iter().map(|(k, m)| format!("{k}={m:.3e}")).collect();
            format!("criterion {:<10} {status}  {:.1}s  {}", c.id, c.runtime_s, measured.join(" "))
        })
        .collect()
}
