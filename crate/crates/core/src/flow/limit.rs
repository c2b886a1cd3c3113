use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibration::{binomial, density_f, semi_flat, weil_petersson, DensityF, FibrationModel};
use crate::forms::ricci;
use crate::grid::{ddbar, ScalarField};
use crate::ma::{solve_twisted_ma_with, NewtonOptions, SolveReport};

use super::DiagnosticsRecord;

/// Solution of the limit equation `(chi + ddbar phi)^k = F e^phi chi^k` on the base.
#[derive(Clone, Debug)]
pub struct CanonicalLimit {
    pub phi_ma: ScalarField,
    /// Limit of the flow potential, `phi_ma + log binom(n, k)`: the flow's volume normalization
    /// carries the factor `binom(n, k)` of `omega^n = binom(n,k) omega_base^k ^ omega_fiber^{n-k}`.
    pub phi_flow: ScalarField,
    pub density: DensityF,
    pub report: SolveReport,
}

pub fn canonical_limit(model: &FibrationModel, opts: &NewtonOptions) -> Result<CanonicalLimit> {
    let sf = semi_flat(model)?;
    let density = density_f(model, &sf)?;
    let (phi_ma, report) = solve_twisted_ma_with(model.chi(), &density.f, None, opts)?;
    let phi_flow = phi_ma.shift(binomial(model.n(), model.kappa()).ln());
    Ok(CanonicalLimit { phi_ma, phi_flow, density, report })
}

/// Sup norms of `Ric(w) + w - w_WP` for `w = chi + ddbar phi_ma`.
///
/// With prescribed data the equation gives `Ric(w) + w - w_WP = eta` where
/// `eta = chi - ddbar log(f_* Omega / Im tau)`; `eta` vanishes only when `chi` is the curvature
/// form of the data, which a positive `chi` on a torus base cannot be. `twisted` is the
/// residual after subtracting `eta`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitResidual {
    pub raw: f64,
    pub eta: f64,
    pub twisted: f64,
}

pub fn limit_identity(model: &FibrationModel, phi_ma: &ScalarField) -> Result<LimitResidual> {
    let w = model.chi().add(&ddbar(phi_ma)?)?;
    let wp = weil_petersson(model)?;
    let raw = ricci(&w)?.add(&w)?.sub(&wp)?;
    let push = model.pushforward(model.big_omega())?;
    let log_ratio = ScalarField::new(
        model.base().clone(),
        push.values().iter().zip(model.im_tau().values()).map(|(p, i)| (p / i).ln()).collect(),
    )?;
    let eta = model.chi().sub(&ddbar(&log_ratio)?)?;
    Ok(LimitResidual { raw: raw.sup_norm(), eta: eta.sup_norm(), twisted: raw.sub(&eta)?.sup_norm() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub strictly_decreasing: bool,
    /// `-slope` of the least-squares line through `(t, log distance)`.
    pub rate: f64,
}

/// Distances to the limit at `probes` and their exponential decay rate.
pub fn convergence_check(records: &[DiagnosticsRecord], probes: &[f64]) -> Result<ConvergenceReport> {
    let mut times = Vec::new();
    let mut distances = Vec::new();
    for &p in probes {
        let r = records
            .iter()
            .find(|r| (r.t - p).abs() <= 1e-9)
            .ok_or_else(|| Error::Contract(format!("no diagnostics at probe t = {p}")))?;
        let d = r.c0_dist_to_limit.ok_or_else(|| Error::Contract("run had no limit potential".into()))?;
        times.push(p);
        distances.push(d);
    }
    let strictly_decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    let rate = if distances.len() >= 2 && distances.iter().all(|&d| d > 0.0) {
        let n = times.len() as f64;
        let logs: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
        let tm = times.iter().sum::<f64>() / n;
        let lm = logs.iter().sum::<f64>() / n;
        let num: f64 = times.iter().zip(&logs).map(|(t, l)| (t - tm) * (l - lm)).sum();
        let den: f64 = times.iter().map(|t| (t - tm) * (t - tm)).sum();
        -num / den
    } else {
        f64::INFINITY
    };
    Ok(ConvergenceReport { times, distances, strictly_decreasing, rate })
}
