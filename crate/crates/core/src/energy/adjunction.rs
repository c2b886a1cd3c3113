use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibration::{binomial, semi_flat, weil_petersson, FibrationModel};
use crate::forms::{wedge_density, WedgeWord};
use crate::grid::{ddbar, integrate_weighted, HermitianFormField, ScalarField, VolumeDensity};

use super::{generalized_mabuchi, mabuchi, EnergyReport};

pub const EXPANSION_CSV_COLUMNS: [&str; 4] = ["t", "K", "prediction", "remainder"];

/// Coefficients `A[i][j]`, `i = 0..=kappa`, `j = 0..n-kappa-1`, of the fiber Ricci pairing
/// `int (int_fiber psi Ric(omega0_s) ^ omega0_s^j ^ omega_psi_s^{n-kappa-1-j}) chi^i ^ chi_phibar^{kappa-i}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub n: usize,
    pub kappa: usize,
    /// Summation ranges used for the prediction.
    pub summation: String,
    pub closed_form: Vec<Vec<f64>>,
    pub formal: Vec<Vec<f64>>,
    pub resolved: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn new(n: usize, kappa: usize) -> Self {
        Self {
            n,
            kappa,
            summation: "i = 0 only (A[i][j] = delta_i0), j = 0..n-kappa-1; closed form summed over i = 0..kappa reported alongside".into(),
            closed_form: a_closed_form(n, kappa),
            formal: a_formal_expansion(n, kappa),
            resolved: a_resolved(n, kappa),
        }
    }
}

/// `binom(n,kappa)^{-1} binom(i+j, i) binom(n-1-i-j, kappa-i)`.
pub fn a_closed_form(n: usize, kappa: usize) -> Vec<Vec<f64>> {
    let b = binomial(n, kappa);
    (0..=kappa)
        .map(|i| {
            (0..n - kappa)
                .map(|j| {
                    let top = n - 1 - i - j;
                    if kappa - i <= top {
                        binomial(i + j, i) * binomial(top, kappa - i) / b
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Coefficients read off by expanding
/// `sum_{j'<n} Ric_f ^ (chi + t omega0)^{j'} ^ (chi_phibar + t omega_psi)^{n-1-j'}`
/// word by word and collecting the words of base degree `kappa`, over `binom(n,kappa)`.
pub fn a_formal_expansion(n: usize, kappa: usize) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; n - kappa]; kappa + 1];
    for jp in 0..n {
        let len = n - 1;
        for mask in 0u64..(1u64 << len) {
            // bit set: the factor is the fiber-type term (omega0 or omega_psi)
            let (mut chi, mut chi_bar, mut om0) = (0, 0, 0);
            for f in 0..len {
                let fiber = mask >> f & 1 == 1;
                match (f < jp, fiber) {
                    (true, false) => chi += 1,
                    (true, true) => om0 += 1,
                    (false, false) => chi_bar += 1,
                    (false, true) => {}
                }
            }
            if chi + chi_bar == kappa {
                table[chi][om0] += 1.0;
            }
        }
    }
    let b = binomial(n, kappa);
    table.iter().map(|r| r.iter().map(|v| v / b).collect()).collect()
}

/// Coefficients that the direct expansion of `K_{chi + t omega0}(phibar + t psi)` produces once
/// the cross terms `phibar ^ ddbar psi` are integrated by parts: the pairing is taken against
/// `chi_phibar^kappa` alone.
pub fn a_resolved(n: usize, kappa: usize) -> Vec<Vec<f64>> {
    (0..=kappa).map(|i| vec![if i == 0 { 1.0 } else { 0.0 }; n - kappa]).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionReport {
    /// Power `e` of `K ~ c t^e`.
    pub exponent: usize,
    pub t_list: Vec<f64>,
    pub k_values: Vec<f64>,
    /// Predicted leading coefficient `c`.
    pub prediction: f64,
    /// Leading coefficient with the closed-form `A[i][j]`, when it differs in kind.
    pub prediction_closed_form: Option<f64>,
    /// Extrapolation of `K / t^e` to `t = 0`.
    pub leading_fit: f64,
    /// `|K - prediction t^e|`.
    pub remainders: Vec<f64>,
    /// Least-squares slope of `log remainder` against `log t`.
    pub remainder_slope: f64,
    pub coefficients: Option<CoefficientTable>,
}

impl ExpansionReport {
    pub fn to_csv(&self) -> String {
        let mut out = EXPANSION_CSV_COLUMNS.join(",");
        out.push('\n');
        for (k, t) in self.t_list.iter().enumerate() {
            let p = self.prediction * t.powi(self.exponent as i32);
            let _ = writeln!(out, "{},{},{},{}", t, self.k_values[k], p, self.remainders[k]);
        }
        out
    }
}

/// Neville extrapolation of `K / t^e` to `t = 0`, remainders and their log-log slope.
pub fn fit_expansion(t_list: &[f64], k_values: &[f64], exponent: usize, prediction: f64) -> (f64, Vec<f64>, f64) {
    let m = t_list.len();
    let mut p: Vec<f64> = t_list.iter().zip(k_values).map(|(t, k)| k / t.powi(exponent as i32)).collect();
    for level in 1..m {
        for i in 0..m - level {
            let (ti, tj) = (t_list[i], t_list[i + level]);
            p[i] = (tj * p[i] - ti * p[i + 1]) / (tj - ti);
        }
    }
    let leading = if m > 0 { p[0] } else { f64::NAN };
    let remainders: Vec<f64> =
        t_list.iter().zip(k_values).map(|(t, k)| (k - prediction * t.powi(exponent as i32)).abs()).collect();
    let slope = if remainders.iter().all(|&r| r > 0.0) && m >= 2 {
        let xs: Vec<f64> = t_list.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = remainders.iter().map(|r| r.ln()).collect();
        let (xm, ym) = (xs.iter().sum::<f64>() / m as f64, ys.iter().sum::<f64>() / m as f64);
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        num / den
    } else {
        f64::INFINITY
    };
    (leading, remainders, slope)
}

fn check_t_list(t_list: &[f64]) -> Result<()> {
    if t_list.len() < 2 || t_list.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Contract("t_list needs at least two positive values".into()));
    }
    Ok(())
}

fn product_model(model: &FibrationModel) -> Result<()> {
    if !model.is_isotrivial() {
        return Err(Error::Contract("product classes need a constant fiber modulus".into()));
    }
    if model.n() - model.kappa() != 1 {
        return Err(Error::Contract("the expansion supports one-dimensional fibers only".into()));
    }
    Ok(())
}

/// `K_{chi + t omega0}(phi_t)` for every `t`, errors tagged with the offending `t`.
fn energies_along(
    model: &FibrationModel,
    t_list: &[f64],
    potential: impl Fn(f64) -> Result<ScalarField> + Sync,
) -> Result<Vec<f64>> {
    let chi = model.pullback_form(model.chi())?;
    t_list
        .par_iter()
        .map(|&t| {
            let eval = || -> Result<f64> {
                let omega_t = chi.add_scaled(t, model.omega0())?;
                mabuchi(&omega_t, &potential(t)?)
            };
            eval().map_err(|e| Error::Parameter { t, source: Box::new(e) })
        })
        .collect()
}

fn base_field(model: &FibrationModel, values: &[f64]) -> Result<VolumeDensity> {
    model.pushforward(&VolumeDensity::new(model.product().clone(), values.to_vec())?)
}

/// Leading behaviour of `K_{chi + t omega0}(phibar + t psi)` as `t -> 0`.
///
/// `psi` is projected to fiber mean zero against the semi-flat fiber measure. The prediction is
/// `binom(n,kappa) (K_{chi,omega_WP}(phibar) + L(psi))` with the resolved coefficients; the
/// closed-form coefficients give `prediction_closed_form`.
pub fn adjunction_expansion(
    model: &FibrationModel,
    phi_bar: &ScalarField,
    psi: &ScalarField,
    t_list: &[f64],
) -> Result<EnergyReport> {
    product_model(model)?;
    check_t_list(t_list)?;
    let (n, kappa) = (model.n(), model.kappa());
    let sf = semi_flat(model)?;
    let psi = psi.sub(&model.pullback(&model.fiber_average(psi, &sf.theta)?)?)?;
    let lifted = model.pullback(phi_bar)?;
    let k_values = energies_along(model, t_list, |t| lifted.add(&psi.scale(t)))?;

    let chi = model.chi();
    let chi_bar = chi.add(&ddbar(phi_bar)?)?;
    chi_bar.check_positive(f64::MIN_POSITIVE, "chi + ddbar phibar")?;
    let base_energy = generalized_mabuchi(chi, &weil_petersson(model)?, phi_bar)?;

    let omega0 = model.omega0();
    let g = model.fiber_top(omega0);
    let big_g = model.fiber_top(&omega0.add(&ddbar(&psi)?)?);
    if let Some((_, i)) = big_g.nonpositive() {
        return Err(Error::Positivity { what: "omega0 + ddbar psi on the fibers".into(), index: i, min_eig: big_g.min() });
    }
    let log_g = ScalarField::new(model.product().clone(), g.values().iter().map(|v| v.ln()).collect())?;
    let ric_fiber = ddbar(&log_g)?.diagonal_entry(kappa).scale(-1.0);
    let entropy: Vec<f64> = big_g.values().iter().zip(g.values()).map(|(a, b)| (a / b).ln() * a).collect();
    let pairing: Vec<f64> = psi.values().iter().zip(ric_fiber.values()).map(|(p, r)| p * r).collect();
    let entropy = base_field(model, &entropy)?;
    let pairing = base_field(model, &pairing)?;

    let words: Vec<VolumeDensity> = (0..=kappa)
        .map(|i| wedge_density(&WedgeWord::new().with(chi, i).with(&chi_bar, kappa - i)))
        .collect::<Result<_>>()?;
    let l_of = |a: &[Vec<f64>]| -> f64 {
        let mut l = integrate_weighted(entropy.values(), &words[0]);
        for (i, w) in words.iter().enumerate() {
            l -= a[i][0] * integrate_weighted(pairing.values(), w);
        }
        l
    };
    let table = CoefficientTable::new(n, kappa);
    let b = binomial(n, kappa);
    let prediction = b * (base_energy + l_of(&table.resolved));
    let prediction_closed_form = Some(b * (base_energy + l_of(&table.closed_form)));

    let exponent = n - kappa;
    let (leading_fit, remainders, remainder_slope) = fit_expansion(t_list, &k_values, exponent, prediction);
    let expansion = ExpansionReport {
        exponent,
        t_list: t_list.to_vec(),
        k_values,
        prediction,
        prediction_closed_form,
        leading_fit,
        remainders,
        remainder_slope,
        coefficients: Some(table),
    };
    Ok(EnergyReport { value: leading_fit, path_value: None, residual_field: None, expansion: Some(expansion) })
}

/// `theta = -f_*(rho ^ omega0)` with `rho = -ddbar log(omega0 restricted to the fibers)`.
pub fn surface_twist(model: &FibrationModel) -> Result<HermitianFormField> {
    product_model(model)?;
    if model.n() != 2 {
        return Err(Error::Contract("the surface twist needs n = 2".into()));
    }
    let omega0 = model.omega0();
    let g = model.fiber_top(omega0);
    let log_g = ScalarField::new(model.product().clone(), g.values().iter().map(|v| v.ln()).collect())?;
    let rho = ddbar(&log_g)?.scale(-1.0);
    let d = wedge_density(&WedgeWord::new().with(&rho, 1).with(omega0, 1))?;
    let theta = model.pushforward(&d)?.to_field().scale(-1.0);
    HermitianFormField::diagonal(&[&theta])
}

/// Leading behaviour of `K_{chi + t omega0}(phi)` for a base potential on a surface, against
/// the prediction `2 K_{chi,theta}(phi)`.
pub fn surface_adjunction(
    model: &FibrationModel,
    phi: &ScalarField,
    theta: &HermitianFormField,
    t_list: &[f64],
) -> Result<EnergyReport> {
    product_model(model)?;
    check_t_list(t_list)?;
    if model.n() != 2 {
        return Err(Error::Contract("the surface expansion needs n = 2".into()));
    }
    let lifted = model.pullback(phi)?;
    let k_values = energies_along(model, t_list, |_| Ok(lifted.clone()))?;
    let prediction = 2.0 * generalized_mabuchi(model.chi(), theta, phi)?;
    let (leading_fit, remainders, remainder_slope) = fit_expansion(t_list, &k_values, 1, prediction);
    let expansion = ExpansionReport {
        exponent: 1,
        t_list: t_list.to_vec(),
        k_values,
        prediction,
        prediction_closed_form: None,
        leading_fit,
        remainders,
        remainder_slope,
        coefficients: None,
    };
    Ok(EnergyReport { value: leading_fit, path_value: None, residual_field: None, expansion: Some(expansion) })
}
