//! Analytic description of a model fibration, sampled onto grids on demand.

use std::f64::consts::PI;

use kahler_lab::fibration::{binomial, FiberModulus, FibrationModel};
use kahler_lab::forms::ma_top;
use kahler_lab::grid::{ddbar, HermitianFormField, ScalarField, TorusChart, VolumeDensity};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// `amp cos(2 pi k.x + phase)` in unit-square coordinates; missing wave numbers are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub amp: f64,
    pub k: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

impl Mode {
    pub fn new(amp: f64, k: &[f64]) -> Self {
        Self { amp, k: k.to_vec(), phase: 0.0 }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }
}

/// Sum of modes sampled on `chart`.
pub fn series(chart: &TorusChart, modes: &[Mode]) -> Result<ScalarField> {
    let axes = chart.shape().len();
    if let Some(m) = modes.iter().find(|m| m.k.len() > axes) {
        return Err(CliError::Config(format!("mode with {} wave numbers on a chart with {axes} axes", m.k.len())));
    }
    Ok(ScalarField::from_fn(chart, |x| {
        modes
            .iter()
            .map(|m| m.amp * (2.0 * PI * m.k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + m.phase).cos())
            .sum()
    }))
}

/// `scale * identity + ddbar(potential)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub scale: f64,
    #[serde(default)]
    pub potential: Vec<Mode>,
}

impl FormSpec {
    pub fn build(&self, chart: &TorusChart) -> Result<HermitianFormField> {
        Ok(HermitianFormField::identity(chart, self.scale).add(&ddbar(&series(chart, &self.potential)?)?)?)
    }
}

/// `Omega = scale exp(log_base(y)) [chi^kappa(y)] omega0_fiber^{n-kappa}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaSpec {
    pub scale: f64,
    #[serde(default)]
    pub log_base: Vec<Mode>,
    #[serde(default)]
    pub times_chi_top: bool,
}

/// Fibration with a `base_dim`-dimensional square base and a one-dimensional fiber.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub base_resolution: usize,
    #[serde(default = "one")]
    pub base_dim: usize,
    pub fiber_resolution: usize,
    /// `[Re, Im]` of the fiber chart modulus.
    pub fiber_tau: [f64; 2],
    /// Nonempty: `Im tau_f(y) = Im tau exp(series)` varies over the base.
    #[serde(default)]
    pub im_tau_log: Vec<Mode>,
    pub chi: FormSpec,
    pub omega0_base: FormSpec,
    /// Fiber block of `omega0` is `(1 + series(x_f)) / Im tau_f(y)`.
    #[serde(default)]
    pub fiber_density: Vec<Mode>,
    /// `ddbar` of this product series is added to `omega0`.
    #[serde(default)]
    pub omega0_mix: Vec<Mode>,
    pub big_omega: OmegaSpec,
}

fn one() -> usize {
    1
}

impl ModelSpec {
    pub fn with_base_resolution(&self, n: usize) -> Self {
        Self { base_resolution: n, ..self.clone() }
    }

    pub fn build(&self) -> Result<FibrationModel> {
        if self.base_resolution < 4 || self.fiber_resolution < 4 || self.base_dim == 0 {
            return Err(CliError::Config("resolutions must be at least 4 and base_dim positive".into()));
        }
        let tau = Complex64::new(self.fiber_tau[0], self.fiber_tau[1]);
        let base = TorusChart::square(self.base_dim, self.base_resolution)?;
        let fiber = TorusChart::new(vec![self.fiber_resolution], vec![tau])?;
        let product = base.product(&fiber);
        let nf = fiber.len();

        let (modulus, im) = if self.im_tau_log.is_empty() {
            (FiberModulus::Constant(tau), ScalarField::constant(&base, tau.im))
        } else {
            let im = series(&base, &self.im_tau_log)?.map(|s| tau.im * s.exp());
            let re = ScalarField::constant(&base, tau.re);
            (FiberModulus::Varying { re, im: im.clone() }, im)
        };

        let chi = self.chi.build(&base)?;
        let ob = self.omega0_base.build(&base)?;
        let shape = series(&fiber, &self.fiber_density)?;
        let g: Vec<f64> = (0..product.len()).map(|p| (1.0 + shape.values()[p % nf]) / im.values()[p / nf]).collect();
        let mut omega0 = ob.direct_sum(&HermitianFormField::zeros(&fiber));
        let d = omega0.dim();
        let mut data = omega0.data().to_vec();
        for (p, g) in g.iter().enumerate() {
            data[p * d * d + d * d - 1] = Complex64::new(*g, 0.0);
        }
        omega0 = HermitianFormField::new(product.clone(), data)?;
        if !self.omega0_mix.is_empty() {
            omega0 = omega0.add(&ddbar(&series(&product, &self.omega0_mix)?)?)?;
        }

        let base_factor = series(&base, &self.big_omega.log_base)?;
        let chi_top = ma_top(&chi);
        let provisional = FibrationModel::new(
            base.clone(),
            fiber.clone(),
            modulus.clone(),
            chi.clone(),
            omega0.clone(),
            VolumeDensity::constant(&product, 1.0),
        )?;
        let ftop = provisional.fiber_top(&omega0);
        let values = (0..product.len())
            .map(|p| {
                let b = p / nf;
                let c = if self.big_omega.times_chi_top { chi_top.values()[b] } else { 1.0 };
                self.big_omega.scale * base_factor.values()[b].exp() * c * ftop.values()[p]
            })
            .collect();
        Ok(provisional.with_big_omega(VolumeDensity::new(product, values)?)?)
    }

    /// `binom(n, kappa)` of the model.
    pub fn binomial(&self) -> f64 {
        binomial(self.base_dim + 1, self.base_dim)
    }
}
