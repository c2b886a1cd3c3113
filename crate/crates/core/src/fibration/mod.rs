//! Desk-scale fibrations `X = base x fiber -> base`: semi-flat forms, fiber integration, the
//! density `F` and the Weil-Petersson form of the fiber moduli.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::ma_top;
use crate::grid::{ddbar, pairwise_sum, poisson_solve, HermitianFormField, ScalarField, TorusChart, VolumeDensity};

/// Modulus `tau_f(y)` of the fiber over each base point.
#[derive(Clone, Debug)]
pub enum FiberModulus {
    Constant(Complex64),
    /// Real and imaginary parts sampled on the base.
    Varying { re: ScalarField, im: ScalarField },
}

/// Base, fiber and reference data of a model fibration.
///
/// Product fields are sampled on `base x fiber` with the base factors first. When the modulus
/// varies, product quantities are read in the unit-square fiber coordinates and the fiber area
/// element at `y` is `Im tau_f(y) dx dy`; the fiber chart modulus then only fixes the
/// coordinates of the grid.
#[derive(Clone, Debug)]
pub struct FibrationModel {
    base: TorusChart,
    fiber: TorusChart,
    product: TorusChart,
    modulus: FiberModulus,
    chi: HermitianFormField,
    omega0: HermitianFormField,
    big_omega: VolumeDensity,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `binom(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl FibrationModel {
    pub fn new(
        base: TorusChart,
        fiber: TorusChart,
        modulus: FiberModulus,
        chi: HermitianFormField,
        omega0: HermitianFormField,
        big_omega: VolumeDensity,
    ) -> Result<Self> {
        let product = base.product(&fiber);
        base.check_same(chi.chart(), "chi lives on the base")?;
        product.check_same(omega0.chart(), "omega0 lives on the product")?;
        product.check_same(big_omega.chart(), "Omega lives on the product")?;
        match &modulus {
            FiberModulus::Constant(t) => {
                if !(t.im > 0.0) {
                    return Err(Error::Model(format!("Im tau_f = {} must be positive", t.im)));
                }
                if *t != fiber.moduli()[0] || fiber.dim() != 1 {
                    return Err(Error::Model("constant modulus must match the fiber chart".into()));
                }
            }
            FiberModulus::Varying { re, im } => {
                base.check_same(re.chart(), "Re tau_f lives on the base")?;
                base.check_same(im.chart(), "Im tau_f lives on the base")?;
                re.check_finite()?;
                im.check_finite()?;
                if let Some(i) = im.values().iter().position(|&v| !(v > 0.0)) {
                    return Err(Error::Model(format!("Im tau_f must be positive (base index {i})")));
                }
                if fiber.dim() != 1 {
                    return Err(Error::Model("a varying modulus needs a one-dimensional fiber".into()));
                }
            }
        }
        let (min_eig, index) = chi.min_eigenvalue();
        if min_eig < -1e-12 {
            return Err(Error::Positivity { what: "chi must be semi-positive".into(), index, min_eig });
        }
        if !(crate::grid::integrate(&ma_top(&chi)) > 0.0) {
            return Err(Error::Model("chi is not big".into()));
        }
        omega0.check_positive(f64::MIN_POSITIVE, "omega0")?;
        if let Some((_, i)) = big_omega.nonpositive() {
            return Err(Error::Model(format!("Omega must be strictly positive (grid index {i})")));
        }
        let model = Self { base, fiber, product, modulus, chi, omega0, big_omega };
        let mass = model.pushforward(&model.fiber_top(&model.omega0))?;
        if let Some(i) = mass.values().iter().position(|m| (m - 1.0).abs() > 1e-9) {
            return Err(Error::Model(format!(
                "fiber mass of omega0 is {} at base index {i}, expected 1",
                mass.values()[i]
            )));
        }
        Ok(model)
    }

    pub fn base(&self) -> &TorusChart {
        &self.base
    }

    pub fn fiber(&self) -> &TorusChart {
        &self.fiber
    }

    pub fn product(&self) -> &TorusChart {
        &self.product
    }

    pub fn modulus(&self) -> &FiberModulus {
        &self.modulus
    }

    pub fn chi(&self) -> &HermitianFormField {
        &self.chi
    }

    pub fn omega0(&self) -> &HermitianFormField {
        &self.omega0
    }

    pub fn big_omega(&self) -> &VolumeDensity {
        &self.big_omega
    }

    /// Base dimension `kappa`.
    pub fn kappa(&self) -> usize {
        self.base.dim()
    }

    /// Total dimension `n`.
    pub fn n(&self) -> usize {
        self.product.dim()
    }

    pub fn is_isotrivial(&self) -> bool {
        matches!(self.modulus, FiberModulus::Constant(_))
    }

    /// `Im tau_f` on the base.
    pub fn im_tau(&self) -> ScalarField {
        match &self.modulus {
            FiberModulus::Constant(t) => ScalarField::constant(&self.base, t.im),
            FiberModulus::Varying { im, .. } => im.clone(),
        }
    }

    /// Ratio of the true fiber area element to the one of the fiber chart.
    fn fiber_weight(&self) -> Vec<f64> {
        let chart_im = self.fiber.volume();
        self.im_tau().values().iter().map(|v| v / chart_im).collect()
    }

    /// Model with the same geometry and a different `Omega`.
    pub fn with_big_omega(&self, big_omega: VolumeDensity) -> Result<Self> {
        Self::new(self.base.clone(), self.fiber.clone(), self.modulus.clone(), self.chi.clone(), self.omega0.clone(), big_omega)
    }

    /// Base field broadcast along the fibers.
    pub fn pullback(&self, f: &ScalarField) -> Result<ScalarField> {
        self.base.check_same(f.chart(), "pullback")?;
        let nf = self.fiber.len();
        let values = f.values().iter().flat_map(|&v| std::iter::repeat(v).take(nf)).collect();
        ScalarField::new(self.product.clone(), values)
    }

    /// Base form `alpha` as the form `alpha (+) 0` on the product.
    pub fn pullback_form(&self, alpha: &HermitianFormField) -> Result<HermitianFormField> {
        self.base.check_same(alpha.chart(), "pullback_form")?;
        Ok(alpha.direct_sum(&HermitianFormField::zeros(&self.fiber)))
    }

    /// Values over the fiber above base index `b`.
    pub fn fiber_slice<'a>(&self, values: &'a [f64], b: usize) -> &'a [f64] {
        let nf = self.fiber.len();
        &values[b * nf..(b + 1) * nf]
    }

    /// Top power in the fiber directions, `(n-kappa)! det` of the fiber block.
    pub fn fiber_top(&self, omega: &HermitianFormField) -> VolumeDensity {
        let (k, n) = (self.kappa(), self.n());
        let c = factorial(n - k);
        let det = omega.block(k..n).det();
        VolumeDensity::from_vec_unchecked(omega.chart().clone(), det.into_iter().map(|d| c * d).collect())
    }

    /// Top power in the base directions, `kappa! det` of the base block.
    pub fn base_top(&self, omega: &HermitianFormField) -> VolumeDensity {
        let k = self.kappa();
        let c = factorial(k);
        let det = omega.block(0..k).det();
        VolumeDensity::from_vec_unchecked(omega.chart().clone(), det.into_iter().map(|d| c * d).collect())
    }

    /// Fiber integral of a product density: a density on the base.
    pub fn pushforward(&self, v: &VolumeDensity) -> Result<VolumeDensity> {
        self.product.check_same(v.chart(), "pushforward")?;
        let cell = self.fiber.cell_volume();
        let w = self.fiber_weight();
        let values = (0..self.base.len())
            .map(|b| pairwise_sum(self.fiber_slice(v.values(), b)) * cell * w[b])
            .collect();
        VolumeDensity::new(self.base.clone(), values)
    }

    /// Fiber average of `f` with respect to the product density `weight`.
    pub fn fiber_average(&self, f: &ScalarField, weight: &VolumeDensity) -> Result<ScalarField> {
        self.product.check_same(f.chart(), "fiber_average")?;
        self.product.check_same(weight.chart(), "fiber_average")?;
        let values = (0..self.base.len())
            .map(|b| {
                let w = self.fiber_slice(weight.values(), b);
                let fw: Vec<f64> = self.fiber_slice(f.values(), b).iter().zip(w).map(|(a, b)| a * b).collect();
                pairwise_sum(&fw) / pairwise_sum(w)
            })
            .collect();
        ScalarField::new(self.base.clone(), values)
    }
}

/// Output of [`semi_flat`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemiFlatData {
    pub psi: ScalarField,
    pub omega_sf: HermitianFormField,
    /// Fiber top power of `omega_sf`.
    pub theta: VolumeDensity,
    /// `sup` over the product of the fiber block of `ddbar log theta`.
    pub fiber_ricci_residual: f64,
}

/// Fiberwise problem over one base point for a one-dimensional fiber with area density `g`:
/// `h = log(mean g / g)` normalizes `int e^h g = int g`, then `g + ddbar psi = e^h g` with
/// `int psi g = 0`.
fn fiber_solve(fiber: &TorusChart, g: &[f64]) -> Result<Vec<f64>> {
    let flat = HermitianFormField::identity(fiber, 1.0);
    let mean = pairwise_sum(g) / g.len() as f64;
    let h: Vec<f64> = g.iter().map(|g| (mean / g).ln()).collect();
    let rhs: Vec<f64> = g.iter().zip(&h).map(|(g, h)| h.exp() * g - g).collect();
    let psi = poisson_solve(&ScalarField::new(fiber.clone(), rhs)?, &flat)?;
    let gp: Vec<f64> = psi.values().iter().zip(g).map(|(p, g)| p * g).collect();
    let c = pairwise_sum(&gp) / pairwise_sum(g);
    Ok(psi.values().iter().map(|p| p - c).collect())
}

/// Semi-flat form `omega_SF = omega0 + ddbar psi_SF`, flat on every fiber.
pub fn semi_flat(model: &FibrationModel) -> Result<SemiFlatData> {
    if model.n() - model.kappa() != 1 {
        return Err(Error::Model("semi_flat supports one-dimensional fibers only".into()));
    }
    let g = model.fiber_top(model.omega0());
    let slices: Vec<Vec<f64>> = (0..model.base().len())
        .into_par_iter()
        .map(|b| {
            fiber_solve(model.fiber(), model.fiber_slice(g.values(), b))
                .map_err(|e| Error::FiberSolve { index: b, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let psi = ScalarField::new(model.product().clone(), slices.concat())?;
    let omega_sf = model.omega0().add(&ddbar(&psi)?)?;
    let theta = model.fiber_top(&omega_sf);
    if let Some((_, i)) = theta.nonpositive() {
        return Err(Error::FiberSolve {
            index: i / model.fiber().len(),
            source: Box::new(Error::Positivity { what: "semi-flat fiber metric".into(), index: i, min_eig: 0.0 }),
        });
    }
    let log_theta = ScalarField::new(model.product().clone(), theta.values().iter().map(|v| v.ln()).collect())?;
    let k = model.kappa();
    let fiber_ricci_residual =
        ddbar(&log_theta)?.block(k..k + 1).data.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    Ok(SemiFlatData { psi, omega_sf, theta, fiber_ricci_residual })
}

/// `F = f_* Omega / chi^kappa` on the base, with the cross-check `Omega / (Theta ^ chi^kappa)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityF {
    pub f: ScalarField,
    /// `sup |Omega / (Theta ^ chi^kappa) - F| / F` over the product.
    pub consistency: f64,
}

pub fn density_f(model: &FibrationModel, sf: &SemiFlatData) -> Result<DensityF> {
    let chi_top = ma_top(model.chi());
    if let Some(i) = chi_top.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Contract(format!("chi^kappa vanishes at base index {i}; F is undefined")));
    }
    let push = model.pushforward(model.big_omega())?;
    let f = ScalarField::new(
        model.base().clone(),
        push.values().iter().zip(chi_top.values()).map(|(p, c)| p / c).collect(),
    )?;
    // Theta is measured against the fiber chart; rescale to the true fiber area element.
    let w = model.fiber_weight();
    let nf = model.fiber().len();
    let mut consistency = 0.0f64;
    for (p, (o, t)) in model.big_omega().values().iter().zip(sf.theta.values()).enumerate() {
        let b = p / nf;
        let q = o / (t * w[b] * chi_top.values()[b]);
        consistency = consistency.max((q - f.values()[b]).abs() / f.values()[b]);
    }
    Ok(DensityF { f, consistency })
}

/// `omega_WP = -ddbar log Im tau_f` on the base.
pub fn weil_petersson(model: &FibrationModel) -> Result<HermitianFormField> {
    match model.modulus() {
        FiberModulus::Constant(_) => Ok(HermitianFormField::zeros(model.base())),
        FiberModulus::Varying { im, .. } => weil_petersson_from(im),
    }
}

/// `-ddbar log Im tau` for a sampled `Im tau`.
pub fn weil_petersson_from(im_tau: &ScalarField) -> Result<HermitianFormField> {
    if let Some(i) = im_tau.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Model(format!("Im tau_f must be positive (base index {i})")));
    }
    Ok(ddbar(&im_tau.map(f64::ln))?.scale(-1.0))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::integrate;

    fn isotrivial(nb: usize, nf: usize, g: impl Fn(&[f64]) -> f64, omega: impl Fn(&[f64]) -> f64) -> FibrationModel {
        let base = TorusChart::square(1, nb).unwrap();
        let tau = Complex64::new(0.3, 1.2);
        let fiber = TorusChart::new(vec![nf], vec![tau]).unwrap();
        let product = base.product(&fiber);
        let chi = HermitianFormField::identity(&base, 1.0);
        let fib = ScalarField::from_fn(&product, |x| g(x) / tau.im);
        let omega0 = HermitianFormField::diagonal(&[&ScalarField::constant(&product, 1.0), &fib]).unwrap();
        let big = VolumeDensity::from_fn(&product, omega);
        FibrationModel::new(base, fiber, FiberModulus::Constant(tau), chi, omega0, big).unwrap()
    }

    #[test]
    fn flat_fibers_are_fixed() {
        let m = isotrivial(8, 16, |_| 1.0, |_| 1.0);
        let sf = semi_flat(&m).unwrap();
        assert!(sf.psi.sup_norm() <= 1e-14);
        assert!(sf.omega_sf.sub(m.omega0()).unwrap().sup_norm() <= 1e-12);
    }

    #[test]
    fn one_dimensional_fiber_oracle() {
        let eps = 0.2;
        let m = isotrivial(8, 32, |x| 1.0 + eps * (2.0 * PI * x[2]).cos(), |_| 1.0);
        let sf = semi_flat(&m).unwrap();
        // g = (1 + eps cos 2pi x_f) / Im tau, and ddbar cos(2pi x_f) = -pi^2 |tau|^2 / Im^2 cos(2pi x_f)
        let tau = m.fiber().moduli()[0];
        let k2 = (PI / tau.im).powi(2) * tau.norm_sqr();
        let amp = eps / tau.im / k2;
        for p in 0..m.product().len() {
            let x = m.product().coords(p);
            let want = amp * ((2.0 * PI * x[2]).cos() - eps / 2.0);
            assert!((sf.psi.values()[p] - want).abs() <= 1e-9, "{} {}", sf.psi.values()[p], want);
        }
        // finite-difference check of g + |tau|^2/(4 Im^2) psi_xx = const on a fine line
        let n = 4096;
        let h = 1.0 / n as f64;
        let line: Vec<f64> = (0..n).map(|i| amp * (2.0 * PI * i as f64 * h).cos()).collect();
        let lap: Vec<f64> = (0..n).map(|i| (line[(i + 1) % n] - 2.0 * line[i] + line[(i + n - 1) % n]) / (h * h)).collect();
        let coeff = tau.norm_sqr() / (4.0 * tau.im * tau.im);
        for i in (0..n).step_by(97) {
            let total = (1.0 + eps * (2.0 * PI * i as f64 * h).cos()) / tau.im + coeff * lap[i];
            assert!((total - 1.0 / tau.im).abs() <= 1e-6);
        }
        assert!(sf.fiber_ricci_residual <= 1e-8);
    }

    #[test]
    fn semi_flat_general_and_idempotent() {
        let m = isotrivial(
            8,
            16,
            |x| 1.0 + 0.3 * (2.0 * PI * (x[2] + x[0])).sin() + 0.1 * (2.0 * PI * (x[3] - x[1])).cos(),
            |x| 1.0 + 0.2 * (2.0 * PI * x[0]).cos(),
        );
        let sf = semi_flat(&m).unwrap();
        assert!(sf.fiber_ricci_residual <= 1e-8);
        let mass = m.pushforward(&sf.theta).unwrap();
        assert!(mass.values().iter().all(|v| (v - 1.0).abs() <= 1e-10));
        let again = FibrationModel::new(
            m.base().clone(),
            m.fiber().clone(),
            m.modulus().clone(),
            m.chi().clone(),
            sf.omega_sf.clone(),
            m.big_omega().clone(),
        )
        .unwrap();
        assert!(semi_flat(&again).unwrap().psi.sup_norm() <= 1e-10);
    }

    #[test]
    fn pushforward_mass_and_oracle() {
        let m = isotrivial(16, 16, |_| 1.0, |x| ((2.0 * PI * x[0]).cos() * (2.0 * PI * x[2]).cos()).exp());
        let push = m.pushforward(m.big_omega()).unwrap();
        let (a, b) = (integrate(&push), integrate(m.big_omega()));
        assert!((a - b).abs() <= 1e-12 * b);
        // dense 1D quadrature over the fiber x-direction: the integrand does not depend on y_f
        let tau_im = m.fiber().moduli()[0].im;
        for bi in 0..m.base().len() {
            let c = (2.0 * PI * m.base().coords(bi)[0]).cos();
            let n = 20000;
            let q: f64 = (0..n).map(|i| (c * (2.0 * PI * (i as f64 + 0.5) / n as f64).cos()).exp()).sum::<f64>() / n as f64;
            assert!((push.values()[bi] - q * tau_im).abs() <= 1e-10);
        }
        let ones = m.pushforward(&VolumeDensity::constant(m.product(), 1.0)).unwrap();
        assert!(ones.values().iter().all(|v| (v - tau_im).abs() < 1e-14));
    }

    #[test]
    fn product_density_pushes_to_its_base_factor() {
        let tau_im = 1.2;
        let m = isotrivial(8, 16, |_| 1.0, |x| (1.0 + 0.5 * (2.0 * PI * x[1]).sin()) * (1.0 + 0.4 * (2.0 * PI * x[3]).cos()) / tau_im);
        let push = m.pushforward(m.big_omega()).unwrap();
        for b in 0..m.base().len() {
            let y = m.base().coords(b);
            assert!((push.values()[b] - (1.0 + 0.5 * (2.0 * PI * y[1]).sin())).abs() <= 1e-13);
        }
    }

    #[test]
    fn density_f_cases() {
        let m = isotrivial(8, 16, |_| 1.0, |_| 1.0 / 1.2);
        let sf = semi_flat(&m).unwrap();
        let d = density_f(&m, &sf).unwrap();
        assert!(d.f.values().iter().all(|v| (v - 1.0).abs() <= 1e-13));
        assert!(d.consistency <= 1e-12);
        // Omega = e^{-G(x_b)} flat: F = e^{-G} Im tau / chi-density
        let g = |x: &[f64]| 0.3 * (2.0 * PI * x[0]).sin();
        let m = isotrivial(8, 16, |x| 1.0 + 0.2 * (2.0 * PI * x[2]).cos(), move |x| (-g(x)).exp());
        let sf = semi_flat(&m).unwrap();
        let d = density_f(&m, &sf).unwrap();
        for b in 0..m.base().len() {
            let want = (-g(&m.base().coords(b))).exp() * 1.2;
            assert!((d.f.values()[b] - want).abs() <= 1e-12);
        }
        assert!(d.consistency <= 1e-9);
        // fiber-dependent Omega is flagged
        let m = isotrivial(8, 16, |_| 1.0, |x| 1.0 + 0.3 * (2.0 * PI * x[2]).cos());
        let d = density_f(&m, &semi_flat(&m).unwrap()).unwrap();
        assert!(d.consistency > 0.1);
    }

    #[test]
    fn weil_petersson_cases() {
        let m = isotrivial(8, 8, |_| 1.0, |_| 1.0);
        assert_eq!(weil_petersson(&m).unwrap().sup_norm(), 0.0);
        // tau = i e^{s}: omega_WP = -ddbar s, with ddbar of the single mode known in closed form
        let base = TorusChart::square(1, 32).unwrap();
        let s = |x: &[f64]| 0.2 * (2.0 * PI * x[0]).cos() + 0.1 * (2.0 * PI * x[1]).sin();
        let im = ScalarField::from_fn(&base, |x| s(x).exp());
        let wp = weil_petersson_from(&im).unwrap();
        for p in 0..base.len() {
            let x = base.coords(p);
            // with tau = i, ddbar u = (u_xx + u_yy)/4
            let lap = -4.0 * PI * PI * s(&x);
            let want = -lap / 4.0;
            assert!((wp.at(p)[0].re - want).abs() <= 1e-10);
        }
        assert!(weil_petersson_from(&im.scale(-1.0)).is_err());
    }

    #[test]
    fn model_rejects_bad_fiber_mass() {
        let base = TorusChart::square(1, 8).unwrap();
        let fiber = TorusChart::square(1, 8).unwrap();
        let product = base.product(&fiber);
        let r = FibrationModel::new(
            base.clone(),
            fiber,
            FiberModulus::Constant(Complex64::i()),
            HermitianFormField::identity(&base, 1.0),
            HermitianFormField::identity(&product, 2.0),
            VolumeDensity::constant(&product, 1.0),
        );
        assert!(matches!(r, Err(Error::Model(_))));
    }
}
