//! Pointwise algebra of (1,1)-forms: top powers, mixed wedges, Ricci and scalar curvature.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ddbar, HermitianFormField, ScalarField, VolumeDensity};
use crate::linalg;

fn factorial(d: usize) -> f64 {
    (1..=d).product::<usize>() as f64
}

/// `omega^d` as a density: `d! det(omega)`. Non-positive values are kept as they are; use
/// [`VolumeDensity::nonpositive`] to detect them.
pub fn ma_top(omega: &HermitianFormField) -> VolumeDensity {
    let d = omega.dim();
    let f = factorial(d);
    let values = omega.data().chunks(d * d).map(|b| f * linalg::det(d, b)).collect();
    VolumeDensity::from_vec_unchecked(omega.chart().clone(), values)
}

/// Ordered multiset of forms whose multiplicities sum to the chart dimension.
#[derive(Clone, Debug, Default)]
pub struct WedgeWord<'a> {
    factors: Vec<(&'a HermitianFormField, usize)>,
}

impl<'a> WedgeWord<'a> {
    pub fn new() -> Self {
        Self { factors: Vec::new() }
    }

    /// Appends `form^mult`.
    pub fn with(mut self, form: &'a HermitianFormField, mult: usize) -> Self {
        if mult > 0 {
            self.factors.push((form, mult));
        }
        self
    }

    pub fn degree(&self) -> usize {
        self.factors.iter().map(|f| f.1).sum()
    }
}

/// Density of the wedge product of the word's factors.
///
/// For factors `A_1..A_d` (repeated by multiplicity) this is
/// `sum_{s,p} sgn(s) sgn(p) prod_k A_k[s(k)][p(k)]`, the coefficient of the top form; it
/// equals `ma_top` when all factors coincide and `1` for `diag(1,0) ^ diag(0,1)`.
pub fn wedge_density(word: &WedgeWord) -> Result<VolumeDensity> {
    let first = word
        .factors
        .first()
        .ok_or_else(|| Error::Contract("empty wedge word".into()))?
        .0;
    let chart = first.chart();
    let d = chart.dim();
    if word.degree() != d {
        return Err(Error::Contract(format!("wedge of degree {} on a {d}-dimensional chart", word.degree())));
    }
    for (f, _) in &word.factors {
        chart.check_same(f.chart(), "wedge_density")?;
    }
    let expanded: Vec<&HermitianFormField> =
        word.factors.iter().flat_map(|(f, m)| std::iter::repeat(*f).take(*m)).collect();
    let values = (0..chart.len())
        .map(|p| {
            let blocks: Vec<&[Complex64]> = expanded.iter().map(|f| f.at(p)).collect();
            linalg::mixed_sum(d, &blocks)
        })
        .collect();
    Ok(VolumeDensity::from_vec_unchecked(chart.clone(), values))
}

/// `log det(omega)`; errors if the determinant is not positive somewhere.
pub fn log_det(omega: &HermitianFormField) -> Result<ScalarField> {
    let d = omega.dim();
    let mut values = Vec::with_capacity(omega.chart().len());
    for (p, b) in omega.data().chunks(d * d).enumerate() {
        let det = linalg::det(d, b);
        if !(det > 0.0) {
            return Err(Error::Positivity {
                what: "determinant".into(),
                index: p,
                min_eig: linalg::min_eigenvalue(d, b),
            });
        }
        values.push(det.ln());
    }
    ScalarField::new(omega.chart().clone(), values)
}

/// `Ric(omega) = -ddbar log det(omega)`.
pub fn ricci(omega: &HermitianFormField) -> Result<HermitianFormField> {
    Ok(ddbar(&log_det(omega)?)?.scale(-1.0))
}

/// `tr_omega(theta) = g^{i jbar} theta_{i jbar}`.
pub fn trace(omega: &HermitianFormField, theta: &HermitianFormField) -> Result<ScalarField> {
    omega.chart().check_same(theta.chart(), "trace")?;
    let d = omega.dim();
    let mut inv = vec![Complex64::new(0.0, 0.0); d * d];
    let mut values = Vec::with_capacity(omega.chart().len());
    for p in 0..omega.chart().len() {
        let det = linalg::inverse(d, omega.at(p), &mut inv);
        if !(det > 0.0) || linalg::min_eigenvalue(d, omega.at(p)) <= 0.0 {
            return Err(Error::Positivity {
                what: "trace metric".into(),
                index: p,
                min_eig: linalg::min_eigenvalue(d, omega.at(p)),
            });
        }
        values.push(linalg::trace_product(d, &inv, theta.at(p)));
    }
    ScalarField::new(omega.chart().clone(), values)
}

/// `S(omega) = tr_omega Ric(omega)`.
pub fn scalar_curvature(omega: &HermitianFormField) -> Result<ScalarField> {
    trace(omega, &ricci(omega)?)
}

/// `|d u|^2_omega = g^{i jbar} u_i conj(u_j)` from the complex derivatives `u_i = du/dz_i`.
pub fn gradient_norm_sq(omega: &HermitianFormField, u: &ScalarField) -> Result<ScalarField> {
    omega.chart().check_same(u.chart(), "gradient norm")?;
    let d = omega.dim();
    let grads: Vec<Vec<Complex64>> = (0..d).map(|j| crate::grid::dz(u, j)).collect::<Result<_>>()?;
    let mut inv = vec![Complex64::new(0.0, 0.0); d * d];
    let values = (0..omega.chart().len())
        .map(|p| {
            linalg::inverse(d, omega.at(p), &mut inv);
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += (grads[j][p].conj() * inv[j * d + i] * grads[i][p]).re;
                }
            }
            s
        })
        .collect();
    ScalarField::new(omega.chart().clone(), values)
}
