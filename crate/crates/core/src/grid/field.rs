use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::chart::TorusChart;
use super::quadrature::pairwise_sum;
use crate::error::{Error, Result};
use crate::linalg;

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what: what.into(), index }),
        None => Ok(()),
    }
}

fn check_len(chart: &TorusChart, len: usize, what: &str) -> Result<()> {
    if chart.len() != len {
        return Err(Error::ChartMismatch(format!(
            "{what}: {len} values for a chart with {} points",
            chart.len()
        )));
    }
    Ok(())
}

/// Real function sampled on a chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct ScalarField {
    chart: TorusChart,
    values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FieldRepr {
    chart: TorusChart,
    values: Vec<f64>,
}

impl TryFrom<FieldRepr> for ScalarField {
    type Error = Error;
    fn try_from(r: FieldRepr) -> Result<Self> {
        ScalarField::new(r.chart, r.values)
    }
}

impl From<ScalarField> for FieldRepr {
    fn from(f: ScalarField) -> Self {
        FieldRepr { chart: f.chart, values: f.values }
    }
}

impl ScalarField {
    pub fn new(chart: TorusChart, values: Vec<f64>) -> Result<Self> {
        check_len(&chart, values.len(), "scalar field")?;
        check_finite(&values, "scalar field")?;
        Ok(Self { chart, values })
    }

    pub(crate) fn from_vec_unchecked(chart: TorusChart, values: Vec<f64>) -> Self {
        debug_assert_eq!(chart.len(), values.len());
        Self { chart, values }
    }

    pub fn zeros(chart: &TorusChart) -> Self {
        Self::constant(chart, 0.0)
    }

    pub fn constant(chart: &TorusChart, c: f64) -> Self {
        Self { chart: chart.clone(), values: vec![c; chart.len()] }
    }

    /// Samples `f` at the unit-square coordinates of each grid point.
    pub fn from_fn(chart: &TorusChart, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..chart.len()).map(|i| f(&chart.coords(i))).collect();
        Self { chart: chart.clone(), values }
    }

    pub fn chart(&self) -> &TorusChart {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { chart: self.chart.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.chart.check_same(&other.chart, "scalar field operation")?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { chart: self.chart.clone(), values })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn oscillation(&self) -> f64 {
        self.sup() - self.inf()
    }

    /// Flat (grid) average.
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.values, "scalar field")
    }
}

/// Nonnegative top-degree density relative to the flat volume `prod (i/2) dz_j dzbar_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldRepr", into = "FieldRepr")]
pub struct VolumeDensity {
    chart: TorusChart,
    values: Vec<f64>,
}

impl TryFrom<FieldRepr> for VolumeDensity {
    type Error = Error;
    fn try_from(r: FieldRepr) -> Result<Self> {
        VolumeDensity::new(r.chart, r.values)
    }
}

impl From<VolumeDensity> for FieldRepr {
    fn from(f: VolumeDensity) -> Self {
        FieldRepr { chart: f.chart, values: f.values }
    }
}

impl VolumeDensity {
    pub fn new(chart: TorusChart, values: Vec<f64>) -> Result<Self> {
        check_len(&chart, values.len(), "volume density")?;
        check_finite(&values, "volume density")?;
        Ok(Self { chart, values })
    }

    pub(crate) fn from_vec_unchecked(chart: TorusChart, values: Vec<f64>) -> Self {
        Self { chart, values }
    }

    pub fn from_field(f: &ScalarField) -> Self {
        Self { chart: f.chart.clone(), values: f.values.clone() }
    }

    pub fn constant(chart: &TorusChart, c: f64) -> Self {
        Self { chart: chart.clone(), values: vec![c; chart.len()] }
    }

    pub fn from_fn(chart: &TorusChart, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_field(&ScalarField::from_fn(chart, f))
    }

    pub fn chart(&self) -> &TorusChart {
        &self.chart
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField { chart: self.chart.clone(), values: self.values.clone() }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { chart: self.chart.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    /// Pointwise product with `e^f`.
    pub fn times_exp(&self, f: &ScalarField) -> Result<Self> {
        self.chart.check_same(f.chart(), "density times exp")?;
        let values = self.values.iter().zip(f.values()).map(|(d, v)| d * v.exp()).collect();
        Ok(Self { chart: self.chart.clone(), values })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Number of points with a non-positive density, and the first of them.
    pub fn nonpositive(&self) -> Option<(usize, usize)> {
        let first = self.values.iter().position(|&v| v <= 0.0)?;
        Some((self.values.iter().filter(|&&v| v <= 0.0).count(), first))
    }
}

/// Field of Hermitian coefficient matrices `a_{i jbar}` of `sqrt(-1) sum a_{i jbar} dz_i ^ dzbar_j`.
///
/// Top powers are measured as `d! det(a)` against the flat volume element, so the constant
/// `2^d` between `(sqrt(-1))^d` and `(sqrt(-1)/2)^d` is absorbed into the volume convention.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianFormField {
    chart: TorusChart,
    data: Vec<Complex64>,
}

impl HermitianFormField {
    /// Builds a field from point-major `d x d` blocks; the diagonal is made exactly real and the
    /// lower triangle is taken as the conjugate of the upper one.
    pub fn new(chart: TorusChart, mut data: Vec<Complex64>) -> Result<Self> {
        let d = chart.dim();
        check_len(&chart, data.len() / (d * d), "hermitian form")?;
        if data.len() % (d * d) != 0 {
            return Err(Error::ChartMismatch("hermitian form: ragged coefficient data".into()));
        }
        if let Some(index) = data.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite { what: "hermitian form".into(), index: index / (d * d) });
        }
        for block in data.chunks_mut(d * d) {
            linalg::hermitize(d, block);
        }
        Ok(Self { chart, data })
    }

    pub(crate) fn from_vec_unchecked(chart: TorusChart, data: Vec<Complex64>) -> Self {
        Self { chart, data }
    }

    pub fn zeros(chart: &TorusChart) -> Self {
        let d = chart.dim();
        Self { chart: chart.clone(), data: vec![Complex64::new(0.0, 0.0); chart.len() * d * d] }
    }

    /// Constant-coefficient form with matrix `m` (row-major `d x d`).
    pub fn constant(chart: &TorusChart, m: &[Complex64]) -> Result<Self> {
        let d = chart.dim();
        if m.len() != d * d {
            return Err(Error::Contract(format!("constant form needs {} entries", d * d)));
        }
        let mut data = Vec::with_capacity(chart.len() * d * d);
        for _ in 0..chart.len() {
            data.extend_from_slice(m);
        }
        Self::new(chart.clone(), data)
    }

    /// `c * I`.
    pub fn identity(chart: &TorusChart, c: f64) -> Self {
        Self::diagonal_constant(chart, &vec![c; chart.dim()])
    }

    pub fn diagonal_constant(chart: &TorusChart, diag: &[f64]) -> Self {
        let d = chart.dim();
        let mut m = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            m[i * d + i] = Complex64::new(diag[i], 0.0);
        }
        Self::constant(chart, &m).expect("diagonal form")
    }

    /// Diagonal form with entry `i` given by `diag[i]`.
    pub fn diagonal(diag: &[&ScalarField]) -> Result<Self> {
        let chart = diag
            .first()
            .ok_or_else(|| Error::Contract("diagonal form needs entries".into()))?
            .chart()
            .clone();
        let d = chart.dim();
        if diag.len() != d {
            return Err(Error::Contract(format!("{} diagonal entries for dimension {d}", diag.len())));
        }
        for f in diag {
            chart.check_same(f.chart(), "diagonal form")?;
        }
        let mut data = vec![Complex64::new(0.0, 0.0); chart.len() * d * d];
        for p in 0..chart.len() {
            for i in 0..d {
                data[p * d * d + i * d + i] = Complex64::new(diag[i].values()[p], 0.0);
            }
        }
        Ok(Self { chart, data })
    }

    pub fn chart(&self) -> &TorusChart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Raw point-major coefficient data.
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Coefficient block at grid point `p`.
    pub fn at(&self, p: usize) -> &[Complex64] {
        let dd = self.dim() * self.dim();
        &self.data[p * dd..(p + 1) * dd]
    }

    /// Entry `(i, j)` as a complex field.
    pub fn entry(&self, i: usize, j: usize) -> Vec<Complex64> {
        let d = self.dim();
        self.data.chunks(d * d).map(|b| b[i * d + j]).collect()
    }

    /// Diagonal entry `(i, i)` as a real field.
    pub fn diagonal_entry(&self, i: usize) -> ScalarField {
        let d = self.dim();
        let values = self.data.chunks(d * d).map(|b| b[i * d + i].re).collect();
        ScalarField::from_vec_unchecked(self.chart.clone(), values)
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.chart.check_same(&other.chart, "form operation")?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { chart: self.chart.clone(), data })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b * c)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { chart: self.chart.clone(), data: self.data.iter().map(|&a| a * c).collect() }
    }

    /// Pointwise multiplication by a scalar function.
    pub fn scale_by(&self, f: &ScalarField) -> Result<Self> {
        self.chart.check_same(f.chart(), "form times function")?;
        let dd = self.dim() * self.dim();
        let data = self
            .data
            .chunks(dd)
            .zip(f.values())
            .flat_map(|(b, &v)| b.iter().map(move |&a| a * v))
            .collect();
        Ok(Self { chart: self.chart.clone(), data })
    }

    /// Largest entrywise modulus.
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.norm()))
    }

    /// Flat mean of every entry, as a `d x d` matrix.
    pub fn mean_matrix(&self) -> Vec<Complex64> {
        let dd = self.dim() * self.dim();
        (0..dd)
            .map(|k| {
                let re: Vec<f64> = self.data.iter().skip(k).step_by(dd).map(|c| c.re).collect();
                let im: Vec<f64> = self.data.iter().skip(k).step_by(dd).map(|c| c.im).collect();
                Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) / self.chart.len() as f64
            })
            .collect()
    }

    /// Smallest eigenvalue at every grid point.
    pub fn min_eigenvalues(&self) -> ScalarField {
        let d = self.dim();
        let values = self.data.chunks(d * d).map(|b| linalg::min_eigenvalue(d, b)).collect();
        ScalarField::from_vec_unchecked(self.chart.clone(), values)
    }

    /// Smallest eigenvalue over the chart and where it is attained.
    pub fn min_eigenvalue(&self) -> (f64, usize) {
        let d = self.dim();
        let mut best = (f64::INFINITY, 0);
        for (p, b) in self.data.chunks(d * d).enumerate() {
            let e = linalg::min_eigenvalue(d, b);
            if e < best.0 || e.is_nan() {
                best = (e, p);
            }
        }
        best
    }

    /// Errors unless every eigenvalue is at least `floor`.
    pub fn check_positive(&self, floor: f64, what: &str) -> Result<()> {
        let (min_eig, index) = self.min_eigenvalue();
        if !(min_eig >= floor) {
            return Err(Error::Positivity { what: what.into(), index, min_eig });
        }
        Ok(())
    }

    /// Block-diagonal form on `self.chart x other.chart` from a form on each factor,
    /// each broadcast along the other factor.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let chart = self.chart.product(&other.chart);
        let (d1, d2) = (self.dim(), other.dim());
        let d = d1 + d2;
        let (n1, n2) = (self.chart.len(), other.chart.len());
        let mut data = vec![Complex64::new(0.0, 0.0); n1 * n2 * d * d];
        for p in 0..n1 {
            let a = self.at(p);
            for q in 0..n2 {
                let b = other.at(q);
                let blk = &mut data[(p * n2 + q) * d * d..(p * n2 + q + 1) * d * d];
                for i in 0..d1 {
                    for j in 0..d1 {
                        blk[i * d + j] = a[i * d1 + j];
                    }
                }
                for i in 0..d2 {
                    for j in 0..d2 {
                        blk[(d1 + i) * d + d1 + j] = b[i * d2 + j];
                    }
                }
            }
        }
        Self { chart, data }
    }

    /// Block of the factors `range`, still sampled on the full chart.
    pub fn block(&self, range: std::ops::Range<usize>) -> BlockField {
        let d = self.dim();
        let k = range.len();
        let mut data = Vec::with_capacity(self.chart.len() * k * k);
        for b in self.data.chunks(d * d) {
            for i in range.clone() {
                for j in range.clone() {
                    data.push(b[i * d + j]);
                }
            }
        }
        BlockField { dim: k, data }
    }

    /// Serializable view with interleaved real/imaginary coefficients.
    pub fn to_repr(&self) -> FormRepr {
        FormRepr {
            chart: self.chart.clone(),
            values: self.data.iter().flat_map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_repr(r: FormRepr) -> Result<Self> {
        let data = r.values.chunks(2).map(|c| Complex64::new(c[0], *c.get(1).unwrap_or(&f64::NAN))).collect();
        Self::new(r.chart, data)
    }
}

/// Sub-block of a form field: `dim x dim` matrices sampled on the parent chart.
#[derive(Clone, Debug)]
pub struct BlockField {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl BlockField {
    pub fn at(&self, p: usize) -> &[Complex64] {
        let dd = self.dim * self.dim;
        &self.data[p * dd..(p + 1) * dd]
    }

    /// Determinant at every point.
    pub fn det(&self) -> Vec<f64> {
        self.data.chunks(self.dim * self.dim).map(|b| linalg::det(self.dim, b)).collect()
    }
}

/// JSON layout of a form field.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FormRepr {
    pub chart: TorusChart,
    pub values: Vec<f64>,
}

impl Serialize for HermitianFormField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_repr().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianFormField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = FormRepr::deserialize(d)?;
        HermitianFormField::from_repr(r).map_err(serde::de::Error::custom)
    }
}
