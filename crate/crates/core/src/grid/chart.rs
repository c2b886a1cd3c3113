use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Product of flat complex tori `C / (Z + tau_j Z)` sampled on unit-square grids.
///
/// Factor `j` carries the coordinate `z_j = x_j + tau_j y_j` with `(x_j, y_j)` in `[0,1)^2`
/// sampled on an `N_j x N_j` grid. Real axes are ordered `(x_1, y_1, x_2, y_2, ...)` and
/// grid points are stored row-major, last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChartRepr", into = "ChartRepr")]
pub struct TorusChart {
    resolutions: Vec<usize>,
    moduli: Vec<Complex64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ChartRepr {
    dims: usize,
    resolutions: Vec<usize>,
    moduli: Vec<[f64; 2]>,
}

impl TryFrom<ChartRepr> for TorusChart {
    type Error = Error;
    fn try_from(r: ChartRepr) -> Result<Self> {
        if r.dims != r.resolutions.len() || r.dims != r.moduli.len() {
            return Err(Error::InvalidChart(format!(
                "dims = {} but {} resolutions and {} moduli given",
                r.dims,
                r.resolutions.len(),
                r.moduli.len()
            )));
        }
        TorusChart::new(
            r.resolutions,
            r.moduli.iter().map(|m| Complex64::new(m[0], m[1])).collect(),
        )
    }
}

impl From<TorusChart> for ChartRepr {
    fn from(c: TorusChart) -> Self {
        ChartRepr {
            dims: c.dim(),
            moduli: c.moduli.iter().map(|m| [m.re, m.im]).collect(),
            resolutions: c.resolutions,
        }
    }
}

impl TorusChart {
    pub fn new(resolutions: Vec<usize>, moduli: Vec<Complex64>) -> Result<Self> {
        if resolutions.is_empty() {
            return Err(Error::InvalidChart("complex dimension must be positive".into()));
        }
        if resolutions.len() != moduli.len() {
            return Err(Error::InvalidChart("one modulus per factor required".into()));
        }
        for (j, &n) in resolutions.iter().enumerate() {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidChart(format!(
                    "factor {j}: resolution {n} must be even and at least 4"
                )));
            }
        }
        for (j, t) in moduli.iter().enumerate() {
            if !(t.im > 0.0) || !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::InvalidChart(format!(
                    "factor {j}: modulus {t} must have positive imaginary part"
                )));
            }
        }
        Ok(Self { resolutions, moduli })
    }

    /// `d` factors of resolution `n` with square moduli `tau = i`.
    pub fn square(d: usize, n: usize) -> Result<Self> {
        Self::new(vec![n; d], vec![Complex64::i(); d])
    }

    pub fn dim(&self) -> usize {
        self.resolutions.len()
    }

    pub fn resolutions(&self) -> &[usize] {
        &self.resolutions
    }

    pub fn moduli(&self) -> &[Complex64] {
        &self.moduli
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.resolutions.iter().map(|n| n * n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sizes of the real axes.
    pub fn shape(&self) -> Vec<usize> {
        self.resolutions.iter().flat_map(|&n| [n, n]).collect()
    }

    /// Flat volume of one grid cell, `prod Im(tau_j) / N_j^2`.
    pub fn cell_volume(&self) -> f64 {
        self.resolutions
            .iter()
            .zip(&self.moduli)
            .map(|(&n, t)| t.im / (n * n) as f64)
            .product()
    }

    /// Flat volume of the whole chart.
    pub fn volume(&self) -> f64 {
        self.moduli.iter().map(|t| t.im).product()
    }

    /// Unit-square coordinates `(x_1, y_1, ...)` of a grid index.
    pub fn coords(&self, mut index: usize) -> Vec<f64> {
        let shape = self.shape();
        let mut out = vec![0.0; shape.len()];
        for a in (0..shape.len()).rev() {
            out[a] = (index % shape[a]) as f64 / shape[a] as f64;
            index /= shape[a];
        }
        out
    }

    /// Product chart with the factors of `self` first.
    pub fn product(&self, other: &TorusChart) -> TorusChart {
        let mut resolutions = self.resolutions.clone();
        resolutions.extend_from_slice(&other.resolutions);
        let mut moduli = self.moduli.clone();
        moduli.extend_from_slice(&other.moduli);
        TorusChart { resolutions, moduli }
    }

    /// Chart made of the factors `range`.
    pub fn factors(&self, range: std::ops::Range<usize>) -> TorusChart {
        TorusChart {
            resolutions: self.resolutions[range.clone()].to_vec(),
            moduli: self.moduli[range].to_vec(),
        }
    }

    pub(crate) fn check_same(&self, other: &TorusChart, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::ChartMismatch(format!("{what}: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}
