use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::chart::TorusChart;
use super::field::{HermitianFormField, ScalarField};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// FFT plans and derivative symbols for one chart.
pub(crate) struct Spectral {
    shape: Vec<usize>,
    len: usize,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    /// Symbol of `d/dz_j` with the Nyquist modes zeroed.
    s: Vec<Vec<Complex64>>,
    /// Symbol of `d^2/dz_j dzbar_j` using full second derivatives.
    lap: Vec<Vec<f64>>,
}

type Key = (Vec<usize>, Vec<(u64, u64)>);

fn cache() -> &'static Mutex<HashMap<Key, Arc<Spectral>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Spectral>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Signed wavenumber of index `m` on an axis of size `n`; `(full, first_derivative)`.
fn wavenumber(m: usize, n: usize) -> (f64, f64) {
    if m < n / 2 {
        (m as f64, m as f64)
    } else if m == n / 2 {
        (m as f64, 0.0)
    } else {
        (m as f64 - n as f64, m as f64 - n as f64)
    }
}

impl Spectral {
    pub(crate) fn get(chart: &TorusChart) -> Arc<Spectral> {
        let key: Key = (
            chart.resolutions().to_vec(),
            chart.moduli().iter().map(|t| (t.re.to_bits(), t.im.to_bits())).collect(),
        );
        let mut map = cache().lock().unwrap_or_else(|e| e.into_inner());
        map.entry(key).or_insert_with(|| Arc::new(Spectral::build(chart))).clone()
    }

    fn build(chart: &TorusChart) -> Spectral {
        let shape = chart.shape();
        let len = chart.len();
        let mut planner = FftPlanner::new();
        let fwd = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let d = chart.dim();
        let mut s = vec![vec![ZERO; len]; d];
        let mut lap = vec![vec![0.0; len]; d];
        let mut idx = vec![0usize; shape.len()];
        for p in 0..len {
            let mut rem = p;
            for a in (0..shape.len()).rev() {
                idx[a] = rem % shape[a];
                rem /= shape[a];
            }
            for j in 0..d {
                let n = shape[2 * j];
                let tau = chart.moduli()[j];
                let (kx, kx1) = wavenumber(idx[2 * j], n);
                let (ky, ky1) = wavenumber(idx[2 * j + 1], n);
                let b = tau.im;
                s[j][p] = Complex64::new(ky1 - tau.re * kx1, tau.im * kx1) * (PI / b);
                lap[j][p] = -PI * PI * (tau.norm_sqr() * kx * kx - 2.0 * tau.re * kx1 * ky1 + ky * ky) / (b * b);
            }
        }
        Spectral { shape, len, fwd, inv, s, lap }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn dim(&self) -> usize {
        self.s.len()
    }

    /// Symbol of `d/dz_j`.
    pub(crate) fn dz_symbol(&self, j: usize) -> &[Complex64] {
        &self.s[j]
    }

    /// Symbol of the `(i, j)` entry of `ddbar`.
    #[inline]
    pub(crate) fn ddbar_symbol(&self, i: usize, j: usize, p: usize) -> Complex64 {
        if i == j {
            Complex64::new(self.lap[i][p], 0.0)
        } else {
            -self.s[i][p] * self.s[j][p].conj()
        }
    }

    fn transform(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let mut stride = 1;
        let mut scratch = Vec::new();
        let mut line = Vec::new();
        for a in (0..self.shape.len()).rev() {
            let n = self.shape[a];
            let plan = &plans[a];
            let need = plan.get_inplace_scratch_len();
            if scratch.len() < need {
                scratch.resize(need, ZERO);
            }
            if stride == 1 {
                plan.process_with_scratch(buf, &mut scratch[..need]);
            } else {
                // Transpose each block so the lines become contiguous, batch-transform, undo.
                let block = n * stride;
                line.resize(block, ZERO);
                for chunk in buf.chunks_mut(block) {
                    for m in 0..n {
                        for r in 0..stride {
                            line[r * n + m] = chunk[m * stride + r];
                        }
                    }
                    plan.process_with_scratch(&mut line, &mut scratch[..need]);
                    for m in 0..n {
                        for r in 0..stride {
                            chunk[m * stride + r] = line[r * n + m];
                        }
                    }
                }
            }
            stride *= n;
        }
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, &self.fwd);
        buf
    }

    /// Inverse transform including the `1/len` normalization.
    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.transform(buf, &self.inv);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// Real part of the inverse transform of `hat * symbol`.
    pub(crate) fn apply_real(&self, hat: &[Complex64], symbol: impl Fn(usize) -> Complex64) -> Vec<f64> {
        let mut buf: Vec<Complex64> = hat.iter().enumerate().map(|(p, &h)| h * symbol(p)).collect();
        self.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    pub(crate) fn apply_complex(&self, hat: &[Complex64], symbol: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = hat.iter().enumerate().map(|(p, &h)| h * symbol(p)).collect();
        self.inverse(&mut buf);
        buf
    }
}

fn check_input(phi: &ScalarField) -> Result<()> {
    phi.check_finite()?;
    if phi.chart().resolutions().iter().any(|&n| n < 4) {
        return Err(Error::InvalidChart("resolution below 4".into()));
    }
    Ok(())
}

/// Coefficients of `sqrt(-1) d dbar phi`, entry `(i, j)` being `d^2 phi / dz_i dzbar_j`.
pub fn ddbar(phi: &ScalarField) -> Result<HermitianFormField> {
    check_input(phi)?;
    let chart = phi.chart();
    let sp = Spectral::get(chart);
    let d = chart.dim();
    let hat = sp.forward(phi.values());
    let mut data = vec![ZERO; chart.len() * d * d];
    for i in 0..d {
        let diag = sp.apply_real(&hat, |p| sp.ddbar_symbol(i, i, p));
        for (p, v) in diag.into_iter().enumerate() {
            data[p * d * d + i * d + i] = Complex64::new(v, 0.0);
        }
        for j in i + 1..d {
            let off = sp.apply_complex(&hat, |p| sp.ddbar_symbol(i, j, p));
            for (p, v) in off.into_iter().enumerate() {
                data[p * d * d + i * d + j] = v;
                data[p * d * d + j * d + i] = v.conj();
            }
        }
    }
    Ok(HermitianFormField::from_vec_unchecked(chart.clone(), data))
}

/// `d phi / dz_j` as a complex field.
pub fn dz(phi: &ScalarField, j: usize) -> Result<Vec<Complex64>> {
    check_input(phi)?;
    let sp = Spectral::get(phi.chart());
    let hat = sp.forward(phi.values());
    let s = sp.dz_symbol(j);
    Ok(sp.apply_complex(&hat, |p| s[p]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn band_limited(chart: &TorusChart, seed: u64, modes: i32) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let axes = chart.shape().len();
        let mut terms = Vec::new();
        for _ in 0..6 {
            let k: Vec<f64> = (0..axes).map(|_| rng.gen_range(-modes..=modes) as f64).collect();
            terms.push((k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.28)));
        }
        ScalarField::from_fn(chart, |x| {
            terms
                .iter()
                .map(|(k, a, ph)| a * (2.0 * PI * k.iter().zip(x).map(|(k, x)| k * x).sum::<f64>() + ph).cos())
                .sum()
        })
    }

    #[test]
    fn zero_in_zero_out() {
        let c = TorusChart::square(2, 8).unwrap();
        let f = ddbar(&ScalarField::zeros(&c)).unwrap();
        assert_eq!(f.sup_norm(), 0.0);
    }

    #[test]
    fn cosine_against_finite_differences() {
        // Oracle: second-order central differences of cos(2 pi x) on a 512-point line, where
        // d^2/dz dzbar = (d_xx + d_yy)/4 for tau = i.
        let m = 512;
        let h = 1.0 / m as f64;
        let f = |x: f64| (2.0 * PI * x).cos();
        let c = TorusChart::square(1, 16).unwrap();
        let phi = ScalarField::from_fn(&c, |x| f(x[0]));
        let form = ddbar(&phi).unwrap();
        for p in 0..c.len() {
            let x = c.coords(p)[0];
            let fd = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h) / 4.0;
            let got = form.at(p)[0];
            assert!(got.im == 0.0);
            assert!((got.re - fd).abs() < 2e-4 * PI * PI, "{} vs {}", got.re, fd);
            assert!((got.re + PI * PI * f(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn random_fields_hermitian_and_mean_free() {
        let moduli = vec![Complex64::new(0.3, 1.1), Complex64::new(-0.2, 0.8)];
        let c = TorusChart::new(vec![8, 6], moduli).unwrap();
        let phi = band_limited(&c, 7, 2);
        let form = ddbar(&phi).unwrap();
        for p in 0..c.len() {
            let b = form.at(p);
            for i in 0..2 {
                assert_eq!(b[i * 2 + i].im, 0.0);
                for j in 0..2 {
                    assert_eq!(b[i * 2 + j], b[j * 2 + i].conj());
                }
            }
        }
        let mean = form.mean_matrix();
        for i in 0..2 {
            assert!(mean[i * 2 + i].norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_derivative_exact_on_band_limited_data() {
        // phi = sin(2 pi (x + 2y)) on tau = a + ib; dz = (-conj(tau) d_x + d_y) / (2 i b).
        let tau = Complex64::new(0.4, 1.3);
        let c = TorusChart::new(vec![8], vec![tau]).unwrap();
        let phi = ScalarField::from_fn(&c, |x| (2.0 * PI * (x[0] + 2.0 * x[1])).sin());
        let got = dz(&phi, 0).unwrap();
        let form = ddbar(&phi).unwrap();
        let i = Complex64::i();
        for p in 0..c.len() {
            let x = c.coords(p);
            let arg = 2.0 * PI * (x[0] + 2.0 * x[1]);
            let (phx, phy) = (2.0 * PI * arg.cos(), 4.0 * PI * arg.cos());
            let want = (-tau.conj() * phx + phy) / (2.0 * i * tau.im);
            assert!((got[p] - want).norm() < 1e-12);
            // d dbar = (|tau|^2 d_xx - 2a d_xy + d_yy) / (4 b^2)
            let (pxx, pxy, pyy) = (-4.0 * PI * PI * arg.sin(), -8.0 * PI * PI * arg.sin(), -16.0 * PI * PI * arg.sin());
            let lap = (tau.norm_sqr() * pxx - 2.0 * tau.re * pxy + pyy) / (4.0 * tau.im * tau.im);
            assert!((form.at(p)[0].re - lap).abs() < 1e-10);
        }
    }

    #[test]
    fn ddbar_integrates_to_zero_against_closed_forms() {
        let c = TorusChart::square(2, 8).unwrap();
        let phi = band_limited(&c, 3, 3);
        let form = ddbar(&phi).unwrap();
        let vals: Vec<f64> = (0..c.len()).map(|p| form.at(p)[0].re + 2.0 * form.at(p)[3].re).collect();
        assert!(crate::grid::pairwise_sum(&vals).abs() * c.cell_volume() < 1e-10);
    }
}
