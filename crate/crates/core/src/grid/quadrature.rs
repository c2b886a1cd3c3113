use super::field::VolumeDensity;

const BLOCK: usize = 64;

/// Pairwise summation with a fixed split order, independent of thread count.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= BLOCK {
        let mut s = 0.0;
        for v in x {
            s += v;
        }
        return s;
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Euclidean inner product with pairwise summation.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() <= BLOCK {
        let mut s = 0.0;
        for (x, y) in a.iter().zip(b) {
            s += x * y;
        }
        return s;
    }
    let mid = a.len() / 2;
    dot(&a[..mid], &b[..mid]) + dot(&a[mid..], &b[mid..])
}

/// Integral of a density over its chart: the periodic trapezoidal rule.
pub fn integrate(v: &VolumeDensity) -> f64 {
    pairwise_sum(v.values()) * v.chart().cell_volume()
}

/// Integral of `f * v` without materializing the product.
pub fn integrate_weighted(f: &[f64], v: &VolumeDensity) -> f64 {
    dot(f, v.values()) * v.chart().cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusChart;
    use std::f64::consts::PI;

    #[test]
    fn unit_density() {
        let c = TorusChart::square(1, 16).unwrap();
        assert_eq!(integrate(&VolumeDensity::constant(&c, 1.0)), 1.0);
    }

    #[test]
    fn oscillation_has_zero_mean() {
        let c = TorusChart::square(1, 32).unwrap();
        let v = VolumeDensity::from_fn(&c, |x| 1.0 + (2.0 * PI * x[0]).cos());
        assert!((integrate(&v) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bessel_values() {
        // Oracle: composite Simpson on a fine 1D grid, checked against I_0(1) and I_0(2).
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let m = 20000;
            let h = 1.0 / m as f64;
            let mut s = f(0.0) + f(1.0);
            for k in 1..m {
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
            }
            s * h / 3.0
        };
        let c = TorusChart::square(1, 32).unwrap();
        for (a, reference) in [(1.0, 1.2660658777), (2.0, 2.2795853023)] {
            let f = |x: f64| (a * (2.0 * PI * x).cos()).exp();
            let oracle = simpson(&f);
            assert!((oracle - reference).abs() < 1e-9);
            let v = VolumeDensity::from_fn(&c, |x| f(x[0]));
            assert!((integrate(&v) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn pairwise_is_order_fixed() {
        let x: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 1e-3 + 1.0).collect();
        assert_eq!(pairwise_sum(&x).to_bits(), pairwise_sum(&x.clone()).to_bits());
        assert!((pairwise_sum(&x) - x.iter().sum::<f64>()).abs() < 1e-10);
    }
}
