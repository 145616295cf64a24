//! Statistical helpers shared by the acceptance battery.

use safezone_core::averaging::{quad_finite, QuadConfig};
use safezone_core::channel::GammaGamma;

/// Kolmogorov–Smirnov statistic of an ascending sample against `cdf`.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Tabulated CDF, interpolated linearly between nodes.
pub struct CdfTable {
    x: Vec<f64>,
    f: Vec<f64>,
}

impl CdfTable {
    /// Gamma-Gamma CDF from piecewise quadrature on a grid that is dense
    /// near the origin.
    pub fn gamma_gamma(gg: &GammaGamma) -> Self {
        let cfg = QuadConfig::new(1e-10, 1e-14, 200).unwrap();
        let k = 20_000;
        let x: Vec<f64> = (0..=k)
            .map(|j| 25.0 * (j as f64 / k as f64).powi(2))
            .collect();
        let mut f = vec![0.0];
        for w in x.windows(2) {
            let piece = quad_finite(|h| gg.pdf(h).unwrap(), w[0], w[1], &cfg).unwrap();
            f.push(f.last().unwrap() + piece.value);
        }
        Self { x, f }
    }

    pub fn eval(&self, h: f64) -> f64 {
        let (x, f) = (&self.x, &self.f);
        let j = x.partition_point(|&v| v <= h);
        if j == 0 {
            return f[0];
        }
        if j == x.len() {
            return *f.last().unwrap();
        }
        let t = (h - x[j - 1]) / (x[j] - x[j - 1]);
        f[j - 1] + t * (f[j] - f[j - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_uniform_grid_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_distance(&xs, |x| x) - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn gamma_gamma_table_is_a_cdf() {
        let gg = GammaGamma::new(Default::default()).unwrap();
        let t = CdfTable::gamma_gamma(&gg);
        assert_eq!(t.eval(0.0), 0.0);
        assert!((t.eval(1e9) - 1.0).abs() < 1e-6);
        assert!(t.eval(0.5) < t.eval(1.0) && t.eval(1.0) < t.eval(2.0));
    }
}
