//! Adaptive-bandwidth Gaussian kernel density estimates.

use statrs::function::erf::erfc;

use crate::error::PatternError;

/// Grid resolution shared by region extraction and CDF comparisons.
pub const GRID_POINTS: usize = 512;

/// Grid padding in multiples of the widest kernel bandwidth.
pub const GRID_PAD: f64 = 4.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Silverman's rule of thumb, with a tiny positive floor for constant samples.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);
    let floor = 1e-6 * mean.abs().max(1.0);
    if h.is_finite() && h > floor {
        h
    } else {
        floor
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Gaussian mixture with one kernel per sample and per-sample bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveKde {
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl AdaptiveKde {
    /// Pilot fixed-bandwidth estimate, then local factors
    /// `(pilot(x_k) / geometric_mean)^(-1/2)`.
    pub fn fit(samples: &[f64]) -> Result<Self, PatternError> {
        if samples.len() < 2 {
            return Err(PatternError::InsufficientSamples(samples.len()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(PatternError::Malformed("non-finite sample".into()));
        }
        let h = silverman_bandwidth(samples);
        let pilot = Self { centers: samples.to_vec(), widths: vec![h; samples.len()] };
        let dens: Vec<f64> = samples.iter().map(|&x| pilot.pdf(x)).collect();
        let log_g = dens.iter().map(|d| d.ln()).sum::<f64>() / dens.len() as f64;
        let widths = dens.iter().map(|&d| h * (-0.5 * (d.ln() - log_g)).exp()).collect();
        Ok(Self { centers: samples.to_vec(), widths })
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.widths
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let s: f64 = self
            .centers
            .iter()
            .zip(&self.widths)
            .map(|(&c, &w)| {
                let z = (x - c) / w;
                (-0.5 * z * z).exp() / w
            })
            .sum();
        s * INV_SQRT_2PI / self.centers.len() as f64
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let s: f64 = self
            .centers
            .iter()
            .zip(&self.widths)
            .map(|(&c, &w)| normal_cdf((x - c) / w))
            .sum();
        s / self.centers.len() as f64
    }

    /// Interval holding essentially all probability mass.
    pub fn support(&self) -> (f64, f64) {
        let pad = GRID_PAD * self.widths.iter().cloned().fold(0.0, f64::max);
        let lo = self.centers.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.centers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo - pad, hi + pad)
    }

    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        linspace(lo, hi, GRID_POINTS)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Grid spanning both supports.
pub fn common_grid(a: &AdaptiveKde, b: &AdaptiveKde) -> Vec<f64> {
    let (alo, ahi) = a.support();
    let (blo, bhi) = b.support();
    linspace(alo.min(blo), ahi.max(bhi), GRID_POINTS)
}

/// Sup-norm distance between the two CDFs on `grid`.
pub fn ks_distance(a: &AdaptiveKde, b: &AdaptiveKde, grid: &[f64]) -> f64 {
    grid.iter().map(|&x| (a.cdf(x) - b.cdf(x)).abs()).fold(0.0, f64::max)
}

/// Trapezoidal integral of `f` sampled on `grid`.
pub fn trapezoid(grid: &[f64], f: &[f64]) -> f64 {
    grid.windows(2)
        .zip(f.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn normal_draws(seed: u64, n: usize, mu: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mu, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn needs_two_samples() {
        assert_eq!(AdaptiveKde::fit(&[1.0]), Err(PatternError::InsufficientSamples(1)));
    }

    #[test]
    fn integrates_to_one_on_its_grid() {
        for (seed, n) in [(1, 2), (2, 10), (3, 1000)] {
            let k = AdaptiveKde::fit(&normal_draws(seed, n, 0.0)).unwrap();
            let g = k.grid();
            let f: Vec<f64> = g.iter().map(|&x| k.pdf(x)).collect();
            assert!((trapezoid(&g, &f) - 1.0).abs() < 1e-3);
        }
        let k = AdaptiveKde::fit(&[5.0; 20]).unwrap();
        let g = k.grid();
        let f: Vec<f64> = g.iter().map(|&x| k.pdf(x)).collect();
        assert!((trapezoid(&g, &f) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_samples_concentrate() {
        let k = AdaptiveKde::fit(&[2.5; 10]).unwrap();
        assert!(k.cdf(2.5 - 1e-3) < 1e-6);
        assert!(k.cdf(2.5 + 1e-3) > 1.0 - 1e-6);
        assert!((k.cdf(2.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normal_sample_matches_phi() {
        let k = AdaptiveKde::fit(&normal_draws(7, 1000, 0.0)).unwrap();
        let sup = linspace(-4.0, 4.0, 801)
            .into_iter()
            .map(|x| (k.cdf(x) - normal_cdf(x)).abs())
            .fold(0.0, f64::max);
        assert!(sup < 0.05, "{sup}");
    }

    #[test]
    fn separated_mixture_is_bimodal() {
        let mut s = normal_draws(3, 500, -10.0);
        s.extend(normal_draws(4, 500, 10.0));
        let k = AdaptiveKde::fit(&s).unwrap();
        let g = k.grid();
        let f: Vec<f64> = g.iter().map(|&x| k.pdf(x)).collect();
        let peaks = (1..f.len() - 1).filter(|&i| f[i] > f[i - 1] && f[i] >= f[i + 1] && f[i] > 0.01).count();
        assert_eq!(peaks, 2);
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let s = normal_draws(9, 100, 0.0);
        let a = AdaptiveKde::fit(&s).unwrap();
        let b = AdaptiveKde::fit(&s).unwrap();
        assert_eq!(ks_distance(&a, &b, &common_grid(&a, &b)), 0.0);
    }

    #[test]
    fn ks_of_shifted_samples_is_large() {
        let a = AdaptiveKde::fit(&normal_draws(1, 500, 0.0)).unwrap();
        let b = AdaptiveKde::fit(&normal_draws(2, 500, 3.0)).unwrap();
        // two unit normals three apart differ by 2*Phi(1.5)-1 in sup norm
        let d = ks_distance(&a, &b, &common_grid(&a, &b));
        assert!((d - (2.0 * normal_cdf(1.5) - 1.0)).abs() < 0.06, "{d}");
    }
}
