//! Small statistics toolkit: Wilson intervals, bootstrap ratio intervals,
//! Kolmogorov–Smirnov distance, least squares.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A proportion with its Wilson 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Proportion {
    pub hits: usize,
    pub n: usize,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn wilson(hits: usize, n: usize) -> Proportion {
    if n == 0 {
        return Proportion {
            hits,
            n,
            p: 0.0,
            lo: 0.0,
            hi: 1.0,
        };
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Proportion {
        hits,
        n,
        p,
        lo: (centre - half).max(0.0),
        hi: (centre + half).min(1.0),
    }
}

impl Proportion {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Percentile bootstrap interval for `Σ num / Σ den` over paired per-sample
/// values, `resamples` draws from a seeded stream.
pub fn bootstrap_ratio(num: &[f64], den: &[f64], resamples: usize, seed: u64) -> (f64, f64, f64) {
    assert_eq!(num.len(), den.len());
    let n = num.len();
    let sn: f64 = num.iter().sum();
    let sd: f64 = den.iter().sum();
    let point = if sd != 0.0 { sn / sd } else { f64::NAN };
    if n == 0 {
        return (point, f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<f64> = (0..resamples)
        .map(|_| {
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                a += num[i];
                b += den[i];
            }
            if b != 0.0 {
                a / b
            } else {
                f64::INFINITY
            }
        })
        .collect();
    draws.sort_by(|a, b| a.total_cmp(b));
    let q = |f: f64| draws[((f * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (point, q(0.025), q(0.975))
}

/// Bootstrap for a ratio of two counts out of `n` multinomial-style
/// samples: each sample lands in `num` (and then also `den`), `den` only,
/// or neither. Cheap `O(resamples · log)` version of [`bootstrap_ratio`].
pub fn bootstrap_count_ratio(
    num_hits: usize,
    den_hits: usize,
    n: usize,
    resamples: usize,
    seed: u64,
) -> (f64, f64, f64) {
    assert!(num_hits <= den_hits && den_hits <= n);
    let point = if den_hits > 0 {
        num_hits as f64 / den_hits as f64
    } else {
        f64::NAN
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pn = num_hits as f64 / n.max(1) as f64;
    let pd = den_hits as f64 / n.max(1) as f64;
    let mut draws: Vec<f64> = (0..resamples)
        .map(|_| {
            // multinomial via two binomials
            let a = sample_binomial(&mut rng, n, pn);
            let rest = if pn < 1.0 { (pd - pn) / (1.0 - pn) } else { 0.0 };
            let b = a + sample_binomial(&mut rng, n - a, rest.clamp(0.0, 1.0));
            if b > 0 {
                a as f64 / b as f64
            } else {
                f64::INFINITY
            }
        })
        .collect();
    draws.sort_by(|a, b| a.total_cmp(b));
    let q = |f: f64| draws[((f * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (point, q(0.025), q(0.975))
}

fn sample_binomial<R: Rng>(rng: &mut R, n: usize, p: f64) -> usize {
    use rand_distr::{Binomial, Distribution};
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n as u64, p).expect("valid").sample(rng) as usize
}

/// `sup |F_n − F|` for samples against a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// CDF of the χ² distribution with `k` degrees of freedom.
pub fn chi2_cdf(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    ChiSquared::new(k as f64).expect("k ≥ 1").cdf(x)
}

/// Least-squares line `y = slope x + intercept` with its `R²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LineFit { slope, intercept, r2 }
}

/// Mean and unbiased variance.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var)
}
