//! Small statistics helpers shared by the Monte Carlo drivers.

/// Mean of a sample with its standard error and a normal-approximation
/// 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub half_width: f64,
    pub n: usize,
}

pub const Z95: f64 = 1.959_963_984_540_054;

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                std_err: f64::NAN,
                half_width: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let std_err = (var / n as f64).sqrt();
        Estimate {
            mean,
            std_err,
            half_width: Z95 * std_err,
            n,
        }
    }

    /// Binomial proportion with the Wald standard error.
    pub fn proportion(successes: usize, n: usize) -> Self {
        let p = successes as f64 / n.max(1) as f64;
        let std_err = (p * (1.0 - p) / n.max(1) as f64).sqrt();
        Estimate {
            mean: p,
            std_err,
            half_width: Z95 * std_err,
            n,
        }
    }

    /// Number of standard errors separating `self` from `other`, using the
    /// standard error of the difference of independent estimates.
    pub fn separation(&self, other: &Estimate) -> f64 {
        let se = (self.std_err.powi(2) + other.std_err.powi(2)).sqrt();
        (self.mean - other.mean) / se
    }
}

/// Seed for replica `index` derived from a base seed (SplitMix64 finalizer).
pub fn replica_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
