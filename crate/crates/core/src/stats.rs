use serde::{Deserialize, Serialize};

/// A Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_runs: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
            n_runs: 1,
        }
    }

    /// Sample mean and standard error of the mean.
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        let mut acc = Moments::default();
        for x in samples {
            acc.push(x);
        }
        acc.estimate()
    }

    /// Combined standard error of the difference with another independent estimate.
    pub fn combined_se(&self, other: &Estimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    /// Whether `other` lies within `k` combined standard errors.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.combined_se(other)
    }
}

/// Running count, sum and sum of squares. Merges are exact for integer inputs
/// below 2^53, and deterministic when merged in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n < 2 {
            0.0
        } else {
            (self.sample_variance() / self.n as f64).sqrt()
        };
        Estimate {
            value: self.mean(),
            std_error: se,
            n_runs: self.n,
        }
    }
}

/// How the standard error of a ratio estimator is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioStdError {
    /// First-order delta method on the per-run (numerator, denominator) pairs.
    #[default]
    DeltaMethod,
    /// Spread of the ratio over this many contiguous batches of runs.
    BatchMeans(usize),
}

/// `Σ num / Σ den` over paired per-run observations, with a standard error.
pub fn ratio_estimate(pairs: &[(f64, f64)], mode: RatioStdError) -> Estimate {
    let n = pairs.len();
    assert!(n > 0, "ratio estimate needs at least one run");
    let (sn, sd) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let ratio = sn / sd;
    let std_error = match mode {
        _ if n < 2 => 0.0,
        RatioStdError::DeltaMethod => {
            let mean_den = sd / n as f64;
            let resid = pairs.iter().map(|&(x, y)| x - ratio * y);
            let var = Estimate::from_samples(resid);
            var.std_error / mean_den
        }
        RatioStdError::BatchMeans(batches) => {
            let b = batches.clamp(2, n);
            let ratios = (0..b).map(|i| {
                let chunk = &pairs[i * n / b..(i + 1) * n / b];
                let (x, y) = chunk
                    .iter()
                    .fold((0.0, 0.0), |(a, c), &(x, y)| (a + x, c + y));
                x / y
            });
            Estimate::from_samples(ratios).std_error
        }
    };
    Estimate {
        value: ratio,
        std_error,
        n_runs: n as u64,
    }
}
