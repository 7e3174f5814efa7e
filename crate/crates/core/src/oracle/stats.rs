use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CubatureError, Result};

/// Samples per block; blocks are reduced in index order.
const BLOCK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        McConfig {
            n_paths,
            n_steps,
            seed,
            antithetic: false,
        }
    }

    pub fn antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(CubatureError::Config(
                "n_paths and n_steps must be >= 1".into(),
            ));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(CubatureError::Config(
                "antithetic sampling needs an even number of paths".into(),
            ));
        }
        Ok(())
    }

    /// Independent samples: paths, or antithetic pairs.
    pub(crate) fn samples(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

/// Counter-based standard normal draws keyed by `(seed, path, step, dim)`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianStream {
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream { seed }
    }

    /// Uniform in the open interval (0, 1).
    pub fn uniform(&self, path: u64, step: u64, dim: u64) -> f64 {
        let mut h = splitmix64(self.seed ^ 0x5DEE_CE66_D1CE_4E5B);
        h = splitmix64(h ^ path);
        h = splitmix64(h ^ step.wrapping_mul(0x100_0000_01B3));
        h = splitmix64(h ^ dim);
        ((h >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&self, path: u64, step: u64, dim: u64) -> f64 {
        Normal::standard().inverse_cdf(self.uniform(path, step, dim))
    }
}

/// Welford accumulator, mergeable by Chan's formula.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Running {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Running) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    fn estimate(&self) -> McEstimate {
        let var = if self.n > 1.0 {
            self.m2 / (self.n - 1.0)
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            stderr: (var / self.n).sqrt(),
            n: self.n as usize,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Independent samples behind the estimate.
    pub n: usize,
}

impl McEstimate {
    /// `(mean − reference) / stderr`; zero when both vanish.
    pub fn z(&self, reference: f64) -> f64 {
        let d = self.mean - reference;
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Runs `sample(index, out)` for every sample in parallel blocks and reduces
/// each output coordinate in a fixed order, so results do not depend on the
/// thread count.
pub(crate) fn run_samples<F>(n: usize, dim: usize, sample: F) -> Result<Vec<McEstimate>>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let partial: Vec<Vec<Running>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![Running::default(); dim];
            let mut out = vec![0.0; dim];
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                sample(i, &mut out)?;
                for (a, &x) in acc.iter_mut().zip(&out) {
                    a.push(x);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![Running::default(); dim];
    for p in &partial {
        for (t, r) in total.iter_mut().zip(p) {
            t.merge(r);
        }
    }
    Ok(total.iter().map(Running::estimate).collect())
}
