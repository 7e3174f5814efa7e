use std::sync::Arc;

use super::stats::{run_samples, GaussianStream, McConfig};
use crate::algebra::{AlgebraContext, TensorElement};
use crate::error::{CubatureError, Result};
use crate::signature::SignatureAccumulator;

/// Coefficient-wise mean and standard error of a random tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorEstimate {
    pub mean: TensorElement,
    pub stderr: TensorElement,
    pub n: usize,
}

/// Monte Carlo mean of the truncated signature of `(s, B_s)` on `[0, t]`,
/// with Brownian motion interpolated linearly between `n_steps` grid points.
pub fn signature_expectation_mc(ctx: &Arc<AlgebraContext>, t: f64, cfg: &McConfig) -> Result<TensorEstimate> {
    cfg.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(CubatureError::Domain(format!("horizon must be positive, got {t}")));
    }
    let d = ctx.d();
    let dt = t / cfg.n_steps as f64;
    let sq = dt.sqrt();
    let g = GaussianStream::new(cfg.seed);
    let anti = cfg.antithetic;

    let one_path = |path: u64, sign: f64| {
        let mut acc = SignatureAccumulator::new(ctx);
        let mut inc = vec![0.0; d + 1];
        inc[0] = dt;
        for step in 0..cfg.n_steps {
            for i in 0..d {
                inc[i + 1] = sign * sq * g.normal(path, step as u64, i as u64);
            }
            acc.push(&inc);
        }
        acc
    };
    let est = run_samples(cfg.samples(), ctx.dim(), |i, out| {
        out.copy_from_slice(one_path(i as u64, 1.0).as_slice());
        if anti {
            let other = one_path(i as u64, -1.0);
            out.iter_mut()
                .zip(other.as_slice())
                .for_each(|(a, b)| *a = 0.5 * (*a + b));
        }
        Ok(())
    })?;
    let mean = TensorElement::from_dense(ctx, est.iter().map(|e| e.mean).collect())?;
    let stderr = TensorElement::from_dense(ctx, est.iter().map(|e| e.stderr).collect())?;
    Ok(TensorEstimate {
        mean,
        stderr,
        n: cfg.samples(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{heat_element, Word};

    #[test]
    fn matches_heat_element() {
        let ctx = AlgebraContext::new(2, 3).unwrap();
        let t = 0.5;
        let cfg = McConfig::new(100_000, 8, 21);
        let est = signature_expectation_mc(&ctx, t, &cfg).unwrap();
        let heat = heat_element(&ctx, t).unwrap();
        assert_eq!(est.mean.coeff(&Word::new(&[0], 2).unwrap()), t);
        for (k, w) in ctx.basis().iter().enumerate() {
            let (m, s, h) = (est.mean.as_slice()[k], est.stderr.as_slice()[k], heat.as_slice()[k]);
            if s == 0.0 {
                assert!((m - h).abs() < 1e-12, "{w:?}: {m} vs {h}");
            } else {
                assert!(((m - h) / s).abs() < 4.0, "{w:?}: {m} ± {s} vs {h}");
            }
        }
        let c11 = est.mean.coeff(&Word::new(&[1, 1], 2).unwrap());
        let s11 = est.stderr.coeff(&Word::new(&[1, 1], 2).unwrap());
        assert!((c11 - t / 2.0).abs() < 3.0 * s11);
    }
}
