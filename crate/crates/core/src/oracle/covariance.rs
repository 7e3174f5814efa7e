use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::Serialize;

use super::stats::{run_samples, GaussianStream, McConfig, McEstimate};
use crate::error::{CubatureError, Result};

/// Basis order of [`CovarianceSample::c`]: `e_1, e_2, [e_1,e_2], e_0`.
pub const COVARIANCE_BASIS: [&str; 4] = ["e1", "e2", "[e1,e2]", "e0"];

/// Degrees of the basis elements under the dilation.
const DEGREES: [i32; 4] = [1, 1, 2, 2];

/// One path's covariance matrix `C^t` for two Brownian motions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CovarianceSample {
    pub c: [[f64; 4]; 4],
    /// Quadrature step of the simulation grid.
    pub step: f64,
    /// `∫ B^1 ds`, `∫ B^2 ds` and `∫ (B^1)² + (B^2)² ds`, left-point rule.
    pub int_b1: f64,
    pub int_b2: f64,
    pub int_sq: f64,
    /// Whether either path is nonzero at some left grid point.
    pub nonzero: bool,
}

impl CovarianceSample {
    /// Simulates path `index` of `cfg` on `[0, t]`.
    pub fn simulate(t: f64, cfg: &McConfig, index: u64) -> Self {
        let dt = t / cfg.n_steps as f64;
        let sq = dt.sqrt();
        let g = GaussianStream::new(cfg.seed);
        let (mut b1, mut b2) = (0.0, 0.0);
        let (mut i1, mut i2, mut q) = (0.0, 0.0, 0.0);
        let mut nonzero = false;
        for step in 0..cfg.n_steps {
            i1 += b1 * dt;
            i2 += b2 * dt;
            q += (b1 * b1 + b2 * b2) * dt;
            nonzero |= b1 != 0.0 || b2 != 0.0;
            b1 += sq * g.normal(index, step as u64, 0);
            b2 += sq * g.normal(index, step as u64, 1);
        }
        Self::from_integrals(t, dt, i1, i2, q, nonzero)
    }

    pub fn from_integrals(t: f64, step: f64, i1: f64, i2: f64, q: f64, nonzero: bool) -> Self {
        let c = [
            [t, 0.0, i2, 0.0],
            [0.0, t, -i1, 0.0],
            [i2, -i1, q, 0.0],
            [0.0; 4],
        ];
        CovarianceSample {
            c,
            step,
            int_b1: i1,
            int_b2: i2,
            int_sq: q,
            nonzero,
        }
    }

    /// Determinant of the block over `e_1, e_2, [e_1,e_2]`, by LU.
    pub fn restricted_det(&self) -> f64 {
        Matrix3::from_fn(|r, c| self.c[r][c]).determinant()
    }

    /// `t² Q − t I_1² − t I_2²` from the same quadratures.
    pub fn det_identity(&self) -> f64 {
        let t = self.c[0][0];
        t * t * self.int_sq - t * self.int_b1 * self.int_b1 - t * self.int_b2 * self.int_b2
    }

    /// Relative mismatch between [`Self::restricted_det`] and [`Self::det_identity`].
    pub fn det_violation(&self) -> f64 {
        let t = self.c[0][0];
        let scale = t * t * self.int_sq + t * self.int_b1 * self.int_b1 + t * self.int_b2 * self.int_b2;
        let diff = (self.restricted_det() - self.det_identity()).abs();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..4).all(|r| (0..4).all(|c| self.c[r][c] == self.c[c][r]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingCheck {
    pub row: usize,
    pub col: usize,
    pub mean_t: McEstimate,
    /// `t^{(deg_a + deg_b)/2}` times the mean of `C^1`.
    pub scaled_unit: McEstimate,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub t: f64,
    pub n_paths: usize,
    pub max_det_violation: f64,
    /// Paths with a nonzero Brownian sample whose restricted determinant is not positive.
    pub positivity_failures: usize,
    pub asymmetric_paths: usize,
    pub e0_max_abs: f64,
    pub scaling: Vec<ScalingCheck>,
    pub max_scaling_z: f64,
}

impl CovarianceReport {
    /// Determinant identity to `tol` relative, positivity, symmetry, zero
    /// `e_0` row and scaling within `z_max` standard errors.
    pub fn passes(&self, tol: f64, z_max: f64) -> bool {
        self.max_det_violation <= tol
            && self.positivity_failures == 0
            && self.asymmetric_paths == 0
            && self.e0_max_abs == 0.0
            && self.max_scaling_z <= z_max
    }
}

fn entry_means(t: f64, cfg: &McConfig) -> Result<Vec<McEstimate>> {
    run_samples(cfg.n_paths, 16, |i, out| {
        let s = CovarianceSample::simulate(t, cfg, i as u64);
        for r in 0..4 {
            out[4 * r..4 * r + 4].copy_from_slice(&s.c[r]);
        }
        Ok(())
    })
}

/// Per-path and statistical checks on `C^t`. The unit-time comparison uses
/// `seed + 1` with the same number of steps.
pub fn covariance_diagnostics(t: f64, cfg: &McConfig) -> Result<CovarianceReport> {
    cfg.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(CubatureError::Domain(format!("horizon must be positive, got {t}")));
    }
    let per_path: Vec<(f64, bool, bool, f64)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let s = CovarianceSample::simulate(t, cfg, i);
            let bad = s.nonzero && s.restricted_det() <= 0.0;
            let e0 = (0..4).map(|k| s.c[3][k].abs().max(s.c[k][3].abs())).fold(0.0, f64::max);
            (s.det_violation(), bad, !s.is_symmetric(), e0)
        })
        .collect();
    let max_det_violation = per_path.iter().map(|p| p.0).fold(0.0, f64::max);
    let positivity_failures = per_path.iter().filter(|p| p.1).count();
    let asymmetric_paths = per_path.iter().filter(|p| p.2).count();
    let e0_max_abs = per_path.iter().map(|p| p.3).fold(0.0, f64::max);

    let at_t = entry_means(t, cfg)?;
    let unit_cfg = McConfig {
        seed: cfg.seed.wrapping_add(1),
        ..*cfg
    };
    let at_one = entry_means(1.0, &unit_cfg)?;
    let mut scaling = Vec::new();
    let mut max_scaling_z: f64 = 0.0;
    for (r, &dr) in DEGREES.iter().enumerate() {
        for (c, &dc) in DEGREES.iter().enumerate().skip(r) {
            let k = 4 * r + c;
            let f = t.powf(f64::from(dr + dc) / 2.0);
            let scaled = McEstimate {
                mean: f * at_one[k].mean,
                stderr: f * at_one[k].stderr,
                n: at_one[k].n,
            };
            let se = (at_t[k].stderr.powi(2) + scaled.stderr.powi(2)).sqrt();
            let diff = at_t[k].mean - scaled.mean;
            let z = if se == 0.0 {
                // Deterministic entries: equal up to rounding of t·1 vs t.
                if diff.abs() <= 1e-12 * at_t[k].mean.abs().max(1.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                diff / se
            };
            max_scaling_z = max_scaling_z.max(z.abs());
            scaling.push(ScalingCheck {
                row: r,
                col: c,
                mean_t: at_t[k],
                scaled_unit: scaled,
                z,
            });
        }
    }
    Ok(CovarianceReport {
        t,
        n_paths: cfg.n_paths,
        max_det_violation,
        positivity_failures,
        asymmetric_paths,
        e0_max_abs,
        scaling,
        max_scaling_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_structure_per_path() {
        let cfg = McConfig::new(200, 64, 5);
        for i in 0..200 {
            let s = CovarianceSample::simulate(0.3, &cfg, i);
            assert!(s.det_violation() < 1e-10);
            assert!(s.is_symmetric());
            assert!(s.c[3].iter().all(|&x| x == 0.0));
            assert!(s.restricted_det() > 0.0);
            assert_eq!(s.c[0][0], 0.3);
        }
    }

    #[test]
    fn single_step_path_is_degenerate_but_consistent() {
        let cfg = McConfig::new(4, 1, 5);
        let s = CovarianceSample::simulate(1.0, &cfg, 0);
        assert!(!s.nonzero);
        assert_eq!(s.restricted_det(), 0.0);
    }

    #[test]
    fn report_passes() {
        let cfg = McConfig::new(20_000, 32, 8);
        let rep = covariance_diagnostics(0.25, &cfg).unwrap();
        assert!(rep.passes(1e-10, 4.0), "{rep:#?}");
        assert_eq!(rep.scaling.len(), 10);
        let c11 = &rep.scaling[0];
        assert_eq!(c11.mean_t.mean, 0.25);
    }
}
