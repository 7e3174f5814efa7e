use nalgebra::DMatrix;

use super::system::VectorFieldSystem;
use crate::error::{CubatureError, Result};
use crate::signature::PiecewisePath;

/// Default RK4 sub-steps per linear segment.
pub const DEFAULT_STEPS: usize = 16;

fn check(system: &VectorFieldSystem, y0: &[f64], path: &PiecewisePath, steps: usize) -> Result<()> {
    if y0.len() != system.n() {
        return Err(CubatureError::DimensionMismatch {
            expected: system.n(),
            got: y0.len(),
            what: "initial state",
        });
    }
    if path.dim() != system.d() + 1 {
        return Err(CubatureError::DimensionMismatch {
            expected: system.d() + 1,
            got: path.dim(),
            what: "driving path",
        });
    }
    if steps == 0 {
        return Err(CubatureError::Config("steps per segment must be >= 1".into()));
    }
    Ok(())
}

/// `out = Σ_i inc_i V_i(y)`.
fn combined(system: &VectorFieldSystem, inc: &[f64], y: &[f64], out: &mut [f64], tmp: &mut [f64]) {
    out.fill(0.0);
    for (i, &a) in inc.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        system.eval_into(i, y, tmp);
        out.iter_mut().zip(tmp.iter()).for_each(|(o, v)| *o += a * v);
    }
}

/// Solves `dy = Σ V_i(y) dω^i` along a piecewise-linear path with fixed-step
/// classical RK4. Each segment is integrated over unit pseudo-time with the
/// constant field `Σ Δω^i V_i`.
pub fn evolve(
    system: &VectorFieldSystem,
    y0: &[f64],
    path: &PiecewisePath,
    steps_per_segment: usize,
) -> Result<Vec<f64>> {
    check(system, y0, path, steps_per_segment)?;
    let n = system.n();
    let h = 1.0 / steps_per_segment as f64;
    let mut y = y0.to_vec();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut ys = vec![0.0; n];

    for (seg, (_, inc)) in path.segments().enumerate() {
        if inc.iter().all(|&a| a == 0.0) {
            continue;
        }
        for _ in 0..steps_per_segment {
            combined(system, &inc, &y, &mut k[0], &mut tmp);
            for r in 0..n {
                ys[r] = y[r] + 0.5 * h * k[0][r];
            }
            combined(system, &inc, &ys, &mut k[1], &mut tmp);
            for r in 0..n {
                ys[r] = y[r] + 0.5 * h * k[1][r];
            }
            combined(system, &inc, &ys, &mut k[2], &mut tmp);
            for r in 0..n {
                ys[r] = y[r] + h * k[2][r];
            }
            combined(system, &inc, &ys, &mut k[3], &mut tmp);
            for r in 0..n {
                y[r] += h / 6.0 * (k[0][r] + 2.0 * k[1][r] + 2.0 * k[2][r] + k[3][r]);
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(CubatureError::BlowUp { segment: seg });
            }
        }
    }
    Ok(y)
}

/// Evolves the state together with the first variation
/// `dJ = Σ dV_i(y) J dω^i`, `J(0) = I`. Returns `(y_end, J_end)`.
pub fn evolve_with_jacobian(
    system: &VectorFieldSystem,
    y0: &[f64],
    path: &PiecewisePath,
    steps_per_segment: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check(system, y0, path, steps_per_segment)?;
    let n = system.n();
    let h = 1.0 / steps_per_segment as f64;
    let mut y = y0.to_vec();
    let mut jm = DMatrix::<f64>::identity(n, n);
    let mut tmp = vec![0.0; n];
    let mut jac = vec![0.0; n * n];

    // Right-hand side for the joint (y, J) system.
    let rhs = |inc: &[f64], y: &[f64], j: &DMatrix<f64>, tmp: &mut [f64], jac: &mut [f64]| -> Result<(Vec<f64>, DMatrix<f64>)> {
        let mut dy = vec![0.0; n];
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, &c) in inc.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            system.eval_into(i, y, tmp);
            dy.iter_mut().zip(tmp.iter()).for_each(|(o, v)| *o += c * v);
            system.jacobian_into(i, y, jac)?;
            a += DMatrix::from_row_slice(n, n, jac) * c;
        }
        Ok((dy, a * j))
    };

    for (seg, (_, inc)) in path.segments().enumerate() {
        if inc.iter().all(|&a| a == 0.0) {
            continue;
        }
        for _ in 0..steps_per_segment {
            let (k1, l1) = rhs(&inc, &y, &jm, &mut tmp, &mut jac)?;
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let (k2, l2) = rhs(&inc, &y2, &(&jm + &l1 * (0.5 * h)), &mut tmp, &mut jac)?;
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let (k3, l3) = rhs(&inc, &y3, &(&jm + &l2 * (0.5 * h)), &mut tmp, &mut jac)?;
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let (k4, l4) = rhs(&inc, &y4, &(&jm + &l3 * h), &mut tmp, &mut jac)?;
            for r in 0..n {
                y[r] += h / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
            }
            jm += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
            if y.iter().any(|v| !v.is_finite()) || jm.iter().any(|v| !v.is_finite()) {
                return Err(CubatureError::BlowUp { segment: seg });
            }
        }
    }
    Ok((y, jm))
}

/// Jacobian of the flow along `path` with respect to the initial state.
pub fn first_variation(
    system: &VectorFieldSystem,
    y0: &[f64],
    path: &PiecewisePath,
    steps_per_segment: usize,
) -> Result<DMatrix<f64>> {
    evolve_with_jacobian(system, y0, path, steps_per_segment).map(|(_, j)| j)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sde::system::{FieldFn, JacobianFn};

    #[test]
    fn black_scholes_along_diffusion_line() {
        let (r, s, t, y) = (0.05, 0.3, 0.2f64, 1.3);
        let sys = VectorFieldSystem::black_scholes(r, s);
        let p = PiecewisePath::line(t, &[0.0, t.sqrt()]).unwrap();
        let out = evolve(&sys, &[y], &p, DEFAULT_STEPS).unwrap();
        assert!((out[0] - y * (s * t.sqrt()).exp()).abs() < 1e-10);
        let j = first_variation(&sys, &[y], &p, DEFAULT_STEPS).unwrap();
        assert!((j[(0, 0)] - (s * t.sqrt()).exp()).abs() < 1e-10);
    }

    #[test]
    fn zero_path_is_identity() {
        let sys = VectorFieldSystem::heisenberg_toy();
        let p = PiecewisePath::line(1.0, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(evolve(&sys, &[0.4, -0.2], &p, 4).unwrap(), vec![0.4, -0.2]);
        let j = first_variation(&sys, &[0.4, -0.2], &p, 4).unwrap();
        assert_eq!(j, DMatrix::identity(2, 2));
    }

    fn cubic() -> VectorFieldSystem {
        let fields: Vec<FieldFn> = vec![
            Arc::new(|y, o| o[0] = -y[0] * y[0] * y[0]),
            Arc::new(|y, o| o[0] = 1.0 + 0.5 * y[0] * y[0]),
        ];
        let jacobians: Vec<Option<JacobianFn>> = vec![
            Some(Arc::new(|y, o| o[0] = -3.0 * y[0] * y[0])),
            Some(Arc::new(|y, o| o[0] = y[0])),
        ];
        VectorFieldSystem::new("cubic", 1, fields, jacobians).unwrap()
    }

    #[test]
    fn fourth_order_convergence() {
        let sys = cubic();
        let p = PiecewisePath::line(1.0, &[0.7, 0.9]).unwrap();
        let reference = evolve(&sys, &[0.2], &p, 4096).unwrap()[0];
        let e1 = (evolve(&sys, &[0.2], &p, 4).unwrap()[0] - reference).abs();
        let e2 = (evolve(&sys, &[0.2], &p, 8).unwrap()[0] - reference).abs();
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn reversed_path_returns_home() {
        let sys = VectorFieldSystem::heisenberg_toy();
        let p = PiecewisePath::from_increments(1.0, &[vec![0.0, 0.5, -0.3], vec![0.0, -0.2, 0.8]])
            .unwrap();
        let there = evolve(&sys, &[0.1, 0.2], &p, 32).unwrap();
        let back = evolve(&sys, &there, &p.reversed(), 32).unwrap();
        assert!((back[0] - 0.1).abs() < 1e-12 && (back[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn variation_matches_differences() {
        let sys = VectorFieldSystem::heisenberg_toy();
        let p = PiecewisePath::from_increments(1.0, &[vec![0.0, 0.5, -0.3], vec![0.0, -0.2, 0.8]])
            .unwrap();
        let y = [0.3, -0.1];
        let j = first_variation(&sys, &y, &p, 32).unwrap();
        let h = 1e-6;
        for c in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[c] += h;
            ym[c] -= h;
            let fp = evolve(&sys, &yp, &p, 32).unwrap();
            let fm = evolve(&sys, &ym, &p, 32).unwrap();
            for r in 0..2 {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                assert!((fd - j[(r, c)]).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let fields: Vec<FieldFn> = vec![
            Arc::new(|_, o| o[0] = 0.0),
            Arc::new(|y, o| o[0] = y[0] * y[0]),
        ];
        let sys = VectorFieldSystem::new("riccati", 1, fields, vec![]).unwrap();
        let p = PiecewisePath::from_increments(1.0, &[vec![0.0, 0.1], vec![0.0, 1e200]]).unwrap();
        assert_eq!(
            evolve(&sys, &[1.0], &p, 4),
            Err(CubatureError::BlowUp { segment: 1 })
        );
    }
}
