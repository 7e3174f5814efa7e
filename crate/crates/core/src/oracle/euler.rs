use nalgebra::{DMatrix, DVector};

use super::stats::{run_samples, GaussianStream, McConfig, McEstimate};
use crate::error::{CubatureError, Result};
use crate::payoff::Payoff;
use crate::sde::{ItoScratch, VectorFieldSystem, FD_STEP};

fn check_state(system: &VectorFieldSystem, y: &[f64], what: &'static str) -> Result<()> {
    if y.len() != system.n() {
        return Err(CubatureError::DimensionMismatch {
            expected: system.n(),
            got: y.len(),
            what,
        });
    }
    Ok(())
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(CubatureError::Domain(format!("horizon must be positive, got {t}")));
    }
    Ok(())
}

/// Evaluates `sample(path, sign, out)` over all samples of `cfg`. With
/// antithetics each sample averages the `+1` and `−1` draws of one path.
fn sample_paths<F>(cfg: &McConfig, dim: usize, sample: F) -> Result<Vec<McEstimate>>
where
    F: Fn(u64, f64, &mut [f64]) -> Result<()> + Sync,
{
    cfg.validate()?;
    let anti = cfg.antithetic;
    run_samples(cfg.samples(), dim, |i, out| {
        sample(i as u64, 1.0, out)?;
        if anti {
            let mut other = vec![0.0; out.len()];
            sample(i as u64, -1.0, &mut other)?;
            out.iter_mut().zip(&other).for_each(|(a, b)| *a = 0.5 * (*a + b));
        }
        Ok(())
    })
}

/// One Euler–Maruyama path in Itô form. `dw(step, i)` returns the Brownian
/// increment of coordinate `i` over `step`.
fn euler_path(
    system: &VectorFieldSystem,
    y0: &[f64],
    dt: f64,
    n_steps: usize,
    dw: impl Fn(usize, usize) -> f64,
) -> Result<Vec<f64>> {
    let n = system.n();
    let mut y = y0.to_vec();
    let mut drift = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut scratch = ItoScratch::new(n);
    for step in 0..n_steps {
        system.ito_drift_into(&y, &mut drift, &mut scratch)?;
        let mut next: Vec<f64> = y.iter().zip(&drift).map(|(a, b)| a + b * dt).collect();
        for i in 1..=system.d() {
            let db = dw(step, i - 1);
            system.eval_into(i, &y, &mut v);
            next.iter_mut().zip(&v).for_each(|(a, b)| *a += b * db);
        }
        if next.iter().any(|c| !c.is_finite()) {
            return Err(CubatureError::BlowUp { segment: step });
        }
        y = next;
    }
    Ok(y)
}

fn increments(cfg: &McConfig, dt: f64) -> impl Fn(u64, f64) -> Box<dyn Fn(usize, usize) -> f64> {
    let g = GaussianStream::new(cfg.seed);
    let sq = dt.sqrt();
    move |path, sign| Box::new(move |step, i| sign * sq * g.normal(path, step as u64, i as u64))
}

/// `E f(Y_t^y)` by Euler–Maruyama with the Stratonovich correction
/// `½ Σ dV_i·V_i` added to the drift.
pub fn euler_expectation(
    system: &VectorFieldSystem,
    f: &Payoff,
    y: &[f64],
    t: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    check_state(system, y, "initial state")?;
    check_horizon(t)?;
    let dt = t / cfg.n_steps as f64;
    let dw = increments(cfg, dt);
    let est = sample_paths(cfg, 1, |path, sign, out| {
        let end = euler_path(system, y, dt, cfg.n_steps, dw(path, sign))?;
        out[0] = f.eval(&end);
        Ok(())
    })?;
    Ok(est[0])
}

/// Central difference `(E f(Y^{y+hv}) − E f(Y^{y−hv})) / 2h` with common
/// random numbers.
pub fn fd_greek(
    system: &VectorFieldSystem,
    f: &Payoff,
    y: &[f64],
    v: &[f64],
    t: f64,
    cfg: &McConfig,
    h: f64,
) -> Result<McEstimate> {
    check_state(system, y, "initial state")?;
    check_state(system, v, "direction")?;
    check_horizon(t)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(CubatureError::Domain(format!("difference step must be positive, got {h}")));
    }
    let up: Vec<f64> = y.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let dn: Vec<f64> = y.iter().zip(v).map(|(a, b)| a - h * b).collect();
    let dt = t / cfg.n_steps as f64;
    let dw = increments(cfg, dt);
    let est = sample_paths(cfg, 1, |path, sign, out| {
        let p = euler_path(system, &up, dt, cfg.n_steps, dw(path, sign))?;
        let m = euler_path(system, &dn, dt, cfg.n_steps, dw(path, sign))?;
        out[0] = (f.eval(&p) - f.eval(&m)) / (2.0 * h);
        Ok(())
    })?;
    Ok(est[0])
}

/// Estimates of the elliptic Malliavin delta.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MalliavinReport {
    /// `E f(Y_t) (1/t) ∫ (σ^{-1}(Y_s) J_s v)·dB_s`.
    pub precise: McEstimate,
    /// `E f(Y_t) Σ_i B_t^i (σ^{-1}(y) v)_i / t`.
    pub leading: McEstimate,
    /// `precise − leading` on common paths.
    pub gap: McEstimate,
}

fn diffusion_matrix(system: &VectorFieldSystem, y: &[f64], col: &mut [f64]) -> DMatrix<f64> {
    let n = system.n();
    let mut s = DMatrix::zeros(n, system.d());
    for i in 1..=system.d() {
        system.eval_into(i, y, col);
        s.column_mut(i - 1).copy_from_slice(col);
    }
    s
}

fn solve_sigma(s: DMatrix<f64>, rhs: &DVector<f64>, step: usize) -> Result<DVector<f64>> {
    let scale = s.amax();
    let lu = s.lu();
    let det = lu.determinant();
    if scale == 0.0 || !det.is_finite() || det.abs() <= 1e-300_f64.max(1e-14 * scale.powi(rhs.len() as i32)) {
        return Err(CubatureError::Ellipticity { step });
    }
    lu.solve(rhs)
        .filter(|x| x.iter().all(|c| c.is_finite()))
        .ok_or(CubatureError::Ellipticity { step })
}

/// Jacobian of the Itô drift by central differences, row-major.
fn drift_jacobian(system: &VectorFieldSystem, y: &[f64], out: &mut DMatrix<f64>, scratch: &mut ItoScratch) -> Result<()> {
    let n = system.n();
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for c in 0..n {
        let h = FD_STEP * y[c].abs().max(1.0);
        yp[c] = y[c] + h;
        system.ito_drift_into(&yp, &mut fp, scratch)?;
        yp[c] = y[c] - h;
        system.ito_drift_into(&yp, &mut fm, scratch)?;
        yp[c] = y[c];
        for r in 0..n {
            out[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(())
}

/// Delta in direction `v` via the adapted Malliavin weight. Needs a square,
/// invertible diffusion matrix `σ = (V_1, …, V_d)` along every path.
pub fn malliavin_delta_m1(
    system: &VectorFieldSystem,
    f: &Payoff,
    y: &[f64],
    v: &[f64],
    t: f64,
    cfg: &McConfig,
) -> Result<MalliavinReport> {
    check_state(system, y, "initial state")?;
    check_state(system, v, "direction")?;
    check_horizon(t)?;
    let (n, d) = (system.n(), system.d());
    if n != d {
        return Err(CubatureError::Config(format!(
            "Malliavin weight needs as many Brownian motions as state dimensions (n = {n}, d = {d})"
        )));
    }
    let mut col = vec![0.0; n];
    let lead_dir = solve_sigma(diffusion_matrix(system, y, &mut col), &DVector::from_column_slice(v), 0)?;
    let dt = t / cfg.n_steps as f64;
    let dw = increments(cfg, dt);

    let est = sample_paths(cfg, 3, |path, sign, out| {
        let dw = dw(path, sign);
        let mut state = y.to_vec();
        let mut jv = DVector::from_column_slice(v);
        let mut drift = vec![0.0; n];
        let mut vi = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut jac = vec![0.0; n * n];
        let mut db_mat = DMatrix::zeros(n, n);
        let mut scratch = ItoScratch::new(n);
        let mut weight = 0.0;
        let mut bt = vec![0.0; d];

        for step in 0..cfg.n_steps {
            let db: Vec<f64> = (0..d).map(|i| dw(step, i)).collect();
            let u = solve_sigma(diffusion_matrix(system, &state, &mut col), &jv, step)?;
            weight += u.iter().zip(&db).map(|(a, b)| a * b).sum::<f64>();

            // First variation applied to v: dJv = Db Jv dt + Σ dV_i Jv dB^i.
            drift_jacobian(system, &state, &mut db_mat, &mut scratch)?;
            let mut next_jv = &jv + &db_mat * &jv * dt;
            for i in 1..=d {
                system.jacobian_into(i, &state, &mut jac)?;
                next_jv += DMatrix::from_row_slice(n, n, &jac) * &jv * db[i - 1];
            }

            system.ito_drift_into(&state, &mut drift, &mut scratch)?;
            let mut next: Vec<f64> = state.iter().zip(&drift).map(|(a, b)| a + b * dt).collect();
            for i in 1..=d {
                system.eval_into(i, &state, &mut vi);
                next.iter_mut().zip(&vi).for_each(|(a, b)| *a += b * db[i - 1]);
            }
            if next.iter().any(|c| !c.is_finite()) || next_jv.iter().any(|c| !c.is_finite()) {
                return Err(CubatureError::BlowUp { segment: step });
            }
            state = next;
            jv = next_jv;
            bt.iter_mut().zip(&db).for_each(|(a, b)| *a += b);
        }
        let fy = f.eval(&state);
        let precise = fy * weight / t;
        let leading = fy * bt.iter().zip(lead_dir.iter()).map(|(a, b)| a * b).sum::<f64>() / t;
        out[0] = precise;
        out[1] = leading;
        out[2] = precise - leading;
        Ok(())
    })?;
    Ok(MalliavinReport {
        precise: est[0],
        leading: est[1],
        gap: est[2],
    })
}
