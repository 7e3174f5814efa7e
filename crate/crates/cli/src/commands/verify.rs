use std::sync::Arc;

use anyhow::{anyhow, Result};
use cubature::algebra::{AlgebraContext, LieBasis, TensorElement, SERIALIZE_EPS};
use cubature::cubature::{expectation_formula, greek_target, verify_moments};
use cubature::greeks::greeks_formula;
use cubature::oracle::GaussianStream;
use cubature::{heat_element, scale_path, signature, PiecewisePath};
use serde::Serialize;

use crate::args::{Format, Global, VerifyArgs};
use crate::output::write_rows;
use crate::ToleranceFailure;

const TRIALS: usize = 20;
const ALGEBRA_TOL: f64 = 1e-11;
const MOMENT_TOL: f64 = 1e-10;

#[derive(Debug, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

struct Rng {
    g: GaussianStream,
    k: u64,
}

impl Rng {
    fn uniform(&mut self) -> f64 {
        self.k += 1;
        2.0 * self.g.uniform(self.k, 0, 0) - 1.0
    }

    fn element(&mut self, ctx: &Arc<AlgebraContext>) -> TensorElement {
        let c = (0..ctx.dim()).map(|_| self.uniform()).collect();
        TensorElement::from_dense(ctx, c).expect("dense length matches")
    }

    fn lie(&mut self, ctx: &Arc<AlgebraContext>, lie: &LieBasis) -> TensorElement {
        let mut x = TensorElement::zero(ctx);
        for b in lie.elements() {
            x.axpy(self.uniform(), b).expect("same context");
        }
        x
    }

    fn path(&mut self, d: usize) -> PiecewisePath {
        let incs: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let mut v: Vec<f64> = (0..=d).map(|_| self.uniform()).collect();
                v[0] = v[0].abs();
                v
            })
            .collect();
        PiecewisePath::from_increments(1.0, &incs).expect("valid increments")
    }
}

/// Max over trials of `check`.
fn worst(trials: usize, mut check: impl FnMut() -> Result<f64>) -> Result<f64> {
    let mut w: f64 = 0.0;
    for _ in 0..trials {
        w = w.max(check()?);
    }
    Ok(w)
}

pub fn checks(d: usize, m: usize, seed: u64) -> Result<Vec<CheckRow>> {
    let ctx = AlgebraContext::new(d, m)?;
    let lie = LieBasis::new(&ctx)?;
    let mut rng = Rng { g: GaussianStream::new(seed), k: 0 };
    let one = TensorElement::one(&ctx);
    let mut rows = Vec::new();
    let mut push = |name: &str, value: f64, tol: Option<f64>| {
        rows.push(CheckRow {
            check: name.to_string(),
            value,
            tolerance: tol,
            pass: tol.is_none_or(|t| value <= t),
        });
    };

    push("basis_dimension", ctx.dim() as f64, None);
    push("lie_dimension", lie.dim() as f64, None);

    let v = worst(TRIALS, || {
        let (a, b, c) = (rng.element(&ctx), rng.element(&ctx), rng.element(&ctx));
        Ok(a.mul(&b)?.mul(&c)?.distance(&a.mul(&b.mul(&c)?)?)?)
    })?;
    push("associativity", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let a = rng.element(&ctx);
        Ok(one.mul(&a)?.distance(&a)?.max(a.mul(&one)?.distance(&a)?))
    })?;
    push("unit", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let x = rng.lie(&ctx, &lie);
        Ok(x.exp()?.log()?.distance(&x)?)
    })?;
    push("exp_log_round_trip", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let x = rng.lie(&ctx, &lie);
        Ok(x.exp()?.mul(&x.scale(-1.0).exp()?)?.distance(&one)?)
    })?;
    push("exp_of_negative_is_inverse", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let mut a = rng.element(&ctx);
        a = a.try_add(&one.scale(2.0))?;
        Ok(a.mul(&a.inverse()?)?.distance(&one)?)
    })?;
    push("inverse", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let (a, b) = (rng.element(&ctx), rng.element(&ctx));
        let s = 0.5 + rng.uniform().abs();
        Ok(a.mul(&b)?.dilate(s)?.distance(&a.dilate(s)?.mul(&b.dilate(s)?)?)?)
    })?;
    push("dilation_homomorphism", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let (x, y) = (rng.lie(&ctx, &lie), rng.lie(&ctx, &lie));
        Ok(x.bracket(&y)?.try_add(&y.bracket(&x)?)?.max_abs())
    })?;
    push("bracket_antisymmetry", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let (x, y, z) = (rng.lie(&ctx, &lie), rng.lie(&ctx, &lie), rng.lie(&ctx, &lie));
        let s = x
            .bracket(&y.bracket(&z)?)?
            .try_add(&y.bracket(&z.bracket(&x)?)?)?
            .try_add(&z.bracket(&x.bracket(&y)?)?)?;
        Ok(s.max_abs())
    })?;
    push("jacobi_identity", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let (x, y) = (rng.lie(&ctx, &lie), rng.lie(&ctx, &lie));
        let g = rng.lie(&ctx, &lie).exp()?;
        let ad = |w: &TensorElement| TensorElement::adjoint(&g, w);
        Ok(ad(&x.bracket(&y)?)?.distance(&ad(&x)?.bracket(&ad(&y)?)?)?)
    })?;
    push("adjoint_homomorphism", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || Ok(lie.residual(&signature(&ctx, &rng.path(d))?.log()?)?))?;
    push("log_signature_is_lie", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let (p, q) = (rng.path(d), rng.path(d));
        let whole = signature(&ctx, &p.concat(&q)?)?;
        Ok(whole.distance(&signature(&ctx, &p)?.mul(&signature(&ctx, &q)?)?)?)
    })?;
    push("chen_identity", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let p = rng.path(d);
        let sig = signature(&ctx, &p)?;
        let mut e: f64 = 0.0;
        for t in [0.01, 1.0, 4.0] {
            let scaled = signature(&ctx, &scale_path(&p, t)?)?;
            e = e.max(scaled.distance(&sig.dilate(t.sqrt())?)?);
        }
        Ok(e)
    })?;
    push("brownian_scaling", v, Some(ALGEBRA_TOL));

    let v = worst(TRIALS, || {
        let a = rng.element(&ctx);
        let back = TensorElement::from_json(Some(&ctx), &a.to_json()?)?;
        Ok(back.distance(&a)?)
    })?;
    push("json_round_trip", v, Some(SERIALIZE_EPS));

    let t = 0.5;
    let mut gen = vec![0.0; d + 1];
    gen[0] = t;
    let mut heat_log = TensorElement::linear(&ctx, &gen)?;
    for i in 1..=d {
        let e = TensorElement::generator(&ctx, i)?;
        heat_log.axpy(0.5 * t, &e.mul(&e)?)?;
    }
    let v = heat_log.exp()?.distance(&heat_element(&ctx, t)?)?;
    push("heat_element", v, Some(ALGEBRA_TOL));

    if let Ok(f) = expectation_formula(&ctx, t) {
        let r = verify_moments(&f, &heat_element(&ctx, t)?)?.max;
        push("expectation_formula_moments", r, Some(MOMENT_TOL));
    }
    if m <= 3 {
        let w = TensorElement::generator(&ctx, 1)?;
        let g = greeks_formula(&ctx, &w, t)?;
        let r = verify_moments(&g, &greek_target(&ctx, &w, t)?)?.max;
        push("greeks_formula_moments", r, Some(MOMENT_TOL));
        push("greeks_weight_sum", g.weight_sum().abs(), Some(MOMENT_TOL));
    }
    Ok(rows)
}

pub fn run(global: &Global, _args: &VerifyArgs) -> Result<()> {
    let d = global.d.ok_or_else(|| anyhow!("verify needs --d"))? as usize;
    let m = global.m.ok_or_else(|| anyhow!("verify needs --m"))? as usize;
    let rows = checks(d, m, global.seed)?;
    write_rows(&rows, global.format_or(Format::Csv), global.out.as_deref())?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(ToleranceFailure(format!("failed checks: {}", failed.join(", "))).into())
    }
}
