use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::builtin::greek_target;
use super::nnls::solve_subset;
use super::{CubatureFormula, Flavor, FormulaItem, VERIFY_TOL};
use crate::algebra::{AlgebraContext, TensorElement};
use crate::error::{CubatureError, Result};
use crate::signature::{signature, PiecewisePath};

/// Weights below this magnitude are dropped before re-solving.
pub const PRUNE_TOL: f64 = 1e-12;

/// Moment-matching Greeks formula over a fixed path dictionary.
///
/// Solves `Σ μ_j S(path_j) = greek_target(w, t)` for the minimal-norm `μ`,
/// drops `|μ_j| < PRUNE_TOL`, re-solves on the survivors and, if more than
/// `2 · dim A` remain, reduces to a basic solution on pivoted columns.
pub fn greeks_solve(
    ctx: &Arc<AlgebraContext>,
    w: &TensorElement,
    t: f64,
    dictionary: &[PiecewisePath],
) -> Result<CubatureFormula> {
    let target = greek_target(ctx, w, t)?;
    let direction = w.dilate(t.sqrt())?;
    if target.max_abs() == 0.0 {
        return Ok(CubatureFormula::from_parts(ctx, t, Flavor::Greeks, Some(direction), vec![]));
    }
    if dictionary.is_empty() {
        return Err(CubatureError::Config("empty path dictionary".into()));
    }

    let sigs: Vec<TensorElement> = dictionary
        .par_iter()
        .map(|p| signature(ctx, p))
        .collect::<Result<_>>()?;
    let n = ctx.dim();
    let a = DMatrix::from_fn(n, sigs.len(), |i, j| sigs[j].as_slice()[i]);
    let b = DVector::from_column_slice(target.as_slice());

    let mut cols: Vec<usize> = (0..sigs.len()).collect();
    let mut mu = solve_subset(&a, &b, &cols);
    loop {
        let keep: Vec<usize> = (0..cols.len()).filter(|&k| mu[k].abs() >= PRUNE_TOL).collect();
        if keep.len() == cols.len() {
            break;
        }
        cols = keep.iter().map(|&k| cols[k]).collect();
        mu = solve_subset(&a, &b, &cols);
    }

    if cols.len() > 2 * n {
        cols = pivoted_columns(&a, &cols);
        mu = solve_subset(&a, &b, &cols);
    }

    let residual = (&b - a.select_columns(&cols) * &mu).amax();
    if residual > VERIFY_TOL {
        return Err(CubatureError::NoFormulaFound { residual });
    }

    let items = cols
        .iter()
        .zip(mu.iter())
        .map(|(&j, &m)| FormulaItem {
            weight: m,
            path: dictionary[j].clone(),
        })
        .collect();
    CubatureFormula::from_parts(ctx, t, Flavor::Greeks, Some(direction), items).verified()
}

/// Keeps a maximal independent subset of `cols`, picking at each step the
/// column with the largest component orthogonal to those already chosen.
fn pivoted_columns(a: &DMatrix<f64>, cols: &[usize]) -> Vec<usize> {
    let mut resid: Vec<DVector<f64>> = cols.iter().map(|&j| a.column(j).into_owned()).collect();
    let first = resid.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let mut used = vec![false; cols.len()];
    let mut chosen = Vec::new();
    loop {
        let best = (0..cols.len())
            .filter(|&k| !used[k])
            .max_by(|&i, &j| resid[i].norm().total_cmp(&resid[j].norm()));
        let Some(k) = best else { break };
        let nk = resid[k].norm();
        if nk <= 1e-12 * first {
            break;
        }
        used[k] = true;
        chosen.push(cols[k]);
        let q = &resid[k] / nk;
        for (i, r) in resid.iter_mut().enumerate() {
            if !used[i] {
                let p = q.dot(r);
                *r -= &q * p;
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Paths built from one or more segments drawn from the set
/// `{±√t e_i (i >= 1), t e_0}`: all single segments, plus ordered pairs
/// when `m >= 3`, plus ordered triples when `m >= 5`.
pub fn default_greeks_dictionary(d: usize, m: usize, t: f64) -> Result<Vec<PiecewisePath>> {
    if !(t.is_finite() && t > 0.0) {
        return Err(CubatureError::Domain(format!("horizon must be positive, got {t}")));
    }
    let st = t.sqrt();
    let mut seg = Vec::with_capacity(2 * d + 1);
    for i in 1..=d {
        for s in [st, -st] {
            let mut v = vec![0.0; d + 1];
            v[i] = s;
            seg.push(v);
        }
    }
    let mut v0 = vec![0.0; d + 1];
    v0[0] = t;
    seg.push(v0);

    let depth = match m {
        0..=2 => 1,
        3 | 4 => 2,
        _ => 3,
    };
    let mut out: Vec<Vec<Vec<f64>>> = seg.iter().map(|s| vec![s.clone()]).collect();
    let mut frontier = out.clone();
    for _ in 1..depth {
        let mut next = Vec::new();
        for p in &frontier {
            for s in &seg {
                let mut q = p.clone();
                q.push(s.clone());
                next.push(q);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.iter()
        .map(|incs| PiecewisePath::from_increments(t, incs))
        .collect()
}
