use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::system::{VectorFieldSystem, FD_STEP};
use crate::algebra::{bracket_monomial, AlgebraContext, LieBasis, TensorElement, Word};
use crate::error::{CubatureError, Result};

/// A vector field built from the system's fields by brackets.
///
/// The bracket is the commutator of first-order operators,
/// `[A, B](y) = dB(y)·A(y) − dA(y)·B(y)`, so that `e_I ↦ V_I` respects
/// products in the algebra.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldExpr {
    Field(usize),
    Bracket(Box<FieldExpr>, Box<FieldExpr>),
}

impl FieldExpr {
    pub fn bracket(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        FieldExpr::Bracket(Box::new(a), Box::new(b))
    }

    /// Right-nested `[V_{i1},[V_{i2},[...,V_{ik}]...]]`.
    pub fn from_word(word: &Word) -> Result<FieldExpr> {
        let letters: Vec<usize> = word.letters().collect();
        let Some((&last, rest)) = letters.split_last() else {
            return Err(CubatureError::Domain("empty bracket word".into()));
        };
        let mut e = FieldExpr::Field(last);
        for &l in rest.iter().rev() {
            e = FieldExpr::bracket(FieldExpr::Field(l), e);
        }
        Ok(e)
    }

    pub fn max_field(&self) -> usize {
        match self {
            FieldExpr::Field(i) => *i,
            FieldExpr::Bracket(a, b) => a.max_field().max(b.max_field()),
        }
    }

    /// Bracket depth; a plain field has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            FieldExpr::Field(_) => 0,
            FieldExpr::Bracket(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Weighted degree, with `V_0` counting twice.
    pub fn degree(&self) -> usize {
        match self {
            FieldExpr::Field(0) => 2,
            FieldExpr::Field(_) => 1,
            FieldExpr::Bracket(a, b) => a.degree() + b.degree(),
        }
    }

    pub fn eval(&self, system: &VectorFieldSystem, y: &[f64]) -> Result<Vec<f64>> {
        if self.max_field() > system.d() {
            return Err(CubatureError::Config(format!(
                "field V{} does not exist (d = {})",
                self.max_field(),
                system.d()
            )));
        }
        match self {
            FieldExpr::Field(i) => Ok(system.eval(*i, y)),
            FieldExpr::Bracket(a, b) => {
                let va = a.eval(system, y)?;
                let vb = b.eval(system, y)?;
                let ja = a.jacobian(system, y)?;
                let jb = b.jacobian(system, y)?;
                let n = system.n();
                Ok((0..n)
                    .map(|r| {
                        let rb = &jb[r * n..(r + 1) * n];
                        let ra = &ja[r * n..(r + 1) * n];
                        dot(rb, &va) - dot(ra, &vb)
                    })
                    .collect())
            }
        }
    }

    /// Row-major Jacobian: analytic (or system fallback) for plain fields,
    /// central differences of the bracket field otherwise.
    pub fn jacobian(&self, system: &VectorFieldSystem, y: &[f64]) -> Result<Vec<f64>> {
        let n = system.n();
        match self {
            FieldExpr::Field(i) => {
                let mut out = vec![0.0; n * n];
                system.jacobian_into(*i, y, &mut out)?;
                Ok(out)
            }
            FieldExpr::Bracket(..) => {
                let mut out = vec![0.0; n * n];
                let mut yp = y.to_vec();
                for c in 0..n {
                    let h = FD_STEP * y[c].abs().max(1.0);
                    yp[c] = y[c] + h;
                    let fp = self.eval(system, &yp)?;
                    yp[c] = y[c] - h;
                    let fm = self.eval(system, &yp)?;
                    yp[c] = y[c];
                    for r in 0..n {
                        out[r * n + c] = (fp[r] - fm[r]) / (2.0 * h);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// `[A, B](y)` for two field expressions.
pub fn bracket_vf(system: &VectorFieldSystem, a: &FieldExpr, b: &FieldExpr, y: &[f64]) -> Result<Vec<f64>> {
    FieldExpr::bracket(a.clone(), b.clone()).eval(system, y)
}

/// The right-nested bracket field of `word` evaluated at `y`.
pub fn bracket_evaluate(system: &VectorFieldSystem, word: &Word, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != system.n() {
        return Err(CubatureError::DimensionMismatch {
            expected: system.n(),
            got: y.len(),
            what: "base point",
        });
    }
    FieldExpr::from_word(word)?.eval(system, y)
}

/// Bracket fields at a base point, keyed by bracket word.
#[derive(Clone, Debug, Serialize)]
pub struct BracketTable {
    pub y: Vec<f64>,
    pub entries: Vec<(Word, Vec<f64>)>,
}

impl BracketTable {
    pub fn build(system: &VectorFieldSystem, y: &[f64], words: &[Word]) -> Result<Self> {
        let entries = words
            .iter()
            .map(|w| Ok((w.clone(), bracket_evaluate(system, w, y)?)))
            .collect::<Result<_>>()?;
        Ok(BracketTable {
            y: y.to_vec(),
            entries,
        })
    }

    pub fn get(&self, word: &Word) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(w, _)| w == word)
            .map(|(_, v)| v.as_slice())
    }
}

/// Coefficients `w_I` with `v = Σ t^{deg(I)/2} w_I V_I(y)`.
#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub terms: Vec<(Word, f64)>,
    /// Euclidean norm of `v − Σ t^{deg/2} w_I V_I(y)`.
    pub residual: f64,
    /// Largest bracket degree carrying a nonzero coefficient.
    pub k: usize,
    pub table: BracketTable,
}

/// Highest bracket degree used to decompose a direction for a degree-`m`
/// Greek. Degree one is always allowed so that `m = 1` can use `V_1..V_d`.
pub fn bracket_degree_cap(m: usize) -> usize {
    m.saturating_sub(1).max(1)
}

/// Bracket words used for decomposition: an independent set of right-nested
/// words of degree at most `cap`, without `(0)`.
pub fn decomposition_words(d: usize, cap: usize) -> Result<Vec<Word>> {
    let ctx = AlgebraContext::new(d, cap)?;
    let lie = LieBasis::new(&ctx)?;
    Ok(lie
        .words()
        .iter()
        .filter(|w| **w != Word::letter(0))
        .cloned()
        .collect())
}

/// Minimal-norm least-squares decomposition of `v` over bracket fields of
/// degree `<= max(m − 1, 1)` at `y`.
pub fn decompose_direction(
    system: &VectorFieldSystem,
    y: &[f64],
    v: &[f64],
    t: f64,
    m: usize,
) -> Result<Decomposition> {
    if !(t.is_finite() && t > 0.0) {
        return Err(CubatureError::Domain(format!("horizon must be positive, got {t}")));
    }
    if m == 0 {
        return Err(CubatureError::Domain("degree m must be >= 1".into()));
    }
    if v.len() != system.n() {
        return Err(CubatureError::DimensionMismatch {
            expected: system.n(),
            got: v.len(),
            what: "direction",
        });
    }
    let words = decomposition_words(system.d(), bracket_degree_cap(m))?;
    let table = BracketTable::build(system, y, &words)?;
    let n = system.n();
    let a = DMatrix::from_fn(n, words.len(), |r, c| {
        t.powf(words[c].degree() as f64 / 2.0) * table.entries[c].1[r]
    });
    let b = DVector::from_column_slice(v);
    let vnorm = b.norm();

    let sol = if vnorm == 0.0 {
        DVector::zeros(words.len())
    } else {
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        svd.solve(&b, 1e-12 * smax.max(f64::MIN_POSITIVE))
            .expect("both factors were requested")
    };
    let residual = (&b - &a * &sol).norm();
    if residual > 1e-8 * vnorm {
        return Err(CubatureError::DirectionNotAttainable {
            residual,
            norm: vnorm,
        });
    }

    let wmax = sol.amax();
    let terms: Vec<(Word, f64)> = words.iter().cloned().zip(sol.iter().copied()).collect();
    let k = terms
        .iter()
        .filter(|(_, c)| c.abs() > 1e-12 * wmax && *c != 0.0)
        .map(|(w, _)| w.degree())
        .max()
        .unwrap_or(0);
    Ok(Decomposition {
        terms,
        residual,
        k,
        table,
    })
}

/// `Σ w_I [e_{i1},[...,e_{ik}]...]`, before dilation.
pub fn lie_direction(ctx: &Arc<AlgebraContext>, terms: &[(Word, f64)]) -> Result<TensorElement> {
    let mut out = TensorElement::zero(ctx);
    for (w, c) in terms {
        if *c == 0.0 {
            continue;
        }
        if w.degree() > ctx.m() {
            return Err(CubatureError::UnsupportedDegree {
                m: ctx.m(),
                reason: format!("bracket {w} exceeds the truncation degree"),
            });
        }
        out.axpy(*c, &bracket_monomial(ctx, w)?)?;
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
