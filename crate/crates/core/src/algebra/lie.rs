use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::context::AlgebraContext;
use super::element::TensorElement;
use super::word::Word;
use crate::error::Result;

/// Relative threshold below which a candidate bracket counts as dependent.
pub const INDEPENDENCE_TOL: f64 = 1e-10;

/// A spanning, linearly independent set of right-nested bracket monomials
/// `[e_{i1},[e_{i2},[...,e_{ik}]...]]` of degree at most `m`.
#[derive(Clone, Debug)]
pub struct LieBasis {
    ctx: Arc<AlgebraContext>,
    words: Vec<Word>,
    elements: Vec<TensorElement>,
    /// Orthonormalized copies of `elements`, used for residuals.
    ortho: Vec<Vec<f64>>,
}

/// The right-nested bracket `[e_{i1},[e_{i2},[...,e_{ik}]...]]`.
/// The empty word maps to zero.
pub fn bracket_monomial(ctx: &Arc<AlgebraContext>, word: &Word) -> Result<TensorElement> {
    let letters: Vec<usize> = word.letters().collect();
    let Some((&last, rest)) = letters.split_last() else {
        return Ok(TensorElement::zero(ctx));
    };
    let mut acc = TensorElement::generator(ctx, last)?;
    for &l in rest.iter().rev() {
        acc = TensorElement::generator(ctx, l)?.bracket(&acc)?;
    }
    Ok(acc)
}

impl LieBasis {
    pub fn new(ctx: &Arc<AlgebraContext>) -> Result<Self> {
        let mut words = Vec::new();
        let mut elements = Vec::new();
        let mut ortho: Vec<Vec<f64>> = Vec::new();

        // The context basis is already graded-lexicographic, so candidates
        // come in the same deterministic order.
        for word in ctx.basis().iter().skip(1) {
            let el = bracket_monomial(ctx, word)?;
            let norm = l2(el.as_slice());
            if norm == 0.0 {
                continue;
            }
            let mut r = el.as_slice().to_vec();
            for _ in 0..2 {
                for q in &ortho {
                    let p = dot(q, &r);
                    r.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
                }
            }
            let rn = l2(&r);
            if rn > INDEPENDENCE_TOL * norm {
                r.iter_mut().for_each(|a| *a /= rn);
                ortho.push(r);
                words.push(word.clone());
                elements.push(el);
            }
        }

        Ok(LieBasis {
            ctx: ctx.clone(),
            words,
            elements,
            ortho,
        })
    }

    pub fn context(&self) -> &Arc<AlgebraContext> {
        &self.ctx
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    /// Bracket words of the retained monomials, in selection order.
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn elements(&self) -> &[TensorElement] {
        &self.elements
    }

    /// Euclidean distance from `x` to the Lie span.
    pub fn residual(&self, x: &TensorElement) -> Result<f64> {
        self.ctx.check_same(x.context())?;
        let mut r = x.as_slice().to_vec();
        for _ in 0..2 {
            for q in &self.ortho {
                let p = dot(q, &r);
                r.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
        }
        Ok(l2(&r))
    }

    /// Least-squares coordinates of `x` over [`LieBasis::elements`].
    pub fn coordinates(&self, x: &TensorElement) -> Result<Vec<f64>> {
        self.ctx.check_same(x.context())?;
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        let n = self.ctx.dim();
        let a = DMatrix::from_fn(n, self.dim(), |i, j| self.elements[j].as_slice()[i]);
        let b = DVector::from_column_slice(x.as_slice());
        let sol = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .expect("both factors were requested");
        Ok(sol.iter().copied().collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_dimension() {
        let ctx = AlgebraContext::new(2, 2).unwrap();
        let lb = LieBasis::new(&ctx).unwrap();
        assert_eq!(lb.dim(), 4);
        let names: Vec<String> = lb.words().iter().map(|w| w.to_string()).collect();
        assert_eq!(names, ["(1)", "(2)", "(0)", "(1,2)"]);
    }

    #[test]
    fn single_generator() {
        let ctx = AlgebraContext::new(1, 1).unwrap();
        let lb = LieBasis::new(&ctx).unwrap();
        assert_eq!(lb.dim(), 1);
        assert_eq!(lb.words()[0], Word::letter(1));
    }

    #[test]
    fn known_dimensions() {
        // d=1, m=3: e1, e0, [e1,e0]
        let ctx = AlgebraContext::new(1, 3).unwrap();
        assert_eq!(LieBasis::new(&ctx).unwrap().dim(), 3);
        let ctx = AlgebraContext::new(2, 3).unwrap();
        // e1,e2,e0,[e1,e2],[e1,e0],[e2,e0],[e1,[e1,e2]],[e2,[e1,e2]]
        assert_eq!(LieBasis::new(&ctx).unwrap().dim(), 8);
    }

    #[test]
    fn elements_have_no_constant_term() {
        let ctx = AlgebraContext::new(2, 4).unwrap();
        let lb = LieBasis::new(&ctx).unwrap();
        for el in lb.elements() {
            assert_eq!(el.constant(), 0.0);
            assert!(lb.residual(el).unwrap() < 1e-12);
        }
    }

    #[test]
    fn non_lie_element_has_residual() {
        let ctx = AlgebraContext::new(2, 2).unwrap();
        let lb = LieBasis::new(&ctx).unwrap();
        let sq = TensorElement::monomial(&ctx, &Word::new(&[1, 1], 2).unwrap(), 1.0).unwrap();
        assert!((lb.residual(&sq).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coordinates_reconstruct() {
        let ctx = AlgebraContext::new(2, 3).unwrap();
        let lb = LieBasis::new(&ctx).unwrap();
        let mut x = TensorElement::zero(&ctx);
        for (k, el) in lb.elements().iter().enumerate() {
            x.axpy(0.5 + k as f64, el).unwrap();
        }
        let c = lb.coordinates(&x).unwrap();
        for (k, ck) in c.iter().enumerate() {
            assert!((ck - (0.5 + k as f64)).abs() < 1e-10);
        }
    }
}
