use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::context::AlgebraContext;
use super::word::Word;
use crate::error::{CubatureError, Result};

/// Coefficients below this magnitude are dropped when serializing.
pub const SERIALIZE_EPS: f64 = 1e-15;

/// An element of the truncated algebra: a real coefficient per basis word.
///
/// Coefficients are stored densely in basis order.
#[derive(Clone)]
pub struct TensorElement {
    ctx: Arc<AlgebraContext>,
    coeffs: Vec<f64>,
}

impl TensorElement {
    pub fn zero(ctx: &Arc<AlgebraContext>) -> Self {
        TensorElement {
            ctx: ctx.clone(),
            coeffs: vec![0.0; ctx.dim()],
        }
    }

    pub fn one(ctx: &Arc<AlgebraContext>) -> Self {
        let mut x = Self::zero(ctx);
        x.coeffs[0] = 1.0;
        x
    }

    /// The generator `e_i`.
    pub fn generator(ctx: &Arc<AlgebraContext>, i: usize) -> Result<Self> {
        Self::monomial(ctx, &Word::new(&[i], ctx.d())?, 1.0)
    }

    /// `c * e_{i1} ... e_{ik}`; zero if the word's degree exceeds `m`.
    pub fn monomial(ctx: &Arc<AlgebraContext>, word: &Word, c: f64) -> Result<Self> {
        if let Some(l) = word.max_letter() {
            if l > ctx.d() {
                return Err(CubatureError::InvalidWord { letter: l, d: ctx.d() });
            }
        }
        let mut x = Self::zero(ctx);
        if let Some(i) = ctx.index_of(word) {
            x.coeffs[i] = c;
        }
        Ok(x)
    }

    /// `Σ v_i e_i` for `v` of length `d + 1`.
    pub fn linear(ctx: &Arc<AlgebraContext>, v: &[f64]) -> Result<Self> {
        if v.len() != ctx.d() + 1 {
            return Err(CubatureError::DimensionMismatch {
                expected: ctx.d() + 1,
                got: v.len(),
                what: "generator coefficients",
            });
        }
        let mut x = Self::zero(ctx);
        for (i, &c) in v.iter().enumerate() {
            let idx = ctx.index_of(&Word::letter(i)).expect("generators are in the basis");
            x.coeffs[idx] = c;
        }
        Ok(x)
    }

    pub fn from_dense(ctx: &Arc<AlgebraContext>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != ctx.dim() {
            return Err(CubatureError::DimensionMismatch {
                expected: ctx.dim(),
                got: coeffs.len(),
                what: "dense coefficients",
            });
        }
        Ok(TensorElement {
            ctx: ctx.clone(),
            coeffs,
        })
    }

    pub fn context(&self) -> &Arc<AlgebraContext> {
        &self.ctx
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    #[cfg(test)]
    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_dense(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `word` (zero for words outside the basis).
    pub fn coeff(&self, word: &Word) -> f64 {
        self.ctx.index_of(word).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn constant(&self) -> f64 {
        self.coeffs[0]
    }

    /// Iterates over `(word, coefficient)` pairs with nonzero coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (&Word, f64)> {
        self.ctx
            .basis()
            .iter()
            .zip(self.coeffs.iter().copied())
            .filter(|(_, c)| *c != 0.0)
    }

    /// Graded projection onto the degree-`n` words.
    pub fn graded(&self, n: usize) -> TensorElement {
        let mut out = Self::zero(&self.ctx);
        for i in self.ctx.degree_range(n) {
            out.coeffs[i] = self.coeffs[i];
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Max-abs coefficient difference per degree `0..=m`.
    pub fn max_abs_by_degree(&self) -> Vec<f64> {
        (0..=self.ctx.m())
            .map(|n| {
                self.ctx
                    .degree_range(n)
                    .map(|i| self.coeffs[i].abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn scale(&self, s: f64) -> TensorElement {
        TensorElement {
            ctx: self.ctx.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn try_add(&self, other: &TensorElement) -> Result<TensorElement> {
        self.ctx.check_same(&other.ctx)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &TensorElement) -> Result<TensorElement> {
        self.ctx.check_same(&other.ctx)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &TensorElement) -> Result<()> {
        self.ctx.check_same(&other.ctx)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
        Ok(())
    }

    fn zip_with(&self, other: &TensorElement, f: impl Fn(f64, f64) -> f64) -> TensorElement {
        TensorElement {
            ctx: self.ctx.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Truncated concatenation product.
    pub fn mul(&self, other: &TensorElement) -> Result<TensorElement> {
        self.ctx.check_same(&other.ctx)?;
        let mut out = vec![0.0; self.ctx.dim()];
        self.ctx.mul_into(&self.coeffs, &other.coeffs, &mut out);
        Ok(TensorElement {
            ctx: self.ctx.clone(),
            coeffs: out,
        })
    }

    /// Lie bracket `xy - yx`.
    pub fn bracket(&self, other: &TensorElement) -> Result<TensorElement> {
        let xy = self.mul(other)?;
        let yx = other.mul(self)?;
        Ok(xy.zip_with(&yx, |a, b| a - b))
    }

    /// Exponential of a nilpotent element (zero constant term).
    pub fn exp(&self) -> Result<TensorElement> {
        if self.coeffs[0] != 0.0 {
            return Err(CubatureError::Domain(format!(
                "exp needs a zero constant term, got {}",
                self.coeffs[0]
            )));
        }
        let dim = self.ctx.dim();
        let mut out = vec![0.0; dim];
        let mut scratch = vec![0.0; dim];
        self.ctx.exp_into(&self.coeffs, &mut out, &mut scratch);
        Ok(TensorElement {
            ctx: self.ctx.clone(),
            coeffs: out,
        })
    }

    /// Logarithm of an element with positive constant term `x0`:
    /// `log(x0) + Σ_{i>=1} (-1)^{i-1}/i ((x - x0)/x0)^i`, a finite sum.
    pub fn log(&self) -> Result<TensorElement> {
        let x0 = self.coeffs[0];
        if x0 <= 0.0 {
            return Err(CubatureError::Domain(format!(
                "log needs a positive constant term, got {x0}"
            )));
        }
        let mut n = self.scale(1.0 / x0);
        n.coeffs[0] = 0.0;

        let mut out = Self::zero(&self.ctx);
        out.coeffs[0] = x0.ln();
        let mut power = n.clone();
        for i in 1..=self.ctx.m() {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            out.axpy(sign / i as f64, &power)?;
            power = power.mul(&n)?;
        }
        Ok(out)
    }

    /// Multiplicative inverse of an element with nonzero constant term.
    pub fn inverse(&self) -> Result<TensorElement> {
        let x0 = self.coeffs[0];
        if x0 == 0.0 {
            return Err(CubatureError::Domain(
                "element with zero constant term is not invertible".into(),
            ));
        }
        // x = x0 (1 + n)  =>  x^{-1} = x0^{-1} Σ (-n)^k
        let mut neg_n = self.scale(-1.0 / x0);
        neg_n.coeffs[0] = 0.0;
        let mut out = Self::one(&self.ctx);
        let mut power = Self::one(&self.ctx);
        for _ in 1..=self.ctx.m() {
            power = power.mul(&neg_n)?;
            out.axpy(1.0, &power)?;
        }
        Ok(out.scale(1.0 / x0))
    }

    /// Grading automorphism: degree-`n` coefficients scale by `s^n`.
    pub fn dilate(&self, s: f64) -> Result<TensorElement> {
        if s.is_nan() || s <= 0.0 {
            return Err(CubatureError::Domain(format!(
                "dilation factor must be positive, got {s}"
            )));
        }
        let powers: Vec<f64> = (0..=self.ctx.m()).map(|n| s.powi(n as i32)).collect();
        Ok(TensorElement {
            ctx: self.ctx.clone(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * powers[self.ctx.degree_of(i)])
                .collect(),
        })
    }

    /// Conjugation `g w g^{-1}` of a Lie element by a group element.
    pub fn adjoint(g: &TensorElement, w: &TensorElement) -> Result<TensorElement> {
        g.ctx.check_same(&w.ctx)?;
        let g_inv = g.inverse()?;
        g.mul(w)?.mul(&g_inv)
    }

    /// Max-abs coefficient distance, or an error on context mismatch.
    pub fn distance(&self, other: &TensorElement) -> Result<f64> {
        Ok(self.try_sub(other)?.max_abs())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TensorElementRepr::from(self))?)
    }

    pub fn from_json(ctx_cache: Option<&Arc<AlgebraContext>>, s: &str) -> Result<Self> {
        let repr: TensorElementRepr = serde_json::from_str(s)?;
        repr.into_element(ctx_cache)
    }
}

/// `exp(t (e_0 + ½ Σ_{i>=1} e_i e_i))`, the expected truncated signature of
/// Brownian motion with time at horizon `t`.
pub fn heat_element(ctx: &Arc<AlgebraContext>, t: f64) -> Result<TensorElement> {
    if t.is_nan() || t <= 0.0 {
        return Err(CubatureError::Domain(format!(
            "heat element needs t > 0, got {t}"
        )));
    }
    let mut gen = TensorElement::zero(ctx);
    if let Some(i) = ctx.index_of(&Word::letter(0)) {
        gen.coeffs[i] = t;
    }
    for i in 1..=ctx.d() {
        if let Some(k) = ctx.index_of(&Word::from_raw(vec![i as u8, i as u8])) {
            gen.coeffs[k] = 0.5 * t;
        }
    }
    gen.exp()
}

impl fmt::Debug for TensorElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (w, c) in self.terms() {
            m.entry(w, &c);
        }
        m.finish()
    }
}

impl PartialEq for TensorElement {
    fn eq(&self, other: &Self) -> bool {
        self.ctx.same_algebra(&other.ctx) && self.coeffs == other.coeffs
    }
}

// Operator sugar. These panic on mismatched algebras; use the `try_*`
// methods where contexts are not known to agree.
impl Add for &TensorElement {
    type Output = TensorElement;
    fn add(self, rhs: &TensorElement) -> TensorElement {
        self.try_add(rhs).expect("context mismatch in +")
    }
}

impl Sub for &TensorElement {
    type Output = TensorElement;
    fn sub(self, rhs: &TensorElement) -> TensorElement {
        self.try_sub(rhs).expect("context mismatch in -")
    }
}

impl Mul for &TensorElement {
    type Output = TensorElement;
    fn mul(self, rhs: &TensorElement) -> TensorElement {
        TensorElement::mul(self, rhs).expect("context mismatch in *")
    }
}

impl Mul<f64> for &TensorElement {
    type Output = TensorElement;
    fn mul(self, rhs: f64) -> TensorElement {
        self.scale(rhs)
    }
}

impl Neg for &TensorElement {
    type Output = TensorElement;
    fn neg(self) -> TensorElement {
        self.scale(-1.0)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct TermRepr {
    pub word: Vec<usize>,
    pub c: f64,
}

/// Wire form: `{"d":int,"m":int,"coeffs":[{"word":[ints],"c":float}]}`.
#[derive(Serialize, Deserialize)]
pub(crate) struct TensorElementRepr {
    pub d: usize,
    pub m: usize,
    pub coeffs: Vec<TermRepr>,
}

impl From<&TensorElement> for TensorElementRepr {
    fn from(x: &TensorElement) -> Self {
        TensorElementRepr {
            d: x.ctx.d(),
            m: x.ctx.m(),
            coeffs: x
                .terms()
                .filter(|(_, c)| c.abs() >= SERIALIZE_EPS)
                .map(|(w, c)| TermRepr {
                    word: w.letters().collect(),
                    c,
                })
                .collect(),
        }
    }
}

impl TensorElementRepr {
    pub fn into_element(self, ctx_cache: Option<&Arc<AlgebraContext>>) -> Result<TensorElement> {
        let ctx = match ctx_cache {
            Some(c) if c.d() == self.d && c.m() == self.m => c.clone(),
            _ => AlgebraContext::new(self.d, self.m)?,
        };
        let mut x = TensorElement::zero(&ctx);
        for term in self.coeffs {
            let w = Word::new(&term.word, ctx.d())?;
            let i = ctx.index_of(&w).ok_or_else(|| {
                CubatureError::Serde(format!("word {w} exceeds degree {}", ctx.m()))
            })?;
            x.coeffs[i] += term.c;
        }
        Ok(x)
    }
}

impl Serialize for TensorElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorElementRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TensorElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        TensorElementRepr::deserialize(d)?
            .into_element(None)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ctx(d: usize, m: usize) -> Arc<AlgebraContext> {
        AlgebraContext::new(d, m).unwrap()
    }

    fn w(letters: &[usize], d: usize) -> Word {
        Word::new(letters, d).unwrap()
    }

    #[test]
    fn product_concatenates_and_truncates() {
        let c = ctx(2, 2);
        let e1 = TensorElement::generator(&c, 1).unwrap();
        let e2 = TensorElement::generator(&c, 2).unwrap();
        let e12 = &e1 * &e2;
        assert_eq!(e12.coeff(&w(&[1, 2], 2)), 1.0);
        assert_eq!(e12.terms().count(), 1);
        assert_eq!((&e12 * &e1).max_abs(), 0.0);
    }

    #[test]
    fn exp_of_zero_is_one() {
        let c = ctx(2, 3);
        let z = TensorElement::zero(&c);
        assert_eq!(z.exp().unwrap(), TensorElement::one(&c));
        assert_eq!(TensorElement::one(&c).log().unwrap().max_abs(), 0.0);
    }

    #[test]
    fn exp_of_scaled_generator() {
        let c = ctx(2, 2);
        let t: f64 = 0.3;
        let x = TensorElement::generator(&c, 1).unwrap().scale(t.sqrt());
        let e = x.exp().unwrap();
        assert_abs_diff_eq!(e.constant(), 1.0);
        assert_abs_diff_eq!(e.coeff(&w(&[1], 2)), t.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(e.coeff(&w(&[1, 1], 2)), t / 2.0, epsilon = 1e-15);
        assert_eq!(e.terms().count(), 3);
        assert!(e.log().unwrap().distance(&x).unwrap() < 1e-15);
    }

    #[test]
    fn exp_rejects_constant_term() {
        let c = ctx(1, 2);
        assert!(matches!(
            TensorElement::one(&c).exp(),
            Err(CubatureError::Domain(_))
        ));
        assert!(matches!(
            TensorElement::zero(&c).log(),
            Err(CubatureError::Domain(_))
        ));
    }

    #[test]
    fn log_of_scaled_group_element() {
        let c = ctx(1, 3);
        let x = TensorElement::linear(&c, &[0.2, -0.7]).unwrap();
        let g = x.exp().unwrap().scale(2.5);
        let l = g.log().unwrap();
        assert_abs_diff_eq!(l.constant(), 2.5f64.ln(), epsilon = 1e-15);
        let mut expect = x.clone();
        expect.as_mut_slice()[0] = 2.5f64.ln();
        assert!(l.distance(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn dilate_examples() {
        let c = ctx(2, 3);
        let e0 = TensorElement::generator(&c, 0).unwrap();
        let s = 1.7;
        assert_abs_diff_eq!(
            e0.dilate(s).unwrap().coeff(&w(&[0], 2)),
            s * s,
            epsilon = 1e-15
        );
        assert!(e0.dilate(0.0).is_err());
        assert!(e0.dilate(-1.0).is_err());
    }

    #[test]
    fn bracket_examples() {
        let c = ctx(2, 2);
        let e1 = TensorElement::generator(&c, 1).unwrap();
        let e2 = TensorElement::generator(&c, 2).unwrap();
        let b = e1.bracket(&e2).unwrap();
        assert_eq!(b.coeff(&w(&[1, 2], 2)), 1.0);
        assert_eq!(b.coeff(&w(&[2, 1], 2)), -1.0);
        assert_eq!(e1.bracket(&e1).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn adjoint_examples() {
        let c = ctx(2, 2);
        let e1 = TensorElement::generator(&c, 1).unwrap();
        let e2 = TensorElement::generator(&c, 2).unwrap();
        let one = TensorElement::one(&c);
        assert!(TensorElement::adjoint(&one, &e1)
            .unwrap()
            .distance(&e1)
            .unwrap()
            < 1e-15);

        let b = 0.37;
        let g = e2.scale(b).exp().unwrap();
        let got = TensorElement::adjoint(&g, &e1).unwrap();
        let expect = &e1 + &e2.bracket(&e1).unwrap().scale(b);
        assert!(got.distance(&expect).unwrap() < 1e-15);
        assert!(TensorElement::adjoint(&TensorElement::zero(&c), &e1).is_err());
    }

    #[test]
    fn heat_element_low_degree() {
        let c = ctx(1, 3);
        let t = 0.4;
        let h = heat_element(&c, t).unwrap();
        let mut expect = TensorElement::one(&c);
        expect.as_mut_slice()[c.index_of(&w(&[0], 1)).unwrap()] = t;
        expect.as_mut_slice()[c.index_of(&w(&[1, 1], 1)).unwrap()] = t / 2.0;
        assert!(h.distance(&expect).unwrap() < 1e-16);
        assert!(heat_element(&c, 0.0).is_err());
    }

    #[test]
    fn heat_element_scales_by_dilation() {
        let c = ctx(2, 4);
        let t: f64 = 0.09;
        let a = heat_element(&c, t).unwrap();
        let b = heat_element(&c, 1.0).unwrap().dilate(t.sqrt()).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-15);
        assert_eq!(a.constant(), 1.0);
    }

    #[test]
    fn json_round_trip_and_shape() {
        let c = ctx(2, 2);
        let x = heat_element(&c, 0.5).unwrap();
        let s = x.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["d"], 2);
        assert_eq!(v["m"], 2);
        let words: Vec<Vec<usize>> = v["coeffs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| serde_json::from_value(t["word"].clone()).unwrap())
            .collect();
        assert_eq!(words, vec![vec![], vec![0], vec![1, 1], vec![2, 2]]);
        let back = TensorElement::from_json(Some(&c), &s).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn context_mismatch_is_an_error() {
        let a = TensorElement::one(&ctx(2, 2));
        let b = TensorElement::one(&ctx(2, 3));
        assert!(matches!(
            a.mul(&b),
            Err(CubatureError::ContextMismatch { .. })
        ));
        assert!(a.bracket(&b).is_err());
    }
}
