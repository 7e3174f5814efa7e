use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::word::Word;
use crate::error::{CubatureError, Result};

/// The truncated free nilpotent algebra with generators `e_0..e_d`, where
/// words of weighted degree above `m` vanish.
///
/// Holds the graded-lexicographic word basis and a precomputed product
/// table so that multiplication runs over dense coefficient slices.
pub struct AlgebraContext {
    d: usize,
    m: usize,
    basis: Vec<Word>,
    index: HashMap<Word, usize>,
    degrees: Vec<usize>,
    /// `degree_start[n]` is the first basis index of degree `n`;
    /// `degree_start[m + 1] == basis.len()`.
    degree_start: Vec<usize>,
    /// For each left basis index `i`: pairs `(j, k)` with `basis[i] * basis[j] == basis[k]`.
    products: Vec<Vec<(u32, u32)>>,
}

impl AlgebraContext {
    /// Largest truncation degree accepted; basis sizes explode beyond this.
    pub const MAX_DEGREE: usize = 10;

    pub fn new(d: usize, m: usize) -> Result<Arc<Self>> {
        if d == 0 {
            return Err(CubatureError::InvalidContext("d must be >= 1".into()));
        }
        if m == 0 || m > Self::MAX_DEGREE {
            return Err(CubatureError::InvalidContext(format!(
                "m must be in 1..={}",
                Self::MAX_DEGREE
            )));
        }

        let mut basis = vec![Word::empty()];
        let mut frontier = vec![Vec::<u8>::new()];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for w in &frontier {
                for a in 0..=d as u8 {
                    let mut nw = w.clone();
                    nw.push(a);
                    let word = Word::from_raw(nw.clone());
                    if word.degree() <= m {
                        basis.push(word);
                        next.push(nw);
                    }
                }
            }
            frontier = next;
        }
        basis.sort();

        let index: HashMap<Word, usize> = basis
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let degrees: Vec<usize> = basis.iter().map(Word::degree).collect();

        let mut degree_start = vec![basis.len(); m + 2];
        for (i, &deg) in degrees.iter().enumerate().rev() {
            degree_start[deg] = i;
        }
        for n in (0..=m).rev() {
            degree_start[n] = degree_start[n].min(degree_start[n + 1]);
        }

        let products = basis
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let end = degree_start[m - degrees[i] + 1];
                (0..end)
                    .map(|j| {
                        let k = index[&a.concat(&basis[j])];
                        (j as u32, k as u32)
                    })
                    .collect()
            })
            .collect();

        Ok(Arc::new(AlgebraContext {
            d,
            m,
            basis,
            index,
            degrees,
            degree_start,
            products,
        }))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Word] {
        &self.basis
    }

    pub fn index_of(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.degrees[i]
    }

    /// Basis index range of the degree-`n` words.
    pub fn degree_range(&self, n: usize) -> std::ops::Range<usize> {
        if n > self.m {
            return self.basis.len()..self.basis.len();
        }
        self.degree_start[n]..self.degree_start[n + 1]
    }

    pub fn same_algebra(&self, other: &AlgebraContext) -> bool {
        std::ptr::eq(self, other) || (self.d == other.d && self.m == other.m)
    }

    pub(crate) fn check_same(&self, other: &AlgebraContext) -> Result<()> {
        if self.same_algebra(other) {
            Ok(())
        } else {
            Err(CubatureError::ContextMismatch {
                left_d: self.d,
                left_m: self.m,
                right_d: other.d,
                right_m: other.m,
            })
        }
    }

    /// `out = a * b` on dense coefficient slices; `out` is overwritten.
    pub(crate) fn mul_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|c| *c = 0.0);
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for &(j, k) in &self.products[i] {
                out[k as usize] += ai * b[j as usize];
            }
        }
    }

    /// `exp(x)` for `x` with zero constant term, written into `out`.
    /// `scratch` must have length `dim`.
    pub(crate) fn exp_into(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        // Horner: 1 + x(1 + x/2(1 + ... (1 + x/m)))
        out.iter_mut().for_each(|c| *c = 0.0);
        out[0] = 1.0;
        for k in (1..=self.m).rev() {
            self.mul_into(x, out, scratch);
            let inv = 1.0 / k as f64;
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o = s * inv;
            }
            out[0] += 1.0;
        }
    }
}

impl fmt::Debug for AlgebraContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgebraContext")
            .field("d", &self.d)
            .field("m", &self.m)
            .field("dim", &self.dim())
            .finish()
    }
}
