//! Piecewise-linear paths in `R^{d+1}` and their truncated signatures.
//!
//! A linear segment with increment `Δ` has signature `exp(Σ Δ^i e_i)`, so the
//! signature of a piecewise-linear path is the ordered product of segment
//! exponentials and carries no quadrature error.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraContext, TensorElement};
use crate::error::{CubatureError, Result};

/// Tolerance on `t_end == 1` for [`scale_path`].
const UNIT_HORIZON_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub s: f64,
    pub x: Vec<f64>,
}

/// A continuous piecewise-linear trajectory `[0, t_end] -> R^{d+1}`.
/// Component 0 is the time-like coordinate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiecewisePath {
    t_end: f64,
    knots: Vec<Knot>,
}

#[derive(Deserialize)]
struct PathRepr {
    t_end: f64,
    knots: Vec<Knot>,
}

impl<'de> Deserialize<'de> for PiecewisePath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PathRepr::deserialize(d)?;
        PiecewisePath::new(r.t_end, r.knots).map_err(serde::de::Error::custom)
    }
}

impl PiecewisePath {
    pub fn new(t_end: f64, knots: Vec<Knot>) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(CubatureError::InvalidPath(format!(
                "t_end must be positive, got {t_end}"
            )));
        }
        if knots.len() < 2 {
            return Err(CubatureError::InvalidPath("need at least two knots".into()));
        }
        if knots[0].s != 0.0 {
            return Err(CubatureError::InvalidPath("first knot must be at s = 0".into()));
        }
        if knots[knots.len() - 1].s != t_end {
            return Err(CubatureError::InvalidPath("last knot must be at s = t_end".into()));
        }
        let dim = knots[0].x.len();
        if dim < 2 {
            return Err(CubatureError::InvalidPath(
                "points need a time component and at least one space component".into(),
            ));
        }
        for w in knots.windows(2) {
            if w[1].s.partial_cmp(&w[0].s) != Some(std::cmp::Ordering::Greater) {
                return Err(CubatureError::InvalidPath(
                    "knot times must be strictly increasing".into(),
                ));
            }
        }
        for k in &knots {
            if k.x.len() != dim {
                return Err(CubatureError::DimensionMismatch {
                    expected: dim,
                    got: k.x.len(),
                    what: "knot point",
                });
            }
            if k.x.iter().any(|v| !v.is_finite()) {
                return Err(CubatureError::InvalidPath("non-finite knot point".into()));
            }
        }
        Ok(PiecewisePath { t_end, knots })
    }

    /// Straight line from the origin with the given increment.
    pub fn line(t_end: f64, increment: &[f64]) -> Result<Self> {
        Self::from_increments(t_end, &[increment.to_vec()])
    }

    /// Path from the origin through equal-duration segments with the given
    /// increments.
    pub fn from_increments(t_end: f64, increments: &[Vec<f64>]) -> Result<Self> {
        if increments.is_empty() {
            return Err(CubatureError::InvalidPath("no segments".into()));
        }
        let n = increments.len();
        let dim = increments[0].len();
        let mut x = vec![0.0; dim];
        let mut knots = vec![Knot { s: 0.0, x: x.clone() }];
        for (k, inc) in increments.iter().enumerate() {
            if inc.len() != dim {
                return Err(CubatureError::DimensionMismatch {
                    expected: dim,
                    got: inc.len(),
                    what: "segment increment",
                });
            }
            x.iter_mut().zip(inc).for_each(|(a, b)| *a += b);
            let s = if k + 1 == n {
                t_end
            } else {
                t_end * (k + 1) as f64 / n as f64
            };
            knots.push(Knot { s, x: x.clone() });
        }
        Self::new(t_end, knots)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    /// `d + 1`, the number of coordinates including time.
    pub fn dim(&self) -> usize {
        self.knots[0].x.len()
    }

    pub fn num_segments(&self) -> usize {
        self.knots.len() - 1
    }

    /// Iterates over `(duration, increment)` per segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, Vec<f64>)> + '_ {
        self.knots.windows(2).map(|w| {
            let inc = w[1].x.iter().zip(&w[0].x).map(|(b, a)| b - a).collect();
            (w[1].s - w[0].s, inc)
        })
    }

    /// Total displacement `x(t_end) - x(0)`.
    pub fn increment(&self) -> Vec<f64> {
        let a = &self.knots[0].x;
        let b = &self.knots[self.knots.len() - 1].x;
        b.iter().zip(a).map(|(b, a)| b - a).collect()
    }

    /// Runs `self` then `other`, translating `other` to start where `self` ends.
    pub fn concat(&self, other: &PiecewisePath) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(CubatureError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
                what: "concatenated path",
            });
        }
        let end = &self.knots[self.knots.len() - 1].x;
        let start = &other.knots[0].x;
        let shift: Vec<f64> = end.iter().zip(start).map(|(e, s)| e - s).collect();
        let mut knots = self.knots.clone();
        for k in &other.knots[1..] {
            knots.push(Knot {
                s: self.t_end + k.s,
                x: k.x.iter().zip(&shift).map(|(a, b)| a + b).collect(),
            });
        }
        Self::new(self.t_end + other.t_end, knots)
    }

    /// The same trace run backwards over `[0, t_end]`.
    pub fn reversed(&self) -> Self {
        let knots: Vec<Knot> = self
            .knots
            .iter()
            .rev()
            .map(|k| Knot {
                s: self.t_end - k.s,
                x: k.x.clone(),
            })
            .collect();
        PiecewisePath {
            t_end: self.t_end,
            knots,
        }
    }
}

/// `exp(Σ Δ^i e_i)` for a single linear segment.
pub fn segment_signature(ctx: &Arc<AlgebraContext>, increment: &[f64]) -> Result<TensorElement> {
    TensorElement::linear(ctx, increment)?.exp()
}

/// Truncated signature by Chen's relation over the segments.
pub fn signature(ctx: &Arc<AlgebraContext>, path: &PiecewisePath) -> Result<TensorElement> {
    if path.dim() != ctx.d() + 1 {
        return Err(CubatureError::DimensionMismatch {
            expected: ctx.d() + 1,
            got: path.dim(),
            what: "path dimension",
        });
    }
    let mut acc = SignatureAccumulator::new(ctx);
    for (_, inc) in path.segments() {
        acc.push(&inc);
    }
    Ok(acc.finish())
}

/// Maps a horizon-1 path to horizon `t`: times and component 0 scale by
/// `t`, the space components by `√t`.
pub fn scale_path(path: &PiecewisePath, t: f64) -> Result<PiecewisePath> {
    if !(t.is_finite() && t > 0.0) {
        return Err(CubatureError::Domain(format!("scale factor must be positive, got {t}")));
    }
    if (path.t_end - 1.0).abs() > UNIT_HORIZON_TOL {
        return Err(CubatureError::InvalidPath(format!(
            "scaling expects a horizon-1 path, got t_end = {}",
            path.t_end
        )));
    }
    let sq = t.sqrt();
    let n = path.knots.len();
    let knots = path
        .knots
        .iter()
        .enumerate()
        .map(|(k, kn)| Knot {
            s: if k + 1 == n { t } else { kn.s * t },
            x: kn
                .x
                .iter()
                .enumerate()
                .map(|(i, v)| if i == 0 { v * t } else { v * sq })
                .collect(),
        })
        .collect();
    PiecewisePath::new(t, knots)
}

/// Streaming Chen product `S <- S · exp(Δ)` over dense slices, reusing
/// buffers. Used by the Monte Carlo signature oracle.
pub(crate) struct SignatureAccumulator {
    ctx: Arc<AlgebraContext>,
    sig: Vec<f64>,
    lin: Vec<f64>,
    seg: Vec<f64>,
    scratch: Vec<f64>,
    out: Vec<f64>,
    letter_index: Vec<usize>,
}

impl SignatureAccumulator {
    pub fn new(ctx: &Arc<AlgebraContext>) -> Self {
        let n = ctx.dim();
        let mut sig = vec![0.0; n];
        sig[0] = 1.0;
        let letter_index = (0..=ctx.d())
            .map(|i| {
                ctx.index_of(&crate::algebra::Word::letter(i))
                    .expect("generators are in the basis")
            })
            .collect();
        SignatureAccumulator {
            ctx: ctx.clone(),
            sig,
            lin: vec![0.0; n],
            seg: vec![0.0; n],
            scratch: vec![0.0; n],
            out: vec![0.0; n],
            letter_index,
        }
    }

    /// Multiplies in the segment with increment `inc` (length `d + 1`).
    pub fn push(&mut self, inc: &[f64]) {
        self.lin.iter_mut().for_each(|c| *c = 0.0);
        for (&idx, &v) in self.letter_index.iter().zip(inc) {
            self.lin[idx] = v;
        }
        self.ctx.exp_into(&self.lin, &mut self.seg, &mut self.scratch);
        self.ctx.mul_into(&self.sig, &self.seg, &mut self.out);
        std::mem::swap(&mut self.sig, &mut self.out);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sig
    }

    pub fn finish(self) -> TensorElement {
        TensorElement::from_dense(&self.ctx, self.sig).expect("accumulator has basis length")
    }
}
