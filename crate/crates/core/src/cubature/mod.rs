//! Cubature formulas on Wiener space.
//!
//! An expectation formula is a set of paths with positive weights whose
//! weighted signatures reproduce the heat element. A Greeks formula has
//! signed weights summing to zero and reproduces `Δ_√t(w) · heat`.

mod builtin;
mod nnls;
mod solve;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{heat_element, AlgebraContext, TensorElement};
use crate::error::{CubatureError, Result};
use crate::signature::{scale_path, signature, PiecewisePath};

pub use builtin::{
    expectation_degree3, expectation_degree5_d1, expectation_formula, greek_target,
    greeks_two_point,
};
pub use solve::{default_greeks_dictionary, greeks_solve, PRUNE_TOL};

/// Constructors refuse to return formulas with a larger moment residual.
pub const VERIFY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Expectation,
    Greeks,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormulaItem {
    pub weight: f64,
    pub path: PiecewisePath,
}

/// Weighted paths at horizon `t`.
///
/// For the Greeks flavor, `direction` holds the dilated Lie element
/// `Δ_√t(w)` and the target is `direction · heat_element(t)`.
#[derive(Clone, Debug)]
pub struct CubatureFormula {
    ctx: Arc<AlgebraContext>,
    t: f64,
    flavor: Flavor,
    direction: Option<TensorElement>,
    items: Vec<FormulaItem>,
}

/// Signed-weight formula for a first derivative.
pub type GreeksFormula = CubatureFormula;

/// Per-degree max-abs residual of `Σ w_j S(path_j) − target`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub per_degree: Vec<f64>,
    pub max: f64,
}

impl MomentReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max < tol
    }
}

impl CubatureFormula {
    pub(crate) fn from_parts(
        ctx: &Arc<AlgebraContext>,
        t: f64,
        flavor: Flavor,
        direction: Option<TensorElement>,
        items: Vec<FormulaItem>,
    ) -> Self {
        CubatureFormula {
            ctx: ctx.clone(),
            t,
            flavor,
            direction,
            items,
        }
    }

    pub fn context(&self) -> &Arc<AlgebraContext> {
        &self.ctx
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn direction(&self) -> Option<&TensorElement> {
        self.direction.as_ref()
    }

    pub fn items(&self) -> &[FormulaItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.items.iter().map(|it| it.weight).sum()
    }

    pub fn abs_weight_sum(&self) -> f64 {
        self.items.iter().map(|it| it.weight.abs()).sum()
    }

    /// The element this formula is meant to reproduce.
    pub fn target(&self) -> Result<TensorElement> {
        let heat = heat_element(&self.ctx, self.t)?;
        match (&self.flavor, &self.direction) {
            (Flavor::Expectation, _) => Ok(heat),
            (Flavor::Greeks, Some(dir)) => dir.mul(&heat),
            (Flavor::Greeks, None) => Err(CubatureError::Config(
                "greeks formula without direction".into(),
            )),
        }
    }

    /// `Σ w_j · signature(path_j)`.
    pub fn moment(&self) -> Result<TensorElement> {
        let sigs: Vec<TensorElement> = self
            .items
            .par_iter()
            .map(|it| signature(&self.ctx, &it.path))
            .collect::<Result<_>>()?;
        let mut acc = TensorElement::zero(&self.ctx);
        for (it, s) in self.items.iter().zip(&sigs) {
            acc.axpy(it.weight, s)?;
        }
        Ok(acc)
    }

    /// Residual against the formula's own target.
    pub fn residuals(&self) -> Result<MomentReport> {
        verify_moments(self, &self.target()?)
    }

    /// Errors unless the formula matches its target below [`VERIFY_TOL`].
    pub(crate) fn verified(self) -> Result<Self> {
        let r = self.residuals()?;
        if r.passes(VERIFY_TOL) {
            Ok(self)
        } else {
            Err(CubatureError::Verification {
                residual: r.max,
                tolerance: VERIFY_TOL,
            })
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&FormulaRepr::from(self))?)
    }

    /// Parses and re-verifies a formula.
    pub fn from_json(s: &str) -> Result<Self> {
        let repr: FormulaRepr = serde_json::from_str(s)?;
        repr.into_formula()?.verified()
    }
}

/// Max-abs residual per degree of `Σ w_j S(path_j) − target`.
pub fn verify_moments(formula: &CubatureFormula, target: &TensorElement) -> Result<MomentReport> {
    formula.ctx.check_same(target.context())?;
    let diff = formula.moment()?.try_sub(target)?;
    let per_degree = diff.max_abs_by_degree();
    let max = per_degree.iter().copied().fold(0.0, f64::max);
    Ok(MomentReport { per_degree, max })
}

/// Moves a horizon-1 formula to horizon `t` by scaling every path.
pub fn rescale_formula(formula: &CubatureFormula, t: f64) -> Result<CubatureFormula> {
    if !(t.is_finite() && t > 0.0) {
        return Err(CubatureError::Domain(format!("horizon must be positive, got {t}")));
    }
    if (formula.t - 1.0).abs() > 1e-12 {
        return Err(CubatureError::Domain(format!(
            "rescaling expects a horizon-1 formula, got t = {}",
            formula.t
        )));
    }
    let items = formula
        .items
        .iter()
        .map(|it| {
            Ok(FormulaItem {
                weight: it.weight,
                path: scale_path(&it.path, t)?,
            })
        })
        .collect::<Result<_>>()?;
    let direction = match &formula.direction {
        Some(d) => Some(d.dilate(t.sqrt())?),
        None => None,
    };
    CubatureFormula::from_parts(&formula.ctx, t, formula.flavor, direction, items).verified()
}

#[derive(Serialize, Deserialize)]
struct ItemRepr {
    w: f64,
    path: PiecewisePath,
}

#[derive(Serialize, Deserialize)]
struct FormulaRepr {
    d: usize,
    m: usize,
    t: f64,
    flavor: Flavor,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    direction: Option<TensorElement>,
    items: Vec<ItemRepr>,
}

impl From<&CubatureFormula> for FormulaRepr {
    fn from(f: &CubatureFormula) -> Self {
        FormulaRepr {
            d: f.ctx.d(),
            m: f.ctx.m(),
            t: f.t,
            flavor: f.flavor,
            direction: f.direction.clone(),
            items: f
                .items
                .iter()
                .map(|it| ItemRepr {
                    w: it.weight,
                    path: it.path.clone(),
                })
                .collect(),
        }
    }
}

impl FormulaRepr {
    fn into_formula(self) -> Result<CubatureFormula> {
        let ctx = AlgebraContext::new(self.d, self.m)?;
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(CubatureError::Serde(format!("bad horizon {}", self.t)));
        }
        let direction = match (self.flavor, self.direction) {
            (Flavor::Greeks, Some(dir)) => {
                if dir.context().d() != self.d || dir.context().m() != self.m {
                    return Err(CubatureError::Serde(
                        "direction (d, m) differs from formula".into(),
                    ));
                }
                Some(TensorElement::from_dense(&ctx, dir.into_dense())?)
            }
            (Flavor::Greeks, None) => {
                return Err(CubatureError::Serde("greeks formula needs a direction".into()))
            }
            (Flavor::Expectation, _) => None,
        };
        for it in &self.items {
            if it.path.dim() != self.d + 1 {
                return Err(CubatureError::DimensionMismatch {
                    expected: self.d + 1,
                    got: it.path.dim(),
                    what: "formula path",
                });
            }
        }
        if self.flavor == Flavor::Expectation && self.items.iter().any(|it| it.w <= 0.0) {
            return Err(CubatureError::Serde(
                "expectation weights must be positive".into(),
            ));
        }
        let items = self
            .items
            .into_iter()
            .map(|it| FormulaItem {
                weight: it.w,
                path: it.path,
            })
            .collect();
        Ok(CubatureFormula::from_parts(&ctx, self.t, self.flavor, direction, items))
    }
}
