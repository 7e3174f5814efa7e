//! Cubature estimates of expectations and first-order Greeks, one step or
//! iterated over a time partition.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{AlgebraContext, TensorElement, Word};
use crate::cubature::{
    default_greeks_dictionary, expectation_formula, greeks_solve, greeks_two_point,
    rescale_formula, CubatureFormula,
};
use crate::error::{CubatureError, Result};
use crate::payoff::Payoff;
use crate::sde::{decompose_direction, evolve, lie_direction, Decomposition, VectorFieldSystem, DEFAULT_STEPS};

/// Default cap on the number of tree leaves.
pub const DEFAULT_LEAF_CAP: u128 = 1_000_000;

/// Tree levels below this depth fan out across threads.
const PARALLEL_DEPTH: usize = 4;

/// Σ λ_j f(Y_t^y(ω_j)) with the built-in expectation formula of degree `m_prime`.
pub fn expectation_one_step(
    system: &VectorFieldSystem,
    f: &Payoff,
    y: &[f64],
    t: f64,
    m_prime: usize,
) -> Result<f64> {
    let ctx = AlgebraContext::new(system.d(), m_prime)?;
    let formula = expectation_formula(&ctx, t)?;
    let vals = formula
        .items()
        .iter()
        .map(|it| Ok(it.weight * f.eval(&evolve(system, y, &it.path, DEFAULT_STEPS)?)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.iter().sum())
}

#[derive(Clone, Debug, Serialize)]
pub struct GreekResult {
    pub estimate: f64,
    /// Number of tree leaves, i.e. the product of the stage formula sizes.
    pub paths_evaluated: u128,
    /// Max moment residual of each stage formula, stage 0 first.
    pub formula_residuals: Vec<f64>,
    /// Highest bracket degree used by the direction.
    pub k: usize,
    /// Euclidean norm of the Lie direction's coefficients; the stage-0
    /// formula is built for the unit direction and scaled back by this.
    pub direction_norm: f64,
}

/// The stage-0 Greeks formula for direction `v` at `y`, over horizon `t`.
#[derive(Clone, Debug)]
pub struct GreekPlan {
    pub decomposition: Decomposition,
    pub direction: TensorElement,
    pub direction_norm: f64,
    pub formula: Option<CubatureFormula>,
}

impl GreekPlan {
    pub fn new(system: &VectorFieldSystem, y: &[f64], v: &[f64], t: f64, m: usize) -> Result<Self> {
        let decomposition = decompose_direction(system, y, v, t, m)?;
        let ctx = AlgebraContext::new(system.d(), m)?;
        let direction = lie_direction(&ctx, &decomposition.terms)?;
        let norm = direction.as_slice().iter().map(|c| c * c).sum::<f64>().sqrt();
        let formula = if norm == 0.0 {
            None
        } else {
            Some(greeks_formula(&ctx, &direction.scale(1.0 / norm), t)?)
        };
        Ok(GreekPlan {
            decomposition,
            direction,
            direction_norm: norm,
            formula,
        })
    }
}

/// Two-point formula when it applies, else the moment solver on the
/// default dictionary at horizon 1, rescaled to `t`.
pub fn greeks_formula(ctx: &Arc<AlgebraContext>, w: &TensorElement, t: f64) -> Result<CubatureFormula> {
    let degree_one = w
        .terms()
        .all(|(word, c)| word.degree() == 1 || c.abs() <= 1e-14);
    if ctx.m() <= 2 && degree_one {
        return greeks_two_point(ctx, w, t);
    }
    let dict = default_greeks_dictionary(ctx.d(), ctx.m(), 1.0)?;
    let unit = greeks_solve(ctx, w, 1.0, &dict)?;
    rescale_formula(&unit, t)
}

/// d/dε E f(Y_t^{y+εv}) ≈ Σ μ_j f(Y_t^y(ω_j)).
pub fn greek_one_step(
    system: &VectorFieldSystem,
    f: &Payoff,
    y: &[f64],
    v: &[f64],
    t: f64,
    m: usize,
) -> Result<GreekResult> {
    let req = GreekRequest::new(system, f.clone(), y.to_vec(), v.to_vec(), t, m, m, vec![t])?;
    greek_iterated(&req)
}

/// Parameters of an iterated Greek estimate.
#[derive(Clone, Debug)]
pub struct GreekRequest<'a> {
    pub system: &'a VectorFieldSystem,
    pub payoff: Payoff,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
    pub m: usize,
    pub m_prime: usize,
    /// `s_0, s_1, ..., s_k`; the Greek acts on `[0, s_0]`.
    pub partition: Vec<f64>,
    pub steps_per_segment: usize,
    pub leaf_cap: u128,
}

impl<'a> GreekRequest<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        system: &'a VectorFieldSystem,
        payoff: Payoff,
        y: Vec<f64>,
        v: Vec<f64>,
        t: f64,
        m: usize,
        m_prime: usize,
        partition: Vec<f64>,
    ) -> Result<Self> {
        let req = GreekRequest {
            system,
            payoff,
            y,
            v,
            t,
            m,
            m_prime,
            partition,
            steps_per_segment: DEFAULT_STEPS,
            leaf_cap: DEFAULT_LEAF_CAP,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if self.partition.is_empty() {
            return Err(CubatureError::Config("partition is empty".into()));
        }
        if self.partition.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(CubatureError::Config("partition steps must be positive".into()));
        }
        let total: f64 = self.partition.iter().sum();
        if (total - self.t).abs() > 1e-12 * self.t.max(1.0) {
            return Err(CubatureError::Config(format!(
                "partition sums to {total}, expected t = {}",
                self.t
            )));
        }
        if self.y.len() != self.system.n() {
            return Err(CubatureError::DimensionMismatch {
                expected: self.system.n(),
                got: self.y.len(),
                what: "initial state",
            });
        }
        Ok(())
    }
}

/// Greek over `[0, s_0]` applied to the expectation tree over the remaining
/// partition steps. Estimate is `Σ_leaves (Π weights) f(leaf state)`.
pub fn greek_iterated(req: &GreekRequest) -> Result<GreekResult> {
    req.validate()?;
    let s0 = req.partition[0];
    let plan = GreekPlan::new(req.system, &req.y, &req.v, s0, req.m)?;

    let ectx = AlgebraContext::new(req.system.d(), req.m_prime)?;
    let stages: Vec<CubatureFormula> = req.partition[1..]
        .iter()
        .map(|&s| expectation_formula(&ectx, s))
        .collect::<Result<_>>()?;

    let mut residuals = Vec::with_capacity(req.partition.len());
    let Some(g) = &plan.formula else {
        // Zero direction: the derivative is exactly zero.
        residuals.push(0.0);
        for s in &stages {
            residuals.push(s.residuals()?.max);
        }
        return Ok(GreekResult {
            estimate: 0.0,
            paths_evaluated: 0,
            formula_residuals: residuals,
            k: plan.decomposition.k,
            direction_norm: 0.0,
        });
    };
    residuals.push(g.residuals()?.max);
    for s in &stages {
        residuals.push(s.residuals()?.max);
    }

    let mut leaves: u128 = g.len() as u128;
    for s in &stages {
        leaves = leaves.saturating_mul(s.len() as u128);
    }
    if leaves > req.leaf_cap {
        return Err(CubatureError::BudgetExceeded {
            required: leaves,
            cap: req.leaf_cap,
        });
    }

    let tree = Tree {
        system: req.system,
        payoff: &req.payoff,
        stages: &stages,
        steps: req.steps_per_segment,
    };
    let sum = tree.weighted(g, &req.y, 0)?;
    Ok(GreekResult {
        estimate: plan.direction_norm * sum,
        paths_evaluated: leaves,
        formula_residuals: residuals,
        k: plan.decomposition.k,
        direction_norm: plan.direction_norm,
    })
}

struct Tree<'a> {
    system: &'a VectorFieldSystem,
    payoff: &'a Payoff,
    stages: &'a [CubatureFormula],
    steps: usize,
}

impl Tree<'_> {
    /// `Σ_j w_j · value(evolve(y, ω_j), level + 1)`, summed in item order.
    fn weighted(&self, formula: &CubatureFormula, y: &[f64], level: usize) -> Result<f64> {
        let child = |it: &crate::cubature::FormulaItem| -> Result<f64> {
            let z = evolve(self.system, y, &it.path, self.steps)?;
            Ok(it.weight * self.value(&z, level)?)
        };
        let vals: Vec<f64> = if level < PARALLEL_DEPTH {
            formula.items().par_iter().map(child).collect::<Result<_>>()?
        } else {
            formula.items().iter().map(child).collect::<Result<_>>()?
        };
        Ok(vals.iter().sum())
    }

    fn value(&self, z: &[f64], level: usize) -> Result<f64> {
        match self.stages.get(level) {
            Some(next) => self.weighted(next, z, level + 1),
            None => Ok(self.payoff.eval(z)),
        }
    }
}

/// `s_0` followed by the steps between `t_i = s_0 + (t − s_0)(1 − (1 − i/k)^γ)`.
pub fn gamma_partition(t: f64, s0: f64, k: usize, gamma: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(CubatureError::Config("k must be >= 1".into()));
    }
    if !(gamma.is_finite() && gamma >= 1.0) {
        return Err(CubatureError::Config(format!("gamma must be >= 1, got {gamma}")));
    }
    if !(t.is_finite() && s0 > 0.0 && s0 < t) {
        return Err(CubatureError::Config(format!(
            "need 0 < s0 < t, got s0 = {s0}, t = {t}"
        )));
    }
    let knot = |i: usize| s0 + (t - s0) * (1.0 - (1.0 - i as f64 / k as f64).powf(gamma));
    let mut steps = vec![s0];
    for i in 1..k {
        steps.push(knot(i) - knot(i - 1));
    }
    let used: f64 = steps.iter().sum();
    steps.push(t - used);
    Ok(steps)
}

/// The bracket words carrying nonzero coefficients, for reporting.
pub fn active_words(dec: &Decomposition) -> Vec<(Word, f64)> {
    dec.terms.iter().filter(|(_, c)| *c != 0.0).cloned().collect()
}
