use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CubatureError, Result};

/// A vector field `R^N -> R^N`, writing its value into the output slice.
pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A Jacobian `R^N -> R^{N×N}`, written row-major into the output slice.
pub type JacobianFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Central finite-difference step for Jacobians and nested brackets.
pub const FD_STEP: f64 = 1e-5;

/// Stratonovich system `dY = V_0(Y) dt + Σ_{i>=1} V_i(Y) ∘ dB^i` on `R^N`.
#[derive(Clone)]
pub struct VectorFieldSystem {
    name: String,
    n: usize,
    fields: Vec<FieldFn>,
    jacobians: Vec<Option<JacobianFn>>,
    finite_differences: bool,
}

impl VectorFieldSystem {
    /// `fields[0]` is the drift `V_0`; `fields[1..]` are the diffusion
    /// fields. `jacobians` is either empty or has one entry per field.
    pub fn new(
        name: impl Into<String>,
        n: usize,
        fields: Vec<FieldFn>,
        jacobians: Vec<Option<JacobianFn>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(CubatureError::Config("state dimension must be >= 1".into()));
        }
        if fields.len() < 2 {
            return Err(CubatureError::Config(
                "need a drift and at least one diffusion field".into(),
            ));
        }
        let jacobians = if jacobians.is_empty() {
            vec![None; fields.len()]
        } else {
            jacobians
        };
        if jacobians.len() != fields.len() {
            return Err(CubatureError::DimensionMismatch {
                expected: fields.len(),
                got: jacobians.len(),
                what: "jacobian list",
            });
        }
        Ok(VectorFieldSystem {
            name: name.into(),
            n,
            fields,
            jacobians,
            finite_differences: true,
        })
    }

    /// Disables the finite-difference fallback for missing Jacobians.
    pub fn without_finite_differences(mut self) -> Self {
        self.finite_differences = false;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// State dimension `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of Brownian drivers `d`.
    pub fn d(&self) -> usize {
        self.fields.len() - 1
    }

    /// Shared handle to field `V_i`.
    pub fn field(&self, i: usize) -> FieldFn {
        self.fields[i].clone()
    }

    pub fn has_analytic_jacobian(&self, i: usize) -> bool {
        self.jacobians[i].is_some()
    }

    pub fn eval_into(&self, i: usize, y: &[f64], out: &mut [f64]) {
        (self.fields[i])(y, out)
    }

    pub fn eval(&self, i: usize, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.eval_into(i, y, &mut out);
        out
    }

    /// Row-major Jacobian of `V_i` at `y`, analytic when available.
    pub fn jacobian_into(&self, i: usize, y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.jacobians[i] {
            Some(j) => {
                j(y, out);
                Ok(())
            }
            None if self.finite_differences => {
                let f = &self.fields[i];
                fd_jacobian(self.n, |x, o| f(x, o), y, out);
                Ok(())
            }
            None => Err(CubatureError::MissingJacobian { field: i }),
        }
    }

    /// Row-major Jacobian by central differences only.
    pub fn fd_jacobian(&self, i: usize, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        let f = &self.fields[i];
        fd_jacobian(self.n, |x, o| f(x, o), y, &mut out);
        out
    }

    /// Itô drift `V_0 + ½ Σ_{i>=1} dV_i · V_i`.
    pub fn ito_drift_into(&self, y: &[f64], out: &mut [f64], scratch: &mut ItoScratch) -> Result<()> {
        self.eval_into(0, y, out);
        for i in 1..self.fields.len() {
            self.eval_into(i, y, &mut scratch.v);
            self.jacobian_into(i, y, &mut scratch.jac)?;
            for (o, row) in out.iter_mut().zip(scratch.jac.chunks_exact(self.n)) {
                let s: f64 = row.iter().zip(&scratch.v).map(|(a, b)| a * b).sum();
                *o += 0.5 * s;
            }
        }
        Ok(())
    }

    pub fn black_scholes(r: f64, sigma: f64) -> Self {
        let mu = r - 0.5 * sigma * sigma;
        let fields: Vec<FieldFn> = vec![
            Arc::new(move |y, o| o[0] = mu * y[0]),
            Arc::new(move |y, o| o[0] = sigma * y[0]),
        ];
        let jacobians: Vec<Option<JacobianFn>> = vec![
            Some(Arc::new(move |_, o| o[0] = mu)),
            Some(Arc::new(move |_, o| o[0] = sigma)),
        ];
        Self::new("black_scholes", 1, fields, jacobians).expect("valid built-in model")
    }

    /// `V_0 = 0`, `V_1 = (1, 0)`, `V_2 = (0, x)` on `R^2`.
    pub fn heisenberg_toy() -> Self {
        let fields: Vec<FieldFn> = vec![
            Arc::new(|_, o| o.fill(0.0)),
            Arc::new(|_, o| {
                o[0] = 1.0;
                o[1] = 0.0;
            }),
            Arc::new(|y, o| {
                o[0] = 0.0;
                o[1] = y[0];
            }),
        ];
        let jacobians: Vec<Option<JacobianFn>> = vec![
            Some(Arc::new(|_, o| o.fill(0.0))),
            Some(Arc::new(|_, o| o.fill(0.0))),
            Some(Arc::new(|_, o| {
                o.fill(0.0);
                o[2] = 1.0;
            })),
        ];
        Self::new("heisenberg_toy", 2, fields, jacobians).expect("valid built-in model")
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        match *cfg {
            ModelConfig::BlackScholes { r, sigma } => {
                if !(sigma.is_finite() && sigma > 0.0 && r.is_finite()) {
                    return Err(CubatureError::Config(format!(
                        "black_scholes needs finite r and sigma > 0, got r={r}, sigma={sigma}"
                    )));
                }
                Ok(Self::black_scholes(r, sigma))
            }
            ModelConfig::HeisenbergToy => Ok(Self::heisenberg_toy()),
        }
    }
}

/// Buffers for [`VectorFieldSystem::ito_drift_into`].
pub struct ItoScratch {
    v: Vec<f64>,
    jac: Vec<f64>,
}

impl ItoScratch {
    pub fn new(n: usize) -> Self {
        ItoScratch {
            v: vec![0.0; n],
            jac: vec![0.0; n * n],
        }
    }
}

impl fmt::Debug for VectorFieldSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFieldSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("d", &self.d())
            .finish()
    }
}

/// Built-in model selection as read from a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "snake_case")]
pub enum ModelConfig {
    BlackScholes { r: f64, sigma: f64 },
    HeisenbergToy,
}

pub(crate) fn fd_jacobian(n: usize, f: impl Fn(&[f64], &mut [f64]), y: &[f64], out: &mut [f64]) {
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for c in 0..n {
        let h = FD_STEP * y[c].abs().max(1.0);
        yp[c] = y[c] + h;
        f(&yp, &mut fp);
        yp[c] = y[c] - h;
        f(&yp, &mut fm);
        yp[c] = y[c];
        for r in 0..n {
            out[r * n + c] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_jacobians_match_differences() {
        let points = [[0.3, -1.2], [1.7, 0.4], [-2.0, 2.5]];
        let sys = VectorFieldSystem::heisenberg_toy();
        for y in points {
            for i in 0..=2 {
                let mut a = vec![0.0; 4];
                sys.jacobian_into(i, &y, &mut a).unwrap();
                let f = sys.fd_jacobian(i, &y);
                for (x, z) in a.iter().zip(&f) {
                    assert!((x - z).abs() <= 1e-6 * x.abs().max(1.0));
                }
            }
        }
        let bs = VectorFieldSystem::black_scholes(0.05, 0.3);
        for y in [0.5, 1.0, 3.0] {
            for i in 0..=1 {
                let mut a = [0.0];
                bs.jacobian_into(i, &[y], &mut a).unwrap();
                let f = bs.fd_jacobian(i, &[y]);
                assert!((a[0] - f[0]).abs() <= 1e-6 * a[0].abs().max(1.0));
            }
        }
    }

    #[test]
    fn missing_jacobian_without_fallback() {
        let fields: Vec<FieldFn> = vec![Arc::new(|_, o| o[0] = 0.0), Arc::new(|y, o| o[0] = y[0])];
        let sys = VectorFieldSystem::new("plain", 1, fields, vec![])
            .unwrap()
            .without_finite_differences();
        let mut out = [0.0];
        assert_eq!(
            sys.jacobian_into(1, &[1.0], &mut out),
            Err(CubatureError::MissingJacobian { field: 1 })
        );
    }

    #[test]
    fn ito_drift_of_black_scholes() {
        let (r, s) = (0.05, 0.3);
        let sys = VectorFieldSystem::black_scholes(r, s);
        let mut out = [0.0];
        sys.ito_drift_into(&[2.0], &mut out, &mut ItoScratch::new(1)).unwrap();
        assert!((out[0] - r * 2.0).abs() < 1e-15);
    }

    #[test]
    fn model_config_json() {
        let c: ModelConfig =
            serde_json::from_str(r#"{"model":"black_scholes","params":{"r":0.05,"sigma":0.3}}"#)
                .unwrap();
        assert_eq!(c, ModelConfig::BlackScholes { r: 0.05, sigma: 0.3 });
        let h: ModelConfig = serde_json::from_str(r#"{"model":"heisenberg_toy"}"#).unwrap();
        assert_eq!(h, ModelConfig::HeisenbergToy);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"model":"nope"}"#).is_err());
        let bad = ModelConfig::BlackScholes { r: 0.0, sigma: -1.0 };
        assert!(VectorFieldSystem::from_config(&bad).is_err());
    }
}
