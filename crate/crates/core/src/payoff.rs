use std::fmt;
use std::sync::Arc;

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// User-supplied payoff.
pub type PayoffFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A payoff function `R^N -> R` applied to terminal states.
#[derive(Clone)]
pub enum Payoff {
    /// `y[0]`.
    Identity,
    /// `y[i]`.
    Coordinate(usize),
    /// `(y[0] − K)^+`.
    Call { strike: f64 },
    /// `(y[0] − K)^+` convolved with a centered Gaussian of width `eps`:
    /// `(x − K) Φ((x − K)/ε) + ε φ((x − K)/ε)`.
    SmoothedCall { strike: f64, eps: f64 },
    Custom {
        name: String,
        f: PayoffFn,
    },
}

impl Payoff {
    pub fn custom(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Payoff::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Payoff::Identity => y[0],
            Payoff::Coordinate(i) => y[*i],
            Payoff::Call { strike } => (y[0] - strike).max(0.0),
            Payoff::SmoothedCall { strike, eps } => smoothed_call(y[0], *strike, *eps),
            Payoff::Custom { f, .. } => f(y),
        }
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

pub(crate) fn smoothed_call(x: f64, strike: f64, eps: f64) -> f64 {
    let z = (x - strike) / eps;
    let n = std_normal();
    (x - strike) * n.cdf(z) + eps * n.pdf(z)
}

/// Derivative of [`smoothed_call`] in `x`: `Φ((x − K)/ε)`.
pub(crate) fn smoothed_call_slope(x: f64, strike: f64, eps: f64) -> f64 {
    std_normal().cdf((x - strike) / eps)
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Identity => write!(f, "Identity"),
            Payoff::Coordinate(i) => write!(f, "Coordinate({i})"),
            Payoff::Call { strike } => write!(f, "Call {{ strike: {strike} }}"),
            Payoff::SmoothedCall { strike, eps } => {
                write!(f, "SmoothedCall {{ strike: {strike}, eps: {eps} }}")
            }
            Payoff::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}
