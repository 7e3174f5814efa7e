pub mod algebra;
pub mod cubature;
pub mod error;
pub mod greeks;
pub mod oracle;
pub mod payoff;
pub mod sde;
pub mod signature;

pub use algebra::{heat_element, AlgebraContext, LieBasis, TensorElement, Word};
pub use cubature::{CubatureFormula, Flavor, GreeksFormula};
pub use error::{CubatureError, Result};
pub use greeks::{
    expectation_one_step, gamma_partition, greek_iterated, greek_one_step, GreekRequest,
    GreekResult,
};
pub use oracle::{McConfig, McEstimate};
pub use payoff::Payoff;
pub use sde::{ModelConfig, VectorFieldSystem};
pub use signature::{scale_path, signature, PiecewisePath};
