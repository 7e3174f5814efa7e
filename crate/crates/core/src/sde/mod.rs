//! Vector-field systems, flows along driving paths, and Lie brackets.

mod bracket;
mod flow;
mod system;

pub use bracket::{
    bracket_degree_cap, bracket_evaluate, bracket_vf, decompose_direction, decomposition_words,
    lie_direction, BracketTable, Decomposition, FieldExpr,
};
pub use flow::{evolve, evolve_with_jacobian, first_variation, DEFAULT_STEPS};
pub use system::{FieldFn, ItoScratch, JacobianFn, ModelConfig, VectorFieldSystem, FD_STEP};
