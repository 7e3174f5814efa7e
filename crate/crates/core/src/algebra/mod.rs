//! Truncated free nilpotent algebra over generators `e_0..e_d`, with `e_0`
//! of degree two and `e_1..e_d` of degree one.

mod context;
mod element;
mod lie;
mod word;

pub use context::AlgebraContext;
pub use element::{heat_element, TensorElement, SERIALIZE_EPS};
pub use lie::{bracket_monomial, LieBasis, INDEPENDENCE_TOL};
pub use word::{word_degree, Word};
