//! Small reverse-mode automatic differentiation engine over dense matrices.

mod adam;
mod graph;
pub mod nn;
mod params;
mod tensor;

pub use adam::Adam;
pub use graph::{stable_sigmoid, stable_softplus, Gradients, Graph, Var};
pub use params::{Binder, ParamGrads, ParamId, ParamStore};
pub use tensor::Tensor;
