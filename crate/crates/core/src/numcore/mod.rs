//! Dense tensors, a recording autodiff graph, and the Adam optimizer.

mod adam;
mod graph;
pub(crate) mod kernels;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use graph::{Graph, Var};
pub use tensor::{Real, Tensor};
