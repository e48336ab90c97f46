//! Tensor type, seeded RNG, and a small reverse-mode autodiff graph with the
//! handful of operations the visual-system model needs.

mod graph;
mod kernels;
mod optim;
mod rng;
mod tensor;

pub use graph::{softmax, Graph, NodeId};
pub use optim::{Optimizer, OptimizerKind};
pub use rng::Rng;
pub use tensor::Tensor;

/// Glorot/Xavier uniform initialisation with the given fans.
pub fn glorot_uniform(dims: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
    Tensor::from_fn(dims, |_| rng.uniform(-limit, limit))
}
