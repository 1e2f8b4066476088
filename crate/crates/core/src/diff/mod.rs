//! Minimal reverse-mode automatic differentiation and the neural building
//! blocks used by the predictors.

pub mod checkpoint;
pub mod graph;
pub mod nn;
pub mod optim;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use graph::{Gradients, Graph, Var, LEAKY_SLOPE};
pub use nn::{Activation, GraphAttention, GruCell, Mlp};
pub use optim::{Binding, ParamGrads, ParamSet};
pub use tensor::Tensor;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The PRNG used for every seeded draw in the crate (ChaCha8, stable across
/// platforms).
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
