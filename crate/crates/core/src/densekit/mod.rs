//! Minimal dense tensor substrate: shaped `f64` arrays, per-channel matrix
//! products, einsum-style contractions and a seeded generator.

mod einsum;
mod matmul;
mod rng;
mod tensor;

pub use einsum::contract;
pub use matmul::{batched_matmul, batched_matvec, channel_matmul, matmul_shared_left, matmul_shared_right};
pub use rng::{derive_seed, Rng};
pub use tensor::{max_rel_diff, Tensor};
