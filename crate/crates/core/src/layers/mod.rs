//! Equivariant and invariant polynomial layers, activations and stacks.

mod activation;
mod blocks;
mod equivariant;
mod invariant;
mod io;
mod stack;

pub use activation::Activation;
pub use blocks::{BlockSpec, Blocks};
pub use equivariant::{
    equivariant_forward, equivariant_layout, equivariant_param_count, init_equivariant, EquivariantParams,
};
pub use invariant::{init_invariant, invariant_forward, invariant_layout, invariant_param_count, InvariantParams};
pub use io::{
    equivariant_to_json, invariant_to_json, load_params, params_from_str, save_params, LayerParams, PARAMS_FORMAT,
};
pub use stack::{stack_forward, Stack};
