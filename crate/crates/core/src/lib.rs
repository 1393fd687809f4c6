//! Monomial-group equivariant polynomial layers over neural-network weight spaces.
//!
//! A [`WeightObject`] holds the weights and biases of a fully connected
//! network (optionally with `d` channels per entry and a batch axis). The
//! group of per-layer scaled permutations acts on it without changing the
//! network function; the layers in [`layers`] commute with that action or
//! ignore it.

pub mod densekit;
pub mod error;
pub mod fitting;
pub mod layers;
pub mod monomial;
pub mod netfunc;
pub mod oracle;
pub mod stableterms;
pub mod weightspace;

pub use densekit::{contract, max_rel_diff, Rng, Tensor};
pub use error::{Error, Result};
pub use layers::{Activation, EquivariantParams, InvariantParams, Stack};
pub use monomial::{GroupElement, MonomialElement, Variant};
pub use stableterms::{PsiParams, StableTermSet};
pub use weightspace::{Distribution, WeightObject, WeightSpec};
