//! Shared inputs for the benchmarks.

use magep_core::layers::{init_equivariant, init_invariant};
use magep_core::weightspace::random_weights;
use magep_core::{Distribution, EquivariantParams, InvariantParams, Rng, WeightObject, WeightSpec};

pub struct Fixture {
    pub spec: WeightSpec,
    pub equivariant: EquivariantParams,
    pub invariant: InvariantParams,
    pub input: WeightObject,
}

/// Layers with `d -> e` channels and a batch of `batch` inputs, all widths equal to `width`.
pub fn fixture(layers: usize, width: usize, d: usize, e: usize, batch: usize, seed: u64) -> Fixture {
    let spec = WeightSpec::new(vec![width; layers + 1], d).expect("valid widths");
    let mut rng = Rng::new(seed);
    let equivariant = init_equivariant(&spec, d, e, &mut rng, 1.0).expect("valid layer");
    let invariant = init_invariant(&spec, d, e, 2, &mut rng, 1.0).expect("valid layer");
    let input = random_weights(
        &spec,
        &mut rng,
        Distribution::Uniform { lo: -1.0, hi: 1.0 },
        Some(batch),
    )
    .expect("valid distribution");
    Fixture {
        spec,
        equivariant,
        invariant,
        input,
    }
}
