#![allow(dead_code)]

use magep_core::weightspace::{random_weights, Distribution};
use magep_core::{Rng, WeightObject, WeightSpec};

pub const UNIT: Distribution = Distribution::Uniform { lo: -1.0, hi: 1.0 };

/// L in 2..=4, widths in 1..=4, d in 1..=2.
pub fn random_spec(rng: &mut Rng) -> WeightSpec {
    let l = 2 + rng.below(3);
    let widths = (0..=l).map(|_| 1 + rng.below(4)).collect();
    WeightSpec::new(widths, 1 + rng.below(2)).unwrap()
}

pub fn random_object(spec: &WeightSpec, rng: &mut Rng) -> WeightObject {
    let batch = if rng.below(2) == 0 {
        None
    } else {
        Some(1 + rng.below(2))
    };
    random_weights(spec, rng, UNIT, batch).unwrap()
}
