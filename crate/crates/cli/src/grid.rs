//! Random architectures for property trials.

use magep_core::{Rng, WeightSpec};
use serde::Serialize;

/// Where trial architectures are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub layers: Vec<usize>,
    pub max_width: usize,
    pub channels: Vec<usize>,
    pub out_channels: Vec<usize>,
}

impl Default for Grid {
    /// `L ∈ {2,3,4}`, widths in `1..=4`, `d ∈ {1,2}`, `e ∈ {1,3}`.
    fn default() -> Self {
        Self {
            layers: vec![2, 3, 4],
            max_width: 4,
            channels: vec![1, 2],
            out_channels: vec![1, 3],
        }
    }
}

/// One trial's architecture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub widths: Vec<usize>,
    pub d: usize,
    pub e: usize,
}

impl GridPoint {
    pub fn spec(&self) -> WeightSpec {
        WeightSpec::new(self.widths.clone(), self.d).expect("grid points are valid")
    }
}

impl Grid {
    pub fn validate(&self) -> Result<(), String> {
        if self.layers.is_empty() || self.layers.iter().any(|&l| l < 2) {
            return Err("every layer count must be at least 2".into());
        }
        if self.max_width == 0 {
            return Err("max width must be at least 1".into());
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err("channel counts must be positive".into());
        }
        if self.out_channels.is_empty() || self.out_channels.contains(&0) {
            return Err("output channel counts must be positive".into());
        }
        Ok(())
    }

    /// Same grid with layer counts and widths capped.
    pub fn capped(&self, max_layers: usize, max_width: usize) -> Grid {
        let mut layers: Vec<usize> = self.layers.iter().copied().filter(|&l| l <= max_layers).collect();
        if layers.is_empty() {
            layers.push(max_layers.min(*self.layers.iter().min().unwrap()));
        }
        Grid {
            layers,
            max_width: self.max_width.min(max_width),
            ..self.clone()
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> GridPoint {
        let l = self.layers[rng.below(self.layers.len())];
        let widths = (0..=l).map(|_| 1 + rng.below(self.max_width)).collect();
        GridPoint {
            widths,
            d: self.channels[rng.below(self.channels.len())],
            e: self.out_channels[rng.below(self.out_channels.len())],
        }
    }
}
