use crate::densekit::{Rng, Tensor};
use crate::error::{Error, Result};
use crate::monomial::Variant;
use crate::weightspace::{WeightObject, WeightSpec};

use super::activation::Activation;
use super::equivariant::{init_equivariant, EquivariantParams};
use super::invariant::{init_invariant, InvariantParams};

/// Equivariant layers with activations, closed by an invariant head.
#[derive(Debug, Clone)]
pub struct Stack {
    variant: Variant,
    layers: Vec<(EquivariantParams, Activation)>,
    head: InvariantParams,
}

impl Stack {
    /// Checks widths and channel chaining, and that every activation
    /// commutes with `variant`.
    pub fn new(variant: Variant, layers: Vec<(EquivariantParams, Activation)>, head: InvariantParams) -> Result<Self> {
        let widths = head.spec().widths();
        let mut channels = None;
        for (k, (layer, act)) in layers.iter().enumerate() {
            act.check(variant)?;
            if layer.spec().widths() != widths {
                return Err(Error::Config(format!(
                    "layer {k} has widths {:?}, head has {widths:?}",
                    layer.spec().widths()
                )));
            }
            if let Some(c) = channels {
                if layer.in_channels() != c {
                    return Err(Error::Config(format!(
                        "layer {k} expects {} channels but receives {c}",
                        layer.in_channels()
                    )));
                }
            }
            channels = Some(layer.out_channels());
        }
        if let Some(c) = channels {
            if head.in_channels() != c {
                return Err(Error::Config(format!(
                    "head expects {} channels but receives {c}",
                    head.in_channels()
                )));
            }
        }
        Ok(Self { variant, layers, head })
    }

    /// Random stack whose equivariant layers map `channels[k] -> channels[k+1]`.
    #[allow(clippy::too_many_arguments)]
    pub fn random(
        spec: &WeightSpec,
        variant: Variant,
        channels: &[usize],
        activation: Activation,
        head_e: usize,
        head_out: usize,
        rng: &mut Rng,
        scale: f64,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Config("need at least the input channel count".into()));
        }
        let mut layers = Vec::new();
        for pair in channels.windows(2) {
            layers.push((init_equivariant(spec, pair[0], pair[1], rng, scale)?, activation));
        }
        let head = init_invariant(spec, *channels.last().unwrap(), head_e, head_out, rng, scale)?;
        Self::new(variant, layers, head)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn layers(&self) -> &[(EquivariantParams, Activation)] {
        &self.layers
    }

    pub fn head(&self) -> &InvariantParams {
        &self.head
    }

    pub fn input_channels(&self) -> usize {
        self.layers
            .first()
            .map_or(self.head.in_channels(), |(l, _)| l.in_channels())
    }

    pub fn forward(&self, u: &WeightObject) -> Result<Tensor> {
        let mut x = u.clone();
        for (layer, act) in &self.layers {
            x = act.apply(&layer.forward(&x)?);
        }
        self.head.forward(&x)
    }
}

/// One-shot form of [`Stack::new`] followed by [`Stack::forward`].
pub fn stack_forward(
    variant: Variant,
    layers: &[(EquivariantParams, Activation)],
    head: &InvariantParams,
    u: &WeightObject,
) -> Result<Tensor> {
    Stack::new(variant, layers.to_vec(), head.clone())?.forward(u)
}
