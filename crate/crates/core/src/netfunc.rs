//! Evaluating the fully connected networks that weight objects describe.
//!
//! `f(x; U) = W^(L) σ(··· σ(W^(1) x + b^(1)) ···) + b^(L)`, with no activation
//! after the last affine map.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::monomial::Variant;
use crate::weightspace::WeightObject;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetActivation {
    Relu,
    /// Slope on the negative side; must be positive.
    LeakyRelu(f64),
    Tanh,
    Sin,
}

impl NetActivation {
    pub fn leaky_relu(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha.is_finite() {
            Ok(NetActivation::LeakyRelu(alpha))
        } else {
            Err(Error::Config(format!("leaky_relu slope must be positive, got {alpha}")))
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            NetActivation::Relu => x.max(0.0),
            NetActivation::LeakyRelu(a) => {
                if x >= 0.0 {
                    x
                } else {
                    a * x
                }
            }
            NetActivation::Tanh => x.tanh(),
            NetActivation::Sin => x.sin(),
        }
    }

    /// The group under which the network function is unchanged.
    pub fn symmetry(&self) -> Variant {
        match self {
            NetActivation::Relu | NetActivation::LeakyRelu(_) => Variant::PositiveScaling,
            NetActivation::Tanh | NetActivation::Sin => Variant::SignFlip,
        }
    }
}

impl fmt::Display for NetActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetActivation::Relu => write!(f, "relu"),
            NetActivation::LeakyRelu(a) => write!(f, "leaky_relu:{a}"),
            NetActivation::Tanh => write!(f, "tanh"),
            NetActivation::Sin => write!(f, "sin"),
        }
    }
}

impl FromStr for NetActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("leaky_relu", a)) => {
                Self::leaky_relu(a.parse().map_err(|_| Error::Config(format!("bad slope in `{s}`")))?)
            }
            None if s == "leaky_relu" => Ok(NetActivation::LeakyRelu(0.01)),
            None if s == "relu" => Ok(NetActivation::Relu),
            None if s == "tanh" => Ok(NetActivation::Tanh),
            None if s == "sin" => Ok(NetActivation::Sin),
            _ => Err(Error::Config(format!("unknown network activation `{s}`"))),
        }
    }
}

pub fn mlp_forward(u: &WeightObject, x: &[f64], act: NetActivation) -> Result<Vec<f64>> {
    let spec = u.spec();
    if spec.channels() != 1 {
        return Err(Error::Unsupported(format!(
            "network evaluation needs d = 1, got d = {}",
            spec.channels()
        )));
    }
    if u.batch().is_some() {
        return Err(Error::Unsupported(
            "network evaluation takes one unbatched weight object".into(),
        ));
    }
    if x.len() != spec.width(0) {
        return Err(Error::Dimension(format!(
            "input has length {}, network expects {}",
            x.len(),
            spec.width(0)
        )));
    }
    let l = spec.layers();
    let mut h = x.to_vec();
    for i in 1..=l {
        let (rows, cols) = (spec.width(i), spec.width(i - 1));
        let w = u.weight(i).data();
        let b = u.bias(i).data();
        let mut next: Vec<f64> = (0..rows)
            .map(|j| b[j] + (0..cols).map(|k| w[j * cols + k] * h[k]).sum::<f64>())
            .collect();
        if i < l {
            next.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        h = next;
    }
    Ok(h)
}

/// Row `u` holds the network outputs of `dataset[u]` at every probe, concatenated.
pub fn probe_targets(dataset: &[WeightObject], probes: &[Vec<f64>], act: NetActivation) -> Result<Vec<Vec<f64>>> {
    if let Some(first) = dataset.first() {
        if let Some(bad) = dataset.iter().find(|u| u.spec() != first.spec()) {
            return Err(Error::Dimension(format!(
                "dataset mixes widths {:?} and {:?}",
                first.spec().widths(),
                bad.spec().widths()
            )));
        }
    }
    dataset
        .iter()
        .map(|u| {
            let mut row = Vec::new();
            for x in probes {
                row.extend(mlp_forward(u, x, act)?);
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densekit::{max_rel_diff, Rng};
    use crate::monomial::GroupElement;
    use crate::weightspace::{random_weights, Distribution, WeightSpec};

    const UNIT: Distribution = Distribution::Uniform { lo: -1.0, hi: 1.0 };

    #[test]
    fn hand_example() {
        let u = WeightObject::from_layers(&[1, 2, 1], &[&[1.0, 1.0], &[1.0, 1.0]], &[&[1.0, 1.0], &[0.0]]).unwrap();
        assert_eq!(mlp_forward(&u, &[1.0], NetActivation::Relu).unwrap(), vec![4.0]);
    }

    #[test]
    fn zero_object_returns_last_bias() {
        let spec = WeightSpec::new(vec![3, 4, 2], 1).unwrap();
        let mut u = WeightObject::zeros(&spec, None);
        u.bias_mut(2).data_mut().copy_from_slice(&[0.5, -1.5]);
        assert_eq!(
            mlp_forward(&u, &[1.0, 2.0, 3.0], NetActivation::Tanh).unwrap(),
            vec![0.5, -1.5]
        );
    }

    #[test]
    fn errors() {
        let spec = WeightSpec::new(vec![2, 2, 2], 2).unwrap();
        let u = WeightObject::zeros(&spec, None);
        assert!(matches!(
            mlp_forward(&u, &[0.0, 0.0], NetActivation::Relu),
            Err(Error::Unsupported(_))
        ));
        let u = WeightObject::zeros(&spec.with_channels(1).unwrap(), None);
        assert!(matches!(
            mlp_forward(&u, &[0.0], NetActivation::Relu),
            Err(Error::Dimension(_))
        ));
        assert!(NetActivation::leaky_relu(0.0).is_err());
        assert!("leaky_relu:-1".parse::<NetActivation>().is_err());
    }

    #[test]
    fn invariant_under_matching_group() {
        let spec = WeightSpec::new(vec![3, 4, 3, 2], 1).unwrap();
        let mut rng = Rng::new(17);
        for act in [
            NetActivation::Relu,
            NetActivation::LeakyRelu(0.2),
            NetActivation::Tanh,
            NetActivation::Sin,
        ] {
            let u = random_weights(&spec, &mut rng, UNIT, None).unwrap();
            let g = GroupElement::sample(&spec, act.symmetry(), (0.25, 4.0), &mut rng).unwrap();
            let gu = g.act(&u).unwrap();
            let x = rng.uniform_vec(3, -1.0, 1.0);
            let a = mlp_forward(&u, &x, act).unwrap();
            let b = mlp_forward(&gu, &x, act).unwrap();
            assert!(max_rel_diff(&a, &b) <= 1e-9, "{act}");
        }
    }

    #[test]
    fn probe_shapes() {
        let spec = WeightSpec::new(vec![2, 3, 1], 1).unwrap();
        let mut rng = Rng::new(3);
        let data: Vec<_> = (0..4)
            .map(|_| random_weights(&spec, &mut rng, UNIT, None).unwrap())
            .collect();
        let one = probe_targets(&data, &[vec![0.1, 0.2]], NetActivation::Relu).unwrap();
        assert!(one.iter().all(|r| r.len() == 1));
        let none = probe_targets(&data, &[], NetActivation::Relu).unwrap();
        assert_eq!(none.len(), 4);
        assert!(none.iter().all(Vec::is_empty));
    }
}
