use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::monomial::Variant;
use crate::weightspace::WeightObject;

/// Pointwise nonlinearities applied to every weight and bias entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sin,
    Abs,
}

impl Activation {
    pub fn apply_scalar(&self, x: f64) -> f64 {
        match *self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(alpha) => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sin => x.sin(),
            Activation::Abs => x.abs(),
        }
    }

    pub fn apply(&self, u: &WeightObject) -> WeightObject {
        u.map(|x| self.apply_scalar(x))
    }

    /// Positively homogeneous activations commute with positive scaling;
    /// odd ones commute with sign flips. `abs` maps a sign flip to a pure
    /// permutation, which still lies in the group, so it is allowed for both.
    pub fn compatible_with(&self, variant: Variant) -> bool {
        matches!(
            (self, variant),
            (Activation::Abs, _)
                | (Activation::Relu | Activation::LeakyRelu(_), Variant::PositiveScaling)
                | (Activation::Tanh | Activation::Sin, Variant::SignFlip)
        )
    }

    pub fn check(&self, variant: Variant) -> Result<()> {
        if self.compatible_with(variant) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "activation `{self}` does not commute with the {} group",
                variant.name()
            )))
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::LeakyRelu(a) => write!(f, "leaky_relu:{a}"),
            Activation::Tanh => write!(f, "tanh"),
            Activation::Sin => write!(f, "sin"),
            Activation::Abs => write!(f, "abs"),
        }
    }
}

/// Parses `relu`, `leaky_relu` (slope 0.01), `leaky_relu:<slope>`, `tanh`, `sin`, `abs`.
impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown activation `{s}`"));
        match s.split_once(':') {
            Some(("leaky_relu", slope)) => {
                let a: f64 = slope.parse().map_err(|_| bad())?;
                if !(a.is_finite() && a >= 0.0) {
                    return Err(Error::Config(format!(
                        "leaky_relu slope must be finite and non-negative, got {slope}"
                    )));
                }
                Ok(Activation::LeakyRelu(a))
            }
            Some(_) => Err(bad()),
            None => match s {
                "relu" => Ok(Activation::Relu),
                "leaky_relu" => Ok(Activation::LeakyRelu(0.01)),
                "tanh" => Ok(Activation::Tanh),
                "sin" => Ok(Activation::Sin),
                "abs" => Ok(Activation::Abs),
                _ => Err(bad()),
            },
        }
    }
}
