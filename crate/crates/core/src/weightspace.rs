//! Architecture descriptors and elements `U = ([W], [b])` of a weight space.
//!
//! Layer `i` (1-based, `1..=L`) carries `W^(i)` of shape `[B?, d, n_i, n_{i-1}]`
//! and `b^(i)` of shape `[B?, d, n_i]`. The optional leading batch axis is
//! shared by every piece.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::densekit::{Rng, Tensor};
use crate::error::{Error, Result};

/// `L` layers with widths `n_0 … n_L` and `d` values per weight/bias entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeightSpec {
    widths: Vec<usize>,
    channels: usize,
}

impl WeightSpec {
    pub fn new(widths: Vec<usize>, channels: usize) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::InvalidSpec(format!(
                "need L >= 2 (at least 3 widths), got {} widths",
                widths.len()
            )));
        }
        if let Some(i) = widths.iter().position(|&n| n == 0) {
            return Err(Error::InvalidSpec(format!("width n_{i} must be >= 1, got 0")));
        }
        if channels == 0 {
            return Err(Error::InvalidSpec("channel dimension d must be >= 1".into()));
        }
        Ok(Self { widths, channels })
    }

    /// Number of layers `L`.
    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// `n_i` for `i` in `0..=L`.
    pub fn width(&self, i: usize) -> usize {
        self.widths[i]
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn with_channels(&self, channels: usize) -> Result<Self> {
        Self::new(self.widths.clone(), channels)
    }

    pub fn weight_shape(&self, i: usize, batch: Option<usize>) -> Vec<usize> {
        let mut s: Vec<usize> = batch.into_iter().collect();
        s.extend([self.channels, self.widths[i], self.widths[i - 1]]);
        s
    }

    pub fn bias_shape(&self, i: usize, batch: Option<usize>) -> Vec<usize> {
        let mut s: Vec<usize> = batch.into_iter().collect();
        s.extend([self.channels, self.widths[i]]);
        s
    }

    /// `Σ_i d·n_i·n_{i-1} + d·n_i`.
    pub fn dim(&self) -> usize {
        (1..=self.layers())
            .map(|i| self.channels * self.widths[i] * (self.widths[i - 1] + 1))
            .sum()
    }
}

pub fn dim(spec: &WeightSpec) -> usize {
    spec.dim()
}

/// Entry distribution for [`random_weights`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, std: f64 },
}

impl Distribution {
    fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => Err(
                Error::InvalidDistribution(format!("uniform({lo}, {hi}) needs finite lo <= hi")),
            ),
            Distribution::Gaussian { mean, std } if !(mean.is_finite() && std.is_finite() && std >= 0.0) => Err(
                Error::InvalidDistribution(format!("gaussian({mean}, {std}) needs finite mean and std >= 0")),
            ),
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => rng.uniform(lo, hi),
            Distribution::Gaussian { mean, std } => rng.gaussian(mean, std),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightObject {
    spec: WeightSpec,
    batch: Option<usize>,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

impl WeightObject {
    /// Validates every piece against `spec` and `batch`.
    pub fn new(spec: WeightSpec, batch: Option<usize>, weights: Vec<Tensor>, biases: Vec<Tensor>) -> Result<Self> {
        let l = spec.layers();
        if batch == Some(0) {
            return Err(Error::Validation("batch extent must be >= 1".into()));
        }
        if weights.len() != l || biases.len() != l {
            return Err(Error::Validation(format!(
                "expected {l} weight and bias tensors, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for i in 1..=l {
            let ws = spec.weight_shape(i, batch);
            if weights[i - 1].shape() != ws.as_slice() {
                return Err(Error::Validation(format!(
                    "W^({i}) has shape {:?}, expected {ws:?}",
                    weights[i - 1].shape()
                )));
            }
            let bs = spec.bias_shape(i, batch);
            if biases[i - 1].shape() != bs.as_slice() {
                return Err(Error::Validation(format!(
                    "b^({i}) has shape {:?}, expected {bs:?}",
                    biases[i - 1].shape()
                )));
            }
        }
        Ok(Self {
            spec,
            batch,
            weights,
            biases,
        })
    }

    pub fn zeros(spec: &WeightSpec, batch: Option<usize>) -> Self {
        let l = spec.layers();
        Self {
            weights: (1..=l).map(|i| Tensor::zeros(&spec.weight_shape(i, batch))).collect(),
            biases: (1..=l).map(|i| Tensor::zeros(&spec.bias_shape(i, batch))).collect(),
            spec: spec.clone(),
            batch,
        }
    }

    /// Builds an unbatched `d = 1` object from plain row-major matrices and vectors.
    pub fn from_layers(widths: &[usize], weights: &[&[f64]], biases: &[&[f64]]) -> Result<Self> {
        let spec = WeightSpec::new(widths.to_vec(), 1)?;
        let w = weights
            .iter()
            .enumerate()
            .map(|(k, w)| Tensor::new(spec.weight_shape(k + 1, None), w.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let b = biases
            .iter()
            .enumerate()
            .map(|(k, b)| Tensor::new(spec.bias_shape(k + 1, None), b.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec, None, w, b)
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn batch(&self) -> Option<usize> {
        self.batch
    }

    /// Batch extent, 1 when unbatched.
    pub fn batch_len(&self) -> usize {
        self.batch.unwrap_or(1)
    }

    /// `W^(i)`, `i` in `1..=L`.
    pub fn weight(&self, i: usize) -> &Tensor {
        &self.weights[i - 1]
    }

    /// `b^(i)`, `i` in `1..=L`.
    pub fn bias(&self, i: usize) -> &Tensor {
        &self.biases[i - 1]
    }

    pub fn weight_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.weights[i - 1]
    }

    pub fn bias_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.biases[i - 1]
    }

    pub fn weights(&self) -> &[Tensor] {
        &self.weights
    }

    pub fn biases(&self) -> &[Tensor] {
        &self.biases
    }

    pub fn entry_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Tensor::len).sum()
    }

    /// All entries: weights layer by layer, then biases layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .chain(&self.biases)
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec.clone(),
            batch: self.batch,
            weights: self.weights.iter().map(|t| t.map(&f)).collect(),
            biases: self.biases.iter().map(|t| t.map(&f)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.biases)
            .fold(0.0, |m, t| m.max(t.max_abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(Tensor::is_finite)
    }

    /// Same data with an explicit leading batch axis (extent 1 if unbatched).
    pub fn to_batched(&self) -> Self {
        if self.batch.is_some() {
            return self.clone();
        }
        let add_axis = |t: &Tensor| {
            let mut s = vec![1];
            s.extend_from_slice(t.shape());
            t.clone().reshape(&s).expect("reshape preserves length")
        };
        Self {
            spec: self.spec.clone(),
            batch: Some(1),
            weights: self.weights.iter().map(add_axis).collect(),
            biases: self.biases.iter().map(add_axis).collect(),
        }
    }

    /// Drops a batch axis of extent 1.
    pub(crate) fn squeeze_batch(self) -> Self {
        assert_eq!(self.batch, Some(1));
        let drop_axis = |t: Tensor| {
            let s = t.shape()[1..].to_vec();
            t.reshape(&s).expect("reshape preserves length")
        };
        Self {
            spec: self.spec,
            batch: None,
            weights: self.weights.into_iter().map(drop_axis).collect(),
            biases: self.biases.into_iter().map(drop_axis).collect(),
        }
    }

    /// The `k`-th element of a batched object, unbatched.
    pub fn item(&self, k: usize) -> Result<Self> {
        let b = self
            .batch
            .ok_or_else(|| Error::Validation("object is not batched".into()))?;
        if k >= b {
            return Err(Error::Validation(format!("batch index {k} out of range {b}")));
        }
        let slice = |t: &Tensor| {
            let inner = t.shape()[1..].to_vec();
            let chunk: usize = inner.iter().product();
            Tensor::new(inner, t.data()[k * chunk..(k + 1) * chunk].to_vec()).unwrap()
        };
        Ok(Self {
            spec: self.spec.clone(),
            batch: None,
            weights: self.weights.iter().map(slice).collect(),
            biases: self.biases.iter().map(slice).collect(),
        })
    }

    /// Stacks unbatched objects of one spec along a new batch axis.
    pub fn stack(items: &[WeightObject]) -> Result<Self> {
        let first = items.first().ok_or(Error::EmptyDataset)?;
        if items.iter().any(|u| u.spec != first.spec || u.batch.is_some()) {
            return Err(Error::Validation("stack needs unbatched objects of one spec".into()));
        }
        let l = first.spec.layers();
        let join = |pick: &dyn Fn(&WeightObject) -> &Tensor| {
            let mut shape = vec![items.len()];
            shape.extend_from_slice(pick(first).shape());
            let data = items.iter().flat_map(|u| pick(u).data().iter().copied()).collect();
            Tensor::new(shape, data).unwrap()
        };
        Ok(Self {
            spec: first.spec.clone(),
            batch: Some(items.len()),
            weights: (1..=l).map(|i| join(&|u: &WeightObject| u.weight(i))).collect(),
            biases: (1..=l).map(|i| join(&|u: &WeightObject| u.bias(i))).collect(),
        })
    }
}

/// Draws every entry i.i.d. from `dist`; weights layer by layer first, then biases.
pub fn random_weights(
    spec: &WeightSpec,
    rng: &mut Rng,
    dist: Distribution,
    batch: Option<usize>,
) -> Result<WeightObject> {
    dist.validate()?;
    if batch == Some(0) {
        return Err(Error::Validation("batch extent must be >= 1".into()));
    }
    let l = spec.layers();
    let mut draw = |shape: Vec<usize>| {
        let len = shape.iter().product();
        Tensor::new(shape, (0..len).map(|_| dist.sample(rng)).collect()).unwrap()
    };
    let weights = (1..=l).map(|i| draw(spec.weight_shape(i, batch))).collect();
    let biases = (1..=l).map(|i| draw(spec.bias_shape(i, batch))).collect();
    WeightObject::new(spec.clone(), batch, weights, biases)
}

pub const WEIGHTS_FORMAT: &str = "magep-weights/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightFile {
    format: String,
    #[serde(rename = "L")]
    layers: usize,
    n: Vec<usize>,
    d: usize,
    batch: Option<usize>,
    #[serde(rename = "W")]
    weights: Vec<Value>,
    b: Vec<Value>,
}

/// Byte offset of a 1-based (line, column) position, as reported by `serde_json`.
pub(crate) fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (k, l) in text.split_inclusive('\n').enumerate() {
        if k + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn to_json_string(obj: &WeightObject) -> String {
    let spec = obj.spec();
    let file = WeightFile {
        format: WEIGHTS_FORMAT.to_string(),
        layers: spec.layers(),
        n: spec.widths().to_vec(),
        d: spec.channels(),
        batch: obj.batch(),
        weights: obj.weights().iter().map(Tensor::to_nested_json).collect(),
        b: obj.biases().iter().map(Tensor::to_nested_json).collect(),
    };
    serde_json::to_string(&file).expect("weight files always serialize")
}

pub fn from_json_str(text: &str) -> Result<(WeightSpec, WeightObject)> {
    let file: WeightFile = parse_json(text)?;
    if file.format != WEIGHTS_FORMAT {
        return Err(Error::Validation(format!(
            "unsupported format `{}`, expected `{WEIGHTS_FORMAT}`",
            file.format
        )));
    }
    if file.n.len() != file.layers + 1 {
        return Err(Error::Validation(format!(
            "L = {} needs {} widths, found {}",
            file.layers,
            file.layers + 1,
            file.n.len()
        )));
    }
    let spec = WeightSpec::new(file.n, file.d).map_err(|e| Error::Validation(e.to_string()))?;
    if file.weights.len() != spec.layers() || file.b.len() != spec.layers() {
        return Err(Error::Validation(format!(
            "expected {} weight and bias arrays, found {} and {}",
            spec.layers(),
            file.weights.len(),
            file.b.len()
        )));
    }
    let weights = file
        .weights
        .iter()
        .enumerate()
        .map(|(k, v)| Tensor::from_nested_json(v, &spec.weight_shape(k + 1, file.batch)))
        .collect::<Result<Vec<_>>>()?;
    let biases = file
        .b
        .iter()
        .enumerate()
        .map(|(k, v)| Tensor::from_nested_json(v, &spec.bias_shape(k + 1, file.batch)))
        .collect::<Result<Vec<_>>>()?;
    let obj = WeightObject::new(spec.clone(), file.batch, weights, biases)?;
    Ok((spec, obj))
}

/// Writes `obj` as a `.mgw.json` document.
pub fn save(obj: &WeightObject, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json_string(obj))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(WeightSpec, WeightObject)> {
    from_json_str(&std::fs::read_to_string(path)?)
}
