//! Named coefficient blocks shared by the equivariant and invariant layers.
//!
//! A layer's Φ is a fixed list of blocks. Each block has a dotted path
//! (`case_L.phib_L_Wb.1`) which doubles as its key in the parameter file, a
//! shape, and a fan-in used for initialization.

use serde_json::{Map, Value};

use crate::densekit::{Rng, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub path: String,
    pub shape: Vec<usize>,
    /// Input scalars summed into one output scalar, per input channel.
    pub fan: usize,
    /// Additive bias rows are drawn from uniform(-scale, scale).
    pub bias: bool,
}

impl BlockSpec {
    pub(crate) fn new(path: impl Into<String>, shape: &[usize], fan: usize) -> Self {
        Self {
            path: path.into(),
            shape: shape.to_vec(),
            fan,
            bias: false,
        }
    }

    pub(crate) fn bias(path: impl Into<String>, shape: &[usize]) -> Self {
        Self {
            bias: true,
            ..Self::new(path, shape, 1)
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    specs: Vec<BlockSpec>,
    tensors: Vec<Tensor>,
}

impl Blocks {
    pub(crate) fn zeros(specs: Vec<BlockSpec>) -> Self {
        let tensors = specs.iter().map(|s| Tensor::zeros(&s.shape)).collect();
        Self { specs, tensors }
    }

    /// Draws every block in layout order from uniform(-a, a) with
    /// `a = scale / sqrt(d * fan)`, or `a = scale` for bias rows.
    pub(crate) fn random(specs: Vec<BlockSpec>, d: usize, rng: &mut Rng, scale: f64) -> Self {
        let tensors = specs
            .iter()
            .map(|s| {
                let a = if s.bias {
                    scale
                } else {
                    scale / ((d * s.fan) as f64).sqrt()
                };
                Tensor::new(s.shape.clone(), rng.uniform_vec(s.len(), -a, a)).unwrap()
            })
            .collect();
        Self { specs, tensors }
    }

    pub fn specs(&self) -> &[BlockSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn get(&self, path: &str) -> Option<&Tensor> {
        self.specs.iter().position(|s| s.path == path).map(|k| &self.tensors[k])
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Tensor> {
        self.specs
            .iter()
            .position(|s| s.path == path)
            .map(move |k| &mut self.tensors[k])
    }

    /// Internal lookup for paths the layout is known to contain.
    pub(crate) fn at(&self, path: &str) -> &Tensor {
        self.get(path).unwrap_or_else(|| panic!("layout has no block `{path}`"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BlockSpec, &Tensor)> {
        self.specs.iter().zip(&self.tensors)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&BlockSpec, &mut Tensor)> {
        self.specs.iter().zip(self.tensors.iter_mut())
    }

    /// Total number of stored scalars.
    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Scalars of all blocks concatenated in layout order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                values.len(),
                self.param_count()
            )));
        }
        let mut rest = values;
        for t in &mut self.tensors {
            let (head, tail) = rest.split_at(t.len());
            t.data_mut().copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// Nested object keyed by the dotted path segments.
    pub fn to_json(&self) -> Map<String, Value> {
        let mut root = Map::new();
        for (spec, t) in self.iter() {
            let mut node = &mut root;
            let parts: Vec<&str> = spec.path.split('.').collect();
            for part in &parts[..parts.len() - 1] {
                node = node
                    .entry(part.to_string())
                    .or_insert_with(|| Value::Object(Map::new()))
                    .as_object_mut()
                    .unwrap();
            }
            node.insert(parts[parts.len() - 1].to_string(), t.to_nested_json());
        }
        root
    }

    /// Reads every block of `specs` from `root`; extra or missing keys are errors.
    pub(crate) fn from_json(specs: Vec<BlockSpec>, root: &Map<String, Value>) -> Result<Self> {
        let mut tensors = Vec::with_capacity(specs.len());
        for spec in &specs {
            let mut node: Option<&Value> = None;
            let mut map = root;
            let parts: Vec<&str> = spec.path.split('.').collect();
            for (k, part) in parts.iter().enumerate() {
                let v = map
                    .get(*part)
                    .ok_or_else(|| Error::Validation(format!("missing parameter block `{}`", spec.path)))?;
                if k + 1 < parts.len() {
                    map = v
                        .as_object()
                        .ok_or_else(|| Error::Validation(format!("`{part}` in `{}` must be an object", spec.path)))?;
                } else {
                    node = Some(v);
                }
            }
            let t = Tensor::from_nested_json(node.unwrap(), &spec.shape)
                .map_err(|e| Error::Validation(format!("block `{}`: {e}", spec.path)))?;
            tensors.push(t);
        }
        let mut extra = Vec::new();
        collect_leaves(root, "", &mut extra);
        extra.retain(|p| !specs.iter().any(|s| &s.path == p));
        if let Some(p) = extra.first() {
            return Err(Error::Validation(format!("unknown parameter block `{p}`")));
        }
        Ok(Self { specs, tensors })
    }
}

fn collect_leaves(map: &Map<String, Value>, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in map {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Object(m) => collect_leaves(m, &path, out),
            _ => out.push(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_strictness() {
        let specs = vec![
            BlockSpec::new("a.x", &[2, 2], 2),
            BlockSpec::new("a.y.1", &[3], 1),
            BlockSpec::bias("b", &[1, 2]),
        ];
        let blocks = Blocks::random(specs.clone(), 2, &mut Rng::new(3), 1.0);
        let json = blocks.to_json();
        assert_eq!(Blocks::from_json(specs.clone(), &json).unwrap(), blocks);

        let mut extra = json.clone();
        extra.insert("zzz".into(), Value::from(1.0));
        assert!(Blocks::from_json(specs.clone(), &extra).is_err());
        let mut missing = json;
        missing.remove("b");
        assert!(Blocks::from_json(specs, &missing).is_err());
    }

    #[test]
    fn init_bounds() {
        let specs = vec![BlockSpec::new("w", &[100], 4), BlockSpec::bias("c", &[100])];
        let blocks = Blocks::random(specs, 4, &mut Rng::new(1), 2.0);
        assert!(blocks.at("w").max_abs() <= 2.0 / 4.0);
        assert!(blocks.at("c").max_abs() <= 2.0);
        assert!(blocks.at("c").max_abs() > 0.5);
        assert_eq!(blocks.param_count(), 200);
    }
}
