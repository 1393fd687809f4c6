//! `.mgp.json` parameter files.
//!
//! ```text
//! {"format": "magep-params/1", "kind": "equivariant",
//!  "spec": {"n": [...], "d": 2, "e": 3},
//!  "case_L": {...}, "case_1": {...}, "case_mid": {"2": {...}},
//!  "psi": {"bw": {"s,t": [[...]]}, "ww": {...}}}
//! ```
//!
//! Invariant files use `"kind": "invariant"`, add `d_out` to the spec and keep
//! their blocks under `"invariant"`.

use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::stableterms::PsiParams;
use crate::weightspace::{parse_json, WeightSpec};

use super::blocks::Blocks;
use super::equivariant::{equivariant_layout, EquivariantParams};
use super::invariant::{invariant_layout, InvariantParams};

pub const PARAMS_FORMAT: &str = "magep-params/1";

#[derive(Debug, Clone)]
pub enum LayerParams {
    Equivariant(EquivariantParams),
    Invariant(InvariantParams),
}

fn spec_json(spec: &WeightSpec, extra: &[(&str, usize)]) -> Value {
    let mut m = Map::new();
    m.insert("n".into(), Value::from(spec.widths().to_vec()));
    m.insert("d".into(), Value::from(spec.channels()));
    for (k, v) in extra {
        m.insert((*k).into(), Value::from(*v));
    }
    Value::Object(m)
}

pub fn equivariant_to_json(p: &EquivariantParams) -> Value {
    let mut m = Map::new();
    m.insert("format".into(), PARAMS_FORMAT.into());
    m.insert("kind".into(), "equivariant".into());
    m.insert("spec".into(), spec_json(p.spec(), &[("e", p.out_channels())]));
    for (k, v) in p.blocks().to_json() {
        m.insert(k, v);
    }
    m.insert("psi".into(), p.psi().to_json());
    Value::Object(m)
}

pub fn invariant_to_json(p: &InvariantParams) -> Value {
    let mut m = Map::new();
    m.insert("format".into(), PARAMS_FORMAT.into());
    m.insert("kind".into(), "invariant".into());
    m.insert(
        "spec".into(),
        spec_json(p.spec(), &[("e", p.e()), ("d_out", p.d_out())]),
    );
    m.insert("invariant".into(), Value::Object(p.blocks().to_json()));
    m.insert("psi".into(), p.psi().to_json());
    Value::Object(m)
}

fn field<'a>(m: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    m.get(key)
        .ok_or_else(|| Error::Validation(format!("missing key `{key}`")))
}

fn count(spec: &Map<String, Value>, key: &str) -> Result<usize> {
    field(spec, key)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| Error::Validation(format!("spec.{key} must be a non-negative integer")))
}

pub fn params_from_str(text: &str) -> Result<LayerParams> {
    let value: Value = parse_json(text)?;
    let root = value
        .as_object()
        .ok_or_else(|| Error::Validation("parameter file must be an object".into()))?;
    let format = field(root, "format")?.as_str().unwrap_or_default();
    if format != PARAMS_FORMAT {
        return Err(Error::Validation(format!("unsupported format `{format}`")));
    }
    let spec_obj = field(root, "spec")?
        .as_object()
        .ok_or_else(|| Error::Validation("spec must be an object".into()))?;
    let widths: Vec<usize> =
        serde_json::from_value(field(spec_obj, "n")?.clone()).map_err(|e| Error::Validation(format!("spec.n: {e}")))?;
    let spec = WeightSpec::new(widths, count(spec_obj, "d")?).map_err(|e| Error::Validation(e.to_string()))?;
    let e = count(spec_obj, "e")?;
    if e == 0 {
        return Err(Error::Validation("spec.e must be positive".into()));
    }
    let psi = PsiParams::from_json(field(root, "psi")?, &spec)?;

    match field(root, "kind")?.as_str() {
        Some("equivariant") => {
            let mut blocks = root.clone();
            for k in ["format", "kind", "spec", "psi"] {
                blocks.remove(k);
            }
            let blocks = Blocks::from_json(equivariant_layout(&spec, e), &blocks)?;
            Ok(LayerParams::Equivariant(EquivariantParams::from_parts(
                spec, e, blocks, psi,
            )))
        }
        Some("invariant") => {
            let d_out = count(spec_obj, "d_out")?;
            if d_out == 0 {
                return Err(Error::Validation("spec.d_out must be positive".into()));
            }
            if let Some(k) = root
                .keys()
                .find(|k| !["format", "kind", "spec", "psi", "invariant"].contains(&k.as_str()))
            {
                return Err(Error::Validation(format!("unknown key `{k}`")));
            }
            let blocks = field(root, "invariant")?
                .as_object()
                .ok_or_else(|| Error::Validation("`invariant` must be an object".into()))?;
            let blocks = Blocks::from_json(invariant_layout(&spec, e, d_out), blocks)?;
            Ok(LayerParams::Invariant(InvariantParams::from_parts(
                spec, e, d_out, blocks, psi,
            )))
        }
        _ => Err(Error::Validation("kind must be `equivariant` or `invariant`".into())),
    }
}

pub fn save_params(p: &LayerParams, path: impl AsRef<Path>) -> Result<()> {
    let value = match p {
        LayerParams::Equivariant(e) => equivariant_to_json(e),
        LayerParams::Invariant(i) => invariant_to_json(i),
    };
    std::fs::write(path, serde_json::to_string_pretty(&value).expect("serializable") + "\n")?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>) -> Result<LayerParams> {
    params_from_str(&std::fs::read_to_string(path)?)
}
