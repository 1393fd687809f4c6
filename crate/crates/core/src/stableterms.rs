//! Stable polynomial terms of a weight object.
//!
//! For `L ≥ s > t ≥ 0`:
//! - `[W]^(s,t) = W^(s) ··· W^(t+1)`, shape `[B?, d, n_s, n_t]`
//! - `[Wb]^(s,t)(t) = [W]^(s,t) b^(t)` (`t > 0`), shape `[B?, d, n_s]`
//!
//! and for `L ≥ s > 0`, `L > t ≥ 0`:
//! - `[bW]^(s)(L,t) = b^(s) Ψ^(s)(L,t) [W]^(L,t)` with `Ψ ∈ R^{1 x n_L}`
//! - `[WW]^(s,0)(L,t) = [W]^(s,0) Ψ^(s,0)(L,t) [W]^(L,t)` with `Ψ ∈ R^{n_0 x n_L}`
//!
//! Products run independently per batch item and per channel; Ψ is shared by
//! all channels.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use crate::densekit::{batched_matmul, batched_matvec, matmul_shared_right, Rng, Tensor};
use crate::error::{Error, Result};
use crate::weightspace::{WeightObject, WeightSpec};

/// Connection matrices Ψ for the `[bW]` and `[WW]` families.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiParams {
    bw: BTreeMap<(usize, usize), Tensor>,
    ww: BTreeMap<(usize, usize), Tensor>,
}

/// `(s, t)` with `L ≥ s > 0` and `L > t ≥ 0`, in lexicographic order.
pub fn psi_keys(layers: usize) -> Vec<(usize, usize)> {
    (1..=layers).flat_map(|s| (0..layers).map(move |t| (s, t))).collect()
}

impl PsiParams {
    fn build(spec: &WeightSpec, mut fill: impl FnMut(&[usize]) -> Tensor) -> Self {
        let (n0, nl) = (spec.width(0), spec.width(spec.layers()));
        let keys = psi_keys(spec.layers());
        let bw = keys.iter().map(|&k| (k, fill(&[1, nl]))).collect();
        let ww = keys.iter().map(|&k| (k, fill(&[n0, nl]))).collect();
        Self { bw, ww }
    }

    /// Entries i.i.d. uniform(-1, 1): every `[bW]` matrix in key order, then every `[WW]` matrix.
    pub fn random(spec: &WeightSpec, rng: &mut Rng) -> Self {
        Self::build(spec, |shape| {
            let len = shape.iter().product();
            Tensor::new(shape.to_vec(), rng.uniform_vec(len, -1.0, 1.0)).unwrap()
        })
    }

    pub fn constant(spec: &WeightSpec, value: f64) -> Self {
        Self::build(spec, |shape| Tensor::filled(shape, value))
    }

    pub fn zeros(spec: &WeightSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    /// Checks that every key is present with the right shape.
    pub fn validate(&self, spec: &WeightSpec) -> Result<()> {
        let (n0, nl) = (spec.width(0), spec.width(spec.layers()));
        let keys = psi_keys(spec.layers());
        for (name, map, shape) in [("bw", &self.bw, [1, nl]), ("ww", &self.ww, [n0, nl])] {
            if map.len() != keys.len() {
                return Err(Error::Validation(format!(
                    "psi.{name} has {} matrices, expected {}",
                    map.len(),
                    keys.len()
                )));
            }
            for k in &keys {
                let t = map.get(k).ok_or(Error::MissingPsi(k.0, k.1))?;
                if t.shape() != shape {
                    return Err(Error::Validation(format!(
                        "psi.{name}[{},{}] has shape {:?}, expected {shape:?}",
                        k.0,
                        k.1,
                        t.shape()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn bw(&self, s: usize, t: usize) -> Result<&Tensor> {
        self.bw.get(&(s, t)).ok_or(Error::MissingPsi(s, t))
    }

    pub fn ww(&self, s: usize, t: usize) -> Result<&Tensor> {
        self.ww.get(&(s, t)).ok_or(Error::MissingPsi(s, t))
    }

    pub fn bw_mut(&mut self, s: usize, t: usize) -> Option<&mut Tensor> {
        self.bw.get_mut(&(s, t))
    }

    pub fn ww_mut(&mut self, s: usize, t: usize) -> Option<&mut Tensor> {
        self.ww.get_mut(&(s, t))
    }

    /// `{"bw": {"s,t": [[...]]}, "ww": {...}}`.
    pub fn to_json(&self) -> Value {
        let family = |map: &BTreeMap<(usize, usize), Tensor>| {
            Value::Object(
                map.iter()
                    .map(|((s, t), m)| (format!("{s},{t}"), m.to_nested_json()))
                    .collect::<Map<_, _>>(),
            )
        };
        let mut obj = Map::new();
        obj.insert("bw".into(), family(&self.bw));
        obj.insert("ww".into(), family(&self.ww));
        Value::Object(obj)
    }

    pub fn from_json(value: &Value, spec: &WeightSpec) -> Result<Self> {
        let (n0, nl) = (spec.width(0), spec.width(spec.layers()));
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Validation("psi must be an object".into()))?;
        if let Some(k) = obj.keys().find(|k| *k != "bw" && *k != "ww") {
            return Err(Error::Validation(format!("unknown psi family `{k}`")));
        }
        let family = |name: &str, shape: [usize; 2]| -> Result<BTreeMap<(usize, usize), Tensor>> {
            let fam = obj
                .get(name)
                .and_then(Value::as_object)
                .ok_or_else(|| Error::Validation(format!("psi.{name} missing")))?;
            let mut out = BTreeMap::new();
            for (key, v) in fam {
                let parsed = key
                    .split_once(',')
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                    .ok_or_else(|| Error::Validation(format!("bad psi key `{key}`")))?;
                out.insert(parsed, Tensor::from_nested_json(v, &shape)?);
            }
            Ok(out)
        };
        let psi = Self {
            bw: family("bw", [1, nl])?,
            ww: family("ww", [n0, nl])?,
        };
        psi.validate(spec)?;
        Ok(psi)
    }
}

fn check_chain_indices(spec: &WeightSpec, s: usize, t: usize) -> Result<()> {
    if !(s > t && s <= spec.layers()) {
        return Err(Error::IndexOrder(format!(
            "chain needs L >= s > t >= 0, got L = {}, s = {s}, t = {t}",
            spec.layers()
        )));
    }
    Ok(())
}

fn check_psi_indices(spec: &WeightSpec, s: usize, t: usize) -> Result<()> {
    let l = spec.layers();
    if !(s >= 1 && s <= l && t < l) {
        return Err(Error::IndexOrder(format!(
            "psi terms need L >= s > 0 and L > t >= 0, got L = {l}, s = {s}, t = {t}"
        )));
    }
    Ok(())
}

/// `[W]^(s,t) = W^(s) · W^(s-1) ··· W^(t+1)`, multiplied left to right.
pub fn w_chain(u: &WeightObject, s: usize, t: usize) -> Result<Tensor> {
    check_chain_indices(u.spec(), s, t)?;
    let mut acc = u.weight(s).clone();
    for i in (t + 1..s).rev() {
        acc = batched_matmul(&acc, u.weight(i))?;
    }
    Ok(acc)
}

/// `[Wb]^(s,t)(t) = [W]^(s,t) · b^(t)`.
pub fn wb_term(u: &WeightObject, s: usize, t: usize) -> Result<Tensor> {
    if t == 0 {
        return Err(Error::IndexOrder("[Wb] needs t > 0: layer 0 has no bias".into()));
    }
    batched_matvec(&w_chain(u, s, t)?, u.bias(t))
}

/// `b^(s) · ψ · [W]^(upper,t)` for an explicit row `ψ` of length `n_upper`.
///
/// With `upper = L` this is `[bW]^(s)(L,t)`; other values of `upper` express
/// the `[bW]^(s)(s,t)` composition identities.
pub fn bw_term_via(u: &WeightObject, s: usize, upper: usize, t: usize, psi_row: &Tensor) -> Result<Tensor> {
    let spec = u.spec();
    check_psi_indices(spec, s, t)?;
    check_chain_indices(spec, upper, t)?;
    if psi_row.shape() != [1, spec.width(upper)] {
        return Err(Error::Dimension(format!(
            "psi row has shape {:?}, expected [1, {}]",
            psi_row.shape(),
            spec.width(upper)
        )));
    }
    // ψ · [W]^(upper,t) per slice, then the outer product with b^(s).
    let chain = w_chain(u, upper, t)?;
    let (nu, nt, ns) = (spec.width(upper), spec.width(t), spec.width(s));
    let bias = u.bias(s);
    let slices = bias.len() / ns;
    let mut out_shape = bias.shape().to_vec();
    out_shape.push(nt);
    let mut out = vec![0.0; slices * ns * nt];
    let mut row = vec![0.0; nt];
    for c in 0..slices {
        row.iter_mut().for_each(|x| *x = 0.0);
        let m = &chain.data()[c * nu * nt..(c + 1) * nu * nt];
        for (a, &psi) in psi_row.data().iter().enumerate() {
            for q in 0..nt {
                row[q] += psi * m[a * nt + q];
            }
        }
        let b = &bias.data()[c * ns..(c + 1) * ns];
        for p in 0..ns {
            for q in 0..nt {
                out[(c * ns + p) * nt + q] = b[p] * row[q];
            }
        }
    }
    Tensor::new(out_shape, out)
}

/// `[bW]^(s)(L,t) = b^(s) · Ψ^(s)(L,t) · [W]^(L,t)`.
pub fn bw_term(u: &WeightObject, s: usize, t: usize, psi: &PsiParams) -> Result<Tensor> {
    check_psi_indices(u.spec(), s, t)?;
    bw_term_via(u, s, u.spec().layers(), t, psi.bw(s, t)?)
}

/// `[W]^(s,0) · ψ · [W]^(upper,t)` for an explicit `ψ` of shape `[n_0, n_upper]`.
pub fn ww_term_via(u: &WeightObject, s: usize, upper: usize, t: usize, psi: &Tensor) -> Result<Tensor> {
    let spec = u.spec();
    check_psi_indices(spec, s, t)?;
    check_chain_indices(spec, upper, t)?;
    if psi.shape() != [spec.width(0), spec.width(upper)] {
        return Err(Error::Dimension(format!(
            "psi has shape {:?}, expected [{}, {}]",
            psi.shape(),
            spec.width(0),
            spec.width(upper)
        )));
    }
    let left = matmul_shared_right(&w_chain(u, s, 0)?, psi)?;
    batched_matmul(&left, &w_chain(u, upper, t)?)
}

/// `[WW]^(s,0)(L,t) = [W]^(s,0) · Ψ^(s,0)(L,t) · [W]^(L,t)`.
pub fn ww_term(u: &WeightObject, s: usize, t: usize, psi: &PsiParams) -> Result<Tensor> {
    check_psi_indices(u.spec(), s, t)?;
    ww_term_via(u, s, u.spec().layers(), t, psi.ww(s, t)?)
}

/// Every stable term of one weight object, evaluated once.
#[derive(Debug, Clone)]
pub struct StableTermSet {
    layers: usize,
    w: BTreeMap<(usize, usize), Tensor>,
    wb: BTreeMap<(usize, usize), Tensor>,
    bw: BTreeMap<(usize, usize), Tensor>,
    ww: BTreeMap<(usize, usize), Tensor>,
    b: Vec<Tensor>,
}

impl StableTermSet {
    pub fn layers(&self) -> usize {
        self.layers
    }

    /// `[W]^(s,t)`. Panics outside `L ≥ s > t ≥ 0`.
    pub fn w(&self, s: usize, t: usize) -> &Tensor {
        self.w.get(&(s, t)).unwrap_or_else(|| panic!("no [W]^({s},{t})"))
    }

    /// `[Wb]^(s,t)(t)`. Panics outside `L ≥ s > t > 0`.
    pub fn wb(&self, s: usize, t: usize) -> &Tensor {
        self.wb.get(&(s, t)).unwrap_or_else(|| panic!("no [Wb]^({s},{t})({t})"))
    }

    /// `[bW]^(s)(L,t)`.
    pub fn bw(&self, s: usize, t: usize) -> &Tensor {
        self.bw.get(&(s, t)).unwrap_or_else(|| panic!("no [bW]^({s})(L,{t})"))
    }

    /// `[WW]^(s,0)(L,t)`.
    pub fn ww(&self, s: usize, t: usize) -> &Tensor {
        self.ww.get(&(s, t)).unwrap_or_else(|| panic!("no [WW]^({s},0)(L,{t})"))
    }

    /// `b^(s)`, `s` in `1..=L`.
    pub fn b(&self, s: usize) -> &Tensor {
        &self.b[s - 1]
    }

    pub fn w_map(&self) -> &BTreeMap<(usize, usize), Tensor> {
        &self.w
    }

    pub fn wb_map(&self) -> &BTreeMap<(usize, usize), Tensor> {
        &self.wb
    }

    pub fn bw_map(&self) -> &BTreeMap<(usize, usize), Tensor> {
        &self.bw
    }

    pub fn ww_map(&self) -> &BTreeMap<(usize, usize), Tensor> {
        &self.ww
    }
}

/// Evaluates all five families. Chains are built by extending
/// `[W]^(s,t) = W^(s) · [W]^(s-1,t)`, so each needs one product.
pub fn all_terms(u: &WeightObject, psi: &PsiParams) -> Result<StableTermSet> {
    let spec = u.spec();
    psi.validate(spec)?;
    let l = spec.layers();
    let mut w = BTreeMap::new();
    for t in 0..l {
        let mut acc = u.weight(t + 1).clone();
        w.insert((t + 1, t), acc.clone());
        for s in t + 2..=l {
            acc = batched_matmul(u.weight(s), &acc)?;
            w.insert((s, t), acc.clone());
        }
    }
    let mut wb = BTreeMap::new();
    for t in 1..l {
        for s in t + 1..=l {
            wb.insert((s, t), batched_matvec(&w[&(s, t)], u.bias(t))?);
        }
    }
    let mut bw = BTreeMap::new();
    let mut ww = BTreeMap::new();
    let (nl, n0) = (spec.width(l), spec.width(0));
    for (s, t) in psi_keys(l) {
        // ψ [W]^(L,t) is shared by every s; recomputing it is O(n²) per key.
        let chain_lt = &w[&(l, t)];
        let nt = spec.width(t);
        let ns = spec.width(s);
        let bias = u.bias(s);
        let slices = bias.len() / ns;
        let psi_row = psi.bw(s, t)?;
        let mut out = vec![0.0; slices * ns * nt];
        for c in 0..slices {
            let m = &chain_lt.data()[c * nl * nt..(c + 1) * nl * nt];
            let mut row = vec![0.0; nt];
            for (a, &p) in psi_row.data().iter().enumerate() {
                for q in 0..nt {
                    row[q] += p * m[a * nt + q];
                }
            }
            for p in 0..ns {
                for q in 0..nt {
                    out[(c * ns + p) * nt + q] = bias.data()[c * ns + p] * row[q];
                }
            }
        }
        let mut shape = bias.shape().to_vec();
        shape.push(nt);
        bw.insert((s, t), Tensor::new(shape, out)?);

        let psi_m = psi.ww(s, t)?;
        debug_assert_eq!(psi_m.shape(), [n0, nl]);
        let left = matmul_shared_right(&w[&(s, 0)], psi_m)?;
        ww.insert((s, t), batched_matmul(&left, chain_lt)?);
    }
    Ok(StableTermSet {
        layers: l,
        w,
        wb,
        bw,
        ww,
        b: u.biases().to_vec(),
    })
}
