//! Monomial matrices `D·P_π` stored factored, the group `G` of per-layer
//! monomial factors with identity at layers `0` and `L`, and its action on
//! weight objects.
//!
//! Permutations are 0-based internally: `perm[j] = π(j)`. With that
//! convention `(P_π x)_j = x_{π⁻¹(j)}`, and
//! `[gW]^(i)_{jk} = (d^(i)_j / d^(i-1)_k) · W^(i)_{π_i⁻¹(j), π_{i-1}⁻¹(k)}`.

use serde::{Deserialize, Serialize};

use crate::densekit::{Rng, Tensor};
use crate::error::{Error, Result};
use crate::weightspace::{WeightObject, WeightSpec};

/// Which hidden-layer scalings `G` allows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Positive diagonal entries (ReLU-family symmetry).
    PositiveScaling,
    /// Diagonal entries in `{-1, +1}` (odd activations).
    SignFlip,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::PositiveScaling => "positive-scaling",
            Variant::SignFlip => "sign-flip",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive-scaling" | "positive" => Ok(Variant::PositiveScaling),
            "sign-flip" | "sign" => Ok(Variant::SignFlip),
            other => Err(Error::Config(format!("unknown group variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialElement {
    scales: Vec<f64>,
    perm: Vec<usize>,
}

impl MonomialElement {
    /// `scales` are the diagonal of `D`; `perm[j] = π(j)` (0-based).
    pub fn new(scales: Vec<f64>, perm: Vec<usize>) -> Result<Self> {
        if scales.len() != perm.len() {
            return Err(Error::InvalidGroupElement(format!(
                "{} scales but permutation of length {}",
                scales.len(),
                perm.len()
            )));
        }
        if let Some(s) = scales.iter().find(|s| !s.is_finite() || **s == 0.0) {
            return Err(Error::InvalidGroupElement(format!(
                "scale {s} is not a finite non-zero number"
            )));
        }
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::InvalidGroupElement(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        Ok(Self { scales, perm })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            scales: vec![1.0; n],
            perm: (0..n).collect(),
        }
    }

    pub fn permutation(perm: Vec<usize>) -> Result<Self> {
        Self::new(vec![1.0; perm.len()], perm)
    }

    pub fn diagonal(scales: Vec<f64>) -> Result<Self> {
        let n = scales.len();
        Self::new(scales, (0..n).collect())
    }

    pub fn size(&self) -> usize {
        self.scales.len()
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse_perm(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (j, &p) in self.perm.iter().enumerate() {
            inv[p] = j;
        }
        inv
    }

    pub fn is_identity(&self) -> bool {
        self.scales.iter().all(|&s| s == 1.0) && self.perm.iter().enumerate().all(|(j, &p)| j == p)
    }

    pub fn satisfies(&self, variant: Variant) -> bool {
        match variant {
            Variant::PositiveScaling => self.scales.iter().all(|&s| s > 0.0),
            Variant::SignFlip => self.scales.iter().all(|&s| s == 1.0 || s == -1.0),
        }
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &MonomialElement) -> Result<Self> {
        if self.size() != other.size() {
            return Err(Error::GroupMismatch(format!(
                "cannot compose monomials of sizes {} and {}",
                self.size(),
                other.size()
            )));
        }
        // D P_π D' P_σ = (D · diag(d'_{π⁻¹(j)})) P_{π∘σ}
        let inv = self.inverse_perm();
        let scales = (0..self.size())
            .map(|j| self.scales[j] * other.scales[inv[j]])
            .collect();
        let perm = other.perm.iter().map(|&s| self.perm[s]).collect();
        Ok(Self { scales, perm })
    }

    pub fn inverse(&self) -> Self {
        // (D P_π)⁻¹ = diag(1/d_{π(j)}) P_{π⁻¹}
        Self {
            scales: self.perm.iter().map(|&p| 1.0 / self.scales[p]).collect(),
            perm: self.inverse_perm(),
        }
    }

    /// `(D·P_π) x`.
    pub fn act_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.size() {
            return Err(Error::Dimension(format!(
                "vector of length {} for monomial of size {}",
                x.len(),
                self.size()
            )));
        }
        let inv = self.inverse_perm();
        Ok((0..x.len()).map(|j| self.scales[j] * x[inv[j]]).collect())
    }

    /// Dense `n x n` matrix `D·P_π`.
    pub fn to_dense(&self) -> Tensor {
        let n = self.size();
        let mut m = Tensor::zeros(&[n, n]);
        // column π(j) of row ... : (D P_π)_{i, k} = d_i [i == π(k)]
        for (k, &p) in self.perm.iter().enumerate() {
            m.set(&[p, k], self.scales[p]);
        }
        m
    }

    /// `g · T` on the second-to-last axis of `t: [..., n, m]`.
    pub fn left_act_matrix(&self, t: &Tensor) -> Result<Tensor> {
        let s = t.shape();
        if s.len() < 2 || s[s.len() - 2] != self.size() {
            return Err(Error::Dimension(format!(
                "cannot left-act size {} on {s:?}",
                self.size()
            )));
        }
        let inv = self.inverse_perm();
        let n = self.size();
        let m = s[s.len() - 1];
        let mut out = Tensor::zeros(s);
        for (slice, src) in out.data_mut().chunks_mut(n * m).zip(t.data().chunks(n * m)) {
            for j in 0..n {
                let from = inv[j];
                for k in 0..m {
                    slice[j * m + k] = self.scales[j] * src[from * m + k];
                }
            }
        }
        Ok(out)
    }

    /// `T · g⁻¹` on the last axis of `t: [..., m, n]`.
    pub fn right_act_inverse(&self, t: &Tensor) -> Result<Tensor> {
        let s = t.shape();
        if s.is_empty() || s[s.len() - 1] != self.size() {
            return Err(Error::Dimension(format!(
                "cannot right-act size {} on {s:?}",
                self.size()
            )));
        }
        let inv = self.inverse_perm();
        let n = self.size();
        let mut out = Tensor::zeros(s);
        for (row, src) in out.data_mut().chunks_mut(n).zip(t.data().chunks(n)) {
            for k in 0..n {
                row[k] = src[inv[k]] / self.scales[k];
            }
        }
        Ok(out)
    }

    /// `g · v` on the last axis of `t: [..., n]`.
    pub fn left_act_vector(&self, t: &Tensor) -> Result<Tensor> {
        let s = t.shape();
        if s.is_empty() || s[s.len() - 1] != self.size() {
            return Err(Error::Dimension(format!(
                "cannot act size {} on vector {s:?}",
                self.size()
            )));
        }
        let inv = self.inverse_perm();
        let n = self.size();
        let mut out = Tensor::zeros(s);
        for (row, src) in out.data_mut().chunks_mut(n).zip(t.data().chunks(n)) {
            for j in 0..n {
                row[j] = self.scales[j] * src[inv[j]];
            }
        }
        Ok(out)
    }
}

/// `g = (g^(0), …, g^(L))`, one monomial factor per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    variant: Variant,
    layers: Vec<MonomialElement>,
}

impl GroupElement {
    /// Element of `G`: boundary factors must be identities and hidden factors
    /// must satisfy the variant.
    pub fn new(spec: &WeightSpec, variant: Variant, layers: Vec<MonomialElement>) -> Result<Self> {
        let g = Self::new_general(spec, variant, layers)?;
        let l = spec.layers();
        if !g.layers[0].is_identity() || !g.layers[l].is_identity() {
            return Err(Error::InvalidGroupElement(
                "factors at layers 0 and L must be identities".into(),
            ));
        }
        if let Some(i) = (1..l).find(|&i| !g.layers[i].satisfies(variant)) {
            return Err(Error::InvalidGroupElement(format!(
                "layer {i} violates the {} constraint",
                variant.name()
            )));
        }
        Ok(g)
    }

    /// Element of the larger product group with arbitrary boundary factors.
    /// Only the sizes are checked; the variant is carried along as a label.
    pub fn new_general(spec: &WeightSpec, variant: Variant, layers: Vec<MonomialElement>) -> Result<Self> {
        if layers.len() != spec.layers() + 1 {
            return Err(Error::GroupMismatch(format!(
                "{} factors for a spec with L = {}",
                layers.len(),
                spec.layers()
            )));
        }
        for (i, m) in layers.iter().enumerate() {
            if m.size() != spec.width(i) {
                return Err(Error::GroupMismatch(format!(
                    "factor {i} has size {} but n_{i} = {}",
                    m.size(),
                    spec.width(i)
                )));
            }
        }
        Ok(Self { variant, layers })
    }

    pub fn identity(spec: &WeightSpec, variant: Variant) -> Self {
        Self {
            variant,
            layers: spec.widths().iter().map(|&n| MonomialElement::identity(n)).collect(),
        }
    }

    /// Random element of `G`: hidden scales log-uniform in `scale_range`
    /// (positive variant) or fair signs, plus uniform permutations.
    pub fn sample(spec: &WeightSpec, variant: Variant, scale_range: (f64, f64), rng: &mut Rng) -> Result<Self> {
        let (lo, hi) = scale_range;
        if variant == Variant::PositiveScaling && !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!(
                "scale range ({lo}, {hi}) must satisfy 0 < lo <= hi"
            )));
        }
        let l = spec.layers();
        let mut layers = Vec::with_capacity(l + 1);
        layers.push(MonomialElement::identity(spec.width(0)));
        for i in 1..l {
            let n = spec.width(i);
            let scales: Vec<f64> = match variant {
                Variant::PositiveScaling => (0..n).map(|_| rng.uniform(lo.ln(), hi.ln()).exp()).collect(),
                Variant::SignFlip => (0..n).map(|_| rng.sign()).collect(),
            };
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            layers.push(MonomialElement { scales, perm });
        }
        layers.push(MonomialElement::identity(spec.width(l)));
        Ok(Self { variant, layers })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// `g^(i)`, `i` in `0..=L`.
    pub fn layer(&self, i: usize) -> &MonomialElement {
        &self.layers[i]
    }

    pub fn layers(&self) -> &[MonomialElement] {
        &self.layers
    }

    pub fn is_identity(&self) -> bool {
        self.layers.iter().all(MonomialElement::is_identity)
    }

    fn check_widths(&self, widths: &[usize]) -> Result<()> {
        if self.layers.len() != widths.len() || self.layers.iter().zip(widths).any(|(m, &n)| m.size() != n) {
            return Err(Error::GroupMismatch(format!(
                "group element sizes {:?} do not match widths {widths:?}",
                self.layers.iter().map(MonomialElement::size).collect::<Vec<_>>()
            )));
        }
        Ok(())
    }

    /// Layerwise product `self · other`.
    pub fn compose(&self, other: &GroupElement) -> Result<Self> {
        if self.variant != other.variant {
            return Err(Error::GroupMismatch(
                "cannot compose elements of different variants".into(),
            ));
        }
        if self.layers.len() != other.layers.len() {
            return Err(Error::GroupMismatch("elements belong to different specs".into()));
        }
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.compose(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variant: self.variant,
            layers,
        })
    }

    pub fn inverse(&self) -> Self {
        Self {
            variant: self.variant,
            layers: self.layers.iter().map(MonomialElement::inverse).collect(),
        }
    }

    /// `gU`: `[gW]^(i) = g^(i) W^(i) (g^(i-1))⁻¹`, `[gb]^(i) = g^(i) b^(i)`,
    /// applied identically over batch and channel axes.
    pub fn act(&self, u: &WeightObject) -> Result<WeightObject> {
        let spec = u.spec();
        self.check_widths(spec.widths())?;
        let l = spec.layers();
        let mut weights = Vec::with_capacity(l);
        let mut biases = Vec::with_capacity(l);
        for i in 1..=l {
            let (rows, cols) = (&self.layers[i], &self.layers[i - 1]);
            let (ri, ci) = (rows.inverse_perm(), cols.inverse_perm());
            let (n, m) = (rows.size(), cols.size());
            let w = u.weight(i);
            let mut out = Tensor::zeros(w.shape());
            for (dst, src) in out.data_mut().chunks_mut(n * m).zip(w.data().chunks(n * m)) {
                for j in 0..n {
                    for k in 0..m {
                        dst[j * m + k] = (rows.scales[j] / cols.scales[k]) * src[ri[j] * m + ci[k]];
                    }
                }
            }
            weights.push(out);
            biases.push(rows.left_act_vector(u.bias(i))?);
        }
        WeightObject::new(spec.clone(), u.batch(), weights, biases)
    }
}
