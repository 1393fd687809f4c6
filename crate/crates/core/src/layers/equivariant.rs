//! The equivariant polynomial layer `E: U[d] -> U[e]`.
//!
//! Output layer `i` is a linear combination of the stable terms that transform
//! like `W^(i)` (resp. `b^(i)`). Three cases differ in which indices may carry
//! their own coefficient:
//!
//! - `i = L`: the row index of the output is fixed by the group, so every
//!   coefficient is indexed by the output row and the summed row index.
//! - `i = 1`: the column index runs over layer 0, also fixed, so coefficients
//!   are indexed by input and output columns.
//! - `1 < i < L`: both indices move, so each term gets one scalar per channel
//!   pair.
//!
//! Coefficients shared across an index are stored once and contracted against
//! traces or broadcasts; they are never expanded to constant tensors.

use crate::densekit::{contract, Rng, Tensor};
use crate::error::{Error, Result};
use crate::stableterms::{all_terms, PsiParams, StableTermSet};
use crate::weightspace::{WeightObject, WeightSpec};

use super::blocks::{BlockSpec, Blocks};

#[derive(Debug, Clone, PartialEq)]
pub struct EquivariantParams {
    spec: WeightSpec,
    out_channels: usize,
    blocks: Blocks,
    psi: PsiParams,
    #[doc(hidden)]
    pub sharing_fault: bool,
}

/// Block layout in storage order. `spec.channels()` is the input channel count.
pub fn equivariant_layout(spec: &WeightSpec, e: usize) -> Vec<BlockSpec> {
    let l = spec.layers();
    let d = spec.channels();
    let n = |i: usize| spec.width(i);
    let (n0, nl) = (n(0), n(l));
    let mut out = Vec::new();

    for name in ["W", "WW", "bW"] {
        out.push(BlockSpec::new(format!("case_L.phiW_L_{name}"), &[e, d, nl, nl], nl));
    }
    for name in ["WWLL", "WL0", "bWLL0"] {
        out.push(BlockSpec::new(
            format!("case_L.phib_L_{name}"),
            &[e, d, nl, n0, nl],
            nl * n0,
        ));
    }
    for s in 1..l {
        out.push(BlockSpec::new(format!("case_L.phib_L_trWW.{s}"), &[e, d, nl], n(s)));
    }
    for t in 1..l {
        out.push(BlockSpec::new(format!("case_L.phib_L_Wb.{t}"), &[e, d, nl, nl], nl));
    }
    for t in 1..l {
        out.push(BlockSpec::new(format!("case_L.phib_L_trbW.{t}"), &[e, d, nl], n(t)));
    }
    out.push(BlockSpec::new("case_L.phib_L_b", &[e, d, nl, nl], nl));
    out.push(BlockSpec::bias("case_L.phib_L_1", &[e, nl]));

    for name in ["W", "WW", "bW"] {
        out.push(BlockSpec::new(format!("case_1.phiW_1_{name}"), &[d, e, n0, n0], n0));
    }
    out.push(BlockSpec::new("case_1.phiW_1_b", &[d, e, n0], 1));
    for name in ["W", "WW", "bW"] {
        out.push(BlockSpec::new(format!("case_1.phib_1_{name}"), &[d, e, n0], n0));
    }
    out.push(BlockSpec::new("case_1.phib_1_b", &[d, e], 1));

    for i in 2..l {
        for name in ["W", "WW", "bW"] {
            out.push(BlockSpec::new(format!("case_mid.{i}.scalarsW.{name}"), &[d, e], 1));
        }
        for name in ["W", "WW", "bW"] {
            out.push(BlockSpec::new(format!("case_mid.{i}.vecsb.{name}"), &[d, e, n0], n0));
        }
        for t in 1..i {
            out.push(BlockSpec::new(format!("case_mid.{i}.vecsb.Wb.{t}"), &[d, e], 1));
        }
        out.push(BlockSpec::new(format!("case_mid.{i}.vecsb.b"), &[d, e], 1));
    }
    out
}

/// Closed-form count of stored Φ scalars (Ψ excluded).
pub fn equivariant_param_count(widths: &[usize], d: usize, e: usize) -> usize {
    let l = widths.len() - 1;
    let (n0, nl) = (widths[0], widths[l]);
    let de = d * e;
    let last = 3 * de * nl * nl + 3 * de * nl * n0 * nl + (l - 1) * de * nl * (nl + 2) + de * nl * nl + e * nl;
    let first = 3 * de * n0 * n0 + 4 * de * n0 + de;
    let middle: usize = (2..l).map(|i| 3 * de + 3 * de * n0 + (i - 1) * de + de).sum();
    last + first + middle
}

pub fn init_equivariant(spec: &WeightSpec, d: usize, e: usize, rng: &mut Rng, scale: f64) -> Result<EquivariantParams> {
    if d == 0 || e == 0 {
        return Err(Error::InvalidSpec("channel counts must be positive".into()));
    }
    let spec = spec.with_channels(d)?;
    let psi = PsiParams::random(&spec, rng);
    let blocks = Blocks::random(equivariant_layout(&spec, e), d, rng, scale);
    Ok(EquivariantParams {
        spec,
        out_channels: e,
        blocks,
        psi,
        sharing_fault: false,
    })
}

impl EquivariantParams {
    /// All-zero Φ with the given Ψ.
    pub fn zeros(spec: &WeightSpec, e: usize, psi: PsiParams) -> Result<Self> {
        psi.validate(spec)?;
        Ok(Self {
            spec: spec.clone(),
            out_channels: e,
            blocks: Blocks::zeros(equivariant_layout(spec, e)),
            psi,
            sharing_fault: false,
        })
    }

    pub(crate) fn from_parts(spec: WeightSpec, e: usize, blocks: Blocks, psi: PsiParams) -> Self {
        Self {
            spec,
            out_channels: e,
            blocks,
            psi,
            sharing_fault: false,
        }
    }

    /// Widths plus input channel count.
    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn in_channels(&self) -> usize {
        self.spec.channels()
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn psi(&self) -> &PsiParams {
        &self.psi
    }

    pub fn psi_mut(&mut self) -> &mut PsiParams {
        &mut self.psi
    }

    pub fn blocks(&self) -> &Blocks {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut Blocks {
        &mut self.blocks
    }

    pub fn param_count(&self) -> usize {
        self.blocks.param_count()
    }

    pub fn forward(&self, u: &WeightObject) -> Result<WeightObject> {
        equivariant_forward(self, u)
    }
}

pub(crate) fn check_input(spec: &WeightSpec, u: &WeightObject) -> Result<()> {
    if u.spec() != spec {
        return Err(Error::Dimension(format!(
            "layer expects widths {:?} with {} channels, got widths {:?} with {} channels",
            spec.widths(),
            spec.channels(),
            u.spec().widths(),
            u.spec().channels()
        )));
    }
    Ok(())
}

fn add(out: &mut Tensor, spec: &str, ops: &[&Tensor]) -> Result<()> {
    out.add_assign(&contract(spec, ops)?)
}

pub fn equivariant_forward(params: &EquivariantParams, u: &WeightObject) -> Result<WeightObject> {
    check_input(&params.spec, u)?;
    let batched = u.to_batched();
    let terms = all_terms(&batched, &params.psi)?;
    let spec = &params.spec;
    let l = spec.layers();
    let bsz = batched.batch_len();
    let e = params.out_channels;

    let mut weights = Vec::with_capacity(l);
    let mut biases = Vec::with_capacity(l);
    for i in 1..=l {
        let (w, b) = if i == l {
            last_case(params, &terms, bsz)?
        } else if i == 1 {
            first_case(params, &terms, bsz)?
        } else {
            middle_case(params, &terms, i, bsz)?
        };
        weights.push(w);
        biases.push(b);
    }
    let out = WeightObject::new(spec.with_channels(e)?, Some(bsz), weights, biases)?;
    Ok(if u.batch().is_none() { out.squeeze_batch() } else { out })
}

fn last_case(p: &EquivariantParams, terms: &StableTermSet, bsz: usize) -> Result<(Tensor, Tensor)> {
    let spec = &p.spec;
    let l = spec.layers();
    let (nl, nprev) = (spec.width(l), spec.width(l - 1));
    let e = p.out_channels;
    let blk = |name: &str| p.blocks.at(&format!("case_L.{name}"));

    let mut w = Tensor::zeros(&[bsz, e, nl, nprev]);
    add(&mut w, "edpj,bdpk->bejk", &[blk("phiW_L_W"), terms.w(l, l - 1)])?;
    add(&mut w, "edpj,bdpk->bejk", &[blk("phiW_L_WW"), terms.ww(l, l - 1)])?;
    add(&mut w, "edpj,bdpk->bejk", &[blk("phiW_L_bW"), terms.bw(l, l - 1)])?;

    let mut b = Tensor::zeros(&[bsz, e, nl]);
    add(&mut b, "edpqj,bdpq->bej", &[blk("phib_L_WWLL"), terms.ww(l, 0)])?;
    add(&mut b, "edpqj,bdpq->bej", &[blk("phib_L_WL0"), terms.w(l, 0)])?;
    add(&mut b, "edpqj,bdpq->bej", &[blk("phib_L_bWLL0"), terms.bw(l, 0)])?;
    for s in 1..l {
        add(
            &mut b,
            "edj,bdpp->bej",
            &[blk(&format!("phib_L_trWW.{s}")), terms.ww(s, s)],
        )?;
    }
    for t in 1..l {
        add(
            &mut b,
            "edpj,bdp->bej",
            &[blk(&format!("phib_L_Wb.{t}")), terms.wb(l, t)],
        )?;
        add(
            &mut b,
            "edj,bdpp->bej",
            &[blk(&format!("phib_L_trbW.{t}")), terms.bw(t, t)],
        )?;
    }
    add(&mut b, "edpj,bdp->bej", &[blk("phib_L_b"), terms.b(l)])?;
    let ones = Tensor::filled(&[bsz], 1.0);
    add(&mut b, "ej,b->bej", &[blk("phib_L_1"), &ones])?;
    Ok((w, b))
}

fn first_case(p: &EquivariantParams, terms: &StableTermSet, bsz: usize) -> Result<(Tensor, Tensor)> {
    let spec = &p.spec;
    let l = spec.layers();
    let (n0, n1) = (spec.width(0), spec.width(1));
    let e = p.out_channels;
    let blk = |name: &str| p.blocks.at(&format!("case_1.{name}"));

    let mut w = Tensor::zeros(&[bsz, e, n1, n0]);
    let mut w_term = contract("bdjq,deqk->bejk", &[terms.w(1, 0), blk("phiW_1_W")])?;
    if p.sharing_fault {
        // Lets the coefficient vary with the output row j, which the group forbids.
        let data = w_term.data_mut();
        for (k, x) in data.iter_mut().enumerate() {
            let j = (k / n0) % n1;
            *x *= 1.0 + 0.5 * j as f64;
        }
    }
    w.add_assign(&w_term)?;
    add(&mut w, "bdjq,deqk->bejk", &[terms.ww(1, 0), blk("phiW_1_WW")])?;
    add(&mut w, "bdjq,deqk->bejk", &[terms.bw(1, 0), blk("phiW_1_bW")])?;
    add(&mut w, "bdj,dek->bejk", &[terms.b(1), blk("phiW_1_b")])?;

    let mut b = Tensor::zeros(&[bsz, e, n1]);
    add(&mut b, "bdjq,deq->bej", &[terms.w(1, 0), blk("phib_1_W")])?;
    add(&mut b, "bdjq,deq->bej", &[terms.ww(1, 0), blk("phib_1_WW")])?;
    add(&mut b, "bdjq,deq->bej", &[terms.bw(1, 0), blk("phib_1_bW")])?;
    add(&mut b, "bdj,de->bej", &[terms.b(1), blk("phib_1_b")])?;
    debug_assert!(l >= 2);
    Ok((w, b))
}

fn middle_case(p: &EquivariantParams, terms: &StableTermSet, i: usize, bsz: usize) -> Result<(Tensor, Tensor)> {
    let spec = &p.spec;
    let l = spec.layers();
    let (ni, nprev) = (spec.width(i), spec.width(i - 1));
    let e = p.out_channels;
    let blk = |name: &str| p.blocks.at(&format!("case_mid.{i}.{name}"));

    let mut w = Tensor::zeros(&[bsz, e, ni, nprev]);
    add(&mut w, "bdjk,de->bejk", &[terms.w(i, i - 1), blk("scalarsW.W")])?;
    add(&mut w, "bdjk,de->bejk", &[terms.ww(i, i - 1), blk("scalarsW.WW")])?;
    add(&mut w, "bdjk,de->bejk", &[terms.bw(i, i - 1), blk("scalarsW.bW")])?;

    let mut b = Tensor::zeros(&[bsz, e, ni]);
    add(&mut b, "bdjq,deq->bej", &[terms.w(i, 0), blk("vecsb.W")])?;
    add(&mut b, "bdjq,deq->bej", &[terms.ww(i, 0), blk("vecsb.WW")])?;
    add(&mut b, "bdjq,deq->bej", &[terms.bw(i, 0), blk("vecsb.bW")])?;
    for t in 1..i {
        add(&mut b, "bdj,de->bej", &[terms.wb(i, t), blk(&format!("vecsb.Wb.{t}"))])?;
    }
    add(&mut b, "bdj,de->bej", &[terms.b(i), blk("vecsb.b")])?;
    debug_assert!(i > 1 && i < l);
    Ok((w, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monomial::{GroupElement, Variant};
    use crate::weightspace::{random_weights, Distribution};

    const UNIT: Distribution = Distribution::Uniform { lo: -1.0, hi: 1.0 };

    #[test]
    fn middle_block_count_for_three_layers() {
        let spec = WeightSpec::new(vec![2, 2, 2, 2], 1).unwrap();
        let layout = equivariant_layout(&spec, 1);
        assert_eq!(layout.iter().filter(|b| b.path.starts_with("case_mid.2.")).count(), 8);
    }

    #[test]
    fn param_count_matches_layout() {
        for widths in [vec![1, 1, 1], vec![2, 3, 2], vec![3, 1, 4, 2], vec![2, 3, 1, 2, 3]] {
            for (d, e) in [(1, 1), (2, 3)] {
                let spec = WeightSpec::new(widths.clone(), d).unwrap();
                let p = init_equivariant(&spec, d, e, &mut Rng::new(0), 1.0).unwrap();
                assert_eq!(p.param_count(), equivariant_param_count(&widths, d, e));
            }
        }
    }

    #[test]
    fn zero_input_leaves_only_bias_row() {
        let spec = WeightSpec::new(vec![2, 3, 2], 2).unwrap();
        let p = init_equivariant(&spec, 2, 3, &mut Rng::new(5), 1.0).unwrap();
        let out = p.forward(&WeightObject::zeros(&spec, None)).unwrap();
        for i in 1..=2 {
            assert_eq!(out.weight(i).max_abs(), 0.0);
        }
        assert_eq!(out.bias(1).max_abs(), 0.0);
        assert_eq!(out.bias(2), p.blocks().at("case_L.phib_L_1"));
    }

    #[test]
    fn scale_zero_is_bias_free() {
        let spec = WeightSpec::new(vec![2, 2, 2], 1).unwrap();
        let p = init_equivariant(&spec, 1, 1, &mut Rng::new(5), 0.0).unwrap();
        let u = random_weights(&spec, &mut Rng::new(6), UNIT, Some(2)).unwrap();
        assert_eq!(p.forward(&u).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn equivariant_on_random_instance() {
        let spec = WeightSpec::new(vec![3, 2, 3, 2], 2).unwrap();
        let mut rng = Rng::new(11);
        let p = init_equivariant(&spec, 2, 3, &mut rng, 1.0).unwrap();
        let u = random_weights(&spec, &mut rng, UNIT, Some(2)).unwrap();
        for variant in [Variant::PositiveScaling, Variant::SignFlip] {
            let g = GroupElement::sample(&spec, variant, (0.25, 4.0), &mut rng).unwrap();
            let lhs = p.forward(&g.act(&u).unwrap()).unwrap();
            let rhs = g.act(&p.forward(&u).unwrap()).unwrap();
            let r = crate::densekit::max_rel_diff(&lhs.flatten(), &rhs.flatten());
            assert!(r <= 1e-10, "{variant:?}: {r}");
        }
    }

    #[test]
    fn injected_fault_breaks_equivariance() {
        let spec = WeightSpec::new(vec![2, 3, 2], 1).unwrap();
        let mut rng = Rng::new(12);
        let mut p = init_equivariant(&spec, 1, 1, &mut rng, 1.0).unwrap();
        p.sharing_fault = true;
        let u = random_weights(&spec, &mut rng, UNIT, None).unwrap();
        let g = GroupElement::sample(&spec, Variant::PositiveScaling, (0.25, 4.0), &mut rng).unwrap();
        let lhs = p.forward(&g.act(&u).unwrap()).unwrap();
        let rhs = g.act(&p.forward(&u).unwrap()).unwrap();
        assert!(crate::densekit::max_rel_diff(&lhs.flatten(), &rhs.flatten()) > 1e-6);
    }

    #[test]
    fn rejects_wrong_channels() {
        let spec = WeightSpec::new(vec![2, 2, 2], 2).unwrap();
        let p = init_equivariant(&spec, 2, 1, &mut Rng::new(0), 1.0).unwrap();
        let u = WeightObject::zeros(&spec.with_channels(1).unwrap(), None);
        assert!(matches!(p.forward(&u), Err(Error::Dimension(_))));
    }
}
