//! The invariant polynomial layer `I: U[d] -> R^{e x d'}`.
//!
//! Only terms whose free indices all sit at layers 0 and L survive, plus
//! traces of the terms that run from layer s back to layer s.

use crate::densekit::{contract, Rng, Tensor};
use crate::error::{Error, Result};
use crate::stableterms::{all_terms, PsiParams};
use crate::weightspace::{WeightObject, WeightSpec};

use super::blocks::{BlockSpec, Blocks};
use super::equivariant::check_input;

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantParams {
    spec: WeightSpec,
    e: usize,
    d_out: usize,
    blocks: Blocks,
    psi: PsiParams,
}

pub fn invariant_layout(spec: &WeightSpec, e: usize, d_out: usize) -> Vec<BlockSpec> {
    let l = spec.layers();
    let d = spec.channels();
    let (n0, nl) = (spec.width(0), spec.width(l));
    let mut out = vec![
        BlockSpec::new("phi_WWLL", &[d, e, nl, n0, d_out], nl * n0),
        BlockSpec::new("phi_WL0", &[d, e, nl, n0, d_out], nl * n0),
    ];
    for s in 1..l {
        out.push(BlockSpec::new(format!("phi_trWW.{s}"), &[d, e, d_out], spec.width(s)));
    }
    out.push(BlockSpec::new("phi_bWLL0", &[d, e, nl, n0, d_out], nl * n0));
    for t in 1..l {
        out.push(BlockSpec::new(format!("phi_Wb.{t}"), &[d, e, nl, d_out], nl));
    }
    for t in 1..l {
        out.push(BlockSpec::new(format!("phi_trbW.{t}"), &[d, e, d_out], spec.width(t)));
    }
    out.push(BlockSpec::new("phi_b", &[d, e, nl, d_out], nl));
    out.push(BlockSpec::bias("phi_1", &[e, d_out]));
    out
}

pub fn invariant_param_count(widths: &[usize], d: usize, e: usize, d_out: usize) -> usize {
    let l = widths.len() - 1;
    let (n0, nl) = (widths[0], widths[l]);
    let ded = d * e * d_out;
    3 * ded * nl * n0 + (l - 1) * ded * (nl + 2) + ded * nl + e * d_out
}

pub fn init_invariant(
    spec: &WeightSpec,
    d: usize,
    e: usize,
    d_out: usize,
    rng: &mut Rng,
    scale: f64,
) -> Result<InvariantParams> {
    if d == 0 || e == 0 || d_out == 0 {
        return Err(Error::InvalidSpec("channel counts must be positive".into()));
    }
    let spec = spec.with_channels(d)?;
    let psi = PsiParams::random(&spec, rng);
    let blocks = Blocks::random(invariant_layout(&spec, e, d_out), d, rng, scale);
    Ok(InvariantParams {
        spec,
        e,
        d_out,
        blocks,
        psi,
    })
}

impl InvariantParams {
    pub fn zeros(spec: &WeightSpec, e: usize, d_out: usize, psi: PsiParams) -> Result<Self> {
        psi.validate(spec)?;
        Ok(Self {
            spec: spec.clone(),
            e,
            d_out,
            blocks: Blocks::zeros(invariant_layout(spec, e, d_out)),
            psi,
        })
    }

    pub(crate) fn from_parts(spec: WeightSpec, e: usize, d_out: usize, blocks: Blocks, psi: PsiParams) -> Self {
        Self {
            spec,
            e,
            d_out,
            blocks,
            psi,
        }
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn in_channels(&self) -> usize {
        self.spec.channels()
    }

    pub fn e(&self) -> usize {
        self.e
    }

    pub fn d_out(&self) -> usize {
        self.d_out
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

    pub fn forward(&self, u: &WeightObject) -> Result<Tensor> {
        invariant_forward(self, u)
    }
}

/// Output shape `[B, e, d']`, or `[e, d']` for an unbatched input.
pub fn invariant_forward(params: &InvariantParams, u: &WeightObject) -> Result<Tensor> {
    check_input(&params.spec, u)?;
    let batched = u.to_batched();
    let terms = all_terms(&batched, &params.psi)?;
    let l = params.spec.layers();
    let bsz = batched.batch_len();
    let blk = |name: &str| params.blocks.at(name);

    let mut out = Tensor::zeros(&[bsz, params.e, params.d_out]);
    let mut add = |spec: &str, ops: &[&Tensor]| -> Result<()> { out.add_assign(&contract(spec, ops)?) };
    add("bdpq,depqk->bek", &[terms.ww(l, 0), blk("phi_WWLL")])?;
    add("bdpq,depqk->bek", &[terms.w(l, 0), blk("phi_WL0")])?;
    for s in 1..l {
        add("bdpp,dek->bek", &[terms.ww(s, s), blk(&format!("phi_trWW.{s}"))])?;
    }
    add("bdpq,depqk->bek", &[terms.bw(l, 0), blk("phi_bWLL0")])?;
    for t in 1..l {
        add("bdp,depk->bek", &[terms.wb(l, t), blk(&format!("phi_Wb.{t}"))])?;
        add("bdpp,dek->bek", &[terms.bw(t, t), blk(&format!("phi_trbW.{t}"))])?;
    }
    add("bdp,depk->bek", &[terms.b(l), blk("phi_b")])?;
    let ones = Tensor::filled(&[bsz], 1.0);
    add("ek,b->bek", &[blk("phi_1"), &ones])?;

    if u.batch().is_none() {
        out.reshape(&[params.e, params.d_out])
    } else {
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densekit::max_rel_diff;
    use crate::monomial::{GroupElement, Variant};
    use crate::weightspace::{random_weights, Distribution};

    const UNIT: Distribution = Distribution::Uniform { lo: -1.0, hi: 1.0 };

    #[test]
    fn zero_input_gives_phi_1() {
        let spec = WeightSpec::new(vec![2, 3, 2], 2).unwrap();
        let p = init_invariant(&spec, 2, 3, 4, &mut Rng::new(1), 1.0).unwrap();
        let out = p.forward(&WeightObject::zeros(&spec, None)).unwrap();
        assert_eq!(&out, p.blocks().at("phi_1"));
    }

    #[test]
    fn param_count_matches_layout() {
        for widths in [vec![1, 1, 1], vec![2, 3, 2], vec![3, 1, 4, 2]] {
            let spec = WeightSpec::new(widths.clone(), 2).unwrap();
            let p = init_invariant(&spec, 2, 3, 2, &mut Rng::new(0), 1.0).unwrap();
            assert_eq!(p.param_count(), invariant_param_count(&widths, 2, 3, 2));
        }
    }

    #[test]
    fn linear_in_phi() {
        let spec = WeightSpec::new(vec![2, 2, 3, 2], 1).unwrap();
        let mut rng = Rng::new(3);
        let a = init_invariant(&spec, 1, 2, 2, &mut rng, 1.0).unwrap();
        let mut b = a.clone();
        b.blocks_mut()
            .set_flat(&rng.uniform_vec(a.param_count(), -1.0, 1.0))
            .unwrap();
        let mut sum = a.clone();
        let summed: Vec<f64> = a
            .blocks()
            .flatten()
            .iter()
            .zip(b.blocks().flatten())
            .map(|(x, y)| x + y)
            .collect();
        sum.blocks_mut().set_flat(&summed).unwrap();
        let u = random_weights(&spec, &mut rng, UNIT, Some(3)).unwrap();
        let lhs = sum.forward(&u).unwrap();
        let rhs = a.forward(&u).unwrap().add(&b.forward(&u).unwrap()).unwrap();
        assert!(max_rel_diff(lhs.data(), rhs.data()) <= 1e-12);
    }

    #[test]
    fn invariant_on_random_instance() {
        let spec = WeightSpec::new(vec![3, 2, 3, 2], 2).unwrap();
        let mut rng = Rng::new(21);
        let p = init_invariant(&spec, 2, 2, 3, &mut rng, 1.0).unwrap();
        let u = random_weights(&spec, &mut rng, UNIT, Some(2)).unwrap();
        for variant in [Variant::PositiveScaling, Variant::SignFlip] {
            let g = GroupElement::sample(&spec, variant, (0.25, 4.0), &mut rng).unwrap();
            let lhs = p.forward(&g.act(&u).unwrap()).unwrap();
            let rhs = p.forward(&u).unwrap();
            assert!(max_rel_diff(lhs.data(), rhs.data()) <= 1e-10);
        }
    }
}
