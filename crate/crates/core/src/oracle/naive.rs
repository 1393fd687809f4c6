//! Reference forwards written as literal nested sums.
//!
//! Nothing here uses the contraction engine or the matmul helpers: stable
//! terms are rebuilt from scratch with explicit loops over plain `Vec`s.
#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;

use crate::densekit::Tensor;
use crate::error::{Error, Result};
use crate::layers::{EquivariantParams, InvariantParams};
use crate::stableterms::PsiParams;
use crate::weightspace::WeightObject;

type Mat = Vec<Vec<f64>>;

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let (rows, inner, cols) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; cols]; rows];
    for i in 0..rows {
        for k in 0..cols {
            let mut acc = 0.0;
            for j in 0..inner {
                acc += a[i][j] * b[j][k];
            }
            out[i][k] = acc;
        }
    }
    out
}

fn trace(m: &Mat) -> f64 {
    (0..m.len()).map(|p| m[p][p]).sum()
}

/// Stable terms of one `(batch item, channel)` slice.
pub struct SliceTerms {
    layers: usize,
    w: HashMap<(usize, usize), Mat>,
    wb: HashMap<(usize, usize), Vec<f64>>,
    bw: HashMap<(usize, usize), Mat>,
    ww: HashMap<(usize, usize), Mat>,
    b: Vec<Vec<f64>>,
}

impl SliceTerms {
    /// `u` must be batched; `item` and `channel` select the slice.
    pub fn new(u: &WeightObject, item: usize, channel: usize, psi: &PsiParams) -> Result<Self> {
        let spec = u.spec();
        let l = spec.layers();
        let n = |i: usize| spec.width(i);
        let weight = |i: usize| -> Mat {
            (0..n(i))
                .map(|j| (0..n(i - 1)).map(|k| u.weight(i).get(&[item, channel, j, k])).collect())
                .collect()
        };
        let bias = |i: usize| -> Vec<f64> { (0..n(i)).map(|j| u.bias(i).get(&[item, channel, j])).collect() };

        let mut w = HashMap::new();
        for s in 1..=l {
            for t in 0..s {
                let mut acc = weight(t + 1);
                for i in t + 2..=s {
                    acc = mat_mul(&weight(i), &acc);
                }
                w.insert((s, t), acc);
            }
        }
        let mut wb = HashMap::new();
        for s in 2..=l {
            for t in 1..s {
                let chain: &Mat = &w[&(s, t)];
                let bt = bias(t);
                let v = chain
                    .iter()
                    .map(|row| row.iter().zip(&bt).map(|(x, y)| x * y).sum())
                    .collect();
                wb.insert((s, t), v);
            }
        }
        let to_mat = |t: &Tensor| -> Mat {
            let (r, c) = (t.shape()[0], t.shape()[1]);
            (0..r).map(|i| (0..c).map(|j| t.get(&[i, j])).collect()).collect()
        };
        let mut bw = HashMap::new();
        let mut ww = HashMap::new();
        for s in 1..=l {
            for t in 0..l {
                let chain = &w[&(l, t)];
                let col: Mat = bias(s).into_iter().map(|x| vec![x]).collect();
                let row = mat_mul(&to_mat(psi.bw(s, t)?), chain);
                bw.insert((s, t), mat_mul(&col, &row));
                let left = mat_mul(&w[&(s, 0)], &to_mat(psi.ww(s, t)?));
                ww.insert((s, t), mat_mul(&left, chain));
            }
        }
        let b = (1..=l).map(bias).collect();
        Ok(Self {
            layers: l,
            w,
            wb,
            bw,
            ww,
            b,
        })
    }

    pub fn w(&self, s: usize, t: usize) -> &Mat {
        &self.w[&(s, t)]
    }

    pub fn wb(&self, s: usize, t: usize) -> &[f64] {
        &self.wb[&(s, t)]
    }

    pub fn bw(&self, s: usize, t: usize) -> &Mat {
        &self.bw[&(s, t)]
    }

    pub fn ww(&self, s: usize, t: usize) -> &Mat {
        &self.ww[&(s, t)]
    }

    pub fn b(&self, s: usize) -> &[f64] {
        &self.b[s - 1]
    }

    pub fn trace_ww(&self, s: usize) -> f64 {
        trace(self.ww(s, s))
    }

    pub fn trace_bw(&self, t: usize) -> f64 {
        trace(self.bw(t, t))
    }

    pub fn layers(&self) -> usize {
        self.layers
    }
}

fn all_slices(u: &WeightObject, psi: &PsiParams) -> Result<Vec<Vec<SliceTerms>>> {
    (0..u.batch_len())
        .map(|b| {
            (0..u.spec().channels())
                .map(|c| SliceTerms::new(u, b, c, psi))
                .collect()
        })
        .collect()
}

fn check(spec: &crate::weightspace::WeightSpec, u: &WeightObject) -> Result<()> {
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

pub fn naive_equivariant_forward(params: &EquivariantParams, u: &WeightObject) -> Result<WeightObject> {
    let spec = params.spec();
    check(spec, u)?;
    let ub = u.to_batched();
    let slices = all_slices(&ub, params.psi())?;
    let l = spec.layers();
    let n = |i: usize| spec.width(i);
    let (n0, nl) = (n(0), n(l));
    let (bsz, d, e) = (ub.batch_len(), spec.channels(), params.out_channels());
    let phi = |path: &str, idx: &[usize]| params.blocks().get(path).expect("layout block").get(idx);

    let mut weights: Vec<Tensor> = (1..=l).map(|i| Tensor::zeros(&[bsz, e, n(i), n(i - 1)])).collect();
    let mut biases: Vec<Tensor> = (1..=l).map(|i| Tensor::zeros(&[bsz, e, n(i)])).collect();

    for b in 0..bsz {
        for eo in 0..e {
            // i = L
            for j in 0..nl {
                for k in 0..n(l - 1) {
                    let mut acc = 0.0;
                    for c in 0..d {
                        let t = &slices[b][c];
                        for p in 0..nl {
                            acc += phi("case_L.phiW_L_W", &[eo, c, p, j]) * t.w(l, l - 1)[p][k];
                            acc += phi("case_L.phiW_L_WW", &[eo, c, p, j]) * t.ww(l, l - 1)[p][k];
                            acc += phi("case_L.phiW_L_bW", &[eo, c, p, j]) * t.bw(l, l - 1)[p][k];
                        }
                    }
                    weights[l - 1].set(&[b, eo, j, k], acc);
                }
                let mut acc = phi("case_L.phib_L_1", &[eo, j]);
                for c in 0..d {
                    let t = &slices[b][c];
                    for p in 0..nl {
                        for q in 0..n0 {
                            acc += phi("case_L.phib_L_WWLL", &[eo, c, p, q, j]) * t.ww(l, 0)[p][q];
                            acc += phi("case_L.phib_L_WL0", &[eo, c, p, q, j]) * t.w(l, 0)[p][q];
                            acc += phi("case_L.phib_L_bWLL0", &[eo, c, p, q, j]) * t.bw(l, 0)[p][q];
                        }
                    }
                    for s in 1..l {
                        for p in 0..n(s) {
                            acc += phi(&format!("case_L.phib_L_trWW.{s}"), &[eo, c, j]) * t.ww(s, s)[p][p];
                        }
                    }
                    for tt in 1..l {
                        for p in 0..nl {
                            acc += phi(&format!("case_L.phib_L_Wb.{tt}"), &[eo, c, p, j]) * t.wb(l, tt)[p];
                        }
                        for p in 0..n(tt) {
                            acc += phi(&format!("case_L.phib_L_trbW.{tt}"), &[eo, c, j]) * t.bw(tt, tt)[p][p];
                        }
                    }
                    for p in 0..nl {
                        acc += phi("case_L.phib_L_b", &[eo, c, p, j]) * t.b(l)[p];
                    }
                }
                biases[l - 1].set(&[b, eo, j], acc);
            }

            // i = 1
            for j in 0..n(1) {
                for k in 0..n0 {
                    let mut acc = 0.0;
                    for c in 0..d {
                        let t = &slices[b][c];
                        for q in 0..n0 {
                            acc += phi("case_1.phiW_1_W", &[c, eo, q, k]) * t.w(1, 0)[j][q];
                            acc += phi("case_1.phiW_1_WW", &[c, eo, q, k]) * t.ww(1, 0)[j][q];
                            acc += phi("case_1.phiW_1_bW", &[c, eo, q, k]) * t.bw(1, 0)[j][q];
                        }
                        acc += phi("case_1.phiW_1_b", &[c, eo, k]) * t.b(1)[j];
                    }
                    weights[0].set(&[b, eo, j, k], acc);
                }
                let mut acc = 0.0;
                for c in 0..d {
                    let t = &slices[b][c];
                    for q in 0..n0 {
                        acc += phi("case_1.phib_1_W", &[c, eo, q]) * t.w(1, 0)[j][q];
                        acc += phi("case_1.phib_1_WW", &[c, eo, q]) * t.ww(1, 0)[j][q];
                        acc += phi("case_1.phib_1_bW", &[c, eo, q]) * t.bw(1, 0)[j][q];
                    }
                    acc += phi("case_1.phib_1_b", &[c, eo]) * t.b(1)[j];
                }
                biases[0].set(&[b, eo, j], acc);
            }

            // 1 < i < L
            for i in 2..l {
                let key = |name: &str| format!("case_mid.{i}.{name}");
                for j in 0..n(i) {
                    for k in 0..n(i - 1) {
                        let mut acc = 0.0;
                        for c in 0..d {
                            let t = &slices[b][c];
                            acc += phi(&key("scalarsW.W"), &[c, eo]) * t.w(i, i - 1)[j][k];
                            acc += phi(&key("scalarsW.WW"), &[c, eo]) * t.ww(i, i - 1)[j][k];
                            acc += phi(&key("scalarsW.bW"), &[c, eo]) * t.bw(i, i - 1)[j][k];
                        }
                        weights[i - 1].set(&[b, eo, j, k], acc);
                    }
                    let mut acc = 0.0;
                    for c in 0..d {
                        let t = &slices[b][c];
                        for q in 0..n0 {
                            acc += phi(&key("vecsb.W"), &[c, eo, q]) * t.w(i, 0)[j][q];
                            acc += phi(&key("vecsb.WW"), &[c, eo, q]) * t.ww(i, 0)[j][q];
                            acc += phi(&key("vecsb.bW"), &[c, eo, q]) * t.bw(i, 0)[j][q];
                        }
                        for tt in 1..i {
                            acc += phi(&key(&format!("vecsb.Wb.{tt}")), &[c, eo]) * t.wb(i, tt)[j];
                        }
                        acc += phi(&key("vecsb.b"), &[c, eo]) * t.b(i)[j];
                    }
                    biases[i - 1].set(&[b, eo, j], acc);
                }
            }
        }
    }

    let out = WeightObject::new(spec.with_channels(e)?, Some(bsz), weights, biases)?;
    Ok(if u.batch().is_none() { out.squeeze_batch() } else { out })
}

pub fn naive_invariant_forward(params: &InvariantParams, u: &WeightObject) -> Result<Tensor> {
    let spec = params.spec();
    check(spec, u)?;
    let ub = u.to_batched();
    let slices = all_slices(&ub, params.psi())?;
    let l = spec.layers();
    let n = |i: usize| spec.width(i);
    let (n0, nl) = (n(0), n(l));
    let (bsz, d, e, dk) = (ub.batch_len(), spec.channels(), params.e(), params.d_out());
    let phi = |path: &str, idx: &[usize]| params.blocks().get(path).expect("layout block").get(idx);

    let mut out = Tensor::zeros(&[bsz, e, dk]);
    for b in 0..bsz {
        for eo in 0..e {
            for k in 0..dk {
                let mut acc = phi("phi_1", &[eo, k]);
                for c in 0..d {
                    let t = &slices[b][c];
                    for p in 0..nl {
                        for q in 0..n0 {
                            acc += phi("phi_WWLL", &[c, eo, p, q, k]) * t.ww(l, 0)[p][q];
                            acc += phi("phi_WL0", &[c, eo, p, q, k]) * t.w(l, 0)[p][q];
                            acc += phi("phi_bWLL0", &[c, eo, p, q, k]) * t.bw(l, 0)[p][q];
                        }
                    }
                    for s in 1..l {
                        for p in 0..n(s) {
                            acc += phi(&format!("phi_trWW.{s}"), &[c, eo, k]) * t.ww(s, s)[p][p];
                        }
                    }
                    for tt in 1..l {
                        for p in 0..nl {
                            acc += phi(&format!("phi_Wb.{tt}"), &[c, eo, p, k]) * t.wb(l, tt)[p];
                        }
                        for p in 0..n(tt) {
                            acc += phi(&format!("phi_trbW.{tt}"), &[c, eo, k]) * t.bw(tt, tt)[p][p];
                        }
                    }
                    for p in 0..nl {
                        acc += phi("phi_b", &[c, eo, p, k]) * t.b(l)[p];
                    }
                }
                out.set(&[b, eo, k], acc);
            }
        }
    }
    if u.batch().is_none() {
        out.reshape(&[e, dk])
    } else {
        Ok(out)
    }
}
