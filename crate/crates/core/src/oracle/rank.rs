//! Linear independence of stable-term features, checked numerically.
//!
//! Polynomials are linearly independent exactly when their evaluations at
//! enough generic points are, so each family is sampled at `3F` random weight
//! objects and the singular values of the resulting design matrix decide the
//! rank.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::densekit::Rng;
use crate::error::{Error, Result};
use crate::stableterms::PsiParams;
use crate::weightspace::{random_weights, Distribution, WeightSpec};

use super::naive::SliceTerms;

/// Full rank means `σ_min / σ_max` at or above this.
pub const RANK_THRESHOLD: f64 = 1e-6;

/// One scalar-valued family of stable-term entries.
///
/// `BW(s, t)` is `[bW]^(s)(L,t)` and `WW(s, t)` is `[WW]^(s,0)(L,t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Feature {
    W(usize, usize),
    Wb(usize, usize),
    BW(usize, usize),
    WW(usize, usize),
    B(usize),
    TraceWW(usize),
    TraceBW(usize),
    Const,
}

impl Feature {
    /// Columns contributed per channel (the constant contributes one in total).
    pub fn width(&self, spec: &WeightSpec) -> usize {
        let n = |i: usize| spec.width(i);
        match *self {
            Feature::W(s, t) | Feature::BW(s, t) | Feature::WW(s, t) => n(s) * n(t),
            Feature::Wb(s, _) | Feature::B(s) => n(s),
            Feature::TraceWW(_) | Feature::TraceBW(_) | Feature::Const => 1,
        }
    }

    fn values(&self, t: &SliceTerms, out: &mut Vec<f64>) {
        let flat = |m: &Vec<Vec<f64>>, out: &mut Vec<f64>| m.iter().for_each(|r| out.extend_from_slice(r));
        match *self {
            Feature::W(s, u) => flat(t.w(s, u), out),
            Feature::Wb(s, u) => out.extend_from_slice(t.wb(s, u)),
            Feature::BW(s, u) => flat(t.bw(s, u), out),
            Feature::WW(s, u) => flat(t.ww(s, u), out),
            Feature::B(s) => out.extend_from_slice(t.b(s)),
            Feature::TraceWW(s) => out.push(t.trace_ww(s)),
            Feature::TraceBW(s) => out.push(t.trace_bw(s)),
            Feature::Const => {}
        }
    }

    fn valid(&self, l: usize) -> bool {
        match *self {
            Feature::W(s, t) => s <= l && s > t,
            Feature::Wb(s, t) => s <= l && s > t && t > 0,
            Feature::BW(s, t) | Feature::WW(s, t) => (1..=l).contains(&s) && t < l,
            Feature::B(s) => (1..=l).contains(&s),
            Feature::TraceWW(s) | Feature::TraceBW(s) => (1..l).contains(&s),
            Feature::Const => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureFamily {
    /// Raw bias entries.
    Biases,
    /// Every `[W]^(s,t)` except `(L,0)`, every bias, `[Wb]^(s,t)` with `s < L`, and the constant.
    AssertedIndependent,
    /// Everything the invariant layer reads, in its order, with the constant last.
    Invariant,
    Custom(Vec<Feature>),
}

impl FeatureFamily {
    pub fn features(&self, spec: &WeightSpec) -> Vec<Feature> {
        let l = spec.layers();
        match self {
            FeatureFamily::Biases => (1..=l).map(Feature::B).collect(),
            FeatureFamily::AssertedIndependent => {
                let mut out = Vec::new();
                for s in 1..=l {
                    for t in 0..s {
                        if (s, t) != (l, 0) {
                            out.push(Feature::W(s, t));
                        }
                    }
                }
                out.extend((1..=l).map(Feature::B));
                for s in 2..l {
                    for t in 1..s {
                        out.push(Feature::Wb(s, t));
                    }
                }
                out.push(Feature::Const);
                out
            }
            FeatureFamily::Invariant => {
                let mut out = vec![Feature::WW(l, 0), Feature::W(l, 0)];
                out.extend((1..l).rev().map(Feature::TraceWW));
                out.push(Feature::BW(l, 0));
                out.extend((1..l).rev().map(|t| Feature::Wb(l, t)));
                out.extend((1..l).rev().map(Feature::TraceBW));
                out.push(Feature::B(l));
                out.push(Feature::Const);
                out
            }
            FeatureFamily::Custom(f) => f.clone(),
        }
    }
}

/// Column count `F` for `features` on `spec`.
pub fn feature_count(spec: &WeightSpec, features: &[Feature]) -> usize {
    let d = spec.channels();
    features
        .iter()
        .map(|f| if *f == Feature::Const { 1 } else { d * f.width(spec) })
        .sum()
}

/// Row `r` holds every selected entry at the `r`-th random weight object
/// (entries uniform(-1, 1)). Columns run channel by channel through the
/// non-constant features; one constant column closes the row if requested.
pub fn feature_design_matrix(
    spec: &WeightSpec,
    psi: &PsiParams,
    features: &[Feature],
    samples: usize,
    rng: &mut Rng,
) -> Result<DMatrix<f64>> {
    psi.validate(spec)?;
    if let Some(f) = features.iter().find(|f| !f.valid(spec.layers())) {
        return Err(Error::IndexOrder(format!(
            "feature {f:?} is outside L = {}",
            spec.layers()
        )));
    }
    let cols = feature_count(spec, features);
    if samples < cols {
        return Err(Error::InsufficientSamples {
            needed: cols,
            got: samples,
        });
    }
    let has_const = features.contains(&Feature::Const);
    let dist = Distribution::Uniform { lo: -1.0, hi: 1.0 };
    let mut data = Vec::with_capacity(samples * cols);
    for _ in 0..samples {
        let u = random_weights(spec, rng, dist, Some(1))?;
        let start = data.len();
        for c in 0..spec.channels() {
            let t = SliceTerms::new(&u, 0, c, psi)?;
            for f in features {
                f.values(&t, &mut data);
            }
        }
        if has_const {
            data.push(1.0);
        }
        debug_assert_eq!(data.len() - start, cols);
    }
    Ok(DMatrix::from_row_slice(samples, cols, &data))
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankCheck {
    pub family: String,
    pub columns: usize,
    pub samples: usize,
    pub rank: usize,
    /// `σ_min / σ_max`, zero when every column vanishes.
    pub sigma_ratio: f64,
    pub full_rank: bool,
}

pub fn rank_check(
    name: &str,
    spec: &WeightSpec,
    psi: &PsiParams,
    features: &[Feature],
    rng: &mut Rng,
) -> Result<RankCheck> {
    let columns = feature_count(spec, features);
    let samples = 3 * columns;
    let m = feature_design_matrix(spec, psi, features, samples, rng)?;
    let sv = singular_values(&m);
    let max = sv.first().copied().unwrap_or(0.0);
    let min = sv.last().copied().unwrap_or(0.0);
    let sigma_ratio = if max > 0.0 { min / max } else { 0.0 };
    let rank = sv.iter().filter(|&&s| max > 0.0 && s >= RANK_THRESHOLD * max).count();
    Ok(RankCheck {
        family: name.to_string(),
        columns,
        samples,
        rank,
        sigma_ratio,
        full_rank: sigma_ratio >= RANK_THRESHOLD,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub widths: Vec<usize>,
    pub channels: usize,
    /// Families whose coefficients must all vanish in a zero combination.
    pub asserted_independent: Vec<RankCheck>,
    /// Families that may carry relations; reported, not required to be full rank.
    pub coupled: Vec<RankCheck>,
    /// Every rank-deficient family, with its deficiency.
    pub degeneracies: Vec<Degeneracy>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Degeneracy {
    pub family: String,
    pub rank: usize,
    pub columns: usize,
}

impl IndependenceReport {
    /// True when every asserted family reached full numerical rank.
    pub fn asserted_ok(&self) -> bool {
        self.asserted_independent.iter().all(|c| c.full_rank)
    }
}

/// Rank of the families that must be independent, the full invariant-layer
/// feature set, and each `{[W]^(L,0), [WW]^(s,0)(L,s)}` pair.
///
/// The invariant set is always short by `2(L-1)` per channel: the trace of
/// `[WW]^(s,0)(L,s)` equals `tr(Ψ [W]^(L,0))` and the trace of
/// `[bW]^(t)(L,t)` equals `Ψ [Wb]^(L,t)(t)`, both linear in other columns.
pub fn independence_report(spec: &WeightSpec, psi: &PsiParams, rng: &mut Rng) -> Result<IndependenceReport> {
    let l = spec.layers();
    let mut asserted = Vec::new();
    let families = [
        ("biases", FeatureFamily::Biases),
        ("asserted-independent", FeatureFamily::AssertedIndependent),
    ];
    for (name, fam) in families {
        asserted.push(rank_check(name, spec, psi, &fam.features(spec), rng)?);
    }
    let mut coupled = vec![rank_check(
        "invariant-features",
        spec,
        psi,
        &FeatureFamily::Invariant.features(spec),
        rng,
    )?];
    for s in 1..l {
        coupled.push(rank_check(
            &format!("W(L,0)+WW({s},0)(L,{s})"),
            spec,
            psi,
            &[Feature::W(l, 0), Feature::WW(s, s)],
            rng,
        )?);
    }
    let degeneracies = asserted
        .iter()
        .chain(&coupled)
        .filter(|c| c.rank < c.columns)
        .map(|c| Degeneracy {
            family: c.family.clone(),
            rank: c.rank,
            columns: c.columns,
        })
        .collect();
    Ok(IndependenceReport {
        widths: spec.widths().to_vec(),
        channels: spec.channels(),
        asserted_independent: asserted,
        coupled,
        degeneracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariant_family_sizes() {
        let spec = WeightSpec::new(vec![1, 2, 1], 1).unwrap();
        assert_eq!(feature_count(&spec, &FeatureFamily::Invariant.features(&spec)), 8);
        let spec = WeightSpec::new(vec![2, 3, 2], 1).unwrap();
        assert_eq!(feature_count(&spec, &FeatureFamily::Invariant.features(&spec)), 19);
    }

    #[test]
    fn too_few_samples() {
        let spec = WeightSpec::new(vec![2, 2, 2], 1).unwrap();
        let psi = PsiParams::zeros(&spec);
        let err = feature_design_matrix(&spec, &psi, &[Feature::B(1), Feature::B(2)], 3, &mut Rng::new(0));
        assert!(matches!(err, Err(Error::InsufficientSamples { needed: 4, got: 3 })));
    }

    #[test]
    fn biases_are_full_rank() {
        let spec = WeightSpec::new(vec![2, 3, 2], 2).unwrap();
        let psi = PsiParams::random(&spec, &mut Rng::new(1));
        let check = rank_check(
            "b",
            &spec,
            &psi,
            &FeatureFamily::Biases.features(&spec),
            &mut Rng::new(2),
        )
        .unwrap();
        assert!(check.full_rank);
        assert_eq!(check.rank, check.columns);
    }

    #[test]
    fn asserted_family_full_rank_for_three_layers() {
        let spec = WeightSpec::new(vec![2, 2, 2, 2], 1).unwrap();
        let mut rng = Rng::new(4);
        let psi = PsiParams::random(&spec, &mut rng);
        let report = independence_report(&spec, &psi, &mut rng).unwrap();
        assert!(report.asserted_ok(), "{report:?}");
        let inv = &report.coupled[0];
        assert_eq!(inv.columns - inv.rank, 2 * (spec.layers() - 1));
    }

    #[test]
    fn scalar_collapse_witness() {
        let spec = WeightSpec::new(vec![1, 1, 1, 1], 1).unwrap();
        let psi = PsiParams::constant(&spec, 1.0);
        let m =
            feature_design_matrix(&spec, &psi, &[Feature::W(3, 0), Feature::WW(1, 1)], 6, &mut Rng::new(5)).unwrap();
        for r in 0..6 {
            assert!((m[(r, 0)] - m[(r, 1)]).abs() <= 1e-12);
        }
        let check = rank_check(
            "pair",
            &spec,
            &psi,
            &[Feature::W(3, 0), Feature::WW(2, 2)],
            &mut Rng::new(6),
        )
        .unwrap();
        assert_eq!((check.rank, check.columns), (1, 2));
    }

    #[test]
    fn zero_psi_zeroes_psi_columns() {
        let spec = WeightSpec::new(vec![2, 3, 2], 2).unwrap();
        let psi = PsiParams::zeros(&spec);
        let m = feature_design_matrix(
            &spec,
            &psi,
            &[Feature::BW(1, 0), Feature::WW(2, 1)],
            40,
            &mut Rng::new(7),
        )
        .unwrap();
        assert_eq!(m.amax(), 0.0);
    }
}
