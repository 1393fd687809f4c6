//! Closed-form fitting of the invariant layer's coefficients.
//!
//! With Ψ frozen the invariant layer is linear in Φ, so a fit is a ridge
//! regression of the targets on the layer's input features.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::densekit::Tensor;
use crate::error::{Error, Result};
use crate::stableterms::{all_terms, PsiParams};
use crate::weightspace::{parse_json, WeightObject, WeightSpec};

pub const FIT_FORMAT: &str = "magep-fit/1";
pub const FEATURE_ORDER_VERSION: u32 = 1;
pub const DEFAULT_LAMBDA: f64 = 1e-8;

/// Features per object: for each channel, `[WW]^(L,0)(L,0)`, `[W]^(L,0)`,
/// traces of `[WW]^(s,0)(L,s)` for `s = L-1..1`, `[bW]^(L)(L,0)`,
/// `[Wb]^(L,t)(t)` for `t = L-1..1`, traces of `[bW]^(t)(L,t)` for
/// `t = L-1..1` and `b^(L)`; then a constant 1.
pub fn feature_len(spec: &WeightSpec) -> usize {
    let l = spec.layers();
    let (n0, nl) = (spec.width(0), spec.width(l));
    spec.channels() * (3 * nl * n0 + (l - 1) * (nl + 2) + nl) + 1
}

/// Feature rows for every item of `u` (one row if unbatched).
pub fn featurize_batch(u: &WeightObject, psi: &PsiParams) -> Result<Vec<Vec<f64>>> {
    let ub = u.to_batched();
    let terms = all_terms(&ub, psi)?;
    let spec = u.spec();
    let l = spec.layers();
    let d = spec.channels();
    let slice = |t: &Tensor, b: usize, c: usize| -> Vec<f64> {
        let chunk = t.len() / (ub.batch_len() * d);
        let start = (b * d + c) * chunk;
        t.data()[start..start + chunk].to_vec()
    };
    let trace = |t: &Tensor, b: usize, c: usize| -> f64 {
        let n = t.shape()[t.rank() - 1];
        let m = slice(t, b, c);
        (0..n).map(|p| m[p * n + p]).sum()
    };
    let rows = (0..ub.batch_len())
        .map(|b| {
            let mut row = Vec::with_capacity(feature_len(spec));
            for c in 0..d {
                row.extend(slice(terms.ww(l, 0), b, c));
                row.extend(slice(terms.w(l, 0), b, c));
                row.extend((1..l).rev().map(|s| trace(terms.ww(s, s), b, c)));
                row.extend(slice(terms.bw(l, 0), b, c));
                for t in (1..l).rev() {
                    row.extend(slice(terms.wb(l, t), b, c));
                }
                row.extend((1..l).rev().map(|t| trace(terms.bw(t, t), b, c)));
                row.extend(slice(terms.b(l), b, c));
            }
            row.push(1.0);
            row
        })
        .collect();
    Ok(rows)
}

pub fn featurize(u: &WeightObject, psi: &PsiParams) -> Result<Vec<f64>> {
    if u.batch().is_some() {
        return Err(Error::Validation(
            "featurize takes one unbatched object; use featurize_batch".into(),
        ));
    }
    Ok(featurize_batch(u, psi)?.remove(0))
}

/// Weight objects of one spec with equal-width targets and optional row weights.
#[derive(Debug, Clone)]
pub struct FitDataset {
    spec: WeightSpec,
    objects: Vec<WeightObject>,
    targets: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl FitDataset {
    pub fn new(objects: Vec<WeightObject>, targets: Vec<Vec<f64>>) -> Result<Self> {
        let first = objects.first().ok_or(Error::EmptyDataset)?;
        if objects.len() != targets.len() {
            return Err(Error::Dimension(format!(
                "{} objects but {} targets",
                objects.len(),
                targets.len()
            )));
        }
        let spec = first.spec().clone();
        if objects.iter().any(|u| u.spec() != &spec || u.batch().is_some()) {
            return Err(Error::Validation(
                "dataset objects must be unbatched and share one spec".into(),
            ));
        }
        let width = targets[0].len();
        if targets.iter().any(|t| t.len() != width) {
            return Err(Error::Dimension("targets have unequal widths".into()));
        }
        Ok(Self {
            spec,
            objects,
            targets,
            weights: None,
        })
    }

    /// Non-negative per-row weights in the squared loss.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} rows",
                weights.len(),
                self.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Validation("row weights must be finite and non-negative".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn objects(&self) -> &[WeightObject] {
        &self.objects
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn target_width(&self) -> usize {
        self.targets[0].len()
    }

    /// First `n_train` rows as the train split, the rest as test.
    pub fn split(self, n_train: usize) -> Result<(FitDataset, FitDataset)> {
        if n_train == 0 || n_train >= self.len() {
            return Err(Error::Config(format!(
                "train size must be in 1..{}, got {n_train}",
                self.len()
            )));
        }
        let mut objects = self.objects;
        let mut targets = self.targets;
        let test_objects = objects.split_off(n_train);
        let test_targets = targets.split_off(n_train);
        let (train_w, test_w) = match self.weights {
            Some(mut w) => {
                let rest = w.split_off(n_train);
                (Some(w), Some(rest))
            }
            None => (None, None),
        };
        let train = FitDataset {
            spec: self.spec.clone(),
            objects,
            targets,
            weights: train_w,
        };
        let test = FitDataset {
            spec: self.spec,
            objects: test_objects,
            targets: test_targets,
            weights: test_w,
        };
        Ok((train, test))
    }

    fn design(&self, psi: &PsiParams) -> Result<DMatrix<f64>> {
        let rows = featurize_batch(&WeightObject::stack(&self.objects)?, psi)?;
        let f = rows[0].len();
        Ok(DMatrix::from_row_iterator(rows.len(), f, rows.into_iter().flatten()))
    }

    fn target_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_iterator(self.len(), self.target_width(), self.targets.iter().flatten().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitResult {
    pub format: String,
    pub feature_order_version: u32,
    pub lambda: f64,
    pub n_features: usize,
    pub n_targets: usize,
    /// Coefficients as an `n_features x n_targets` row-major matrix.
    pub phi: Vec<f64>,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
    /// Set when `lambda = 0` and the design matrix lacked full column rank.
    #[serde(default)]
    pub rank_deficient: bool,
}

impl FitResult {
    fn phi_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_features, self.n_targets, &self.phi)
    }
}

/// Minimizes `Σ_r w_r ‖x_r φ - y_r‖² + λ ‖φ‖²`.
///
/// `λ > 0` solves the normal equations by Cholesky; `λ = 0` takes the
/// minimum-norm least-squares solution from an SVD.
pub fn fit_ridge(train: &FitDataset, psi: &PsiParams, lambda: f64) -> Result<FitResult> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let mut x = train.design(psi)?;
    let mut y = train.target_matrix();
    if let Some(w) = &train.weights {
        for (r, &wr) in w.iter().enumerate() {
            let s = wr.sqrt();
            x.row_mut(r).scale_mut(s);
            y.row_mut(r).scale_mut(s);
        }
    }
    let f = x.ncols();
    let (phi, rank_deficient) = if lambda > 0.0 {
        let mut gram = x.transpose() * &x;
        for k in 0..f {
            gram[(k, k)] += lambda;
        }
        let rhs = x.transpose() * &y;
        match gram.clone().cholesky() {
            Some(ch) => (ch.solve(&rhs), false),
            None => (min_norm_solve(&gram, &rhs)?.0, false),
        }
    } else {
        min_norm_solve(&x, &y)?
    };
    let mut result = FitResult {
        format: FIT_FORMAT.to_string(),
        feature_order_version: FEATURE_ORDER_VERSION,
        lambda,
        n_features: f,
        n_targets: y.ncols(),
        phi: row_major(&phi),
        train_mse: 0.0,
        test_mse: None,
        rank_deficient,
    };
    result.train_mse = evaluate(&result, train, psi)?;
    Ok(result)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn min_norm_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.max();
    let eps = f64::EPSILON * (a.nrows().max(a.ncols()) as f64) * max;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let sol = svd
        .solve(b, eps)
        .map_err(|e| Error::Unsupported(format!("least-squares solve failed: {e}")))?;
    Ok((sol, rank < a.ncols()))
}

pub fn predict(result: &FitResult, u: &WeightObject, psi: &PsiParams) -> Result<Vec<f64>> {
    let x = featurize(u, psi)?;
    if x.len() != result.n_features {
        return Err(Error::Dimension(format!(
            "object has {} features, fit has {}",
            x.len(),
            result.n_features
        )));
    }
    let row = DVector::from_vec(x).transpose() * result.phi_matrix();
    Ok(row.iter().copied().collect())
}

/// Mean squared residual over every row and target column (row weights ignored).
pub fn evaluate(result: &FitResult, data: &FitDataset, psi: &PsiParams) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let x = data.design(psi)?;
    if x.ncols() != result.n_features || data.target_width() != result.n_targets {
        return Err(Error::Dimension(format!(
            "data has {} features and {} targets, fit has {} and {}",
            x.ncols(),
            data.target_width(),
            result.n_features,
            result.n_targets
        )));
    }
    let resid = x * result.phi_matrix() - data.target_matrix();
    Ok(resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64)
}

/// MSE on `test` of predicting the per-column mean of `train` targets.
pub fn constant_predictor_mse(train: &FitDataset, test: &FitDataset) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let t = train.target_width();
    let means: Vec<f64> = (0..t)
        .map(|k| train.targets.iter().map(|r| r[k]).sum::<f64>() / train.len() as f64)
        .collect();
    let sum: f64 = test
        .targets
        .iter()
        .flat_map(|r| r.iter().zip(&means).map(|(y, m)| (y - m).powi(2)))
        .sum();
    Ok(sum / (test.len() * t) as f64)
}

pub fn fit_to_json_string(result: &FitResult) -> String {
    serde_json::to_string_pretty(result).expect("fit results always serialize")
}

pub fn fit_from_json_str(text: &str) -> Result<FitResult> {
    let r: FitResult = parse_json(text)?;
    if r.format != FIT_FORMAT {
        return Err(Error::Validation(format!("unsupported format `{}`", r.format)));
    }
    if r.feature_order_version != FEATURE_ORDER_VERSION {
        return Err(Error::Validation(format!(
            "feature order version {} is not {FEATURE_ORDER_VERSION}",
            r.feature_order_version
        )));
    }
    if r.phi.len() != r.n_features * r.n_targets {
        return Err(Error::Validation(format!(
            "phi has {} entries, expected {} x {}",
            r.phi.len(),
            r.n_features,
            r.n_targets
        )));
    }
    Ok(r)
}

pub fn save_fit(result: &FitResult, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, fit_to_json_string(result) + "\n")?;
    Ok(())
}

pub fn load_fit(path: impl AsRef<Path>) -> Result<FitResult> {
    fit_from_json_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densekit::{max_rel_diff, Rng};
    use crate::monomial::{GroupElement, Variant};
    use crate::oracle::{feature_design_matrix, FeatureFamily};
    use crate::weightspace::{random_weights, Distribution};

    const UNIT: Distribution = Distribution::Uniform { lo: -1.0, hi: 1.0 };

    fn objects(spec: &WeightSpec, n: usize, rng: &mut Rng) -> Vec<WeightObject> {
        (0..n).map(|_| random_weights(spec, rng, UNIT, None).unwrap()).collect()
    }

    #[test]
    fn feature_lengths() {
        assert_eq!(feature_len(&WeightSpec::new(vec![1, 2, 1], 1).unwrap()), 8);
        assert_eq!(feature_len(&WeightSpec::new(vec![2, 3, 2], 1).unwrap()), 19);
        let spec = WeightSpec::new(vec![2, 1, 3, 2], 2).unwrap();
        let psi = PsiParams::random(&spec, &mut Rng::new(0));
        let u = random_weights(&spec, &mut Rng::new(1), UNIT, None).unwrap();
        assert_eq!(featurize(&u, &psi).unwrap().len(), feature_len(&spec));
    }

    #[test]
    fn zero_object_features() {
        let spec = WeightSpec::new(vec![2, 3, 2], 2).unwrap();
        let psi = PsiParams::random(&spec, &mut Rng::new(0));
        let x = featurize(&WeightObject::zeros(&spec, None), &psi).unwrap();
        assert_eq!(x.last(), Some(&1.0));
        assert!(x[..x.len() - 1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn agrees_with_oracle_design_matrix() {
        let spec = WeightSpec::new(vec![2, 3, 1, 2], 2).unwrap();
        let psi = PsiParams::random(&spec, &mut Rng::new(2));
        let features = FeatureFamily::Invariant.features(&spec);
        let m = feature_design_matrix(&spec, &psi, &features, feature_len(&spec), &mut Rng::new(3)).unwrap();
        let mut rng = Rng::new(3);
        for r in 0..m.nrows() {
            let u = random_weights(&spec, &mut rng, UNIT, Some(1)).unwrap();
            let row = &featurize_batch(&u, &psi).unwrap()[0];
            let oracle: Vec<f64> = m.row(r).iter().copied().collect();
            assert!(max_rel_diff(row, &oracle) <= 1e-12);
        }
    }

    #[test]
    fn invariant_features() {
        let spec = WeightSpec::new(vec![3, 2, 4, 2], 2).unwrap();
        let mut rng = Rng::new(4);
        let psi = PsiParams::random(&spec, &mut rng);
        let u = random_weights(&spec, &mut rng, UNIT, None).unwrap();
        let g = GroupElement::sample(&spec, Variant::PositiveScaling, (0.25, 4.0), &mut rng).unwrap();
        let a = featurize(&u, &psi).unwrap();
        let b = featurize(&g.act(&u).unwrap(), &psi).unwrap();
        assert!(max_rel_diff(&a, &b) <= 1e-10);
    }

    #[test]
    fn planted_recovery() {
        let spec = WeightSpec::new(vec![2, 3, 2], 1).unwrap();
        let mut rng = Rng::new(5);
        let psi = PsiParams::random(&spec, &mut rng);
        let f = feature_len(&spec);
        let planted: Vec<f64> = rng.uniform_vec(f, -1.0, 1.0);
        let objs = objects(&spec, 8 * f, &mut rng);
        let targets = objs
            .iter()
            .map(|u| {
                vec![featurize(u, &psi)
                    .unwrap()
                    .iter()
                    .zip(&planted)
                    .map(|(x, p)| x * p)
                    .sum()]
            })
            .collect();
        let (train, test) = FitDataset::new(objs, targets).unwrap().split(4 * f).unwrap();
        let fit = fit_ridge(&train, &psi, 1e-10).unwrap();
        assert!(fit.train_mse <= 1e-10);
        assert!(evaluate(&fit, &test, &psi).unwrap() <= 1e-10);
    }

    #[test]
    fn zero_targets_zero_phi() {
        let spec = WeightSpec::new(vec![1, 2, 1], 1).unwrap();
        let mut rng = Rng::new(6);
        let psi = PsiParams::random(&spec, &mut rng);
        let objs = objects(&spec, 20, &mut rng);
        let data = FitDataset::new(objs, vec![vec![0.0, 0.0]; 20]).unwrap();
        let fit = fit_ridge(&data, &psi, 1e-3).unwrap();
        assert!(fit.phi.iter().all(|&p| p == 0.0));
        assert_eq!(fit.n_targets, 2);
    }

    #[test]
    fn duplicate_rows_match_weights() {
        let spec = WeightSpec::new(vec![1, 2, 1], 1).unwrap();
        let mut rng = Rng::new(7);
        let psi = PsiParams::random(&spec, &mut rng);
        let objs = objects(&spec, 30, &mut rng);
        let targets: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.uniform(-1.0, 1.0)]).collect();
        let mut dup_objs = objs.clone();
        dup_objs.push(objs[0].clone());
        let mut dup_targets = targets.clone();
        dup_targets.push(targets[0].clone());
        let mut w = vec![1.0; 30];
        w[0] = 2.0;
        let a = fit_ridge(&FitDataset::new(dup_objs, dup_targets).unwrap(), &psi, 1e-4).unwrap();
        let b = fit_ridge(
            &FitDataset::new(objs, targets).unwrap().with_weights(w).unwrap(),
            &psi,
            1e-4,
        )
        .unwrap();
        assert!(max_rel_diff(&a.phi, &b.phi) <= 1e-12);
    }

    #[test]
    fn lambda_zero_flags_rank_deficiency() {
        let spec = WeightSpec::new(vec![2, 2, 2], 1).unwrap();
        let mut rng = Rng::new(8);
        let psi = PsiParams::random(&spec, &mut rng);
        let objs = objects(&spec, 60, &mut rng);
        let targets = (0..60).map(|_| vec![rng.uniform(-1.0, 1.0)]).collect();
        let fit = fit_ridge(&FitDataset::new(objs, targets).unwrap(), &psi, 0.0).unwrap();
        assert!(fit.rank_deficient);
        assert!(matches!(
            fit_ridge(
                &FitDataset::new(vec![WeightObject::zeros(&spec, None)], vec![vec![0.0]]).unwrap(),
                &psi,
                -1.0
            ),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn constant_predictor_is_target_variance() {
        let spec = WeightSpec::new(vec![1, 1, 1], 1).unwrap();
        let mut rng = Rng::new(9);
        let objs = objects(&spec, 10, &mut rng);
        let ys: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let data = FitDataset::new(objs, ys.iter().map(|&y| vec![y]).collect()).unwrap();
        let var = ys.iter().map(|y| (y - 4.5).powi(2)).sum::<f64>() / 10.0;
        assert!((constant_predictor_mse(&data, &data).unwrap() - var).abs() <= 1e-12);
    }

    #[test]
    fn fit_file_round_trip() {
        let r = FitResult {
            format: FIT_FORMAT.into(),
            feature_order_version: FEATURE_ORDER_VERSION,
            lambda: 1e-8,
            n_features: 2,
            n_targets: 1,
            phi: vec![0.1, -1.0 / 3.0],
            train_mse: 1.5e-17,
            test_mse: Some(0.25),
            rank_deficient: false,
        };
        assert_eq!(fit_from_json_str(&fit_to_json_string(&r)).unwrap(), r);
        let bad = fit_to_json_string(&r).replace("\"lambda\"", "\"extra\": 1, \"lambda\"");
        assert!(fit_from_json_str(&bad).is_err());
    }
}
