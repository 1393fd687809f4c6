mod common;

use magep_core::fitting::{load_fit, save_fit, FitResult, FEATURE_ORDER_VERSION, FIT_FORMAT};
use magep_core::layers::{init_equivariant, init_invariant, load_params, save_params, LayerParams};
use magep_core::weightspace::{load, random_weights, save, Distribution};
use magep_core::{Error, Rng, WeightSpec};

#[test]
fn weight_files_round_trip_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Rng::new(7);
    for (k, batch) in [None, Some(3)].into_iter().enumerate() {
        let spec = WeightSpec::new(vec![3, 4, 1, 2], 2).unwrap();
        let dist = Distribution::Gaussian { mean: 0.0, std: 1e3 };
        let u = random_weights(&spec, &mut rng, dist, batch).unwrap();
        let path = dir.path().join(format!("u{k}.mgw.json"));
        save(&u, &path).unwrap();
        let (spec2, v) = load(&path).unwrap();
        assert_eq!(spec2, spec);
        let bits = |x: &[f64]| x.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&u.flatten()), bits(&v.flatten()));
        assert_eq!(v.batch(), batch);
    }
}

#[test]
fn parameter_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Rng::new(8);
    let spec = WeightSpec::new(vec![2, 3, 2, 2], 1).unwrap();
    let eq = init_equivariant(&spec, 1, 3, &mut rng, 1.0).unwrap();
    let inv = init_invariant(&spec, 3, 2, 1, &mut rng, 1.0).unwrap();
    let p = dir.path().join("eq.mgp.json");
    save_params(&LayerParams::Equivariant(eq.clone()), &p).unwrap();
    assert!(matches!(load_params(&p).unwrap(), LayerParams::Equivariant(q) if q == eq));
    let p = dir.path().join("inv.mgp.json");
    save_params(&LayerParams::Invariant(inv.clone()), &p).unwrap();
    assert!(matches!(load_params(&p).unwrap(), LayerParams::Invariant(q) if q == inv));
}

#[test]
fn fit_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let r = FitResult {
        format: FIT_FORMAT.into(),
        feature_order_version: FEATURE_ORDER_VERSION,
        lambda: 1e-8,
        n_features: 3,
        n_targets: 2,
        phi: vec![0.1, 0.2, 1.0 / 3.0, -2.5e-300, 7.0, f64::MIN_POSITIVE],
        train_mse: 0.0,
        test_mse: None,
        rank_deficient: true,
    };
    let p = dir.path().join("r.mgfit.json");
    save_fit(&r, &p).unwrap();
    assert_eq!(load_fit(&p).unwrap(), r);
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load("/nonexistent/x.mgw.json"), Err(Error::Io(_))));
}
