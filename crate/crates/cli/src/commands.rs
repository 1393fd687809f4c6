//! Subcommand bodies, kept free of argument parsing so tests can call them.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use magep_core::densekit::derive_seed;
use magep_core::fitting::{
    constant_predictor_mse, evaluate, feature_len, featurize, fit_ridge, predict, save_fit, FitDataset,
};
use magep_core::layers::init_equivariant;
use magep_core::netfunc::{probe_targets, NetActivation};
use magep_core::oracle::naive_equivariant_forward;
use magep_core::weightspace::{random_weights, save};
use magep_core::{max_rel_diff, Distribution, GroupElement, PsiParams, Rng, Variant, WeightSpec};
use serde_json::{json, Value};

use crate::report::{group_json, SCHEMA};

/// Failure carrying the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Exit 1.
    Failed(String),
    /// Exit 2.
    Usage(String),
    /// Exit 3.
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Failed(m) | CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

/// Core errors from flag-derived values are usage errors; I/O stays I/O.
fn usage(e: magep_core::Error) -> CliError {
    match e {
        magep_core::Error::Io(e) => CliError::Io(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn failed(e: magep_core::Error) -> CliError {
    match e {
        magep_core::Error::Io(e) => CliError::Io(e.to_string()),
        other => CliError::Failed(other.to_string()),
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Builds a spec from `--n` and the optional `--L` consistency flag.
pub fn spec_from_flags(layers: Option<usize>, widths: &[usize], d: usize) -> Result<WeightSpec, CliError> {
    if let Some(l) = layers {
        if widths.len() != l + 1 {
            return Err(CliError::Usage(format!(
                "--L {l} needs {} widths in --n, got {}",
                l + 1,
                widths.len()
            )));
        }
    }
    WeightSpec::new(widths.to_vec(), d).map_err(usage)
}

/// `uniform:LO,HI` or `gaussian:MEAN,STD`.
pub fn parse_distribution(s: &str) -> Result<Distribution, String> {
    let (kind, args) = s
        .split_once(':')
        .ok_or_else(|| format!("expected KIND:A,B, got `{s}`"))?;
    let (a, b) = args
        .split_once(',')
        .ok_or_else(|| format!("expected two parameters in `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    match kind {
        "uniform" => Ok(Distribution::Uniform { lo: a, hi: b }),
        "gaussian" => Ok(Distribution::Gaussian { mean: a, std: b }),
        other => Err(format!("unknown distribution `{other}`")),
    }
}

#[derive(Debug, Clone)]
pub struct GenArgs {
    pub spec: WeightSpec,
    pub count: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub batch: Option<usize>,
    pub dist: Distribution,
}

/// Writes `u0000.mgw.json`, `u0001.mgw.json`, ... with file `k` seeded by `seed + k`.
pub fn gen(args: &GenArgs) -> Result<Vec<PathBuf>, CliError> {
    if args.batch == Some(0) {
        return Err(CliError::Usage("--batch must be at least 1".into()));
    }
    if args.count == 0 {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::Io(format!("{}: {e}", args.out_dir.display())))?;
    let mut paths = Vec::with_capacity(args.count);
    for k in 0..args.count {
        let mut rng = Rng::new(args.seed.wrapping_add(k as u64));
        let u = random_weights(&args.spec, &mut rng, args.dist, args.batch).map_err(usage)?;
        let path = args.out_dir.join(format!("u{k:04}.mgw.json"));
        save(&u, &path).map_err(failed)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Planted,
    Probe,
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Planted => "planted",
            Target::Probe => "probe",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub spec: WeightSpec,
    pub target: Target,
    /// Defaults to `4F` (planted) or `10F` (probe).
    pub train: Option<usize>,
    /// Defaults to `2F`.
    pub test: Option<usize>,
    pub lambda: f64,
    pub probes: usize,
    pub activation: NetActivation,
    /// Group used for the invariance residual; defaults to the activation's symmetry.
    pub variant: Option<Variant>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub result: magep_core::fitting::FitResult,
    pub report: Value,
}

impl FitOutcome {
    pub fn summary(&self) -> String {
        let r = &self.report;
        format!(
            "target={} features={} train={} test={} lambda={:e} train_mse={:.3e} test_mse={:.3e} constant_mse={:.3e} invariance_residual={:.3e}",
            r["target"].as_str().unwrap_or(""),
            r["n_features"],
            r["n_train"],
            r["n_test"],
            r["lambda"].as_f64().unwrap_or(f64::NAN),
            r["train_mse"].as_f64().unwrap_or(f64::NAN),
            r["test_mse"].as_f64().unwrap_or(f64::NAN),
            r["constant_mse"].as_f64().unwrap_or(f64::NAN),
            r["invariance_residual"].as_f64().unwrap_or(f64::NAN),
        )
    }
}

/// Fits the invariant layer's coefficients with a frozen `Ψ` drawn from
/// `derive_seed(seed, "fit-psi", 0)`.
pub fn fit(args: &FitArgs) -> Result<FitOutcome, CliError> {
    if !(args.lambda.is_finite() && args.lambda >= 0.0) {
        return Err(CliError::Usage(format!(
            "--lambda must be finite and >= 0, got {}",
            args.lambda
        )));
    }
    let spec = &args.spec;
    let f = feature_len(spec);
    let default_train = match args.target {
        Target::Planted => 4 * f,
        Target::Probe => 10 * f,
    };
    let n_train = args.train.unwrap_or(default_train);
    let n_test = args.test.unwrap_or(2 * f);
    if n_train == 0 || n_test == 0 {
        return Err(CliError::Usage("--train and --test must be at least 1".into()));
    }
    if args.target == Target::Probe && (spec.channels() != 1 || args.probes == 0) {
        return Err(CliError::Usage(
            "probe targets need --d 1 and at least one probe".into(),
        ));
    }
    let stream = |label: &str| Rng::new(derive_seed(args.seed, label, 0));
    let psi = PsiParams::random(spec, &mut stream("fit-psi"));
    let mut data_rng = stream("fit-data");
    let unit = Distribution::Uniform { lo: -1.0, hi: 1.0 };
    let objects = (0..n_train + n_test)
        .map(|_| random_weights(spec, &mut data_rng, unit, None))
        .collect::<magep_core::Result<Vec<_>>>()
        .map_err(failed)?;
    let targets = match args.target {
        Target::Planted => {
            let t = 2;
            let phi_star = stream("fit-planted").uniform_vec(f * t, -1.0, 1.0);
            objects
                .iter()
                .map(|u| {
                    let x = featurize(u, &psi)?;
                    Ok((0..t)
                        .map(|j| x.iter().enumerate().map(|(k, xk)| xk * phi_star[k * t + j]).sum())
                        .collect())
                })
                .collect::<magep_core::Result<Vec<Vec<f64>>>>()
                .map_err(failed)?
        }
        Target::Probe => {
            let mut rng = stream("fit-probes");
            let probes: Vec<Vec<f64>> = (0..args.probes)
                .map(|_| rng.uniform_vec(spec.width(0), -1.0, 1.0))
                .collect();
            probe_targets(&objects, &probes, args.activation).map_err(failed)?
        }
    };
    let (train, test) = FitDataset::new(objects, targets)
        .and_then(|d| d.split(n_train))
        .map_err(failed)?;
    let mut result = fit_ridge(&train, &psi, args.lambda).map_err(failed)?;
    let test_mse = evaluate(&result, &test, &psi).map_err(failed)?;
    result.test_mse = Some(test_mse);
    let constant = constant_predictor_mse(&train, &test).map_err(failed)?;

    let variant = args.variant.unwrap_or(match args.target {
        Target::Probe => args.activation.symmetry(),
        Target::Planted => Variant::PositiveScaling,
    });
    let mut g_rng = stream("fit-group");
    let g = GroupElement::sample(spec, variant, (0.25, 4.0), &mut g_rng).map_err(failed)?;
    let mut invariance: f64 = 0.0;
    for u in test.objects() {
        let a = predict(&result, u, &psi).map_err(failed)?;
        let b = predict(&result, &g.act(u).map_err(failed)?, &psi).map_err(failed)?;
        invariance = invariance.max(max_rel_diff(&a, &b));
    }
    let report = json!({
        "schema": SCHEMA,
        "command": "fit",
        "seed": args.seed,
        "target": args.target.name(),
        "widths": spec.widths(),
        "d": spec.channels(),
        "n_features": f,
        "n_train": n_train,
        "n_test": n_test,
        "lambda": args.lambda,
        "train_mse": result.train_mse,
        "test_mse": test_mse,
        "constant_mse": constant,
        "invariance_residual": invariance,
        "rank_deficient": result.rank_deficient,
        "group": group_json(&g),
    });
    Ok(FitOutcome { result, report })
}

pub fn save_fit_file(outcome: &FitOutcome, path: &Path) -> Result<(), CliError> {
    save_fit(&outcome.result, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub layers: Vec<usize>,
    pub widths: Vec<usize>,
    pub d: usize,
    pub e: usize,
    pub batch: usize,
    pub reps: usize,
    pub seed: u64,
}

fn timing(samples: Vec<f64>) -> Value {
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    // One sample carries no spread.
    let (min, max) = if n > 1 {
        (json!(sorted[0]), json!(sorted[n - 1]))
    } else {
        (Value::Null, Value::Null)
    };
    json!({"median_s": median, "min_s": min, "max_s": max, "samples_s": samples})
}

fn time_reps(reps: usize, mut f: impl FnMut() -> magep_core::Result<()>) -> magep_core::Result<Vec<f64>> {
    (0..reps)
        .map(|_| {
            let start = Instant::now();
            f()?;
            Ok(start.elapsed().as_secs_f64())
        })
        .collect()
}

/// Times the contraction forward against the naive-loop forward at every
/// grid point `(L, k)` with all widths equal to `k`.
pub fn bench(args: &BenchArgs) -> Result<Value, CliError> {
    if args.reps == 0 || args.batch == 0 || args.d == 0 || args.e == 0 {
        return Err(CliError::Usage(
            "--reps, --batch, --d and --e must be at least 1".into(),
        ));
    }
    if args.layers.iter().any(|&l| l < 2) || args.widths.contains(&0) {
        return Err(CliError::Usage("layer counts must be >= 2 and widths >= 1".into()));
    }
    let mut points = Vec::new();
    for &l in &args.layers {
        for &k in &args.widths {
            let spec = WeightSpec::new(vec![k; l + 1], args.d).map_err(usage)?;
            let mut rng = Rng::new(derive_seed(args.seed, "bench", (l * 1000 + k) as u64));
            let layer = init_equivariant(&spec, args.d, args.e, &mut rng, 1.0).map_err(failed)?;
            let u = random_weights(
                &spec,
                &mut rng,
                Distribution::Uniform { lo: -1.0, hi: 1.0 },
                Some(args.batch),
            )
            .map_err(failed)?;
            let fast = time_reps(args.reps, || layer.forward(&u).map(drop)).map_err(failed)?;
            let slow = time_reps(args.reps, || naive_equivariant_forward(&layer, &u).map(drop)).map_err(failed)?;
            let (fast, slow) = (timing(fast), timing(slow));
            let speedup =
                slow["median_s"].as_f64().unwrap() / fast["median_s"].as_f64().unwrap().max(f64::MIN_POSITIVE);
            points.push(json!({
                "widths": spec.widths(),
                "d": args.d,
                "e": args.e,
                "batch": args.batch,
                "optimized": fast,
                "naive": slow,
                "speedup": speedup,
            }));
        }
    }
    Ok(json!({
        "schema": SCHEMA,
        "command": "bench",
        "seed": args.seed,
        "reps": args.reps,
        "points": points,
    }))
}

/// Plain-text table for a bench report.
pub fn bench_table(report: &Value) -> String {
    let mut out = format!(
        "{:<16} {:>14} {:>14} {:>9}\n",
        "widths", "optimized_s", "naive_s", "speedup"
    );
    for p in report["points"].as_array().into_iter().flatten() {
        let widths: Vec<String> = p["widths"]
            .as_array()
            .into_iter()
            .flatten()
            .map(|w| w.to_string())
            .collect();
        out.push_str(&format!(
            "{:<16} {:>14.3e} {:>14.3e} {:>9.2}\n",
            widths.join(","),
            p["optimized"]["median_s"].as_f64().unwrap_or(f64::NAN),
            p["naive"]["median_s"].as_f64().unwrap_or(f64::NAN),
            p["speedup"].as_f64().unwrap_or(f64::NAN),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distributions_parse() {
        assert_eq!(
            parse_distribution("uniform:-1,1"),
            Ok(Distribution::Uniform { lo: -1.0, hi: 1.0 })
        );
        assert_eq!(
            parse_distribution("gaussian:0, 2"),
            Ok(Distribution::Gaussian { mean: 0.0, std: 2.0 })
        );
        assert!(parse_distribution("cauchy:0,1").is_err());
        assert!(parse_distribution("uniform:1").is_err());
    }

    #[test]
    fn layer_flag_must_match_widths() {
        assert!(matches!(
            spec_from_flags(Some(3), &[1, 2, 1], 1),
            Err(CliError::Usage(_))
        ));
        let e = spec_from_flags(None, &[1, 0, 1], 1).unwrap_err();
        assert_eq!(e.code(), 2);
        assert!(e.to_string().contains(">= 1"), "{e}");
    }

    #[test]
    fn single_rep_has_no_spread() {
        let t = timing(vec![0.5]);
        assert_eq!(t["median_s"], json!(0.5));
        assert!(t["min_s"].is_null() && t["max_s"].is_null());
        let t = timing(vec![3.0, 1.0, 2.0, 10.0]);
        assert_eq!(t["median_s"], json!(2.5));
        assert_eq!(t["min_s"], json!(1.0));
    }

    #[test]
    fn negative_lambda_is_a_usage_error() {
        let args = FitArgs {
            spec: WeightSpec::new(vec![1, 2, 1], 1).unwrap(),
            target: Target::Planted,
            train: None,
            test: None,
            lambda: -1.0,
            probes: 4,
            activation: NetActivation::Relu,
            variant: None,
            seed: 0,
        };
        assert_eq!(fit(&args).unwrap_err().code(), 2);
    }
}
