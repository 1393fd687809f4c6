//! Property suites behind `magep check`.
//!
//! A suite runs independent trials, each seeded with
//! `derive_seed(seed, suite, trial)`, and reduces every named check over the
//! trials to one value compared against its tolerance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use magep_core::densekit::{batched_matmul, batched_matvec, derive_seed};
use magep_core::layers::{init_equivariant, init_invariant};
use magep_core::netfunc::{mlp_forward, NetActivation};
use magep_core::oracle::{
    independence_report, naive_equivariant_forward, naive_invariant_forward, rank_check, Feature,
};
use magep_core::stableterms::{bw_term, bw_term_via, w_chain, wb_term, ww_term, ww_term_via};
use magep_core::weightspace::random_weights;
use magep_core::{
    max_rel_diff, Activation, Distribution, GroupElement, MonomialElement, PsiParams, Rng, Stack, Tensor, Variant,
    WeightObject, WeightSpec,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::grid::{Grid, GridPoint};
use crate::report::group_json;

const UNIT: Distribution = Distribution::Uniform { lo: -1.0, hi: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Group,
    Stability,
    Chains,
    Netinv,
    Equiv,
    Inv,
    Stack,
    Oracle,
    Rank,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Group,
        Suite::Stability,
        Suite::Chains,
        Suite::Netinv,
        Suite::Equiv,
        Suite::Inv,
        Suite::Stack,
        Suite::Oracle,
        Suite::Rank,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Group => "group",
            Suite::Stability => "stability",
            Suite::Chains => "chains",
            Suite::Netinv => "netinv",
            Suite::Equiv => "equiv",
            Suite::Inv => "inv",
            Suite::Stack => "stack",
            Suite::Oracle => "oracle",
            Suite::Rank => "rank",
        }
    }

    fn checks(&self) -> Vec<CheckDef> {
        use Bound::*;
        let most = |name, tolerance| CheckDef {
            name,
            bound: AtMost,
            reduce: Reduce::Max,
            tolerance,
        };
        match self {
            Suite::Group => vec![most("scale-laws", 1e-14), most("homomorphism", 1e-12)],
            Suite::Stability => ["w", "b", "wb", "bw", "ww"]
                .into_iter()
                .map(|n| most(n, 1e-10))
                .collect(),
            Suite::Chains => vec![most("chains", 1e-12)],
            Suite::Netinv => vec![
                most("compatible", 1e-9),
                // Vacuity guard: the wrong group must visibly change the function somewhere.
                CheckDef {
                    name: "mismatched",
                    bound: AtLeast,
                    reduce: Reduce::Max,
                    tolerance: 1e-3,
                },
            ],
            Suite::Equiv => vec![most("equivariance", 1e-9)],
            Suite::Inv => vec![most("invariance", 1e-9)],
            Suite::Stack => vec![most("invariance", 1e-8)],
            Suite::Oracle => vec![most("equivariant", 1e-12), most("invariant", 1e-12)],
            Suite::Rank => vec![
                CheckDef {
                    name: "asserted-sigma-ratio",
                    bound: AtLeast,
                    reduce: Reduce::Min,
                    tolerance: 1e-6,
                },
                most("witness-sigma-ratio", 1e-6),
            ],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
}

impl Bound {
    fn name(&self) -> &'static str {
        match self {
            Bound::AtMost => "at_most",
            Bound::AtLeast => "at_least",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reduce {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy)]
struct CheckDef {
    name: &'static str,
    bound: Bound,
    reduce: Reduce,
    tolerance: f64,
}

/// Deliberate defects for mutation testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Breaks one weight-sharing constraint of the equivariant layer.
    Sharing,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub grid: Grid,
    pub trials: usize,
    pub seed: u64,
    /// `suite` or `suite.check` mapped to a replacement tolerance.
    pub tolerances: Vec<(String, f64)>,
    pub fault: Option<Fault>,
    pub collapse_psi: bool,
    pub scale_range: (f64, f64),
}

impl Default for Options {
    fn default() -> Self {
        Self {
            grid: Grid::default(),
            trials: 200,
            seed: 0,
            tolerances: Vec::new(),
            fault: None,
            collapse_psi: false,
            scale_range: (0.25, 4.0),
        }
    }
}

impl Options {
    fn tolerance(&self, suite: Suite, check: &CheckDef) -> f64 {
        let full = format!("{}.{}", suite.name(), check.name);
        self.tolerances
            .iter()
            .rev()
            .find(|(k, _)| *k == full || k == suite.name())
            .map_or(check.tolerance, |(_, v)| *v)
    }
}

struct Trial {
    index: usize,
    point: GridPoint,
    rng: Rng,
}

#[derive(Default)]
struct Outcome {
    values: Vec<Option<f64>>,
    group: Option<GroupElement>,
    counts: Vec<(&'static str, bool)>,
}

impl Outcome {
    fn new(values: Vec<Option<f64>>) -> Self {
        Self {
            values,
            ..Default::default()
        }
    }

    fn with_group(mut self, g: GroupElement) -> Self {
        self.group = Some(g);
        self
    }
}

type TrialResult = magep_core::Result<Outcome>;

fn rel(a: &Tensor, b: &Tensor) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    max_rel_diff(a.data(), b.data())
}

fn rel_obj(a: &WeightObject, b: &WeightObject) -> f64 {
    max_rel_diff(&a.flatten(), &b.flatten())
}

fn random_variant(rng: &mut Rng) -> Variant {
    if rng.below(2) == 0 {
        Variant::PositiveScaling
    } else {
        Variant::SignFlip
    }
}

fn sample_group(
    spec: &WeightSpec,
    variant: Variant,
    opts: &Options,
    rng: &mut Rng,
) -> magep_core::Result<GroupElement> {
    GroupElement::sample(spec, variant, opts.scale_range, rng)
}

fn monomial_residual(a: &MonomialElement, b: &MonomialElement) -> f64 {
    if a.perm() != b.perm() {
        return f64::INFINITY;
    }
    max_rel_diff(a.scales(), b.scales())
}

fn group_trial(t: &mut Trial, opts: &Options) -> TrialResult {
    let spec = t.point.spec();
    let variant = random_variant(&mut t.rng);
    let g = sample_group(&spec, variant, opts, &mut t.rng)?;
    let h = sample_group(&spec, variant, opts, &mut t.rng)?;
    let k = sample_group(&spec, variant, opts, &mut t.rng)?;
    let gh_k = g.compose(&h)?.compose(&k)?;
    let g_hk = g.compose(&h.compose(&k)?)?;
    let id = GroupElement::identity(&spec, variant);
    let g_inv = g.compose(&g.inverse())?;
    let g_id = g.compose(&id)?;
    let mut laws: f64 = 0.0;
    for i in 0..=spec.layers() {
        laws = laws.max(monomial_residual(gh_k.layer(i), g_hk.layer(i)));
        laws = laws.max(monomial_residual(g_inv.layer(i), id.layer(i)));
        laws = laws.max(monomial_residual(g_id.layer(i), g.layer(i)));
    }
    let u = random_weights(&spec, &mut t.rng, UNIT, Some(2))?;
    let hom = rel_obj(&g.act(&h.act(&u)?)?, &g.compose(&h)?.act(&u)?);
    let back = rel_obj(&g.inverse().act(&g.act(&u)?)?, &u);
    Ok(Outcome::new(vec![Some(laws), Some(hom.max(back))]).with_group(g))
}

fn stability_trial(t: &mut Trial, opts: &Options) -> TrialResult {
    let spec = t.point.spec();
    let l = spec.layers();
    let u = random_weights(&spec, &mut t.rng, UNIT, Some(2))?;
    let psi = PsiParams::random(&spec, &mut t.rng);
    let variant = random_variant(&mut t.rng);
    let g = sample_group(&spec, variant, opts, &mut t.rng)?;
    let gu = g.act(&u)?;
    let sandwich = |m: &Tensor, s: usize, r: usize| g.layer(r).right_act_inverse(&g.layer(s).left_act_matrix(m)?);
    let mut r = [0.0f64; 5];
    for s in 1..=l {
        for tt in 0..s {
            r[0] = r[0].max(rel(&w_chain(&gu, s, tt)?, &sandwich(&w_chain(&u, s, tt)?, s, tt)?));
            if tt > 0 {
                let want = g.layer(s).left_act_vector(&wb_term(&u, s, tt)?)?;
                r[2] = r[2].max(rel(&wb_term(&gu, s, tt)?, &want));
            }
        }
        r[1] = r[1].max(rel(gu.bias(s), &g.layer(s).left_act_vector(u.bias(s))?));
        for tt in 0..l {
            r[3] = r[3].max(rel(
                &bw_term(&gu, s, tt, &psi)?,
                &sandwich(&bw_term(&u, s, tt, &psi)?, s, tt)?,
            ));
            r[4] = r[4].max(rel(
                &ww_term(&gu, s, tt, &psi)?,
                &sandwich(&ww_term(&u, s, tt, &psi)?, s, tt)?,
            ));
        }
    }
    Ok(Outcome::new(r.iter().map(|&x| Some(x)).collect()).with_group(g))
}

fn chains_trial(t: &mut Trial, _: &Options) -> TrialResult {
    let spec = t.point.spec();
    let l = spec.layers();
    let u = random_weights(&spec, &mut t.rng, UNIT, Some(2))?;
    let (n0, nl) = (spec.width(0), spec.width(l));
    let mut worst: f64 = 0.0;
    for s in 1..=l {
        worst = worst.max(rel(&w_chain(&u, s, s - 1)?, u.weight(s)));
        let row = Tensor::new(vec![1, spec.width(s)], t.rng.uniform_vec(spec.width(s), -1.0, 1.0))?;
        let psi = Tensor::new(vec![n0, nl], t.rng.uniform_vec(n0 * nl, -1.0, 1.0))?;
        for tt in 0..s {
            for r in 0..tt {
                let right = w_chain(&u, tt, r)?;
                let prod = batched_matmul(&w_chain(&u, s, tt)?, &right)?;
                worst = worst.max(rel(&prod, &w_chain(&u, s, r)?));
                if r > 0 {
                    let v = batched_matvec(&w_chain(&u, s, tt)?, &wb_term(&u, tt, r)?)?;
                    worst = worst.max(rel(&v, &wb_term(&u, s, r)?));
                }
                let lhs = batched_matmul(&bw_term_via(&u, s, s, tt, &row)?, &right)?;
                worst = worst.max(rel(&lhs, &bw_term_via(&u, s, s, r, &row)?));
                let lhs = batched_matmul(&ww_term_via(&u, s, l, tt, &psi)?, &right)?;
                worst = worst.max(rel(&lhs, &ww_term_via(&u, s, l, r, &psi)?));
            }
        }
    }
    Ok(Outcome::new(vec![Some(worst)]))
}

fn network_residual(
    u: &WeightObject,
    gu: &WeightObject,
    probes: &[Vec<f64>],
    act: NetActivation,
) -> magep_core::Result<f64> {
    let mut worst: f64 = 0.0;
    for x in probes {
        worst = worst.max(max_rel_diff(&mlp_forward(gu, x, act)?, &mlp_forward(u, x, act)?));
    }
    Ok(worst)
}

fn netinv_trial(t: &mut Trial, opts: &Options) -> TrialResult {
    let spec = t.point.spec();
    let act = match t.index % 4 {
        0 => NetActivation::Relu,
        1 => NetActivation::LeakyRelu(0.1),
        2 => NetActivation::Tanh,
        _ => NetActivation::Sin,
    };
    let u = random_weights(&spec, &mut t.rng, UNIT, None)?;
    let probes: Vec<Vec<f64>> = (0..3).map(|_| t.rng.uniform_vec(spec.width(0), -1.0, 1.0)).collect();
    let variant = act.symmetry();
    let g = sample_group(&spec, variant, opts, &mut t.rng)?;
    let compatible = network_residual(&u, &g.act(&u)?, &probes, act)?;
    let other = match variant {
        Variant::PositiveScaling => Variant::SignFlip,
        Variant::SignFlip => Variant::PositiveScaling,
    };
    let h = sample_group(&spec, other, opts, &mut t.rng)?;
    let mismatched = network_residual(&u, &h.act(&u)?, &probes, act)?;
    Ok(Outcome::new(vec![Some(compatible), Some(mismatched)]).with_group(g))
}

fn equiv_trial(t: &mut Trial, opts: &Options) -> TrialResult {
    let spec = t.point.spec();
    let mut layer = init_equivariant(&spec, spec.channels(), t.point.e, &mut t.rng, 1.0)?;
    layer.sharing_fault = opts.fault == Some(Fault::Sharing);
    let u = random_weights(&spec, &mut t.rng, UNIT, Some(2))?;
    let variant = random_variant(&mut t.rng);
    let g = sample_group(&spec, variant, opts, &mut t.rng)?;
    let r = rel_obj(&layer.forward(&g.act(&u)?)?, &g.act(&layer.forward(&u)?)?);
    Ok(Outcome::new(vec![Some(r)]).with_group(g))
}

fn inv_trial(t: &mut Trial, opts: &Options) -> TrialResult {
    let spec = t.point.spec();
    let layer = init_invariant(&spec, spec.channels(), t.point.e, 2, &mut t.rng, 1.0)?;
    let u = random_weights(&spec, &mut t.rng, UNIT, Some(2))?;
    let variant = random_variant(&mut t.rng);
    let g = sample_group(&spec, variant, opts, &mut t.rng)?;
    let r = rel(&layer.forward(&g.act(&u)?)?, &layer.forward(&u)?);
    Ok(Outcome::new(vec![Some(r)]).with_group(g))
}

fn stack_trial(t: &mut Trial, opts: &Options) -> TrialResult {
    let spec = t.point.spec();
    let variant = random_variant(&mut t.rng);
    let choices = match variant {
        Variant::PositiveScaling => [Activation::Relu, Activation::LeakyRelu(0.1), Activation::Abs],
        Variant::SignFlip => [Activation::Tanh, Activation::Sin, Activation::Abs],
    };
    let act = choices[t.rng.below(3)];
    let e = t.point.e;
    let channels = [spec.channels(), e, e];
    let stack = Stack::random(&spec, variant, &channels, act, 2, 2, &mut t.rng, 1.0)?;
    let u = random_weights(&spec, &mut t.rng, UNIT, Some(2))?;
    let g = sample_group(&spec, variant, opts, &mut t.rng)?;
    let r = rel(&stack.forward(&g.act(&u)?)?, &stack.forward(&u)?);
    Ok(Outcome::new(vec![Some(r)]).with_group(g))
}

fn oracle_trial(t: &mut Trial, _: &Options) -> TrialResult {
    let spec = t.point.spec();
    let d = spec.channels();
    let eq = init_equivariant(&spec, d, t.point.e, &mut t.rng, 1.0)?;
    let inv = init_invariant(&spec, d, t.point.e, 2, &mut t.rng, 1.0)?;
    let u = random_weights(&spec, &mut t.rng, UNIT, Some(2))?;
    let a = rel_obj(&eq.forward(&u)?, &naive_equivariant_forward(&eq, &u)?);
    let b = rel(&inv.forward(&u)?, &naive_invariant_forward(&inv, &u)?);
    Ok(Outcome::new(vec![Some(a), Some(b)]))
}

/// Asserted families on the trial spec, plus the all-ones-width witness with
/// `Ψ = 1`. Under `collapse_psi` the trial spec itself is the witness spec.
fn rank_trial(t: &mut Trial, opts: &Options) -> TrialResult {
    let l = t.point.widths.len() - 1;
    let witness_spec = WeightSpec::new(vec![1; l + 1], t.point.d)?;
    let (spec, psi) = if opts.collapse_psi {
        t.point.widths = vec![1; l + 1];
        (witness_spec.clone(), PsiParams::constant(&witness_spec, 1.0))
    } else {
        let spec = t.point.spec();
        let psi = PsiParams::random(&spec, &mut t.rng);
        (spec, psi)
    };
    let report = independence_report(&spec, &psi, &mut t.rng)?;
    let asserted = report
        .asserted_independent
        .iter()
        .map(|c| c.sigma_ratio)
        .fold(f64::INFINITY, f64::min);
    let s = 1 + t.rng.below(l - 1);
    let witness = rank_check(
        "witness",
        &witness_spec,
        &PsiParams::constant(&witness_spec, 1.0),
        &[Feature::W(l, 0), Feature::WW(s, s)],
        &mut t.rng,
    )?;
    let mut out = Outcome::new(vec![Some(asserted), Some(witness.sigma_ratio)]);
    out.counts.push(("witness_detected", !witness.full_rank));
    out.counts.push(("degenerate_reports", !report.degeneracies.is_empty()));
    Ok(out)
}

fn run_trial(suite: Suite, t: &mut Trial, opts: &Options) -> TrialResult {
    match suite {
        Suite::Group => group_trial(t, opts),
        Suite::Stability => stability_trial(t, opts),
        Suite::Chains => chains_trial(t, opts),
        Suite::Netinv => netinv_trial(t, opts),
        Suite::Equiv => equiv_trial(t, opts),
        Suite::Inv => inv_trial(t, opts),
        Suite::Stack => stack_trial(t, opts),
        Suite::Oracle => oracle_trial(t, opts),
        Suite::Rank => rank_trial(t, opts),
    }
}

/// The grid a suite actually draws from.
pub fn suite_grid(suite: Suite, grid: &Grid) -> Grid {
    match suite {
        Suite::Netinv => Grid {
            channels: vec![1],
            ..grid.clone()
        },
        Suite::Rank => grid.capped(3, 3),
        _ => grid.clone(),
    }
}

struct TrialRecord {
    index: usize,
    seed: u64,
    point: GridPoint,
    outcome: Result<Outcome, String>,
}

fn trial_json(r: &TrialRecord) -> Value {
    json!({
        "index": r.index,
        "seed": r.seed,
        "widths": r.point.widths,
        "d": r.point.d,
        "e": r.point.e,
        "group": r.outcome.as_ref().ok().and_then(|o| o.group.as_ref()).map(group_json),
    })
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub json: Value,
}

/// Runs every trial of `suite` (in parallel) and reduces them in trial order.
pub fn run_suite(suite: Suite, opts: &Options) -> SuiteReport {
    let grid = suite_grid(suite, &opts.grid);
    let records: Vec<TrialRecord> = (0..opts.trials)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(opts.seed, suite.name(), index as u64);
            let mut rng = Rng::new(seed);
            let point = grid.sample(&mut rng);
            let mut t = Trial { index, point, rng };
            let outcome = run_trial(suite, &mut t, opts).map_err(|e| format!("trial {index}: {e}"));
            TrialRecord {
                index,
                seed,
                point: t.point,
                outcome,
            }
        })
        .collect();

    let errors: Vec<String> = records
        .iter()
        .filter_map(|r| r.outcome.as_ref().err().cloned())
        .collect();
    let mut checks = Vec::new();
    let mut passed = errors.is_empty();
    let mut max_residual: Option<f64> = None;
    for (k, def) in suite.checks().iter().enumerate() {
        let tolerance = opts.tolerance(suite, def);
        let values: Vec<Option<f64>> = records
            .iter()
            .map(|r| r.outcome.as_ref().ok().and_then(|o| o.values.get(k).copied().flatten()))
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in values.iter().enumerate() {
            let Some(v) = *v else { continue };
            // NaN always wins so it cannot hide behind a finite value.
            let better = match best {
                None => true,
                Some((_, b)) => v.is_nan() || (!b.is_nan() && if def.reduce == Reduce::Max { v > b } else { v < b }),
            };
            if better {
                best = Some((i, v));
            }
        }
        let ok = match best {
            None => false,
            Some((_, v)) => match def.bound {
                Bound::AtMost => v <= tolerance,
                Bound::AtLeast => v >= tolerance,
            },
        };
        passed &= ok;
        if def.bound == Bound::AtMost {
            if let Some((_, v)) = best {
                max_residual = Some(match max_residual {
                    Some(m) if !(v > m || v.is_nan()) => m,
                    _ => v,
                });
            }
        }
        checks.push(json!({
            "name": def.name,
            "bound": def.bound.name(),
            "tolerance": tolerance,
            "value": best.map_or(Value::Null, |(_, v)| num(v)),
            "passed": ok,
            "evaluated": values.iter().filter(|v| v.is_some()).count(),
            "worst_trial": best.map_or(Value::Null, |(i, _)| trial_json(&records[i])),
            "residuals": values.iter().map(|v| v.map_or(Value::Null, num)).collect::<Vec<_>>(),
        }));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in records.iter().filter_map(|r| r.outcome.as_ref().ok()) {
        for &(name, hit) in &o.counts {
            *counts.entry(name).or_default() += usize::from(hit);
        }
    }
    let mut json = json!({
        "suite": suite.name(),
        "trials": opts.trials,
        "passed": passed,
        "max_residual": max_residual.map_or(Value::Null, num),
        "checks": checks,
        "errors": errors,
    });
    if !counts.is_empty() {
        json["counts"] = json!(counts);
    }
    if suite == Suite::Rank {
        json["collapse_psi"] = json!(opts.collapse_psi);
    }
    SuiteReport { suite, passed, json }
}

/// Full `check` report for the selected suites.
pub fn run_check(suites: &[Suite], opts: &Options) -> (bool, Value) {
    let reports: Vec<SuiteReport> = suites.iter().map(|&s| run_suite(s, opts)).collect();
    let passed = reports.iter().all(|r| r.passed);
    let report = json!({
        "schema": crate::report::SCHEMA,
        "command": "check",
        "seed": opts.seed,
        "trials": opts.trials,
        "scale_range": [opts.scale_range.0, opts.scale_range.1],
        "grid": {
            "layers": opts.grid.layers,
            "max_width": opts.grid.max_width,
            "channels": opts.grid.channels,
            "out_channels": opts.grid.out_channels,
        },
        "passed": passed,
        "suites": reports.into_iter().map(|r| r.json).collect::<Vec<_>>(),
    });
    (passed, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(trials: usize) -> Options {
        Options {
            trials,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn every_suite_passes_a_short_run() {
        for s in Suite::ALL {
            let r = run_suite(s, &quick(8));
            assert!(r.passed, "{}", serde_json::to_string_pretty(&r.json).unwrap());
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let a = run_suite(Suite::Equiv, &quick(6)).json;
        let b = run_suite(Suite::Equiv, &quick(6)).json;
        assert_eq!(a, b);
    }

    #[test]
    fn tolerance_overrides_apply() {
        let mut opts = quick(4);
        opts.tolerances.push(("inv".into(), 0.0));
        opts.tolerances.push(("group.homomorphism".into(), 1e-300));
        assert_eq!(opts.tolerance(Suite::Inv, &Suite::Inv.checks()[0]), 0.0);
        assert_eq!(opts.tolerance(Suite::Group, &Suite::Group.checks()[0]), 1e-14);
        assert_eq!(opts.tolerance(Suite::Group, &Suite::Group.checks()[1]), 1e-300);
    }

    #[test]
    fn sharing_fault_fails_equivariance() {
        let mut opts = quick(30);
        opts.fault = Some(Fault::Sharing);
        assert!(!run_suite(Suite::Equiv, &opts).passed);
    }

    #[test]
    fn reports_validate() {
        let (ok, report) = run_check(&[Suite::Group, Suite::Rank], &quick(3));
        assert!(ok);
        crate::report::validate(&report).unwrap();
    }
}
