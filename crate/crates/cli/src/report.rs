//! JSON reports shared by every subcommand.
//!
//! Every report is an object with `"schema": "report/1"` and a `"command"`
//! field; the remaining keys depend on the command. [`validate`] checks the
//! layout documented in the README.

use magep_core::GroupElement;
use serde_json::{json, Map, Value};

pub const SCHEMA: &str = "report/1";

/// Group element as `{variant, layers: [{scales, perm}]}`, with 1-based permutations.
pub fn group_json(g: &GroupElement) -> Value {
    let layers: Vec<Value> = g
        .layers()
        .iter()
        .map(|m| json!({"scales": m.scales(), "perm": m.perm().iter().map(|p| p + 1).collect::<Vec<_>>()}))
        .collect();
    json!({"variant": g.variant().name(), "layers": layers})
}

type Check = Result<(), String>;

fn field<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Value, String> {
    obj.get(key).ok_or_else(|| format!("{at}: missing `{key}`"))
}

fn object<'a>(v: &'a Value, at: &str) -> Result<&'a Map<String, Value>, String> {
    v.as_object().ok_or_else(|| format!("{at}: expected an object"))
}

fn array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>, String> {
    v.as_array().ok_or_else(|| format!("{at}: expected an array"))
}

fn want<T>(got: Option<T>, at: &str, what: &str) -> Result<T, String> {
    got.ok_or_else(|| format!("{at}: expected {what}"))
}

/// Numbers, or `null` for a value that could not be computed.
fn number_or_null(v: &Value, at: &str) -> Check {
    if v.is_null() || v.is_number() {
        Ok(())
    } else {
        Err(format!("{at}: expected a number or null"))
    }
}

fn uint_list(v: &Value, at: &str) -> Check {
    for (k, x) in array(v, at)?.iter().enumerate() {
        want(x.as_u64(), &format!("{at}[{k}]"), "a non-negative integer")?;
    }
    Ok(())
}

fn validate_group(v: &Value, at: &str) -> Check {
    let o = object(v, at)?;
    let variant = want(field(o, "variant", at)?.as_str(), at, "a variant name")?;
    if variant != "positive-scaling" && variant != "sign-flip" {
        return Err(format!("{at}: unknown variant `{variant}`"));
    }
    for (i, layer) in array(field(o, "layers", at)?, at)?.iter().enumerate() {
        let at = format!("{at}.layers[{i}]");
        let l = object(layer, &at)?;
        let scales = array(field(l, "scales", &at)?, &at)?;
        let perm = array(field(l, "perm", &at)?, &at)?;
        if scales.len() != perm.len() {
            return Err(format!("{at}: scales and perm lengths differ"));
        }
        let mut seen = vec![false; perm.len()];
        for p in perm {
            let p = want(p.as_u64(), &at, "1-based permutation entries")? as usize;
            if p == 0 || p > seen.len() || std::mem::replace(&mut seen[p - 1], true) {
                return Err(format!("{at}: perm is not a 1-based permutation"));
            }
        }
        for s in scales {
            want(s.as_f64(), &at, "numeric scales")?;
        }
    }
    Ok(())
}

fn validate_check(v: &Value, at: &str) -> Check {
    let o = object(v, at)?;
    want(field(o, "name", at)?.as_str(), at, "a check name")?;
    let bound = want(field(o, "bound", at)?.as_str(), at, "a bound")?;
    if bound != "at_most" && bound != "at_least" {
        return Err(format!("{at}: unknown bound `{bound}`"));
    }
    want(field(o, "tolerance", at)?.as_f64(), at, "a numeric tolerance")?;
    number_or_null(field(o, "value", at)?, &format!("{at}.value"))?;
    want(field(o, "passed", at)?.as_bool(), at, "a boolean `passed`")?;
    want(field(o, "evaluated", at)?.as_u64(), at, "an integer `evaluated`")?;
    for (k, r) in array(field(o, "residuals", at)?, at)?.iter().enumerate() {
        number_or_null(r, &format!("{at}.residuals[{k}]"))?;
    }
    if let Some(w) = o.get("worst_trial") {
        if !w.is_null() {
            validate_trial(w, &format!("{at}.worst_trial"))?;
        }
    }
    Ok(())
}

fn validate_trial(v: &Value, at: &str) -> Check {
    let o = object(v, at)?;
    want(field(o, "index", at)?.as_u64(), at, "an integer index")?;
    want(field(o, "seed", at)?.as_u64(), at, "an integer seed")?;
    uint_list(field(o, "widths", at)?, &format!("{at}.widths"))?;
    want(field(o, "d", at)?.as_u64(), at, "an integer d")?;
    if let Some(g) = o.get("group") {
        if !g.is_null() {
            validate_group(g, &format!("{at}.group"))?;
        }
    }
    Ok(())
}

fn validate_suite(v: &Value, at: &str) -> Check {
    let o = object(v, at)?;
    want(field(o, "suite", at)?.as_str(), at, "a suite name")?;
    want(field(o, "trials", at)?.as_u64(), at, "an integer trial count")?;
    want(field(o, "passed", at)?.as_bool(), at, "a boolean `passed`")?;
    number_or_null(field(o, "max_residual", at)?, &format!("{at}.max_residual"))?;
    let checks = array(field(o, "checks", at)?, at)?;
    for (k, c) in checks.iter().enumerate() {
        validate_check(c, &format!("{at}.checks[{k}]"))?;
    }
    for (k, e) in array(field(o, "errors", at)?, at)?.iter().enumerate() {
        want(e.as_str(), &format!("{at}.errors[{k}]"), "a string")?;
    }
    Ok(())
}

fn validate_check_report(o: &Map<String, Value>) -> Check {
    want(field(o, "seed", "report")?.as_u64(), "report", "an integer seed")?;
    want(
        field(o, "trials", "report")?.as_u64(),
        "report",
        "an integer trial count",
    )?;
    want(field(o, "passed", "report")?.as_bool(), "report", "a boolean `passed`")?;
    object(field(o, "grid", "report")?, "report.grid")?;
    let suites = array(field(o, "suites", "report")?, "report.suites")?;
    for (k, s) in suites.iter().enumerate() {
        validate_suite(s, &format!("report.suites[{k}]"))?;
    }
    Ok(())
}

fn validate_bench_report(o: &Map<String, Value>) -> Check {
    want(field(o, "reps", "report")?.as_u64(), "report", "an integer reps")?;
    want(field(o, "seed", "report")?.as_u64(), "report", "an integer seed")?;
    for (k, p) in array(field(o, "points", "report")?, "report.points")?
        .iter()
        .enumerate()
    {
        let at = format!("report.points[{k}]");
        let p = object(p, &at)?;
        uint_list(field(p, "widths", &at)?, &format!("{at}.widths"))?;
        want(field(p, "d", &at)?.as_u64(), &at, "an integer d")?;
        want(field(p, "e", &at)?.as_u64(), &at, "an integer e")?;
        for path in ["optimized", "naive"] {
            let at = format!("{at}.{path}");
            let t = object(field(p, path, &at)?, &at)?;
            want(field(t, "median_s", &at)?.as_f64(), &at, "a numeric median")?;
            let samples = array(field(t, "samples_s", &at)?, &at)?;
            if samples.is_empty() {
                return Err(format!("{at}: no samples"));
            }
            for key in ["min_s", "max_s"] {
                number_or_null(field(t, key, &at)?, &format!("{at}.{key}"))?;
            }
        }
        want(field(p, "speedup", &at)?.as_f64(), &at, "a numeric speedup")?;
    }
    Ok(())
}

fn validate_fit_report(o: &Map<String, Value>) -> Check {
    for key in ["train_mse", "test_mse", "constant_mse", "invariance_residual", "lambda"] {
        want(field(o, key, "report")?.as_f64(), "report", &format!("numeric `{key}`"))?;
    }
    for key in ["n_features", "n_train", "n_test"] {
        want(field(o, key, "report")?.as_u64(), "report", &format!("integer `{key}`"))?;
    }
    let target = want(field(o, "target", "report")?.as_str(), "report", "a target name")?;
    if target != "planted" && target != "probe" {
        return Err(format!("report: unknown target `{target}`"));
    }
    validate_group(field(o, "group", "report")?, "report.group")
}

/// Checks a report against the `report/1` layout.
pub fn validate(report: &Value) -> Check {
    let o = object(report, "report")?;
    let schema = want(field(o, "schema", "report")?.as_str(), "report", "a schema string")?;
    if schema != SCHEMA {
        return Err(format!("report: schema `{schema}` is not `{SCHEMA}`"));
    }
    match want(field(o, "command", "report")?.as_str(), "report", "a command name")? {
        "check" => validate_check_report(o),
        "bench" => validate_bench_report(o),
        "fit" => validate_fit_report(o),
        other => Err(format!("report: unknown command `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use magep_core::{Rng, Variant, WeightSpec};

    #[test]
    fn group_perms_are_one_based() {
        let spec = WeightSpec::new(vec![1, 3, 1], 1).unwrap();
        let g = GroupElement::sample(&spec, Variant::SignFlip, (0.25, 4.0), &mut Rng::new(3)).unwrap();
        let v = group_json(&g);
        validate_group(&v, "g").unwrap();
        let mut perm: Vec<u64> = v["layers"][1]["perm"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p.as_u64().unwrap())
            .collect();
        perm.sort();
        assert_eq!(perm, vec![1, 2, 3]);
    }

    #[test]
    fn rejects_wrong_schema_and_bad_perms() {
        assert!(validate(&json!({"schema": "report/2", "command": "check"})).is_err());
        assert!(validate(&json!({"schema": "report/1", "command": "gen"})).is_err());
        let bad = json!({"variant": "sign-flip", "layers": [{"scales": [1.0, 1.0], "perm": [1, 1]}]});
        assert!(validate_group(&bad, "g").is_err());
        let bad = json!({"variant": "sign-flip", "layers": [{"scales": [1.0], "perm": [0]}]});
        assert!(validate_group(&bad, "g").is_err());
    }
}
