//! POVM file format and JSON encodings of reports.
//!
//! A POVM file looks like
//!
//! ```json
//! {"dimension": 2, "labels": ["red", "green"],
//!  "effects": [[[0.7,0],[0,0],[0,0],[0,0]], [[0.3,0],[0,0],[0,0],[1,0]]]}
//! ```
//!
//! Each effect is a row-major list of `d²` `[re, im]` pairs. A nested list
//! of `d` rows is accepted on input; output is always flat. Outcome and
//! effect indices in every JSON document are 1-based.

use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::labeling::{ClassLabeling, ConsistencyCheck, DecisionRule, LabelingReport, PlanStep, ProbeState};
use crate::linalg::{Matrix, Vector};
use crate::povm::{Observable, ValidationError};
use crate::simulate::{SimulationResult, Verification, VerifyStatus};
use crate::tester::Tester;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// The POVM document exactly as written in the file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PovmDocument {
    pub dimension: usize,
    pub labels: Vec<String>,
    pub effects: Vec<Vec<[f64; 2]>>,
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Schema { field: field.into(), message: message.into() }
}

fn pair(v: &Value, field: &str) -> Result<[f64; 2], IoError> {
    let Some(items) = v.as_array() else {
        return Err(schema(field, format!("expected an [re, im] pair, found {}", kind(v))));
    };
    if items.len() != 2 {
        return Err(schema(field, format!("expected an [re, im] pair, found {} numbers", items.len())));
    }
    let mut out = [0.0; 2];
    for (i, x) in items.iter().enumerate() {
        out[i] = x
            .as_f64()
            .filter(|f| f.is_finite())
            .ok_or_else(|| schema(format!("{field}[{i}]"), format!("expected a finite number, found {}", kind(x))))?;
    }
    Ok(out)
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a bare number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

impl PovmDocument {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let root: Value = serde_json::from_str(text).map_err(|e| IoError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let Some(obj) = root.as_object() else {
            return Err(schema("$", format!("expected an object, found {}", kind(&root))));
        };
        if let Some(unknown) = obj.keys().find(|k| !["dimension", "labels", "effects"].contains(&k.as_str())) {
            return Err(schema(unknown.as_str(), "unknown field"));
        }

        let dim_value = obj.get("dimension").ok_or_else(|| schema("dimension", "missing field"))?;
        let dimension = dim_value
            .as_u64()
            .filter(|&d| d > 0)
            .ok_or_else(|| schema("dimension", "expected a positive integer"))? as usize;

        let labels = obj
            .get("labels")
            .ok_or_else(|| schema("labels", "missing field"))?
            .as_array()
            .ok_or_else(|| schema("labels", "expected an array of strings"))?
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| schema(format!("labels[{i}]"), format!("expected a string, found {}", kind(l))))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let effects_value = obj
            .get("effects")
            .ok_or_else(|| schema("effects", "missing field"))?
            .as_array()
            .ok_or_else(|| schema("effects", "expected an array of effects"))?;
        let mut effects = Vec::with_capacity(effects_value.len());
        for (e, effect) in effects_value.iter().enumerate() {
            let field = format!("effects[{e}]");
            let Some(entries) = effect.as_array() else {
                return Err(schema(field, format!("expected an array, found {}", kind(effect))));
            };
            // rows of pairs rather than pairs: the first entry's first item is itself an array
            let nested = entries
                .first()
                .and_then(Value::as_array)
                .and_then(|row| row.first())
                .is_some_and(Value::is_array);
            let mut flat = Vec::with_capacity(dimension * dimension);
            if nested {
                if entries.len() != dimension {
                    return Err(schema(field, format!("expected {dimension} rows, found {}", entries.len())));
                }
                for (r, row) in entries.iter().enumerate() {
                    let Some(row) = row.as_array() else {
                        return Err(schema(format!("{field}[{r}]"), format!("expected a row array, found {}", kind(row))));
                    };
                    if row.len() != dimension {
                        return Err(schema(format!("{field}[{r}]"), format!("expected {dimension} entries, found {}", row.len())));
                    }
                    for (c, z) in row.iter().enumerate() {
                        flat.push(pair(z, &format!("{field}[{r}][{c}]"))?);
                    }
                }
            } else {
                if entries.len() != dimension * dimension {
                    return Err(schema(
                        field,
                        format!("expected {} [re, im] pairs for a {dimension}x{dimension} effect, found {}", dimension * dimension, entries.len()),
                    ));
                }
                for (i, z) in entries.iter().enumerate() {
                    flat.push(pair(z, &format!("{field}[{i}]"))?);
                }
            }
            effects.push(flat);
        }
        Ok(Self { dimension, labels, effects })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("documents always serialize")
    }

    pub fn from_observable(obs: &Observable) -> Self {
        let d = obs.dim();
        let effects = obs
            .effects()
            .iter()
            .map(|m| {
                let mut flat = Vec::with_capacity(d * d);
                for r in 0..d {
                    for c in 0..d {
                        let z = m.matrix()[(r, c)];
                        flat.push([z.re, z.im]);
                    }
                }
                flat
            })
            .collect();
        Self { dimension: d, labels: obs.labels().to_vec(), effects }
    }

    pub fn matrices(&self) -> Vec<Matrix> {
        let d = self.dimension;
        self.effects
            .iter()
            .map(|flat| Matrix::from_fn(d, d, |r, c| Complex64::new(flat[r * d + c][0], flat[r * d + c][1])))
            .collect()
    }

    pub fn into_observable(self, tol: f64) -> Result<Observable, IoError> {
        let matrices = self.matrices();
        Ok(Observable::validate(matrices, self.labels, tol)?)
    }
}

pub fn parse_povm_str(text: &str, tol: f64) -> Result<Observable, IoError> {
    PovmDocument::from_json(text)?.into_observable(tol)
}

pub fn parse_povm(path: impl AsRef<Path>, tol: f64) -> Result<Observable, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
    parse_povm_str(&text, tol)
}

pub fn serialize_povm(obs: &Observable) -> String {
    PovmDocument::from_observable(obs).to_json()
}

fn z(c: Complex64) -> Value {
    json!([c.re, c.im])
}

pub fn vector_json(v: &Vector) -> Value {
    Value::Array(v.iter().map(|c| z(*c)).collect())
}

pub fn matrix_json(m: &Matrix) -> Value {
    let mut flat = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            flat.push(z(m[(r, c)]));
        }
    }
    Value::Array(flat)
}

fn one_based(xs: &[usize]) -> Value {
    Value::Array(xs.iter().map(|x| json!(x + 1)).collect())
}

pub fn probe_json(p: &ProbeState) -> Value {
    match p {
        ProbeState::Pure(v) => json!({"kind": "pure", "vector": vector_json(v)}),
        ProbeState::Mixed(rho) => json!({"kind": "mixed", "density": matrix_json(rho.matrix())}),
    }
}

pub fn rule_json(r: &DecisionRule) -> Value {
    match r {
        DecisionRule::Assign(a) => json!({
            "kind": "assign",
            "recorded_outcome_to_effect": a.iter().map(|e| e.map(|e| e + 1)).collect::<Vec<_>>(),
        }),
        DecisionRule::Exclude(ex) => json!({"kind": "exclude", "effects": one_based(ex)}),
        DecisionRule::UniformGuess => json!({"kind": "uniform_guess"}),
    }
}

pub fn tester_json(t: &Tester) -> Value {
    json!({
        "system_dim": t.system_dim(),
        "outcome_dim": t.outcome_dim(),
        "probe_normalization": matrix_json(t.probe().matrix()),
        "elements": t.elements().iter().map(|e| matrix_json(e.matrix())).collect::<Vec<_>>(),
        "inconclusive_element": t.inconclusive().map(|i| i + 1),
    })
}

fn class_json(c: &ClassLabeling) -> Value {
    json!({
        "members": one_based(&c.members),
        "multiplicity": c.multiplicity,
        "lambda_max": c.lambda_max,
        "feasible": c.feasible,
        "probe": c.probe.as_ref().map(vector_json),
        "leakage": c.leakage,
    })
}

fn step_json(s: &PlanStep) -> Value {
    json!({"probe": vector_json(&s.probe), "class": one_based(&s.class), "effect": s.effect + 1})
}

fn check_json(c: &ConsistencyCheck) -> Value {
    json!({"name": c.name, "residual": c.residual, "tolerance": c.tolerance, "passed": c.passed()})
}

pub fn report_json(r: &LabelingReport) -> Value {
    json!({
        "mode": r.mode.as_str(),
        "feasible": r.feasible,
        "trivial": r.trivial,
        "verdict": r.verdict,
        "p_error": r.p_error,
        "p_failure": r.p_failure,
        "probe": r.probe.as_ref().map(probe_json),
        "decision_rule": r.decision_rule.as_ref().map(rule_json),
        "excluded_effects": one_based(&r.excluded_effects),
        "classes": r.classes.iter().map(class_json).collect::<Vec<_>>(),
        "plan": r.plan.iter().map(step_json).collect::<Vec<_>>(),
        "min_uses_bound": r.min_uses_bound,
        "fully_labelable_in": r.fully_labelable_in,
        "tester": r.tester.as_ref().map(tester_json),
        "checks": r.checks.iter().map(check_json).collect::<Vec<_>>(),
        "tolerances": {"tol": r.tolerances.tol, "rank_tol": r.tolerances.rank_tol},
        "notes": r.notes,
    })
}

pub fn simulation_json(s: &SimulationResult) -> Value {
    json!({
        "trials": s.trials,
        "errors": s.errors,
        "failures": s.failures,
        "empirical_error_rate": s.empirical_error_rate,
        "empirical_failure_rate": s.empirical_failure_rate,
        "std_error": s.std_error,
        "failure_std_error": s.failure_std_error,
        "seed": s.seed,
        "rng_algorithm": s.rng_algorithm,
        "outcome_counts": s.outcome_counts,
        "effect_counts": s.effect_counts,
    })
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn verification_json(v: &Verification) -> Value {
    let status = match v.status {
        VerifyStatus::Pass => "pass",
        VerifyStatus::Fail => "fail",
        VerifyStatus::NotApplicable => "not_applicable",
    };
    let mut m = Map::new();
    m.insert("status".into(), json!(status));
    m.insert("hypotheses".into(), json!(v.hypotheses));
    m.insert("trials".into(), json!(v.trials));
    for (k, x) in [
        ("expected_error", v.expected_error),
        ("expected_failure", v.expected_failure),
        ("empirical_error", v.empirical_error),
        ("empirical_failure", v.empirical_failure),
        ("std_error", v.std_error),
        ("failure_std_error", v.failure_std_error),
        ("error_margin", v.error_margin),
        ("failure_margin", v.failure_margin),
    ] {
        m.insert(k.into(), finite(x));
    }
    m.insert("seed".into(), json!(v.seed));
    m.insert("notes".into(), json!(v.notes));
    Value::Object(m)
}

/// `x` to 6 significant digits, trailing zeros dropped.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" { "0".into() } else { s }
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, exponent) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exponent}")
    }
}
