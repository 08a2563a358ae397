//! JSON and CSV forms of expansions, grids, traces and verdicts.
//!
//! Rationals travel as `"p/q"` strings. Fields ending in `_decimal` carry a
//! 17-significant-digit rendering for plotting tools and are never read back.

use std::fmt::Write as _;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};
use crate::greedy::{GreedyStepRecord, SelectionRule};
use crate::haar::{Grid, HaarExpansion};
use crate::scalar::{format_decimal, format_rational, parse_rational, Scalar};
use crate::verify::{LemmaId, LemmaVerdict};
use crate::{Expansion, Rational, Trace};

#[derive(Serialize, Deserialize)]
struct CoeffRecord {
    cube: String,
    j: usize,
    value: String,
}

#[derive(Serialize, Deserialize)]
struct ExpansionRecord {
    dim: usize,
    #[serde(default = "zero_string")]
    constant: String,
    #[serde(default)]
    coeffs: Vec<CoeffRecord>,
}

#[derive(Serialize, Deserialize)]
struct GridRecord {
    dim: usize,
    level: u32,
    values: Vec<String>,
}

fn zero_string() -> String {
    "0".into()
}

fn parse(s: &str) -> Result<Rational> {
    parse_rational(s).ok_or_else(|| Error::Parse(format!("not a rational: {s:?}")))
}

fn decimal(r: &Rational) -> String {
    format_decimal(r.approx_f64())
}

pub fn expansion_to_json(f: &Expansion) -> Value {
    let record = ExpansionRecord {
        dim: f.dim(),
        constant: format_rational(f.constant()),
        coeffs: f
            .spectrum()
            .map(|(k, v)| CoeffRecord { cube: k.cube.to_string(), j: k.index, value: format_rational(v) })
            .collect(),
    };
    serde_json::to_value(record).expect("plain record")
}

pub fn expansion_from_json(value: &Value) -> Result<Expansion> {
    let record: ExpansionRecord =
        serde_json::from_value(value.clone()).map_err(|e| Error::Parse(format!("expansion: {e}")))?;
    let mut f = HaarExpansion::constant_function(record.dim, parse(&record.constant)?);
    for c in record.coeffs {
        let cube: DyadicCube = c.cube.parse()?;
        if cube.dim() != record.dim {
            return Err(Error::DimensionMismatch(record.dim, cube.dim()));
        }
        if c.j == 0 {
            return Err(Error::InvalidIndex { index: 0, dim: record.dim });
        }
        f.add_to(&cube, c.j, parse(&c.value)?)?;
    }
    Ok(f)
}

pub fn grid_to_json(grid: &Grid<Rational>) -> Value {
    let record =
        GridRecord { dim: grid.dim, level: grid.level, values: grid.values.iter().map(format_rational).collect() };
    serde_json::to_value(record).expect("plain record")
}

pub fn grid_from_json(value: &Value) -> Result<Grid<Rational>> {
    let record: GridRecord = serde_json::from_value(value.clone()).map_err(|e| Error::Parse(format!("grid: {e}")))?;
    let values = record.values.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
    Grid::new(record.dim, record.level, values)
}

/// Reads either an expansion document or a grid document (which is analysed).
pub fn read_function(text: &str) -> Result<Expansion> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if value.get("values").is_some() {
        HaarExpansion::analysis(&grid_from_json(&value)?)
    } else {
        expansion_from_json(&value)
    }
}

pub fn step_to_json(step: &GreedyStepRecord<Rational>, initial_norm: &Rational) -> Value {
    let ratio = ratio(&step.approximant_norm, initial_norm);
    json!({
        "m": step.m,
        "delta_m": step.delta_m.to_string(),
        "j_m": step.j_m,
        "tilde_delta_m": step.tilde_delta_m.to_string(),
        "i_m": step.i_m,
        "removed_value": format_rational(&step.removed_value),
        "approximant_norm": format_rational(&step.approximant_norm),
        "residual_norm": format_rational(&step.residual_norm),
        "ratio": ratio.as_ref().map(format_rational),
        "removed_value_decimal": decimal(&step.removed_value),
        "approximant_norm_decimal": decimal(&step.approximant_norm),
        "residual_norm_decimal": decimal(&step.residual_norm),
        "ratio_decimal": ratio.as_ref().map(decimal),
    })
}

fn ratio(num: &Rational, den: &Rational) -> Option<Rational> {
    (!den.is_zero()).then(|| num / den)
}

/// One JSON object per step, newline terminated.
pub fn trace_to_jsonl(trace: &Trace) -> String {
    let mut out = String::new();
    for step in &trace.steps {
        out.push_str(&step_to_json(step, &trace.initial_norm).to_string());
        out.push('\n');
    }
    out
}

/// `m,residual_norm,approximant_norm,ratio` with decimal values.
pub fn trace_to_csv(trace: &Trace) -> String {
    let mut out = String::from("m,residual_norm,approximant_norm,ratio\n");
    for step in &trace.steps {
        let r = ratio(&step.approximant_norm, &trace.initial_norm).map(|r| decimal(&r)).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", step.m, decimal(&step.residual_norm), decimal(&step.approximant_norm), r);
    }
    out
}

/// Run header: parameters, input norm and outcome.
pub fn trace_summary(trace: &Trace) -> Value {
    let max_ratio = trace.max_ratio();
    json!({
        "s": format_rational(&trace.params.s),
        "t": format_rational(&trace.params.t),
        "variant": match trace.params.rule { SelectionRule::A => "a", SelectionRule::B => "b" },
        "include_constant": trace.params.include_constant,
        "steps": trace.steps.len(),
        "terminated": trace.terminated,
        "boundary_regime": trace.boundary_regime,
        "initial_norm": format_rational(&trace.initial_norm),
        "max_approximant_norm": format_rational(&trace.max_approximant_norm()),
        "max_ratio": max_ratio.as_ref().map(format_rational),
        "max_ratio_decimal": max_ratio.as_ref().map(decimal),
    })
}

pub fn verdict_to_json(v: &LemmaVerdict) -> Value {
    json!({
        "lemma_id": v.lemma_id.as_str(),
        "holds": v.holds,
        "lhs": format_rational(&v.lhs),
        "rhs": format_rational(&v.rhs),
        "lhs_decimal": decimal(&v.lhs),
        "rhs_decimal": decimal(&v.rhs),
        "witness": v.witness,
    })
}

pub fn verdicts_to_jsonl(verdicts: &[LemmaVerdict]) -> String {
    let mut out = String::new();
    for v in verdicts {
        out.push_str(&verdict_to_json(v).to_string());
        out.push('\n');
    }
    out
}

/// `(lemma_id, trials, failures)` per lemma present, in enumeration order.
pub fn summarize(verdicts: &[LemmaVerdict]) -> Vec<(LemmaId, usize, usize)> {
    let mut rows: std::collections::BTreeMap<LemmaId, (usize, usize)> = Default::default();
    for v in verdicts {
        let e = rows.entry(v.lemma_id).or_default();
        e.0 += 1;
        e.1 += usize::from(!v.holds);
    }
    rows.into_iter().map(|(id, (n, f))| (id, n, f)).collect()
}

pub fn summary_csv(verdicts: &[LemmaVerdict]) -> String {
    let mut out = String::from("lemma_id,trials,failures\n");
    for (id, n, f) in summarize(verdicts) {
        let _ = writeln!(out, "{},{n},{f}", id.as_str());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::build_f_n;
    use crate::greedy::{run, GreedyParams};

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    #[test]
    fn expansion_round_trips() {
        let mut f = build_f_n::<Rational>(3).unwrap();
        f.set(&"d2:n4:(3,9)".parse().unwrap(), 2, q(-7, 3)).unwrap();
        let v = expansion_to_json(&f);
        assert_eq!(v["constant"], "1/1");
        assert_eq!(expansion_from_json(&v).unwrap(), f);
        assert_eq!(read_function(&v.to_string()).unwrap(), f);
    }

    #[test]
    fn grid_documents_are_analysed() {
        let text = r#"{"dim":1,"level":1,"values":["3/2","1/2"]}"#;
        let f = read_function(text).unwrap();
        assert_eq!(*f.constant(), q(1, 1));
        assert_eq!(f.coefficient(&DyadicCube::root(1), 1), q(1, 2));
        assert_eq!(grid_to_json(&f.to_grid(1).unwrap())["values"][0], "3/2");
    }

    #[test]
    fn malformed_input_is_a_parse_error() {
        assert!(matches!(read_function("{"), Err(Error::Parse(_))));
        assert!(matches!(read_function(r#"{"dim":1,"constant":"x"}"#), Err(Error::Parse(_))));
        let bad_j = r#"{"dim":1,"constant":"0","coeffs":[{"cube":"d1:n0:(0)","j":0,"value":"1"}]}"#;
        assert!(read_function(bad_j).is_err());
    }

    #[test]
    fn trace_outputs_are_stable() {
        let f = build_f_n::<Rational>(2).unwrap();
        let trace = run(&f, &GreedyParams::new(q(3, 4), q(1, 2)).unwrap()).unwrap();
        let jsonl = trace_to_jsonl(&trace);
        assert_eq!(jsonl.lines().count(), trace.steps.len());
        assert_eq!(jsonl, trace_to_jsonl(&trace));
        let first: Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(first["m"], 1);
        let csv = trace_to_csv(&trace);
        assert!(csv.starts_with("m,residual_norm,approximant_norm,ratio\n"));
        assert_eq!(csv.lines().count(), trace.steps.len() + 1);
    }
}
