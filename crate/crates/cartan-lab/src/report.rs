//! Report data model and JSON serialization.
//!
//! Reports are the tool's public contract: schema-versioned, deterministic
//! for a fixed seed, with every real serialized to 17 significant digits so
//! round-tripping the file reproduces the exact 64-bit values.

use serde::Serialize;
use serde_json::value::RawValue;

pub const SCHEMA: &str = "cartan-lab/1";

/// One residual measured at one point.
#[derive(Debug, Clone)]
pub struct Residual {
    /// Stable machine-readable identifier, e.g. `base.deflection`.
    pub name: &'static str,
    /// The identity being checked, in index notation.
    pub identity: &'static str,
    /// Tolerance this residual is judged against (before global scaling).
    pub tolerance: f64,
    pub value: f64,
}

impl Residual {
    pub fn new(name: &'static str, identity: &'static str, tolerance: f64, value: f64) -> Self {
        Residual {
            name,
            identity,
            tolerance,
            value,
        }
    }
}

/// A residual aggregated over all sampled points.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub identity: String,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub n_points: usize,
    /// Whether a failure of this check falsifies a structural identity (as
    /// opposed to an input-dependent property reported for the verdicts).
    pub hard: bool,
}

/// Input-dependent conclusions, derived only from checks present in the run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Verdicts {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub almost_kahler: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub einstein_consistent: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub locally_symmetric_consistent: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riemannian_detected: Option<bool>,
}

/// Full verification report for one run.
#[derive(Debug, Clone)]
pub struct LiftReport {
    pub meta: Meta,
    pub checks: Vec<Check>,
    pub verdicts: Verdicts,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub version: String,
    pub timestamp_unix: u64,
    pub expression: String,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub v: f64,
    pub v_linked: bool,
    pub domain: Vec<(f64, f64)>,
    pub p_annulus: (f64, f64),
    pub points: usize,
    pub seed: u64,
    pub jet_order: usize,
    pub suites: Vec<String>,
    pub tolerance_scale: f64,
}

/// A raw JSON number carrying 17 significant digits (round-trip exact for
/// 64-bit floats).
pub fn f17(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // residuals from a failed evaluation; keep the report valid JSON
        format!("\"{x}\"")
    };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

#[derive(Serialize)]
struct CheckWire<'a> {
    name: &'a str,
    identity: &'a str,
    max_abs_residual: Box<RawValue>,
    tolerance: Box<RawValue>,
    pass: bool,
    hard: bool,
    n_points: usize,
}

#[derive(Serialize)]
struct ReportWire<'a> {
    schema: &'static str,
    meta: &'a Meta,
    checks: Vec<CheckWire<'a>>,
    verdicts: &'a Verdicts,
}

impl LiftReport {
    pub fn to_json(&self) -> String {
        let wire = ReportWire {
            schema: SCHEMA,
            meta: &self.meta,
            checks: self
                .checks
                .iter()
                .map(|c| CheckWire {
                    name: &c.name,
                    identity: &c.identity,
                    max_abs_residual: f17(c.max_abs_residual),
                    tolerance: f17(c.tolerance),
                    pass: c.pass,
                    hard: c.hard,
                    n_points: c.n_points,
                })
                .collect(),
            verdicts: &self.verdicts,
        };
        serde_json::to_string_pretty(&wire).expect("report serialization")
    }

    pub fn failed_hard_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.hard && !c.pass).collect()
    }
}

/// Nested component arrays for tensor dumps, leaves as 17-digit numbers.
#[derive(Serialize)]
#[serde(untagged)]
pub enum Nested {
    Leaf(Box<RawValue>),
    List(Vec<Nested>),
}

/// Build the nested array for a row-major flat buffer with the given shape.
pub fn nest(shape: &[usize], flat: &[f64]) -> Nested {
    fn build(shape: &[usize], flat: &[f64], offset: &mut usize) -> Nested {
        match shape {
            [] => {
                let leaf = Nested::Leaf(f17(flat[*offset]));
                *offset += 1;
                leaf
            }
            [head, rest @ ..] => {
                Nested::List((0..*head).map(|_| build(rest, flat, offset)).collect())
            }
        }
    }
    let mut offset = 0;
    let out = build(shape, flat, &mut offset);
    assert_eq!(offset, flat.len(), "shape/component mismatch");
    out
}

#[derive(Serialize)]
pub struct TensorEntry {
    pub name: &'static str,
    /// Index variance, one entry per slot: "upper" / "lower" / "frame".
    pub variance: Vec<&'static str>,
    pub shape: Vec<usize>,
    pub components: Nested,
}

#[derive(Serialize)]
pub struct TensorDump {
    pub schema: &'static str,
    pub expression: String,
    pub x: Vec<Box<RawValue>>,
    pub p: Vec<Box<RawValue>>,
    pub tensors: Vec<TensorEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_round_trip() {
        for x in [
            0.1,
            -3.0e-9,
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            123456.789012345678,
            0.0,
        ] {
            let raw = f17(x);
            let back: f64 = serde_json::from_str(raw.get()).unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn nest_builds_matrix() {
        let n = nest(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let json = serde_json::to_string(&n).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v[1][0], serde_json::json!(3.0));
    }
}
