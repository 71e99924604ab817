//! Report records and their JSON form. Non-finite numbers are written as the
//! strings `"inf"`, `"-inf"` and `"nan"` so every report is valid JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::criteria::{CriterionId, RangeVerdict, Witness};
use crate::{FiniteMeasureSpace, PFunction};

/// JSON Schema (draft 2020-12) that every report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

/// A double that survives JSON round trips even when infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            s.serialize_f64(x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(Real(x)),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(Real(f64::INFINITY)),
                "-inf" => Ok(Real(f64::NEG_INFINITY)),
                "nan" => Ok(Real(f64::NAN)),
                other => Err(serde::de::Error::custom(format!("not a number: `{other}`"))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    HypothesisFailed,
    OracleMismatch,
    Error,
}

/// Weight value: a real number, or `[re, im]` when the imaginary part is nonzero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WitnessValue {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessPayload {
    /// `(atom_id, value)` pairs for the atoms where the function is nonzero
    Function { values: Vec<(String, WitnessValue)> },
    Atoms { atoms: Vec<String> },
}

impl WitnessPayload {
    pub fn from_function(space: &FiniteMeasureSpace, f: &PFunction) -> Self {
        let values = f
            .values()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
            .map(|(a, z)| {
                let v = if z.im == 0.0 {
                    WitnessValue::Real(z.re)
                } else {
                    WitnessValue::Complex([z.re, z.im])
                };
                (space.atoms()[a].id.clone(), v)
            })
            .collect();
        WitnessPayload::Function { values }
    }

    pub fn from_atoms(space: &FiniteMeasureSpace, atoms: &[usize]) -> Self {
        WitnessPayload::Atoms {
            atoms: atoms.iter().map(|&a| space.atoms()[a].id.clone()).collect(),
        }
    }

    pub fn from_witness(space: &FiniteMeasureSpace, w: &Witness) -> Self {
        match w {
            Witness::Function(f) => Self::from_function(space, f),
            Witness::Atoms(a) => Self::from_atoms(space, a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub name: String,
    pub value: Real,
    pub threshold: Real,
    pub ok: bool,
}

impl ResidualRecord {
    pub fn new(name: &str, value: f64, threshold: f64) -> Self {
        ResidualRecord {
            name: name.to_owned(),
            value: Real(value),
            threshold: Real(threshold),
            ok: value <= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: CriterionId,
    pub theorem: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub holds: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub margin: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<WitnessPayload>,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub notes: String,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub quantities: BTreeMap<String, Real>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub trends: BTreeMap<String, Vec<Real>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub residuals: Vec<ResidualRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

impl CheckRecord {
    pub fn failed(check: CriterionId, status: Status, message: String) -> Self {
        CheckRecord {
            check,
            theorem: check.theorem().to_owned(),
            status,
            holds: None,
            margin: None,
            witness: None,
            notes: String::new(),
            quantities: BTreeMap::new(),
            trends: BTreeMap::new(),
            residuals: Vec::new(),
            message: Some(message),
        }
    }

    /// Record for a verdict; status follows the residuals.
    pub fn from_verdict(
        space: &FiniteMeasureSpace,
        check: CriterionId,
        verdict: &RangeVerdict,
        residuals: Vec<ResidualRecord>,
    ) -> Self {
        let status = if residuals.iter().all(|r| r.ok) {
            Status::Ok
        } else {
            Status::OracleMismatch
        };
        CheckRecord {
            check,
            theorem: check.theorem().to_owned(),
            status,
            holds: Some(verdict.holds),
            margin: Some(Real(verdict.margin)),
            witness: verdict.witness.as_ref().map(|w| WitnessPayload::from_witness(space, w)),
            notes: verdict.notes.clone(),
            quantities: verdict.quantities.iter().map(|(k, v)| (k.clone(), Real(*v))).collect(),
            trends: verdict
                .trends
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().copied().map(Real).collect()))
                .collect(),
            residuals,
            message: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRecord {
    pub name: String,
    pub passed: bool,
    pub cases: u64,
    pub failures: u64,
    pub max_residual: Real,
    pub threshold: Real,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scenario: Option<String>,
    pub checks: Vec<CheckRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub suites: Vec<SuiteRecord>,
    /// wall-clock milliseconds per check; only present when requested, since it
    /// breaks byte-identical output
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing_ms: Option<BTreeMap<String, Real>>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// 3 on any oracle mismatch or failed suite, then 4 on errors, then 2 on
    /// failed hypotheses, else 0.
    pub fn exit_code(&self) -> i32 {
        let has = |s: Status| self.checks.iter().any(|c| c.status == s);
        if has(Status::OracleMismatch) || self.suites.iter().any(|s| !s.passed) {
            3
        } else if has(Status::Error) {
            4
        } else if has(Status::HypothesisFailed) {
            2
        } else {
            0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_reals_round_trip() {
        for x in [1.5, f64::INFINITY, f64::NEG_INFINITY] {
            let s = serde_json::to_string(&Real(x)).unwrap();
            assert_eq!(serde_json::from_str::<Real>(&s).unwrap(), Real(x));
        }
        assert_eq!(serde_json::to_string(&Real(f64::INFINITY)).unwrap(), "\"inf\"");
        assert!(serde_json::from_str::<Real>("\"nan\"").unwrap().0.is_nan());
    }

    #[test]
    fn witness_payload_uses_atom_ids() {
        let s = FiniteMeasureSpace::from_masses(&[1.0, 2.0, 3.0]).unwrap();
        let f = s.function(vec![
            crate::Complex64::new(0.0, 0.0),
            crate::Complex64::new(2.0, 0.0),
            crate::Complex64::new(0.0, 1.0),
        ])
        .unwrap();
        let json = serde_json::to_string(&WitnessPayload::from_function(&s, &f)).unwrap();
        assert_eq!(json, r#"{"kind":"function","values":[["a1",2.0],["a2",[0.0,1.0]]]}"#);
    }

    #[test]
    fn exit_code_priority() {
        let mut r = Report {
            tool: "t".into(),
            version: "0".into(),
            seed: None,
            scenario: None,
            checks: vec![],
            suites: vec![],
            timing_ms: None,
        };
        assert_eq!(r.exit_code(), 0);
        r.checks.push(CheckRecord::failed(CriterionId::T2_9, Status::HypothesisFailed, "x".into()));
        assert_eq!(r.exit_code(), 2);
        r.checks.push(CheckRecord::failed(CriterionId::T2_1, Status::Error, "x".into()));
        assert_eq!(r.exit_code(), 4);
        r.checks.push(CheckRecord::failed(CriterionId::T2_8, Status::OracleMismatch, "x".into()));
        assert_eq!(r.exit_code(), 3);
    }
}
