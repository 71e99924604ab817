//! Scenario files: UTF-8 JSON describing a space, the terms of `W`, the
//! exponents and the checks to run.
//!
//! ```json
//! {
//!   "name": "swap",
//!   "atoms": [{"id": "a0", "mass": 1}, {"id": "b", "mass": "1/2", "kind": "cell", "lineage": "B"}],
//!   "terms": [{"weight": [2, [0, 1]], "map": [1, 0]}],
//!   "p": 2, "q": "inf",
//!   "checks": ["T2.1"],
//!   "seed": 7,
//!   "refinement_levels": 0
//! }
//! ```
//!
//! Weights are real numbers or `[re, im]` pairs; masses are numbers or rational
//! strings `"n/d"`; exponents are numbers or `"inf"`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::criteria::CriterionId;
use crate::{Atom, AtomKind, Complex64, Error, Exponent, FiniteMeasureSpace, Result, SelfMap, Term, WeightedSumOperator};

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioTerm {
    pub weight: Vec<Complex64>,
    pub map: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub atoms: Vec<Atom>,
    pub terms: Vec<ScenarioTerm>,
    pub p: Exponent,
    pub q: Exponent,
    pub checks: Vec<CriterionId>,
    pub seed: Option<u64>,
    pub refinement_levels: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawMass {
    Number(f64),
    Text(String),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum RawValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<Complex64> for RawValue {
    fn from(z: Complex64) -> Self {
        if z.im == 0.0 {
            RawValue::Real(z.re)
        } else {
            RawValue::Pair([z.re, z.im])
        }
    }
}

impl From<&RawValue> for Complex64 {
    fn from(v: &RawValue) -> Self {
        match *v {
            RawValue::Real(x) => Complex64::new(x, 0.0),
            RawValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Serialize, Deserialize, Default, PartialEq)]
#[serde(rename_all = "lowercase")]
enum RawKind {
    #[default]
    Atom,
    Cell,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    id: String,
    mass: RawMass,
    #[serde(default, skip_serializing_if = "is_atom")]
    kind: RawKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lineage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    level: Option<u32>,
}

fn is_atom(k: &RawKind) -> bool {
    *k == RawKind::Atom
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    weight: Vec<RawValue>,
    map: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    atoms: Vec<RawAtom>,
    terms: Vec<RawTerm>,
    p: Exponent,
    q: Exponent,
    #[serde(default)]
    checks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default)]
    refinement_levels: u32,
}

fn parse_mass(raw: &RawMass, field: &str) -> Result<f64> {
    let bad = |msg: String| Error::validation(field, msg);
    let m = match raw {
        RawMass::Number(x) => *x,
        RawMass::Text(t) => {
            let t = t.trim();
            match t.split_once('/') {
                Some((n, d)) => {
                    let n: f64 = n.trim().parse().map_err(|_| bad(format!("bad numerator in `{t}`")))?;
                    let d: f64 = d.trim().parse().map_err(|_| bad(format!("bad denominator in `{t}`")))?;
                    n / d
                }
                None => t.parse().map_err(|_| bad(format!("bad mass `{t}`")))?,
            }
        }
    };
    if m.is_finite() && m > 0.0 {
        Ok(m)
    } else {
        Err(bad(format!("mass must be positive and finite, got {m}")))
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate(raw)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

fn validate(raw: RawScenario) -> Result<Scenario> {
    let mut atoms = Vec::with_capacity(raw.atoms.len());
    for (i, a) in raw.atoms.iter().enumerate() {
        let mass = parse_mass(&a.mass, &format!("atoms[{i}].mass"))?;
        let kind = match a.kind {
            RawKind::Atom => {
                if a.lineage.is_some() || a.level.is_some() {
                    return Err(Error::validation(
                        format!("atoms[{i}]"),
                        "`lineage`/`level` only apply to cells",
                    ));
                }
                AtomKind::Genuine
            }
            RawKind::Cell => AtomKind::Cell {
                level: a.level.unwrap_or(0),
                lineage: a.lineage.clone().unwrap_or_else(|| "B".to_owned()),
            },
        };
        atoms.push(Atom {
            id: a.id.clone(),
            mass,
            kind,
        });
    }
    let n = atoms.len();
    FiniteMeasureSpace::new(atoms.clone()).map_err(|e| Error::validation("atoms", e.to_string()))?;

    if raw.terms.is_empty() {
        return Err(Error::validation("terms", "at least one term is required"));
    }
    let mut terms = Vec::with_capacity(raw.terms.len());
    for (i, t) in raw.terms.iter().enumerate() {
        if t.weight.len() != n {
            return Err(Error::validation(
                format!("terms[{i}].weight"),
                format!("term {i} has {} weight values for {n} atoms", t.weight.len()),
            ));
        }
        if t.map.len() != n {
            return Err(Error::validation(
                format!("terms[{i}].map"),
                format!("term {i} has {} map entries for {n} atoms", t.map.len()),
            ));
        }
        if let Some(x) = t.map.iter().position(|&y| y >= n) {
            return Err(Error::validation(
                format!("terms[{i}].map[{x}]"),
                format!("target {} is out of range for {n} atoms", t.map[x]),
            ));
        }
        let weight: Vec<Complex64> = t.weight.iter().map(Complex64::from).collect();
        if let Some(x) = weight.iter().position(|z| !z.is_finite()) {
            return Err(Error::validation(format!("terms[{i}].weight[{x}]"), "value is not finite"));
        }
        terms.push(ScenarioTerm {
            weight,
            map: t.map.clone(),
        });
    }

    let mut checks = Vec::with_capacity(raw.checks.len());
    for (i, c) in raw.checks.iter().enumerate() {
        checks.push(
            c.parse::<CriterionId>()
                .map_err(|_| Error::validation(format!("checks[{i}]"), format!("unknown check `{c}`")))?,
        );
    }

    Ok(Scenario {
        name: raw.name,
        atoms,
        terms,
        p: raw.p,
        q: raw.q,
        checks,
        seed: raw.seed,
        refinement_levels: raw.refinement_levels,
    })
}

impl Scenario {
    pub fn space(&self) -> FiniteMeasureSpace {
        FiniteMeasureSpace::new(self.atoms.clone()).expect("validated at load")
    }

    pub fn operator(&self) -> WeightedSumOperator {
        let space = self.space();
        let terms = self
            .terms
            .iter()
            .map(|t| {
                Term::new(
                    space.function(t.weight.clone()).expect("validated at load"),
                    SelfMap::new(&space, t.map.clone()).expect("validated at load"),
                )
            })
            .collect();
        WeightedSumOperator::new(space, terms, self.p, self.q).expect("validated at load")
    }

    pub fn from_operator(w: &WeightedSumOperator) -> Scenario {
        Scenario {
            name: None,
            atoms: w.space().atoms().to_vec(),
            terms: w
                .terms()
                .iter()
                .map(|t| ScenarioTerm {
                    weight: t.weight.values().to_vec(),
                    map: t.map.targets().to_vec(),
                })
                .collect(),
            p: w.p(),
            q: w.q(),
            checks: Vec::new(),
            seed: None,
            refinement_levels: 0,
        }
    }

    /// The scenario with its space refined `levels` times; metadata is kept.
    pub fn refined(&self, levels: u32) -> Scenario {
        let mut w = self.operator();
        for _ in 0..levels {
            w = w.refine().0;
        }
        Scenario {
            name: self.name.clone(),
            checks: self.checks.clone(),
            seed: self.seed,
            refinement_levels: self.refinement_levels,
            ..Scenario::from_operator(&w)
        }
    }

    fn to_raw(&self) -> RawScenario {
        RawScenario {
            name: self.name.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| {
                    let (kind, lineage, level) = match &a.kind {
                        AtomKind::Genuine => (RawKind::Atom, None, None),
                        AtomKind::Cell { level, lineage } => (RawKind::Cell, Some(lineage.clone()), Some(*level)),
                    };
                    RawAtom {
                        id: a.id.clone(),
                        mass: RawMass::Number(a.mass),
                        kind,
                        lineage,
                        level,
                    }
                })
                .collect(),
            terms: self
                .terms
                .iter()
                .map(|t| RawTerm {
                    weight: t.weight.iter().map(|&z| z.into()).collect(),
                    map: t.map.clone(),
                })
                .collect(),
            p: self.p,
            q: self.q,
            checks: self.checks.iter().map(|c| c.as_str().to_owned()).collect(),
            seed: self.seed,
            refinement_levels: self.refinement_levels,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"atoms":[{"id":"x","mass":1}],"terms":[{"weight":[1],"map":[0]}],"p":2,"q":2}"#;

    #[test]
    fn minimal_loads() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.atoms.len(), 1);
        assert!(s.checks.is_empty());
        assert_eq!(s.operator().matrix()[(0, 0)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn weight_length_mismatch_names_the_term() {
        let text = r#"{"atoms":[{"id":"x","mass":1},{"id":"y","mass":1}],
            "terms":[{"weight":[1,1],"map":[0,1]},{"weight":[1],"map":[0,1]}],"p":2,"q":2}"#;
        match parse_scenario(text) {
            Err(Error::Validation { field, message }) => {
                assert_eq!(field, "terms[1].weight");
                assert!(message.contains("term 1"), "{message}");
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn infinite_source_exponent() {
        let text = MINIMAL.replace(r#""p":2"#, r#""p":"inf""#);
        let s = parse_scenario(&text).unwrap();
        assert!(s.p.is_infinite());
        assert_eq!(s.q, Exponent::Finite(2.0));
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_scenario("{\n  \"atoms\": [,]\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rational_masses_and_cells() {
        let text = r#"{"atoms":[{"id":"a","mass":"1/4"},{"id":"b","mass":"3/4","kind":"cell","lineage":"L"}],
            "terms":[{"weight":[[0,1],2],"map":[1,0]}],"p":1,"q":"inf","checks":["T2.6a","T2.1b"]}"#;
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.atoms[0].mass, 0.25);
        assert!(s.atoms[1].kind.is_cell());
        assert_eq!(s.terms[0].weight[0], Complex64::new(0.0, 1.0));
        assert_eq!(s.checks, vec![CriterionId::T2_6a, CriterionId::T2_1]);
    }

    #[test]
    fn bad_inputs() {
        let unknown_check = MINIMAL.replace(r#""q":2"#, r#""q":2,"checks":["T5.1"]"#);
        assert!(matches!(parse_scenario(&unknown_check), Err(Error::Validation { field, .. }) if field == "checks[0]"));
        let bad_map = MINIMAL.replace(r#""map":[0]"#, r#""map":[3]"#);
        assert!(matches!(parse_scenario(&bad_map), Err(Error::Validation { field, .. }) if field == "terms[0].map[0]"));
        let bad_mass = MINIMAL.replace(r#""mass":1"#, r#""mass":"1/0x""#);
        assert!(matches!(parse_scenario(&bad_mass), Err(Error::Validation { .. })));
        let bad_p = MINIMAL.replace(r#""p":2"#, r#""p":0.5"#);
        assert!(matches!(parse_scenario(&bad_p), Err(Error::Parse { .. })));
        let dup = r#"{"atoms":[{"id":"x","mass":1},{"id":"x","mass":1}],"terms":[{"weight":[1,1],"map":[0,1]}],"p":2,"q":2}"#;
        assert!(matches!(parse_scenario(dup), Err(Error::Validation { field, .. }) if field == "atoms"));
    }

    #[test]
    fn refine_keeps_metadata() {
        let text = r#"{"name":"c","atoms":[{"id":"b","mass":1,"kind":"cell"}],
            "terms":[{"weight":[1],"map":[0]}],"p":1,"q":2,"checks":["T2.4b"],"seed":4}"#;
        let s = parse_scenario(text).unwrap().refined(2);
        assert_eq!(s.atoms.len(), 4);
        assert_eq!(s.atoms[3].id, "b.1.1");
        assert_eq!(s.seed, Some(4));
        assert_eq!(parse_scenario(&s.to_json()).unwrap(), s);
    }
}
