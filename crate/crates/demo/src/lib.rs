//! Browser front end for `wco-core`. Every export takes and returns JSON text so
//! the page needs no bindings beyond strings and numbers. Errors come back as
//! `{"error": "..."}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;
use wco_core::criteria::{self, CriterionId};
use wco_core::harness::{self, selftest::identity_on_refined_cell, RandomConfig};
use wco_core::{Exponent, Tolerances};

/// Deepest refinement the scaling chart will compute.
pub const MAX_LEVELS: u32 = 8;

fn reply(r: wco_core::Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Runs the checks listed in the scenario and returns the report.
#[wasm_bindgen]
pub fn analyze(scenario: &str) -> String {
    reply(harness::parse_scenario(scenario).map(|s| {
        serde_json::from_str(&harness::run_checks(&s, &Tolerances::default()).to_json()).expect("report is JSON")
    }))
}

/// `|W|`, `Coz J` and the matrix of the partial isometry `V`.
#[wasm_bindgen]
pub fn polar(scenario: &str) -> String {
    reply(harness::parse_scenario(scenario).and_then(|s| harness::polar_summary(&s, &Tolerances::default())))
}

/// Period, power multiplier `v` and its distinct values.
#[wasm_bindgen]
pub fn spectrum(scenario: &str) -> String {
    reply(harness::parse_scenario(scenario).and_then(|s| harness::invert_summary(&s, &Tolerances::default())))
}

/// A random Hilbert-space scenario requesting T2.1, T2.8 and T2.10.
#[wasm_bindgen]
pub fn random_scenario(seed: u32, atoms: u32, terms: u32) -> String {
    let cfg = RandomConfig {
        atoms: (atoms as usize, atoms as usize),
        terms: (terms as usize, terms as usize),
        complex: false,
        checks: vec![CriterionId::T2_1, CriterionId::T2_8, CriterionId::T2_10],
        ..RandomConfig::default()
    };
    match harness::generate_random(seed as u64, &cfg) {
        Ok(s) => s.to_json(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Single-cell and minimal indicator ratios for `u ≡ 1`, `φ = id` on one cell,
/// refined `0..=levels` times.
#[wasm_bindgen]
pub fn witness_scaling(p: f64, q: f64, levels: u32) -> String {
    let run = || -> wco_core::Result<Value> {
        let (p, q) = (Exponent::new(p)?, Exponent::new(q)?);
        let (Some(pf), Some(qf)) = (p.finite(), q.finite()) else {
            return Err(wco_core::Error::Precondition("finite exponents only".into()));
        };
        let mut single = Vec::new();
        let mut minimal = Vec::new();
        for level in 0..=levels.min(MAX_LEVELS) {
            let w = identity_on_refined_cell(level, pf, qf);
            let region: Vec<usize> = (0..w.space().len()).collect();
            single.push(criteria::indicator_ratio(&w, &[0])?);
            let best = criteria::witness_search(&w, &region)?;
            minimal.push(json!({ "ratio": best.ratio, "cells": best.set.len(), "exhaustive": best.exhaustive }));
        }
        Ok(json!({ "p": pf, "q": qf, "single_cell": single, "minimal": minimal }))
    };
    reply(run())
}
