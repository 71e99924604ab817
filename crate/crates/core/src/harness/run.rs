//! Dispatch from requested checks to the criteria, with oracle residuals attached.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::generate::random_function;
use super::report::{CheckRecord, Real, Report, ResidualRecord, Status, WitnessPayload};
use super::scenario::Scenario;
use crate::criteria::{self, CriterionId, RangeVerdict, UPower, Witness};
use crate::{oracle, polar, spectral};
use crate::{Error, Exponent, Result, Tolerances, WeightedSumOperator};

pub const TOOL_NAME: &str = "wco";

const RAYLEIGH_SAMPLES: usize = 100;
const BAND_ALPHA: f64 = 1.0;

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Precondition(what.to_owned()))
    }
}

fn finite_pair(w: &WeightedSumOperator) -> Option<(f64, f64)> {
    Some((w.p().finite()?, w.q().finite()?))
}

fn require_p_eq_q_finite(w: &WeightedSumOperator) -> Result<f64> {
    match finite_pair(w) {
        Some((p, q)) if p == q => Ok(p),
        _ => Err(Error::Precondition(format!("needs p = q finite, got p = {}, q = {}", w.p(), w.q()))),
    }
}

fn require_q_lt_p(w: &WeightedSumOperator) -> Result<f64> {
    match finite_pair(w) {
        Some((p, q)) if q < p => Ok(q),
        _ => Err(Error::Precondition(format!("needs q < p, both finite, got p = {}, q = {}", w.p(), w.q()))),
    }
}

fn require_p_lt_q(w: &WeightedSumOperator) -> Result<f64> {
    match finite_pair(w) {
        Some((p, q)) if p < q => Ok(q),
        _ => Err(Error::Precondition(format!("needs p < q, both finite, got p = {}, q = {}", w.p(), w.q()))),
    }
}

fn require_p_inf_q_finite(w: &WeightedSumOperator) -> Result<f64> {
    match (w.p(), w.q()) {
        (Exponent::Infinity, Exponent::Finite(q)) => Ok(q),
        _ => Err(Error::Precondition(format!("needs p = inf and q finite, got p = {}, q = {}", w.p(), w.q()))),
    }
}

fn require_q_inf(w: &WeightedSumOperator, p_finite: bool) -> Result<()> {
    require(w.q().is_infinite(), "needs q = inf")?;
    require(w.p().is_infinite() != p_finite, if p_finite { "needs finite p" } else { "needs p = inf" })?;
    require(w.has_nonnegative_weights(), "weights must be real and nonnegative")
}

/// `J(B) = 0` together with the finite-support quantities over genuine atoms.
fn summability_and_support(w: &WeightedSumOperator, s: f64, levels: u32, tol: &Tolerances) -> Result<RangeVerdict> {
    let mut a = criteria::check_atomic_summability(w, s, levels, tol)?;
    let f = criteria::check_finite_support_over_atoms(w, levels, tol)?;
    a.quantities.extend(f.quantities);
    a.trends.extend(f.trends);
    Ok(a)
}

/// Sorted `σ²` of `matrix(W)` against sorted `J₂`, relative to `max J₂`.
pub(crate) fn singular_value_residual(w: &WeightedSumOperator, j: &[f64]) -> f64 {
    let mut sq: Vec<f64> = oracle::singular_values(&w.matrix()).iter().map(|s| s * s).collect();
    let mut jj = j.to_vec();
    sq.sort_by(f64::total_cmp);
    jj.sort_by(f64::total_cmp);
    let scale = jj.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    sq.iter().zip(&jj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

fn residual_margin(residuals: &[ResidualRecord]) -> f64 {
    residuals
        .iter()
        .map(|r| r.threshold.0 - r.value.0)
        .fold(f64::INFINITY, f64::min)
}

fn verdict(criterion: CriterionId, holds: bool, margin: f64) -> RangeVerdict {
    RangeVerdict {
        criterion,
        holds,
        margin,
        witness: None,
        notes: String::new(),
        quantities: BTreeMap::new(),
        trends: BTreeMap::new(),
    }
}

fn check_l2(w: &WeightedSumOperator, seed: u64, tol: &Tolerances) -> Result<(RangeVerdict, Vec<ResidualRecord>)> {
    let v = criteria::check_l2_bound(w, RAYLEIGH_SAMPLES, seed, tol)?;
    let ww = w.verify_wstar_w_equals_mj()?;
    let scale = ww.j.max().max(1.0);
    let mut residuals = vec![
        ResidualRecord::new("wstar_w_minus_mj", ww.residual / scale, tol.identity()),
        ResidualRecord::new("singular_values_vs_j", singular_value_residual(w, &ww.j.values), tol.oracle()),
    ];
    if let Some(&s) = v.quantities.get("rayleigh_shortfall") {
        residuals.push(ResidualRecord::new("rayleigh_shortfall", s, tol.identity()));
    }
    Ok((v, residuals))
}

fn check_polar(w: &WeightedSumOperator, tol: &Tolerances) -> Result<(RangeVerdict, Vec<ResidualRecord>)> {
    let parts = polar::polar_decomposition_with(w, tol)?;
    let pi = polar::verify_partial_isometry(&parts);
    let o = polar::oracle_polar_with(w, tol)?;
    let cc = polar::cross_check(w, &parts, &o);
    let b = parts.support.len() as f64;
    let scale = parts.abs_w.iter().copied().fold(1.0, f64::max);
    let residuals = vec![
        ResidualRecord::new("factorization", polar::factorization_residual(w, &parts) / scale, tol.identity()),
        ResidualRecord::new("vstar_v_projection", pi.projection, tol.identity()),
        ResidualRecord::new("vstar_v_idempotence", pi.idempotence, tol.identity()),
        ResidualRecord::new("v_isometric_on_support", pi.isometry, tol.identity()),
        ResidualRecord::new("trace_minus_support_size", (pi.trace - b).abs(), tol.identity()),
        ResidualRecord::new("rounded_trace_mismatch", (pi.trace.round() - b).abs(), 0.0),
        ResidualRecord::new("oracle_factorization", cc.oracle_factorization / scale, tol.oracle()),
        ResidualRecord::new("oracle_abs_vs_sqrt_j", cc.abs_agreement / scale, tol.oracle()),
        ResidualRecord::new("oracle_u_vs_v_on_support", cc.isometry_agreement, tol.oracle()),
    ];
    let mut v = verdict(CriterionId::T2_8, true, 0.0);
    v.holds = residuals.iter().all(|r| r.ok);
    v.margin = residual_margin(&residuals);
    v.quantities.insert("support_size".into(), b);
    v.quantities.insert("trace".into(), pi.trace);
    v.witness = Some(Witness::Atoms(parts.support.clone()));
    v.notes = "W = V|W| with |W| = M_sqrt(J) and V a partial isometry with initial space L2(Coz J).".into();
    Ok((v, residuals))
}

fn check_invert(w: &WeightedSumOperator, seed: u64, tol: &Tolerances) -> Result<(RangeVerdict, Vec<ResidualRecord>)> {
    let inv = spectral::periodic_invertibility_with(w, tol)?;
    let n = w.space().len();
    let full_rank = oracle::numerical_rank(&w.matrix(), tol.rank()) == n;
    let mut residuals = vec![
        ResidualRecord::new("power_minus_mv", inv.power_residual, tol.oracle()),
        ResidualRecord::new("verdict_vs_rank", if full_rank == inv.invertible { 0.0 } else { 1.0 }, 0.0),
    ];
    if inv.invertible {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_function(w.space(), &mut rng, true);
        let f = spectral::apply_inverse_with(w, &inv, &g)?;
        let back = w.apply(&f)?;
        let scale = g.max_abs().max(1.0);
        let rt = back.zip_with(&g, |a, b| a - b)?.max_abs() / scale;
        residuals.push(ResidualRecord::new("inverse_round_trip", rt, tol.roundtrip()));
        let x = oracle::to_coords(w.space(), &g)?;
        if let Some(sol) = oracle::solve(&w.matrix(), &x) {
            let ours = oracle::to_coords(w.space(), &f)?;
            let amax = |v: &oracle::CVector| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let diff = amax(&(&ours - &sol)) / amax(&sol).max(1.0);
            residuals.push(ResidualRecord::new("inverse_vs_solve", diff, tol.oracle()));
        }
    }
    let vmax = inv.v.max_abs();
    let vmin = inv.v.values().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let mut v = verdict(CriterionId::T2_9, inv.invertible, vmin - tol.cut(vmax));
    v.quantities.insert("period".into(), inv.period as f64);
    v.quantities.insert("min_abs_v".into(), vmin);
    v.quantities.insert("max_abs_v".into(), vmax);
    v.witness = Some(Witness::Function(inv.v.clone()));
    v.notes = if inv.invertible {
        "W^N = M_v with v bounded away from zero, so W is invertible.".into()
    } else {
        "v vanishes somewhere, so W is not invertible.".into()
    };
    Ok((v, residuals))
}

fn check_injective(w: &WeightedSumOperator, tol: &Tolerances) -> Result<(RangeVerdict, Vec<ResidualRecord>)> {
    let r = spectral::injectivity_check_with(w, tol)?;
    let residuals = vec![
        ResidualRecord::new("verdict_vs_nullity", if r.verdict.holds == (r.nullity == 0) { 0.0 } else { 1.0 }, 0.0),
        ResidualRecord::new("null_atoms_outside_kernel", if r.null_atoms_in_kernel { 0.0 } else { 1.0 }, 0.0),
    ];
    Ok((r.verdict, residuals))
}

fn dispatch(
    id: CriterionId,
    w: &WeightedSumOperator,
    s: &Scenario,
    tol: &Tolerances,
) -> Result<(RangeVerdict, Vec<ResidualRecord>)> {
    use CriterionId::*;
    let levels = s.refinement_levels;
    let seed = s.seed.unwrap_or(0);
    let plain = |v: Result<RangeVerdict>| v.map(|v| (v, Vec::new()));
    let out = match id {
        T2_1 => check_l2(w, seed, tol),
        T2_2a => {
            let p = require_p_eq_q_finite(w)?;
            plain(criteria::check_atomic_summability(w, p, levels, tol))
        }
        T2_2b => {
            require_p_eq_q_finite(w)?;
            plain(criteria::check_band_construction(w, BAND_ALPHA, levels, tol))
        }
        T2_2c => {
            require_p_eq_q_finite(w)?;
            plain(criteria::check_lower_bound_u(w, UPower::Source))
        }
        T2_3a => {
            require_q_lt_p(w)?;
            plain(criteria::check_finite_support_over_atoms(w, levels, tol))
        }
        T2_3b => {
            let q = require_q_lt_p(w)?;
            plain(summability_and_support(w, q, levels, tol))
        }
        T2_4a => {
            let q = require_p_lt_q(w)?;
            plain(criteria::check_atomic_summability(w, q, levels, tol))
        }
        T2_4b => {
            require_p_lt_q(w)?;
            plain(criteria::check_witness_construction(w, levels, tol))
        }
        T2_4c => {
            require_p_lt_q(w)?;
            plain(criteria::check_lower_bound_u(w, UPower::Source))
        }
        T2_5a => {
            let q = require_p_inf_q_finite(w)?;
            plain(criteria::check_atomic_summability(w, q, levels, tol))
        }
        T2_5b => {
            let q = require_p_inf_q_finite(w)?;
            plain(summability_and_support(w, q, levels, tol))
        }
        T2_6a => {
            require_q_inf(w, true)?;
            plain(criteria::check_purely_atomic_closed(w))
        }
        T2_6b => {
            require_q_inf(w, true)?;
            plain(criteria::check_lower_bound_u(w, UPower::Source))
        }
        T2_7a => {
            require_q_inf(w, false)?;
            plain(criteria::check_purely_atomic_closed(w))
        }
        T2_7b => {
            require_q_inf(w, false)?;
            plain(criteria::check_lower_bound_u(w, UPower::Linear))
        }
        T2_8 => check_polar(w, tol),
        T2_9 => check_invert(w, seed, tol),
        T2_10 => check_injective(w, tol),
    };
    out.map(|(v, r)| (v.tagged(id), r))
}

fn record(id: CriterionId, w: &WeightedSumOperator, s: &Scenario, tol: &Tolerances) -> CheckRecord {
    match dispatch(id, w, s, tol) {
        Ok((v, residuals)) => CheckRecord::from_verdict(w.space(), id, &v, residuals),
        Err(e) if e.is_hypothesis_failure() => CheckRecord::failed(id, Status::HypothesisFailed, e.to_string()),
        Err(e) => CheckRecord::failed(id, Status::Error, e.to_string()),
    }
}

fn empty_report(s: &Scenario) -> Report {
    Report {
        tool: TOOL_NAME.to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: s.seed,
        scenario: s.name.clone(),
        checks: Vec::new(),
        suites: Vec::new(),
        timing_ms: None,
    }
}

/// Runs every requested check in order. A failing check is recorded and never
/// stops its siblings.
pub fn run_checks(s: &Scenario, tol: &Tolerances) -> Report {
    let w = s.operator();
    let mut report = empty_report(s);
    report.checks = s.checks.iter().map(|&id| record(id, &w, s, tol)).collect();
    report
}

/// [`run_checks`] plus per-check wall-clock times.
pub fn run_checks_timed(s: &Scenario, tol: &Tolerances) -> Report {
    let w = s.operator();
    let mut report = empty_report(s);
    let mut timing = BTreeMap::new();
    for &id in &s.checks {
        let start = Instant::now();
        report.checks.push(record(id, &w, s, tol));
        timing.insert(id.as_str().to_owned(), Real(start.elapsed().as_secs_f64() * 1e3));
    }
    report.timing_ms = Some(timing);
    report
}

fn complex_json(z: crate::Complex64) -> Value {
    if z.im == 0.0 {
        json!(z.re)
    } else {
        json!([z.re, z.im])
    }
}

fn ids(s: &Scenario, atoms: &[usize]) -> Vec<String> {
    atoms.iter().map(|&a| s.atoms[a].id.clone()).collect()
}

/// `|W|`, `Coz J` and the matrix of `V` with the polar residuals.
pub fn polar_summary(s: &Scenario, tol: &Tolerances) -> Result<Value> {
    let w = s.operator();
    let parts = polar::polar_decomposition_with(&w, tol)?;
    let pi = polar::verify_partial_isometry(&parts);
    let v = parts.v_matrix();
    let rows: Vec<Vec<Value>> = (0..v.nrows())
        .map(|r| (0..v.ncols()).map(|c| complex_json(v[(r, c)])).collect())
        .collect();
    Ok(json!({
        "abs_w": parts.abs_w.iter().map(|&x| Real(x)).collect::<Vec<_>>(),
        "support": ids(s, &parts.support),
        "v_matrix": rows,
        "residuals": {
            "factorization": Real(polar::factorization_residual(&w, &parts)),
            "projection": Real(pi.projection),
            "idempotence": Real(pi.idempotence),
            "trace": Real(pi.trace),
        }
    }))
}

/// Period, `v`, the verdict and `Wᴺ = M_v` residual.
pub fn invert_summary(s: &Scenario, tol: &Tolerances) -> Result<Value> {
    let w = s.operator();
    let inv = spectral::periodic_invertibility_with(&w, tol)?;
    let table = spectral::spectral_measure(&inv.v);
    Ok(json!({
        "period": inv.period,
        "periods": inv.periods,
        "v": WitnessPayload::from_function(w.space(), &inv.v),
        "invertible": inv.invertible,
        "power_residual": Real(inv.power_residual),
        "distinct_values": table.distinct.iter().map(|(z, atoms)| json!({
            "value": complex_json(*z),
            "atoms": ids(s, atoms),
        })).collect::<Vec<_>>(),
    }))
}

/// Minimizing indicator over the atoms named in `region`.
pub fn witness_summary(s: &Scenario, region: &[String]) -> Result<Value> {
    let w = s.operator();
    let mut idx = Vec::with_capacity(region.len());
    for id in region {
        idx.push(
            w.space()
                .index_of(id)
                .ok_or_else(|| Error::validation("region", format!("unknown atom `{id}`")))?,
        );
    }
    let r = criteria::witness_search(&w, &idx)?;
    Ok(json!({
        "set": ids(s, &r.set),
        "ratio": Real(r.ratio),
        "bound": r.bound.map(Real),
        "within_bound": r.within_bound(),
        "exhaustive": r.exhaustive,
        "evaluated": r.evaluated,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::parse_scenario;

    const SWAP: &str = r#"{
        "atoms": [{"id": "x", "mass": 1}, {"id": "y", "mass": 1}],
        "terms": [{"weight": [2, 3], "map": [1, 0]}],
        "p": 2, "q": 2, "seed": 1,
        "checks": ["T2.1", "T2.8", "T2.9", "T2.10"]
    }"#;

    #[test]
    fn swap_report() {
        let s = parse_scenario(SWAP).unwrap();
        let r = run_checks(&s, &Tolerances::default());
        assert_eq!(r.checks.len(), 4);
        assert!(r.checks.iter().all(|c| c.status == Status::Ok), "{}", r.to_json());
        let l2 = &r.checks[0];
        assert_eq!(l2.theorem, "T2.1");
        assert_eq!(l2.margin, Some(Real(4.0)));
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn aperiodic_map_is_a_hypothesis_failure_for_that_check_only() {
        let text = SWAP.replace("[1, 0]", "[0, 0]");
        let s = parse_scenario(&text).unwrap();
        let r = run_checks(&s, &Tolerances::default());
        let statuses: Vec<Status> = r.checks.iter().map(|c| c.status).collect();
        assert_eq!(statuses, vec![Status::Ok, Status::Ok, Status::HypothesisFailed, Status::Ok]);
        assert_eq!(r.exit_code(), 2);
    }

    #[test]
    fn empty_check_list_gives_stamp_only() {
        let text = SWAP.replace(r#""T2.1", "T2.8", "T2.9", "T2.10""#, "");
        let s = parse_scenario(&text).unwrap();
        let r = run_checks(&s, &Tolerances::default());
        assert!(r.checks.is_empty());
        assert_eq!(r.seed, Some(1));
        assert_eq!(r.version, env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn wrong_exponents_are_recorded() {
        let text = SWAP.replace(r#""checks": ["T2.1", "T2.8", "T2.9", "T2.10"]"#, r#""checks": ["T2.3a", "T2.2c"]"#);
        let s = parse_scenario(&text).unwrap();
        let r = run_checks(&s, &Tolerances::default());
        assert_eq!(r.checks[0].status, Status::HypothesisFailed);
        assert_eq!(r.checks[1].status, Status::Ok);
        assert_eq!(r.checks[1].margin, Some(Real(4.0)));
    }

    #[test]
    fn witness_summary_names_atoms() {
        let s = parse_scenario(SWAP).unwrap();
        let v = witness_summary(&s, &["x".into(), "y".into()]).unwrap();
        assert_eq!(v["exhaustive"], json!(true));
        assert!(witness_summary(&s, &["z".into()]).is_err());
    }
}
