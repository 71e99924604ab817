//! Invariant suites run by `wco selftest`. Each suite sweeps seeded random
//! instances and compares the formulas against the matrix oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::generate::{generate_random, random_function, MapKind, RandomConfig};
use super::report::{Real, Report, SuiteRecord};
use super::run::{run_checks, singular_value_residual, TOOL_NAME};
use crate::criteria::{self, CriterionId};
use crate::measure_space::{conditional_expectation, lp_norm};
use crate::operator::CriterionFunction;
use crate::spectral::{self, Projector};
use crate::{oracle, polar};
use crate::{Atom, Complex64, Exponent, FiniteMeasureSpace, Partition, Result, SelfMap, Term, Tolerances, WeightedSumOperator};

/// Running tally for one suite.
struct Tally {
    name: &'static str,
    threshold: f64,
    cases: u64,
    failures: u64,
    max: f64,
    first_failure: Option<String>,
}

impl Tally {
    fn new(name: &'static str, threshold: f64) -> Self {
        Tally {
            name,
            threshold,
            cases: 0,
            failures: 0,
            max: 0.0,
            first_failure: None,
        }
    }

    /// Records one case; `value` is compared against the suite threshold.
    fn residual(&mut self, case: impl FnOnce() -> String, value: f64) {
        self.residual_at(case, value, self.threshold);
    }

    /// As [`Tally::residual`] with a case-specific threshold; the reported max is
    /// the value scaled to the suite threshold.
    fn residual_at(&mut self, case: impl FnOnce() -> String, value: f64, threshold: f64) {
        self.cases += 1;
        let scaled = value * self.threshold / threshold;
        if !scaled.is_nan() {
            self.max = self.max.max(scaled);
        }
        if value.is_nan() || value > threshold {
            self.fail(case());
        }
    }

    /// Records a case that must hold exactly.
    fn exact(&mut self, case: impl FnOnce() -> String, ok: bool) {
        self.cases += 1;
        if !ok {
            self.fail(case());
        }
    }

    fn fail(&mut self, case: String) {
        self.failures += 1;
        self.first_failure.get_or_insert(case);
    }

    fn error(&mut self, case: String, e: crate::Error) {
        self.cases += 1;
        self.fail(format!("{case}: {e}"));
    }

    fn finish(self) -> SuiteRecord {
        SuiteRecord {
            name: self.name.to_owned(),
            passed: self.failures == 0,
            cases: self.cases,
            failures: self.failures,
            max_residual: Real(self.max),
            threshold: Real(self.threshold),
            message: self.first_failure.map(|c| format!("first failure: {c}")),
        }
    }
}

/// The Hilbert-space sweep: 2 to 32 atoms, 1 to 4 terms, disjoint supports.
pub fn hilbert_config() -> RandomConfig {
    RandomConfig::default()
}

fn operator(seed: u64, cfg: &RandomConfig) -> WeightedSumOperator {
    generate_random(seed, cfg).expect("valid config").operator()
}

/// Max-entry `‖W*W − M_J‖` with `J` supplied by `j_of`, so a broken `J` can be
/// fed in to check that the suite notices.
pub fn wstar_w_suite_with(
    seeds: u64,
    tol: &Tolerances,
    j_of: &dyn Fn(&WeightedSumOperator) -> Result<CriterionFunction>,
) -> SuiteRecord {
    let cfg = hilbert_config();
    let mut t = Tally::new("wstar_w_equals_mj", tol.identity());
    for seed in 0..seeds {
        let w = operator(seed, &cfg);
        match j_of(&w).and_then(|j| w.verify_wstar_w_against(j)) {
            Ok(c) => t.residual(|| format!("seed {seed}"), c.residual),
            Err(e) => t.error(format!("seed {seed}"), e),
        }
    }
    t.finish()
}

pub fn wstar_w_suite(seeds: u64, tol: &Tolerances) -> SuiteRecord {
    wstar_w_suite_with(seeds, tol, &|w| w.compute_j(2.0))
}

/// Sorted `σ²` of `matrix(W)` against sorted `J₂`, relative to `max J₂`.
pub fn singular_value_suite(seeds: u64, tol: &Tolerances) -> SuiteRecord {
    let cfg = hilbert_config();
    let mut t = Tally::new("singular_values_match_j", tol.oracle());
    for seed in 0..seeds {
        let w = operator(seed, &cfg);
        match w.compute_j(2.0) {
            Ok(j) => t.residual(|| format!("seed {seed}"), singular_value_residual(&w, &j.values)),
            Err(e) => t.error(format!("seed {seed}"), e),
        }
    }
    t.finish()
}

/// Polar residuals at the identity threshold and the exact trace.
pub fn polar_suite(seeds: u64, tol: &Tolerances) -> SuiteRecord {
    let cfg = hilbert_config();
    let mut t = Tally::new("polar_decomposition", tol.identity());
    for seed in 0..seeds {
        let w = operator(seed, &cfg);
        let parts = match polar::polar_decomposition_with(&w, tol) {
            Ok(p) => p,
            Err(e) => {
                t.error(format!("seed {seed}"), e);
                continue;
            }
        };
        let pi = polar::verify_partial_isometry(&parts);
        t.residual(|| format!("seed {seed}: factorization"), polar::factorization_residual(&w, &parts));
        t.residual(|| format!("seed {seed}: projection"), pi.max());
        t.exact(
            || format!("seed {seed}: trace {} vs |B| = {}", pi.trace, parts.support.len()),
            pi.trace.round() == parts.support.len() as f64,
        );
    }
    t.finish()
}

/// Oracle polar factor `P` against `M_√J` and `U P_B` against `V`.
pub fn polar_oracle_suite(seeds: u64, tol: &Tolerances) -> SuiteRecord {
    let cfg = hilbert_config();
    let mut t = Tally::new("polar_oracle_agreement", tol.oracle());
    for seed in 0..seeds {
        let w = operator(seed, &cfg);
        let res = polar::polar_decomposition_with(&w, tol)
            .and_then(|parts| Ok((polar::oracle_polar_with(&w, tol)?, parts)));
        match res {
            Ok((o, parts)) => {
                let cc = polar::cross_check(&w, &parts, &o);
                t.residual(|| format!("seed {seed}: |W|"), cc.abs_agreement);
                t.residual(|| format!("seed {seed}: U vs V"), cc.isometry_agreement);
                t.residual(|| format!("seed {seed}: W = UP"), cc.oracle_factorization);
            }
            Err(e) => t.error(format!("seed {seed}"), e),
        }
    }
    t.finish()
}

/// Permutation maps that keep each weight's support invariant, some planted zeros.
pub fn invertibility_config() -> RandomConfig {
    RandomConfig {
        maps: MapKind::InvariantPermutation,
        zero_probability: 0.05,
        ..RandomConfig::default()
    }
}

/// `Wᴺ = M_v`, verdict versus full rank, and the inverse round trip.
pub fn invertibility_suite(seeds: u64, tol: &Tolerances) -> SuiteRecord {
    let cfg = invertibility_config();
    let mut t = Tally::new("periodic_invertibility", tol.oracle());
    for seed in 0..seeds {
        let w = operator(seed, &cfg);
        let inv = match spectral::periodic_invertibility_with(&w, tol) {
            Ok(i) => i,
            Err(e) => {
                t.error(format!("seed {seed}"), e);
                continue;
            }
        };
        t.residual(|| format!("seed {seed}: W^N - M_v"), inv.power_residual);
        let full_rank = oracle::numerical_rank(&w.matrix(), tol.rank()) == w.space().len();
        t.exact(
            || format!("seed {seed}: verdict {} vs full rank {full_rank}", inv.invertible),
            full_rank == inv.invertible,
        );
        if inv.invertible {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_function(w.space(), &mut rng, true);
            let rt = spectral::apply_inverse_with(&w, &inv, &g)
                .and_then(|f| w.apply(&f))
                .and_then(|back| back.zip_with(&g, |a, b| a - b));
            match rt {
                Ok(d) => t.residual_at(
                    || format!("seed {seed}: round trip"),
                    d.max_abs() / g.max_abs().max(1.0),
                    tol.roundtrip(),
                ),
                Err(e) => t.error(format!("seed {seed}"), e),
            }
        }
    }
    t.finish()
}

/// Random `v` taking at most 10 distinct values (palette), on up to 32 atoms.
pub fn palette_function(space: &FiniteMeasureSpace, rng: &mut impl Rng) -> crate::PFunction {
    let k = rng.random_range(1..=10);
    let palette: Vec<Complex64> = (0..k)
        .map(|_| Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
        .collect();
    space
        .function((0..space.len()).map(|_| palette[rng.random_range(0..k)]).collect())
        .expect("finite values")
}

/// Exact projector arithmetic: `E(ℂ) = I`, `E(B₁∩B₂) = E(B₁)E(B₂)`,
/// `E(B₁⊔B₂) = E(B₁) + E(B₂)` and `Σ λE({λ}) = v`.
pub fn spectral_axiom_suite(seeds: u64) -> SuiteRecord {
    let mut t = Tally::new("spectral_measure_axioms", 0.0);
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=32);
        let masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let space = FiniteMeasureSpace::from_masses(&masses).expect("positive masses");
        let v = palette_function(&space, &mut rng);
        let e = spectral::spectral_measure(&v);
        let values: Vec<Complex64> = e.distinct.iter().map(|d| d.0).collect();
        let pick = |rng: &mut ChaCha8Rng| -> Vec<bool> { values.iter().map(|_| rng.random_bool(0.5)).collect() };
        let member = |set: &[bool], z: Complex64| values.iter().zip(set).any(|(l, &s)| s && *l == z);
        let (s1, s2) = (pick(&mut rng), pick(&mut rng));
        let e1 = e.projector(|z| member(&s1, z));
        let e2 = e.projector(|z| member(&s2, z));
        let both: Vec<bool> = s1.iter().zip(&s2).map(|(a, b)| *a && *b).collect();
        let only1: Vec<bool> = s1.iter().zip(&s2).map(|(a, b)| *a && !*b).collect();
        let e_only1 = e.projector(|z| member(&only1, z));
        let union = e.projector(|z| member(&only1, z) || member(&s2, z));
        t.exact(|| format!("seed {seed}: E(C) = I"), e.projector(|_| true) == Projector::identity(n));
        t.exact(|| format!("seed {seed}: E(empty) = 0"), e.projector(|_| false).is_zero());
        t.exact(
            || format!("seed {seed}: multiplicative"),
            e.projector(|z| member(&both, z)) == e1.compose(&e2),
        );
        t.exact(
            || format!("seed {seed}: additive"),
            e_only1.checked_sum(&e2).as_ref() == Some(&union),
        );
        t.exact(|| format!("seed {seed}: sum of lambda E(lambda)"), e.reconstruct() == v.values());
    }
    t.finish()
}

/// Verdict `min J > cut` against the nullity oracle: permutation maps on even
/// seeds, arbitrary maps with planted zeros on odd seeds.
pub fn injectivity_suite(seeds: u64, tol: &Tolerances) -> SuiteRecord {
    let mut t = Tally::new("injectivity_vs_nullity", 0.0);
    for seed in 0..seeds {
        let cfg = RandomConfig {
            maps: if seed % 2 == 0 { MapKind::Permutation } else { MapKind::Arbitrary },
            zero_probability: if seed % 2 == 0 { 0.0 } else { 0.2 },
            ..hilbert_config()
        };
        let w = operator(seed, &cfg);
        match spectral::injectivity_check_with(&w, tol) {
            Ok(r) => t.exact(
                || format!("seed {seed}: verdict {} vs nullity {}", r.verdict.holds, r.nullity),
                r.agrees_with_oracle(),
            ),
            Err(e) => t.error(format!("seed {seed}"), e),
        }
    }
    t.finish()
}

/// `n^{q−1}∫J_q|f|^q − ‖Wf‖_q^q ≥ −threshold` for `q ∈ {1, 2, 3}` and arbitrary maps.
pub fn norm_inequality_suite(pairs: u64, threshold: f64) -> SuiteRecord {
    let mut t = Tally::new("norm_inequality", threshold);
    for q in [1.0, 2.0, 3.0] {
        let cfg = RandomConfig {
            disjoint: false,
            p: Exponent::Finite(q),
            q: Exponent::Finite(q),
            ..RandomConfig::default()
        };
        for seed in 0..pairs {
            let w = operator(seed, &cfg);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
            let f = random_function(w.space(), &mut rng, true);
            match w.norm_inequality_residual(&f) {
                Ok(r) => t.residual(|| format!("q = {q}, seed {seed}: {r:e}"), -r),
                Err(e) => t.error(format!("q = {q}, seed {seed}"), e),
            }
        }
    }
    t.finish()
}

/// `u ≡ 1`, `φ = id` on one mass-1 cell refined `level` times.
pub fn identity_on_refined_cell(level: u32, p: f64, q: f64) -> WeightedSumOperator {
    let mut space = FiniteMeasureSpace::new(vec![Atom::cell("b", 1.0, "B")]).expect("one cell");
    for _ in 0..level {
        space = space.refine().space;
    }
    let one = space.constant(Complex64::new(1.0, 0.0));
    let term = Term::new(one, SelfMap::identity(&space));
    WeightedSumOperator::new(space, vec![term], Exponent::Finite(p), Exponent::Finite(q)).expect("one term")
}

/// Single-cell ratio `μ^{1/q−1/p}` across levels 0 to 5.
pub fn witness_scaling_suite(threshold: f64) -> SuiteRecord {
    let mut t = Tally::new("witness_scaling_law", threshold);
    for (p, q) in [(1.0, 2.0), (2.0, 1.0), (2.0, 3.0)] {
        for level in 0..=5u32 {
            let w = identity_on_refined_cell(level, p, q);
            let mass = 0.5f64.powi(level as i32);
            let expected = mass.powf(1.0 / q - 1.0 / p);
            match criteria::indicator_ratio(&w, &[0]) {
                Ok(r) => t.residual(|| format!("(p, q) = ({p}, {q}), level {level}"), (r - expected).abs() / expected),
                Err(e) => t.error(format!("(p, q) = ({p}, {q}), level {level}"), e),
            }
        }
    }
    t.finish()
}

/// Minimum of `‖Wχ_E‖_q / ‖χ_E‖_p` over nonempty `E ⊆ region`, enumerated through
/// [`WeightedSumOperator::apply`] and [`lp_norm`] only.
pub fn brute_force_witness(w: &WeightedSumOperator, region: &[usize]) -> (f64, Vec<usize>) {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 1u64..(1 << region.len()) {
        let set: Vec<usize> = (0..region.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| region[i])
            .collect();
        let f = w.space().indicator(&set);
        let wf = w.apply(&f).expect("same space");
        let r = lp_norm(w.space(), &wf, w.q()).expect("same space") / lp_norm(w.space(), &f, w.p()).expect("same space");
        let replace = match &best {
            None => true,
            Some((br, bs)) => r < *br || (r == *br && set < *bs),
        };
        if replace {
            best = Some((r, set));
        }
    }
    best.expect("nonempty region")
}

/// Exhaustive [`criteria::witness_search`] against [`brute_force_witness`] on
/// regions of at most 12 atoms.
pub fn witness_enumeration_suite(seeds: u64, threshold: f64) -> SuiteRecord {
    let mut t = Tally::new("witness_search_vs_enumeration", threshold);
    let pairs = [(1.0, 2.0), (2.0, 1.0), (2.0, 3.0), (2.0, 2.0)];
    for seed in 0..seeds {
        let (p, q) = pairs[(seed % pairs.len() as u64) as usize];
        let cfg = RandomConfig {
            atoms: (1, 12),
            disjoint: seed % 2 == 0,
            zero_probability: 0.1,
            p: Exponent::Finite(p),
            q: Exponent::Finite(q),
            ..RandomConfig::default()
        };
        let w = operator(seed, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut region: Vec<usize> = (0..w.space().len()).filter(|_| rng.random_bool(0.7)).collect();
        if region.is_empty() {
            region.push(0);
        }
        let (brute_ratio, brute_set) = brute_force_witness(&w, &region);
        match criteria::witness_search(&w, &region) {
            Ok(r) => {
                let scale = brute_ratio.max(f64::MIN_POSITIVE);
                t.residual(|| format!("seed {seed}: ratio"), (r.ratio - brute_ratio).abs() / scale.max(1.0));
                // a different set is acceptable only as a floating-point tie
                if r.set != brute_set {
                    let f = w.space().indicator(&r.set);
                    let ours = lp_norm(w.space(), &w.apply(&f).expect("same space"), w.q()).expect("same space")
                        / lp_norm(w.space(), &f, w.p()).expect("same space");
                    t.residual(|| format!("seed {seed}: tie"), (ours - brute_ratio).abs() / scale.max(1.0));
                }
                t.exact(|| format!("seed {seed}: exhaustive"), r.exhaustive);
            }
            Err(e) => t.error(format!("seed {seed}"), e),
        }
    }
    t.finish()
}

fn random_partition(space: &FiniteMeasureSpace, rng: &mut impl Rng) -> Partition {
    let n = space.len();
    let k = rng.random_range(1..=n);
    let mut blocks = vec![Vec::new(); k];
    for a in 0..n {
        blocks[rng.random_range(0..k)].push(a);
    }
    blocks.retain(|b| !b.is_empty());
    Partition::new(space, blocks).expect("blocks cover the space")
}

/// Idempotence (exact), block integrals and `L^p` contraction for `p ∈ {1, 2, ∞}`.
pub fn conditional_expectation_suite(pairs: u64, threshold: f64) -> SuiteRecord {
    let mut t = Tally::new("conditional_expectation", threshold);
    for seed in 0..pairs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=32);
        let masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let space = FiniteMeasureSpace::from_masses(&masses).expect("positive masses");
        let f = random_function(&space, &mut rng, true);
        let part = random_partition(&space, &mut rng);
        let ef = conditional_expectation(&space, &f, &part).expect("same space");
        let eef = conditional_expectation(&space, &ef, &part).expect("same space");
        t.exact(|| format!("seed {seed}: idempotence"), eef == ef);
        for block in part.blocks() {
            let integral = |g: &crate::PFunction| -> (Complex64, f64) {
                block.iter().fold((Complex64::new(0.0, 0.0), 0.0), |(s, m), &a| {
                    (s + g.get(a) * space.mass(a), m + g.get(a).norm() * space.mass(a))
                })
            };
            let (a, scale) = integral(&f);
            let (b, _) = integral(&ef);
            t.residual(|| format!("seed {seed}: block integral"), (a - b).norm() / scale.max(1.0));
        }
        for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity] {
            let nf = lp_norm(&space, &f, p).expect("same space");
            let nef = lp_norm(&space, &ef, p).expect("same space");
            t.residual(|| format!("seed {seed}: contraction in L^{p}"), ((nef - nf) / nf.max(1.0)).max(0.0));
        }
    }
    t.finish()
}

/// Closed-form `J_s` against the chained `h · E(|u|^s) ∘ φ⁻¹` evaluation.
pub fn chained_j_suite(seeds: u64, tol: &Tolerances) -> SuiteRecord {
    let mut t = Tally::new("closed_form_vs_chained_j", tol.identity());
    let cfg = RandomConfig {
        disjoint: false,
        ..RandomConfig::default()
    };
    for seed in 0..seeds {
        let w = operator(seed, &cfg);
        for s in [1.0, 2.0, 3.0] {
            match w.compute_j(s).and_then(|a| Ok((a, w.compute_j_chained(s)?))) {
                Ok((a, b)) => {
                    let scale = a.max().max(1.0);
                    let d = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    t.residual(|| format!("seed {seed}, s = {s}"), d / scale);
                }
                Err(e) => t.error(format!("seed {seed}, s = {s}"), e),
            }
        }
    }
    t.finish()
}

/// Two runs of the same scenario produce identical report bytes.
pub fn determinism_suite(seeds: u64, tol: &Tolerances) -> SuiteRecord {
    let mut t = Tally::new("report_determinism", 0.0);
    let cfg = RandomConfig {
        atoms: (2, 16),
        checks: vec![CriterionId::T2_1, CriterionId::T2_8, CriterionId::T2_10],
        ..RandomConfig::default()
    };
    for seed in 0..seeds {
        let s = generate_random(seed, &cfg).expect("valid config");
        let a = run_checks(&s, tol).to_json();
        let b = run_checks(&s, tol).to_json();
        t.exact(|| format!("seed {seed}"), a == b);
    }
    t.finish()
}

/// Every suite at its documented size.
pub fn selftest(tol: &Tolerances) -> Report {
    let suites = vec![
        wstar_w_suite(500, tol),
        singular_value_suite(500, tol),
        polar_suite(200, tol),
        polar_oracle_suite(200, tol),
        invertibility_suite(200, tol),
        spectral_axiom_suite(200),
        injectivity_suite(500, tol),
        norm_inequality_suite(1000, tol.identity()),
        witness_scaling_suite(tol.identity()),
        witness_enumeration_suite(50, tol.identity()),
        conditional_expectation_suite(500, tol.relative),
        chained_j_suite(200, tol),
        determinism_suite(20, tol),
    ];
    Report {
        tool: TOOL_NAME.to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: None,
        scenario: Some("selftest".into()),
        checks: Vec::new(),
        suites,
        timing_ms: None,
    }
}
