//! Acceptance suite: each criterion runs at its stated size and tolerance and
//! prints one PASS/FAIL line. Oracles here are dense matrices (SVD, eigen,
//! powers, LU) and direct subset enumeration, not the library's formulas.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wco_core::criteria::{self, CriterionId};
use wco_core::harness::{self, generate_random, random_function, MapKind, RandomConfig};
use wco_core::measure_space::{conditional_expectation, lp_norm};
use wco_core::oracle::{self, CMatrix};
use wco_core::spectral::{self, Projector};
use wco_core::{polar, Atom, Complex64, Exponent, FiniteMeasureSpace, Partition, SelfMap, Term, Tolerances};
use wco_core::WeightedSumOperator;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn hilbert(seed: u64) -> WeightedSumOperator {
    let cfg = RandomConfig {
        atoms: (2, 32),
        terms: (1, 4),
        disjoint: true,
        ..RandomConfig::default()
    };
    generate_random(seed, &cfg).unwrap().operator()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn gram(m: &CMatrix) -> CMatrix {
    m.adjoint() * m
}

fn wstar_w_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..500 {
        let w = hilbert(seed);
        ensure(w.disjoint_supports(), || format!("seed {seed}: supports overlap"))?;
        let j = w.compute_j(2.0).unwrap();
        let r = max_entry(&(gram(&w.matrix()) - oracle::diag_real(&j.values)));
        ensure(r <= 1e-10, || format!("seed {seed}: residual {r:e}"))?;
        worst = worst.max(r);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("500 instances, max residual {worst:e}, {secs:.2} s"))
}

fn singular_value_law() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..500 {
        let w = hilbert(seed);
        let mut j = w.compute_j(2.0).unwrap().values;
        let mut sq: Vec<f64> = oracle::singular_values(&w.matrix()).iter().map(|s| s * s).collect();
        j.sort_by(f64::total_cmp);
        sq.sort_by(f64::total_cmp);
        let scale = j.last().copied().unwrap();
        let rel = j.iter().zip(&sq).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        ensure(rel <= 1e-8, || format!("seed {seed}: relative error {rel:e}"))?;
        worst = worst.max(rel);

        // c* is the smallest nonzero squared singular value
        let v = criteria::check_l2_bound(&w, 10, seed, &Tolerances::default()).unwrap();
        let smin = sq.iter().copied().filter(|&x| x > 1e-12 * scale).fold(f64::INFINITY, f64::min);
        let rel = (v.margin - smin).abs() / scale;
        ensure(rel <= 1e-8, || format!("seed {seed}: c* {} vs sigma^2 {smin}", v.margin))?;
    }
    Ok(format!("500 instances, max relative error {worst:e}"))
}

fn polar_decomposition() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..200 {
        let w = hilbert(seed);
        let parts = polar::polar_decomposition(&w).unwrap();
        let v = parts.v_matrix();
        let abs = oracle::diag_real(&parts.abs_w);
        let fact = max_entry(&(w.matrix() - &v * &abs));
        ensure(fact <= 1e-10, || format!("seed {seed}: ||W - V M_sqrtJ|| = {fact:e}"))?;

        let vv = gram(&v);
        let proj = max_entry(&(&vv * &vv - &vv)).max(max_entry(&(vv.adjoint() - &vv)));
        ensure(proj <= 1e-10, || format!("seed {seed}: V*V not a projection ({proj:e})"))?;
        let b = parts.support.len();
        let on_b: Vec<f64> = (0..w.space().len())
            .map(|a| if parts.support.contains(&a) { 1.0 } else { 0.0 })
            .collect();
        let range = max_entry(&(&vv - oracle::diag_real(&on_b)));
        ensure(range <= 1e-10, || format!("seed {seed}: V*V != P_B ({range:e})"))?;
        let trace = vv.trace().re;
        ensure(trace.round() as usize == b && (trace - b as f64).abs() <= 1e-10, || {
            format!("seed {seed}: trace {trace} vs |Coz J| = {b}")
        })?;

        // oracle factor: Hermitian square root of W*W from its eigendecomposition
        let m = w.matrix();
        let eig = gram(&m).symmetric_eigen();
        let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let p = &eig.eigenvectors * oracle::diag_real(root.as_slice()) * eig.eigenvectors.adjoint();
        let agree = max_entry(&(&p - &abs));
        ensure(agree <= 1e-8, || format!("seed {seed}: oracle P vs M_sqrtJ {agree:e}"))?;
        worst = (worst.0.max(fact), worst.1.max(agree));
    }
    Ok(format!(
        "200 instances, max factorization residual {:e}, max oracle disagreement {:e}",
        worst.0, worst.1
    ))
}

fn invertibility() -> Outcome {
    let cfg = RandomConfig {
        maps: MapKind::InvariantPermutation,
        zero_probability: 0.05,
        ..RandomConfig::default()
    };
    let (mut yes, mut no) = (0, 0);
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..200 {
        let w = generate_random(seed, &cfg).unwrap().operator();
        ensure(w.terms().iter().all(|t| t.map.is_permutation()), || format!("seed {seed}: not a permutation"))?;
        let inv = spectral::periodic_invertibility(&w).map_err(|e| format!("seed {seed}: {e}"))?;
        let power = oracle::power(&w.matrix(), inv.period);
        let scale = inv.v.max_abs().max(1.0);
        let r = max_entry(&(power - oracle::diag(inv.v.values()))) / scale;
        ensure(r <= 1e-8, || format!("seed {seed}: W^N - M_v = {r:e}"))?;

        let s = oracle::singular_values(&w.matrix());
        let full_rank = s.last().copied().unwrap() > 1e-9 * s[0];
        ensure(full_rank == inv.invertible, || {
            format!("seed {seed}: verdict {} but full rank {full_rank}", inv.invertible)
        })?;
        if inv.invertible {
            yes += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_function(w.space(), &mut rng, true);
            let f = spectral::apply_inverse(&w, &g).unwrap();
            let back = w.apply(&f).unwrap();
            let rt = back.values().iter().zip(g.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            ensure(rt <= 1e-9, || format!("seed {seed}: round trip {rt:e}"))?;
            worst = (worst.0.max(r), worst.1.max(rt));
        } else {
            no += 1;
        }
    }
    ensure(yes > 0 && no > 0, || format!("sweep not mixed: {yes} invertible, {no} not"))?;
    Ok(format!(
        "200 instances ({yes} invertible, {no} not), max W^N residual {:e}, max round trip {:e}",
        worst.0, worst.1
    ))
}

fn spectral_axioms() -> Outcome {
    let mut max_distinct = 0;
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=32);
        let masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let space = FiniteMeasureSpace::from_masses(&masses).unwrap();
        let k = rng.random_range(1..=10);
        let palette: Vec<Complex64> = (0..k)
            .map(|_| Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
            .collect();
        let v = space
            .function((0..n).map(|_| palette[rng.random_range(0..k)]).collect())
            .unwrap();
        let e = spectral::spectral_measure(&v);
        max_distinct = max_distinct.max(e.distinct.len());
        ensure(e.distinct.len() <= 10, || format!("seed {seed}: too many values"))?;

        let mask: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
        let mask2: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
        let inside = |m: &[bool], z: Complex64| palette.iter().zip(m).any(|(l, &b)| b && *l == z);
        let e1 = e.projector(|z| inside(&mask, z));
        let e2 = e.projector(|z| inside(&mask2, z));
        ensure(e.projector(|_| true) == Projector::identity(n), || format!("seed {seed}: E(C) != I"))?;
        ensure(e.projector(|z| inside(&mask, z) && inside(&mask2, z)) == e1.compose(&e2), || {
            format!("seed {seed}: not multiplicative")
        })?;
        let left = e.projector(|z| inside(&mask, z) && !inside(&mask2, z));
        let union = e.projector(|z| inside(&mask, z) || inside(&mask2, z));
        ensure(left.checked_sum(&e2) == Some(union), || format!("seed {seed}: not additive"))?;

        // Σ λ E({λ}) as matrices, compared bit for bit with M_v
        let mut sum = CMatrix::zeros(n, n);
        for (lambda, _) in &e.distinct {
            sum += oracle::diag_real(&e.atom_projector(*lambda).as_real()) * *lambda;
        }
        ensure(sum == oracle::diag(v.values()), || format!("seed {seed}: sum of lambda E != M_v"))?;
    }
    Ok(format!("200 functions with up to {max_distinct} distinct values, all identities exact"))
}

fn injectivity() -> Outcome {
    let tol = Tolerances::default();
    let (mut injective, mut not) = (0, 0);
    for seed in 0..500 {
        // even seeds: permutations, nothing planted; odd seeds: arbitrary maps with zeros
        let cfg = RandomConfig {
            maps: if seed % 2 == 0 { MapKind::Permutation } else { MapKind::Arbitrary },
            zero_probability: if seed % 2 == 0 { 0.0 } else { 0.2 },
            ..RandomConfig::default()
        };
        let w = generate_random(seed, &cfg).unwrap().operator();
        let r = spectral::injectivity_check_with(&w, &tol).unwrap();
        let s = oracle::singular_values(&w.matrix());
        let nullity = s.iter().filter(|&&x| x <= 1e-9 * s[0] || x == 0.0).count();
        ensure(r.verdict.holds == (nullity == 0), || {
            format!("seed {seed}: verdict {} but nullity {nullity}", r.verdict.holds)
        })?;
        ensure(r.null_atoms_in_kernel, || format!("seed {seed}: null atom outside ker W"))?;
        if r.verdict.holds {
            injective += 1;
        } else {
            not += 1;
        }
    }
    ensure(injective > 0 && not > 0, || format!("sweep not mixed: {injective}/{not}"))?;
    Ok(format!("500 instances ({injective} injective, {not} not), 100% agreement"))
}

fn norm_inequality() -> Outcome {
    let mut low = f64::INFINITY;
    for q in [1.0, 2.0, 3.0] {
        let cfg = RandomConfig {
            disjoint: false,
            p: Exponent::Finite(q),
            q: Exponent::Finite(q),
            ..RandomConfig::default()
        };
        for seed in 0..1000 {
            let w = generate_random(seed, &cfg).unwrap().operator();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31) + 7);
            let f = random_function(w.space(), &mut rng, true);
            // both sides evaluated here from J and W f
            let j = w.compute_j(q).unwrap();
            let wf = w.apply(&f).unwrap();
            let m = w.space().masses();
            let n = w.terms().len() as f64;
            let lhs: f64 = (0..m.len()).map(|a| m[a] * j.values[a] * f.get(a).norm().powf(q)).sum();
            let rhs: f64 = (0..m.len()).map(|a| m[a] * wf.get(a).norm().powf(q)).sum();
            let gap = n.powf(q - 1.0) * lhs - rhs;
            ensure(gap >= -1e-10, || format!("q = {q}, seed {seed}: gap {gap:e}"))?;
            low = low.min(gap);
        }
    }
    Ok(format!("3000 pairs, smallest gap {low:e}"))
}

fn refined_identity(level: u32, p: f64, q: f64) -> WeightedSumOperator {
    let mut space = FiniteMeasureSpace::new(vec![Atom::cell("b", 1.0, "B")]).unwrap();
    for _ in 0..level {
        space = space.refine().space;
    }
    let one = space.constant(Complex64::new(1.0, 0.0));
    WeightedSumOperator::new(
        space.clone(),
        vec![Term::new(one, SelfMap::identity(&space))],
        Exponent::Finite(p),
        Exponent::Finite(q),
    )
    .unwrap()
}

fn ratio(w: &WeightedSumOperator, set: &[usize]) -> f64 {
    let f = w.space().indicator(set);
    lp_norm(w.space(), &w.apply(&f).unwrap(), w.q()).unwrap() / lp_norm(w.space(), &f, w.p()).unwrap()
}

fn enumerate(w: &WeightedSumOperator, region: &[usize]) -> (f64, Vec<usize>) {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 1u32..(1 << region.len()) {
        let set: Vec<usize> = (0..region.len()).filter(|i| mask & (1 << i) != 0).map(|i| region[i]).collect();
        let r = ratio(w, &set);
        if best.as_ref().is_none_or(|(b, s)| r < *b || (r == *b && set < *s)) {
            best = Some((r, set));
        }
    }
    best.unwrap()
}

fn witness_scaling() -> Outcome {
    let mut worst = 0.0f64;
    for (p, q) in [(1.0, 2.0), (2.0, 1.0), (2.0, 3.0)] {
        for k in 0..=6u32 {
            let w = refined_identity(k, p, q);
            let expected = 0.5f64.powi(k as i32).powf(1.0 / q - 1.0 / p);
            let got = criteria::indicator_ratio(&w, &[0]).unwrap();
            let err = (got - expected).abs() / expected;
            ensure(err <= 1e-10, || format!("(p, q) = ({p}, {q}), k = {k}: {got} vs {expected}"))?;
            worst = worst.max(err);
        }
    }
    let pairs = [(1.0, 2.0), (2.0, 1.0), (2.0, 3.0), (2.0, 2.0)];
    for seed in 0..50u64 {
        let (p, q) = pairs[seed as usize % pairs.len()];
        let cfg = RandomConfig {
            atoms: (1, 12),
            disjoint: seed % 2 == 0,
            zero_probability: 0.1,
            p: Exponent::Finite(p),
            q: Exponent::Finite(q),
            ..RandomConfig::default()
        };
        let w = generate_random(seed, &cfg).unwrap().operator();
        let region: Vec<usize> = (0..w.space().len()).collect();
        let (best, set) = enumerate(&w, &region);
        let found = criteria::witness_search(&w, &region).unwrap();
        ensure(found.exhaustive, || format!("seed {seed}: not exhaustive"))?;
        let err = (found.ratio - best).abs() / best.max(1.0);
        ensure(err <= 1e-10, || format!("seed {seed}: ratio {} vs enumerated {best}", found.ratio))?;
        if found.set != set {
            let tie = (ratio(&w, &found.set) - best).abs() / best.max(1.0);
            ensure(tie <= 1e-10, || format!("seed {seed}: set {:?} vs {set:?}", found.set))?;
        }
    }
    Ok(format!("scaling law max relative error {worst:e}; 50 regions match enumeration"))
}

fn conditional_expectation_suite() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..500 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=32);
        let masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
        let space = FiniteMeasureSpace::from_masses(&masses).unwrap();
        let f = random_function(&space, &mut rng, true);
        let k = rng.random_range(1..=n);
        let mut blocks = vec![Vec::new(); k];
        for a in 0..n {
            blocks[rng.random_range(0..k)].push(a);
        }
        blocks.retain(|b| !b.is_empty());
        let part = Partition::new(&space, blocks.clone()).unwrap();
        let ef = conditional_expectation(&space, &f, &part).unwrap();
        let eef = conditional_expectation(&space, &ef, &part).unwrap();
        ensure(eef == ef, || format!("seed {seed}: not idempotent"))?;
        for block in &blocks {
            let mass: f64 = block.iter().map(|&a| masses[a]).sum();
            let mean: Complex64 = block.iter().map(|&a| f.get(a) * masses[a]).sum::<Complex64>() / mass;
            for &a in block {
                let err = (ef.get(a) - mean).norm() / mean.norm().max(1.0);
                ensure(err <= 1e-12, || format!("seed {seed}: block average off by {err:e}"))?;
                worst = worst.max(err);
            }
        }
        for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Finite(3.5), Exponent::Infinity] {
            let (a, b) = (lp_norm(&space, &ef, p).unwrap(), lp_norm(&space, &f, p).unwrap());
            ensure(a <= b * (1.0 + 1e-12), || format!("seed {seed}: ||Ef||_{p} = {a} > ||f|| = {b}"))?;
        }
    }
    Ok(format!("500 pairs, idempotence exact, max block-average error {worst:e}"))
}

fn determinism() -> Outcome {
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let (one, four) = (pool(1), pool(4));
    let mut scenarios = Vec::new();
    for seed in 0..10 {
        let cfg = RandomConfig {
            atoms: (6, 18),
            cells: 4,
            p: Exponent::Finite(1.0),
            q: Exponent::Finite(2.0),
            refinement_levels: 2,
            checks: vec![CriterionId::T2_4a, CriterionId::T2_4b, CriterionId::T2_4c],
            nonnegative: true,
            ..RandomConfig::default()
        };
        scenarios.push(generate_random(seed, &cfg).unwrap());
        let cfg = RandomConfig {
            checks: CriterionId::ALL.to_vec(),
            ..RandomConfig::default()
        };
        scenarios.push(generate_random(seed, &cfg).unwrap());
    }
    let tol = Tolerances::default();
    for s in &scenarios {
        let a = one.install(|| harness::run_checks(s, &tol).to_json());
        let b = four.install(|| harness::run_checks(s, &tol).to_json());
        ensure(a == b, || format!("{:?}: reports differ between 1 and 4 threads", s.name))?;
        // the witness search itself, on a region large enough to split into blocks
        let w = s.operator();
        let region: Vec<usize> = (0..w.space().len().min(16)).collect();
        let x = one.install(|| criteria::witness_search(&w, &region).unwrap());
        let y = four.install(|| criteria::witness_search(&w, &region).unwrap());
        ensure(x.set == y.set && x.ratio.to_bits() == y.ratio.to_bits(), || {
            format!("{:?}: witness differs between thread counts", s.name)
        })?;
    }
    Ok(format!("{} scenarios, byte-identical reports on 1 and 4 threads", scenarios.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("W*W = M_J identity", wstar_w_identity),
        ("singular-value law", singular_value_law),
        ("polar decomposition", polar_decomposition),
        ("periodic invertibility", invertibility),
        ("spectral measure axioms", spectral_axioms),
        ("injectivity", injectivity),
        ("norm inequality", norm_inequality),
        ("witness scaling and enumeration", witness_scaling),
        ("conditional expectation", conditional_expectation_suite),
        ("determinism across thread counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
