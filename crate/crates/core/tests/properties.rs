use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wco_core::criteria::{self, BandScheme, UPower};
use wco_core::harness::{generate_random, parse_scenario, random_function, RandomConfig};
use wco_core::measure_space::{conditional_expectation, lp_norm};
use wco_core::{Complex64, Exponent, FiniteMeasureSpace, Partition, SelfMap, Term, WeightedSumOperator};

fn config() -> impl Strategy<Value = RandomConfig> {
    (1usize..5, any::<bool>(), 0usize..3, prop_oneof![Just(1.0), Just(2.0), Just(3.0)]).prop_map(
        |(terms, disjoint, cells, q)| RandomConfig {
            atoms: (terms.max(cells).max(1), 16),
            terms: (1, terms),
            disjoint,
            cells,
            p: Exponent::Finite(2.0),
            q: Exponent::Finite(q),
            ..RandomConfig::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scenario_json_round_trips(seed in any::<u64>(), cfg in config()) {
        let s = generate_random(seed, &cfg).unwrap();
        prop_assert_eq!(parse_scenario(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn refinement_keeps_total_mass(seed in any::<u64>(), cfg in config(), levels in 0u32..4) {
        let s = generate_random(seed, &cfg).unwrap();
        let space = s.space();
        let refined = s.refined(levels).space();
        prop_assert_eq!(refined.total_mass(), space.total_mass());
        prop_assert_eq!(refined.cell_indices().len(), space.cell_indices().len() << levels);
    }

    #[test]
    fn chained_j_matches_closed_form(seed in any::<u64>(), cfg in config(), s in 1.0f64..4.0) {
        let w = generate_random(seed, &cfg).unwrap().operator();
        let a = w.compute_j(s).unwrap();
        let b = w.compute_j_chained(s).unwrap();
        let scale = a.max().max(1.0);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn wstar_w_is_mj_under_disjoint_supports(seed in any::<u64>()) {
        let w = generate_random(seed, &RandomConfig::default()).unwrap().operator();
        let c = w.verify_wstar_w_equals_mj().unwrap();
        prop_assert!(c.disjoint_supports);
        prop_assert!(c.residual <= 1e-10 * c.j.max().max(1.0));
    }

    #[test]
    fn conditional_expectation_is_idempotent_and_contractive(
        seed in any::<u64>(),
        masses in prop::collection::vec(0.1f64..10.0, 1..20),
        labels in prop::collection::vec(0usize..4, 20),
    ) {
        let space = FiniteMeasureSpace::from_masses(&masses).unwrap();
        let mut blocks = vec![Vec::new(); 4];
        for a in 0..masses.len() {
            blocks[labels[a]].push(a);
        }
        blocks.retain(|b| !b.is_empty());
        let part = Partition::new(&space, blocks).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_function(&space, &mut rng, true);
        let ef = conditional_expectation(&space, &f, &part).unwrap();
        prop_assert_eq!(&conditional_expectation(&space, &ef, &part).unwrap(), &ef);
        for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity] {
            prop_assert!(lp_norm(&space, &ef, p).unwrap() <= lp_norm(&space, &f, p).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lower_bound_scales_by_t_to_the_p(
        weights in prop::collection::vec(0.0f64..3.0, 1..10),
        k in -3i32..4,
        p in prop_oneof![Just(1.0), Just(2.0), Just(3.0)],
    ) {
        let space = FiniteMeasureSpace::from_masses(&vec![1.0; weights.len()]).unwrap();
        let t = 2f64.powi(k);
        let op = |scale: f64| {
            let u: Vec<f64> = weights.iter().map(|w| w * scale).collect();
            let term = Term::new(space.real_function(&u).unwrap(), SelfMap::identity(&space));
            WeightedSumOperator::new(space.clone(), vec![term], Exponent::Finite(p), Exponent::Finite(p)).unwrap()
        };
        let base = criteria::check_lower_bound_u(&op(1.0), UPower::Source).unwrap().margin;
        let scaled = criteria::check_lower_bound_u(&op(t), UPower::Source).unwrap().margin;
        prop_assert_eq!(scaled, base * t.powf(p));
    }

    #[test]
    fn bands_partition_the_region(seed in any::<u64>(), alpha in 0.01f64..10.0, unit in any::<bool>()) {
        let w = generate_random(seed, &RandomConfig { disjoint: false, ..RandomConfig::default() }).unwrap().operator();
        let region: Vec<usize> = (0..w.space().len()).collect();
        let scheme = if unit { BandScheme::Unit } else { BandScheme::Scaled { alpha } };
        let d = criteria::band_decomposition(&w, &region, scheme, 2.0).unwrap();
        let mut seen: Vec<usize> = d.bands.iter().flat_map(|b| b.atoms.clone()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, region);
        for band in &d.bands {
            for &a in &band.atoms {
                prop_assert!(band.lower <= d.j[a] && d.j[a] < band.upper);
            }
        }
    }

    #[test]
    fn witness_ratio_respects_its_bound(seed in any::<u64>(), q in prop_oneof![Just(1.0), Just(2.0), Just(3.0)]) {
        let cfg = RandomConfig {
            atoms: (1, 10),
            p: Exponent::Finite(2.0),
            q: Exponent::Finite(q),
            ..RandomConfig::default()
        };
        let w = generate_random(seed, &cfg).unwrap().operator();
        let region: Vec<usize> = (0..w.space().len()).collect();
        let r = criteria::witness_search(&w, &region).unwrap();
        prop_assert!(r.within_bound(), "{} > {:?}", r.ratio, r.bound);
        prop_assert!(r.ratio >= 0.0);
    }

    #[test]
    fn norm_inequality_holds(seed in any::<u64>(), q in 1.0f64..4.0) {
        let cfg = RandomConfig {
            disjoint: false,
            p: Exponent::Finite(q),
            q: Exponent::Finite(q),
            ..RandomConfig::default()
        };
        let w = generate_random(seed, &cfg).unwrap().operator();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_function(w.space(), &mut rng, true);
        prop_assert!(w.norm_inequality_residual(&f).unwrap() >= -1e-10);
    }
}

#[test]
fn scaled_bands_with_huge_alpha_collapse() {
    let space = FiniteMeasureSpace::from_masses(&[1.0, 2.0, 3.0]).unwrap();
    let u = space.function(vec![Complex64::new(1.0, 0.0); 3]).unwrap();
    let w = WeightedSumOperator::new(
        space.clone(),
        vec![Term::new(u, SelfMap::new(&space, vec![1, 2, 0]).unwrap())],
        Exponent::Finite(2.0),
        Exponent::Finite(2.0),
    )
    .unwrap();
    let d = criteria::band_decomposition(&w, &[0, 1, 2], BandScheme::Scaled { alpha: 1e9 }, 2.0).unwrap();
    assert_eq!(d.bands.len(), 1);
    assert_eq!(d.bands[0].index, 1);
}
