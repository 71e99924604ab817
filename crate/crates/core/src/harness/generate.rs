//! Seeded random scenarios. Same seed and config, same scenario, on every platform
//! (ChaCha8 stream).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{Scenario, ScenarioTerm};
use crate::criteria::CriterionId;
use crate::{Atom, Complex64, Error, Exponent, FiniteMeasureSpace, PFunction, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    /// any atom-index table
    Arbitrary,
    /// a permutation of all atoms
    Permutation,
    /// a permutation that maps the support of its own weight onto itself, with
    /// cycles of length at most [`MAX_CYCLE`]; needs disjoint supports
    InvariantPermutation,
}

pub const MAX_CYCLE: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct RandomConfig {
    /// inclusive range of atom counts
    pub atoms: (usize, usize),
    /// inclusive range of term counts
    pub terms: (usize, usize),
    pub p: Exponent,
    pub q: Exponent,
    pub disjoint: bool,
    pub maps: MapKind,
    /// chance that a supported weight value is planted as an exact zero
    pub zero_probability: f64,
    pub complex: bool,
    pub nonnegative: bool,
    /// number of trailing atoms tagged as non-atomic cells
    pub cells: usize,
    pub checks: Vec<CriterionId>,
    pub refinement_levels: u32,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            atoms: (2, 32),
            terms: (1, 4),
            p: Exponent::Finite(2.0),
            q: Exponent::Finite(2.0),
            disjoint: true,
            maps: MapKind::Arbitrary,
            zero_probability: 0.0,
            complex: true,
            nonnegative: false,
            cells: 0,
            checks: Vec::new(),
            refinement_levels: 0,
        }
    }
}

impl RandomConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.atoms.0 == 0 || self.atoms.0 > self.atoms.1 {
            return bad("atom range must be nonempty and start at 1 or more");
        }
        if self.terms.0 == 0 || self.terms.0 > self.terms.1 {
            return bad("term range must be nonempty and start at 1 or more");
        }
        if self.disjoint && self.terms.0 > self.atoms.1 {
            return bad("disjoint supports need at least as many atoms as terms");
        }
        if self.maps == MapKind::InvariantPermutation && !self.disjoint {
            return bad("support-invariant permutations need disjoint supports");
        }
        if self.cells > self.atoms.0 {
            return bad("more cells than atoms");
        }
        if !(0.0..=1.0).contains(&self.zero_probability) {
            return bad("zero probability must lie in [0, 1]");
        }
        Ok(())
    }
}

fn random_weight(rng: &mut ChaCha8Rng, cfg: &RandomConfig) -> Complex64 {
    if rng.random_bool(cfg.zero_probability) {
        return Complex64::new(0.0, 0.0);
    }
    let r = rng.random_range(0.5..2.0);
    if cfg.nonnegative {
        Complex64::new(r, 0.0)
    } else if cfg.complex {
        Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
    } else if rng.random_bool(0.5) {
        Complex64::new(-r, 0.0)
    } else {
        Complex64::new(r, 0.0)
    }
}

/// Permutes `atoms` among themselves with cycles of length at most `MAX_CYCLE`.
fn short_cycles(rng: &mut ChaCha8Rng, atoms: &[usize], targets: &mut [usize]) {
    let mut order = atoms.to_vec();
    order.shuffle(rng);
    let mut rest = order.as_slice();
    while !rest.is_empty() {
        let len = rng.random_range(1..=MAX_CYCLE.min(rest.len()));
        let (cycle, tail) = rest.split_at(len);
        for k in 0..len {
            targets[cycle[k]] = cycle[(k + 1) % len];
        }
        rest = tail;
    }
}

pub fn generate_random(seed: u64, cfg: &RandomConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = if cfg.disjoint { cfg.atoms.0.max(cfg.terms.0) } else { cfg.atoms.0 };
    let n = rng.random_range(lo..=cfg.atoms.1);
    let t_hi = if cfg.disjoint { cfg.terms.1.min(n) } else { cfg.terms.1 };
    let t = rng.random_range(cfg.terms.0..=t_hi);

    let mut atoms: Vec<Atom> = (0..n)
        .map(|i| Atom::genuine(format!("a{i}"), rng.random_range(0.1..10.0)))
        .collect();
    if cfg.cells > 0 {
        let mass = rng.random_range(0.1..10.0);
        for (k, atom) in atoms.iter_mut().skip(n - cfg.cells).enumerate() {
            *atom = Atom::cell(format!("c{k}"), mass, "B");
        }
    }

    // owner[x] = the single term whose weight may be nonzero at x
    let owner: Vec<Option<usize>> = if cfg.disjoint {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut owner = vec![None; n];
        for (k, &x) in order.iter().enumerate() {
            owner[x] = if k < t {
                Some(k)
            } else if rng.random_bool(cfg.zero_probability) {
                None
            } else {
                Some(rng.random_range(0..t))
            };
        }
        owner
    } else {
        vec![None; n]
    };

    let mut terms = Vec::with_capacity(t);
    for i in 0..t {
        let weight: Vec<Complex64> = (0..n)
            .map(|x| {
                let active = if cfg.disjoint { owner[x] == Some(i) } else { rng.random_bool(0.7) };
                if active {
                    random_weight(&mut rng, cfg)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let map = match cfg.maps {
            MapKind::Arbitrary => (0..n).map(|_| rng.random_range(0..n)).collect(),
            MapKind::Permutation => {
                let mut m: Vec<usize> = (0..n).collect();
                m.shuffle(&mut rng);
                m
            }
            MapKind::InvariantPermutation => {
                let mut m = vec![0; n];
                let (inside, outside): (Vec<usize>, Vec<usize>) = (0..n).partition(|&x| owner[x] == Some(i));
                short_cycles(&mut rng, &inside, &mut m);
                short_cycles(&mut rng, &outside, &mut m);
                m
            }
        };
        terms.push(ScenarioTerm { weight, map });
    }

    Ok(Scenario {
        name: Some(format!("random-{seed}")),
        atoms,
        terms,
        p: cfg.p,
        q: cfg.q,
        checks: cfg.checks.clone(),
        seed: Some(seed),
        refinement_levels: cfg.refinement_levels,
    })
}

/// A random function with entries in the unit square (or interval when real).
pub fn random_function(space: &FiniteMeasureSpace, rng: &mut impl Rng, complex: bool) -> PFunction {
    let values = (0..space.len())
        .map(|_| {
            let re = rng.random_range(-1.0..1.0);
            let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
            Complex64::new(re, im)
        })
        .collect();
    space.function(values).expect("finite values of the right length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::detect_period;

    #[test]
    fn deterministic_per_seed() {
        let cfg = RandomConfig::default();
        assert_eq!(generate_random(9, &cfg).unwrap(), generate_random(9, &cfg).unwrap());
        assert_ne!(generate_random(9, &cfg).unwrap(), generate_random(10, &cfg).unwrap());
    }

    #[test]
    fn disjoint_flag_gives_disjoint_supports() {
        let cfg = RandomConfig {
            atoms: (8, 8),
            terms: (3, 3),
            ..RandomConfig::default()
        };
        for seed in 0..20 {
            let w = generate_random(seed, &cfg).unwrap().operator();
            assert_eq!(w.terms().len(), 3);
            assert!(w.disjoint_supports());
        }
    }

    #[test]
    fn too_many_terms_for_disjointness() {
        let cfg = RandomConfig {
            atoms: (2, 2),
            terms: (3, 3),
            ..RandomConfig::default()
        };
        assert!(matches!(generate_random(0, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn invariant_permutations_have_short_periods() {
        let cfg = RandomConfig {
            maps: MapKind::InvariantPermutation,
            ..RandomConfig::default()
        };
        for seed in 0..20 {
            let w = generate_random(seed, &cfg).unwrap().operator();
            for term in w.terms() {
                let period = detect_period(&term.map).unwrap();
                assert!(period <= 12, "{period}");
                for x in 0..w.space().len() {
                    if term.weight.get(x) != Complex64::new(0.0, 0.0) {
                        assert!(term.weight.get(term.map.at(x)) != Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn masses_in_range_and_cells_equal() {
        let cfg = RandomConfig {
            atoms: (6, 10),
            cells: 3,
            ..RandomConfig::default()
        };
        let s = generate_random(3, &cfg).unwrap();
        assert!(s.atoms.iter().all(|a| (0.1..10.0).contains(&a.mass)));
        let space = s.space();
        let cells = space.cell_indices();
        assert_eq!(cells.len(), 3);
        assert!(cells.iter().all(|&c| space.mass(c) == space.mass(cells[0])));
    }
}
