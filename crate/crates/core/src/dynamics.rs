//! Measurable self-maps of a finite space and the objects they induce.
//!
//! Every map of a space whose atoms all have positive mass is non-singular, so a
//! map is nothing more than an atom-index table. "Composition with `φ⁻¹`" is only
//! ever taken of functions constant on the fibers of `φ`; off the range of `φ`
//! the result is zero.

use num_complex::Complex64;

use crate::measure_space::{Partition, Refinement, SpaceId};
use crate::{Error, FiniteMeasureSpace, PFunction, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelfMap {
    space: SpaceId,
    targets: Vec<usize>,
}

impl SelfMap {
    pub fn new(space: &FiniteMeasureSpace, targets: Vec<usize>) -> Result<Self> {
        if targets.len() != space.len() {
            return Err(Error::InvalidMap(format!(
                "{} targets for {} atoms",
                targets.len(),
                space.len()
            )));
        }
        if let Some(x) = targets.iter().position(|&t| t >= space.len()) {
            return Err(Error::InvalidMap(format!(
                "atom {x} maps to out-of-range index {}",
                targets[x]
            )));
        }
        Ok(SelfMap {
            space: space.id(),
            targets,
        })
    }

    pub fn identity(space: &FiniteMeasureSpace) -> Self {
        SelfMap {
            space: space.id(),
            targets: (0..space.len()).collect(),
        }
    }

    pub fn constant(space: &FiniteMeasureSpace, target: usize) -> Result<Self> {
        Self::new(space, vec![target; space.len()])
    }

    pub fn space_id(&self) -> SpaceId {
        self.space
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    #[inline]
    pub fn at(&self, x: usize) -> usize {
        self.targets[x]
    }

    pub fn is_identity(&self) -> bool {
        self.targets.iter().enumerate().all(|(x, &t)| x == t)
    }

    pub fn is_permutation(&self) -> bool {
        let mut hit = vec![false; self.len()];
        self.targets
            .iter()
            .all(|&t| !std::mem::replace(&mut hit[t], true))
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &SelfMap) -> SelfMap {
        debug_assert_eq!(self.space, inner.space);
        SelfMap {
            space: self.space,
            targets: inner.targets.iter().map(|&y| self.targets[y]).collect(),
        }
    }

    /// `f ∘ φ`.
    pub fn compose_function(&self, f: &PFunction) -> Result<PFunction> {
        if f.space_id() != self.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(PFunction::from_parts(
            self.space,
            self.targets.iter().map(|&t| f.get(t)).collect(),
        ))
    }

    /// Transports the map to a refined space: the `r`-th child of `x` goes to the
    /// `r`-th child (cyclically) of `φ(x)`.
    pub fn lift(&self, refinement: &Refinement) -> SelfMap {
        let targets = (0..refinement.space.len())
            .map(|fine| {
                let image = self.targets[refinement.coarsen_map[fine]];
                let kids = &refinement.children[image];
                kids[refinement.child_rank(fine) % kids.len()]
            })
            .collect();
        SelfMap {
            space: refinement.space.id(),
            targets,
        }
    }

    /// Nonempty fibers `φ⁻¹({a})`, indexed by `a`; `None` off the range.
    pub(crate) fn fibers(&self) -> Vec<Vec<usize>> {
        let mut fibers = vec![Vec::new(); self.len()];
        for (x, &t) in self.targets.iter().enumerate() {
            fibers[t].push(x);
        }
        fibers
    }
}

/// `h = d(μ∘φ⁻¹)/dμ`, i.e. `h(a) = μ(φ⁻¹{a}) / μ(a)`.
pub fn radon_nikodym(space: &FiniteMeasureSpace, phi: &SelfMap) -> Result<PFunction> {
    space.check(phi.space)?;
    let mut pre = vec![0.0; space.len()];
    for (x, &t) in phi.targets.iter().enumerate() {
        pre[t] += space.mass(x);
    }
    space.real_function(
        &pre.iter()
            .zip(space.masses())
            .map(|(p, m)| p / m)
            .collect::<Vec<_>>(),
    )
}

/// Partition of the space into the nonempty fibers of `φ`, which generate `φ⁻¹(Σ)`.
pub fn fiber_partition(phi: &SelfMap) -> Partition {
    let blocks = phi.fibers().into_iter().filter(|b| !b.is_empty()).collect();
    Partition::from_blocks(phi.space, phi.len(), blocks).expect("fibers partition the space")
}

/// `g ∘ φ⁻¹` for `g` constant on fibers of `φ`; zero where the fiber is empty.
pub fn pushforward_of_fiber_constant(g: &PFunction, phi: &SelfMap) -> Result<PFunction> {
    if g.space_id() != phi.space {
        return Err(Error::SpaceMismatch);
    }
    let mut out = vec![Complex64::new(0.0, 0.0); phi.len()];
    for (a, fiber) in phi.fibers().iter().enumerate() {
        let Some(&first) = fiber.first() else {
            continue;
        };
        let v = g.get(first);
        let scale = fiber.iter().map(|&x| g.get(x).norm()).fold(0.0, f64::max);
        if fiber.iter().any(|&x| (g.get(x) - v).norm() > 1e-10 * scale) {
            return Err(Error::NotFiberConstant { atom: a });
        }
        out[a] = v;
    }
    Ok(PFunction::from_parts(phi.space, out))
}

/// Least `N ≥ 1` with `φᴺ = id`, or `None` when `φ` is not a permutation
/// (or the period overflows `u64`).
pub fn detect_period(phi: &SelfMap) -> Option<u64> {
    if !phi.is_permutation() {
        return None;
    }
    let mut seen = vec![false; phi.len()];
    let mut period: u64 = 1;
    for start in 0..phi.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0u64;
        let mut x = start;
        while !seen[x] {
            seen[x] = true;
            x = phi.at(x);
            len += 1;
        }
        period = lcm(period, len)?;
    }
    Some(period)
}

pub(crate) fn lcm(a: u64, b: u64) -> Option<u64> {
    fn gcd(mut a: u64, mut b: u64) -> u64 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }
    (a / gcd(a, b)).checked_mul(b)
}

/// `φᵏ`, with `φ⁰ = id`.
pub fn compose_power(phi: &SelfMap, k: u64) -> SelfMap {
    let mut result = SelfMap {
        space: phi.space,
        targets: (0..phi.len()).collect(),
    };
    let mut base = phi.clone();
    let mut k = k;
    while k > 0 {
        if k & 1 == 1 {
            result = base.after(&result);
        }
        base = base.after(&base);
        k >>= 1;
    }
    result
}
