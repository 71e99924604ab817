//! Finite measure spaces, partitions (sub-σ-algebras), conditional expectation
//! and weighted `L^p` norms.
//!
//! A space is an ordered list of atoms with positive masses. Atoms tagged as
//! [`AtomKind::Cell`] stand for pieces of a non-atomic part; [`FiniteMeasureSpace::refine`]
//! splits each of them into two halves, which is how arbitrarily small sets of
//! positive measure are produced.

use std::collections::HashSet;
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::sum::exact_sum;
use crate::{Error, Result};

pub type AtomId = String;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AtomKind {
    /// An indivisible point mass.
    Genuine,
    /// A refinable piece of the non-atomic part.
    Cell { level: u32, lineage: String },
}

impl AtomKind {
    pub fn is_cell(&self) -> bool {
        matches!(self, AtomKind::Cell { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub id: AtomId,
    pub mass: f64,
    pub kind: AtomKind,
}

impl Atom {
    pub fn genuine(id: impl Into<AtomId>, mass: f64) -> Self {
        Atom {
            id: id.into(),
            mass,
            kind: AtomKind::Genuine,
        }
    }

    pub fn cell(id: impl Into<AtomId>, mass: f64, lineage: impl Into<String>) -> Self {
        Atom {
            id: id.into(),
            mass,
            kind: AtomKind::Cell {
                level: 0,
                lineage: lineage.into(),
            },
        }
    }
}

/// Content fingerprint of a space. Functions, maps and partitions carry the id of
/// the space they were built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpaceId(u64);

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasureSpace {
    atoms: Vec<Atom>,
    masses: Vec<f64>,
    id: SpaceId,
}

impl FiniteMeasureSpace {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidSpace("no atoms".into()));
        }
        let mut seen = HashSet::new();
        for (i, atom) in atoms.iter().enumerate() {
            if !(atom.mass.is_finite() && atom.mass > 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "atom {i} (`{}`) has non-positive or non-finite mass {}",
                    atom.id, atom.mass
                )));
            }
            if !seen.insert(atom.id.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate atom id `{}`", atom.id)));
            }
        }
        // dyadic splitting keeps cells of one lineage and level at equal mass
        let mut lineage_mass: Vec<(&str, u32, f64)> = Vec::new();
        for atom in &atoms {
            if let AtomKind::Cell { level, lineage } = &atom.kind {
                match lineage_mass
                    .iter()
                    .find(|(l, lv, _)| *l == lineage.as_str() && lv == level)
                {
                    Some((_, _, m)) if *m != atom.mass => {
                        return Err(Error::InvalidSpace(format!(
                            "cells of lineage `{lineage}` at level {level} have unequal masses"
                        )));
                    }
                    Some(_) => {}
                    None => lineage_mass.push((lineage, *level, atom.mass)),
                }
            }
        }

        let mut hasher = DefaultHasher::new();
        for atom in &atoms {
            atom.id.hash(&mut hasher);
            atom.mass.to_bits().hash(&mut hasher);
            atom.kind.hash(&mut hasher);
        }
        let id = SpaceId(hasher.finish());
        let masses = atoms.iter().map(|a| a.mass).collect();
        Ok(FiniteMeasureSpace { atoms, masses, id })
    }

    /// Purely atomic space with ids `a0, a1, …`.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        Self::new(
            masses
                .iter()
                .enumerate()
                .map(|(i, &m)| Atom::genuine(format!("a{i}"), m))
                .collect(),
        )
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, index: usize) -> f64 {
        self.masses[index]
    }

    /// Correctly rounded total mass, so it is invariant under refinement.
    pub fn total_mass(&self) -> f64 {
        exact_sum(self.masses.iter().copied())
    }

    pub fn measure_of(&self, set: &[usize]) -> f64 {
        exact_sum(set.iter().map(|&i| self.masses[i]))
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.id == id)
    }

    pub fn cell_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.atoms[i].kind.is_cell()).collect()
    }

    pub fn genuine_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.atoms[i].kind.is_cell()).collect()
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.atoms.iter().all(|a| !a.kind.is_cell())
    }

    /// Same atoms with every cell retagged as a genuine atom.
    pub fn collapse_cells(&self) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                kind: AtomKind::Genuine,
                ..a.clone()
            })
            .collect();
        Self::new(atoms).expect("retagging keeps a valid space")
    }

    /// Splits every cell into two children of half mass at `level + 1`;
    /// genuine atoms pass through unchanged.
    pub fn refine(&self) -> Refinement {
        let mut atoms = Vec::new();
        let mut coarsen_map = Vec::new();
        let mut children = Vec::with_capacity(self.len());
        for (old, atom) in self.atoms.iter().enumerate() {
            match &atom.kind {
                AtomKind::Genuine => {
                    children.push(vec![atoms.len()]);
                    coarsen_map.push(old);
                    atoms.push(atom.clone());
                }
                AtomKind::Cell { level, lineage } => {
                    let first = atoms.len();
                    for half in 0..2 {
                        atoms.push(Atom {
                            id: format!("{}.{half}", atom.id),
                            mass: atom.mass / 2.0,
                            kind: AtomKind::Cell {
                                level: level + 1,
                                lineage: lineage.clone(),
                            },
                        });
                        coarsen_map.push(old);
                    }
                    children.push(vec![first, first + 1]);
                }
            }
        }
        Refinement {
            space: Self::new(atoms).expect("refinement of a valid space is valid"),
            coarse_id: self.id,
            coarsen_map,
            children,
        }
    }

    pub fn function(&self, values: Vec<Complex64>) -> Result<PFunction> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(PFunction {
            space: self.id,
            values,
        })
    }

    pub fn real_function(&self, values: &[f64]) -> Result<PFunction> {
        self.function(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn constant(&self, c: Complex64) -> PFunction {
        PFunction {
            space: self.id,
            values: vec![c; self.len()],
        }
    }

    pub fn zero(&self) -> PFunction {
        self.constant(Complex64::new(0.0, 0.0))
    }

    pub fn indicator(&self, set: &[usize]) -> PFunction {
        let mut f = self.zero();
        for &i in set {
            f.values[i] = Complex64::new(1.0, 0.0);
        }
        f
    }

    pub(crate) fn check(&self, other: SpaceId) -> Result<()> {
        if other == self.id {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }
}

/// Result of one refinement step.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub space: FiniteMeasureSpace,
    coarse_id: SpaceId,
    /// new atom index → old atom index
    pub coarsen_map: Vec<usize>,
    /// old atom index → its new atom indices, in order
    pub children: Vec<Vec<usize>>,
}

impl Refinement {
    /// `f ∘ coarsen`, the function on the fine space that is constant on children.
    pub fn pull_back(&self, f: &PFunction) -> Result<PFunction> {
        if f.space != self.coarse_id {
            return Err(Error::SpaceMismatch);
        }
        Ok(PFunction {
            space: self.space.id(),
            values: self.coarsen_map.iter().map(|&old| f.values[old]).collect(),
        })
    }

    /// Position of a fine atom among the children of its parent.
    pub fn child_rank(&self, fine: usize) -> usize {
        let parent = self.coarsen_map[fine];
        self.children[parent]
            .iter()
            .position(|&c| c == fine)
            .expect("fine atom is listed among its parent's children")
    }
}

/// Integrability exponent in `[1, ∞]`. Serialized as a number or the token `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::ExponentOutOfRange(p))
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(p) => Some(p),
            Exponent::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn reciprocal(self) -> f64 {
        self.finite().map_or(0.0, |p| 1.0 / p)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tok(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(p) => p,
            Raw::Tok(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => f64::INFINITY,
            Raw::Tok(t) => return Err(serde::de::Error::custom(format!("bad exponent `{t}`"))),
        };
        Exponent::new(p).map_err(serde::de::Error::custom)
    }
}

/// A measurable function: one complex value per atom.
#[derive(Clone, Debug, PartialEq)]
pub struct PFunction {
    space: SpaceId,
    values: Vec<Complex64>,
}

impl PFunction {
    pub fn space_id(&self) -> SpaceId {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        self.values[i]
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> PFunction {
        PFunction {
            space: self.space,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_with(
        &self,
        other: &PFunction,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<PFunction> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(PFunction {
            space: self.space,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|z| z.im == 0.0)
    }

    pub(crate) fn from_parts(space: SpaceId, values: Vec<Complex64>) -> Self {
        PFunction { space, values }
    }
}

/// A sub-σ-algebra of a finite space: disjoint nonempty blocks covering all atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    space: SpaceId,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(space: &FiniteMeasureSpace, blocks: Vec<Vec<usize>>) -> Result<Self> {
        Self::from_blocks(space.id(), space.len(), blocks)
    }

    pub(crate) fn from_blocks(space: SpaceId, n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut owner = vec![false; n];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            for &a in block {
                if a >= n {
                    return Err(Error::InvalidPartition(format!("atom index {a} out of range")));
                }
                if std::mem::replace(&mut owner[a], true) {
                    return Err(Error::InvalidPartition(format!("atom {a} in two blocks")));
                }
            }
        }
        if let Some(a) = owner.iter().position(|&o| !o) {
            return Err(Error::InvalidPartition(format!("atom {a} not covered")));
        }
        Ok(Partition { space, blocks })
    }

    pub fn singletons(space: &FiniteMeasureSpace) -> Self {
        Partition {
            space: space.id(),
            blocks: (0..space.len()).map(|a| vec![a]).collect(),
        }
    }

    pub fn trivial(space: &FiniteMeasureSpace) -> Self {
        Partition {
            space: space.id(),
            blocks: vec![(0..space.len()).collect()],
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn space_id(&self) -> SpaceId {
        self.space
    }
}

/// Weighted norm `(Σ μ(a)|f(a)|^p)^{1/p}`, or `max |f(a)|` for `p = ∞`.
pub fn lp_norm(space: &FiniteMeasureSpace, f: &PFunction, p: Exponent) -> Result<f64> {
    space.check(f.space)?;
    Ok(weighted_norm(space.masses(), &f.abs(), p))
}

pub(crate) fn weighted_norm(masses: &[f64], abs: &[f64], p: Exponent) -> f64 {
    let max = abs.iter().copied().fold(0.0, f64::max);
    match p {
        Exponent::Infinity => max,
        _ if max == 0.0 => 0.0,
        Exponent::Finite(p) => {
            // scaled by the max so large p cannot overflow
            let s: f64 = masses
                .iter()
                .zip(abs)
                .map(|(m, a)| m * (a / max).powf(p))
                .sum();
            max * s.powf(1.0 / p)
        }
    }
}

/// `Σ μ(a)|f(a)|^p` for finite `p`.
pub(crate) fn lp_power_integral(masses: &[f64], abs: &[f64], p: f64) -> f64 {
    masses.iter().zip(abs).map(|(m, a)| m * a.powf(p)).sum()
}

/// Conditional expectation onto a partition: block-wise mass-weighted average.
pub fn conditional_expectation(
    space: &FiniteMeasureSpace,
    f: &PFunction,
    part: &Partition,
) -> Result<PFunction> {
    space.check(f.space)?;
    space.check(part.space)?;
    let mut out = f.values.clone();
    for block in &part.blocks {
        // shifted mean: a block-constant input comes back bit-for-bit
        let base = f.values[block[0]];
        let mut weight = 0.0;
        let mut acc = Complex64::new(0.0, 0.0);
        for &a in block {
            let m = space.mass(a);
            weight += m;
            acc += (f.values[a] - base) * m;
        }
        let mean = base + acc / weight;
        for &a in block {
            out[a] = mean;
        }
    }
    Ok(PFunction {
        space: f.space,
        values: out,
    })
}

/// Atoms where `|f| > tol`.
pub fn cozero(f: &PFunction, tol: f64) -> Vec<usize> {
    cozero_of(&f.abs(), tol)
}

pub(crate) fn cozero_of(abs: &[f64], tol: f64) -> Vec<usize> {
    (0..abs.len()).filter(|&i| abs[i] > tol).collect()
}

/// Default cozero cut `1e-12 · max|f|`.
pub fn default_cozero_tol(f: &PFunction) -> f64 {
    crate::Tolerances::default().cut(f.max_abs())
}
