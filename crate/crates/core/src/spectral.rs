//! Invertibility through periodicity (`Wᴺ = M_v`), the spectral measure
//! `E(B) = M_{χ_B ∘ v}` of the multiplier, and injectivity via `J₂ > 0`.

use num_complex::Complex64;

use crate::criteria::{CriterionId, RangeVerdict, Witness};
use crate::dynamics::{compose_power, detect_period, lcm};
use crate::oracle;
use crate::{Error, PFunction, Result, Tolerances, WeightedSumOperator};

#[derive(Clone, Debug, PartialEq)]
pub struct Invertibility {
    /// `N = lcm(N₁, …, Nₙ)`
    pub period: u64,
    pub periods: Vec<u64>,
    /// `v = Σᵢ uᵢ · uᵢ∘φᵢ ⋯ uᵢ∘φᵢ^{N−1}`
    pub v: PFunction,
    pub invertible: bool,
    /// `‖Wᴺ − M_v‖ / max(1, max|v|)`
    pub power_residual: f64,
}

/// `v(a) = Σᵢ Π_{k<N} uᵢ(φᵢᵏ(a))`, the orbit product of each term over `N` steps.
pub fn orbit_product(w: &WeightedSumOperator, period: u64) -> PFunction {
    let n = w.space().len();
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for term in w.terms() {
        for (a, slot) in v.iter_mut().enumerate() {
            let mut x = a;
            let mut prod = Complex64::new(1.0, 0.0);
            for _ in 0..period {
                prod *= term.weight.get(x);
                if prod == Complex64::new(0.0, 0.0) {
                    break;
                }
                x = term.map.at(x);
            }
            *slot += prod;
        }
    }
    PFunction::from_parts(w.space().id(), v)
}

pub fn periodic_invertibility(w: &WeightedSumOperator) -> Result<Invertibility> {
    periodic_invertibility_with(w, &Tolerances::default())
}

/// Requires a purely atomic space and every `φᵢ` periodic. The identity
/// `Wᴺ = M_v` is checked against the matrix power; a mismatch is a hypothesis
/// failure.
pub fn periodic_invertibility_with(w: &WeightedSumOperator, tol: &Tolerances) -> Result<Invertibility> {
    if !w.space().is_purely_atomic() {
        return Err(Error::Precondition("needs a purely atomic space".into()));
    }
    let mut periods = Vec::with_capacity(w.terms().len());
    for (i, term) in w.terms().iter().enumerate() {
        periods.push(detect_period(&term.map).ok_or(Error::Aperiodic { term: i })?);
    }
    let period = periods
        .iter()
        .try_fold(1u64, |acc, &p| lcm(acc, p))
        .ok_or_else(|| Error::Precondition("period overflows".into()))?;
    for (i, term) in w.terms().iter().enumerate() {
        debug_assert!(compose_power(&term.map, periods[i]).is_identity());
    }

    let v = orbit_product(w, period);
    let power = oracle::power(&w.matrix(), period);
    let scale = v.max_abs().max(1.0);
    let power_residual = oracle::max_abs(&(power - oracle::diag(v.values()))) / scale;
    if power_residual > tol.oracle() {
        return Err(Error::PowerNotMultiplication {
            period,
            residual: power_residual,
        });
    }
    let vmax = v.max_abs();
    let vmin = v.values().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let invertible = vmax > 0.0 && vmin > tol.cut(vmax);
    Ok(Invertibility {
        period,
        periods,
        v,
        invertible,
        power_residual,
    })
}

/// `W⁻¹ g = W^{N−1}(g / v)`.
pub fn apply_inverse(w: &WeightedSumOperator, g: &PFunction) -> Result<PFunction> {
    let inv = periodic_invertibility(w)?;
    apply_inverse_with(w, &inv, g)
}

pub fn apply_inverse_with(w: &WeightedSumOperator, inv: &Invertibility, g: &PFunction) -> Result<PFunction> {
    if !inv.invertible {
        return Err(Error::NotInvertible);
    }
    let mut f = g.zip_with(&inv.v, |a, b| a / b)?;
    for _ in 1..inv.period {
        f = w.apply(&f)?;
    }
    Ok(f)
}

/// 0/1 diagonal multiplier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Projector {
    pub diag: Vec<bool>,
}

impl Projector {
    pub fn identity(n: usize) -> Self {
        Projector { diag: vec![true; n] }
    }

    pub fn compose(&self, other: &Projector) -> Projector {
        Projector {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| *a && *b).collect(),
        }
    }

    /// `E₁ + E₂`; `None` if the sum is not a projector (overlapping supports).
    pub fn checked_sum(&self, other: &Projector) -> Option<Projector> {
        self.diag
            .iter()
            .zip(&other.diag)
            .map(|(a, b)| if *a && *b { None } else { Some(*a || *b) })
            .collect::<Option<Vec<_>>>()
            .map(|diag| Projector { diag })
    }

    pub fn is_zero(&self) -> bool {
        self.diag.iter().all(|b| !b)
    }

    pub fn rank(&self) -> usize {
        self.diag.iter().filter(|b| **b).count()
    }

    pub fn as_real(&self) -> Vec<f64> {
        self.diag.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Spectral resolution of `M_v` for a finite-valued `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasureTable {
    values: Vec<Complex64>,
    /// distinct values in first-occurrence order, each with the atoms taking it
    pub distinct: Vec<(Complex64, Vec<usize>)>,
}

impl SpectralMeasureTable {
    /// `E(B) = M_{χ_B ∘ v}` for the Borel set given by its indicator on ℂ.
    pub fn projector(&self, in_set: impl Fn(Complex64) -> bool) -> Projector {
        Projector {
            diag: self.values.iter().map(|&z| in_set(z)).collect(),
        }
    }

    /// `E({λ})`.
    pub fn atom_projector(&self, lambda: Complex64) -> Projector {
        self.projector(|z| z == lambda)
    }

    /// `Σ_λ λ E({λ})` as a diagonal.
    pub fn reconstruct(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.values.len()];
        for (lambda, _) in &self.distinct {
            let e = self.atom_projector(*lambda);
            for (slot, hit) in out.iter_mut().zip(&e.diag) {
                if *hit {
                    *slot += *lambda;
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn spectral_measure(v: &PFunction) -> SpectralMeasureTable {
    let mut distinct: Vec<(Complex64, Vec<usize>)> = Vec::new();
    for (a, &z) in v.values().iter().enumerate() {
        match distinct.iter_mut().find(|(l, _)| *l == z) {
            Some((_, atoms)) => atoms.push(a),
            None => distinct.push((z, vec![a])),
        }
    }
    SpectralMeasureTable {
        values: v.values().to_vec(),
        distinct,
    }
}

/// Injectivity verdict `min J₂ > cut` and its matrix cross-check.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectivityReport {
    pub verdict: RangeVerdict,
    /// numerical nullity of `matrix(W)`
    pub nullity: usize,
    /// atoms `a` with `J(a)μ(a) = 0`
    pub null_atoms: Vec<usize>,
    /// every null atom satisfies `W χ_a = 0`
    pub null_atoms_in_kernel: bool,
}

impl InjectivityReport {
    pub fn agrees_with_oracle(&self) -> bool {
        self.verdict.holds == (self.nullity == 0) && self.null_atoms_in_kernel
    }
}

pub fn injectivity_check(w: &WeightedSumOperator) -> Result<InjectivityReport> {
    injectivity_check_with(w, &Tolerances::default())
}

pub fn injectivity_check_with(w: &WeightedSumOperator, tol: &Tolerances) -> Result<InjectivityReport> {
    w.require_hilbert()?;
    w.require_disjoint()?;
    let j = w.compute_j(2.0)?;
    let jmax = j.max();
    let cut = tol.cut(jmax);
    let jmin = j.values.iter().copied().fold(f64::INFINITY, f64::min);
    let holds = jmax > 0.0 && jmin > cut;
    let null_atoms: Vec<usize> = (0..j.values.len())
        .filter(|&a| j.values[a] * w.space().mass(a) <= cut * w.space().mass(a))
        .collect();
    let mut in_kernel = true;
    for &a in &null_atoms {
        let image = w.apply(&w.space().indicator(&[a]))?;
        in_kernel &= image.max_abs() <= tol.identity() * jmax.sqrt().max(1.0);
    }
    let nullity = oracle::nullity(&w.matrix(), tol.rank());

    let mut verdict = RangeVerdict {
        criterion: CriterionId::T2_10,
        holds,
        margin: jmin,
        witness: None,
        notes: String::new(),
        quantities: Default::default(),
        trends: Default::default(),
    };
    verdict.quantities.insert("min_j".into(), jmin);
    verdict.quantities.insert("nullity".into(), nullity as f64);
    if !null_atoms.is_empty() {
        verdict.witness = Some(Witness::Atoms(null_atoms.clone()));
        verdict.notes = "Atoms with J(a) = 0 lie in ker W.".into();
    }
    Ok(InjectivityReport {
        verdict,
        nullity,
        null_atoms,
        null_atoms_in_kernel: in_kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{max_abs, CMatrix};
    use crate::{Exponent, FiniteMeasureSpace, SelfMap, Term};

    const TWO: Exponent = Exponent::Finite(2.0);

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn single(masses: &[f64], u: &[f64], phi: Vec<usize>) -> WeightedSumOperator {
        let s = FiniteMeasureSpace::from_masses(masses).unwrap();
        let t = Term::new(s.real_function(u).unwrap(), SelfMap::new(&s, phi).unwrap());
        WeightedSumOperator::new(s, vec![t], TWO, TWO).unwrap()
    }

    #[test]
    fn three_cycle() {
        let w = single(&[1.0, 2.0, 3.0], &[1.0; 3], vec![1, 2, 0]);
        let inv = periodic_invertibility(&w).unwrap();
        assert_eq!(inv.period, 3);
        assert_eq!(inv.v.values(), &[c(1.0); 3]);
        assert!(inv.invertible);
        assert!(max_abs(&(oracle::power(&w.matrix(), 3) - CMatrix::identity(3, 3))) < 1e-12);

        // the inverse of f ↦ f∘φ is f ↦ f∘φ⁻¹
        let g = w.space().real_function(&[1.0, 2.0, 3.0]).unwrap();
        let f = apply_inverse(&w, &g).unwrap();
        assert_eq!(f.values(), &[c(3.0), c(1.0), c(2.0)]);
    }

    #[test]
    fn weighted_swap() {
        let w = single(&[1.0, 1.0], &[2.0, 0.5], vec![1, 0]);
        let inv = periodic_invertibility(&w).unwrap();
        assert_eq!(inv.period, 2);
        assert_eq!(inv.v.values(), &[c(1.0), c(1.0)]);
        assert!(inv.invertible);
        let g = w.space().real_function(&[5.0, -1.0]).unwrap();
        let f = apply_inverse(&w, &g).unwrap();
        assert_eq!(f, w.apply(&g).unwrap());
        assert_eq!(w.apply(&f).unwrap(), g);
    }

    #[test]
    fn zero_on_a_fixed_point() {
        let w = single(&[1.0, 1.0], &[0.0, 3.0], vec![0, 1]);
        let inv = periodic_invertibility(&w).unwrap();
        assert!(!inv.invertible);
        assert!(matches!(apply_inverse(&w, &w.space().zero()), Err(Error::NotInvertible)));
    }

    #[test]
    fn aperiodic_and_cells_rejected() {
        let w = single(&[1.0, 1.0], &[1.0, 1.0], vec![0, 0]);
        assert!(matches!(periodic_invertibility(&w), Err(Error::Aperiodic { term: 0 })));
        let s = FiniteMeasureSpace::new(vec![crate::Atom::cell("b", 1.0, "B")]).unwrap();
        let t = Term::new(s.constant(c(1.0)), SelfMap::identity(&s));
        let w = WeightedSumOperator::new(s, vec![t], TWO, TWO).unwrap();
        assert!(matches!(periodic_invertibility(&w), Err(Error::Precondition(_))));
    }

    #[test]
    fn support_leaving_orbit_is_a_hypothesis_failure() {
        // disjoint supports, but the orbits of each φᵢ leave the support of uᵢ
        let s = FiniteMeasureSpace::from_masses(&[1.0, 1.0]).unwrap();
        let swap = SelfMap::new(&s, vec![1, 0]).unwrap();
        let w = WeightedSumOperator::new(
            s.clone(),
            vec![
                Term::new(s.real_function(&[2.0, 0.0]).unwrap(), swap.clone()),
                Term::new(s.real_function(&[0.0, 3.0]).unwrap(), swap),
            ],
            TWO,
            TWO,
        )
        .unwrap();
        assert!(w.disjoint_supports());
        let err = periodic_invertibility(&w).unwrap_err();
        assert!(matches!(err, Error::PowerNotMultiplication { period: 2, .. }), "{err}");
        assert!(err.is_hypothesis_failure());
    }

    #[test]
    fn spectral_examples() {
        let s = FiniteMeasureSpace::from_masses(&[1.0, 1.0, 1.0]).unwrap();
        let konst = spectral_measure(&s.constant(c(2.5)));
        assert_eq!(konst.atom_projector(c(2.5)), Projector::identity(3));
        assert!(konst.projector(|z| z != c(2.5)).is_zero());

        let v = s.real_function(&[1.0, 2.0, 1.0]).unwrap();
        let e = spectral_measure(&v);
        assert_eq!(e.atom_projector(c(1.0)).diag, vec![true, false, true]);
        assert_eq!(e.atom_projector(c(2.0)).diag, vec![false, true, false]);
        assert_eq!(e.reconstruct(), v.values());
        assert!(e.atom_projector(c(1.0)).compose(&e.atom_projector(c(2.0))).is_zero());
        assert_eq!(
            e.atom_projector(c(1.0)).checked_sum(&e.atom_projector(c(2.0))),
            Some(Projector::identity(3))
        );
        assert_eq!(e.projector(|_| true), Projector::identity(3));
    }

    #[test]
    fn injectivity_examples() {
        let swap = single(&[1.0, 1.0], &[2.0, 3.0], vec![1, 0]);
        let r = injectivity_check(&swap).unwrap();
        assert!(r.verdict.holds && r.nullity == 0 && r.agrees_with_oracle());

        let konst = single(&[1.0, 1.0], &[1.0, 1.0], vec![0, 0]);
        let r = injectivity_check(&konst).unwrap();
        assert!(!r.verdict.holds);
        assert_eq!(r.nullity, 1);
        assert_eq!(r.null_atoms, vec![1]);
        assert!(r.agrees_with_oracle());

        let s = FiniteMeasureSpace::from_masses(&[1.0, 1.0]).unwrap();
        let zero = WeightedSumOperator::zero(s, TWO, TWO);
        let r = injectivity_check(&zero).unwrap();
        assert!(!r.verdict.holds && r.nullity == 2 && r.agrees_with_oracle());
    }
}
