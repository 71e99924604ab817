//! The operator `W = Σᵢ uᵢ C_{φᵢ}`, `(Wf)(x) = Σᵢ uᵢ(x) f(φᵢ(x))`, its matrix
//! realization and the criterion function
//! `J_s = Σᵢ hᵢ Eᵢ(|uᵢ|^s) ∘ φᵢ⁻¹`.

use num_complex::Complex64;

use crate::dynamics::{fiber_partition, pushforward_of_fiber_constant, radon_nikodym};
use crate::measure_space::{
    conditional_expectation, lp_power_integral, weighted_norm, Refinement,
};
use crate::oracle::{self, CMatrix};
use crate::{Error, Exponent, FiniteMeasureSpace, PFunction, Result, SelfMap};

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub weight: PFunction,
    pub map: SelfMap,
}

impl Term {
    pub fn new(weight: PFunction, map: SelfMap) -> Self {
        Term { weight, map }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSumOperator {
    space: FiniteMeasureSpace,
    terms: Vec<Term>,
    p: Exponent,
    q: Exponent,
}

/// `J_s` together with the exponent it was computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionFunction {
    pub values: Vec<f64>,
    pub exponent: f64,
}

impl CriterionFunction {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `Coz J` under the cut `rel · max J`.
    pub fn cozero(&self, rel: f64) -> Vec<usize> {
        let cut = rel * self.max();
        (0..self.values.len())
            .filter(|&a| self.values[a] > cut)
            .collect()
    }

    pub fn to_function(&self, space: &FiniteMeasureSpace) -> Result<PFunction> {
        space.real_function(&self.values)
    }
}

/// Outcome of comparing `W*W` against `M_J`.
#[derive(Clone, Debug, PartialEq)]
pub struct WStarWCheck {
    /// max-entry norm of `W*W − M_J`
    pub residual: f64,
    pub j: CriterionFunction,
    /// whether the disjoint-support hypothesis holds; the contract bound only applies then
    pub disjoint_supports: bool,
}

impl WeightedSumOperator {
    pub fn new(space: FiniteMeasureSpace, terms: Vec<Term>, p: Exponent, q: Exponent) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::NoTerms);
        }
        for term in &terms {
            space.check(term.weight.space_id())?;
            space.check(term.map.space_id())?;
        }
        Ok(WeightedSumOperator { space, terms, p, q })
    }

    /// `W = 0` as the single term `0 · C_id`.
    pub fn zero(space: FiniteMeasureSpace, p: Exponent, q: Exponent) -> Self {
        let term = Term::new(space.zero(), SelfMap::identity(&space));
        WeightedSumOperator {
            space,
            terms: vec![term],
            p,
            q,
        }
    }

    pub fn space(&self) -> &FiniteMeasureSpace {
        &self.space
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn with_exponents(&self, p: Exponent, q: Exponent) -> Self {
        WeightedSumOperator {
            p,
            q,
            ..self.clone()
        }
    }

    pub fn is_hilbert(&self) -> bool {
        self.p == Exponent::Finite(2.0) && self.q == Exponent::Finite(2.0)
    }

    pub(crate) fn require_hilbert(&self) -> Result<()> {
        if self.is_hilbert() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "needs p = q = 2, got p = {}, q = {}",
                self.p, self.q
            )))
        }
    }

    pub(crate) fn require_disjoint(&self) -> Result<()> {
        if self.disjoint_supports() {
            Ok(())
        } else {
            Err(Error::Precondition("weight supports overlap".into()))
        }
    }

    pub fn apply(&self, f: &PFunction) -> Result<PFunction> {
        self.space.check(f.space_id())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.space.len()];
        for term in &self.terms {
            let u = term.weight.values();
            for (x, slot) in out.iter_mut().enumerate() {
                *slot += u[x] * f.get(term.map.at(x));
            }
        }
        Ok(PFunction::from_parts(self.space.id(), out))
    }

    /// Entry `(b, a) = √(μ(b)/μ(a)) Σ_{i: φᵢ(b) = a} uᵢ(b)`.
    pub fn matrix(&self) -> CMatrix {
        let n = self.space.len();
        let m = self.space.masses();
        let mut mat = CMatrix::zeros(n, n);
        for term in &self.terms {
            for b in 0..n {
                let a = term.map.at(b);
                mat[(b, a)] += term.weight.get(b) * (m[b] / m[a]).sqrt();
            }
        }
        mat
    }

    pub fn adjoint_matrix(&self) -> Result<CMatrix> {
        self.require_hilbert()?;
        Ok(self.matrix().adjoint())
    }

    /// Closed form `J_s(a) = Σᵢ μ(a)⁻¹ Σ_{x: φᵢ(x) = a} μ(x)|uᵢ(x)|^s`.
    pub fn compute_j(&self, s: f64) -> Result<CriterionFunction> {
        check_j_exponent(s)?;
        let m = self.space.masses();
        let mut acc = vec![0.0; self.space.len()];
        for term in &self.terms {
            for (x, &mx) in m.iter().enumerate() {
                let w = term.weight.get(x).norm();
                if w != 0.0 {
                    acc[term.map.at(x)] += mx * w.powf(s);
                }
            }
        }
        let values = acc.iter().zip(m).map(|(a, ma)| a / ma).collect();
        Ok(CriterionFunction { values, exponent: s })
    }

    /// The same `J_s` built literally as `Σ hᵢ · (Eᵢ(|uᵢ|^s) ∘ φᵢ⁻¹)`.
    pub fn compute_j_chained(&self, s: f64) -> Result<CriterionFunction> {
        check_j_exponent(s)?;
        let mut acc = vec![0.0; self.space.len()];
        for term in &self.terms {
            let h = radon_nikodym(&self.space, &term.map)?;
            let powered = term.weight.map(|z| Complex64::new(z.norm().powf(s), 0.0));
            let e = conditional_expectation(&self.space, &powered, &fiber_partition(&term.map))?;
            let pushed = pushforward_of_fiber_constant(&e, &term.map)?;
            for (a, slot) in acc.iter_mut().enumerate() {
                *slot += h.get(a).re * pushed.get(a).re;
            }
        }
        Ok(CriterionFunction { values: acc, exponent: s })
    }

    /// `J_q` when `q` is finite.
    pub fn default_j(&self) -> Result<CriterionFunction> {
        match self.q {
            Exponent::Finite(q) => self.compute_j(q),
            Exponent::Infinity => Err(Error::Precondition("J needs a finite target exponent".into())),
        }
    }

    /// `uᵢ(x)·uⱼ(x) = 0` for all atoms and all `i ≠ j`.
    pub fn disjoint_supports(&self) -> bool {
        (0..self.space.len()).all(|x| {
            self.terms
                .iter()
                .filter(|t| t.weight.get(x) != Complex64::new(0.0, 0.0))
                .count()
                <= 1
        })
    }

    /// Compares `W*W` against `M_J` in matrix form. The residual is computed
    /// for any `W`; it is only guaranteed small under disjoint supports.
    pub fn verify_wstar_w_equals_mj(&self) -> Result<WStarWCheck> {
        self.verify_wstar_w_against(self.compute_j(2.0)?)
    }

    pub fn verify_wstar_w_against(&self, j: CriterionFunction) -> Result<WStarWCheck> {
        let mat = self.matrix();
        let gram = self.adjoint_matrix()? * &mat;
        let residual = oracle::max_abs(&(gram - oracle::diag_real(&j.values)));
        Ok(WStarWCheck {
            residual,
            j,
            disjoint_supports: self.disjoint_supports(),
        })
    }

    /// `n^{q−1} ∫ J_q |f|^q dμ − ‖Wf‖_q^q`, nonnegative for every `f`.
    pub fn norm_inequality_residual(&self, f: &PFunction) -> Result<f64> {
        let Exponent::Finite(q) = self.q else {
            return Err(Error::Precondition("needs a finite target exponent".into()));
        };
        let j = self.compute_j(q)?;
        let wf = self.apply(f)?;
        let m = self.space.masses();
        let fq: Vec<f64> = f.abs().iter().map(|a| a.powf(q)).collect();
        let bound: f64 = m.iter().zip(&j.values).zip(&fq).map(|((m, j), f)| m * j * f).sum();
        let n = self.terms.len() as f64;
        Ok(n.powf(q - 1.0) * bound - lp_power_integral(m, &wf.abs(), q))
    }

    /// `‖Wf‖_q`.
    pub fn output_norm(&self, f: &PFunction) -> Result<f64> {
        let wf = self.apply(f)?;
        Ok(weighted_norm(self.space.masses(), &wf.abs(), self.q))
    }

    /// Weights are real and nonnegative.
    pub fn has_nonnegative_weights(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.weight.values().iter().all(|z| z.im == 0.0 && z.re >= 0.0))
    }

    /// Operator transported to the refined space: weights pulled back, maps lifted.
    pub fn refine(&self) -> (WeightedSumOperator, Refinement) {
        let r = self.space.refine();
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                weight: r.pull_back(&t.weight).expect("weight lives on this space"),
                map: t.map.lift(&r),
            })
            .collect();
        let op = WeightedSumOperator {
            space: r.space.clone(),
            terms,
            p: self.p,
            q: self.q,
        };
        (op, r)
    }

    /// Same operator with every cell retagged as a genuine atom.
    pub fn collapse_cells(&self) -> WeightedSumOperator {
        let space = self.space.collapse_cells();
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                weight: space
                    .function(t.weight.values().to_vec())
                    .expect("same atom count"),
                map: SelfMap::new(&space, t.map.targets().to_vec()).expect("same atom count"),
            })
            .collect();
        WeightedSumOperator {
            space,
            terms,
            p: self.p,
            q: self.q,
        }
    }
}

fn check_j_exponent(s: f64) -> Result<()> {
    if s.is_finite() && s >= 1.0 {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange(s))
    }
}
