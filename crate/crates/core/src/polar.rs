//! Polar decomposition `W = V M_√J` on `L²` under disjoint weight supports.
//!
//! `V(g) = Σᵢ uᵢ ((χ_B g / √J) ∘ φᵢ)` with `B = Coz J₂`; `V` is a partial isometry
//! with initial space `L²(B)`.

use num_complex::Complex64;

use crate::oracle::{self, CMatrix};
use crate::{PFunction, Result, Term, Tolerances, WeightedSumOperator};

#[derive(Clone, Debug, PartialEq)]
pub struct PolarParts {
    terms: Vec<Term>,
    masses: Vec<f64>,
    /// `√J₂`, the multiplier of `|W|`
    pub abs_w: Vec<f64>,
    /// `Coz J₂`
    pub support: Vec<usize>,
    in_support: Vec<bool>,
    space: crate::measure_space::SpaceId,
}

impl PolarParts {
    /// `V g`.
    pub fn apply_v(&self, g: &PFunction) -> Result<PFunction> {
        if g.space_id() != self.space {
            return Err(crate::Error::SpaceMismatch);
        }
        // (χ_B g / √J) first, then the weighted compositions
        let scaled: Vec<Complex64> = (0..g.len())
            .map(|a| {
                if self.in_support[a] {
                    g.get(a) / self.abs_w[a]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
        for term in &self.terms {
            for (x, slot) in out.iter_mut().enumerate() {
                *slot += term.weight.get(x) * scaled[term.map.at(x)];
            }
        }
        Ok(PFunction::from_parts(self.space, out))
    }

    /// `|W| f = √J · f`.
    pub fn apply_abs(&self, f: &PFunction) -> Result<PFunction> {
        if f.space_id() != self.space {
            return Err(crate::Error::SpaceMismatch);
        }
        Ok(PFunction::from_parts(
            self.space,
            f.values()
                .iter()
                .zip(&self.abs_w)
                .map(|(z, r)| z * *r)
                .collect(),
        ))
    }

    /// Matrix of `V` in orthonormal coordinates, assembled column by column from
    /// [`PolarParts::apply_v`] on the basis `χ_a / √μ(a)`.
    pub fn v_matrix(&self) -> CMatrix {
        let n = self.masses.len();
        let mut mat = CMatrix::zeros(n, n);
        for a in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[a] = Complex64::new(1.0 / self.masses[a].sqrt(), 0.0);
            let image = self
                .apply_v(&PFunction::from_parts(self.space, e))
                .expect("same space");
            for b in 0..n {
                mat[(b, a)] = image.get(b) * self.masses[b].sqrt();
            }
        }
        mat
    }

    pub fn abs_matrix(&self) -> CMatrix {
        oracle::diag_real(&self.abs_w)
    }

    /// Orthogonal projection onto `L²(B)` as a 0/1 diagonal matrix.
    pub fn support_projection(&self) -> CMatrix {
        oracle::diag_real(
            &self
                .in_support
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect::<Vec<_>>(),
        )
    }
}

pub fn polar_decomposition(w: &WeightedSumOperator) -> Result<PolarParts> {
    polar_decomposition_with(w, &Tolerances::default())
}

pub fn polar_decomposition_with(w: &WeightedSumOperator, tol: &Tolerances) -> Result<PolarParts> {
    w.require_hilbert()?;
    w.require_disjoint()?;
    let j = w.compute_j(2.0)?;
    let support = j.cozero(tol.relative);
    let mut in_support = vec![false; j.values.len()];
    for &a in &support {
        in_support[a] = true;
    }
    let abs_w = j
        .values
        .iter()
        .zip(&in_support)
        .map(|(&x, &b)| if b { x.sqrt() } else { 0.0 })
        .collect();
    Ok(PolarParts {
        terms: w.terms().to_vec(),
        masses: w.space().masses().to_vec(),
        abs_w,
        support,
        in_support,
        space: w.space().id(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialIsometryResiduals {
    /// `‖V*V − P_B‖`
    pub projection: f64,
    /// `‖(V*V)² − V*V‖`
    pub idempotence: f64,
    /// `trace(V*V)`, which should equal `|B|`
    pub trace: f64,
    /// `max_{a ∈ B} |‖V e_a‖ − 1|` and `max_{a ∉ B} ‖V e_a‖`
    pub isometry: f64,
}

impl PartialIsometryResiduals {
    pub fn max(&self) -> f64 {
        self.projection.max(self.idempotence).max(self.isometry)
    }
}

pub fn verify_partial_isometry(parts: &PolarParts) -> PartialIsometryResiduals {
    let v = parts.v_matrix();
    let gram = v.adjoint() * &v;
    let projection = oracle::max_abs(&(&gram - parts.support_projection()));
    let idempotence = oracle::max_abs(&(&gram * &gram - &gram));
    let trace = gram.trace().re;
    let isometry = (0..v.ncols())
        .map(|a| {
            let norm = v.column(a).norm();
            if parts.in_support[a] {
                (norm - 1.0).abs()
            } else {
                norm
            }
        })
        .fold(0.0, f64::max);
    PartialIsometryResiduals {
        projection,
        idempotence,
        trace,
        isometry,
    }
}

/// `‖W − V·M_√J‖` in max-entry norm.
pub fn factorization_residual(w: &WeightedSumOperator, parts: &PolarParts) -> f64 {
    oracle::max_abs(&(w.matrix() - parts.v_matrix() * parts.abs_matrix()))
}

/// Matrix polar decomposition from the eigendecomposition of `W*W`.
#[derive(Clone, Debug, PartialEq)]
pub struct OraclePolar {
    pub u: CMatrix,
    pub p: CMatrix,
}

pub fn oracle_polar(w: &WeightedSumOperator) -> Result<OraclePolar> {
    oracle_polar_with(w, &Tolerances::default())
}

pub fn oracle_polar_with(w: &WeightedSumOperator, tol: &Tolerances) -> Result<OraclePolar> {
    w.require_hilbert()?;
    let m = w.matrix();
    let gram = m.adjoint() * &m;
    let (p, p_pinv) = oracle::psd_sqrt(&gram, tol.relative);
    Ok(OraclePolar { u: m * p_pinv, p })
}

/// Residuals comparing the formula factors against the oracle factors.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarCrossCheck {
    /// `‖W − U P‖`
    pub oracle_factorization: f64,
    /// `‖P − M_√J‖`
    pub abs_agreement: f64,
    /// `‖U P_B − V‖`
    pub isometry_agreement: f64,
}

pub fn cross_check(w: &WeightedSumOperator, parts: &PolarParts, oracle: &OraclePolar) -> PolarCrossCheck {
    let m = w.matrix();
    PolarCrossCheck {
        oracle_factorization: oracle::max_abs(&(&m - &oracle.u * &oracle.p)),
        abs_agreement: oracle::max_abs(&(&oracle.p - parts.abs_matrix())),
        isometry_agreement: oracle::max_abs(&(&oracle.u * parts.support_projection() - parts.v_matrix())),
    }
}
