//! Singular dressing `e^{a(g)}`, the renormalized metric it induces, transfer
//! maps between renormalized spaces and interacting fields.
//!
//! An operator "on 𝓕_g" is stored as a matrix in the standard occupation
//! basis. It is Hermitian for `⟨·,·⟩_g` when `G X` is Hermitian, and its
//! spectrum is computed from the whitened matrix `L* X L^{-*}` with `G = L L*`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{
    annihilator, creator, exp_tail, nilpotent_exp, raising_tail, FockBasis, FockOperator, FockVector,
};
use crate::linalg::{adjoint_matmul, cholesky_lower, inner, solve_lower, solve_lower_adjoint, spectral_norm, ONE};
use crate::modes::OneParticleVector;
use crate::sparse::CsrMatrix;

/// Condition estimate above which the metric is reported as ill conditioned.
pub const CONDITION_WARN: f64 = 1e12;

/// Exact matrix of `e^{a(g)} = Σ_k a(g)^k / k!`; the series stops at the cap.
pub fn dress_lower(g: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<FockOperator> {
    nilpotent_exp(&annihilator(g, basis)?)
}

/// `U_{g,g2} = e^{a(g - g2)}`, mapping 𝓕_g isometrically onto 𝓕_{g2}.
pub fn transfer(g: &OneParticleVector, g2: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<FockOperator> {
    dress_lower(&(g - g2), basis)
}

/// Gram matrix `G = D* D` of a unipotent dressing `D`, with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct RenormMetric {
    pub g: Option<OneParticleVector>,
    pub dressing: CsrMatrix,
    pub inverse_dressing: CsrMatrix,
    pub gram: DMatrix<Complex64>,
    pub chol: DMatrix<Complex64>,
    pub condition_estimate: f64,
}

/// Metric `⟨Ψ, Φ⟩_g = ⟨e^{a(g)}Ψ, e^{a(g)}Φ⟩`.
pub fn renorm_metric(g: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<RenormMetric> {
    let d = dress_lower(g, basis)?;
    let dinv = dress_lower(&g.scale(-ONE), basis)?;
    let mut m = RenormMetric::from_dressing(d.matrix, dinv.matrix)?;
    m.g = Some(g.clone());
    Ok(m)
}

impl RenormMetric {
    /// Builds the metric of an invertible dressing with known inverse.
    pub fn from_dressing(dressing: CsrMatrix, inverse_dressing: CsrMatrix) -> Result<Self> {
        let dd = dressing.to_dense();
        let gram = adjoint_matmul(&dd, &dd);
        let condition_estimate = (spectral_norm(&dd) * spectral_norm(&inverse_dressing.to_dense())).powi(2);
        if condition_estimate > CONDITION_WARN {
            log::warn!("renormalized metric condition estimate {condition_estimate:.3e} exceeds {CONDITION_WARN:e}");
        }
        let chol = cholesky_lower(&gram).ok_or(Error::MetricDegeneracy { condition: condition_estimate })?;
        Ok(RenormMetric { g: None, dressing, inverse_dressing, gram, chol, condition_estimate })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn inner(&self, psi: &[Complex64], phi: &[Complex64]) -> Complex64 {
        inner(&self.dressing.matvec(psi), &self.dressing.matvec(phi))
    }

    /// `det G` from the Cholesky diagonal.
    pub fn det(&self) -> f64 {
        self.chol.diagonal().iter().map(|c| c.norm_sqr()).product()
    }

    /// `L* X L^{-*}`: Hermitian in the standard metric when `X` is Hermitian for `G`.
    pub fn whiten(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let lx = adjoint_matmul(&self.chol, x);
        // (L* X) L^{-*} = (L^{-1} (L* X)*)*
        solve_lower(&self.chol, &lx.adjoint()).adjoint()
    }

    /// `G^{-1} B` through two triangular solves.
    pub fn solve(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        solve_lower_adjoint(&self.chol, &solve_lower(&self.chol, b))
    }

    /// `max |G X - (G X)*|` relative to `max |G X|`.
    pub fn hermiticity_defect(&self, x: &DMatrix<Complex64>) -> f64 {
        let gx = &self.gram * x;
        crate::linalg::hermiticity_defect(&gx) / crate::linalg::max_abs(&gx).max(f64::MIN_POSITIVE)
    }

    /// Isometry `ι = D L^{-*}` from whitened coordinates into the bare Fock space.
    pub fn embedding(&self) -> DMatrix<Complex64> {
        let d = self.dressing.to_dense();
        solve_lower(&self.chol, &d.adjoint()).adjoint()
    }
}

/// Result of comparing the metric with the mollified exponential formula.
#[derive(Debug, Clone, Copy)]
pub struct MollifiedCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub gap: f64,
    /// Rigorous bound on `gap` from the truncation of `e^{a†(g)}`.
    pub bound: f64,
}

fn grade_norms(v: &FockVector) -> Vec<f64> {
    (0..=v.basis.cap())
        .map(|n| v.grade_component(n).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// `Σ_m ||Ψ_m|| sqrt(Σ_{j>N-m} C(m+j, j) x^j/j!)`, bounding the part of
/// `e^{a†(g)}Ψ` lost above the cap.
pub fn raising_loss(psi: &FockVector, x: f64) -> f64 {
    raising_loss_from_grades(&grade_norms(psi), psi.basis.cap(), x)
}

/// [`raising_loss`] from the norms of the grade components.
pub fn raising_loss_from_grades(norms: &[f64], cap: usize, x: f64) -> f64 {
    norms
        .iter()
        .enumerate()
        .filter(|(_, n)| **n > 0.0)
        .map(|(m, n)| n * raising_tail(x, cap, m).sqrt())
        .sum()
}

/// Compares `⟨Ψ, Φ⟩_g` with `⟨e^{a†(g)}Ψ, e^{a†(g)}Φ⟩ / Σ_{n<=N} ||g||^{2n}/n!`.
pub fn mollified_inner_check(
    psi: &FockVector,
    phi: &FockVector,
    g: &OneParticleVector,
    metric: &RenormMetric,
) -> Result<MollifiedCheck> {
    let basis = &psi.basis;
    let budget = basis.cap() / 2;
    for (name, v) in [("psi", psi), ("phi", phi)] {
        if v.max_grade() > budget {
            return Err(Error::Precondition(format!(
                "{name} has grade {} above the excitation budget {budget} = N_max/2",
                v.max_grade()
            )));
        }
    }
    let x = g.norm2();
    let lhs = metric.inner(&psi.coeffs, &phi.coeffs);
    let raise = nilpotent_exp(&creator(g, basis)?)?;
    let tau = exp_tail(x, basis.cap());
    let partial = x.exp() - tau;
    let rhs = inner(&raise.matrix.matvec(&psi.coeffs), &raise.matrix.matvec(&phi.coeffs)) / partial;
    let bound = (lhs.norm() * tau + raising_loss(psi, x) * raising_loss(phi, x)) / partial;
    Ok(MollifiedCheck { lhs, rhs, gap: (lhs - rhs).norm(), bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Position,
    Momentum,
}

/// Interacting field `φ_g(f)` or momentum `π_g(f)` as an operator on 𝓕_g:
/// `e^{-a(g)} (φ_0(f) + √2 Re⟨g,f⟩) e^{a(g)}`, and `π` with `√2 Im⟨g,f⟩`.
pub fn interacting_field(
    g: &OneParticleVector,
    f: &OneParticleVector,
    kind: FieldKind,
    basis: &Arc<FockBasis>,
) -> Result<FockOperator> {
    let a = annihilator(f, basis)?;
    let ad = creator(f, basis)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let overlap = g.inner(f);
    let (free, shift) = match kind {
        FieldKind::Position => (ad.add_scaled(&a, ONE)?.scale(Complex64::new(s, 0.0)), 2f64.sqrt() * overlap.re),
        FieldKind::Momentum => (
            ad.add_scaled(&a, -ONE)?.scale(Complex64::new(0.0, s)),
            2f64.sqrt() * overlap.im,
        ),
    };
    let shifted = free.add_scaled(&FockOperator::identity(basis), Complex64::new(shift, 0.0))?;
    let d = dress_lower(g, basis)?;
    let dinv = dress_lower(&g.scale(-ONE), basis)?;
    let mut op = dinv.compose(&shifted)?.compose(&d)?;
    op.grading = None;
    op.hermitian = false;
    Ok(op)
}

/// `(||g - g2||², e^{-||g - g2||²/2})`.
pub fn representation_distance(g: &OneParticleVector, g2: &OneParticleVector) -> (f64, f64) {
    let gap = (g - g2).norm2();
    (gap, (-0.5 * gap).exp())
}
