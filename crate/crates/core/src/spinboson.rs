//! Generalized spin-boson model
//! `H(B,v) = A⊗1 + 1⊗dΓ(ω) + B⊗a†(v) + B*⊗a(v)` on `𝒮 ⊗ 𝓕`.
//!
//! Product states are stored spin-major: index `s * dim(𝓕) + f`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::convergence::{resolvent_distance, DistanceMode, EmbeddedOperatorFamily};
use crate::doi::{spectral_decompose, DoiKernel, SpectralDecomposition, DEFAULT_TOL_EIG};
use crate::dressing::{dress_lower, raising_loss_from_grades, MollifiedCheck, RenormMetric};
use crate::eigen::{lowest_eigenpairs, SolverOptions};
use crate::error::{Error, Result};
use crate::fock::{annihilator, creator, mode_annihilator, FockBasis, FockVector};
use crate::linalg::{
    adjoint_matmul, conjugate_gradient, expm, hermiticity_defect, inner, kron, matmul, max_abs, norm, spectral_norm, ONE, ZERO,
};
use crate::modes::{vhm_energy_shift, ModeSet, OneParticleVector};
use crate::sparse::CsrMatrix;
use crate::vhm::free_hamiltonian;

/// Default cap on the spin dimension.
pub const DEFAULT_SPIN_CAP: usize = 8;

pub fn pauli_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

#[derive(Debug, Clone)]
pub struct SpinSpace {
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
    pub dec_b: SpectralDecomposition,
}

impl SpinSpace {
    pub fn new(a: DMatrix<Complex64>, b: DMatrix<Complex64>) -> Result<Self> {
        Self::with_options(a, b, DEFAULT_TOL_EIG, DEFAULT_SPIN_CAP)
    }

    pub fn with_options(a: DMatrix<Complex64>, b: DMatrix<Complex64>, tol_eig: f64, max_dim: usize) -> Result<Self> {
        let s = a.nrows();
        if !a.is_square() || b.nrows() != s || !b.is_square() {
            return Err(Error::Shape("spin matrices A and B must be square of equal size".into()));
        }
        if s == 0 || s > max_dim {
            return Err(Error::Config(format!("spin dimension {s} outside 1..={max_dim}")));
        }
        let defect = hermiticity_defect(&a);
        if defect > 1e-12 * max_abs(&a).max(1.0) {
            return Err(Error::NotHermitian { defect });
        }
        let dec_b = spectral_decompose(&b, tol_eig)?;
        Ok(SpinSpace { a, b, dec_b })
    }

    /// `A = σ_z`, `B = σ_x`.
    pub fn standard() -> Self {
        Self::new(pauli_z(), pauli_x()).expect("Pauli matrices are valid")
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Coefficients on the spin-major product basis.
#[derive(Debug, Clone)]
pub struct SpinBosonState {
    pub spin_dim: usize,
    pub basis: Arc<FockBasis>,
    pub coeffs: Vec<Complex64>,
}

impl SpinBosonState {
    pub fn new(spin_dim: usize, basis: Arc<FockBasis>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != spin_dim * basis.dim() {
            return Err(Error::Shape(format!(
                "{} coefficients for spin dimension {spin_dim} and Fock dimension {}",
                coeffs.len(),
                basis.dim()
            )));
        }
        Ok(SpinBosonState { spin_dim, basis, coeffs })
    }

    /// `ψ ⊗ Ξ`.
    pub fn product(psi: &[Complex64], xi: &FockVector) -> Self {
        let coeffs = psi.iter().flat_map(|p| xi.coeffs.iter().map(move |x| p * x)).collect();
        SpinBosonState { spin_dim: psi.len(), basis: xi.basis.clone(), coeffs }
    }

    /// Norms of the boson-number components.
    pub fn grade_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.basis.cap() + 1];
        let d = self.basis.dim();
        for (i, c) in self.coeffs.iter().enumerate() {
            sq[self.basis.grade(i % d)] += c.norm_sqr();
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    pub fn max_grade(&self) -> usize {
        let d = self.basis.dim();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(|(i, _)| self.basis.grade(i % d))
            .max()
            .unwrap_or(0)
    }
}

fn spin_sparse(m: &DMatrix<Complex64>) -> CsrMatrix {
    CsrMatrix::from_dense(m)
}

/// `1 ⊗ X`.
fn lift_fock(s: usize, x: &CsrMatrix) -> CsrMatrix {
    CsrMatrix::kron(&CsrMatrix::identity(s), x)
}

/// `H(B,v)` as a sparse Hermitian matrix.
pub fn assemble_sb(spin: &SpinSpace, v: &OneParticleVector, modes: &ModeSet, basis: &Arc<FockBasis>) -> Result<CsrMatrix> {
    let s = spin.dim();
    let free = free_hamiltonian(modes, basis)?;
    let a = annihilator(v, basis)?;
    let ad = creator(v, basis)?;
    let h = CsrMatrix::kron(&spin_sparse(&spin.a), &CsrMatrix::identity(basis.dim()))
        .add(&lift_fock(s, &free.matrix))?
        .add(&CsrMatrix::kron(&spin_sparse(&spin.b), &ad.matrix))?
        .add(&CsrMatrix::kron(&spin_sparse(&spin.b.adjoint()), &a.matrix))?;
    let defect = h.hermiticity_defect();
    if defect > 1e-12 * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    Ok(h)
}

fn truncated_exp(x: &CsrMatrix, terms: usize) -> Result<CsrMatrix> {
    let mut total = CsrMatrix::identity(x.nrows());
    let mut term = total.clone();
    for k in 1..=terms {
        term = term.matmul(x)?.scale(Complex64::new(1.0 / k as f64, 0.0));
        if term.nnz() == 0 {
            break;
        }
        total = total.add(&term)?;
    }
    Ok(total)
}

/// `e^{B*⊗a(g)} = Σ_k (B*)^k ⊗ a(g)^k / k!`, exact on the truncated space.
pub fn sb_dress_lower(spin: &SpinSpace, g: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<CsrMatrix> {
    let x = CsrMatrix::kron(&spin_sparse(&spin.b.adjoint()), &annihilator(g, basis)?.matrix);
    truncated_exp(&x, basis.cap())
}

/// `U_{B,g,g2} = e^{B*⊗a(g - g2)}`.
pub fn sb_transfer(spin: &SpinSpace, g: &OneParticleVector, g2: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<CsrMatrix> {
    sb_dress_lower(spin, &(g - g2), basis)
}

/// `e^{B⊗a†(g)}` truncated at the cap.
pub fn sb_raise(spin: &SpinSpace, g: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<CsrMatrix> {
    let x = CsrMatrix::kron(&spin_sparse(&spin.b), &creator(g, basis)?.matrix);
    truncated_exp(&x, basis.cap())
}

/// Metric `G_{B,g} = D* D` of the spin-boson dressing.
pub fn sb_metric(spin: &SpinSpace, g: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<RenormMetric> {
    let d = sb_dress_lower(spin, g, basis)?;
    let dinv = sb_dress_lower(spin, &g.scale(-ONE), basis)?;
    let mut m = RenormMetric::from_dressing(d, dinv)?;
    m.g = Some(g.clone());
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinKernel {
    /// `χ_g` for a square-integrable configuration.
    Regular,
    /// Diagonal indicator, the limit of a non-square-integrable configuration.
    Singular,
}

impl SpinKernel {
    pub fn doi_kernel(self, dec: &SpectralDecomposition, gnorm2: f64) -> DoiKernel {
        match self {
            SpinKernel::Regular => DoiKernel::ChiRegular { gnorm2 },
            SpinKernel::Singular => DoiKernel::chi_singular(dec),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpinForm {
    /// Matrix `F` of the renormalized form: `𝔞^ren(Ψ, Φ) = Ψ* F Φ`.
    pub form: DMatrix<Complex64>,
    /// `G^{-1} F`, the operator on 𝓑_{B,g}.
    pub operator: DMatrix<Complex64>,
}

/// Renormalized spin matrix `A(B,v)_g`: the form
/// `Σ_{λ,μ} χ(λ,μ) ⟨e^{conj(μ)a(g)}Ξ, e^{conj(λ)a(g)}Θ⟩ ⟨E(λ)ψ, A E(μ)φ⟩`
/// turned into an operator by a solve against the metric.
pub fn renorm_spin_matrix(
    spin: &SpinSpace,
    g: &OneParticleVector,
    kernel: SpinKernel,
    basis: &Arc<FockBasis>,
    metric: &RenormMetric,
) -> Result<SpinForm> {
    let dec = &spin.dec_b;
    let chi = kernel.doi_kernel(dec, g.norm2());
    let dressings: Vec<DMatrix<Complex64>> = dec
        .eigenvalues
        .iter()
        .map(|&l| dress_lower(&g.scale(l), basis).map(|d| d.to_dense()))
        .collect::<Result<_>>()?;
    let n = spin.dim() * basis.dim();
    let mut form = DMatrix::zeros(n, n);
    for (i, (li, pi)) in dec.eigenvalues.iter().zip(&dec.projections).enumerate() {
        for (j, (mj, pj)) in dec.eigenvalues.iter().zip(&dec.projections).enumerate() {
            let w = chi.eval(*li, *mj);
            if w == ZERO {
                continue;
            }
            let block = pi * &spin.a * pj;
            if max_abs(&block) == 0.0 {
                continue;
            }
            let fock = dressings[j].adjoint() * &dressings[i];
            form += kron(&(block * w), &fock);
        }
    }
    let operator = metric.solve(&form);
    Ok(SpinForm { form, operator })
}

/// `U_{B,0,g} (T⊗1) U_{B,g,0} = D^{-1} (T⊗1) D`.
pub fn dressed_diag(spin: &SpinSpace, t: &DMatrix<Complex64>, g: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<DMatrix<Complex64>> {
    let d = sb_dress_lower(spin, g, basis)?;
    let dinv = sb_dress_lower(spin, &g.scale(-ONE), basis)?;
    let lifted = CsrMatrix::kron(&spin_sparse(t), &CsrMatrix::identity(basis.dim()));
    Ok(dinv.matmul(&lifted)?.matmul(&d)?.to_dense())
}

#[derive(Debug, Clone)]
pub struct RenormalizedSb {
    pub metric: RenormMetric,
    pub spin_form: SpinForm,
    /// `H_ren(B,v)_g` on 𝓑_{B,g} in the standard basis.
    pub h_ren: DMatrix<Complex64>,
    /// Whitened `H_ren`, Hermitian in the standard metric.
    pub whitened: DMatrix<Complex64>,
    /// `1⊗dΓ(ω) + D^{-*} F D^{-1}` on 𝓑₀.
    pub dressed: DMatrix<Complex64>,
}

/// `H_ren(B,v)_g = A(B,v)_g + U_{B,0,g}(1⊗dΓ(ω))U_{B,g,0}` and its dressed form.
pub fn renormalized_sb(
    spin: &SpinSpace,
    g: &OneParticleVector,
    kernel: SpinKernel,
    modes: &ModeSet,
    basis: &Arc<FockBasis>,
) -> Result<RenormalizedSb> {
    let metric = sb_metric(spin, g, basis)?;
    let spin_form = renorm_spin_matrix(spin, g, kernel, basis, &metric)?;
    let free = lift_fock(spin.dim(), &free_hamiltonian(modes, basis)?.matrix);
    let free_ren = metric.inverse_dressing.matmul(&free)?.matmul(&metric.dressing)?.to_dense();
    let h_ren = &spin_form.operator + free_ren;
    let whitened = metric.whiten(&h_ren);
    let dinv = metric.inverse_dressing.to_dense();
    let dressed = free.to_dense() + matmul(&adjoint_matmul(&dinv, &spin_form.form), &dinv);
    Ok(RenormalizedSb { metric, spin_form, h_ren, whitened, dressed })
}

#[derive(Debug, Clone, Copy)]
pub struct EnergyRenormPoint {
    /// Lowest eigenvalue of `H(B,v) + ||v/√ω||² B*B⊗1`.
    pub e0: f64,
    /// Norm resolvent distance to the last member at the given shift.
    pub gap: f64,
}

/// `H(B,v) + ||v/√ω||² B*B⊗1`.
pub fn energy_renormalized_sb(spin: &SpinSpace, v: &OneParticleVector, modes: &ModeSet, basis: &Arc<FockBasis>) -> Result<CsrMatrix> {
    let h = assemble_sb(spin, v, modes, basis)?;
    let shift = vhm_energy_shift(v, modes)?;
    let btb = CsrMatrix::kron(&spin_sparse(&(spin.b.adjoint() * &spin.b)), &CsrMatrix::identity(basis.dim()));
    h.add_scaled(&btb, Complex64::new(shift, 0.0))
}

/// Energy-renormalized spin-boson Hamiltonians along a sequence of form
/// factors on one grid, with resolvent distances to the last element.
pub fn energy_renorm_sb(
    spin: &SpinSpace,
    vs: &[OneParticleVector],
    modes: &ModeSet,
    basis: &Arc<FockBasis>,
    z: Complex64,
    opts: &SolverOptions,
) -> Result<Vec<EnergyRenormPoint>> {
    if vs.is_empty() {
        return Err(Error::Config("empty form-factor sequence".into()));
    }
    let hs: Vec<CsrMatrix> = vs
        .iter()
        .map(|v| energy_renormalized_sb(spin, v, modes, basis))
        .collect::<Result<_>>()?;
    let e0s: Vec<f64> = hs
        .iter()
        .map(|h| lowest_eigenpairs(h, 1, opts).map(|p| p.values[0]))
        .collect::<Result<_>>()?;
    let family = EmbeddedOperatorFamily::on_common_space(hs.iter().map(|h| h.to_dense()).collect(), hs.len() - 1)?;
    let gaps = resolvent_distance(&family, z, &DistanceMode::Norm)?;
    Ok(e0s.into_iter().zip(gaps).map(|(e0, gap)| EnergyRenormPoint { e0, gap }).collect())
}

#[derive(Debug, Clone)]
pub struct PullThrough {
    /// `r_i = ||a_i Ψ + v_i (H - λ₀ + ω_i)^{-1} (B⊗1) Ψ||` per mode.
    pub residuals: Vec<f64>,
    pub max: f64,
    /// `||H Ψ - λ₀ Ψ||` of the supplied pair.
    pub eigen_residual: f64,
    /// `max / (tol + eigen_residual)`, the constant in the contract.
    pub constant: f64,
}

/// Pull-through residuals of an eigenpair `(λ₀, Ψ)` of `H(B,v)`.
#[allow(clippy::too_many_arguments)]
pub fn pull_through_residual(
    spin: &SpinSpace,
    v: &OneParticleVector,
    modes: &ModeSet,
    basis: &Arc<FockBasis>,
    h: &CsrMatrix,
    lambda0: f64,
    psi: &[Complex64],
    tol: f64,
) -> Result<PullThrough> {
    let mut r = h.matvec(psi);
    for (ri, p) in r.iter_mut().zip(psi) {
        *ri -= p * lambda0;
    }
    let eigen_residual = norm(&r);
    let allowed = 10.0 * tol.max(1e-14) * (lambda0.abs() + 1.0) * norm(psi);
    if eigen_residual > allowed {
        return Err(Error::Precondition(format!(
            "eigenpair residual {eigen_residual:e} exceeds {allowed:e}; not a converged pair"
        )));
    }
    let s = spin.dim();
    let b_psi = CsrMatrix::kron(&spin_sparse(&spin.b), &CsrMatrix::identity(basis.dim())).matvec(psi);
    let omegas = modes.omegas();
    let mut residuals = Vec::with_capacity(modes.len());
    for (i, &w) in omegas.iter().enumerate() {
        let ai = lift_fock(s, &mode_annihilator(i, basis)?.matrix);
        let mut out = ai.matvec(psi);
        if v.0[i] != ZERO {
            let shifted = |x: &[Complex64]| {
                let mut y = h.matvec(x);
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi += xi * (w - lambda0);
                }
                y
            };
            let x = conjugate_gradient(shifted, &b_psi, 1e-13, 20 * psi.len().max(100))?;
            for (o, xi) in out.iter_mut().zip(&x) {
                *o += v.0[i] * xi;
            }
        }
        residuals.push(norm(&out));
    }
    let max = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(PullThrough { constant: max / (tol + eigen_residual), residuals, max, eigen_residual })
}

/// Defects of the three operator identities behind the spin-boson
/// diagonalization, evaluated on `Ψ`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityDefects {
    /// `(1⊗dΓ(ω)) e^{B⊗a†(g)} = e^{B⊗a†(g)} (1⊗dΓ(ω) + B⊗a†(ωg))`, all grades.
    pub free: f64,
    /// `(B⊗a†(v) + B*⊗a(v)) e^{B⊗a†(g)} = e^{B⊗a†(g)} (B⊗a†(v) + B*⊗a(v) + ⟨v,g⟩ B*B⊗1)`,
    /// grades below the cap.
    pub coupling: f64,
    /// `e^{B*⊗a(g)} e^{B⊗a†(g)} = e^{B*B ||g||²} e^{B⊗a†(g)} e^{B*⊗a(g)}`,
    /// grades up to `exchange_grade`.
    pub exchange: f64,
}

fn max_on_grades(x: &[Complex64], basis: &FockBasis, max_grade: usize) -> f64 {
    let d = basis.dim();
    x.iter()
        .enumerate()
        .filter(|(i, _)| basis.grade(i % d) <= max_grade)
        .map(|(_, c)| c.norm())
        .fold(0.0, f64::max)
}

pub fn identity_defects(
    spin: &SpinSpace,
    v: &OneParticleVector,
    g: &OneParticleVector,
    modes: &ModeSet,
    basis: &Arc<FockBasis>,
    psi: &SpinBosonState,
    exchange_grade: usize,
) -> Result<IdentityDefects> {
    let cap = basis.cap();
    if cap == 0 || psi.max_grade() + 1 > cap {
        return Err(Error::Precondition(format!(
            "state has grade {} but the identities need grades below N_max = {cap}",
            psi.max_grade()
        )));
    }
    let s = spin.dim();
    let x = &psi.coeffs;
    let raise = sb_raise(spin, g, basis)?;
    let sub = |a: Vec<Complex64>, b: Vec<Complex64>| -> Vec<Complex64> { a.into_iter().zip(b).map(|(p, q)| p - q).collect() };

    let free = lift_fock(s, &free_hamiltonian(modes, basis)?.matrix);
    let omega_g = g.mul_real(&modes.omegas());
    let b_sp = spin_sparse(&spin.b);
    let bd_sp = spin_sparse(&spin.b.adjoint());
    let shift_free = free.add(&CsrMatrix::kron(&b_sp, &creator(&omega_g, basis)?.matrix))?;
    let lhs = free.matvec(&raise.matvec(x));
    let rhs = raise.matvec(&shift_free.matvec(x));
    let d_free = max_on_grades(&sub(lhs, rhs), basis, cap);

    let coupling = CsrMatrix::kron(&b_sp, &creator(v, basis)?.matrix)
        .add(&CsrMatrix::kron(&bd_sp, &annihilator(v, basis)?.matrix))?;
    let btb = CsrMatrix::kron(&spin_sparse(&(spin.b.adjoint() * &spin.b)), &CsrMatrix::identity(basis.dim()));
    let shifted_coupling = coupling.add_scaled(&btb, v.inner(g))?;
    let lhs = coupling.matvec(&raise.matvec(x));
    let rhs = raise.matvec(&shifted_coupling.matvec(x));
    let d_coupling = max_on_grades(&sub(lhs, rhs), basis, cap - 1);

    let lower = sb_dress_lower(spin, g, basis)?;
    let spin_exp = expm(&(spin.b.adjoint() * &spin.b * Complex64::new(g.norm2(), 0.0)));
    let spin_factor = CsrMatrix::kron(&spin_sparse(&spin_exp), &CsrMatrix::identity(basis.dim()));
    let lhs = lower.matvec(&raise.matvec(x));
    let rhs = spin_factor.matvec(&raise.matvec(&lower.matvec(x)));
    let d_exchange = max_on_grades(&sub(lhs, rhs), basis, exchange_grade.min(cap));

    Ok(IdentityDefects { free: d_free, coupling: d_coupling, exchange: d_exchange })
}

/// Spin-boson analog of the mollified inner-product check: compares
/// `⟨Ψ, Φ⟩_{B,g}` with `⟨N e^{B⊗a†(g)}Ψ, N e^{B⊗a†(g)}Φ⟩`, `N = e^{-B*B||g||²/2}⊗1`.
pub fn sb_mollified_check(
    psi: &SpinBosonState,
    phi: &SpinBosonState,
    spin: &SpinSpace,
    g: &OneParticleVector,
    metric: &RenormMetric,
) -> Result<MollifiedCheck> {
    let basis = &psi.basis;
    let budget = basis.cap() / 2;
    if psi.max_grade() > budget || phi.max_grade() > budget {
        return Err(Error::Precondition(format!("states must lie on grades <= N_max/2 = {budget}")));
    }
    let x = g.norm2();
    let raise = sb_raise(spin, g, basis)?;
    let damp = expm(&(spin.b.adjoint() * &spin.b * Complex64::new(-0.5 * x, 0.0)));
    let n = CsrMatrix::kron(&spin_sparse(&damp), &CsrMatrix::identity(basis.dim()));
    let lhs = metric.inner(&psi.coeffs, &phi.coeffs);
    let rhs = inner(&n.matvec(&raise.matvec(&psi.coeffs)), &n.matvec(&raise.matvec(&phi.coeffs)));
    let xb = x * spectral_norm(&spin.b).powi(2);
    let bound = raising_loss_from_grades(&psi.grade_norms(), basis.cap(), xb)
        * raising_loss_from_grades(&phi.grade_norms(), basis.cap(), xb);
    Ok(MollifiedCheck { lhs, rhs, gap: (lhs - rhs).norm(), bound })
}
