//! The van Hove-Miyatake model `H(v) = dΓ(ω) + a†(v) + a(v)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dressing::{dress_lower, renorm_metric, RenormMetric};
use crate::eigen::{lowest_eigenpairs, EigenPairs, SolverOptions};
use crate::error::{Error, Result};
use crate::fock::{
    annihilator, creator, displacement, second_quantization, FockBasis, FockOperator, OneParticleOperator,
};
use crate::linalg::{inner, ZERO};
use crate::modes::{vhm_energy_shift, vhm_ground_config, ModeSet, OneParticleVector};

#[derive(Debug, Clone)]
pub struct VhmModel {
    pub modes: ModeSet,
    pub basis: Arc<FockBasis>,
    pub v: OneParticleVector,
    pub h: FockOperator,
    /// `-||v/√ω||²`.
    pub ground_energy_formula: f64,
}

/// `dΓ(ω)` on the given basis.
pub fn free_hamiltonian(modes: &ModeSet, basis: &Arc<FockBasis>) -> Result<FockOperator> {
    if modes.len() != basis.modes() {
        return Err(Error::Shape(format!("{} grid nodes but {} Fock modes", modes.len(), basis.modes())));
    }
    second_quantization(&OneParticleOperator::Diagonal(modes.omegas()), basis)
}

pub fn assemble_vhm(v: &OneParticleVector, modes: &ModeSet, basis: &Arc<FockBasis>) -> Result<VhmModel> {
    let free = free_hamiltonian(modes, basis)?;
    let coupling = creator(v, basis)?.add_scaled(&annihilator(v, basis)?, Complex64::new(1.0, 0.0))?;
    let mut h = free.add_scaled(&coupling, Complex64::new(1.0, 0.0))?;
    h.grading = None;
    h.hermitian = true;
    let ground_energy_formula = -vhm_energy_shift(v, modes)?;
    Ok(VhmModel { modes: modes.clone(), basis: basis.clone(), v: v.clone(), h, ground_energy_formula })
}

impl VhmModel {
    /// `g = -v/ω`.
    pub fn ground_config(&self) -> Result<OneParticleVector> {
        vhm_ground_config(&self.v, &self.modes)
    }
}

/// Lowest `k` eigenpairs of `H(v)`.
pub fn ground_state(model: &VhmModel, k: usize, opts: &SolverOptions) -> Result<EigenPairs> {
    lowest_eigenpairs(&model.h.matrix, k, opts)
}

#[derive(Debug, Clone, Copy)]
pub struct DiagonalizationCheck {
    /// Largest deviation of `W(g)* H(v) W(g)` from `dΓ(ω) - ||v/√ω||²`
    /// over matrix entries between states of grade at most `budget`.
    pub defect: f64,
    /// Truncation bound the defect must respect.
    pub bound: f64,
    pub budget: usize,
}

/// Verifies the coherent diagonalization of the van Hove model on the
/// sector of grades up to `budget`.
pub fn check_diagonalization(model: &VhmModel, budget: usize) -> Result<DiagonalizationCheck> {
    let basis = &model.basis;
    if budget > basis.cap() {
        return Err(Error::Precondition(format!("budget {budget} exceeds N_max = {}", basis.cap())));
    }
    let g = model.ground_config()?;
    let w = displacement(&g, basis)?;
    let wm = &w.op.matrix;
    let wt = wm.adjoint();
    let omegas = model.modes.omegas();
    let k = basis.dim_up_to(budget);
    let mut defect = 0.0f64;
    for t in 0..k {
        let mut e = vec![ZERO; basis.dim()];
        e[t] = Complex64::new(1.0, 0.0);
        let col = wt.matvec(&model.h.matrix.matvec(&wm.matvec(&e)));
        for (s, value) in col.iter().enumerate().take(k) {
            let mut expected = ZERO;
            if s == t {
                let n: f64 = basis.occupation(t).iter().zip(&omegas).map(|(&n, w)| n as f64 * w).sum();
                expected = Complex64::new(n + model.ground_energy_formula, 0.0);
            }
            defect = defect.max((value - expected).norm());
        }
    }
    let n1 = (basis.cap() + 1) as f64;
    let omega_max = omegas.iter().cloned().fold(0.0, f64::max);
    let scale = omega_max * n1 + 2.0 * model.v.norm() * n1.sqrt() + model.ground_energy_formula.abs();
    let bound = 4.0 * w.tail_bound(budget) * scale;
    Ok(DiagonalizationCheck { defect, bound, budget })
}

/// Renormalized van Hove Hamiltonian on 𝓕_g.
#[derive(Debug, Clone)]
pub struct RenormalizedVhm {
    /// `e^{-a(g)} dΓ(ω) e^{a(g)}` in the standard basis.
    pub raw: FockOperator,
    pub metric: RenormMetric,
    /// Whitened matrix, Hermitian in the standard inner product.
    pub whitened: DMatrix<Complex64>,
}

/// `H_ren(v)_g = U_{0,g} dΓ(ω) U_{g,0}` with `U_{g,0} = e^{a(g)}`.
pub fn renormalized_vhm(g: &OneParticleVector, modes: &ModeSet, basis: &Arc<FockBasis>) -> Result<RenormalizedVhm> {
    let free = free_hamiltonian(modes, basis)?;
    let d = dress_lower(g, basis)?;
    let dinv = dress_lower(&g.scale(Complex64::new(-1.0, 0.0)), basis)?;
    let mut raw = dinv.compose(&free)?.compose(&d)?;
    raw.grading = None;
    let metric = renorm_metric(g, basis)?;
    let whitened = metric.whiten(&raw.to_dense());
    Ok(RenormalizedVhm { raw, metric, whitened })
}

/// `⟨x, c⟩` magnitude helper used for ground-state overlaps.
pub fn overlap(x: &[Complex64], y: &[Complex64]) -> f64 {
    inner(x, y).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, enumerate_basis, FockVector};
    use crate::linalg::{hermitian_eigenvalues, max_abs};
    use crate::modes::{GridKind, Measure};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn custom(omegas: &[f64]) -> ModeSet {
        ModeSet::new(
            Measure::Radial3,
            GridKind::Custom,
            omegas.iter().map(|&w| vec![w]).collect(),
            vec![1.0; omegas.len()],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn free_model() {
        let modes = custom(&[1.0, 2.0]);
        let b = enumerate_basis(2, 4).unwrap();
        let m = assemble_vhm(&OneParticleVector::zeros(2), &modes, &b).unwrap();
        let p = ground_state(&m, 1, &SolverOptions::default()).unwrap();
        assert!(p.values[0].abs() < 1e-14);
        assert!((p.vectors[0][0].re - 1.0).abs() < 1e-12);
        let c = check_diagonalization(&m, 2).unwrap();
        assert_eq!(c.defect, 0.0);
    }

    #[test]
    fn single_mode_ground_energy_and_state() {
        let modes = custom(&[2.0]);
        let b = enumerate_basis(1, 20).unwrap();
        let v = OneParticleVector::from_real(&[1.0]);
        let m = assemble_vhm(&v, &modes, &b).unwrap();
        assert_eq!(m.ground_energy_formula, -0.5);
        let p = ground_state(&m, 1, &SolverOptions::default()).unwrap();
        assert!((p.values[0] + 0.5).abs() < 1e-8);
        let c = coherent_state(&m.ground_config().unwrap(), &b).unwrap();
        assert!(overlap(&p.vectors[0], &c.coeffs) >= 1.0 - 1e-6);
        assert!(p.values[0] >= m.ground_energy_formula - 1e-12);
    }

    #[test]
    fn mode_additivity() {
        let modes = custom(&[1.5, 2.5]);
        let b = enumerate_basis(2, 14).unwrap();
        let v = OneParticleVector::from_real(&[0.6, 0.8]);
        let m = assemble_vhm(&v, &modes, &b).unwrap();
        let p = ground_state(&m, 1, &SolverOptions::default()).unwrap();
        assert!((p.values[0] - (-0.36 / 1.5 - 0.64 / 2.5)).abs() < 1e-8);
    }

    #[test]
    fn degenerate_one_boson_pair() {
        let modes = ModeSet::line_linear(1, 0.0, 2.0, 0.0).unwrap();
        let b = enumerate_basis(2, 3).unwrap();
        let m = assemble_vhm(&OneParticleVector::zeros(2), &modes, &b).unwrap();
        let p = ground_state(&m, 3, &SolverOptions::default()).unwrap();
        assert!((p.values[1] - 1.0).abs() < 1e-14 && (p.values[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonalization_defect() {
        let modes = custom(&[2.0]);
        let v = OneParticleVector::from_real(&[1.0]);
        let mut previous = f64::INFINITY;
        for n in [8, 12, 16] {
            let b = enumerate_basis(1, n).unwrap();
            let m = assemble_vhm(&v, &modes, &b).unwrap();
            let c = check_diagonalization(&m, 2).unwrap();
            eprintln!("N_max {n}: defect {:e} bound {:e}", c.defect, c.bound);
            assert!(c.defect <= c.bound, "{n}: {} > {}", c.defect, c.bound);
            assert!(c.defect < previous || c.defect < 1e-14);
            if n == 12 {
                assert!(c.defect <= 1e-8);
            }
            previous = c.defect;
        }
    }

    #[test]
    fn renormalized_spectrum_matches_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let modes = custom(&[0.7, 1.3, 2.1]);
        let b = enumerate_basis(3, 5).unwrap();
        let mut g = OneParticleVector(
            (0..3).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect(),
        );
        g = g.scale(Complex64::new(2.0 / g.norm(), 0.0));
        let r = renormalized_vhm(&g, &modes, &b).unwrap();
        assert!(r.metric.hermiticity_defect(&r.raw.to_dense()) < 1e-12);
        let lhs = hermitian_eigenvalues(&r.whitened);
        let rhs = hermitian_eigenvalues(&free_hamiltonian(&modes, &b).unwrap().to_dense());
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-9);
        }
        let vac = FockVector::vacuum(&b);
        let image = r.raw.apply(&vac);
        assert!(image.norm() < 1e-12);
        let zero = renormalized_vhm(&OneParticleVector::zeros(3), &modes, &b).unwrap();
        assert!(max_abs(&(zero.raw.to_dense() - free_hamiltonian(&modes, &b).unwrap().to_dense())) == 0.0);
    }
}
