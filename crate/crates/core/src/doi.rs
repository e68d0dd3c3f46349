//! Double operator integrals over atomic spectral measures.
//!
//! For a normal matrix `B` with eigenprojections `Π_j` and a kernel `f`, the
//! double operator integral of `A` is `Σ_{i,j} f(λ_i, λ_j) Π_i A Π_j`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{adjoint_matmul, hermitian_eigen, matmul, max_abs, spectral_norm, ZERO};

/// Default eigenvalue clustering tolerance, relative to the spectral radius.
pub const DEFAULT_TOL_EIG: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<Complex64>,
    pub projections: Vec<DMatrix<Complex64>>,
    pub tol_eig: f64,
    pub spectral_radius: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.projections.first().map_or(0, |p| p.nrows())
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Absolute clustering threshold `tol_eig · spectral_radius`.
    pub fn threshold(&self) -> f64 {
        if self.spectral_radius > 0.0 {
            self.tol_eig * self.spectral_radius
        } else {
            self.tol_eig
        }
    }

    /// `Σ λ_j Π_j`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        self.eigenvalues
            .iter()
            .zip(&self.projections)
            .fold(DMatrix::zeros(n, n), |acc, (l, p)| acc + p * *l)
    }

    /// `Σ φ(λ_j) Π_j`.
    pub fn apply_function<F: Fn(Complex64) -> Complex64>(&self, f: F) -> DMatrix<Complex64> {
        let n = self.dim();
        self.eigenvalues
            .iter()
            .zip(&self.projections)
            .fold(DMatrix::zeros(n, n), |acc, (l, p)| acc + p * f(*l))
    }
}

/// `||B*B - BB*||₂`.
pub fn normality_defect(b: &DMatrix<Complex64>) -> f64 {
    let bd = b.adjoint();
    spectral_norm(&(matmul(&bd, b) - matmul(b, &bd)))
}

/// Checks `||B*B - BB*|| <= 1e-10 ||B||²`.
pub fn check_normal(b: &DMatrix<Complex64>) -> Result<()> {
    let defect = normality_defect(b);
    let limit = 1e-10 * spectral_norm(b).powi(2);
    if defect > limit {
        return Err(Error::NotNormal { defect, limit });
    }
    Ok(())
}

fn cluster_sorted(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if v - values[*g.last().unwrap()] <= tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Eigenprojections of a normal matrix, with eigenvalues closer than
/// `tol_eig · spectral_radius` merged into one cluster.
pub fn spectral_decompose(b: &DMatrix<Complex64>, tol_eig: f64) -> Result<SpectralDecomposition> {
    if b.nrows() != b.ncols() {
        return Err(Error::Shape(format!("{}x{} matrix is not square", b.nrows(), b.ncols())));
    }
    check_normal(b)?;
    let n = b.nrows();
    let half = Complex64::new(0.5, 0.0);
    let h1 = (b + b.adjoint()) * half;
    let h2 = (b - b.adjoint()) * Complex64::new(0.0, -0.5);
    let radius = spectral_norm(b);
    let tol = if radius > 0.0 { tol_eig * radius } else { tol_eig };

    // Simultaneous diagonalization: real parts first, imaginary parts
    // inside each real-part cluster.
    let (re_vals, re_vecs) = hermitian_eigen(&h1);
    let mut pairs: Vec<(Complex64, DVector<Complex64>)> = Vec::with_capacity(n);
    for group in cluster_sorted(&re_vals, tol) {
        let q = DMatrix::from_fn(n, group.len(), |r, c| re_vecs[(r, group[c])]);
        let sub = matmul(&adjoint_matmul(&q, &h2), &q);
        let (_, sub_vecs) = hermitian_eigen(&sub);
        let u = matmul(&q, &sub_vecs);
        for c in 0..u.ncols() {
            let col = u.column(c).into_owned();
            let lambda = (col.adjoint() * b * &col)[(0, 0)];
            pairs.push((lambda, col));
        }
    }

    // Merge numerically equal eigenvalues.
    let mut eigenvalues: Vec<Complex64> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, (l, _)) in pairs.iter().enumerate() {
        match eigenvalues.iter().position(|e| (e - l).norm() <= tol) {
            Some(j) => members[j].push(i),
            None => {
                eigenvalues.push(*l);
                members.push(vec![i]);
            }
        }
    }
    let mut projections = Vec::with_capacity(members.len());
    for (j, group) in members.iter().enumerate() {
        let mut p = DMatrix::zeros(n, n);
        let mut mean = ZERO;
        for &i in group {
            let u = &pairs[i].1;
            p += u * u.adjoint();
            mean += pairs[i].0;
        }
        eigenvalues[j] = mean / group.len() as f64;
        projections.push(p);
    }
    Ok(SpectralDecomposition { eigenvalues, projections, tol_eig, spectral_radius: radius })
}

/// Scalar kernel of a double operator integral.
#[derive(Clone)]
pub enum DoiKernel {
    /// `exp((conj(λ)μ - (|λ|² + |μ|²)/2) ||g||²)`.
    ChiRegular { gnorm2: f64 },
    /// Indicator of `|λ - μ| <= threshold`.
    ChiSingular { threshold: f64 },
    Custom(Arc<dyn Fn(Complex64, Complex64) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for DoiKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DoiKernel::ChiRegular { gnorm2 } => write!(f, "ChiRegular({gnorm2})"),
            DoiKernel::ChiSingular { threshold } => write!(f, "ChiSingular({threshold})"),
            DoiKernel::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl DoiKernel {
    /// Singular kernel using the clustering threshold of `dec`.
    pub fn chi_singular(dec: &SpectralDecomposition) -> Self {
        DoiKernel::ChiSingular { threshold: dec.threshold() }
    }

    pub fn custom<F: Fn(Complex64, Complex64) -> Complex64 + Send + Sync + 'static>(f: F) -> Self {
        DoiKernel::Custom(Arc::new(f))
    }

    pub fn eval(&self, lambda: Complex64, mu: Complex64) -> Complex64 {
        match self {
            DoiKernel::ChiRegular { gnorm2 } => {
                ((lambda.conj() * mu - 0.5 * (lambda.norm_sqr() + mu.norm_sqr())) * *gnorm2).exp()
            }
            DoiKernel::ChiSingular { threshold } => {
                if (lambda - mu).norm() <= *threshold {
                    Complex64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            }
            DoiKernel::Custom(f) => f(lambda, mu),
        }
    }
}

/// `Σ_{i,j} f(λ_i, μ_j) Π_i A P_j` with `Π` from `left` and `P` from `right`.
pub fn doi_apply_pair(
    a: &DMatrix<Complex64>,
    left: &SpectralDecomposition,
    right: &SpectralDecomposition,
    f: &DoiKernel,
) -> Result<DMatrix<Complex64>> {
    if a.nrows() != left.dim() || a.ncols() != right.dim() {
        return Err(Error::Shape(format!(
            "{}x{} matrix against decompositions of dimension {} and {}",
            a.nrows(),
            a.ncols(),
            left.dim(),
            right.dim()
        )));
    }
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (li, pi) in left.eigenvalues.iter().zip(&left.projections) {
        let pa = pi * a;
        for (mj, pj) in right.eigenvalues.iter().zip(&right.projections) {
            let w = f.eval(*li, *mj);
            if w != ZERO {
                out += &pa * pj * w;
            }
        }
    }
    Ok(out)
}

/// Double operator integral with the same decomposition on both sides.
pub fn doi_apply(a: &DMatrix<Complex64>, dec: &SpectralDecomposition, f: &DoiKernel) -> Result<DMatrix<Complex64>> {
    doi_apply_pair(a, dec, dec, f)
}

#[derive(Debug, Clone, Copy)]
pub struct DecomposabilityNorm {
    /// Lower estimate from alternating maximization.
    pub estimate: f64,
    /// `||N||₂` with `N_ij = ||Π_i T P_j||₂`, an upper bound below `||T||_HS`.
    pub upper_bound: f64,
}

fn top_singular_pair(m: &DMatrix<Complex64>) -> (f64, DVector<Complex64>, DVector<Complex64>) {
    let svd = m.clone().svd(true, true);
    let (mut best, mut idx) = (0.0, 0);
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > best {
            best = *s;
            idx = i;
        }
    }
    let u = svd.u.unwrap().column(idx).into_owned();
    let v = svd.v_t.unwrap().row(idx).adjoint();
    (best, u, v)
}

/// `sup_{ψ₁,ψ₂} Σ_{i,j} |⟨Π_i ψ₁, T P_j ψ₂⟩|` over unit vectors.
pub fn decomposability_norm(
    t: &DMatrix<Complex64>,
    left: &SpectralDecomposition,
    right: &SpectralDecomposition,
    seed: u64,
) -> Result<DecomposabilityNorm> {
    if t.nrows() != left.dim() || t.ncols() != right.dim() {
        return Err(Error::Shape("operator and decompositions disagree in dimension".into()));
    }
    let blocks: Vec<Vec<DMatrix<Complex64>>> = left
        .projections
        .iter()
        .map(|pi| right.projections.iter().map(|pj| pi * t * pj).collect())
        .collect();
    let norms = DMatrix::from_fn(blocks.len(), right.len(), |i, j| Complex64::new(spectral_norm(&blocks[i][j]), 0.0));
    let upper_bound = spectral_norm(&norms);
    if max_abs(t) == 0.0 {
        return Ok(DecomposabilityNorm { estimate: 0.0, upper_bound: 0.0 });
    }

    let objective = |u: &DVector<Complex64>, v: &DVector<Complex64>| -> (f64, Vec<Vec<Complex64>>) {
        let mut total = 0.0;
        let mut phases = Vec::with_capacity(blocks.len());
        for row in &blocks {
            let mut pr = Vec::with_capacity(row.len());
            for blk in row {
                let z = (u.adjoint() * blk * v)[(0, 0)];
                total += z.norm();
                pr.push(if z.norm() > 0.0 { z.conj() / z.norm() } else { Complex64::new(1.0, 0.0) });
            }
            phases.push(pr);
        }
        (total, phases)
    };
    let combine = |phases: &[Vec<Complex64>]| -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(t.nrows(), t.ncols());
        for (row, pr) in blocks.iter().zip(phases) {
            for (blk, p) in row.iter().zip(pr) {
                m += blk * *p;
            }
        }
        m
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for restart in 0..12 {
        let phases: Vec<Vec<Complex64>> = blocks
            .iter()
            .map(|row| {
                row.iter()
                    .map(|_| {
                        if restart == 0 {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU)
                        }
                    })
                    .collect()
            })
            .collect();
        let (_, mut u, mut v) = top_singular_pair(&combine(&phases));
        let mut value = 0.0;
        for _ in 0..200 {
            let (obj, ph) = objective(&u, &v);
            let (s, nu, nv) = top_singular_pair(&combine(&ph));
            u = nu;
            v = nv;
            if s <= value * (1.0 + 1e-13) {
                value = value.max(obj);
                break;
            }
            value = s.max(obj);
        }
        best = best.max(value);
    }
    Ok(DecomposabilityNorm { estimate: best.min(upper_bound), upper_bound })
}

/// Hilbert-Schmidt norm.
pub fn hilbert_schmidt(t: &DMatrix<Complex64>) -> f64 {
    t.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn pauli_x() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }

    pub(crate) fn pauli_z() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
        random_matrix(rng, n).qr().q()
    }

    #[test]
    fn identity_has_one_cluster() {
        let d = spectral_decompose(&DMatrix::identity(3, 3), DEFAULT_TOL_EIG).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d.eigenvalues[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(max_abs(&(&d.projections[0] - DMatrix::identity(3, 3))) < 1e-14);
    }

    #[test]
    fn pauli_x_projections() {
        let d = spectral_decompose(&pauli_x(), DEFAULT_TOL_EIG).unwrap();
        assert_eq!(d.len(), 2);
        for (l, p) in d.eigenvalues.iter().zip(&d.projections) {
            let expected = (DMatrix::identity(2, 2) + pauli_x() * *l) * c(0.5, 0.0);
            assert!(max_abs(&(p - expected)) < 1e-14);
        }
    }

    #[test]
    fn random_normal_reconstruction_and_projector_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let u = random_unitary(&mut rng, 4);
            let diag = [c(1.0, 2.0), c(-0.5, 0.1), c(1.0, 2.0), c(0.3, -1.0)];
            let b = &u * DMatrix::from_diagonal(&DVector::from_row_slice(&diag)) * u.adjoint();
            let d = spectral_decompose(&b, DEFAULT_TOL_EIG).unwrap();
            assert_eq!(d.len(), 3);
            assert!(max_abs(&(d.reconstruct() - &b)) <= 1e-10 * max_abs(&b));
            let sum = d.projections.iter().fold(DMatrix::zeros(4, 4), |a, p| a + p);
            assert!(max_abs(&(sum - DMatrix::identity(4, 4))) < 1e-12);
            for (i, p) in d.projections.iter().enumerate() {
                for (j, q) in d.projections.iter().enumerate() {
                    let expected = if i == j { p.clone() } else { DMatrix::zeros(4, 4) };
                    assert!(max_abs(&(p * q - expected)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_normal_is_rejected() {
        let b = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(spectral_decompose(&b, DEFAULT_TOL_EIG), Err(Error::NotNormal { .. })));
    }

    #[test]
    fn doi_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dx = spectral_decompose(&pauli_x(), DEFAULT_TOL_EIG).unwrap();
        let a = random_matrix(&mut rng, 2);
        let one = DoiKernel::custom(|_, _| c(1.0, 0.0));
        assert!(max_abs(&(doi_apply(&a, &dx, &one).unwrap() - &a)) < 1e-12);
        let zero = doi_apply(&pauli_z(), &dx, &DoiKernel::chi_singular(&dx)).unwrap();
        assert!(max_abs(&zero) < 1e-15);
        let dz = spectral_decompose(&pauli_z(), DEFAULT_TOL_EIG).unwrap();
        let prod = doi_apply(&pauli_z(), &dz, &DoiKernel::custom(|l, m| l * m)).unwrap();
        assert!(max_abs(&(prod - pauli_z())) < 1e-14);
    }

    #[test]
    fn commuting_operator_survives_singular_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_unitary(&mut rng, 3);
        let b = &u * DMatrix::from_diagonal(&DVector::from_row_slice(&[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0)])) * u.adjoint();
        let a = &u
            * DMatrix::from_row_slice(3, 3, &[c(3.0, 0.0), ZERO, ZERO, ZERO, c(1.0, 0.0), c(0.5, 0.5), ZERO, c(0.5, -0.5), c(2.0, 0.0)])
            * u.adjoint();
        let d = spectral_decompose(&b, DEFAULT_TOL_EIG).unwrap();
        let out = doi_apply(&a, &d, &DoiKernel::chi_singular(&d)).unwrap();
        assert!(max_abs(&(out - &a)) < 1e-12);
    }

    #[test]
    fn chi_kernels() {
        let reg = DoiKernel::ChiRegular { gnorm2: 0.0 };
        assert_eq!(reg.eval(c(1.0, 2.0), c(-3.0, 0.5)), c(1.0, 0.0));
        let sing = DoiKernel::ChiSingular { threshold: 1e-9 };
        let pts = [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(0.5, -0.5)];
        for &l in &pts {
            for &m in &pts {
                let mut prev = f64::INFINITY;
                for g2 in [1.0, 10.0, 100.0, 1000.0] {
                    let v = DoiKernel::ChiRegular { gnorm2: g2 }.eval(l, m);
                    let expected_mod = (-0.5 * (l - m).norm_sqr() * g2).exp();
                    assert!((v.norm() - expected_mod).abs() < 1e-12);
                    if l != m {
                        assert!(v.norm() < prev);
                        prev = v.norm();
                    }
                }
                let limit = DoiKernel::ChiRegular { gnorm2: 1e6 }.eval(l, m);
                assert!((limit - sing.eval(l, m)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn decomposability_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random_unitary(&mut rng, 3);
        let b = &u * DMatrix::from_diagonal(&DVector::from_row_slice(&[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)])) * u.adjoint();
        let d = spectral_decompose(&b, DEFAULT_TOL_EIG).unwrap();
        let zero = decomposability_norm(&DMatrix::zeros(3, 3), &d, &d, 1).unwrap();
        assert_eq!(zero.estimate, 0.0);
        let id = decomposability_norm(&DMatrix::identity(3, 3), &d, &d, 1).unwrap();
        assert!((id.estimate - 1.0).abs() < 1e-10 && (id.upper_bound - 1.0).abs() < 1e-10);
        for _ in 0..5 {
            let t = random_matrix(&mut rng, 3);
            let n = decomposability_norm(&t, &d, &d, 2).unwrap();
            let hs = hilbert_schmidt(&t);
            assert!(n.estimate <= n.upper_bound + 1e-12 && n.upper_bound <= hs + 1e-9);
            assert!(n.estimate >= spectral_norm(&t) - 1e-10);
        }
    }

    #[test]
    fn form_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = random_unitary(&mut rng, 4);
        let b = &u
            * DMatrix::from_diagonal(&DVector::from_row_slice(&[c(1.0, 1.0), c(-1.0, 0.0), c(0.0, 2.0), c(0.5, 0.0)]))
            * u.adjoint();
        let d = spectral_decompose(&b, DEFAULT_TOL_EIG).unwrap();
        let t = random_matrix(&mut rng, 4);
        let kernel = DoiKernel::ChiRegular { gnorm2: 0.7 };
        let out = doi_apply(&t, &d, &kernel).unwrap();
        let norm = decomposability_norm(&t, &d, &d, 3).unwrap();
        let kref = &kernel;
        let sup = d
            .eigenvalues
            .iter()
            .flat_map(|l| d.eigenvalues.iter().map(move |m| kref.eval(*l, *m).norm()))
            .fold(0.0, f64::max);
        for _ in 0..50 {
            let psi = DVector::from_fn(4, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            let phi = DVector::from_fn(4, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            let form = (psi.adjoint() * &out * &phi)[(0, 0)].norm();
            assert!(form <= norm.upper_bound * psi.norm() * phi.norm() * sup * (1.0 + 1e-12));
        }
    }
}
