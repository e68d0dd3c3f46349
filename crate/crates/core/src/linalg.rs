//! Dense helpers shared by the model modules.

use std::sync::Once;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Largest dimension for which [`spectral_norm`] uses a full SVD.
const SVD_NORM_LIMIT: usize = 1000;

static SEQUENTIAL: Once = Once::new();

// Dense kernels run single-threaded so results do not depend on the thread
// count; parallelism lives at the sweep level.
fn to_faer(m: &DMatrix<Complex64>) -> Mat<Complex64> {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Dense product `a b`.
pub fn matmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    if a.nrows() * a.ncols() * b.ncols() < 64 * 64 * 64 {
        return a * b;
    }
    from_faer((to_faer(a) * to_faer(b)).as_ref())
}

/// Dense product `a* b`.
pub fn adjoint_matmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.nrows(), b.nrows(), "matmul shape mismatch");
    if a.nrows() * a.ncols() * b.ncols() < 64 * 64 * 64 {
        return a.adjoint() * b;
    }
    from_faer((to_faer(a).adjoint() * to_faer(b)).as_ref())
}

pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(u: &[Complex64]) -> f64 {
    u.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(y: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Multiplies `v` by a unit phase so that its largest-magnitude component
/// (first one on ties) is real and positive.
pub fn canonicalize_phase(v: &mut [Complex64]) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        let a = x.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = a;
        }
    }
    if best_abs > 0.0 {
        let phase = v[best].conj() / best_abs;
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = to_faer(&sym)
        .self_adjoint_eigen(Side::Lower)
        .expect("self-adjoint eigensolver did not converge");
    let values = (0..n).map(|i| eig.S()[i].re).collect();
    (values, from_faer(eig.U()))
}

pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Operator 2-norm. Exact SVD for small matrices, power iteration on `M*M`
/// from a fixed start vector otherwise.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows().max(m.ncols()) <= SVD_NORM_LIMIT {
        let s = to_faer(m).singular_values().expect("SVD did not converge");
        return s.into_iter().fold(0.0, f64::max);
    }
    let n = m.ncols();
    let mut x = DVector::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64 * 0.618).sin() * 0.5, 0.0));
    x /= Complex64::new(x.norm(), 0.0);
    let mut estimate = 0.0;
    for _ in 0..500 {
        let y = m * &x;
        let z = m.adjoint() * &y;
        let zn = z.norm();
        if zn == 0.0 {
            return 0.0;
        }
        let next = zn.sqrt();
        x = z / Complex64::new(zn, 0.0);
        if (next - estimate).abs() <= 1e-13 * next {
            estimate = next;
            break;
        }
        estimate = next;
    }
    estimate
}

/// Lower-triangular Cholesky factor `L` with `G = L L*`.
pub fn cholesky_lower(g: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let llt = to_faer(g).llt(Side::Lower).ok()?;
    Some(from_faer(llt.L()))
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut x = to_faer(b);
    to_faer(l).as_ref().solve_lower_triangular_in_place(x.as_mut());
    from_faer(x.as_ref())
}

/// Solves `L* X = B` for lower-triangular `L`.
pub fn solve_lower_adjoint(l: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut x = to_faer(b);
    to_faer(l).adjoint().solve_upper_triangular_in_place(x.as_mut());
    from_faer(x.as_ref())
}

/// Conjugate gradients for a Hermitian positive definite operator.
pub fn conjugate_gradient<F>(apply: F, b: &[Complex64], tol: f64, max_iter: usize) -> Result<Vec<Complex64>>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = inner(&r, &r).re;
    for it in 0..max_iter {
        let ap = apply(&p);
        let pap = inner(&p, &ap).re;
        if pap <= 0.0 {
            return Err(Error::Solver { iterations: it, residual: rr.sqrt() / bnorm });
        }
        let alpha = rr / pap;
        axpy(&mut x, Complex64::new(alpha, 0.0), &p);
        axpy(&mut r, Complex64::new(-alpha, 0.0), &ap);
        let rr_new = inner(&r, &r).re;
        if rr_new.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + *pi * beta;
        }
        rr = rr_new;
    }
    Err(Error::Solver { iterations: max_iter, residual: rr.sqrt() / bnorm })
}

/// Inverse of a square matrix via LU, with an error for numerically singular input.
pub fn inverse(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let singular = || Error::Precondition("matrix is numerically singular".into());
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let lu = to_faer(m).partial_piv_lu();
    let u = lu.U();
    let scale = (0..u.nrows()).map(|i| u[(i, i)].norm()).fold(0.0, f64::max);
    if (0..u.nrows()).any(|i| u[(i, i)].norm() <= f64::EPSILON * scale * 1e-3 || !u[(i, i)].is_finite()) {
        return Err(singular());
    }
    let inv = from_faer(lu.inverse().as_ref());
    if inv.iter().all(|c| c.is_finite()) {
        Ok(inv)
    } else {
        Err(singular())
    }
}

/// Embeds a vector as a dense column.
pub fn column(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(v)
}

/// Dense matrix exponential by scaling and squaring with a Taylor series.
pub fn expm(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows();
    let norm1 = (0..n).map(|j| m.column(j).iter().map(|c| c.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = m / Complex64::new(2f64.powi(squarings as i32), 0.0);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = matmul(&term, &scaled) / Complex64::new(k as f64, 0.0);
        result += &term;
        if max_abs(&term) < 1e-18 * max_abs(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

/// Dense Kronecker product with `a` as the slow index.
pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_fix_makes_largest_entry_real_positive() {
        let mut v = vec![Complex64::new(0.1, 0.0), Complex64::new(0.0, -2.0)];
        canonicalize_phase(&mut v);
        assert!((v[1] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((v[0] - Complex64::new(0.0, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn power_iteration_norm_agrees_with_svd() {
        // Householder reflections around a diagonal with known top value.
        let n = SVD_NORM_LIMIT + 5;
        let w = DVector::from_fn(n, |i, _| Complex64::new(((i * 7) % 11) as f64, ((i * 3) % 5) as f64));
        let w = &w / Complex64::new(w.norm(), 0.0);
        let h = DMatrix::<Complex64>::identity(n, n) - &w * w.adjoint() * Complex64::new(2.0, 0.0);
        let d = DMatrix::from_fn(n, n, |r, c| if r == c { Complex64::new(1.0 + (r % 13) as f64 / 4.0, 0.0) } else { ZERO });
        let m = matmul(&matmul(&h, &d), &h.transpose());
        assert!((spectral_norm(&m) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn cg_solves_diagonal_system() {
        let d = [1.0, 2.0, 5.0];
        let b = vec![Complex64::new(1.0, 1.0); 3];
        let x = conjugate_gradient(
            |x| x.iter().zip(&d).map(|(xi, di)| xi * *di).collect(),
            &b,
            1e-14,
            10,
        )
        .unwrap();
        for (xi, di) in x.iter().zip(&d) {
            assert!((xi * *di - Complex64::new(1.0, 1.0)).norm() < 1e-13);
        }
    }
}
