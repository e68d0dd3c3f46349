//! Resolvent distances between operators living on different spaces that
//! are isometrically embedded into a common parent space.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{adjoint_matmul, inverse, matmul, max_abs, spectral_norm};

/// Default tolerance on `ι*ι = I`.
pub const ISOMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EmbeddedMember {
    /// Operator on the member space, Hermitian in the standard metric.
    pub op: DMatrix<Complex64>,
    /// Isometry from the member space into the parent space.
    pub iota: DMatrix<Complex64>,
}

#[derive(Debug, Clone)]
pub struct EmbeddedOperatorFamily {
    pub parent_dim: usize,
    pub members: Vec<EmbeddedMember>,
    /// Index of the limit member.
    pub limit: usize,
}

impl EmbeddedOperatorFamily {
    pub fn new(parent_dim: usize, members: Vec<EmbeddedMember>, limit: usize) -> Result<Self> {
        Self::with_tolerance(parent_dim, members, limit, ISOMETRY_TOL)
    }

    /// As [`Self::new`] with an explicit tolerance on `max |ι*ι - I|`.
    pub fn with_tolerance(parent_dim: usize, members: Vec<EmbeddedMember>, limit: usize, tol: f64) -> Result<Self> {
        if limit >= members.len() {
            return Err(Error::Config(format!("limit index {limit} out of {} members", members.len())));
        }
        for (i, m) in members.iter().enumerate() {
            if m.iota.nrows() != parent_dim || m.iota.ncols() != m.op.nrows() || !m.op.is_square() {
                return Err(Error::Shape(format!("member {i} does not embed into dimension {parent_dim}")));
            }
            let n = m.iota.ncols();
            let defect = max_abs(&(adjoint_matmul(&m.iota, &m.iota) - DMatrix::identity(n, n)));
            if defect > tol {
                return Err(Error::Precondition(format!(
                    "embedding of member {i} is not isometric: max |i*i - I| = {defect:e}"
                )));
            }
        }
        Ok(EmbeddedOperatorFamily { parent_dim, members, limit })
    }

    /// Family whose members all act on the parent space itself.
    pub fn on_common_space(ops: Vec<DMatrix<Complex64>>, limit: usize) -> Result<Self> {
        let n = ops.first().map_or(0, |m| m.nrows());
        let members = ops
            .into_iter()
            .map(|op| EmbeddedMember { iota: DMatrix::identity(n, n), op })
            .collect();
        Self::new(n, members, limit)
    }
}

#[derive(Debug, Clone)]
pub enum DistanceMode {
    Norm,
    /// Largest difference over the given probe vectors of the parent space.
    Strong(Vec<DVector<Complex64>>),
}

/// `ι (T + z)^{-1} ι*` in the parent space.
pub fn embedded_resolvent(member: &EmbeddedMember, z: Complex64) -> Result<DMatrix<Complex64>> {
    let n = member.op.nrows();
    let shifted = &member.op + DMatrix::<Complex64>::identity(n, n) * z;
    Ok(matmul(&matmul(&member.iota, &inverse(&shifted)?), &member.iota.adjoint()))
}

/// Distance of each member's embedded resolvent to the limit member's.
pub fn resolvent_distance(family: &EmbeddedOperatorFamily, z: Complex64, mode: &DistanceMode) -> Result<Vec<f64>> {
    if z.im.abs() < 1e-12 {
        return Err(Error::SingularShift { re: z.re, im: z.im });
    }
    let limit = embedded_resolvent(&family.members[family.limit], z)?;
    family
        .members
        .iter()
        .map(|m| {
            let diff = embedded_resolvent(m, z)? - &limit;
            Ok(match mode {
                DistanceMode::Norm => spectral_norm(&diff),
                DistanceMode::Strong(probes) => probes
                    .iter()
                    .map(|p| (&diff * p).norm() / p.norm().max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit of `log d = log c + p log h`.
pub fn rate_fit(distances: &[f64], parameters: &[f64]) -> Result<RateFit> {
    if distances.len() != parameters.len() {
        return Err(Error::Shape(format!(
            "{} distances but {} parameters",
            distances.len(),
            parameters.len()
        )));
    }
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .zip(parameters)
        .filter(|(d, h)| **d > 0.0 && **h > 0.0 && d.is_finite() && h.is_finite())
        .map(|(d, h)| (h.ln(), d.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Fit(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition("rate fit needs distinct parameters".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - exponent * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateFit { exponent, prefactor: intercept.exp(), residual, points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> DMatrix<Complex64> {
        DMatrix::from_element(1, 1, Complex64::new(x, 0.0))
    }

    #[test]
    fn identical_members() {
        let f = EmbeddedOperatorFamily::on_common_space(vec![scalar(2.0), scalar(2.0)], 1).unwrap();
        let d = resolvent_distance(&f, Complex64::i(), &DistanceMode::Norm).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
    }

    #[test]
    fn scalar_closed_form_and_conjugate_symmetry() {
        let eps = 0.3;
        let f = EmbeddedOperatorFamily::on_common_space(vec![scalar(1.0 + eps), scalar(1.0)], 1).unwrap();
        let z = Complex64::i();
        let d = resolvent_distance(&f, z, &DistanceMode::Norm).unwrap();
        let exact = (1.0 / (Complex64::new(1.0 + eps, 0.0) + z) - 1.0 / (Complex64::new(1.0, 0.0) + z)).norm();
        assert!((d[0] - exact).abs() < 1e-15);
        let dc = resolvent_distance(&f, z.conj(), &DistanceMode::Norm).unwrap();
        assert!((d[0] - dc[0]).abs() < 1e-10);
        let ds = resolvent_distance(&f, z, &DistanceMode::Strong(vec![DVector::from_element(1, Complex64::new(1.0, 0.0))]))
            .unwrap();
        assert!((ds[0] - exact).abs() < 1e-15);
    }

    #[test]
    fn real_shift_is_rejected() {
        let f = EmbeddedOperatorFamily::on_common_space(vec![scalar(1.0)], 0).unwrap();
        assert!(matches!(
            resolvent_distance(&f, Complex64::new(-1.0, 0.0), &DistanceMode::Norm),
            Err(Error::SingularShift { .. })
        ));
    }

    #[test]
    fn non_isometric_embedding_is_rejected() {
        let m = EmbeddedMember { op: scalar(1.0), iota: DMatrix::from_element(2, 1, Complex64::new(1.0, 0.0)) };
        assert!(EmbeddedOperatorFamily::new(2, vec![m], 0).is_err());
    }

    #[test]
    fn rate_fit_examples() {
        let h = [1.0, 0.5, 0.25, 0.125];
        let d: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powf(1.7)).collect();
        let fit = rate_fit(&d, &h).unwrap();
        assert!((fit.exponent - 1.7).abs() < 1e-10 && (fit.prefactor - 3.0).abs() < 1e-10);
        let flat = rate_fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(flat.exponent.abs() < 1e-14);
        assert!(matches!(rate_fit(&[1.0, 0.0, -1.0, 2.0], &[1.0, 2.0, 3.0, 4.0]), Err(Error::Fit(2))));
    }
}
