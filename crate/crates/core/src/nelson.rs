//! Nelson fiber Hamiltonians at fixed total momentum,
//! `K_σ(P) = Σ_c (P_c - dΓ(k_c))² + dΓ(ω) + a†(v_σ) + a(v_σ)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::convergence::{resolvent_distance, DistanceMode, EmbeddedOperatorFamily};
use crate::eigen::{lowest_eigenpairs, SolverOptions};
use crate::error::{Error, Result};
use crate::fock::{annihilator, creator, displacement, enumerate_basis, number_operator, poisson_tail, FockBasis};
use crate::linalg::{inner, norm};
use crate::modes::{
    gross_config, sample_form_factor, self_energy, FormFactorKind, FormFactorSpec, GridKind, Measure, ModeSet, OneParticleVector,
};
use crate::sparse::CsrMatrix;

/// Mirrored 1D grid on the cells `edges[i]..edges[i+1]` (and their
/// reflections) with one node per cell, placed where the `P = 0` second-order
/// density `1 / (2ω(ω + k²))` equals its cell average. Second-order
/// perturbation theory on this grid reproduces the continuum self-energy.
pub fn matched_line_grid(edges: &[f64], mass: f64) -> Result<ModeSet> {
    if edges.len() < 2 || edges.windows(2).any(|p| !(p[1] > p[0])) || !(edges[0] >= 0.0) || !edges[edges.len() - 1].is_finite() {
        return Err(Error::Config("matched grid needs finite, strictly increasing, nonnegative cell edges".into()));
    }
    let density = |k: f64| {
        let w = (k * k + mass * mass).sqrt();
        1.0 / (2.0 * w * (w + k * k))
    };
    let mut positive = Vec::with_capacity(edges.len() - 1);
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let cell = FormFactorSpec::new(FormFactorKind::NelsonSharp, b, a, 1.0)?;
        let mean = -self_energy(&cell, 1, mass)? / (2.0 * (b - a));
        // The density decreases in k, so the mean value is attained once.
        let (mut lo, mut hi) = (a, b);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if density(mid) > mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        positive.push((0.5 * (lo + hi), b - a));
    }
    let mut nodes: Vec<Vec<f64>> = positive.iter().rev().map(|&(k, _)| vec![-k]).collect();
    nodes.extend(positive.iter().map(|&(k, _)| vec![k]));
    let mut weights: Vec<f64> = positive.iter().rev().map(|&(_, w)| w).collect();
    weights.extend(positive.iter().map(|&(_, w)| w));
    ModeSet::new(Measure::Line, GridKind::Custom, nodes, weights, mass)
}

/// Default tolerance on the Poisson tail of the dressing displacement.
pub const DRESSING_TAIL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct FiberModel {
    pub modes: ModeSet,
    pub basis: Arc<FockBasis>,
    pub p: Vec<f64>,
    pub spec: FormFactorSpec,
    pub v: OneParticleVector,
    pub k: CsrMatrix,
    /// Self-energy `E_{σ,σ₀}`.
    pub e_counterterm: f64,
}

/// Diagonal of `K_0(P) = Σ_c (P_c - dΓ(k_c))² + dΓ(ω)`.
pub fn free_fiber_diagonal(p: &[f64], modes: &ModeSet, basis: &FockBasis) -> Vec<f64> {
    let omegas = modes.omegas();
    (0..basis.dim())
        .map(|s| {
            let occ = basis.occupation(s);
            let kinetic: f64 = (0..p.len())
                .map(|c| {
                    let total: f64 = occ.iter().enumerate().map(|(i, &n)| n as f64 * modes.momentum_component(i, c)).sum();
                    (p[c] - total).powi(2)
                })
                .sum();
            let field: f64 = occ.iter().zip(&omegas).map(|(&n, w)| n as f64 * w).sum();
            kinetic + field
        })
        .collect()
}

pub fn assemble_fiber(p: &[f64], spec: &FormFactorSpec, modes: &ModeSet, basis: &Arc<FockBasis>) -> Result<FiberModel> {
    if !modes.has_vector_momenta() {
        return Err(Error::Config(
            "fiber Hamiltonians need vector-valued mode momenta (use a signed 1D or product 3D grid)".into(),
        ));
    }
    if p.len() != modes.dimension() {
        return Err(Error::Shape(format!("total momentum has {} components in dimension {}", p.len(), modes.dimension())));
    }
    if modes.len() != basis.modes() {
        return Err(Error::Shape(format!("{} grid nodes but {} Fock modes", modes.len(), basis.modes())));
    }
    let v = sample_form_factor(spec, modes)?;
    let diag: Vec<Complex64> = free_fiber_diagonal(p, modes, basis).into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    let k = CsrMatrix::from_diagonal(&diag)
        .add(&creator(&v, basis)?.matrix)?
        .add(&annihilator(&v, basis)?.matrix)?;
    let e_counterterm = self_energy(spec, modes.dimension(), modes.mass())?;
    Ok(FiberModel { modes: modes.clone(), basis: basis.clone(), p: p.to_vec(), spec: spec.clone(), v, k, e_counterterm })
}

impl FiberModel {
    /// `K - E` as a sparse matrix.
    pub fn subtracted(&self) -> CsrMatrix {
        self.k
            .add_scaled(&CsrMatrix::identity(self.basis.dim()), Complex64::new(-self.e_counterterm, 0.0))
            .expect("square matrices of equal size")
    }
}

#[derive(Debug, Clone)]
pub struct DressedFiber {
    /// `W(h)* (K - E) W(h)`.
    pub op: DMatrix<Complex64>,
    /// Largest deviation between the sorted low spectra of the dressed and
    /// the subtracted fiber.
    pub spectra_gap: f64,
    /// Largest Weyl bound `||K̂ y - λ y|| / ||y||` over `y = W* x` for the
    /// compared eigenpairs `(λ, x)` of `K - E`. Vanishes when `W` acts
    /// unitarily on them.
    pub truncation_bound: f64,
    /// Poisson tail of `h` at the cap.
    pub tail: f64,
    pub h: OneParticleVector,
}

/// Smallest cap with Poisson tail at most `tol`.
pub fn required_cap(x: f64, tol: f64) -> usize {
    (0..10_000).find(|&n| poisson_tail(x, n) <= tol).unwrap_or(10_000)
}

/// Dresses the fiber with the Gross configuration restricted to
/// `σ₀' <= |k| <= σ`, comparing the `levels` lowest eigenvalues.
pub fn dressed_fiber(model: &FiberModel, sigma0_prime: f64, levels: usize, opts: &SolverOptions) -> Result<DressedFiber> {
    let g = gross_config(&model.v, &model.modes)?;
    let sigma = model.spec.sigma;
    let h = g.masked(|i| {
        let k = model.modes.magnitude(i);
        k >= sigma0_prime && k <= sigma
    });
    let x = h.norm2();
    let tail = poisson_tail(x, model.basis.cap());
    if tail > DRESSING_TAIL_TOL {
        return Err(Error::Precondition(format!(
            "dressing tail {tail:.2e} exceeds {DRESSING_TAIL_TOL:e}; N_max >= {} is required",
            required_cap(x, DRESSING_TAIL_TOL)
        )));
    }
    let w = displacement(&h, &model.basis)?.op.matrix;
    let wd = w.adjoint();
    let sub = model.subtracted();
    let op = wd.matmul(&sub)?.matmul(&w)?.to_dense();
    let op = (&op + op.adjoint()) * Complex64::new(0.5, 0.0);
    let levels = levels.min(model.basis.dim());
    let dressed = lowest_eigenpairs(&op, levels, opts)?.values;
    let bare = lowest_eigenpairs(&sub, levels, opts)?;
    let spectra_gap = dressed.iter().zip(&bare.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut truncation_bound: f64 = 0.0;
    for xv in &bare.vectors {
        let y = wd.matvec(xv);
        let mut defect = w.matvec(&y);
        for (d, xi) in defect.iter_mut().zip(xv) {
            *d -= xi;
        }
        let r = wd.matvec(&sub.matvec(&defect));
        truncation_bound = truncation_bound.max(norm(&r) / norm(&y));
    }
    Ok(DressedFiber { op, spectra_gap, truncation_bound, tail, h })
}

#[derive(Debug, Clone, Copy)]
pub struct FiberPoint {
    /// `λ₀(K) - E`.
    pub e0: f64,
    /// `λ₀(K)` without the counterterm.
    pub e0_bare: f64,
    pub e_counterterm: f64,
    /// `λ₁ - λ₀`.
    pub gap: f64,
    /// Ground-state boson number.
    pub num_expect: f64,
    /// `|⟨x_prev, x⟩|` with the previous point's ground state (NaN when the
    /// spaces are not identified, 1 for the first point).
    pub overlap_prev: f64,
    /// Norm resolvent distance of `K - E` to the last point (NaN when the
    /// spaces are not identified).
    pub resolvent_gap: f64,
}

/// Ground-state diagnostics along a sequence of cutoffs.
///
/// `modes_seq` holds one grid per point or a single shared grid. Points on
/// grids with the same number of nodes are identified index by index.
pub fn fiber_ir_sweep(
    p: &[f64],
    specs: &[FormFactorSpec],
    modes_seq: &[ModeSet],
    cap: usize,
    opts: &SolverOptions,
) -> Result<Vec<FiberPoint>> {
    if specs.is_empty() {
        return Err(Error::Config("empty cutoff sequence".into()));
    }
    if modes_seq.len() != 1 && modes_seq.len() != specs.len() {
        return Err(Error::Shape(format!("{} grids for {} sweep points", modes_seq.len(), specs.len())));
    }
    let grid = |i: usize| if modes_seq.len() == 1 { &modes_seq[0] } else { &modes_seq[i] };
    let models: Vec<FiberModel> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let modes = grid(i);
            assemble_fiber(p, spec, modes, &enumerate_basis(modes.len(), cap)?)
        })
        .collect::<Result<_>>()?;
    let spectra: Vec<(crate::eigen::EigenPairs, f64)> = models
        .par_iter()
        .map(|m| {
            let pairs = lowest_eigenpairs(&m.k, 2.min(m.basis.dim()), opts)?;
            let x = &pairs.vectors[0];
            let n = inner(x, &number_operator(&m.basis).matrix.matvec(x)).re;
            Ok((pairs, n))
        })
        .collect::<Result<_>>()?;
    let mut points: Vec<FiberPoint> = Vec::with_capacity(models.len());
    for (i, (m, (pairs, n))) in models.iter().zip(&spectra).enumerate() {
        let x = &pairs.vectors[0];
        let overlap_prev = if i == 0 {
            1.0
        } else {
            let prev = &spectra[i - 1].0.vectors[0];
            if prev.len() == x.len() && grid(i - 1).len() == m.modes.len() {
                inner(prev, x).norm()
            } else {
                f64::NAN
            }
        };
        points.push(FiberPoint {
            e0: pairs.values[0] - m.e_counterterm,
            e0_bare: pairs.values[0],
            e_counterterm: m.e_counterterm,
            gap: if pairs.values.len() > 1 { pairs.values[1] - pairs.values[0] } else { f64::NAN },
            num_expect: *n,
            overlap_prev,
            resolvent_gap: f64::NAN,
        });
    }
    let last = models.last().unwrap().modes.len();
    let comparable: Vec<usize> = (0..models.len()).filter(|&i| models[i].modes.len() == last).collect();
    let ops: Vec<DMatrix<Complex64>> = comparable.iter().map(|&i| models[i].subtracted().to_dense()).collect();
    let family = EmbeddedOperatorFamily::on_common_space(ops, comparable.len() - 1)?;
    let gaps = resolvent_distance(&family, Complex64::i(), &DistanceMode::Norm)?;
    for (&i, d) in comparable.iter().zip(gaps) {
        points[i].resolvent_gap = d;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::dense_lowest;

    fn single_unit_mode() -> ModeSet {
        ModeSet::new(Measure::Line, GridKind::Custom, vec![vec![1.0]], vec![1.0], 0.0).unwrap()
    }

    #[test]
    fn free_fiber_values() {
        let modes = single_unit_mode();
        let b = enumerate_basis(1, 5).unwrap();
        let spec = FormFactorSpec::new(FormFactorKind::NelsonSharp, 2.0, 0.5, 0.0).unwrap();
        let m = assemble_fiber(&[0.0], &spec, &modes, &b).unwrap();
        for n in 0..=5 {
            assert_eq!(m.k.get(n, n).re, (n * n + n) as f64);
        }
        let p = lowest_eigenpairs(&m.k, 1, &SolverOptions::default()).unwrap();
        assert!(p.values[0].abs() < 1e-14 && (p.vectors[0][0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radial_grids_are_rejected() {
        let modes = ModeSet::radial_log(3, 0.1, 1.0, 0.0).unwrap();
        let b = enumerate_basis(3, 2).unwrap();
        let spec = FormFactorSpec::nelson(1.0, 0.1).unwrap();
        assert!(matches!(assemble_fiber(&[0.0, 0.0, 0.0], &spec, &modes, &b), Err(Error::Config(_))));
    }

    #[test]
    fn free_part_commutes_with_field_momentum() {
        let modes = ModeSet::line_log(2, 0.2, 2.0, 0.0).unwrap();
        let b = enumerate_basis(4, 3).unwrap();
        let d = free_fiber_diagonal(&[0.3], &modes, &b);
        assert_eq!(d.len(), b.dim());
        let spec = FormFactorSpec::nelson(2.0, 0.2).unwrap();
        let m = assemble_fiber(&[0.3], &spec, &modes, &b).unwrap();
        assert!(m.k.hermiticity_defect() < 1e-14);
    }

    #[test]
    fn sparse_matches_dense() {
        let modes = ModeSet::line_log(2, 0.2, 3.0, 0.0).unwrap();
        let b = enumerate_basis(4, 6).unwrap();
        let spec = FormFactorSpec::new(FormFactorKind::NelsonSharp, 3.0, 0.2, 0.3).unwrap();
        let m = assemble_fiber(&[0.0], &spec, &modes, &b).unwrap();
        let opts = SolverOptions { dense_limit: 10, ..Default::default() };
        let s = lowest_eigenpairs(&m.k, 1, &opts).unwrap();
        let d = dense_lowest(&m.k, 1);
        assert!((s.values[0] - d.values[0]).abs() < 1e-10);
    }

    #[test]
    fn counterterm_is_grid_independent_closed_form() {
        let spec = FormFactorSpec::nelson(3.0, 1.0).unwrap();
        let e = self_energy(&spec, 3, 0.0).unwrap();
        assert!((e + 2.0 * std::f64::consts::PI * 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn undressed_limit_of_dressed_fiber() {
        let modes = ModeSet::line_log(2, 0.2, 2.0, 0.0).unwrap();
        let b = enumerate_basis(4, 5).unwrap();
        let spec = FormFactorSpec::new(FormFactorKind::NelsonSharp, 2.0, 0.2, 0.3).unwrap();
        let m = assemble_fiber(&[0.0], &spec, &modes, &b).unwrap();
        let d = dressed_fiber(&m, 2.0 + 1e-9, 3, &SolverOptions::default()).unwrap();
        assert!(d.spectra_gap < 1e-10 && d.truncation_bound < 1e-12);
        assert_eq!(d.tail, 0.0);
    }

    #[test]
    fn dressing_preserves_low_spectrum_up_to_truncation() {
        let modes = matched_line_grid(&[0.1, 0.4, 1.5, 2.0], 0.0).unwrap();
        let spec = FormFactorSpec::new(FormFactorKind::NelsonSharp, 2.0, 0.1, 1.0).unwrap();
        let b = enumerate_basis(6, 6).unwrap();
        let m = assemble_fiber(&[0.0], &spec, &modes, &b).unwrap();
        let d = dressed_fiber(&m, 1.0, 3, &SolverOptions::default()).unwrap();
        assert!(d.h.norm2() > 0.0 && d.tail < 1e-12);
        assert!(d.spectra_gap <= d.truncation_bound, "{} > {}", d.spectra_gap, d.truncation_bound);
        match dressed_fiber(&m, 0.3, 3, &SolverOptions::default()) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("N_max >= 8"), "{msg}"),
            other => panic!("expected a tail violation, got {other:?}"),
        }
    }

    #[test]
    fn matched_grid_reproduces_counterterm_at_second_order() {
        let edges = [0.1, 0.4, 1.5, 6.0];
        let modes = matched_line_grid(&edges, 0.0).unwrap();
        let spec = FormFactorSpec::new(FormFactorKind::NelsonSharp, 6.0, 0.1, 1.0).unwrap();
        let v = sample_form_factor(&spec, &modes).unwrap();
        let second_order: f64 = (0..modes.len())
            .map(|i| {
                let k = modes.magnitude(i);
                -v.0[i].norm_sqr() / (modes.omega(i) + k * k)
            })
            .sum();
        let e = self_energy(&spec, 1, 0.0).unwrap();
        assert!((second_order - e).abs() < 1e-9 * e.abs(), "{second_order} vs {e}");
        assert_eq!(modes.len(), 6);
        assert!(modes.node(0)[0] < 0.0 && modes.node(5)[0] > 1.5);
    }

    #[test]
    fn boson_number_grows_as_infrared_cutoff_drops() {
        let s0s = [0.4, 0.2, 0.1];
        let specs: Vec<_> = s0s.iter().map(|&s0| FormFactorSpec::new(FormFactorKind::NelsonSharp, 2.0, s0, 0.5).unwrap()).collect();
        let grids: Vec<_> = s0s.iter().map(|&s0| ModeSet::line_log(2, s0, 2.0, 0.0).unwrap()).collect();
        let pts = fiber_ir_sweep(&[0.4], &specs, &grids, 5, &SolverOptions::default()).unwrap();
        assert!(pts.windows(2).all(|w| w[1].num_expect >= w[0].num_expect));
        assert!(pts.iter().all(|p| p.gap > 0.0 && p.overlap_prev <= 1.0 + 1e-12));
        assert_eq!(pts[2].resolvent_gap, 0.0);
    }

    #[test]
    fn constant_sweep_has_zero_gaps() {
        let modes = ModeSet::line_log(2, 0.2, 2.0, 0.0).unwrap();
        let spec = FormFactorSpec::new(FormFactorKind::NelsonSharp, 2.0, 0.2, 0.5).unwrap();
        let pts = fiber_ir_sweep(&[0.0], &[spec.clone(), spec], &[modes], 4, &SolverOptions::default()).unwrap();
        assert_eq!(pts[0].resolvent_gap, 0.0);
        assert!((pts[1].overlap_prev - 1.0).abs() < 1e-12);
    }
}
