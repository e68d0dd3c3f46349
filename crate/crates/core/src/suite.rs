//! Acceptance battery: one pass/fail outcome per criterion.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convergence::{resolvent_distance, DistanceMode, EmbeddedMember, EmbeddedOperatorFamily};
use crate::doi::{decomposability_norm, doi_apply, hilbert_schmidt, spectral_decompose, DoiKernel, DEFAULT_TOL_EIG};
use crate::dressing::{dress_lower, mollified_inner_check, renorm_metric, transfer};
use crate::eigen::{lowest_eigenpairs, SolverOptions};
use crate::error::Result;
use crate::fock::{coherent_state, enumerate_basis, exponential_vector, factorial, number_operator, FockBasis, FockVector};
use crate::linalg::{hermitian_eigenvalues, inner, matmul, max_abs, norm, ZERO};
use crate::modes::{self_energy, FormFactorKind, FormFactorSpec, GridKind, Measure, ModeSet, OneParticleVector};
use crate::nelson::{fiber_ir_sweep, matched_line_grid};
use crate::spinboson::{
    assemble_sb, identity_defects, pauli_z, pull_through_residual, renorm_spin_matrix, renormalized_sb, sb_metric,
    SpinBosonState, SpinKernel, SpinSpace,
};
use crate::vhm::{assemble_vhm, ground_state, renormalized_vhm};

pub const CRITERIA: usize = 14;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

pub fn name(id: usize) -> &'static str {
    match id {
        1 => "vHM ground energy",
        2 => "coherent ground state",
        3 => "exponential-vector eigenrelation",
        4 => "metric unipotence and group laws",
        5 => "mollified inner product",
        6 => "self-energy closed form",
        7 => "DOI recovery and decomposability",
        8 => "standard spin-boson vanishing",
        9 => "energy-preserving spin-boson spectrum",
        10 => "spin-boson operator identities",
        11 => "infrared catastrophe",
        12 => "generalized resolvent convergence",
        13 => "Nelson fiber cutoff sweeps",
        14 => "pull-through residual",
        _ => "unknown criterion",
    }
}

/// Runs criterion `id` (1-based). Errors count as failures.
pub fn run_criterion(id: usize, seed: u64) -> Outcome {
    let start = Instant::now();
    let result = match id {
        1 => vhm_ground_energy(),
        2 => coherent_ground_state(),
        3 => exponential_eigenrelation(seed),
        4 => metric_unipotence(seed),
        5 => mollified_identity(seed),
        6 => self_energy_closed_form(),
        7 => doi_recovery(seed),
        8 => standard_sb_vanishing(seed),
        9 => energy_preserving_sb(seed),
        10 => sb_identities(seed),
        11 => ir_catastrophe(),
        12 => resolvent_convergence(),
        13 => nelson_sweeps(),
        14 => pull_through(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let elapsed = start.elapsed();
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    let (passed, detail) = match runtime_limit(id) {
        Some(limit) if elapsed > limit => (false, format!("{detail}; runtime over {} s", limit.as_secs_f64())),
        _ => (passed, detail),
    };
    Outcome { id, name: name(id), passed, detail, elapsed }
}

fn runtime_limit(id: usize) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(1)),
        13 => Some(Duration::from_secs(60)),
        _ => None,
    }
}

pub fn run_suite(seed: u64) -> Vec<Outcome> {
    (1..=CRITERIA).map(|id| run_criterion(id, seed)).collect()
}

type Check = Result<(bool, String)>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single_mode(omega: f64) -> ModeSet {
    ModeSet::new(Measure::Line, GridKind::Custom, vec![vec![omega]], vec![1.0], 0.0).expect("valid single mode")
}

fn nodes(omegas: &[f64]) -> ModeSet {
    ModeSet::new(Measure::Line, GridKind::Custom, omegas.iter().map(|&k| vec![k]).collect(), vec![1.0; omegas.len()], 0.0)
        .expect("valid custom grid")
}

fn random_config(rng: &mut ChaCha8Rng, m: usize, norm2: f64) -> OneParticleVector {
    let g = OneParticleVector((0..m).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect());
    g.scale(c((norm2 / g.norm2()).sqrt(), 0.0))
}

/// Normalized random vector supported on grades `<= grade`, `spin` blocks.
fn random_low(rng: &mut ChaCha8Rng, spin: usize, basis: &Arc<FockBasis>, grade: usize) -> Vec<Complex64> {
    let d = basis.dim();
    let mut x = vec![ZERO; spin * d];
    for s in 0..spin {
        for i in 0..basis.dim_up_to(grade) {
            x[s * d + i] = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
    }
    let n = norm(&x);
    x.iter().map(|z| z / n).collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    random_matrix(rng, n).qr().q()
}

fn vhm_ground_energy() -> Check {
    let modes = single_mode(2.0);
    let basis = enumerate_basis(1, 20)?;
    let v = OneParticleVector::from_real(&[1.0]);
    let model = assemble_vhm(&v, &modes, &basis)?;
    let e0 = ground_state(&model, 1, &SolverOptions::default())?.values[0];
    let oracle = -1.0 / 2.0;
    Ok(((e0 - oracle).abs() <= 1e-8, format!("λ₀ = {e0:.12}, oracle {oracle}")))
}

fn coherent_ground_state() -> Check {
    let modes = single_mode(2.0);
    let basis = enumerate_basis(1, 20)?;
    let v = OneParticleVector::from_real(&[1.0]);
    let model = assemble_vhm(&v, &modes, &basis)?;
    let x = &ground_state(&model, 1, &SolverOptions::default())?.vectors[0];
    let g = OneParticleVector::from_real(&[-1.0 / 2.0]);
    let cg = coherent_state(&g, &basis)?;
    let overlap = inner(x, &cg.coeffs).norm();
    Ok((overlap >= 1.0 - 1e-6, format!("|⟨x₀, c_g⟩| = {overlap:.12}")))
}

fn exponential_eigenrelation(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = 6;
    let basis = enumerate_basis(2, cap)?;
    let g = random_config(&mut rng, 2, 1.3);
    let f = random_config(&mut rng, 2, 0.9);
    let (eps, _) = exponential_vector(&f, &basis)?;
    let lhs = dress_lower(&g, &basis)?.apply(&eps);
    let gf = g.inner(&f);
    let mut worst: f64 = 0.0;
    for n in 0..=cap {
        // Grade n of e^{a(g)} ε(f) is Σ_{j <= cap-n} ⟨g,f⟩^j / j! ε(f)_n.
        let partial: Complex64 = (0..=cap - n).map(|j| gf.powu(j as u32) / factorial(j)).sum();
        for i in basis.grade_range(n) {
            let want = eps.coeffs[i] * partial;
            worst = worst.max((lhs.coeffs[i] - want).norm() / want.norm().max(1.0));
        }
    }
    Ok((worst <= 1e-12, format!("max gradewise deviation {worst:.2e}")))
}

fn metric_unipotence(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4);
    let basis = enumerate_basis(3, 4)?;
    let g = random_config(&mut rng, 3, 2.0);
    let h = random_config(&mut rng, 3, 1.5);
    let k = random_config(&mut rng, 3, 1.0);
    let det = renorm_metric(&g, &basis)?.det();
    let n = basis.dim();
    let id = DMatrix::<Complex64>::identity(n, n);
    let u = |a: &OneParticleVector, b: &OneParticleVector| transfer(a, b, &basis).map(|t| t.to_dense());
    let self_map = max_abs(&(u(&g, &g)? - &id));
    let inverse = max_abs(&(matmul(&u(&h, &g)?, &u(&g, &h)?) - &id));
    let compose = max_abs(&(matmul(&u(&h, &k)?, &u(&g, &h)?) - u(&g, &k)?));
    let group = self_map.max(inverse).max(compose);
    Ok((
        (det - 1.0).abs() <= 1e-9 && group <= 1e-12,
        format!("|det G - 1| = {:.2e}, group-law defect {group:.2e}", (det - 1.0).abs()),
    ))
}

fn mollified_identity(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5);
    let basis = enumerate_basis(1, 16)?;
    let g = OneParticleVector::from_real(&[1.0]);
    let metric = renorm_metric(&g, &basis)?;
    let mut worst_gap: f64 = 0.0;
    let mut worst_bound: f64 = 0.0;
    let mut within = true;
    for _ in 0..8 {
        let psi = FockVector::new(basis.clone(), random_low(&mut rng, 1, &basis, 1))?;
        let phi = FockVector::new(basis.clone(), random_low(&mut rng, 1, &basis, 1))?;
        let r = mollified_inner_check(&psi, &phi, &g, &metric)?;
        within &= r.gap <= r.bound + 1e-16;
        worst_gap = worst_gap.max(r.gap);
        worst_bound = worst_bound.max(r.bound);
    }
    Ok((
        within && worst_gap <= 1e-10,
        format!("max gap {worst_gap:.2e}, max bound {worst_bound:.2e} (grade <= 1 states)"),
    ))
}

fn self_energy_closed_form() -> Check {
    let mut worst: f64 = 0.0;
    for (sigma, sigma0) in [(3.0, 1.0), (10.0, 0.1)] {
        let spec = FormFactorSpec::nelson(sigma, sigma0)?;
        let e = self_energy(&spec, 3, 0.0)?;
        let exact = -2.0 * PI * ((1.0 + sigma) / (1.0 + sigma0)).ln();
        worst = worst.max(((e - exact) / exact).abs());
    }
    Ok((worst <= 1e-6, format!("max relative deviation {worst:.2e}")))
}

fn doi_recovery(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7);
    let one = DoiKernel::custom(|_, _| c(1.0, 0.0));
    let mut recovery: f64 = 0.0;
    let mut bounds_hold = true;
    for _ in 0..20 {
        let u = random_unitary(&mut rng, 4);
        let diag = DVector::from_fn(4, |i, _| c((i / 2) as f64 + rng.gen::<f64>(), rng.gen::<f64>() - 0.5));
        let b = matmul(&matmul(&u, &DMatrix::from_diagonal(&diag)), &u.adjoint());
        let dec = spectral_decompose(&b, DEFAULT_TOL_EIG)?;
        let a = random_matrix(&mut rng, 4);
        recovery = recovery.max(max_abs(&(doi_apply(&a, &dec, &one)? - &a)));
        let n = decomposability_norm(&a, &dec, &dec, rng.gen())?;
        bounds_hold &= n.estimate <= n.upper_bound + 1e-12 && n.upper_bound <= hilbert_schmidt(&a) + 1e-12;
    }
    Ok((
        recovery <= 1e-12 && bounds_hold,
        format!("f ≡ 1 deviation {recovery:.2e}; Hilbert–Schmidt bound held on all 20: {bounds_hold}"),
    ))
}

fn standard_sb_vanishing(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x8);
    let spin = SpinSpace::standard();
    let basis = enumerate_basis(1, 4)?;
    let vac = FockVector::vacuum(&basis);
    let mut element: f64 = 0.0;
    let mut singular: f64 = 0.0;
    for x in [0.5f64, 1.0, 2.0] {
        let g = OneParticleVector::from_real(&[x.sqrt()]);
        let metric = sb_metric(&spin, &g, &basis)?;
        let form = renorm_spin_matrix(&spin, &g, SpinKernel::Regular, &basis, &metric)?;
        let psi: Vec<Complex64> = (0..2).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let phi: Vec<Complex64> = (0..2).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let p = SpinBosonState::product(&psi, &vac);
        let q = SpinBosonState::product(&phi, &vac);
        let fq = &form.operator * DVector::from_column_slice(&q.coeffs);
        let value = metric.inner(&p.coeffs, fq.as_slice());
        let expected = (-2.0 * x).exp() * inner(&psi, &[phi[0], -phi[1]]);
        element = element.max((value - expected).norm());
        singular = singular.max(max_abs(&renorm_spin_matrix(&spin, &g, SpinKernel::Singular, &basis, &metric)?.form));
    }
    let modes = nodes(&[0.8, 1.9]);
    let basis = enumerate_basis(2, 5)?;
    let g = random_config(&mut rng, 2, 1.0);
    let r = renormalized_sb(&spin, &g, SpinKernel::Singular, &modes, &basis)?;
    let e = hermitian_eigenvalues(&r.whitened);
    let split = (e[1] - e[0]).abs();
    Ok((
        element <= 1e-10 && singular == 0.0 && split <= 1e-9,
        format!("vacuum element deviation {element:.2e}, singular form max {singular:.1e}, λ₁ - λ₀ = {split:.2e}"),
    ))
}

fn energy_preserving_sb(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9);
    let (omegas, cap) = ([0.8, 1.9], 5);
    let modes = nodes(&omegas);
    let basis = enumerate_basis(2, cap)?;
    let spin = SpinSpace::new(pauli_z(), pauli_z())?;
    let g = random_config(&mut rng, 2, 1.0);
    let r = renormalized_sb(&spin, &g, SpinKernel::Regular, &modes, &basis)?;
    let got = hermitian_eigenvalues(&r.whitened);
    // Occupation oracle: all (n1, n2) with n1 + n2 <= cap.
    let mut free = Vec::new();
    for n1 in 0..=cap {
        for n2 in 0..=cap - n1 {
            free.push(n1 as f64 * omegas[0] + n2 as f64 * omegas[1]);
        }
    }
    let mut want: Vec<f64> = free.iter().flat_map(|e| [e - 1.0, e + 1.0]).collect();
    want.sort_by(f64::total_cmp);
    let dev = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((
        got.len() == want.len() && dev <= 1e-9,
        format!("{} levels, max deviation {dev:.2e}", got.len()),
    ))
}

fn sb_identities(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa);
    let modes = nodes(&[0.9, 1.6]);
    let basis = enumerate_basis(2, 6)?;
    let spin = SpinSpace::standard();
    let v = random_config(&mut rng, 2, 0.5);
    let g = random_config(&mut rng, 2, 0.5);
    let psi = SpinBosonState::new(2, basis.clone(), random_low(&mut rng, 2, &basis, 5))?;
    let d = identity_defects(&spin, &v, &g, &modes, &basis, &psi, 0)?;
    let small = g.scale(c(0.2 / g.norm(), 0.0));
    let psi1 = SpinBosonState::new(2, basis.clone(), random_low(&mut rng, 2, &basis, 1))?;
    let e = identity_defects(&spin, &v, &small, &modes, &basis, &psi1, 1)?;
    let worst = d.free.max(d.coupling).max(e.exchange);
    Ok((
        worst <= 1e-10,
        format!("free {:.2e}, coupling {:.2e}, exchange {:.2e}", d.free, d.coupling, e.exchange),
    ))
}

fn ir_catastrophe() -> Check {
    let basis = enumerate_basis(1, 40)?;
    let number = number_operator(&basis);
    let mut ok = true;
    let mut prev = (f64::NEG_INFINITY, f64::INFINITY);
    let mut worst = (0.0f64, 0.0f64);
    for x in [1.0f64, 2.0, 4.0, 8.0] {
        let g = OneParticleVector::from_real(&[x.sqrt()]);
        let cg = coherent_state(&g, &basis)?;
        let n = cg.inner(&number.apply(&cg)).re;
        let vac = cg.coeffs[0].norm();
        worst.0 = worst.0.max((n - x).abs());
        worst.1 = worst.1.max((vac - (-x / 2.0).exp()).abs());
        ok &= n > prev.0 && vac < prev.1;
        prev = (n, vac);
    }
    ok &= worst.0 <= 1e-6 && worst.1 <= 1e-8;
    Ok((ok, format!("max |⟨N⟩ - ||g||²| = {:.2e}, max vacuum-overlap deviation {:.2e}", worst.0, worst.1)))
}

fn resolvent_convergence() -> Check {
    // vHM: renormalized members whitened and embedded by ι = D L^{-*}.
    let modes = nodes(&[0.7, 1.3, 2.1]);
    let basis = enumerate_basis(3, 5)?;
    let mut members = Vec::new();
    for scale in [0.5, 1.0, 1.5, 2.0] {
        let g = OneParticleVector::from_real(&[-0.6 * scale, -0.4 * scale, 0.3 * scale]);
        let r = renormalized_vhm(&g, &modes, &basis)?;
        members.push(EmbeddedMember { op: r.whitened, iota: r.metric.embedding() });
    }
    let family = EmbeddedOperatorFamily::new(basis.dim(), members, 3)?;
    let mut vhm: f64 = 0.0;
    for z in [Complex64::i(), c(0.0, 2.0)] {
        vhm = vhm.max(resolvent_distance(&family, z, &DistanceMode::Norm)?.into_iter().fold(0.0, f64::max));
    }

    // Spin-boson: Weisskopf–Wigner configurations on nested infrared windows
    // of one grid, each dressed onto the common space.
    let modes = ModeSet::radial_log(4, 0.05, 2.0, 0.0)?;
    let basis = enumerate_basis(4, 4)?;
    let spin = SpinSpace::standard();
    let mut ops = Vec::new();
    for sigma0 in [1.0, 0.4, 0.15, 0.05] {
        let spec = FormFactorSpec::new(FormFactorKind::WeisskopfWigner, 2.0, sigma0, 0.3)?;
        let v = crate::modes::sample_form_factor(&spec, &modes)?;
        let g = crate::modes::vhm_ground_config(&v, &modes)?;
        ops.push(renormalized_sb(&spin, &g, SpinKernel::Regular, &modes, &basis)?.dressed);
    }
    let family = EmbeddedOperatorFamily::on_common_space(ops, 3)?;
    let sb = resolvent_distance(&family, Complex64::i(), &DistanceMode::Norm)?;
    let monotone = sb.windows(2).all(|w| w[1] < w[0]);
    Ok((
        vhm <= 1e-8 && monotone,
        format!(
            "vHM max distance {vhm:.2e} (z = i, 2i); SB distances {}",
            sb.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(" > ")
        ),
    ))
}

fn nelson_sweeps() -> Check {
    let opts = SolverOptions::default();
    let (sigma0, coupling) = (0.1, 1.0);
    let sigmas = [2.0, 4.0, 8.0, 16.0];
    let specs: Vec<FormFactorSpec> = sigmas
        .iter()
        .map(|&s| FormFactorSpec::new(FormFactorKind::NelsonSharp, s, sigma0, coupling))
        .collect::<Result<_>>()?;
    let grids: Vec<ModeSet> = sigmas.iter().map(|&s| matched_line_grid(&[sigma0, 0.4, 1.5, s], 0.0)).collect::<Result<_>>()?;
    let pts = fiber_ir_sweep(&[0.0], &specs, &grids, 6, &opts)?;
    let sub: Vec<f64> = pts.iter().map(|p| p.e0).collect();
    let steps: Vec<f64> = sub.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let decreasing = steps.windows(2).all(|w| w[1] < w[0]);
    let variation = sub.iter().cloned().fold(f64::MIN, f64::max) - sub.iter().cloned().fold(f64::MAX, f64::min);
    let bare_drop = pts[0].e0_bare - pts[pts.len() - 1].e0_bare;
    let bare_monotone = pts.windows(2).all(|w| w[1].e0_bare < w[0].e0_bare);

    let sigma0s = [0.2, 0.1, 0.05];
    let specs: Vec<FormFactorSpec> = sigma0s
        .iter()
        .map(|&s0| FormFactorSpec::new(FormFactorKind::NelsonSharp, 2.0, s0, coupling))
        .collect::<Result<_>>()?;
    let grids: Vec<ModeSet> = sigma0s.iter().map(|&s0| matched_line_grid(&[s0, 0.5, 1.0, 2.0], 0.0)).collect::<Result<_>>()?;
    let ir = fiber_ir_sweep(&[0.4], &specs, &grids, 6, &opts)?;
    let numbers: Vec<f64> = ir.iter().map(|p| p.num_expect).collect();
    let nondecreasing = numbers.windows(2).all(|w| w[1] >= w[0]);

    let passed = decreasing && bare_monotone && bare_drop > 10.0 * variation && nondecreasing;
    Ok((
        passed,
        format!(
            "P=0 steps {}; bare drop {bare_drop:.4} vs subtracted variation {variation:.2e}; P=0.4 ⟨N⟩ {}",
            steps.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(" > "),
            numbers.iter().map(|n| format!("{n:.3}")).collect::<Vec<_>>().join(" <= ")
        ),
    ))
}

fn pull_through() -> Check {
    let modes = single_mode(1.3);
    let basis = enumerate_basis(1, 14)?;
    let opts = SolverOptions { tol: 1e-10, ..Default::default() };
    let spin = SpinSpace::standard();
    let v = OneParticleVector::from_real(&[0.5]);
    let h = assemble_sb(&spin, &v, &modes, &basis)?;
    let p = lowest_eigenpairs(&h, 1, &opts)?;
    let r = pull_through_residual(&spin, &v, &modes, &basis, &h, p.values[0], &p.vectors[0], opts.tol)?;
    Ok((r.max <= 1e-6, format!("max residual {:.2e}", r.max)))
}
