//! Truncated bosonic Fock space with a total boson cap.
//!
//! States are occupation tuples `(n_1, ..., n_M)` with `Σ n_i <= N_max`,
//! enumerated by total boson number and lexicographically (descending) inside
//! each grade, so the vacuum sits at index 0 and the one-boson state of mode
//! `i` at index `1 + i`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{inner, norm, ONE, ZERO};
use crate::modes::OneParticleVector;
use crate::sparse::CsrMatrix;

/// Default cap on the number of basis states.
pub const DEFAULT_CAPACITY: usize = 2_000_000;

/// Default tolerance on the Poisson tail before a coherent state is flagged.
pub const COHERENT_TAIL_TOL: f64 = 1e-8;

#[derive(Debug)]
pub struct FockBasis {
    modes: usize,
    cap: usize,
    occupations: Vec<u16>,
    grades: Vec<usize>,
    grade_start: Vec<usize>,
    index: HashMap<Vec<u16>, usize>,
}

pub fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Enumerates the basis with the default capacity.
pub fn enumerate_basis(modes: usize, cap: usize) -> Result<Arc<FockBasis>> {
    FockBasis::with_capacity(modes, cap, DEFAULT_CAPACITY)
}

impl FockBasis {
    pub fn with_capacity(modes: usize, cap: usize, budget: usize) -> Result<Arc<Self>> {
        if modes == 0 {
            return Err(Error::Config("Fock basis needs at least one mode".into()));
        }
        if cap > u16::MAX as usize {
            return Err(Error::Config(format!("boson cap {cap} is too large")));
        }
        let dimension = binomial((modes + cap) as u128, cap as u128);
        if dimension > budget as u128 {
            return Err(Error::Capacity { dimension, budget });
        }
        let dim = dimension as usize;
        let mut occupations = Vec::with_capacity(dim * modes);
        let mut grades = Vec::with_capacity(dim);
        let mut grade_start = Vec::with_capacity(cap + 2);
        let mut current = vec![0u16; modes];
        for n in 0..=cap {
            grade_start.push(grades.len());
            compositions(n, 0, &mut current, &mut |t| {
                occupations.extend_from_slice(t);
                grades.push(n);
            });
        }
        grade_start.push(grades.len());
        debug_assert_eq!(grades.len(), dim);
        let mut index = HashMap::with_capacity(dim);
        for (i, t) in occupations.chunks(modes).enumerate() {
            index.insert(t.to_vec(), i);
        }
        Ok(Arc::new(FockBasis { modes, cap, occupations, grades, grade_start, index }))
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn dim(&self) -> usize {
        self.grades.len()
    }

    pub fn occupation(&self, index: usize) -> &[u16] {
        &self.occupations[index * self.modes..(index + 1) * self.modes]
    }

    pub fn index_of(&self, occupation: &[u16]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Total boson number of a basis state.
    pub fn grade(&self, index: usize) -> usize {
        self.grades[index]
    }

    /// Index range of the states with exactly `n` bosons.
    pub fn grade_range(&self, n: usize) -> std::ops::Range<usize> {
        if n > self.cap {
            return self.dim()..self.dim();
        }
        self.grade_start[n]..self.grade_start[n + 1]
    }

    /// Number of states with at most `n` bosons.
    pub fn dim_up_to(&self, n: usize) -> usize {
        self.grade_start[n.min(self.cap) + 1]
    }

    fn shifted(&self, index: usize, remove: Option<usize>, add: Option<usize>) -> Option<usize> {
        let mut t = self.occupation(index).to_vec();
        if let Some(i) = remove {
            t[i] = t[i].checked_sub(1)?;
        }
        if let Some(i) = add {
            t[i] += 1;
        }
        self.index_of(&t)
    }
}

fn compositions(remaining: usize, pos: usize, current: &mut Vec<u16>, emit: &mut impl FnMut(&[u16])) {
    let m = current.len();
    if pos == m - 1 {
        current[pos] = remaining as u16;
        emit(current);
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k as u16;
        compositions(remaining - k, pos + 1, current, emit);
    }
    current[pos] = 0;
}

#[derive(Debug, Clone)]
pub struct FockVector {
    pub basis: Arc<FockBasis>,
    pub coeffs: Vec<Complex64>,
}

impl FockVector {
    pub fn new(basis: Arc<FockBasis>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::Shape(format!(
                "vector of length {} on a basis of dimension {}",
                coeffs.len(),
                basis.dim()
            )));
        }
        Ok(FockVector { basis, coeffs })
    }

    pub fn zeros(basis: &Arc<FockBasis>) -> Self {
        FockVector { basis: basis.clone(), coeffs: vec![ZERO; basis.dim()] }
    }

    pub fn vacuum(basis: &Arc<FockBasis>) -> Self {
        Self::basis_state(basis, 0)
    }

    pub fn basis_state(basis: &Arc<FockBasis>, index: usize) -> Self {
        let mut v = Self::zeros(basis);
        v.coeffs[index] = ONE;
        v
    }

    pub fn inner(&self, other: &FockVector) -> Complex64 {
        inner(&self.coeffs, &other.coeffs)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coeffs)
    }

    /// Highest grade carrying a nonzero coefficient (0 for the zero vector).
    pub fn max_grade(&self) -> usize {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(|(i, _)| self.basis.grade(i))
            .max()
            .unwrap_or(0)
    }

    /// Coefficients of grade `n` only.
    pub fn grade_component(&self, n: usize) -> &[Complex64] {
        &self.coeffs[self.basis.grade_range(n)]
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        FockVector {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| c / n).collect(),
        }
    }
}

/// Sparse operator on a truncated Fock space.
#[derive(Debug, Clone)]
pub struct FockOperator {
    pub basis: Arc<FockBasis>,
    pub matrix: CsrMatrix,
    /// Change of total boson number carried by every nonzero, if uniform.
    pub grading: Option<i32>,
    pub hermitian: bool,
}

impl FockOperator {
    pub fn new(basis: Arc<FockBasis>, matrix: CsrMatrix, grading: Option<i32>, hermitian: bool) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::Shape(format!(
                "{}x{} matrix on a basis of dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                basis.dim()
            )));
        }
        let op = FockOperator { basis, matrix, grading, hermitian };
        if let Some(d) = grading {
            if let Some(bad) = op.grading_violation(d) {
                return Err(Error::Shape(format!("nonzero at {bad:?} breaks declared grading {d}")));
            }
        }
        if hermitian {
            let defect = op.matrix.hermiticity_defect();
            if defect > 1e-12 * op.matrix.max_abs().max(f64::MIN_POSITIVE) {
                return Err(Error::NotHermitian { defect });
            }
        }
        Ok(op)
    }

    pub fn identity(basis: &Arc<FockBasis>) -> Self {
        FockOperator {
            basis: basis.clone(),
            matrix: CsrMatrix::identity(basis.dim()),
            grading: Some(0),
            hermitian: true,
        }
    }

    fn grading_violation(&self, degree: i32) -> Option<(usize, usize)> {
        self.matrix
            .iter()
            .find(|&(r, c, _)| self.basis.grade(r) as i64 - self.basis.grade(c) as i64 != degree as i64)
            .map(|(r, c, _)| (r, c))
    }

    /// Whether every nonzero moves the grade by exactly `degree`.
    pub fn respects_grading(&self, degree: i32) -> bool {
        self.grading_violation(degree).is_none()
    }

    pub fn apply(&self, v: &FockVector) -> FockVector {
        FockVector { basis: self.basis.clone(), coeffs: self.matrix.matvec(&v.coeffs) }
    }

    pub fn adjoint(&self) -> Self {
        FockOperator {
            basis: self.basis.clone(),
            matrix: self.matrix.adjoint(),
            grading: self.grading.map(|d| -d),
            hermitian: self.hermitian,
        }
    }

    pub fn compose(&self, other: &FockOperator) -> Result<Self> {
        let grading = match (self.grading, other.grading) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        Ok(FockOperator {
            basis: self.basis.clone(),
            matrix: self.matrix.matmul(&other.matrix)?,
            grading,
            hermitian: false,
        })
    }

    /// `self + s * other`; grading survives only if both agree.
    pub fn add_scaled(&self, other: &FockOperator, s: Complex64) -> Result<Self> {
        let grading = if self.grading == other.grading { self.grading } else { None };
        Ok(FockOperator {
            basis: self.basis.clone(),
            matrix: self.matrix.add_scaled(&other.matrix, s)?,
            grading,
            hermitian: self.hermitian && other.hermitian && s.im == 0.0,
        })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        FockOperator {
            basis: self.basis.clone(),
            matrix: self.matrix.scale(s),
            grading: self.grading,
            hermitian: self.hermitian && s.im == 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.matrix.to_dense()
    }
}

fn check_len(f: &OneParticleVector, basis: &FockBasis) -> Result<()> {
    if f.len() != basis.modes() {
        return Err(Error::Shape(format!(
            "one-particle vector of length {} on {} modes",
            f.len(),
            basis.modes()
        )));
    }
    Ok(())
}

/// `a(f) = Σ conj(f_i) a_i`, antilinear in `f`.
pub fn annihilator(f: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<FockOperator> {
    check_len(f, basis)?;
    let mut trip = Vec::new();
    for s in 0..basis.dim() {
        let occ = basis.occupation(s);
        for i in 0..basis.modes() {
            if occ[i] == 0 || f.0[i] == ZERO {
                continue;
            }
            let t = basis.shifted(s, Some(i), None).expect("lowered state exists");
            trip.push((t, s, f.0[i].conj() * (occ[i] as f64).sqrt()));
        }
    }
    let matrix = CsrMatrix::from_triplets(basis.dim(), basis.dim(), trip);
    Ok(FockOperator { basis: basis.clone(), matrix, grading: Some(-1), hermitian: false })
}

/// `a†(f)`, the exact adjoint of [`annihilator`]; creation beyond the cap is dropped.
pub fn creator(f: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<FockOperator> {
    Ok(annihilator(f, basis)?.adjoint())
}

/// Annihilator `a_i` of a single mode.
pub fn mode_annihilator(i: usize, basis: &Arc<FockBasis>) -> Result<FockOperator> {
    annihilator(&OneParticleVector::unit(basis.modes(), i), basis)
}

/// One-particle operator to be second quantized.
#[derive(Debug, Clone)]
pub enum OneParticleOperator {
    Diagonal(Vec<f64>),
    Dense(DMatrix<Complex64>),
}

/// `dΓ(T) = Σ_ij T_ij a_i† a_j`.
pub fn second_quantization(t: &OneParticleOperator, basis: &Arc<FockBasis>) -> Result<FockOperator> {
    let m = basis.modes();
    match t {
        OneParticleOperator::Diagonal(d) => {
            if d.len() != m {
                return Err(Error::Shape(format!("diagonal of length {} on {m} modes", d.len())));
            }
            let diag: Vec<Complex64> = (0..basis.dim())
                .map(|s| {
                    let occ = basis.occupation(s);
                    Complex64::new(occ.iter().zip(d).map(|(&n, &w)| n as f64 * w).sum(), 0.0)
                })
                .collect();
            Ok(FockOperator {
                basis: basis.clone(),
                matrix: CsrMatrix::from_diagonal(&diag),
                grading: Some(0),
                hermitian: true,
            })
        }
        OneParticleOperator::Dense(mat) => {
            if mat.nrows() != m || mat.ncols() != m {
                return Err(Error::Shape(format!(
                    "{}x{} one-particle matrix on {m} modes",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            let mut trip = Vec::new();
            for s in 0..basis.dim() {
                let occ = basis.occupation(s);
                let diag: Complex64 = (0..m).map(|i| mat[(i, i)] * occ[i] as f64).sum();
                trip.push((s, s, diag));
                for j in 0..m {
                    if occ[j] == 0 {
                        continue;
                    }
                    for i in 0..m {
                        if i == j || mat[(i, j)] == ZERO {
                            continue;
                        }
                        let target = basis.shifted(s, Some(j), Some(i)).expect("same grade");
                        let factor = (occ[j] as f64 * (occ[i] as f64 + 1.0)).sqrt();
                        trip.push((target, s, mat[(i, j)] * factor));
                    }
                }
            }
            let matrix = CsrMatrix::from_triplets(basis.dim(), basis.dim(), trip);
            let hermitian = crate::linalg::hermiticity_defect(mat) <= 1e-12 * crate::linalg::max_abs(mat);
            Ok(FockOperator { basis: basis.clone(), matrix, grading: Some(0), hermitian })
        }
    }
}

/// Number operator `dΓ(1)`.
pub fn number_operator(basis: &Arc<FockBasis>) -> FockOperator {
    second_quantization(&OneParticleOperator::Diagonal(vec![1.0; basis.modes()]), basis)
        .expect("diagonal of matching length")
}

/// `Σ_{n>cap} x^n / n!`, summed term by term.
pub fn exp_tail(x: f64, cap: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    for n in 1..=cap + 1 {
        term *= x / n as f64;
    }
    let mut sum = 0.0;
    let mut n = cap + 1;
    loop {
        sum += term;
        n += 1;
        term *= x / n as f64;
        if term <= 1e-18 * sum || term == 0.0 {
            break;
        }
    }
    sum
}

/// Probability mass of a Poisson(x) law above `cap`.
pub fn poisson_tail(x: f64, cap: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    // Summing the tail directly keeps full relative accuracy when it is tiny.
    let mut log_term = -x;
    for n in 1..=cap + 1 {
        log_term += (x / n as f64).ln();
    }
    let mut term = log_term.exp();
    let mut sum = 0.0;
    let mut n = cap + 1;
    loop {
        sum += term;
        n += 1;
        term *= x / n as f64;
        if term <= 1e-18 * sum || term == 0.0 || n > cap + 10_000 {
            break;
        }
    }
    sum.min(1.0)
}

/// Exponential vector `ε(f) = Σ_n f^{⊗n}/√(n!)` truncated at the cap, with the
/// squared-norm deficit `Σ_{n>cap} ||f||^{2n}/n!`.
pub fn exponential_vector(f: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<(FockVector, f64)> {
    check_len(f, basis)?;
    let mut inv_sqrt_fact = vec![1.0f64; basis.cap() + 1];
    for n in 1..=basis.cap() {
        inv_sqrt_fact[n] = inv_sqrt_fact[n - 1] / (n as f64).sqrt();
    }
    let coeffs = (0..basis.dim())
        .map(|s| {
            let mut c = ONE;
            for (i, &n) in basis.occupation(s).iter().enumerate() {
                if n > 0 {
                    c *= f.0[i].powu(n as u32) * inv_sqrt_fact[n as usize];
                }
            }
            c
        })
        .collect();
    Ok((FockVector { basis: basis.clone(), coeffs }, exp_tail(f.norm2(), basis.cap())))
}

/// Coherent state `e^{-||g||²/2} ε(g)`, renormalized on the truncated space.
pub fn coherent_state(g: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<FockVector> {
    let (eps, _) = exponential_vector(g, basis)?;
    let tail = poisson_tail(g.norm2(), basis.cap());
    if tail > COHERENT_TAIL_TOL {
        log::warn!(
            "coherent state with ||g||^2 = {:.3} loses Poisson mass {tail:.2e} above N_max = {}",
            g.norm2(),
            basis.cap()
        );
    }
    Ok(eps.normalized())
}

/// Displacement operator together with its truncation diagnostics.
#[derive(Debug, Clone)]
pub struct Displacement {
    pub op: FockOperator,
    /// `||g||²`.
    pub norm2: f64,
    /// `max |(W†W - I)_{st}|` over vacuum-sector entries, i.e. `|⟨WΩ, WΩ⟩ - 1|`.
    pub unitarity_defect: f64,
}

/// Sum of `X^k / k!` for `k <= cap`, the exact exponential of a nilpotent or
/// truncated raising/lowering operator.
pub fn nilpotent_exp(x: &FockOperator) -> Result<FockOperator> {
    let cap = x.basis.cap();
    let mut total = FockOperator::identity(&x.basis);
    total.hermitian = false;
    let mut term = total.clone();
    for k in 1..=cap {
        term = term.compose(x)?.scale(Complex64::new(1.0 / k as f64, 0.0));
        if term.matrix.nnz() == 0 {
            break;
        }
        total = total.add_scaled(&term, ONE)?;
    }
    total.grading = None;
    Ok(total)
}

/// `W(g) = e^{a†(g) - a(g)}` through the normal-ordered product
/// `e^{-||g||²/2} exp(a†(g)) exp(-a(g))`.
pub fn displacement(g: &OneParticleVector, basis: &Arc<FockBasis>) -> Result<Displacement> {
    let x = g.norm2();
    let lower = nilpotent_exp(&annihilator(g, basis)?.scale(-ONE))?;
    let raise = nilpotent_exp(&creator(g, basis)?)?;
    let mut op = raise.compose(&lower)?.scale(Complex64::new((-0.5 * x).exp(), 0.0));
    op.grading = if x == 0.0 { Some(0) } else { None };
    let d = Displacement { op, norm2: x, unitarity_defect: 0.0 };
    let unitarity_defect = d.defect_on_budget(0);
    Ok(Displacement { unitarity_defect, ..d })
}

impl Displacement {
    /// `max |(W†W - I)_{st}|` over basis states of grade at most `budget`.
    pub fn defect_on_budget(&self, budget: usize) -> f64 {
        let basis = &self.op.basis;
        let k = basis.dim_up_to(budget);
        let wt = self.op.matrix.adjoint();
        let cols: Vec<Vec<(usize, Complex64)>> = (0..k).map(|t| wt.row(t).collect()).collect();
        let dense_col = |t: usize| {
            let mut c = vec![ZERO; basis.dim()];
            for &(r, v) in &cols[t] {
                c[r] = v.conj();
            }
            c
        };
        let mut worst = 0.0f64;
        for t in 0..k {
            let ct = dense_col(t);
            for s in 0..=t {
                let cs = dense_col(s);
                let mut e = inner(&cs, &ct);
                if s == t {
                    e -= ONE;
                }
                worst = worst.max(e.norm());
            }
        }
        worst
    }

    /// Bound on `||(W_trunc - W) Ψ||` for unit `Ψ` supported on grades at most
    /// `budget`, where `W` is the exact displacement projected to the space.
    pub fn tail_bound(&self, budget: usize) -> f64 {
        displacement_tail_bound(self.norm2, self.op.basis.cap(), budget)
    }
}

/// Truncation error of the normal-ordered displacement on grades `<= budget`.
///
/// For `Ψ` of grade `m <= K`, `exp(-a(g))Ψ` has components of grade `m - j`
/// with norm at most `sqrt(m!/(m-j)!) x^{j/2}/j!`; applying `exp(a†(g))` to a
/// grade-`p` vector loses at most `sqrt(Σ_{j>N-p} C(p+j, j) x^j/j!)` above
/// the cap. Summing over grades by Cauchy-Schwarz gives the bound.
pub fn displacement_tail_bound(x: f64, cap: usize, budget: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let k = budget.min(cap);
    let lowering: f64 = (0..=k)
        .map(|j| {
            let falling: f64 = (0..j).map(|i| (k - i) as f64).product();
            falling.sqrt() * x.powf(j as f64 / 2.0) / factorial(j)
        })
        .sum();
    let raising = raising_tail(x, cap, k);
    (-0.5 * x).exp() * ((k + 1) as f64).sqrt() * lowering * raising.sqrt()
}

/// `Σ_{j > cap - p} C(p + j, j) x^j / j!`: squared norm lost above the cap when
/// `exp(a†(g))` acts on a unit vector of grade `p`.
pub fn raising_tail(x: f64, cap: usize, p: usize) -> f64 {
    let start = cap + 1 - p.min(cap + 1);
    let mut sum = 0.0;
    let mut j = start;
    loop {
        let term = binomial((p + j) as u128, j as u128) as f64 * (j as f64 * x.ln() - ln_factorial(j)).exp();
        let term = if x == 0.0 { 0.0 } else { term };
        sum += term;
        j += 1;
        if (term <= 1e-18 * sum && j > start + 2) || term == 0.0 || j > start + 2000 {
            break;
        }
    }
    sum
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

pub fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}
