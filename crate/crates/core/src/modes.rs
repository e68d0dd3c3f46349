//! Discretized one-particle momentum space.
//!
//! A [`ModeSet`] holds quadrature nodes and weights for the boson momentum
//! space. One-particle vectors store `c_i = sqrt(w_i) f(k_i)`, so the grid
//! inner product `Σ w_i conj(u(k_i)) v(k_i)` becomes the standard one on the
//! coefficients.
//!
//! Default grids are logarithmic with 6 to 10 nodes per decade of momentum.

use std::f64::consts::PI;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{inner, ZERO};

/// Absolute tolerance used for the self-energy quadrature.
pub const SELF_ENERGY_ABS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Linear,
    Logarithmic,
    Custom,
}

/// How nodes sit in momentum space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// One dimension, signed nodes, measure `dk`.
    Line,
    /// Isotropic reduction of three dimensions: nodes are radii and weights
    /// carry the `4π k²` shell factor.
    Radial3,
    /// Three dimensions with vector-valued nodes.
    Product3,
}

impl Measure {
    pub fn dimension(self) -> usize {
        match self {
            Measure::Line => 1,
            Measure::Radial3 | Measure::Product3 => 3,
        }
    }

    fn components(self) -> usize {
        match self {
            Measure::Line | Measure::Radial3 => 1,
            Measure::Product3 => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    measure: Measure,
    kind: GridKind,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    mass: f64,
}

impl ModeSet {
    pub fn new(
        measure: Measure,
        kind: GridKind,
        nodes: Vec<Vec<f64>>,
        weights: Vec<f64>,
        mass: f64,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Config("mode set needs at least one node".into()));
        }
        if nodes.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::Config(format!("mass must be finite and nonnegative, got {mass}")));
        }
        for (i, (n, &w)) in nodes.iter().zip(&weights).enumerate() {
            if n.len() != measure.components() {
                return Err(Error::Shape(format!(
                    "node {i} has {} components, expected {}",
                    n.len(),
                    measure.components()
                )));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("weight {i} must be positive, got {w}")));
            }
            if n.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("node {i} is not finite")));
            }
            if measure == Measure::Radial3 && n[0] < 0.0 {
                return Err(Error::Config(format!("radial node {i} is negative")));
            }
        }
        for i in 0..nodes.len() {
            for j in 0..i {
                if nodes[i] == nodes[j] {
                    return Err(Error::Config(format!("nodes {j} and {i} coincide")));
                }
            }
        }
        Ok(ModeSet { measure, kind, nodes, weights, mass })
    }

    /// Radial grid for isotropic three-dimensional data with logarithmically
    /// spaced cells on `[k_min, k_max]`.
    pub fn radial_log(count: usize, k_min: f64, k_max: f64, mass: f64) -> Result<Self> {
        let edges = log_edges(count, k_min, k_max)?;
        Self::from_cells(Measure::Radial3, GridKind::Logarithmic, &edges, mass, false)
    }

    pub fn radial_linear(count: usize, k_min: f64, k_max: f64, mass: f64) -> Result<Self> {
        let edges = linear_edges(count, k_min, k_max)?;
        Self::from_cells(Measure::Radial3, GridKind::Linear, &edges, mass, false)
    }

    /// Symmetric signed one-dimensional grid with `2 * per_side` nodes; the
    /// positive half has logarithmic cells on `[k_min, k_max]`.
    pub fn line_log(per_side: usize, k_min: f64, k_max: f64, mass: f64) -> Result<Self> {
        let edges = log_edges(per_side, k_min, k_max)?;
        Self::from_cells(Measure::Line, GridKind::Logarithmic, &edges, mass, true)
    }

    pub fn line_linear(per_side: usize, k_min: f64, k_max: f64, mass: f64) -> Result<Self> {
        let edges = linear_edges(per_side, k_min, k_max)?;
        Self::from_cells(Measure::Line, GridKind::Linear, &edges, mass, true)
    }

    /// Coarse cubic product grid on `[-k_max, k_max]³` with `per_axis` cells
    /// per axis (midpoint rule).
    pub fn product_linear(per_axis: usize, k_max: f64, mass: f64) -> Result<Self> {
        if per_axis == 0 || !(k_max > 0.0) {
            return Err(Error::Config("product grid needs per_axis >= 1 and k_max > 0".into()));
        }
        let h = 2.0 * k_max / per_axis as f64;
        let axis: Vec<f64> = (0..per_axis).map(|i| -k_max + (i as f64 + 0.5) * h).collect();
        let mut nodes = Vec::new();
        for &x in &axis {
            for &y in &axis {
                for &z in &axis {
                    nodes.push(vec![x, y, z]);
                }
            }
        }
        let weights = vec![h * h * h; nodes.len()];
        Self::new(Measure::Product3, GridKind::Linear, nodes, weights, mass)
    }

    fn from_cells(measure: Measure, kind: GridKind, edges: &[f64], mass: f64, mirrored: bool) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (node, weight) = match measure {
                Measure::Radial3 => (
                    0.75 * (b.powi(4) - a.powi(4)) / (b.powi(3) - a.powi(3)),
                    4.0 * PI * (b.powi(3) - a.powi(3)) / 3.0,
                ),
                _ => (0.5 * (a + b), b - a),
            };
            nodes.push(node);
            weights.push(weight);
        }
        if mirrored {
            let mut signed: Vec<Vec<f64>> = nodes.iter().rev().map(|k| vec![-k]).collect();
            signed.extend(nodes.iter().map(|&k| vec![k]));
            let mut w: Vec<f64> = weights.iter().rev().copied().collect();
            w.extend(weights.iter().copied());
            Self::new(measure, kind, signed, w, mass)
        } else {
            Self::new(measure, kind, nodes.into_iter().map(|k| vec![k]).collect(), weights, mass)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn dimension(&self) -> usize {
        self.measure.dimension()
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i]
    }

    /// `|k_i|`.
    pub fn magnitude(&self, i: usize) -> f64 {
        self.nodes[i].iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `ω_i = sqrt(|k_i|² + μ²)`.
    pub fn omega(&self, i: usize) -> f64 {
        let k = self.magnitude(i);
        (k * k + self.mass * self.mass).sqrt()
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.omega(i)).collect()
    }

    /// Whether nodes carry momentum vectors (needed by `dΓ(k)`).
    pub fn has_vector_momenta(&self) -> bool {
        self.measure != Measure::Radial3
    }

    /// Component `c` of `k_i`; only meaningful for vector-valued grids.
    pub fn momentum_component(&self, i: usize, c: usize) -> f64 {
        self.nodes[i][c]
    }

    /// Samples `f` on the grid with weight absorption.
    pub fn sample<F: Fn(&[f64]) -> Complex64>(&self, f: F) -> OneParticleVector {
        OneParticleVector(
            self.nodes
                .iter()
                .zip(&self.weights)
                .map(|(k, w)| f(k) * w.sqrt())
                .collect(),
        )
    }

    /// `Σ w_i conj(u(k_i)) v(k_i)` evaluated pointwise.
    pub fn grid_inner<F, G>(&self, u: F, v: G) -> Complex64
    where
        F: Fn(&[f64]) -> Complex64,
        G: Fn(&[f64]) -> Complex64,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(k, w)| u(k).conj() * v(k) * *w)
            .sum()
    }
}

fn log_edges(count: usize, k_min: f64, k_max: f64) -> Result<Vec<f64>> {
    if count == 0 || !(k_min > 0.0) || !(k_max > k_min) {
        return Err(Error::Config(format!(
            "logarithmic grid needs count >= 1 and 0 < k_min < k_max (got {count}, {k_min}, {k_max})"
        )));
    }
    let ratio = (k_max / k_min).ln();
    Ok((0..=count).map(|j| k_min * (ratio * j as f64 / count as f64).exp()).collect())
}

fn linear_edges(count: usize, k_min: f64, k_max: f64) -> Result<Vec<f64>> {
    if count == 0 || !(k_min >= 0.0) || !(k_max > k_min) {
        return Err(Error::Config(format!(
            "linear grid needs count >= 1 and 0 <= k_min < k_max (got {count}, {k_min}, {k_max})"
        )));
    }
    let h = (k_max - k_min) / count as f64;
    Ok((0..=count).map(|j| k_min + h * j as f64).collect())
}

/// Coefficients of a one-particle vector in the weight-orthonormalized basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OneParticleVector(pub Vec<Complex64>);

impl OneParticleVector {
    pub fn zeros(n: usize) -> Self {
        OneParticleVector(vec![ZERO; n])
    }

    pub fn from_real(values: &[f64]) -> Self {
        OneParticleVector(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Unit vector along mode `i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn inner(&self, other: &OneParticleVector) -> Complex64 {
        inner(&self.0, &other.0)
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm2().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        OneParticleVector(self.0.iter().map(|c| c * s).collect())
    }

    /// Componentwise product with a real sequence, e.g. `ω g`.
    pub fn mul_real(&self, factors: &[f64]) -> Self {
        OneParticleVector(self.0.iter().zip(factors).map(|(c, f)| c * *f).collect())
    }

    /// Keeps components whose index passes `keep` and zeroes the rest.
    pub fn masked<F: Fn(usize) -> bool>(&self, keep: F) -> Self {
        OneParticleVector(
            self.0
                .iter()
                .enumerate()
                .map(|(i, &c)| if keep(i) { c } else { ZERO })
                .collect(),
        )
    }
}

impl Add for &OneParticleVector {
    type Output = OneParticleVector;
    fn add(self, rhs: Self) -> OneParticleVector {
        assert_eq!(self.len(), rhs.len());
        OneParticleVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &OneParticleVector {
    type Output = OneParticleVector;
    fn sub(self, rhs: Self) -> OneParticleVector {
        assert_eq!(self.len(), rhs.len());
        OneParticleVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &OneParticleVector {
    type Output = OneParticleVector;
    fn neg(self) -> OneParticleVector {
        OneParticleVector(self.0.iter().map(|a| -a).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormFactorKind {
    /// `1 / sqrt(2 ω(k))` with a sharp cutoff.
    NelsonSharp,
    /// `1 / sqrt(ω(k))`.
    WeisskopfWigner,
    /// Pointwise values `v(k_i)`, one per node.
    CustomTable(Vec<f64>),
}

/// Form factor together with its momentum window `σ₀ <= |k| <= σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormFactorSpec {
    pub kind: FormFactorKind,
    pub sigma: f64,
    pub sigma0: f64,
    pub coupling: f64,
}

impl FormFactorSpec {
    pub fn new(kind: FormFactorKind, sigma: f64, sigma0: f64, coupling: f64) -> Result<Self> {
        let spec = FormFactorSpec { kind, sigma, sigma0, coupling };
        spec.validate()?;
        Ok(spec)
    }

    pub fn nelson(sigma: f64, sigma0: f64) -> Result<Self> {
        Self::new(FormFactorKind::NelsonSharp, sigma, sigma0, 1.0)
    }

    pub fn weisskopf_wigner(sigma: f64, sigma0: f64) -> Result<Self> {
        Self::new(FormFactorKind::WeisskopfWigner, sigma, sigma0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 >= 0.0) || !(self.sigma0 < self.sigma) {
            return Err(Error::Config(format!(
                "cutoffs must satisfy 0 <= sigma0 < sigma (got sigma0 = {}, sigma = {})",
                self.sigma0, self.sigma
            )));
        }
        if !self.coupling.is_finite() {
            return Err(Error::Config("coupling must be finite".into()));
        }
        Ok(())
    }

    fn in_window(&self, k: f64) -> bool {
        k >= self.sigma0 && k <= self.sigma
    }
}

/// `c_i = coupling · sqrt(w_i) · v(k_i)` inside the cutoff window, zero outside.
pub fn sample_form_factor(spec: &FormFactorSpec, modes: &ModeSet) -> Result<OneParticleVector> {
    spec.validate()?;
    if let FormFactorKind::CustomTable(t) = &spec.kind {
        if t.len() != modes.len() {
            return Err(Error::Config(format!(
                "custom form factor table has {} entries for {} nodes",
                t.len(),
                modes.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(modes.len());
    for i in 0..modes.len() {
        let k = modes.magnitude(i);
        if !spec.in_window(k) {
            out.push(ZERO);
            continue;
        }
        let w = modes.omega(i);
        let value = match &spec.kind {
            FormFactorKind::NelsonSharp => {
                if w == 0.0 {
                    return Err(Error::SingularConfiguration { node: i });
                }
                1.0 / (2.0 * w).sqrt()
            }
            FormFactorKind::WeisskopfWigner => {
                if w == 0.0 {
                    return Err(Error::SingularConfiguration { node: i });
                }
                1.0 / w.sqrt()
            }
            FormFactorKind::CustomTable(t) => t[i],
        };
        out.push(Complex64::new(spec.coupling * modes.weights()[i].sqrt() * value, 0.0));
    }
    Ok(OneParticleVector(out))
}

fn divide_config(
    v: &OneParticleVector,
    modes: &ModeSet,
    denominator: impl Fn(usize) -> f64,
) -> Result<OneParticleVector> {
    if v.len() != modes.len() {
        return Err(Error::Shape(format!("vector of length {} on {} modes", v.len(), modes.len())));
    }
    let mut g = Vec::with_capacity(v.len());
    for (i, &vi) in v.0.iter().enumerate() {
        let d = denominator(i);
        if vi == ZERO {
            g.push(ZERO);
        } else if d == 0.0 {
            return Err(Error::SingularConfiguration { node: i });
        } else {
            g.push(-vi / d);
        }
    }
    Ok(OneParticleVector(g))
}

/// Ground-state configuration `g = -v/ω` of the van Hove model.
pub fn vhm_ground_config(v: &OneParticleVector, modes: &ModeSet) -> Result<OneParticleVector> {
    divide_config(v, modes, |i| modes.omega(i))
}

/// Gross configuration `g = -v / (ω + |k|²)`.
pub fn gross_config(v: &OneParticleVector, modes: &ModeSet) -> Result<OneParticleVector> {
    divide_config(v, modes, |i| {
        let k = modes.magnitude(i);
        modes.omega(i) + k * k
    })
}

/// `||v / sqrt(ω)||²`, the magnitude of the van Hove ground energy.
pub fn vhm_energy_shift(v: &OneParticleVector, modes: &ModeSet) -> Result<f64> {
    let mut s = 0.0;
    for (i, c) in v.0.iter().enumerate() {
        let w = modes.omega(i);
        if c.norm_sqr() == 0.0 {
            continue;
        }
        if w == 0.0 {
            return Err(Error::SingularConfiguration { node: i });
        }
        s += c.norm_sqr() / w;
    }
    Ok(s)
}

/// Nelson self-energy `E = -∫_{σ₀<=|k|<=σ} dk / (2ω(ω+k²))`, scaled by the
/// squared coupling, on the continuum measure of the given dimension.
///
/// The integral is evaluated by adaptive Gauss-Kronrod quadrature and does
/// not depend on any grid.
pub fn self_energy(spec: &FormFactorSpec, dimension: usize, mass: f64) -> Result<f64> {
    if spec.sigma == spec.sigma0 && spec.sigma.is_finite() {
        return Ok(0.0);
    }
    spec.validate()?;
    if !spec.sigma.is_finite() {
        return Err(Error::CountertermDivergence(
            "ultraviolet cutoff is infinite; sweep finite sigma instead".into(),
        ));
    }
    let shell = match dimension {
        1 => 2.0,
        3 => 4.0 * PI,
        d => return Err(Error::Config(format!("self-energy is defined for d = 1 or 3, got {d}"))),
    };
    let power = if dimension == 3 { 2 } else { 0 };
    let density = move |k: f64| {
        let w = (k * k + mass * mass).sqrt();
        shell * k.powi(power) / (2.0 * w * (w + k * k))
    };
    let integral = if spec.sigma0 > 0.0 {
        let (a, b) = (spec.sigma0.ln(), spec.sigma.ln());
        gauss_kronrod(|t| { let k = t.exp(); density(k) * k }, a, b, SELF_ENERGY_ABS_TOL, 1e-12)?
    } else {
        if dimension == 1 && mass == 0.0 {
            return Err(Error::CountertermDivergence(
                "one-dimensional massless self-energy needs an infrared cutoff".into(),
            ));
        }
        gauss_kronrod(density, 0.0, spec.sigma, SELF_ENERGY_ABS_TOL, 1e-12)?
    };
    Ok(-spec.coupling * spec.coupling * integral)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS_K[7] * fc;
    let mut gauss = GK_WEIGHTS_G[3] * fc;
    for j in 0..7 {
        let x = h * GK_NODES[j];
        let pair = f(c - x) + f(c + x);
        kronrod += GK_WEIGHTS_K[j] * pair;
        if j % 2 == 1 {
            gauss += GK_WEIGHTS_G[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive 15-point Gauss-Kronrod quadrature.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    let mut pieces = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..5000 {
        let total: f64 = pieces.iter().map(|p| p.2 .0).sum();
        let err: f64 = pieces.iter().map(|p| p.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        pieces.push((lo, mid, gk15(&f, lo, mid)));
        pieces.push((mid, hi, gk15(&f, mid, hi)));
    }
    Err(Error::Solver {
        iterations: 5000,
        residual: pieces.iter().map(|p| p.2 .1).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(k: f64, w: f64, mass: f64) -> ModeSet {
        ModeSet::new(Measure::Radial3, GridKind::Custom, vec![vec![k]], vec![w], mass).unwrap()
    }

    #[test]
    fn nelson_factor_at_unit_momentum() {
        let modes = single(1.0, 1.0, 0.0);
        let v = sample_form_factor(&FormFactorSpec::nelson(2.0, 0.0).unwrap(), &modes).unwrap();
        assert!((v.0[0].re - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn nelson_factor_vanishes_beyond_cutoff() {
        let modes = single(3.0, 1.0, 0.0);
        let v = sample_form_factor(&FormFactorSpec::nelson(2.0, 0.0).unwrap(), &modes).unwrap();
        assert_eq!(v.0[0], ZERO);
    }

    #[test]
    fn weisskopf_wigner_pointwise() {
        let modes = ModeSet::radial_log(4, 0.1, 10.0, 0.3).unwrap();
        let v = sample_form_factor(&FormFactorSpec::weisskopf_wigner(f64::INFINITY, 0.0).unwrap(), &modes)
            .unwrap();
        for i in 0..4 {
            let k = modes.node(i)[0];
            let omega = (k * k + 0.09f64).sqrt();
            let expected = modes.weights()[i].sqrt() / omega.sqrt();
            assert!((v.0[i].re - expected).abs() < 1e-14 * expected);
        }
    }

    #[test]
    fn custom_table_length_is_checked() {
        let modes = ModeSet::radial_log(3, 0.1, 1.0, 0.0).unwrap();
        let spec = FormFactorSpec::new(FormFactorKind::CustomTable(vec![1.0; 2]), 10.0, 0.0, 1.0).unwrap();
        assert!(matches!(sample_form_factor(&spec, &modes), Err(Error::Config(_))));
    }

    #[test]
    fn ground_configs() {
        let modes = single(2.0, 1.0, 0.0);
        let v = OneParticleVector::from_real(&[1.0]);
        assert!((vhm_ground_config(&v, &modes).unwrap().0[0].re + 0.5).abs() < 1e-15);
        let unit = single(1.0, 1.0, 0.0);
        let g = gross_config(&OneParticleVector::from_real(&[0.8]), &unit).unwrap();
        assert!((g.0[0].re + 0.4).abs() < 1e-15);
        let zeros = OneParticleVector::zeros(1);
        assert_eq!(vhm_ground_config(&zeros, &modes).unwrap(), zeros);
        assert_eq!(gross_config(&zeros, &modes).unwrap(), zeros);
    }

    #[test]
    fn zero_frequency_is_singular() {
        let modes = single(0.0, 1.0, 0.0);
        let v = OneParticleVector::from_real(&[1.0]);
        assert!(matches!(vhm_ground_config(&v, &modes), Err(Error::SingularConfiguration { node: 0 })));
        assert!(matches!(gross_config(&v, &modes), Err(Error::SingularConfiguration { node: 0 })));
    }

    #[test]
    fn vhm_config_norm_matches_quadrature() {
        // ∫_{σ₀}^{σ} |v|²/ω² 4πk² dk with v = 1/sqrt(2k): 2π ∫ dk/k, exact on each
        // log cell when evaluated by an independent fine midpoint sum.
        let modes = ModeSet::radial_log(40, 0.5, 4.0, 0.0).unwrap();
        let spec = FormFactorSpec::nelson(4.0, 0.5).unwrap();
        let v = sample_form_factor(&spec, &modes).unwrap();
        let g = vhm_ground_config(&v, &modes).unwrap();
        let grid = modes.grid_inner(
            |k| Complex64::new(1.0 / ((2.0 * k[0]).sqrt() * k[0]), 0.0),
            |k| Complex64::new(1.0 / ((2.0 * k[0]).sqrt() * k[0]), 0.0),
        );
        assert!((g.norm2() - grid.re).abs() < 1e-12 * grid.re);
    }

    #[test]
    fn gross_config_is_dominated_by_vhm_config() {
        let modes = ModeSet::line_log(5, 0.1, 5.0, 0.0).unwrap();
        let v = sample_form_factor(&FormFactorSpec::nelson(5.0, 0.1).unwrap(), &modes).unwrap();
        let gv = vhm_ground_config(&v, &modes).unwrap();
        let gg = gross_config(&v, &modes).unwrap();
        for (a, b) in gg.0.iter().zip(&gv.0) {
            assert!(a.norm() <= b.norm());
        }
    }

    #[test]
    fn self_energy_massless_closed_form() {
        for &(s, s0) in &[(3.0, 1.0), (10.0, 0.1), (1e3, 1e-3), (2e-3, 1e-3)] {
            let e = self_energy(&FormFactorSpec::nelson(s, s0).unwrap(), 3, 0.0).unwrap();
            let exact = -2.0 * PI * ((1.0 + s) / (1.0 + s0)).ln();
            assert!(((e - exact) / exact).abs() < 1e-8, "{s} {s0}: {e} vs {exact}");
        }
    }

    #[test]
    fn self_energy_edge_cases() {
        let spec = FormFactorSpec::nelson(2.0, 1.0).unwrap();
        let e1 = self_energy(&spec, 3, 0.0).unwrap();
        let e2 = self_energy(&FormFactorSpec::nelson(4.0, 1.0).unwrap(), 3, 0.0).unwrap();
        assert!(e2 < e1 && e1 < 0.0);
        let empty = FormFactorSpec { sigma0: 1.0, sigma: 1.0, ..spec.clone() };
        assert_eq!(self_energy(&empty, 3, 0.0).unwrap(), 0.0);
        let inf = FormFactorSpec::nelson(f64::INFINITY, 1.0).unwrap();
        assert!(matches!(self_energy(&inf, 3, 0.0), Err(Error::CountertermDivergence(_))));
    }

    #[test]
    fn weighted_coefficients_reproduce_grid_inner_product() {
        let modes = ModeSet::line_log(6, 0.05, 20.0, 0.2).unwrap();
        let u = |k: &[f64]| Complex64::new(k[0].sin(), k[0].cos() * 0.3);
        let v = |k: &[f64]| Complex64::new((-k[0] * k[0]).exp(), 0.5 * k[0]);
        let direct = modes.grid_inner(u, v);
        let coeff = modes.sample(u).inner(&modes.sample(v));
        assert!((direct - coeff).norm() <= 1e-12 * direct.norm());
    }
}
