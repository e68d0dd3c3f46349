//! Parallel execution of configured sweeps and the CSV contract.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ModelKind, PointConfig};
use crate::convergence::{embedded_resolvent, EmbeddedMember};
use crate::doi::doi_apply;
use crate::eigen::{lowest_eigenpairs, EigenPairs};
use crate::error::{Error, Result};
use crate::fock::{enumerate_basis, number_operator, poisson_tail};
use crate::linalg::{hermitian_eigen, inner, spectral_norm, ONE, ZERO};
use crate::modes::{gross_config, sample_form_factor, vhm_ground_config};
use crate::nelson::assemble_fiber;
use crate::sparse::CsrMatrix;
use crate::spinboson::{renormalized_sb, SpinSpace};
use crate::vhm::assemble_vhm;

pub const CSV_HEADER: &str =
    "model,sweep_param,sweep_value,mu,modes,nmax,dim,sigma,sigma0,e0,gap,num_expect,vac_overlap,resolvent_gap,tail_bound,metric_cond,runtime_ms";

/// One CSV row. Quantities that do not apply to a model are NaN.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub model: &'static str,
    pub sweep_param: &'static str,
    pub sweep_value: f64,
    pub mu: f64,
    pub modes: usize,
    pub nmax: usize,
    pub dim: usize,
    pub sigma: f64,
    pub sigma0: f64,
    pub e0: f64,
    pub gap: f64,
    pub num_expect: f64,
    pub vac_overlap: f64,
    pub resolvent_gap: f64,
    pub tail_bound: f64,
    pub metric_cond: f64,
    pub runtime_ms: u128,
}

fn float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let fields = [
            self.model.to_string(),
            self.sweep_param.to_string(),
            float(self.sweep_value),
            float(self.mu),
            self.modes.to_string(),
            self.nmax.to_string(),
            self.dim.to_string(),
            float(self.sigma),
            float(self.sigma0),
            float(self.e0),
            float(self.gap),
            float(self.num_expect),
            float(self.vac_overlap),
            float(self.resolvent_gap),
            float(self.tail_bound),
            float(self.metric_cond),
            self.runtime_ms.to_string(),
        ];
        fields.join(",")
    }
}

pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    out.flush()?;
    Ok(())
}

/// A sweep that stopped at a failing point.
#[derive(Debug)]
pub struct PartialSweep {
    pub index: usize,
    pub error: Error,
    /// Rows of the points that finished, in input order.
    pub completed: Vec<SweepRow>,
}

impl fmt::Display for PartialSweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sweep point {} failed ({} points completed): {}", self.index, self.completed.len(), self.error)
    }
}

struct PointResult {
    row: SweepRow,
    op: DMatrix<Complex64>,
    spin_dim: usize,
    fock_dim: usize,
}

fn ground_stats(pairs: &EigenPairs, number: &CsrMatrix, vacuum: &[usize]) -> (f64, f64, f64, f64) {
    let x = &pairs.vectors[0];
    let gap = if pairs.values.len() > 1 { pairs.values[1] - pairs.values[0] } else { f64::NAN };
    let n = inner(x, &number.matvec(x)).re;
    let vac = vacuum.iter().map(|&i| x[i].norm_sqr()).sum::<f64>().sqrt();
    (pairs.values[0], gap, n, vac)
}

fn evaluate(cfg: &ExperimentConfig, p: &PointConfig) -> Result<PointResult> {
    let start = Instant::now();
    let m = p.modes.len();
    let mut row = SweepRow {
        model: cfg.model.name(),
        sweep_param: cfg.sweep_param.name(),
        sweep_value: p.value,
        mu: p.modes.mass(),
        modes: m,
        nmax: p.nmax,
        dim: 0,
        sigma: p.spec.sigma,
        sigma0: p.spec.sigma0,
        e0: f64::NAN,
        gap: f64::NAN,
        num_expect: f64::NAN,
        vac_overlap: f64::NAN,
        resolvent_gap: f64::NAN,
        tail_bound: f64::NAN,
        metric_cond: f64::NAN,
        runtime_ms: 0,
    };
    let v = sample_form_factor(&p.spec, &p.modes)?;
    let opts = &cfg.solver;
    let (op, spin_dim, fock_dim) = match cfg.model {
        ModelKind::Vhm => {
            let basis = enumerate_basis(m, p.nmax)?;
            let model = assemble_vhm(&v, &p.modes, &basis)?;
            let pairs = lowest_eigenpairs(&model.h.matrix, cfg.k_lowest.min(basis.dim()), opts)?;
            (row.e0, row.gap, row.num_expect, row.vac_overlap) = ground_stats(&pairs, &number_operator(&basis).matrix, &[0]);
            row.tail_bound = poisson_tail(model.ground_config()?.norm2(), p.nmax);
            (model.h.matrix.to_dense(), 1, basis.dim())
        }
        ModelKind::Sb => {
            let spin = SpinSpace::new(cfg.params.spin_a.clone(), cfg.params.spin_b.clone())?;
            let basis = enumerate_basis(m, p.nmax)?;
            let g = vhm_ground_config(&v, &p.modes)?;
            let r = renormalized_sb(&spin, &g, cfg.params.kernel, &p.modes, &basis)?;
            let s = spin.dim();
            let number = CsrMatrix::kron(&CsrMatrix::identity(s), &number_operator(&basis).matrix);
            let vacuum: Vec<usize> = (0..s).map(|i| i * basis.dim()).collect();
            let pairs = lowest_eigenpairs(&r.dressed, cfg.k_lowest.min(s * basis.dim()), opts)?;
            (row.e0, row.gap, row.num_expect, row.vac_overlap) = ground_stats(&pairs, &number, &vacuum);
            row.tail_bound = poisson_tail(g.norm2(), p.nmax);
            row.metric_cond = r.metric.condition_estimate;
            (r.dressed, s, basis.dim())
        }
        ModelKind::NelsonFiber => {
            let basis = enumerate_basis(m, p.nmax)?;
            let model = assemble_fiber(&cfg.params.p, &p.spec, &p.modes, &basis)?;
            let sub = model.subtracted();
            let pairs = lowest_eigenpairs(&sub, cfg.k_lowest.min(basis.dim()), opts)?;
            (row.e0, row.gap, row.num_expect, row.vac_overlap) = ground_stats(&pairs, &number_operator(&basis).matrix, &[0]);
            row.tail_bound = poisson_tail(gross_config(&v, &p.modes)?.norm2(), p.nmax);
            (sub.to_dense(), 1, basis.dim())
        }
        ModelKind::DoiDemo => {
            let spin = SpinSpace::new(cfg.params.spin_a.clone(), cfg.params.spin_b.clone())?;
            let gnorm2 = vhm_ground_config(&v, &p.modes)?.norm2();
            let kernel = cfg.params.kernel.doi_kernel(&spin.dec_b, gnorm2);
            let t = doi_apply(&spin.a, &spin.dec_b, &kernel)?;
            let herm = (&t + t.adjoint()) * Complex64::new(0.5, 0.0);
            let (values, _) = hermitian_eigen(&herm);
            row.e0 = values[0];
            row.gap = if values.len() > 1 { values[1] - values[0] } else { f64::NAN };
            let s = spin.dim();
            (herm, s, 1)
        }
    };
    row.dim = op.nrows();
    row.runtime_ms = start.elapsed().as_millis();
    Ok(PointResult { row, op, spin_dim, fock_dim })
}

/// Isometry of a smaller truncation into a larger one with the same modes:
/// graded enumeration makes the lower-cap basis a prefix in every spin block.
fn prefix_embedding(spin_dim: usize, small: usize, large: usize) -> DMatrix<Complex64> {
    let mut iota = DMatrix::from_element(spin_dim * large, spin_dim * small, ZERO);
    for s in 0..spin_dim {
        for j in 0..small {
            iota[(s * large + j, s * small + j)] = ONE;
        }
    }
    iota
}

/// Norm resolvent distance at `z = i` of every point to the last one, NaN
/// where the mode sets differ.
fn resolvent_gaps(points: &[PointResult]) -> Result<Vec<f64>> {
    let last = points.last().expect("nonempty sweep");
    let parent = last.op.nrows();
    let limit = embedded_resolvent(
        &EmbeddedMember { op: last.op.clone(), iota: DMatrix::identity(parent, parent) },
        Complex64::i(),
    )?;
    points
        .par_iter()
        .map(|p| {
            if p.row.modes != last.row.modes || p.spin_dim != last.spin_dim || p.fock_dim > last.fock_dim {
                return Ok(f64::NAN);
            }
            let iota = prefix_embedding(p.spin_dim, p.fock_dim, last.fock_dim);
            let r = embedded_resolvent(&EmbeddedMember { op: p.op.clone(), iota }, Complex64::i())?;
            Ok(spectral_norm(&(r - &limit)))
        })
        .collect()
}

/// Runs every sweep point on a pool of `threads` workers. Rows come back in
/// input order and do not depend on the thread count.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize) -> std::result::Result<Vec<SweepRow>, PartialSweep> {
    let fail = |index, error| PartialSweep { index, error, completed: Vec::new() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| fail(0, Error::Config(format!("cannot build thread pool: {e}"))))?;
    pool.install(|| {
        let results: Vec<Result<PointResult>> = (0..cfg.len())
            .into_par_iter()
            .map(|i| {
                let p = cfg.point(i)?;
                log::info!("{} point {i}: {} = {}", cfg.model.name(), cfg.sweep_param.name(), p.value);
                evaluate(cfg, &p)
            })
            .collect();
        let mut points = Vec::with_capacity(results.len());
        let mut failure = None;
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(p) => points.push(p),
                Err(e) if failure.is_none() => failure = Some((i, e)),
                Err(_) => {}
            }
        }
        if let Some((index, error)) = failure {
            let completed = points.into_iter().map(|p| p.row).collect();
            return Err(PartialSweep { index, error, completed });
        }
        let gaps = resolvent_gaps(&points).map_err(|e| fail(points.len() - 1, e))?;
        Ok(points.into_iter().zip(gaps).map(|(p, gap)| SweepRow { resolvent_gap: gap, ..p.row }).collect())
    })
}

/// `<out>.partial`.
pub fn partial_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Runs the sweep and writes the CSV. On failure the completed rows go to
/// `<out>.partial` and the error names the failing point.
pub fn run_to_file(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<Vec<SweepRow>> {
    match run_sweep(cfg, threads) {
        Ok(rows) => {
            write_csv(out, &rows)?;
            Ok(rows)
        }
        Err(partial) => {
            let path = partial_path(out);
            write_csv(&path, &partial.completed)?;
            log::warn!("{} completed rows written to {}", partial.completed.len(), path.display());
            Err(Error::SweepPoint { index: partial.index, source: Box::new(partial.error) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn vhm_config(values: &str) -> ExperimentConfig {
        let text = format!(
            "model = vhm\n[grid]\nnodes = 1\nk_min = 0.5\nk_max = 1.5\n[truncation]\nnmax = 20\n[model]\nsigma = 2\nform_factor = weisskopf_wigner\n[sweep]\nparam = sigma\nvalues = {values}\n"
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn vhm_rows_match_the_closed_form() {
        let cfg = vhm_config("2, 2");
        let rows = run_sweep(&cfg, 2).unwrap();
        assert_eq!(rows.len(), 2);
        let p = cfg.point(0).unwrap();
        let v = sample_form_factor(&p.spec, &p.modes).unwrap();
        let want: f64 = (0..p.modes.len()).map(|i| -v.0[i].norm_sqr() / p.modes.omega(i)).sum();
        assert!((rows[0].e0 - want).abs() < 1e-8);
        assert!(rows[0].gap > 0.0 && rows[0].resolvent_gap == 0.0);
        let strip = |r: &SweepRow| SweepRow { runtime_ms: 0, ..r.clone() };
        assert_eq!(strip(&rows[0]).to_csv(), strip(&rows[1]).to_csv());
    }

    #[test]
    fn nmax_sweep_embeds_smaller_truncations() {
        let mut cfg = vhm_config("2");
        cfg.sweep_param = crate::config::SweepParam::Nmax;
        cfg.sweep_values = vec![4.0, 8.0, 12.0];
        let rows = run_sweep(&cfg, 3).unwrap();
        assert!(rows[0].resolvent_gap > rows[1].resolvent_gap && rows[2].resolvent_gap == 0.0);
        assert!(rows[0].dim < rows[2].dim);
    }

    #[test]
    fn csv_format() {
        let rows = run_sweep(&vhm_config("2"), 1).unwrap();
        let line = rows[0].to_csv();
        assert_eq!(line.split(',').count(), CSV_HEADER.split(',').count());
        assert!(line.starts_with("vhm,sigma,2.0000000000000000e0,"));
        assert!(line.contains(",NaN,"));
    }

    #[test]
    fn failing_point_keeps_completed_rows() {
        let mut cfg = vhm_config("2");
        cfg.sweep_param = crate::config::SweepParam::Nmax;
        cfg.grid.nodes = Some(4);
        cfg.sweep_values = vec![2.0, 60.0];
        let err = run_sweep(&cfg, 2).unwrap_err();
        assert_eq!(err.index, 1);
        assert!(matches!(err.error, Error::Capacity { .. }));
        assert_eq!(err.completed.len(), 1);
    }
}
