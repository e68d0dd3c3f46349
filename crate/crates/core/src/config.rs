//! Line-based experiment configuration.
//!
//! ```text
//! model = vhm            # vhm | sb | nelson-fiber | doi-demo
//! output = out.csv
//!
//! [grid]
//! dimension = 1          # 1 (signed line) or 3
//! kind = log             # log | linear | matched
//! nodes = 3              # cells per side (d=1), radial cells or cells per axis (d=3)
//! k_min = 0.1            # defaults to sigma0
//! k_max = 2.0            # defaults to sigma
//! edges = 0.4, 1.5       # interior cell edges of a matched grid
//! mu = 0.0
//!
//! [truncation]
//! modes = 6              # optional consistency check on the grid size
//! nmax = 6
//!
//! [model]
//! form_factor = nelson_sharp
//! coupling = 1.0
//! sigma = 2.0
//! sigma0 = 0.1
//! spin_a = 1, 0, 0, -1   # row-major, entries like 0.5, -2i, 1+0.5i
//! spin_b = 0, 1, 1, 0
//! kernel = regular
//! p = 0.0
//!
//! [sweep]
//! param = sigma          # sigma | sigma0 | nmax | nodes
//! values = 2, 4, 8
//!
//! [solver]
//! tol = 1e-10
//! max_iter = 3000
//! k_lowest = 2
//! seed = 24301
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::doi::check_normal;
use crate::eigen::SolverOptions;
use crate::error::{Error, Result};
use crate::modes::{FormFactorKind, FormFactorSpec, ModeSet};
use crate::nelson::matched_line_grid;
use crate::spinboson::{pauli_x, pauli_z, SpinKernel, SpinSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Vhm,
    Sb,
    NelsonFiber,
    DoiDemo,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vhm => "vhm",
            ModelKind::Sb => "sb",
            ModelKind::NelsonFiber => "nelson-fiber",
            ModelKind::DoiDemo => "doi-demo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridChoice {
    Log,
    Linear,
    Matched,
}

impl GridChoice {
    fn name(self) -> &'static str {
        match self {
            GridChoice::Log => "log",
            GridChoice::Linear => "linear",
            GridChoice::Matched => "matched",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Sigma,
    Sigma0,
    Nmax,
    Nodes,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Sigma => "sigma",
            SweepParam::Sigma0 => "sigma0",
            SweepParam::Nmax => "nmax",
            SweepParam::Nodes => "nodes",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dimension: usize,
    pub kind: GridChoice,
    pub nodes: Option<usize>,
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    pub edges: Vec<f64>,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub form_factor: FormFactorKind,
    pub coupling: f64,
    pub sigma: Option<f64>,
    pub sigma0: f64,
    pub spin_a: DMatrix<Complex64>,
    pub spin_b: DMatrix<Complex64>,
    pub kernel: SpinKernel,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub output: Option<PathBuf>,
    pub grid: GridConfig,
    pub modes: Option<usize>,
    pub nmax: Option<usize>,
    pub params: ModelConfig,
    pub sweep_param: SweepParam,
    pub sweep_values: Vec<f64>,
    pub solver: SolverOptions,
    pub k_lowest: usize,
}

/// Everything one sweep point needs.
#[derive(Debug, Clone)]
pub struct PointConfig {
    pub index: usize,
    pub value: f64,
    pub spec: FormFactorSpec,
    pub modes: ModeSet,
    pub nmax: usize,
}

const KEYS: &[(&str, &[&str])] = &[
    ("", &["model", "output"]),
    ("grid", &["dimension", "kind", "nodes", "k_min", "k_max", "edges", "mu"]),
    ("truncation", &["modes", "nmax"]),
    ("model", &["form_factor", "table", "coupling", "sigma", "sigma0", "spin_a", "spin_b", "kernel", "p"]),
    ("sweep", &["param", "values"]),
    ("solver", &["tol", "max_iter", "k_lowest", "seed"]),
];

struct Entry {
    line: usize,
    value: String,
}

struct Sections(BTreeMap<(String, String), Entry>);

impl Sections {
    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.0.remove(&(section.to_string(), key.to_string()))
    }

    fn parsed<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| Error::Parse {
                line: e.line,
                message: format!("cannot parse `{}` for key `{key}`", e.value),
            }),
        }
    }

    fn list(&mut self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: e.line,
                        message: format!("cannot parse `{}` in list `{key}`", s.trim()),
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn matrix(&mut self, key: &str) -> Result<Option<DMatrix<Complex64>>> {
        let Some(e) = self.take("model", key) else { return Ok(None) };
        let entries = e
            .value
            .split(',')
            .map(|s| {
                parse_complex(s.trim()).ok_or_else(|| Error::Parse {
                    line: e.line,
                    message: format!("cannot parse complex entry `{}` in `{key}`", s.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let s = (entries.len() as f64).sqrt().round() as usize;
        if s * s != entries.len() {
            return Err(Error::Config(format!("`{key}` has {} entries, not a square matrix", entries.len())));
        }
        Ok(Some(DMatrix::from_row_slice(s, s, &entries)))
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also `i`, `-i`).
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&j| (bytes[j] == b'+' || bytes[j] == b'-') && !matches!(bytes[j - 1], b'e' | b'E'));
    let imag = |t: &str| match t {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        t => t.parse::<f64>().ok(),
    };
    match split {
        Some(j) => Some(Complex64::new(body[..j].parse().ok()?, imag(&body[j..])?)),
        None => Some(Complex64::new(0.0, imag(body)?)),
    }
}

fn format_complex(c: Complex64) -> String {
    match (c.re, c.im) {
        (re, im) if im == 0.0 => format!("{re:?}"),
        (re, im) if re == 0.0 => format!("{im:?}i"),
        (re, im) => format!("{re:?}{im:+?}i"),
    }
}

fn parse_model(e: &Entry) -> Result<ModelKind> {
    Ok(match e.value.as_str() {
        "vhm" => ModelKind::Vhm,
        "sb" => ModelKind::Sb,
        "nelson-fiber" => ModelKind::NelsonFiber,
        "doi-demo" => ModelKind::DoiDemo,
        other => {
            return Err(Error::Parse {
                line: e.line,
                message: format!("unknown model `{other}` (expected vhm, sb, nelson-fiber or doi-demo)"),
            })
        }
    })
}

fn enum_value<T: Copy>(e: Entry, key: &str, options: &[(&str, T)]) -> Result<T> {
    options.iter().find(|(n, _)| *n == e.value).map(|(_, v)| *v).ok_or_else(|| Error::Parse {
        line: e.line,
        message: format!(
            "unknown value `{}` for `{key}` (expected one of {})",
            e.value,
            options.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        ),
    })
}

fn tokenize(text: &str) -> Result<Sections> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse { line, message: format!("malformed section header `{content}`") })?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) || name.is_empty() {
                return Err(Error::Parse { line, message: format!("unknown section `[{name}]`") });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
        let (key, value) = (key.trim(), value.trim());
        let allowed = KEYS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            let place = if section.is_empty() { "top level".to_string() } else { format!("section [{section}]") };
            return Err(Error::Parse { line, message: format!("unknown key `{key}` in {place}") });
        }
        if value.is_empty() {
            return Err(Error::Parse { line, message: format!("empty value for `{key}`") });
        }
        if map.insert((section.clone(), key.to_string()), Entry { line, value: value.to_string() }).is_some() {
            return Err(Error::Parse { line, message: format!("duplicate key `{key}`") });
        }
    }
    Ok(Sections(map))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut s = tokenize(text)?;
    let model = match s.take("", "model") {
        Some(e) => parse_model(&e)?,
        None => return Err(Error::Config("missing top-level key `model`".into())),
    };
    let output = s.take("", "output").map(|e| PathBuf::from(e.value));

    let grid = GridConfig {
        dimension: s.parsed("grid", "dimension")?.unwrap_or(1),
        kind: match s.take("grid", "kind") {
            Some(e) => enum_value(e, "kind", &[("log", GridChoice::Log), ("linear", GridChoice::Linear), ("matched", GridChoice::Matched)])?,
            None => GridChoice::Log,
        },
        nodes: s.parsed("grid", "nodes")?,
        k_min: s.parsed("grid", "k_min")?,
        k_max: s.parsed("grid", "k_max")?,
        edges: s.list("grid", "edges")?.unwrap_or_default(),
        mu: s.parsed("grid", "mu")?.unwrap_or(0.0),
    };
    let modes = s.parsed("truncation", "modes")?;
    let nmax = s.parsed("truncation", "nmax")?;

    let form_factor = match s.take("model", "form_factor") {
        None => FormFactorKind::NelsonSharp,
        Some(e) if e.value == "nelson_sharp" => FormFactorKind::NelsonSharp,
        Some(e) if e.value == "weisskopf_wigner" => FormFactorKind::WeisskopfWigner,
        Some(e) if e.value == "custom_table" => FormFactorKind::CustomTable(Vec::new()),
        Some(e) => {
            return Err(Error::Parse {
                line: e.line,
                message: format!("unknown form factor `{}` (expected nelson_sharp, weisskopf_wigner or custom_table)", e.value),
            })
        }
    };
    let table = s.list("model", "table")?;
    let form_factor = match (form_factor, table) {
        (FormFactorKind::CustomTable(_), Some(t)) => FormFactorKind::CustomTable(t),
        (FormFactorKind::CustomTable(_), None) => return Err(Error::Config("form_factor = custom_table needs `table`".into())),
        (_, Some(_)) => return Err(Error::Config("`table` is only valid with form_factor = custom_table".into())),
        (kind, None) => kind,
    };
    let params = ModelConfig {
        form_factor,
        coupling: s.parsed("model", "coupling")?.unwrap_or(1.0),
        sigma: s.parsed("model", "sigma")?,
        sigma0: s.parsed("model", "sigma0")?.unwrap_or(0.0),
        spin_a: s.matrix("spin_a")?.unwrap_or_else(pauli_z),
        spin_b: s.matrix("spin_b")?.unwrap_or_else(pauli_x),
        kernel: match s.take("model", "kernel") {
            Some(e) => enum_value(e, "kernel", &[("regular", SpinKernel::Regular), ("singular", SpinKernel::Singular)])?,
            None => SpinKernel::Regular,
        },
        p: s.list("model", "p")?.unwrap_or_else(|| vec![0.0; grid.dimension]),
    };

    let sweep_param = match s.take("sweep", "param") {
        Some(e) => enum_value(
            e,
            "param",
            &[("sigma", SweepParam::Sigma), ("sigma0", SweepParam::Sigma0), ("nmax", SweepParam::Nmax), ("nodes", SweepParam::Nodes)],
        )?,
        None => return Err(Error::Config("missing key `param` in [sweep]".into())),
    };
    let sweep_values = s.list("sweep", "values")?.ok_or_else(|| Error::Config("missing key `values` in [sweep]".into()))?;

    let defaults = SolverOptions::default();
    let solver = SolverOptions {
        tol: s.parsed("solver", "tol")?.unwrap_or(defaults.tol),
        max_iter: s.parsed("solver", "max_iter")?.unwrap_or(defaults.max_iter),
        seed: s.parsed("solver", "seed")?.unwrap_or(defaults.seed),
        ..defaults
    };
    let k_lowest = s.parsed("solver", "k_lowest")?.unwrap_or(2);
    debug_assert!(s.0.is_empty());

    let cfg = ExperimentConfig { model, output, grid, modes, nmax, params, sweep_param, sweep_values, solver, k_lowest };
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn len(&self) -> usize {
        self.sweep_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sweep_values.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep_values.is_empty() {
            return Err(Error::Config("`values` in [sweep] must be nonempty".into()));
        }
        if !matches!(self.grid.dimension, 1 | 3) {
            return Err(Error::Config(format!("`dimension` must be 1 or 3, got {}", self.grid.dimension)));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(Error::Config("`tol` must be positive and `max_iter` at least 1".into()));
        }
        if self.k_lowest == 0 {
            return Err(Error::Config("`k_lowest` must be at least 1".into()));
        }
        if self.grid.kind == GridChoice::Matched && self.grid.dimension != 1 {
            return Err(Error::Config("`kind = matched` needs `dimension = 1`".into()));
        }
        if self.model == ModelKind::NelsonFiber && self.params.p.len() != self.grid.dimension {
            return Err(Error::Config(format!(
                "`p` has {} components in dimension {}",
                self.params.p.len(),
                self.grid.dimension
            )));
        }
        if matches!(self.model, ModelKind::Sb | ModelKind::DoiDemo) {
            check_normal(&self.params.spin_b).map_err(|e| Error::Config(format!("`spin_b` violates the normality rule: {e}")))?;
            SpinSpace::new(self.params.spin_a.clone(), self.params.spin_b.clone())
                .map_err(|e| Error::Config(format!("`spin_a`/`spin_b` rejected: {e}")))?;
        }
        for i in 0..self.len() {
            self.point(i).map_err(|e| Error::SweepPoint { index: i, source: Box::new(e) })?;
        }
        Ok(())
    }

    /// Resolves sweep point `i` into a form factor, grid and cap.
    pub fn point(&self, i: usize) -> Result<PointConfig> {
        let value = self.sweep_values[i];
        let as_count = |key: &str| -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("sweep value {value} for `{key}` is not a nonnegative integer")))
            }
        };
        let mut sigma = self.params.sigma;
        let mut sigma0 = self.params.sigma0;
        let mut nmax = self.nmax;
        let mut nodes = self.grid.nodes;
        match self.sweep_param {
            SweepParam::Sigma => sigma = Some(value),
            SweepParam::Sigma0 => sigma0 = value,
            SweepParam::Nmax => nmax = Some(as_count("nmax")?),
            SweepParam::Nodes => nodes = Some(as_count("nodes")?),
        }
        let sigma = sigma.ok_or_else(|| Error::Config("missing key `sigma` in [model]".into()))?;
        let nmax = nmax.ok_or_else(|| Error::Config("missing key `nmax` in [truncation]".into()))?;
        if !(sigma0 < sigma) {
            return Err(Error::Config(format!("sigma0 = {sigma0} must be below sigma = {sigma}")));
        }
        let spec = FormFactorSpec::new(self.params.form_factor.clone(), sigma, sigma0, self.params.coupling)?;
        let modes = self.build_grid(nodes, sigma, sigma0)?;
        if let Some(m) = self.modes {
            if m != modes.len() {
                return Err(Error::Config(format!("`modes` = {m} but the grid has {} nodes", modes.len())));
            }
        }
        Ok(PointConfig { index: i, value, spec, modes, nmax })
    }

    fn build_grid(&self, nodes: Option<usize>, sigma: f64, sigma0: f64) -> Result<ModeSet> {
        let g = &self.grid;
        let mu = g.mu;
        if g.kind == GridChoice::Matched {
            let mut edges = vec![sigma0];
            edges.extend(&g.edges);
            edges.push(sigma);
            return matched_line_grid(&edges, mu).map_err(|e| Error::Config(format!("`edges` rejected: {e}")));
        }
        let nodes = nodes.ok_or_else(|| Error::Config("missing key `nodes` in [grid]".into()))?;
        let k_max = g.k_max.unwrap_or(sigma);
        if !k_max.is_finite() {
            return Err(Error::Config("`k_max` must be finite (set it when sigma is infinite)".into()));
        }
        let k_min = g.k_min.unwrap_or(sigma0);
        match (g.dimension, self.model, g.kind) {
            (1, _, GridChoice::Log) => ModeSet::line_log(nodes, k_min, k_max, mu),
            (1, _, _) => ModeSet::line_linear(nodes, k_min, k_max, mu),
            (_, ModelKind::NelsonFiber, _) => ModeSet::product_linear(nodes, k_max, mu),
            (_, _, GridChoice::Log) => ModeSet::radial_log(nodes, k_min, k_max, mu),
            (_, _, _) => ModeSet::radial_linear(nodes, k_min, k_max, mu),
        }
    }
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for ExperimentConfig {
    /// Canonical text; parsing it yields an equal configuration.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model = {}", self.model.name())?;
        if let Some(out) = &self.output {
            writeln!(f, "output = {}", out.display())?;
        }
        let g = &self.grid;
        writeln!(f, "\n[grid]\ndimension = {}\nkind = {}", g.dimension, g.kind.name())?;
        if let Some(n) = g.nodes {
            writeln!(f, "nodes = {n}")?;
        }
        if let Some(k) = g.k_min {
            writeln!(f, "k_min = {k:?}")?;
        }
        if let Some(k) = g.k_max {
            writeln!(f, "k_max = {k:?}")?;
        }
        if !g.edges.is_empty() {
            writeln!(f, "edges = {}", list(&g.edges))?;
        }
        writeln!(f, "mu = {:?}", g.mu)?;
        writeln!(f, "\n[truncation]")?;
        if let Some(m) = self.modes {
            writeln!(f, "modes = {m}")?;
        }
        if let Some(n) = self.nmax {
            writeln!(f, "nmax = {n}")?;
        }
        let p = &self.params;
        writeln!(f, "\n[model]")?;
        match &p.form_factor {
            FormFactorKind::NelsonSharp => writeln!(f, "form_factor = nelson_sharp")?,
            FormFactorKind::WeisskopfWigner => writeln!(f, "form_factor = weisskopf_wigner")?,
            FormFactorKind::CustomTable(t) => writeln!(f, "form_factor = custom_table\ntable = {}", list(t))?,
        }
        writeln!(f, "coupling = {:?}", p.coupling)?;
        if let Some(s) = p.sigma {
            writeln!(f, "sigma = {s:?}")?;
        }
        writeln!(f, "sigma0 = {:?}", p.sigma0)?;
        for (key, m) in [("spin_a", &p.spin_a), ("spin_b", &p.spin_b)] {
            let n = m.nrows();
            let entries: Vec<String> = (0..n * n).map(|k| format_complex(m[(k / n, k % n)])).collect();
            writeln!(f, "{key} = {}", entries.join(", "))?;
        }
        let kernel = match p.kernel {
            SpinKernel::Regular => "regular",
            SpinKernel::Singular => "singular",
        };
        writeln!(f, "kernel = {kernel}\np = {}", list(&p.p))?;
        writeln!(f, "\n[sweep]\nparam = {}\nvalues = {}", self.sweep_param.name(), list(&self.sweep_values))?;
        writeln!(
            f,
            "\n[solver]\ntol = {:?}\nmax_iter = {}\nk_lowest = {}\nseed = {}",
            self.solver.tol, self.solver.max_iter, self.k_lowest, self.solver.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "model = vhm\n[grid]\nnodes = 2\nk_min = 0.5\nk_max = 2\n[truncation]\nnmax = 6\n[model]\nsigma = 2\n[sweep]\nparam = sigma\nvalues = 2\n";

    #[test]
    fn minimal_config_round_trips() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.model, ModelKind::Vhm);
        assert_eq!(cfg.len(), 1);
        let again = parse_config(&cfg.to_string()).unwrap();
        assert_eq!(cfg, again);
        let p = cfg.point(0).unwrap();
        assert_eq!(p.modes.len(), 4);
        assert_eq!(p.nmax, 6);
    }

    #[test]
    fn unknown_keys_and_syntax_errors_carry_line_numbers() {
        let bad = MINIMAL.replace("nmax = 6", "nmax = 6\ncolour = blue");
        match parse_config(&bad) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("colour"));
            }
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace("[grid]", "[grid");
        assert!(matches!(parse_config(&bad), Err(Error::Parse { line: 2, .. })));
        let bad = MINIMAL.replace("nodes = 2", "nodes = two");
        assert!(matches!(parse_config(&bad), Err(Error::Parse { line: 3, .. })));
        let bad = MINIMAL.replace("[solver]", "").replace("model = vhm", "model = vhm\n[magic]");
        assert!(matches!(parse_config(&bad), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn inverted_cutoffs_name_the_point() {
        let cfg = MINIMAL.replace("sigma = 2", "sigma = 2\nsigma0 = 0.5").replace("values = 2", "values = 2, 0.4, 1");
        match parse_config(&cfg) {
            Err(Error::SweepPoint { index, source }) => {
                assert_eq!(index, 1);
                assert!(source.to_string().contains("sigma0"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_normal_spin_coupling_is_rejected() {
        let cfg = MINIMAL.replace("model = vhm", "model = sb").replace("sigma = 2", "sigma = 2\nspin_b = 1, 1, 0, 2");
        let err = parse_config(&cfg).unwrap_err();
        assert!(err.to_string().contains("normality rule"), "{err}");
        let cfg = MINIMAL.replace("model = vhm", "model = sb").replace("sigma = 2", "sigma = 2\nspin_a = 1, 1i, 1i, 0");
        assert!(parse_config(&cfg).unwrap_err().to_string().contains("Hermitian"));
        let cfg = MINIMAL.replace("model = vhm", "model = sb").replace("sigma = 2", "sigma = 2\nspin_a = 1, -1i, 1i, 0");
        assert!(parse_config(&cfg).is_ok());
    }

    #[test]
    fn complex_entries() {
        assert_eq!(parse_complex("2"), Some(Complex64::new(2.0, 0.0)));
        assert_eq!(parse_complex("-i"), Some(Complex64::new(0.0, -1.0)));
        assert_eq!(parse_complex("0.5-2.5i"), Some(Complex64::new(0.5, -2.5)));
        assert_eq!(parse_complex("1e-3+1e+2i"), Some(Complex64::new(1e-3, 100.0)));
        assert_eq!(parse_complex("3 i"), Some(Complex64::new(0.0, 3.0)));
        assert_eq!(parse_complex("x"), None);
        for c in [Complex64::new(1.5, -0.25), Complex64::new(0.0, 2.0), Complex64::new(-3.0, 0.0)] {
            assert_eq!(parse_complex(&format_complex(c)), Some(c));
        }
    }

    #[test]
    fn sweep_over_integers() {
        let cfg = parse_config(&MINIMAL.replace("param = sigma\nvalues = 2", "param = nmax\nvalues = 2, 4")).unwrap();
        assert_eq!(cfg.point(1).unwrap().nmax, 4);
        assert!(parse_config(&MINIMAL.replace("param = sigma\nvalues = 2", "param = nodes\nvalues = 1.5")).is_err());
        let matched = "model = nelson-fiber\n[grid]\nkind = matched\nedges = 0.4, 1.5\n[truncation]\nnmax = 2\nmodes = 6\n[model]\nsigma0 = 0.1\n[sweep]\nparam = sigma\nvalues = 2, 4\n";
        let cfg = parse_config(matched).unwrap();
        assert_eq!(cfg.point(1).unwrap().modes.len(), 6);
        assert!(parse_config(&matched.replace("modes = 6", "modes = 4")).is_err());
    }
}
