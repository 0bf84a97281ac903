//! On-disk input formats: metric spec files, solver option files, one-form
//! files, and ψ tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Deserialize;

use gauduchon::grid::{GridFunctionJson, GridShape};
use gauduchon::metric::OneFormPair;
use gauduchon::{GridFunction64, HermitianMetric64, OneFormPair64, PsiFunction64, SolveOptions64};

use crate::expr::{parse_expression, Expr};

/// CLI failure: exit code 2 for bad inputs, 3 for nonconvergence.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::NonConvergence(m) => m,
        }
    }
}

impl From<gauduchon::Error> for CliError {
    fn from(e: gauduchon::Error) -> Self {
        match e {
            gauduchon::Error::NonConvergence(m) => CliError::NonConvergence(m),
            other => CliError::Usage(other.to_string()),
        }
    }
}

pub fn usage_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

/// One metric entry: a real expression, a re/im expression pair, or inline
/// grid samples.
#[derive(Deserialize)]
#[serde(untagged)]
pub enum EntryValue {
    Expr(String),
    Pair { re: String, im: String },
    Grid(GridFunctionJson),
}

/// Metric input file: hermitian coefficients `g_{ij̄}` keyed by `"(i,j)"`
/// (1-based); a missing `(j,i)` defaults to the conjugate of `(i,j)`.
#[derive(Deserialize)]
pub struct MetricSpecFile {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub entries: BTreeMap<String, EntryValue>,
}

/// Solver options file; omitted fields keep their defaults.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OptionsFile {
    pub newton_tol: Option<f64>,
    pub krylov_tol: Option<f64>,
    pub max_newton: Option<usize>,
    pub min_step: Option<f64>,
    pub dealias: Option<bool>,
    pub initial_guess: Option<GridFunctionJson>,
}

/// One-form input: holomorphic components `B_1..B_n`; antiholomorphic
/// components default to their conjugates.
#[derive(Deserialize)]
pub struct OneFormFile {
    pub holo: Vec<EntryValue>,
}

/// Sampled ψ: strictly increasing knots, evaluated by linear interpolation
/// with linear extrapolation beyond the ends.
#[derive(Deserialize)]
pub struct PsiTableFile {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Evaluate a parsed expression at every grid node.
pub fn eval_on_grid(expr: &Expr, shape: &GridShape) -> Result<GridFunction64, CliError> {
    let values = (0..shape.num_points())
        .into_par_iter()
        .map(|idx| {
            let coords: Vec<f64> = shape.coords(idx);
            expr.eval(&coords).map(|v| Complex::new(v, 0.0))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(GridFunction64::new(shape.clone(), values)?)
}

pub fn parse_scalar_field(src: &str, shape: &GridShape) -> Result<GridFunction64, CliError> {
    let expr = parse_expression(src, shape.n()).map_err(|e| CliError::Usage(e.to_string()))?;
    eval_on_grid(&expr, shape)
}

fn entry_to_grid(value: &EntryValue, shape: &GridShape) -> Result<GridFunction64, CliError> {
    match value {
        EntryValue::Expr(src) => parse_scalar_field(src, shape),
        EntryValue::Pair { re, im } => {
            let re = parse_scalar_field(re, shape)?;
            let im = parse_scalar_field(im, shape)?;
            Ok(re.add(&im.scale(Complex::new(0.0, 1.0))))
        }
        EntryValue::Grid(j) => {
            let g = GridFunction64::from_json(j)?;
            if g.shape() != shape {
                return usage_err("inline grid sizes disagree with the metric sizes");
            }
            Ok(g)
        }
    }
}

fn entry_key(key: &str) -> Result<(usize, usize), CliError> {
    let trimmed = key.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Vec<_> = trimmed.split(',').map(str::trim).collect();
    if let [i, j] = parts[..] {
        if let (Ok(i), Ok(j)) = (i.parse::<usize>(), j.parse::<usize>()) {
            if i >= 1 && j >= 1 {
                return Ok((i, j));
            }
        }
    }
    usage_err(format!("bad entry key `{key}`; expected \"(i,j)\" with 1-based indices"))
}

/// Build the metric from a spec file.
pub fn load_metric(path: &Path) -> Result<HermitianMetric64, CliError> {
    let spec: MetricSpecFile = read_json(path)?;
    let shape = GridShape::new(spec.n, spec.sizes.clone())?;
    let mut coeffs: BTreeMap<(usize, usize), GridFunction64> = BTreeMap::new();
    for (key, value) in &spec.entries {
        let (i, j) = entry_key(key)?;
        if i > spec.n || j > spec.n {
            return usage_err(format!("entry ({i},{j}) out of range for n = {}", spec.n));
        }
        coeffs.insert((i, j), entry_to_grid(value, &shape)?);
    }
    for (key, g) in coeffs.clone() {
        let mirror = (key.1, key.0);
        if key.0 != key.1 && !coeffs.contains_key(&mirror) {
            coeffs.insert(mirror, g.conj());
        }
    }
    let mut form = gauduchon::Form64::zero(&shape, 1, 1);
    let half_i = Complex::new(0.0, 0.5);
    for ((i, j), g) in coeffs {
        form.add_term(vec![(i - 1) as u8], vec![(j - 1) as u8], g.scale(half_i))?;
    }
    Ok(HermitianMetric64::new(form)?)
}

/// Build solver options from an optional options file.
pub fn load_options(path: Option<&Path>) -> Result<SolveOptions64, CliError> {
    let file: OptionsFile = match path {
        Some(p) => read_json(p)?,
        None => OptionsFile::default(),
    };
    let mut opts = SolveOptions64::default();
    if let Some(v) = file.newton_tol {
        opts.newton_tol = v;
    }
    if let Some(v) = file.krylov_tol {
        opts.krylov_tol = v;
    }
    if let Some(v) = file.max_newton {
        opts.max_newton = v;
    }
    if let Some(v) = file.min_step {
        opts.min_step = v;
    }
    if let Some(v) = file.dealias {
        opts.dealias = v;
    }
    if let Some(j) = &file.initial_guess {
        opts.initial_guess = Some(GridFunction64::from_json(j)?);
    }
    Ok(opts)
}

/// Build the drift one-form from a file, against the metric's grid.
pub fn load_one_form(path: &Path, shape: &GridShape) -> Result<OneFormPair64, CliError> {
    let file: OneFormFile = read_json(path)?;
    if file.holo.len() != shape.n() {
        return usage_err(format!(
            "one-form file has {} components, metric has n = {}",
            file.holo.len(),
            shape.n()
        ));
    }
    let holo = file
        .holo
        .iter()
        .map(|v| entry_to_grid(v, shape))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OneFormPair::from_holo(holo))
}

/// Build ψ from `"linear"` or a table file path.
pub fn load_psi(spec: &str) -> Result<PsiFunction64, CliError> {
    if spec == "linear" {
        return Ok(PsiFunction64::linear());
    }
    let table: PsiTableFile = read_json(Path::new(spec))?;
    if table.t.len() != table.value.len() || table.t.len() < 2 {
        return usage_err("psi table needs matching `t` and `value` arrays of length >= 2");
    }
    if !table.t.windows(2).all(|w| w[0] < w[1]) {
        return usage_err("psi table knots must be strictly increasing");
    }
    let knots = Arc::new(table.t);
    let vals = Arc::new(table.value);
    let locate = {
        let knots = Arc::clone(&knots);
        move |t: f64| -> usize {
            let last = knots.len() - 2;
            knots.iter().rposition(|&k| k <= t).unwrap_or(0).min(last)
        }
    };
    let (k1, v1, loc1) = (Arc::clone(&knots), Arc::clone(&vals), locate.clone());
    let eval = move |t: f64| {
        let s = loc1(t);
        let slope = (v1[s + 1] - v1[s]) / (k1[s + 1] - k1[s]);
        v1[s] + slope * (t - k1[s])
    };
    let deriv = move |t: f64| {
        let s = locate(t);
        (vals[s + 1] - vals[s]) / (knots[s + 1] - knots[s])
    };
    // growth parameters of a sampled table are not certifiable; report μ = 1
    // with a vacuous ν
    Ok(PsiFunction64::new(eval, deriv, 1.0, 0.0))
}
