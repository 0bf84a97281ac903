//! Wire formats for the JSON reports printed to stdout.

use serde::Serialize;

use gauduchon::grid::GridFunctionJson;
use gauduchon::solver::{ConformalCheckReport, ContinuationStep};
use gauduchon::SolveReport64;

#[derive(Serialize)]
pub struct SolveReportWire {
    pub gamma: Option<f64>,
    pub gamma_spread: Option<f64>,
    pub c: f64,
    pub c_bounds: [f64; 2],
    pub sup_grad_v: f64,
    pub continuation_path: Vec<ContinuationStep>,
    pub warnings: Vec<String>,
    pub seconds: f64,
    /// Included only when requested; large grids make this field dominate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<GridFunctionJson>,
}

impl SolveReportWire {
    pub fn new(rep: &SolveReport64, include_v: bool) -> Self {
        SolveReportWire {
            gamma: rep.gamma,
            gamma_spread: rep.gamma_spread,
            c: rep.c,
            c_bounds: [rep.c_bounds.0, rep.c_bounds.1],
            sup_grad_v: rep.sup_grad_v,
            continuation_path: rep.continuation_path.clone(),
            warnings: rep.warnings.clone(),
            seconds: rep.runtime.as_secs_f64(),
            v: include_v.then(|| rep.v.to_json()),
        }
    }
}

#[derive(Serialize)]
pub struct ConformalCheckWire {
    pub gamma_base: f64,
    pub gamma_scaled: f64,
    pub lower: f64,
    pub upper: f64,
    pub sandwich_ok: bool,
    pub sign_ok: bool,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl From<&ConformalCheckReport<f64>> for ConformalCheckWire {
    fn from(r: &ConformalCheckReport<f64>) -> Self {
        ConformalCheckWire {
            gamma_base: r.gamma_base,
            gamma_scaled: r.gamma_scaled,
            lower: r.lower,
            upper: r.upper,
            sandwich_ok: r.sandwich_ok,
            sign_ok: r.sign_ok,
            rho_min: r.rho_min,
            rho_max: r.rho_max,
        }
    }
}

#[derive(Serialize)]
pub struct BisectionWire {
    pub t: f64,
    pub gamma: f64,
    pub gamma_spread: Option<f64>,
    /// Sup-norm k-Gauduchon residual of the conformally adjusted metric.
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Serialize)]
pub struct ReproduceRow {
    pub example: String,
    pub k: usize,
    pub gamma: f64,
    pub sign_expected: String,
    pub sign_observed: String,
    pub residual: f64,
    pub seconds: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

/// Sign string for a report: `"+"`, `"-"`, or `"0"` within `tol`.
pub fn sign_str(x: f64, tol: f64) -> String {
    if x.abs() <= tol {
        "0".to_string()
    } else if x > 0.0 {
        "+".to_string()
    } else {
        "-".to_string()
    }
}
