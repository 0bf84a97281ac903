//! Command-line front end: metric ingestion, solve/classify/reproduce
//! commands, machine-readable JSON reports on stdout, logs on stderr.

mod expr;
mod report;
mod specfile;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use num_traits::ToPrimitive;
use serde::Serialize;

use gauduchon::catalog;
use gauduchon::metric::integral_criterion;
use gauduchon::solver::{conformal_bounds_check, find_k_gauduchon, gamma_k, solve_semilinear};

use report::{sign_str, BisectionWire, ConformalCheckWire, ReproduceRow, SolveReportWire};
use specfile::{load_metric, load_one_form, load_options, load_psi, parse_scalar_field, usage_err, CliError};

#[derive(Parser)]
#[command(name = "gauduchon", about = "γ_k invariants and k-th Gauduchon metrics on complex tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for γ_k of a metric
    Gamma {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        opts: Option<PathBuf>,
        /// Include the solution v in the report
        #[arg(long)]
        include_solution: bool,
    },
    /// Classify a metric (Kähler / balanced / Gauduchon / pluriclosed)
    Classify {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run a cataloged example end to end
    Reproduce {
        #[arg(long)]
        example: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Grid points per active dimension (grid examples)
        #[arg(long)]
        points: Option<usize>,
        /// Family parameter (C for the positive torus, t for the bump family)
        #[arg(long)]
        param: Option<f64>,
    },
    /// Bisect tω₁ + (1−t)ω₂ for a k-th Gauduchon metric
    FindGauduchon {
        #[arg(long)]
        metric1: PathBuf,
        #[arg(long)]
        metric2: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        opts: Option<PathBuf>,
    },
    /// Verify the conformal sandwich for γ_k(e^ρ ω)
    ConformalCheck {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        rho: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        opts: Option<PathBuf>,
    },
    /// Solve the general semilinear equation Δv + ψ(|∇v|²) + ⟨B,dv⟩ = c + f
    Semilinear {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long = "B")]
        b: PathBuf,
        #[arg(long)]
        f: String,
        /// "linear" or a path to a ψ table file
        #[arg(long, default_value = "linear")]
        psi: String,
        #[arg(long)]
        opts: Option<PathBuf>,
        #[arg(long)]
        include_solution: bool,
    },
}

fn main() {
    if let Ok(threads) = std::env::var("GAUDUCHON_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(json) => println!("{json}"),
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Gamma {
            metric,
            k,
            opts,
            include_solution,
        } => {
            let w = load_metric(&metric)?;
            let opts = load_options(opts.as_deref())?;
            eprintln!("solving gamma_{k} on {:?}", w.shape().sizes());
            let rep = gamma_k(&w, k, &opts)?;
            to_json(&SolveReportWire::new(&rep, include_solution))
        }
        Command::Classify { metric, tol } => {
            let w = load_metric(&metric)?;
            to_json(&w.classify(tol)?)
        }
        Command::Reproduce {
            example,
            k,
            points,
            param,
        } => reproduce(&example, k, points, param),
        Command::FindGauduchon {
            metric1,
            metric2,
            k,
            tol,
            opts,
        } => {
            let w1 = load_metric(&metric1)?;
            let w2 = load_metric(&metric2)?;
            let opts = load_options(opts.as_deref())?;
            eprintln!("bisecting for gamma_{k} = 0, tol {tol:.1e}");
            let start = Instant::now();
            let (t, adjusted, rep) = find_k_gauduchon(&w1, &w2, k, tol, &opts)?;
            let residual = adjusted.classify(tol)?.k_gauduchon_residuals[k - 1];
            to_json(&BisectionWire {
                t,
                gamma: rep.gamma.expect("gamma_k sets gamma"),
                gamma_spread: rep.gamma_spread,
                residual,
                seconds: start.elapsed().as_secs_f64(),
            })
        }
        Command::ConformalCheck {
            metric,
            rho,
            k,
            opts,
        } => {
            let w = load_metric(&metric)?;
            let rho = parse_scalar_field(&rho, w.shape())?;
            let opts = load_options(opts.as_deref())?;
            eprintln!("conformal sandwich check for gamma_{k}");
            let rep = conformal_bounds_check(&w, &rho, k, &opts)?;
            to_json(&ConformalCheckWire::from(&rep))
        }
        Command::Semilinear {
            metric,
            b,
            f,
            psi,
            opts,
            include_solution,
        } => {
            let w = load_metric(&metric)?;
            let b = load_one_form(&b, w.shape())?;
            let f = parse_scalar_field(&f, w.shape())?;
            let psi = load_psi(&psi)?;
            let opts = load_options(opts.as_deref())?;
            eprintln!("semilinear solve on {:?}", w.shape().sizes());
            let rep = solve_semilinear(&w, &b, &f, &psi, &opts)?;
            to_json(&SolveReportWire::new(&rep, include_solution))
        }
    }
}

fn expected_sign(spec: &catalog::ExampleSpec, k: usize) -> String {
    if k != 1 {
        return "?".to_string();
    }
    match spec.expected_gamma1_sign {
        catalog::GammaSign::Positive => "+",
        catalog::GammaSign::Negative => "-",
        catalog::GammaSign::Zero => "0",
    }
    .to_string()
}

fn reproduce(name: &str, k: usize, points: Option<usize>, param: Option<f64>) -> Result<String, CliError> {
    let spec = match catalog::find_example(name) {
        Some(s) => s,
        None => {
            let names: Vec<_> = catalog::examples().iter().map(|e| e.name).collect();
            return usage_err(format!("unknown example `{name}`; known: {names:?}"));
        }
    };
    eprintln!("reproducing `{name}` with k = {k}");
    let start = Instant::now();
    let opts = Default::default();
    let row = |gamma: f64, residual: f64| ReproduceRow {
        example: name.to_string(),
        k,
        gamma,
        sign_expected: expected_sign(spec, k),
        sign_observed: sign_str(gamma, 1e-9),
        residual,
        seconds: start.elapsed().as_secs_f64(),
        notes: spec.notes.to_string(),
    };
    let row = match name {
        "flat" => {
            let w = catalog::flat_torus(3, vec![1, 1, 1, 1, points.unwrap_or(16), 1])?;
            let rep = gamma_k(&w, k, &opts)?;
            row(rep.gamma.unwrap_or(0.0), rep.gamma_spread.unwrap_or(0.0))
        }
        "torus-positive-gamma1" => {
            let w = catalog::torus_positive_gamma1(param.unwrap_or(1.0), points.unwrap_or(64))?;
            let rep = gamma_k(&w, k, &opts)?;
            row(rep.gamma.unwrap_or(0.0), rep.gamma_spread.unwrap_or(0.0))
        }
        "bump-family" => {
            let w = catalog::bump_family(param.unwrap_or(0.05), points.unwrap_or(8))?;
            let rep = gamma_k(&w, k, &opts)?;
            row(rep.gamma.unwrap_or(0.0), rep.gamma_spread.unwrap_or(0.0))
        }
        "bump-semimetric" => {
            // semi-positive form: report the bump integral against its
            // 1-D product-formula oracle instead of a solve
            let ring = catalog::bump_semimetric(points.unwrap_or(12))?;
            let value = integral_criterion(&ring, k)?;
            let oracle = catalog::bump_product_formula::<f64>(400_000);
            row(value, (value / oracle - 1.0).abs())
        }
        "iwasawa" => {
            let (alg, omega) = catalog::iwasawa()?;
            let gamma = alg.gamma_k_invariant(&omega, k)?;
            row(gamma.to_f64().unwrap_or(f64::NAN), 0.0)
        }
        "s5s1" => {
            let (alg, omega) = catalog::s5s1()?;
            let gamma = alg.gamma_k_invariant(&omega, k)?;
            row(gamma.to_f64().unwrap_or(f64::NAN), 0.0)
        }
        _ => unreachable!("registry covers all names"),
    };
    to_json(&row)
}
