//! Continuity-method solver for the semilinear equation
//! `Δv + ψ(|∇v|²) + ⟨B, dv⟩ = f + c` and the `γ_k` computation built on it,
//! plus bisection for k-th Gauduchon metrics along metric segments and the
//! conformal sandwich check.

use crate::grid::{GridFunction, GridShape};
use crate::metric::{HermitianMetric, OneFormPair};
use crate::scalar::Real;
use crate::{Error, Result};
use num_complex::Complex;
use num_traits::Zero;
use serde::Serialize;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Grids up to this many points use a dense factorization; larger grids use
/// preconditioned GMRES.
const DENSE_LIMIT: usize = 4096;
const KRYLOV_RESTART: usize = 30;
const KRYLOV_MAX_APPLIES: usize = 2000;
const BISECTION_BUDGET: usize = 64;

/// The gradient nonlinearity `ψ` with its derivative and reported growth
/// parameters `μ > ½`, `ν > 0` (`liminf ψ(t)/t^μ ≥ ν`).
#[derive(Clone)]
pub struct PsiFunction<R: Real> {
    eval: Arc<dyn Fn(R) -> R + Send + Sync>,
    deriv: Arc<dyn Fn(R) -> R + Send + Sync>,
    pub mu: f64,
    pub nu: f64,
}

impl<R: Real> std::fmt::Debug for PsiFunction<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PsiFunction")
            .field("mu", &self.mu)
            .field("nu", &self.nu)
            .finish()
    }
}

impl<R: Real> PsiFunction<R> {
    pub fn new(
        eval: impl Fn(R) -> R + Send + Sync + 'static,
        deriv: impl Fn(R) -> R + Send + Sync + 'static,
        mu: f64,
        nu: f64,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            mu,
            nu,
        }
    }

    /// `ψ(t) = t`, the default for the `γ_k` reduction.
    pub fn linear() -> Self {
        Self::new(|t| t, |_| R::one(), 1.0, 1.0)
    }

    /// `ψ(t) = t + shift` (the constant is absorbed into `c`).
    pub fn affine(shift: R) -> Self {
        Self::new(move |t| t + shift, |_| R::one(), 1.0, 1.0)
    }

    pub fn eval(&self, t: R) -> Result<R> {
        let v = (self.eval)(t);
        if !v.is_finite() {
            return Err(Error::Argument(format!(
                "psi evaluation not finite at t = {}",
                t.as_f64()
            )));
        }
        Ok(v)
    }

    pub fn eval_deriv(&self, t: R) -> Result<R> {
        let v = (self.deriv)(t);
        if !v.is_finite() {
            return Err(Error::Argument(format!(
                "psi derivative not finite at t = {}",
                t.as_f64()
            )));
        }
        Ok(v)
    }

    /// Sampled certificate of the growth condition `ψ(t) ≥ ν t^μ` on
    /// `[t0, t1]`; a check of samples, not a proof of the liminf statement.
    pub fn sampled_growth_check(&self, t0: R, t1: R, samples: usize) -> bool {
        (0..samples.max(2)).all(|i| {
            let s = R::of(i as f64 / (samples.max(2) - 1) as f64);
            let t = t0 + (t1 - t0) * s;
            let bound = R::of(self.nu) * t.abs().powf(R::of(self.mu));
            (self.eval)(t) >= bound - R::of(1e-12)
        })
    }
}

/// Solver options (all CLI-overridable).
#[derive(Clone, Debug)]
pub struct SolveOptions<R: Real> {
    pub newton_tol: f64,
    pub krylov_tol: f64,
    pub max_newton: usize,
    pub min_step: f64,
    pub dealias: bool,
    pub initial_guess: Option<GridFunction<R>>,
    /// Dense-factorization cutoff in grid points; tests may lower it to
    /// force the Krylov path.
    pub dense_limit: usize,
}

impl<R: Real> Default for SolveOptions<R> {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            krylov_tol: 1e-12,
            max_newton: 25,
            min_step: 1e-3,
            dealias: false,
            initial_guess: None,
            dense_limit: DENSE_LIMIT,
        }
    }
}

/// One accepted continuation step.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuationStep {
    pub t: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

/// Outcome of a semilinear solve (and, for `γ_k` runs, the invariant).
#[derive(Clone, Debug)]
pub struct SolveReport<R: Real> {
    /// `γ_k = (c + avg_ω φ)/n`; `None` for plain semilinear solves.
    pub gamma: Option<R>,
    /// Spread of the three γ formulas (definition, decomposition average,
    /// direct integration); `None` for plain solves.
    pub gamma_spread: Option<R>,
    /// Mean-zero solution: `∫ v ωⁿ = 0`.
    pub v: GridFunction<R>,
    pub c: R,
    pub continuation_path: Vec<ContinuationStep>,
    /// `sup |∇v|²` at the solution.
    pub sup_grad_v: R,
    /// `(ψ(0) − sup f, ψ(0) − inf f)`.
    pub c_bounds: (R, R),
    pub runtime: Duration,
    pub warnings: Vec<String>,
}

/// Conformal sandwich diagnostics for `γ_k(e^ρ ω)`.
#[derive(Clone, Debug)]
pub struct ConformalCheckReport<R: Real> {
    pub gamma_base: R,
    pub gamma_scaled: R,
    pub lower: R,
    pub upper: R,
    pub sandwich_ok: bool,
    pub sign_ok: bool,
    pub rho_min: R,
    pub rho_max: R,
}

struct Workspace<'a, R: Real> {
    w: &'a HermitianMetric<R>,
    b: &'a OneFormPair<R>,
    psi: &'a PsiFunction<R>,
    opts: &'a SolveOptions<R>,
    /// `ωⁿ/dV` quadrature weights and their sum.
    density: GridFunction<R>,
    weight_total: R,
    /// Whether any active dimension has an even length. Spectral derivatives
    /// zero the Nyquist mode there, so those modes are invisible to the
    /// operator; the solve is posed on the Nyquist-free subspace.
    needs_filter: bool,
}

impl<'a, R: Real> Workspace<'a, R> {
    fn new(
        w: &'a HermitianMetric<R>,
        b: &'a OneFormPair<R>,
        psi: &'a PsiFunction<R>,
        opts: &'a SolveOptions<R>,
    ) -> Result<Self> {
        let density = w.volume_density()?;
        let weight_total = density.values().iter().map(|c| c.re).sum();
        let needs_filter = w
            .shape()
            .sizes()
            .iter()
            .any(|&s| s > 1 && s % 2 == 0);
        Ok(Self {
            w,
            b,
            psi,
            opts,
            density,
            weight_total,
            needs_filter,
        })
    }

    /// Zero every Fourier mode that sits at a Nyquist frequency.
    fn filter(&self, g: &GridFunction<R>) -> GridFunction<R> {
        if !self.needs_filter {
            return g.clone();
        }
        let sizes = self.shape().sizes().to_vec();
        g.fourier_multiply(|modes| {
            for (d, &len) in sizes.iter().enumerate() {
                if len % 2 == 0 && modes[d] * 2 == len as i64 {
                    return Complex::zero();
                }
            }
            Complex::new(R::one(), R::zero())
        })
    }

    fn shape(&self) -> &GridShape {
        self.w.shape()
    }

    /// ω-average of a real field.
    fn mean(&self, g: &GridFunction<R>) -> R {
        let s: R = g
            .values()
            .iter()
            .zip(self.density.values())
            .map(|(v, d)| v.re * d.re)
            .sum();
        s / self.weight_total
    }

    fn project(&self, g: &GridFunction<R>) -> GridFunction<R> {
        let m = self.mean(g);
        g.map(|c| Complex::new(c.re - m, R::zero()))
    }

    /// `⟨a, b⟩` with optional 3/2-rule dealiasing of the outer products.
    fn pair(&self, a: &OneFormPair<R>, b: &OneFormPair<R>) -> Result<GridFunction<R>> {
        if !self.opts.dealias {
            return self.w.pair(a, b);
        }
        let n = self.shape().n();
        let inv = self.w.inverse();
        let mut acc = GridFunction::zeros(self.shape());
        // T_i = Σ_j g^{ij̄} b_j̄ and U_j = Σ_i g^{ij̄} b_i, contracted exactly;
        // only the outer nonlinear product is dealiased.
        for i in 0..n {
            let mut t = GridFunction::zeros(self.shape());
            for j in 0..n {
                let entry = GridFunction::new(
                    self.shape().clone(),
                    (0..self.shape().num_points()).map(|p| inv.at(p, i, j)).collect(),
                )?;
                t = t.add(&entry.mul(&b.anti()[j]));
            }
            acc = acc.add(&a.holo()[i].mul_dealiased(&t)?);
        }
        for j in 0..n {
            let mut u = GridFunction::zeros(self.shape());
            for i in 0..n {
                let entry = GridFunction::new(
                    self.shape().clone(),
                    (0..self.shape().num_points()).map(|p| inv.at(p, i, j)).collect(),
                )?;
                u = u.add(&entry.mul(&b.holo()[i]));
            }
            acc = acc.add(&a.anti()[j].mul_dealiased(&u)?);
        }
        Ok(acc.scale_re(R::of(0.5)))
    }

    /// `Δv + ψ(|∇v|²) + ⟨B, dv⟩` together with `q = |∇v|²` and `dv`.
    fn full_operator(
        &self,
        v: &GridFunction<R>,
    ) -> Result<(GridFunction<R>, GridFunction<R>, OneFormPair<R>)> {
        let dv = OneFormPair::differential(v)?;
        let q = self.pair(&dv, &dv)?;
        let psi = self.psi;
        let psi_q = {
            let vals = q
                .values()
                .iter()
                .map(|c| psi.eval(c.re).map(|r| Complex::new(r, R::zero())))
                .collect::<Result<Vec<_>>>()?;
            GridFunction::new(self.shape().clone(), vals)?
        };
        let lap = self.w.laplacian(v)?;
        let bdv = self.pair(self.b, &dv)?;
        Ok((lap.add(&psi_q).add(&bdv), q, dv))
    }

    /// `L(h) = Δh + ⟨B̃, dh⟩` on packed real values.
    fn apply_linearized(&self, btilde: &OneFormPair<R>, h: &[R]) -> Result<Vec<R>> {
        let g = GridFunction::new(
            self.shape().clone(),
            h.iter().map(|&x| Complex::new(x, R::zero())).collect(),
        )?;
        if !self.needs_filter {
            let dh = OneFormPair::differential(&g)?;
            let out = self.w.laplacian(&g)?.add(&self.w.pair(btilde, &dh)?);
            return Ok(out.values().iter().map(|c| c.re).collect());
        }
        // Pose the operator block-diagonally on the Nyquist split: variable
        // coefficients scatter across the Nyquist modes, so both the input
        // and the output are projected (the solve lives on the Nyquist-free
        // subspace) and the complementary modes carry the identity to keep
        // the augmented system nonsingular.
        let gp = self.filter(&g);
        let dh = OneFormPair::differential(&gp)?;
        let out = self.filter(&self.w.laplacian(&gp)?.add(&self.w.pair(btilde, &dh)?));
        let out = out.add(&g.sub(&gp));
        Ok(out.values().iter().map(|c| c.re).collect())
    }

    /// Apply the augmented system `[(L, -1), (weights, 0)]` to `(h, δc)`.
    fn apply_augmented(&self, btilde: &OneFormPair<R>, x: &[R]) -> Result<Vec<R>> {
        let np = self.shape().num_points();
        let mut out = self.apply_linearized(btilde, &x[..np])?;
        let dc = x[np];
        for o in out.iter_mut() {
            *o = *o - dc;
        }
        let constraint: R = x[..np]
            .iter()
            .zip(self.density.values())
            .map(|(&h, d)| h * d.re)
            .sum::<R>()
            / self.weight_total;
        out.push(constraint);
        Ok(out)
    }

    fn solve_linear(&self, btilde: &OneFormPair<R>, rhs: &[R]) -> Result<Vec<R>> {
        let np = self.shape().num_points();
        if np <= self.opts.dense_limit {
            let dim = np + 1;
            let mut a = vec![R::zero(); dim * dim];
            let mut e = vec![R::zero(); dim];
            for col in 0..dim {
                e[col] = R::one();
                let col_vals = self.apply_augmented(btilde, &e)?;
                e[col] = R::zero();
                for (row, &val) in col_vals.iter().enumerate() {
                    a[row * dim + col] = val;
                }
            }
            lu_solve(&mut a, rhs.to_vec(), dim)
        } else {
            let precond = self.build_preconditioner();
            gmres(
                rhs,
                |x| self.apply_augmented(btilde, x),
                |x| precond(x),
                R::of(self.opts.krylov_tol),
            )
        }
    }

    /// Left preconditioner: invert the constant-coefficient operator built
    /// from the grid-averaged inverse metric, diagonal in Fourier space.
    fn build_preconditioner(&self) -> impl Fn(&[R]) -> Vec<R> + '_ {
        let n = self.shape().n();
        let np = self.shape().num_points();
        let inv = self.w.inverse();
        let mut mean_inv = vec![Complex::<R>::zero(); n * n];
        let norm = R::one() / R::of(np as f64);
        for p in 0..np {
            for i in 0..n {
                for j in 0..n {
                    mean_inv[i * n + j] = mean_inv[i * n + j] + inv.at(p, i, j) * norm;
                }
            }
        }
        move |x: &[R]| -> Vec<R> {
            let r = &x[..np];
            let rc = x[np];
            let mean: R = r.iter().copied().sum::<R>() / R::of(np as f64);
            let g = GridFunction::new(
                self.shape().clone(),
                r.iter().map(|&v| Complex::new(v, R::zero())).collect(),
            )
            .expect("shape-consistent buffer");
            let half = R::of(0.5);
            let solved = g.fourier_multiply(|modes| {
                // σ(m) = −Σ ḡ^{ij̄} a_i ā_j with a_i = ½(i k_x + k_y)
                let mut sigma = Complex::<R>::zero();
                for i in 0..n {
                    let ai = Complex::new(
                        R::of(modes[2 * i + 1] as f64) * half,
                        R::of(modes[2 * i] as f64) * half,
                    );
                    for j in 0..n {
                        let aj = Complex::new(
                            R::of(modes[2 * j + 1] as f64) * half,
                            R::of(modes[2 * j] as f64) * half,
                        );
                        sigma = sigma - mean_inv[i * n + j] * ai * aj.conj();
                    }
                }
                if sigma.norm() <= R::of(1e-14) {
                    Complex::zero()
                } else {
                    sigma.inv()
                }
            });
            let mut out: Vec<R> = solved.values().iter().map(|c| c.re + rc).collect();
            out.push(-mean);
            out
        }
    }

    fn newton(
        &self,
        v0: &GridFunction<R>,
        t: f64,
        f: &GridFunction<R>,
    ) -> Result<(GridFunction<R>, usize, f64)> {
        let np = self.shape().num_points();
        let mut v = v0.clone();
        for iter in 0..=self.opts.max_newton {
            let (s_full, q, dv) = self.full_operator(&v)?;
            let avg = self.mean(&s_full);
            let residual = self.filter(
                &s_full
                    .map(|c| Complex::new(c.re - avg, R::zero()))
                    .sub(&f.scale_re(R::of(t))),
            );
            let res_sup = residual.max_abs().as_f64();
            if res_sup <= self.opts.newton_tol {
                return Ok((v, iter, res_sup));
            }
            if iter == self.opts.max_newton {
                break;
            }
            // B̃ = B + 2 ψ'(|∇v|²) dv
            let psi = self.psi;
            let two_psi_prime = {
                let vals = q
                    .values()
                    .iter()
                    .map(|c| {
                        psi.eval_deriv(c.re)
                            .map(|d| Complex::new(d + d, R::zero()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                GridFunction::new(self.shape().clone(), vals)?
            };
            let btilde = self.b.add(&dv.scale_fn(&two_psi_prime));
            let mut rhs: Vec<R> = residual.values().iter().map(|c| -c.re).collect();
            rhs.push(R::zero());
            let sol = self.solve_linear(&btilde, &rhs)?;
            let h = GridFunction::new(
                self.shape().clone(),
                sol[..np].iter().map(|&x| Complex::new(x, R::zero())).collect(),
            )?;
            v = self.project(&self.filter(&v.add(&h)));
        }
        Err(Error::NonConvergence(format!(
            "newton did not reach {:.1e} within {} iterations at t = {t}",
            self.opts.newton_tol, self.opts.max_newton
        )))
    }
}

/// Solve `Δv + ψ(|∇v|²) + ⟨B, dv⟩ = f + c` by continuation `S(v_t) = t f`,
/// returning the mean-zero `v` and the constant `c` (ω-average formula).
pub fn solve_semilinear<R: Real>(
    w: &HermitianMetric<R>,
    b: &OneFormPair<R>,
    f: &GridFunction<R>,
    psi: &PsiFunction<R>,
    opts: &SolveOptions<R>,
) -> Result<SolveReport<R>> {
    let start = Instant::now();
    let ws = Workspace::new(w, b, psi, opts)?;
    let mut warnings = Vec::new();

    // f must be ω-mean-zero; adjust with a warning otherwise
    let f_mean = ws.mean(f);
    let f = if f_mean.abs().as_f64() > 1e-10 * f.max_abs().as_f64().max(1.0) {
        warnings.push(format!(
            "f was not mean-zero (average {:.3e}); adjusted",
            f_mean.as_f64()
        ));
        f.map(|c| Complex::new(c.re - f_mean, R::zero()))
    } else {
        f.clone()
    };

    let mut v = match &opts.initial_guess {
        Some(g) => {
            if g.shape() != w.shape() {
                return Err(Error::ShapeMismatch("initial guess".into()));
            }
            ws.project(&ws.filter(g))
        }
        None => GridFunction::zeros(w.shape()),
    };

    let mut path: Vec<ContinuationStep> = Vec::new();
    let mut t_done = 0.0f64;
    let mut step = 1.0f64;
    while t_done < 1.0 {
        let t_try = (t_done + step).min(1.0);
        match ws.newton(&v, t_try, &f) {
            Ok((v_new, iters, residual)) => {
                v = v_new;
                t_done = t_try;
                path.push(ContinuationStep {
                    t: t_try,
                    newton_iters: iters,
                    residual,
                });
                step = (step * 2.0).min(1.0);
            }
            Err(Error::NonConvergence(_)) => {
                step *= 0.5;
                if step < opts.min_step {
                    return Err(Error::NonConvergence(format!(
                        "continuation stalled below min step {:.1e} at t = {:.6}; path: {:?}",
                        opts.min_step, t_done, path
                    )));
                }
            }
            Err(e) => return Err(e),
        }
    }

    let (s_full, q, _) = ws.full_operator(&v)?;
    let c = ws.mean(&s_full);
    let psi0 = psi.eval(R::zero())?;
    let c_bounds = (psi0 - f.max_re(), psi0 - f.min_re());
    Ok(SolveReport {
        gamma: None,
        gamma_spread: None,
        v: ws.project(&v),
        c,
        continuation_path: path,
        sup_grad_v: q.max_re(),
        c_bounds,
        runtime: start.elapsed(),
        warnings,
    })
}

/// Compute `γ_k` of a metric by the Corollary 1.3 reduction: `B = B₁`,
/// `f = avg_ω φ − φ`, `ψ(t) = t`; cross-checks the three γ formulas and
/// stores their spread.
pub fn gamma_k<R: Real>(
    w: &HermitianMetric<R>,
    k: usize,
    opts: &SolveOptions<R>,
) -> Result<SolveReport<R>> {
    let n = w.n();
    let phi = w.phi_k(k)?;
    let b1 = w.b1_form(k)?;
    let psi = PsiFunction::linear();
    let avg_phi = {
        let ws = Workspace::new(w, &b1, &psi, opts)?;
        ws.mean(&phi)
    };
    let f = phi.map(|c| Complex::new(avg_phi - c.re, R::zero()));
    let mut report = solve_semilinear(w, &b1, &f, &psi, opts)?;
    let nf = R::of(n as f64);
    let gamma_main = (report.c + avg_phi) / nf;

    // cross-check: the definition integral, the decomposition average, and
    // the direct integration of the equation
    let v = &report.v;
    let ev = v.exp();
    let top = w
        .form()
        .power(k)?
        .scale_fn(&ev)
        .delbar()?
        .del()?
        .scale(Complex::new(R::zero(), R::of(0.5)))
        .wedge(&w.form().power(n - k - 1)?)?;
    let vol_int = w.volume_form().integrate_top()?.re;
    let gamma_def = top.scale_fn(&v.neg().exp()).integrate_top()?.re / vol_int;
    let ev_vol = w.volume_form().scale_fn(&ev).integrate_top()?.re;
    let gamma_direct = top.integrate_top()?.re / ev_vol;
    let decomposition = {
        let dv = OneFormPair::differential(v)?;
        w.laplacian(v)?
            .add(&w.grad_norm_sq(v)?)
            .add(&w.pair(&b1, &dv)?)
            .add(&phi)
    };
    let ws = Workspace::new(w, &b1, &psi, opts)?;
    let gamma_avg = ws.mean(&decomposition) / nf;

    let gammas = [gamma_main, gamma_def, gamma_avg, gamma_direct];
    let hi = gammas.iter().copied().fold(-R::infinity(), |a, b| a.max(b));
    let lo = gammas.iter().copied().fold(R::infinity(), |a, b| a.min(b));
    report.gamma = Some(gamma_main);
    report.gamma_spread = Some(hi - lo);
    Ok(report)
}

/// Bisection along `ω_t = t ω₁ + (1−t) ω₂` for a zero of `γ_k`, returning
/// `(t*, e^{v/k} ω_{t*}, report)`; the conformal factor makes the returned
/// metric k-th Gauduchon up to the bisection tolerance.
pub fn find_k_gauduchon<R: Real>(
    w1: &HermitianMetric<R>,
    w2: &HermitianMetric<R>,
    k: usize,
    tol: f64,
    opts: &SolveOptions<R>,
) -> Result<(R, HermitianMetric<R>, SolveReport<R>)> {
    let g1 = gamma_k(w1, k, opts)?.gamma.expect("gamma_k sets gamma");
    let g2 = gamma_k(w2, k, opts)?.gamma.expect("gamma_k sets gamma");
    if g1.as_f64().abs() <= tol || g2.as_f64().abs() <= tol || (g1 * g2) >= R::zero() {
        return Err(Error::Argument(format!(
            "endpoint gammas do not bracket a sign change: {:.6e}, {:.6e}",
            g1.as_f64(),
            g2.as_f64()
        )));
    }
    let metric_at = |t: R| -> Result<HermitianMetric<R>> {
        let form = w1
            .form()
            .scale_re(t)
            .add(&w2.form().scale_re(R::one() - t))?;
        HermitianMetric::new(form)
    };
    // γ(1) = g1, γ(0) = g2
    let (mut lo, mut hi) = (R::zero(), R::one());
    let mut g_lo = g2;
    let mut history = Vec::new();
    for _ in 0..BISECTION_BUDGET {
        let mid = (lo + hi) * R::of(0.5);
        let wm = metric_at(mid)?;
        let report = gamma_k(&wm, k, opts)?;
        let gm = report.gamma.expect("gamma_k sets gamma");
        history.push((mid.as_f64(), gm.as_f64()));
        if gm.as_f64().abs() <= tol {
            let scale = report.v.scale_re(R::one() / R::of(k as f64)).exp();
            let adjusted = HermitianMetric::new(wm.form().scale_fn(&scale))?;
            return Ok((mid, adjusted, report));
        }
        if (gm * g_lo) > R::zero() {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence(format!(
        "bisection budget exhausted; bracketing history: {history:?}"
    )))
}

/// Check the conformal sandwich
/// `e^{−max ρ} γ_k(ω) ≤ γ_k(e^ρ ω) ≤ e^{−min ρ} γ_k(ω)`
/// (with the bounds ordered for either sign of γ) and sign invariance.
pub fn conformal_bounds_check<R: Real>(
    w: &HermitianMetric<R>,
    rho: &GridFunction<R>,
    k: usize,
    opts: &SolveOptions<R>,
) -> Result<ConformalCheckReport<R>> {
    let imag = rho.max_imag_abs();
    if imag.as_f64() > 1e-12 * rho.max_abs().as_f64().max(1.0) {
        return Err(Error::NotReal {
            imag: imag.as_f64(),
            tol: 1e-12,
        });
    }
    let gamma_base = gamma_k(w, k, opts)?.gamma.expect("gamma_k sets gamma");
    let scaled = HermitianMetric::new(w.form().scale_fn(&rho.exp()))?;
    let gamma_scaled = gamma_k(&scaled, k, opts)?.gamma.expect("gamma_k sets gamma");
    let rho_min = rho.min_re();
    let rho_max = rho.max_re();
    let b1 = (-rho_max).exp() * gamma_base;
    let b2 = (-rho_min).exp() * gamma_base;
    let (lower, upper) = (b1.min(b2), b1.max(b2));
    let slack = R::of(1e-6);
    let sandwich_ok = gamma_scaled >= lower - slack && gamma_scaled <= upper + slack;
    let sign_ok = if gamma_base.as_f64().abs() <= 1e-8 {
        gamma_scaled.as_f64().abs() <= 1e-6
    } else {
        (gamma_base * gamma_scaled) > R::zero()
    };
    Ok(ConformalCheckReport {
        gamma_base,
        gamma_scaled,
        lower,
        upper,
        sandwich_ok,
        sign_ok,
        rho_min,
        rho_max,
    })
}

/// Dense LU solve with partial pivoting; consumes the matrix.
fn lu_solve<R: Real>(a: &mut [R], mut b: Vec<R>, n: usize) -> Result<Vec<R>> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot * n + col].abs() <= R::of(1e-300) {
            return Err(Error::NonConvergence(
                "singular linearized system".into(),
            ));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / d;
            if factor == R::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] = a[row * n + k] - factor * v;
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s = s - a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Ok(b)
}

fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm2<R: Real>(a: &[R]) -> R {
    dot(a, a).sqrt()
}

/// Restarted left-preconditioned GMRES.
fn gmres<R: Real>(
    rhs: &[R],
    apply: impl Fn(&[R]) -> Result<Vec<R>>,
    precond: impl Fn(&[R]) -> Vec<R>,
    tol: R,
) -> Result<Vec<R>> {
    let n = rhs.len();
    let mut x = vec![R::zero(); n];
    let pb = precond(rhs);
    let target = norm2(&pb) * tol;
    let mut applies = 0usize;
    loop {
        let ax = apply(&x)?;
        applies += 1;
        let r: Vec<R> = rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
        let r = precond(&r);
        let beta = norm2(&r);
        if beta <= target.max(R::of(1e-300)) {
            return Ok(x);
        }
        // Arnoldi with Givens rotations
        let m = KRYLOV_RESTART;
        let mut basis: Vec<Vec<R>> = vec![r.iter().map(|&v| v / beta).collect()];
        let mut h = vec![R::zero(); (m + 1) * m];
        let mut cs = vec![R::zero(); m];
        let mut sn = vec![R::zero(); m];
        let mut g = vec![R::zero(); m + 1];
        g[0] = beta;
        let mut cols = 0;
        for j in 0..m {
            let mut wv = precond(&apply(&basis[j])?);
            applies += 1;
            for i in 0..=j {
                let hij = dot(&wv, &basis[i]);
                h[i * m + j] = hij;
                for (wk, bk) in wv.iter_mut().zip(&basis[i]) {
                    *wk = *wk - hij * *bk;
                }
            }
            let hnext = norm2(&wv);
            h[(j + 1) * m + j] = hnext;
            for i in 0..j {
                let t = cs[i] * h[i * m + j] + sn[i] * h[(i + 1) * m + j];
                h[(i + 1) * m + j] = -sn[i] * h[i * m + j] + cs[i] * h[(i + 1) * m + j];
                h[i * m + j] = t;
            }
            let denom = (h[j * m + j] * h[j * m + j] + hnext * hnext).sqrt();
            cs[j] = h[j * m + j] / denom;
            sn[j] = hnext / denom;
            h[j * m + j] = denom;
            h[(j + 1) * m + j] = R::zero();
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            cols = j + 1;
            if g[j + 1].abs() <= target || hnext <= R::of(1e-300) {
                break;
            }
            basis.push(wv.iter().map(|&v| v / hnext).collect());
        }
        // back-substitute y and update x
        let mut y = vec![R::zero(); cols];
        for i in (0..cols).rev() {
            let mut s = g[i];
            for j in i + 1..cols {
                s = s - h[i * m + j] * y[j];
            }
            y[i] = s / h[i * m + i];
        }
        for (j, &yj) in y.iter().enumerate() {
            for (xk, bk) in x.iter_mut().zip(&basis[j]) {
                *xk = *xk + yj * *bk;
            }
        }
        if applies > KRYLOV_MAX_APPLIES {
            return Err(Error::NonConvergence(format!(
                "GMRES exceeded {KRYLOV_MAX_APPLIES} operator applications"
            )));
        }
    }
}
