//! Constructors for the explicit examples: the positive-γ₁ torus family, the
//! compactly supported bump semi-metric and its positive-definite family, the
//! exact coframe examples (Iwasawa, S⁵×S¹), and a randomized search for a
//! torus metric with negative γ₁.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coframe::{CoframeAlgebra, CoframeForm};
use crate::forms::{flat_metric_form, Form};
use crate::grid::{GridFunction, GridShape};
use crate::metric::HermitianMetric;
use crate::scalar::Real;
use crate::solver::{gamma_k, SolveOptions};
use crate::{Error, Result};

/// κ with `∫₀^{2π} ξ''/ξ dt = 2πC` for `ξ = 1 + κ sin t`, via the closed form
/// `∫₀^{2π} dt/(1+κ sin t) = 2π/√(1−κ²)`.
pub fn kappa_for<R: Real>(c: R) -> Result<R> {
    if c.partial_cmp(&R::zero()) != Some(core::cmp::Ordering::Greater) {
        return Err(Error::Argument(format!("C must be positive, got {c}")));
    }
    let one = R::one();
    Ok((one - (one / ((one + c) * (one + c)))).sqrt())
}

/// Diagonal metric `(i/2) Σ e_j dz_j∧dz̄_j` from real positive entries.
fn diagonal_metric<R: Real>(entries: Vec<GridFunction<R>>) -> Result<HermitianMetric<R>> {
    let shape = entries[0].shape().clone();
    let mut form = Form::zero(&shape, 1, 1);
    let half_i = Complex::new(R::zero(), R::of(0.5));
    for (j, e) in entries.into_iter().enumerate() {
        form.add_term(vec![j as u8], vec![j as u8], e.scale(half_i))?;
    }
    HermitianMetric::new(form)
}

/// The positive-γ₁ family on the 3-torus: `diag(ξ(x₃), η(x₃), 1)` with
/// `ξ = 1 + κ sin x₃`, `κ = κ(C)`, and `η = e^ζ` where `ζ'' = C − ξ''/ξ` is
/// solved spectrally with `ζ̂₀ = 0`.
///
/// Only the `x₃` dimension is active; `points` is its size.
pub fn torus_positive_gamma1<R: Real>(c: R, points: usize) -> Result<HermitianMetric<R>> {
    let kappa = kappa_for(c)?;
    let shape = GridShape::new(3, vec![1, 1, 1, 1, points, 1])?;
    let xi = GridFunction::from_fn_re(&shape, |x: &[R]| R::one() + kappa * x[4].sin());
    // ξ''/ξ = −κ sin/(1+κ sin); the mean of C − ξ''/ξ vanishes by the choice
    // of κ, up to quadrature error, which is projected out before inverting.
    let rhs = GridFunction::from_fn_re(&shape, |x: &[R]| {
        let s = kappa * x[4].sin();
        c + s / (R::one() + s)
    });
    let rhs = rhs.sub(&GridFunction::constant(&shape, rhs.mean()));
    let zeta = rhs.fourier_multiply(|m| {
        let k = m[4];
        if k == 0 {
            Complex::new(R::zero(), R::zero())
        } else {
            Complex::new(-R::one() / R::of((k * k) as f64), R::zero())
        }
    });
    let eta = zeta.exp();
    diagonal_metric(vec![xi, eta, GridFunction::constant_re(&shape, R::one())])
}

/// The flat metric on the n-torus with the given grid sizes.
pub fn flat_torus<R: Real>(n: usize, sizes: Vec<usize>) -> Result<HermitianMetric<R>> {
    let shape = GridShape::new(n, sizes)?;
    HermitianMetric::new(flat_metric_form(&shape))
}

/// Smooth cutoff `exp(1/(t−b) − 1/(t−a))` on `(a, b)`, zero elsewhere.
pub fn bump_chi<R: Real>(a: R, b: R, t: R) -> R {
    if t <= a || t >= b {
        R::zero()
    } else {
        ((t - b).recip() - (t - a).recip()).exp()
    }
}

/// Derivative of [`bump_chi`].
pub fn bump_chi_deriv<R: Real>(a: R, b: R, t: R) -> R {
    if t <= a || t >= b {
        R::zero()
    } else {
        let da = t - a;
        let db = t - b;
        bump_chi(a, b, t) * ((da * da).recip() - (db * db).recip())
    }
}

/// First cutoff factor of the bump construction, supported on `(−1/3, 1/3)`.
pub fn bump_f<R: Real>(t: R) -> R {
    bump_chi(R::of(-1.0 / 3.0), R::of(1.0 / 3.0), t)
}

/// Second cutoff factor, supported on `(0, 2/3)`.
pub fn bump_g<R: Real>(t: R) -> R {
    bump_chi(R::zero(), R::of(2.0 / 3.0), t)
}

/// Derivative of [`bump_f`].
pub fn bump_f_deriv<R: Real>(t: R) -> R {
    bump_chi_deriv(R::of(-1.0 / 3.0), R::of(1.0 / 3.0), t)
}

/// Derivative of [`bump_g`].
pub fn bump_g_deriv<R: Real>(t: R) -> R {
    bump_chi_deriv(R::zero(), R::of(2.0 / 3.0), t)
}

/// High-resolution trapezoid value of `∫fg · ∫(−f'g')` over the chart, the
/// exact value of `(i/2)∫∂∂̄ω̊∧ω̊` for the bump semi-metric.
pub fn bump_product_formula<R: Real>(samples: usize) -> R {
    let h = R::of(2.0) / R::of(samples as f64);
    let mut fg = R::zero();
    let mut dfdg = R::zero();
    for i in 0..=samples {
        let t = -R::one() + h * R::of(i as f64);
        let w = if i == 0 || i == samples {
            R::of(0.5)
        } else {
            R::one()
        };
        fg = fg + w * bump_f(t) * bump_g(t);
        dfdg = dfdg - w * bump_f_deriv(t) * bump_g_deriv(t);
    }
    fg * h * dfdg * h
}

/// Dilation of the chart's cutoff axes (`x₃`, `y₃`) inside the torus period.
const CUTOFF_AXIS_SCALE: f64 = 6.0;
/// Chart offset centering the union of the cutoff supports at the origin.
const CUTOFF_AXIS_SHIFT: f64 = 1.0 / 6.0;
/// Dilation of the unit discs carrying the radial profiles (`z₁`, `z₂`).
const DISC_SCALE: f64 = 3.0;

fn wrap<R: Real>(x: R) -> R {
    if x >= R::TAU / R::of(2.0) {
        x - R::TAU
    } else {
        x
    }
}

/// Chart coordinate of the cutoff axes; grid `[−π,π)` covers chart `(−1/2+1/6, 1/2+1/6)`-ish
/// so both supports `(−1/3,1/3)` and `(0,2/3)` lie strictly inside one period.
fn cutoff_chart<R: Real>(x: R) -> R {
    wrap(x) / R::of(CUTOFF_AXIS_SCALE) + R::of(CUTOFF_AXIS_SHIFT)
}

/// Radial disc profile `exp(−1/(1−|z|²))` in chart units, unnormalized.
fn disc_profile<R: Real>(xr: R, yr: R) -> R {
    let r2 = (xr * xr + yr * yr) / R::of(DISC_SCALE * DISC_SCALE);
    if r2 >= R::one() {
        R::zero()
    } else {
        (-(R::one() - r2).recip()).exp()
    }
}

/// Grid quadrature of the squared disc profile over one coordinate plane.
fn disc_mass<R: Real>(points: usize) -> R {
    let h = R::TAU / R::of(points as f64);
    let mut m = R::zero();
    for i in 0..points {
        for j in 0..points {
            let p = disc_profile(wrap(h * R::of(i as f64)), wrap(h * R::of(j as f64)));
            m = m + p * p;
        }
    }
    m * h * h
}

/// The semi-positive bump form `ω̊ = (i/2)[φ dz₁∧dz̄₁ + ψ dz₂∧dz̄₂]` with
/// `φ = η(z₁)η(z₂)f(x₃)f(y₃)` and `ψ = η(z₁)η(z₂)g(x₃)g(y₃)`, compactly
/// supported in one period of the 3-torus.
///
/// The chart coordinates are dilated per axis (cutoff axes ×6 and shifted,
/// disc axes ×3) so the supports fill most of the period; the dilation leaves
/// the value of `(i/2)∫∂∂̄ω̊∧ω̊` unchanged because the product formula
/// `∫fg·∫(−f'g')` is invariant under it. The disc profile η is normalized so
/// its squared grid quadrature over a plane is one.
pub fn bump_semimetric<R: Real>(points: usize) -> Result<Form<R>> {
    if points < 4 {
        return Err(Error::Argument(format!(
            "bump grid needs at least 4 points per dimension, got {points}"
        )));
    }
    let shape = GridShape::new(3, vec![points; 6])?;
    let norm = disc_mass::<R>(points).sqrt().recip();
    let profile = |x: &[R], axis: fn(R) -> R| {
        norm * disc_profile(wrap(x[0]), wrap(x[1]))
            * norm
            * disc_profile(wrap(x[2]), wrap(x[3]))
            * axis(cutoff_chart(x[4]))
            * axis(cutoff_chart(x[5]))
    };
    let phi = GridFunction::from_fn_re(&shape, |x: &[R]| profile(x, bump_f));
    let psi = GridFunction::from_fn_re(&shape, |x: &[R]| profile(x, bump_g));
    let half_i = Complex::new(R::zero(), R::of(0.5));
    let mut form = Form::zero(&shape, 1, 1);
    form.add_term(vec![0], vec![0], phi.scale(half_i))?;
    form.add_term(vec![1], vec![1], psi.scale(half_i))?;
    Ok(form)
}

/// Positive-definite interpolation `ω̊ + t·ω_flat`, `t > 0`.
pub fn bump_family<R: Real>(t: R, points: usize) -> Result<HermitianMetric<R>> {
    if t.partial_cmp(&R::zero()) != Some(core::cmp::Ordering::Greater) {
        return Err(Error::Argument(format!(
            "bump family parameter must be positive, got {t}"
        )));
    }
    let ring = bump_semimetric(points)?;
    let flat = flat_metric_form(ring.shape()).scale_re(t);
    HermitianMetric::new(ring.add(&flat)?)
}

/// The Iwasawa threefold: coframe `φ₁, φ₂, φ₃` with the single structure
/// equation `∂φ₃ = −φ₁∧φ₂`, and the standard metric
/// `ω = (i/2)(φ₁∧φ̄₁ + φ₂∧φ̄₂ + φ₃∧φ̄₃)`.
///
/// The sign in the structure equation follows from differentiating
/// `φ₃ = dz₃ − z₁dz₂`; references that set `dφ₃ = φ₂∧φ₁` agree after
/// relabeling, and γ₁ is unaffected.
pub fn iwasawa() -> Result<(CoframeAlgebra, CoframeForm)> {
    let alg = CoframeAlgebra::parse(
        "generators: phi1 phi2 phi3\n\
         del phi3 = -phi1^phi2\n",
    )?;
    let omega = alg.parse_form("i/2*phi1^~phi1 + i/2*phi2^~phi2 + i/2*phi3^~phi3")?;
    Ok((alg, omega))
}

/// `S⁵×S¹` as the unit-circle bundle of `O(-1)` over `P²`: a formal closed
/// `(1,1)` generator `W` (the pulled-back Fubini–Study form, `W³ = 0`) and a
/// connection coframe `θ` with `∂̄θ = W`, carrying `ω₀ = W + (i/2)θ∧θ̄`.
pub fn s5s1() -> Result<(CoframeAlgebra, CoframeForm)> {
    let alg = CoframeAlgebra::parse(
        "generators: theta\n\
         formal: W\n\
         W^3 = 0\n\
         delbar theta = W\n",
    )?;
    let omega = alg.parse_form("W + i/2*theta^~theta")?;
    Ok((alg, omega))
}

/// Parameters of the randomized diagonal-family search for negative γ₁.
#[derive(Clone, Debug, Serialize)]
pub struct FamilySpec {
    /// RNG seed; the whole search is deterministic given the seed.
    pub seed: u64,
    /// Grid points along each of the two active dimensions (`x₃`, `y₃`).
    pub points: usize,
    /// Trigonometric modes per variable in each diagonal entry.
    pub modes: usize,
    /// Coefficient amplitude before the positivity rescale.
    pub amplitude: f64,
    /// Success threshold: the search succeeds iff some `γ₁ < −tol`.
    pub tol: f64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            seed: 7,
            points: 16,
            modes: 2,
            amplitude: 0.6,
            tol: 1e-8,
        }
    }
}

/// One evaluated family member.
#[derive(Clone, Debug, Serialize)]
pub struct SearchSample {
    pub index: usize,
    /// Effective trig-polynomial coefficients after the positivity rescale;
    /// first half parameterizes the `z₁z̄₁` entry, second half the `z₂z̄₂` one.
    pub coefficients: Vec<f64>,
    /// `∫(i/2)∂∂̄ω∧ω`; a negative value is necessary for `γ₁ < 0`, so the
    /// solver runs only on screened candidates.
    pub screen: f64,
    /// `γ₁` where the screen passed.
    pub gamma: Option<f64>,
}

/// Full search log; failure is an outcome, not an error.
#[derive(Clone, Debug, Serialize)]
pub struct SearchOutcome {
    pub success: bool,
    pub best_gamma: Option<f64>,
    pub best_index: Option<usize>,
    pub solves: usize,
    pub samples: Vec<SearchSample>,
}

/// Trig polynomial `1 + Σ_m a cos(m x₃) + b sin(m x₃) + c cos(m y₃) + d sin(m y₃)`.
fn trig_entry<R: Real>(shape: &GridShape, coeffs: &[f64]) -> GridFunction<R> {
    GridFunction::from_fn_re(shape, |x: &[R]| {
        let mut v = R::one();
        for (m, c) in coeffs.chunks_exact(4).enumerate() {
            let freq = R::of((m + 1) as f64);
            v = v + R::of(c[0]) * (freq * x[4]).cos()
                + R::of(c[1]) * (freq * x[4]).sin()
                + R::of(c[2]) * (freq * x[5]).cos()
                + R::of(c[3]) * (freq * x[5]).sin();
        }
        v
    })
}

/// Rescale the deviation from 1 so the entry stays ≥ 0.2 pointwise.
fn positivity_rescale<R: Real>(shape: &GridShape, coeffs: &mut [f64]) -> GridFunction<R> {
    let entry = trig_entry::<R>(shape, coeffs);
    let min_dev = entry.min_re().as_f64() - 1.0;
    if min_dev < -0.8 {
        let lambda = 0.8 / (-min_dev);
        for c in coeffs.iter_mut() {
            *c *= lambda;
        }
        trig_entry(shape, coeffs)
    } else {
        entry
    }
}

/// Randomized search for a torus metric `diag(ξ, η, 1)` with `γ₁ < 0`, with
/// `ξ, η` trig polynomials in `(x₃, y₃)`.
///
/// Every sample is screened by the sign of `∫(i/2)∂∂̄ω∧ω` (nonnegative
/// integral forces `γ₁ ≥ 0`), and the solver runs on candidates that pass.
/// The log is deterministic for a fixed seed.
pub fn negative_gamma1_search<R: Real>(budget: usize, spec: &FamilySpec) -> Result<SearchOutcome> {
    let shape = GridShape::new(3, vec![1, 1, 1, 1, spec.points, spec.points])?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let opts = SolveOptions::default();
    let mut samples = Vec::with_capacity(budget);
    let mut solves = 0usize;
    let mut best: Option<(usize, f64)> = None;
    for index in 0..budget {
        let mut coeffs: Vec<f64> = (0..8 * spec.modes)
            .map(|_| rng.gen_range(-spec.amplitude..=spec.amplitude))
            .collect();
        let (xi_coeffs, eta_coeffs) = coeffs.split_at_mut(4 * spec.modes);
        let xi = positivity_rescale::<R>(&shape, xi_coeffs);
        let eta = positivity_rescale::<R>(&shape, eta_coeffs);
        let one = GridFunction::constant_re(&shape, R::one());
        let metric = diagonal_metric(vec![xi, eta, one])?;
        let screen = metric.gauduchon_criterion(1)?.as_f64();
        let gamma = if screen < 0.0 {
            solves += 1;
            let g = gamma_k(&metric, 1, &opts)?
                .gamma
                .expect("gamma_k fills gamma")
                .as_f64();
            if g < best.map_or(f64::INFINITY, |(_, b)| b) {
                best = Some((index, g));
            }
            Some(g)
        } else {
            None
        };
        samples.push(SearchSample {
            index,
            coefficients: coeffs,
            screen,
            gamma,
        });
    }
    Ok(SearchOutcome {
        success: best.is_some_and(|(_, g)| g < -spec.tol),
        best_gamma: best.map(|(_, g)| g),
        best_index: best.map(|(i, _)| i),
        solves,
        samples,
    })
}

/// Expected sign of γ₁ for a cataloged example.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaSign {
    Negative,
    Zero,
    Positive,
}

/// Registry entry for a named example.
#[derive(Clone, Debug, Serialize)]
pub struct ExampleSpec {
    pub name: &'static str,
    pub description: &'static str,
    /// Whether the builder yields a positive-definite metric (`false` for the
    /// semi-positive bump form).
    pub positive_definite: bool,
    /// `true` for exact coframe examples, `false` for grid metrics.
    pub exact: bool,
    pub expected_gamma1_sign: GammaSign,
    pub notes: &'static str,
}

/// All named examples, addressable from the CLI.
pub fn examples() -> &'static [ExampleSpec] {
    &[
        ExampleSpec {
            name: "flat",
            description: "flat metric on the n-torus",
            positive_definite: true,
            exact: false,
            expected_gamma1_sign: GammaSign::Zero,
            notes: "",
        },
        ExampleSpec {
            name: "torus-positive-gamma1",
            description: "diag(ξ(x₃), η(x₃), 1) with η''/η + ξ''/ξ ≥ C > 0",
            positive_definite: true,
            exact: false,
            expected_gamma1_sign: GammaSign::Positive,
            notes: "parameter C > 0; κ = √(1 − 1/(1+C)²)",
        },
        ExampleSpec {
            name: "bump-semimetric",
            description: "compactly supported semi-positive ω̊ with (i/2)∫∂∂̄ω̊∧ω̊ > 0",
            positive_definite: false,
            exact: false,
            expected_gamma1_sign: GammaSign::Positive,
            notes: "chart axes are dilated inside the period; the product \
                    formula ∫fg·∫(−f'g') is invariant under the dilation",
        },
        ExampleSpec {
            name: "bump-family",
            description: "positive-definite ω̊ + t·ω_flat, t > 0",
            positive_definite: true,
            exact: false,
            expected_gamma1_sign: GammaSign::Positive,
            notes: "γ₁ > 0 for small t by continuity of the bump integral",
        },
        ExampleSpec {
            name: "iwasawa",
            description: "Iwasawa threefold with the standard balanced metric",
            positive_definite: true,
            exact: true,
            expected_gamma1_sign: GammaSign::Positive,
            notes: "γ₁ = 1/6 exactly; structure equation ∂φ₃ = −φ₁∧φ₂ from \
                    φ₃ = dz₃ − z₁dz₂",
        },
        ExampleSpec {
            name: "s5s1",
            description: "S⁵×S¹ as the unit O(-1) circle bundle over P², ω₀ = ω_FS + (i/2)θ∧θ̄",
            positive_definite: true,
            exact: true,
            expected_gamma1_sign: GammaSign::Negative,
            notes: "γ₁ = −1/12 exactly in this normalization; references \
                    quoting −1/6 differ by a volume-form convention, and the \
                    sign is convention-independent",
        },
    ]
}

/// Look up a registry entry by name.
pub fn find_example(name: &str) -> Option<&'static ExampleSpec> {
    examples().iter().find(|e| e.name == name)
}
