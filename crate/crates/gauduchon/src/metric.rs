//! Hermitian metric operators on the torus: Laplacian, gradient pairing,
//! `φ`, `B₁`, the nonlinear conformal operator `F`, classification
//! predicates, and the integral criteria.
//!
//! Conventions follow `ω = (i/2) Σ g_{ij̄} dz_i ∧ dz̄_j` with `(g^{ij̄})` the
//! transposed inverse of `(g_{ij̄})`, `Δh = Σ g^{ij̄} h_{ij̄}` and
//! `⟨A,B⟩ = ½ Σ g^{ij̄}(A_i B_{j̄} + A_{j̄} B_i)`.

use crate::forms::Form;
use crate::grid::{GridFunction, GridShape};
use crate::scalar::Real;
use crate::{Error, Result};
use num_complex::Complex;
use num_traits::Zero;
use serde::Serialize;

/// Metric construction rejects eigenvalue floors at or below this.
const POSITIVITY_FLOOR: f64 = 1e-10;

/// Imaginary residue tolerated when coercing `φ`, `F`, pairings to real.
const REALITY_TOL: f64 = 1e-11;

/// A real 1-form supplied as its (1,0) and (0,1) component lists:
/// `A = Σ (A_i dz_i + A_ī dz̄_i)`.
#[derive(Clone, Debug)]
pub struct OneFormPair<R: Real> {
    holo: Vec<GridFunction<R>>,
    anti: Vec<GridFunction<R>>,
}

impl<R: Real> OneFormPair<R> {
    pub fn new(holo: Vec<GridFunction<R>>, anti: Vec<GridFunction<R>>) -> Result<Self> {
        if holo.len() != anti.len() {
            return Err(Error::Argument("component count mismatch".into()));
        }
        Ok(Self { holo, anti })
    }

    /// Real 1-form from its (1,0) part; the (0,1) part is the conjugate.
    pub fn from_holo(holo: Vec<GridFunction<R>>) -> Self {
        let anti = holo.iter().map(|c| c.conj()).collect();
        Self { holo, anti }
    }

    pub fn zero(shape: &GridShape) -> Self {
        let zeros: Vec<_> = (0..shape.n()).map(|_| GridFunction::zeros(shape)).collect();
        Self {
            anti: zeros.clone(),
            holo: zeros,
        }
    }

    /// `dh` of a scalar field: `(∂h/∂z_i, ∂h/∂z̄_i)`.
    pub fn differential(h: &GridFunction<R>) -> Result<Self> {
        let n = h.shape().n();
        let mut holo = Vec::with_capacity(n);
        let mut anti = Vec::with_capacity(n);
        for j in 0..n {
            holo.push(h.holomorphic_derivative(j, false)?);
            anti.push(h.holomorphic_derivative(j, true)?);
        }
        Ok(Self { holo, anti })
    }

    pub fn holo(&self) -> &[GridFunction<R>] {
        &self.holo
    }

    pub fn anti(&self) -> &[GridFunction<R>] {
        &self.anti
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            holo: self.holo.iter().zip(&other.holo).map(|(a, b)| a.add(b)).collect(),
            anti: self.anti.iter().zip(&other.anti).map(|(a, b)| a.add(b)).collect(),
        }
    }

    /// Scale by a pointwise real field.
    pub fn scale_fn(&self, u: &GridFunction<R>) -> Self {
        Self {
            holo: self.holo.iter().map(|c| c.mul(u)).collect(),
            anti: self.anti.iter().map(|c| c.mul(u)).collect(),
        }
    }

    pub fn sup_norm(&self) -> R {
        self.holo
            .iter()
            .chain(self.anti.iter())
            .map(|c| c.max_abs())
            .fold(R::zero(), |a, b| a.max(b))
    }
}

/// Field of n×n complex matrices, one per grid point (point-major layout).
#[derive(Clone, Debug)]
pub struct MatrixField<R: Real> {
    n: usize,
    data: Vec<Complex<R>>,
}

impl<R: Real> MatrixField<R> {
    fn zeros(n: usize, points: usize) -> Self {
        Self {
            n,
            data: vec![Complex::zero(); n * n * points],
        }
    }

    #[inline]
    pub fn at(&self, point: usize, i: usize, j: usize) -> Complex<R> {
        self.data[(point * self.n + i) * self.n + j]
    }

    #[inline]
    fn at_mut(&mut self, point: usize, i: usize, j: usize) -> &mut Complex<R> {
        &mut self.data[(point * self.n + i) * self.n + j]
    }

    pub fn num_points(&self) -> usize {
        self.data.len() / (self.n * self.n)
    }
}

/// Smallest eigenvalue of a hermitian matrix (row-major, length n*n).
pub fn hermitian_min_eigenvalue<R: Real>(a: &[Complex<R>], n: usize) -> R {
    // diagonal fast path
    let mut max_off = R::zero();
    let mut scale = R::zero();
    for i in 0..n {
        scale = scale.max(a[i * n + i].norm());
        for j in 0..n {
            if i != j {
                max_off = max_off.max(a[i * n + j].norm());
            }
        }
    }
    if max_off <= R::of(1e-14) * scale.max(R::one()) {
        return (0..n).map(|i| a[i * n + i].re).fold(R::infinity(), |x, y| x.min(y));
    }

    // cyclic complex Jacobi
    let mut m = a.to_vec();
    for _sweep in 0..50 {
        let mut off = R::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + m[p * n + q].norm_sqr();
            }
        }
        if off <= R::of(1e-28) * scale.max(R::one()) * scale.max(R::one()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.norm() <= R::of(1e-300) {
                    continue;
                }
                let app = m[p * n + p].re;
                let aqq = m[q * n + q].re;
                // unitary 2x2 rotation diagonalizing the (p,q) block
                let phase = apq / Complex::new(apq.norm(), R::zero());
                let theta = (R::of(2.0) * apq.norm()).atan2(aqq - app) / R::of(2.0);
                let (s, c) = theta.sin_cos();
                let cp = Complex::new(c, R::zero());
                let sp = phase * s;
                // rows/cols p,q update: M <- U^H M U with U = [[c, s*phase],[-s*conj(phase), c]]
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = mkp * cp - mkq * sp.conj();
                    m[k * n + q] = mkp * sp + mkq * cp;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = mpk * cp - mqk * sp;
                    m[q * n + k] = mpk * sp.conj() + mqk * cp;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i].re).fold(R::infinity(), |x, y| x.min(y))
}

/// Invert an n×n complex matrix by Gauss-Jordan with partial pivoting.
fn invert_matrix<R: Real>(a: &[Complex<R>], n: usize) -> Option<Vec<Complex<R>>> {
    let mut m = a.to_vec();
    let mut inv = vec![Complex::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = Complex::new(R::one(), R::zero());
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i * n + col]
                .norm()
                .partial_cmp(&m[j * n + col].norm())
                .unwrap()
        })?;
        if m[pivot * n + col].norm() <= R::of(1e-300) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
        }
        let d = m[col * n + col];
        for k in 0..n {
            m[col * n + k] = m[col * n + k] / d;
            inv[col * n + k] = inv[col * n + k] / d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f.norm() == R::zero() {
                continue;
            }
            for k in 0..n {
                let mc = m[col * n + k];
                let ic = inv[col * n + k];
                m[r * n + k] = m[r * n + k] - f * mc;
                inv[r * n + k] = inv[r * n + k] - f * ic;
            }
        }
    }
    Some(inv)
}

/// A positive hermitian (1,1)-form with cached matrix, inverse, and volume.
#[derive(Clone, Debug)]
pub struct HermitianMetric<R: Real> {
    form: Form<R>,
    matrix: MatrixField<R>,
    inverse: MatrixField<R>,
    volume: Form<R>,
    eigen_floor: R,
}

/// Classification of a metric at a fixed tolerance. Residuals are sup norms
/// of the relevant form coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct ClassificationReport {
    pub tol: f64,
    pub is_kahler: bool,
    pub kahler_residual: f64,
    pub is_balanced: bool,
    pub balanced_residual: f64,
    pub is_gauduchon: bool,
    pub gauduchon_residual: f64,
    pub is_pluriclosed: bool,
    pub pluriclosed_residual: f64,
    /// Residual of `∂∂̄ωᵏ ∧ ω^{n−k−1}` for k = 1..n−1 (index 0 is k = 1).
    pub k_gauduchon_residuals: Vec<f64>,
}

impl<R: Real> HermitianMetric<R> {
    /// Build from a positive (1,1)-form; rejects non-hermitian or
    /// non-positive data.
    pub fn new(form: Form<R>) -> Result<Self> {
        let shape = form.shape().clone();
        let n = shape.n();
        if form.bidegree() != (1, 1) {
            return Err(Error::Argument("metric form must have bidegree (1,1)".into()));
        }
        let points = shape.num_points();
        let mut matrix = MatrixField::zeros(n, points);
        // coefficient of dz_i∧dz̄_j is (i/2) g_{ij̄}
        let minus_two_i = Complex::new(R::zero(), -R::of(2.0));
        for ((i, j), c) in form.terms() {
            let (gi, gj) = (i[0] as usize, j[0] as usize);
            for (p, &v) in c.values().iter().enumerate() {
                *matrix.at_mut(p, gi, gj) = v * minus_two_i;
            }
        }

        // hermiticity and positivity
        let mut scale = R::zero();
        for p in 0..points {
            for i in 0..n {
                for j in 0..n {
                    scale = scale.max(matrix.at(p, i, j).norm());
                }
            }
        }
        let herm_tol = R::of(1e-12) * scale.max(R::one());
        let mut floor = R::infinity();
        let mut inverse = MatrixField::zeros(n, points);
        let mut local = vec![Complex::zero(); n * n];
        for p in 0..points {
            for i in 0..n {
                for j in 0..n {
                    let a = matrix.at(p, i, j);
                    let b = matrix.at(p, j, i).conj();
                    if (a - b).norm() > herm_tol {
                        return Err(Error::Argument(format!(
                            "metric matrix is not hermitian at grid point {p}: residual {:.3e}",
                            (a - b).norm().as_f64()
                        )));
                    }
                    local[i * n + j] = a;
                }
            }
            floor = floor.min(hermitian_min_eigenvalue(&local, n));
            if floor <= R::of(POSITIVITY_FLOOR) {
                return Err(Error::NotPositive {
                    floor: floor.as_f64(),
                });
            }
            // g^{ij̄} = transposed inverse of g_{ij̄}
            let inv = invert_matrix(&local, n).ok_or(Error::NotPositive {
                floor: floor.as_f64(),
            })?;
            for i in 0..n {
                for j in 0..n {
                    *inverse.at_mut(p, i, j) = inv[j * n + i];
                }
            }
        }

        let volume = form.power(n)?;
        Ok(Self {
            form,
            matrix,
            inverse,
            volume,
            eigen_floor: floor,
        })
    }

    pub fn shape(&self) -> &GridShape {
        self.form.shape()
    }

    pub fn n(&self) -> usize {
        self.shape().n()
    }

    pub fn form(&self) -> &Form<R> {
        &self.form
    }

    /// `ωⁿ`.
    pub fn volume_form(&self) -> &Form<R> {
        &self.volume
    }

    pub fn eigen_floor(&self) -> R {
        self.eigen_floor
    }

    pub fn matrix(&self) -> &MatrixField<R> {
        &self.matrix
    }

    pub fn inverse(&self) -> &MatrixField<R> {
        &self.inverse
    }

    /// ω-average of a scalar field: `∫ u ωⁿ / ∫ ωⁿ`.
    pub fn average(&self, u: &GridFunction<R>) -> Result<Complex<R>> {
        let num = self.volume.scale_fn(u).integrate_top()?;
        let den = self.volume.integrate_top()?;
        Ok(num / den)
    }

    /// Quadrature weights of `∫ · ωⁿ` relative to plain sample sums:
    /// pointwise `ωⁿ/dV` density (real, positive).
    pub fn volume_density(&self) -> Result<GridFunction<R>> {
        let flat = crate::forms::flat_volume_form::<R>(self.shape());
        let d = self.volume.ratio_to_volume(&flat)?;
        d.into_real(R::of(1e-9) * d.max_abs().max(R::one()))
    }

    /// `Δh = Σ g^{ij̄} h_{ij̄}` (index-contraction path).
    ///
    /// In debug builds the form-ratio path `n ω^{n−1}∧(i/2)∂∂̄h / ωⁿ` is
    /// evaluated as well and the two must agree to 1e-9 sup norm.
    pub fn laplacian(&self, h: &GridFunction<R>) -> Result<GridFunction<R>> {
        let out = self.laplacian_contraction(h)?;
        // the form-ratio path is far more expensive; cross-check only on
        // grids small enough that it cannot dominate a solve
        #[cfg(debug_assertions)]
        if self.shape().num_points() <= 4096 {
            let alt = self.laplacian_form_path(h)?;
            let diff = out.sub(&alt).max_abs().as_f64();
            let scale = out.max_abs().as_f64().max(1.0);
            debug_assert!(
                diff <= 1e-9 * scale,
                "laplacian two-path disagreement: {diff:.3e}"
            );
        }
        Ok(out)
    }

    fn laplacian_contraction(&self, h: &GridFunction<R>) -> Result<GridFunction<R>> {
        if h.shape() != self.shape() {
            return Err(Error::ShapeMismatch("laplacian input".into()));
        }
        let n = self.n();
        let mut acc = vec![Complex::<R>::zero(); self.shape().num_points()];
        for i in 0..n {
            let hz = h.holomorphic_derivative(i, false)?;
            for j in 0..n {
                let hij = hz.holomorphic_derivative(j, true)?;
                for (p, (&d, a)) in hij.values().iter().zip(acc.iter_mut()).enumerate() {
                    *a = *a + self.inverse.at(p, i, j) * d;
                }
            }
        }
        GridFunction::new(self.shape().clone(), acc)
    }

    /// `Δh` via `n ω^{n−1} ∧ (i/2)∂∂̄h / ωⁿ`.
    pub fn laplacian_form_path(&self, h: &GridFunction<R>) -> Result<GridFunction<R>> {
        let n = self.n();
        let ddbar = Form::from_scalar(h.clone())
            .delbar()?
            .del()?
            .scale(Complex::new(R::zero(), R::of(0.5)));
        let top = self.form.power(n - 1)?.wedge(&ddbar)?;
        Ok(top.ratio_to_volume(&self.volume)?.scale_re(R::of(n as f64)))
    }

    /// `⟨A,B⟩ = ½ Σ g^{ij̄} (A_i B_{j̄} + A_{j̄} B_i)`, pointwise.
    pub fn pair(&self, a: &OneFormPair<R>, b: &OneFormPair<R>) -> Result<GridFunction<R>> {
        let n = self.n();
        if a.holo.len() != n || b.holo.len() != n {
            return Err(Error::ShapeMismatch("1-form component count".into()));
        }
        let mut acc = vec![Complex::<R>::zero(); self.shape().num_points()];
        let half = R::of(0.5);
        for i in 0..n {
            for j in 0..n {
                let ai = a.holo[i].values();
                let bj = b.anti[j].values();
                let aj = a.anti[j].values();
                let bi = b.holo[i].values();
                for (p, v) in acc.iter_mut().enumerate() {
                    *v = *v
                        + self.inverse.at(p, i, j)
                            * (ai[p] * bj[p] + aj[p] * bi[p])
                            * Complex::new(half, R::zero());
                }
            }
        }
        GridFunction::new(self.shape().clone(), acc)
    }

    /// `|∇h|² = Σ g^{ij̄} h_i h_j̄ = ⟨dh, dh⟩` for real `h`.
    pub fn grad_norm_sq(&self, h: &GridFunction<R>) -> Result<GridFunction<R>> {
        let dh = OneFormPair::differential(h)?;
        let g = self.pair(&dh, &dh)?;
        let tol = R::of(REALITY_TOL) * g.max_abs().max(R::one());
        g.into_real(tol)
    }

    /// `φ = n (i/2) ∂∂̄(ωᵏ) ∧ ω^{n−k−1} / ωⁿ`.
    pub fn phi_k(&self, k: usize) -> Result<GridFunction<R>> {
        let n = self.n();
        self.check_k(k)?;
        let ddbar = self
            .form
            .power(k)?
            .delbar()?
            .del()?
            .scale(Complex::new(R::zero(), R::of(0.5)));
        let top = ddbar.wedge(&self.form.power(n - k - 1)?)?;
        let phi = top.ratio_to_volume(&self.volume)?.scale_re(R::of(n as f64));
        let tol = R::of(REALITY_TOL) * phi.max_abs().max(R::one());
        phi.into_real(tol)
    }

    /// The real 1-form `B₁`, extracted through its first-order symbol: for
    /// each `j` the multiplier of `v_j` in the cross term of `F` is read from
    /// `n (i/2) dz_j ∧ ∂̄ωᵏ ∧ ω^{n−k−1} / ωⁿ`, and the pair of linear systems
    /// `½ Σ g^{ij̄} B_j̄ = μ_i` is solved pointwise.
    pub fn b1_form(&self, k: usize) -> Result<OneFormPair<R>> {
        let n = self.n();
        self.check_k(k)?;
        let wk = self.form.power(k)?;
        let wrest = self.form.power(n - k - 1)?;
        let delbar_wk = wk.delbar()?;
        let nf = R::of(n as f64);
        let half_i = Complex::new(R::zero(), R::of(0.5));

        // μ_i = multiplier of v_i (the (1,0) gradient component)
        let mut mu = Vec::with_capacity(n);
        for j in 0..n {
            let alpha = Form::basis(self.shape(), j as u8, false);
            let top = alpha.wedge(&delbar_wk)?.wedge(&wrest)?.scale(half_i);
            mu.push(top.ratio_to_volume(&self.volume)?.scale_re(nf));
        }

        // ½ Σ_j g^{ij̄} B_j̄ = μ_i  ⇒  B_j̄ = 2 Σ_i g_{ij̄} μ_i
        let points = self.shape().num_points();
        let mut anti = Vec::with_capacity(n);
        for j in 0..n {
            let mut vals = vec![Complex::<R>::zero(); points];
            for (i, mi) in mu.iter().enumerate() {
                let m = mi.values();
                for (p, v) in vals.iter_mut().enumerate() {
                    *v = *v + self.matrix.at(p, i, j) * m[p] * Complex::new(R::of(2.0), R::zero());
                }
            }
            anti.push(GridFunction::new(self.shape().clone(), vals)?);
        }
        let holo = anti.iter().map(|c| c.conj()).collect();
        OneFormPair::new(holo, anti)
    }

    /// `F(v) = n e^{−v} (i/2) ∂∂̄(e^v ωᵏ) ∧ ω^{n−k−1} / ωⁿ`.
    pub fn nonlinear_f(&self, k: usize, v: &GridFunction<R>) -> Result<GridFunction<R>> {
        let n = self.n();
        self.check_k(k)?;
        let ev = v.exp();
        let emv = v.neg().exp();
        let inner = self.form.power(k)?.scale_fn(&ev);
        let ddbar = inner
            .delbar()?
            .del()?
            .scale(Complex::new(R::zero(), R::of(0.5)));
        let top = ddbar.wedge(&self.form.power(n - k - 1)?)?.scale_fn(&emv);
        let f = top.ratio_to_volume(&self.volume)?.scale_re(R::of(n as f64));
        let tol = R::of(REALITY_TOL) * f.max_abs().max(R::one());
        f.into_real(tol)
    }

    /// Evaluate all classification residuals at tolerance `tol`.
    pub fn classify(&self, tol: R) -> Result<ClassificationReport> {
        if tol <= R::zero() {
            return Err(Error::Argument("tolerance must be positive".into()));
        }
        let n = self.n();
        let d_residual = |f: &Form<R>| -> Result<R> {
            Ok(f.del()?.sup_norm().max(f.delbar()?.sup_norm()))
        };
        let ddbar_residual =
            |f: &Form<R>| -> Result<R> { Ok(f.delbar()?.del()?.sup_norm()) };

        let kahler = d_residual(&self.form)?;
        let wn1 = self.form.power(n - 1)?;
        let balanced = d_residual(&wn1)?;
        let gauduchon = ddbar_residual(&wn1)?;
        let pluriclosed = ddbar_residual(&self.form)?;
        let mut k_res = Vec::new();
        for k in 1..n {
            let ddbar = self.form.power(k)?.delbar()?.del()?;
            let top = ddbar.wedge(&self.form.power(n - k - 1)?)?;
            k_res.push(top.sup_norm().as_f64());
        }
        let t = tol.as_f64();
        Ok(ClassificationReport {
            tol: t,
            is_kahler: kahler.as_f64() <= t,
            kahler_residual: kahler.as_f64(),
            is_balanced: balanced.as_f64() <= t,
            balanced_residual: balanced.as_f64(),
            is_gauduchon: gauduchon.as_f64() <= t,
            gauduchon_residual: gauduchon.as_f64(),
            is_pluriclosed: pluriclosed.as_f64() <= t,
            pluriclosed_residual: pluriclosed.as_f64(),
            k_gauduchon_residuals: k_res,
        })
    }

    /// `(i/2) ∫ ∂∂̄ωᵏ ∧ ω^{n−k−1}` for this metric.
    pub fn gauduchon_criterion(&self, k: usize) -> Result<R> {
        self.check_k(k)?;
        integral_del_delbar_wedge(
            &self.form.power(k)?,
            &self.form.power(self.n() - k - 1)?,
        )
    }

    fn check_k(&self, k: usize) -> Result<()> {
        let n = self.n();
        if k == 0 || k >= n {
            return Err(Error::Argument(format!("k must satisfy 1 <= k <= {}", n - 1)));
        }
        Ok(())
    }
}

/// `(i/2) ∫ ∂∂̄(ω̊ᵏ) ∧ ω̊^{n−k−1}` for a semi-metric (1,1)-form.
///
/// The form must be pointwise positive semidefinite (eigenvalue floor ≥ −1e-12
/// relative to the coefficient scale).
pub fn integral_criterion<R: Real>(w_ring: &Form<R>, k: usize) -> Result<R> {
    let shape = w_ring.shape().clone();
    let n = shape.n();
    if w_ring.bidegree() != (1, 1) {
        return Err(Error::Argument("semi-metric must have bidegree (1,1)".into()));
    }
    if k == 0 || k >= n {
        return Err(Error::Argument(format!("k must satisfy 1 <= k <= {}", n - 1)));
    }

    // pointwise semidefiniteness
    let minus_two_i = Complex::new(R::zero(), -R::of(2.0));
    let points = shape.num_points();
    let mut scale = R::zero();
    for (_, c) in w_ring.terms() {
        scale = scale.max(c.max_abs());
    }
    let floor_tol = -R::of(1e-12) * scale.max(R::one()) * R::of(2.0);
    let mut local = vec![Complex::<R>::zero(); n * n];
    for p in 0..points {
        local.iter_mut().for_each(|v| *v = Complex::zero());
        for ((i, j), c) in w_ring.terms() {
            local[(i[0] as usize) * n + j[0] as usize] = c.values()[p] * minus_two_i;
        }
        let floor = hermitian_min_eigenvalue(&local, n);
        if floor < floor_tol {
            return Err(Error::Argument(format!(
                "form is indefinite at grid point {p}: eigenvalue {:.3e}",
                floor.as_f64()
            )));
        }
    }

    integral_del_delbar_wedge(&w_ring.power(k)?, &w_ring.power(n - k - 1)?)
}

/// `(i/2) ∫ ∂∂̄a ∧ b`, streamed term by term so that no intermediate form of
/// `a`'s derivatives is materialized (the 6-D grids are memory-bound).
pub fn integral_del_delbar_wedge<R: Real>(a: &Form<R>, b: &Form<R>) -> Result<R> {
    let shape = a.shape().clone();
    let n = shape.n();
    let factor = crate::forms::top_monomial_factor::<R>(n);
    let half_i = Complex::new(R::zero(), R::of(0.5));
    let mut total = Complex::<R>::zero();
    let (pa, qa) = a.bidegree();
    for ((ia, ja), ca) in a.terms() {
        for dbar in 0..n as u8 {
            if ja.contains(&dbar) {
                continue;
            }
            // sign of dz̄_dbar ∧ dz_I ∧ dz̄_J: past pa dz's, then into J
            let Some((jd, sj)) = crate::forms::merge_indices(&[dbar], ja) else {
                continue;
            };
            let s_delbar = if pa % 2 == 0 { sj } else { -sj };
            let dbar_c = ca.holomorphic_derivative(dbar as usize, true)?;
            for del in 0..n as u8 {
                if ia.contains(&del) {
                    continue;
                }
                let Some((id, si)) = crate::forms::merge_indices(&[del], ia) else {
                    continue;
                };
                // the (pa+1, qa+1) monomial of this term of ∂∂̄a
                for ((ib, jb), cb) in b.terms() {
                    let Some((fi, s1)) = crate::forms::merge_indices(&id, ib) else {
                        continue;
                    };
                    let Some((fj, s2)) = crate::forms::merge_indices(&jd, jb) else {
                        continue;
                    };
                    if fi.len() != n || fj.len() != n {
                        continue;
                    }
                    // dz_{I_b} past dz̄_{J_a∪dbar}
                    let cross = if (ib.len() * (qa + 1)) % 2 == 0 { 1 } else { -1 };
                    let sign = s_delbar * si * s1 * s2 * cross;
                    let d2 = dbar_c.holomorphic_derivative(del as usize, false)?;
                    let val = d2.mul(cb).integrate();
                    let signed = if sign >= 0 { val } else { -val };
                    total = total + signed;
                }
            }
        }
    }
    let v = total * factor * half_i;
    let tol = R::of(1e-9) * v.norm().max(R::one());
    if v.im.abs() > tol {
        return Err(Error::NotReal {
            imag: v.im.abs().as_f64(),
            tol: tol.as_f64(),
        });
    }
    Ok(v.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{flat_metric_form, flat_volume_form};

    fn shape_x3(points: usize) -> GridShape {
        GridShape::new(3, vec![1, 1, 1, 1, points, 1]).unwrap()
    }

    fn flat_metric(shape: &GridShape) -> HermitianMetric<f64> {
        HermitianMetric::new(flat_metric_form::<f64>(shape)).unwrap()
    }

    /// diag(ξ(x₃), η(x₃), 1) with smooth positive profiles
    pub fn torus_like_metric(shape: &GridShape) -> HermitianMetric<f64> {
        let half_i = Complex::new(0.0, 0.5);
        let mut w = Form::zero(shape, 1, 1);
        w.add_term(
            vec![0],
            vec![0],
            GridFunction::from_fn(shape, |x: &[f64]| half_i * (1.0 + 0.5 * x[4].sin())),
        )
        .unwrap();
        w.add_term(
            vec![1],
            vec![1],
            GridFunction::from_fn(shape, |x: &[f64]| half_i * (1.0 + 0.25 * (2.0 * x[4]).cos())),
        )
        .unwrap();
        w.add_term(vec![2], vec![2], GridFunction::constant(shape, half_i))
            .unwrap();
        HermitianMetric::new(w).unwrap()
    }

    #[test]
    fn rejects_indefinite_metric() {
        let shape = shape_x3(8);
        let mut w = Form::zero(&shape, 1, 1);
        let half_i = Complex::new(0.0, 0.5);
        w.add_term(vec![0], vec![0], GridFunction::constant(&shape, -half_i))
            .unwrap();
        w.add_term(vec![1], vec![1], GridFunction::constant(&shape, half_i))
            .unwrap();
        w.add_term(vec![2], vec![2], GridFunction::constant(&shape, half_i))
            .unwrap();
        assert!(matches!(
            HermitianMetric::new(w),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn laplacian_flat_cosine() {
        let shape = GridShape::new(3, vec![32, 1, 1, 1, 1, 1]).unwrap();
        let w = flat_metric(&shape);
        let h = GridFunction::from_fn_re(&shape, |x: &[f64]| x[0].cos());
        let lap = w.laplacian(&h).unwrap();
        let expected = h.scale_re(-0.25);
        assert!(lap.sub(&expected).max_abs() <= 1e-12);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let shape = shape_x3(16);
        let w = torus_like_metric(&shape);
        let h = GridFunction::constant_re(&shape, 3.25);
        assert!(w.laplacian(&h).unwrap().max_abs() <= 1e-13);
    }

    #[test]
    fn laplacian_diagonal_metric_x3_profile() {
        // only the g^{33̄} = 1 entry acts on h(x₃): Δh = h''/4
        let shape = shape_x3(64);
        let w = torus_like_metric(&shape);
        let h = GridFunction::from_fn_re(&shape, |x: &[f64]| (2.0 * x[4]).sin());
        let lap = w.laplacian(&h).unwrap();
        let expected = GridFunction::from_fn_re(&shape, |x: &[f64]| -(2.0 * x[4]).sin());
        assert!(lap.sub(&expected).max_abs() <= 1e-11);
    }

    #[test]
    fn laplacian_two_paths_agree_off_diagonal() {
        // non-diagonal hermitian metric with several active dimensions
        let shape = GridShape::new(2, vec![12, 1, 12, 1]).unwrap();
        let half_i = Complex::new(0.0, 0.5);
        let mut f = Form::zero(&shape, 1, 1);
        f.add_term(
            vec![0],
            vec![0],
            GridFunction::from_fn(&shape, |x: &[f64]| half_i * (2.0 + 0.3 * x[2].sin())),
        )
        .unwrap();
        f.add_term(vec![1], vec![1], GridFunction::constant(&shape, half_i * 2.0))
            .unwrap();
        let off = GridFunction::from_fn(&shape, |x: &[f64]| {
            Complex::new(0.2 * x[0].cos(), 0.1 * x[2].sin()) * half_i
        });
        f.add_term(vec![0], vec![1], off.clone()).unwrap();
        // c_{ji} = (i/2) g_{jī} = −conj(c_{ij}) for hermitian g
        let partner = off.conj().neg();
        f.add_term(vec![1], vec![0], partner).unwrap();
        let w = HermitianMetric::new(f).unwrap();
        let h = GridFunction::from_fn_re(&shape, |x: &[f64]| (x[0] + x[2]).sin());
        let a = w.laplacian_contraction(&h).unwrap();
        let b = w.laplacian_form_path(&h).unwrap();
        assert!(a.sub(&b).max_abs() <= 1e-9 * a.max_abs().max(1.0));
    }

    #[test]
    fn grad_norm_flat_sine() {
        let shape = GridShape::new(3, vec![32, 1, 1, 1, 1, 1]).unwrap();
        let w = flat_metric(&shape);
        let h = GridFunction::from_fn_re(&shape, |x: &[f64]| x[0].sin());
        let g = w.grad_norm_sq(&h).unwrap();
        let expected = GridFunction::from_fn_re(&shape, |x: &[f64]| 0.25 * x[0].cos().powi(2));
        assert!(g.sub(&expected).max_abs() <= 1e-12);
        assert!(g.min_re() >= -1e-13);
    }

    #[test]
    fn pair_is_symmetric() {
        let shape = shape_x3(16);
        let w = torus_like_metric(&shape);
        let a = OneFormPair::from_holo(vec![
            GridFunction::from_fn(&shape, |x: &[f64]| Complex::new(x[4].sin(), 0.2)),
            GridFunction::from_fn(&shape, |x: &[f64]| Complex::new(0.5, x[4].cos())),
            GridFunction::constant_re(&shape, 1.0),
        ]);
        let b = OneFormPair::from_holo(vec![
            GridFunction::from_fn(&shape, |x: &[f64]| Complex::new((2.0 * x[4]).cos(), -0.1)),
            GridFunction::constant_re(&shape, 0.7),
            GridFunction::from_fn(&shape, |x: &[f64]| Complex::new(0.0, x[4].sin())),
        ]);
        let ab = w.pair(&a, &b).unwrap();
        let ba = w.pair(&b, &a).unwrap();
        assert!(ab.sub(&ba).max_abs() <= 1e-13);
    }

    #[test]
    fn phi_flat_is_zero_and_b1_flat_is_zero() {
        let shape = shape_x3(8);
        let w = flat_metric(&shape);
        for k in 1..3 {
            assert!(w.phi_k(k).unwrap().max_abs() <= 1e-13);
            assert!(w.b1_form(k).unwrap().sup_norm() <= 1e-13);
        }
    }

    #[test]
    fn phi_torus_metric_profile() {
        // diag(ξ(x₃), η(x₃), 1): closed form φ = (ξ''/ξ + η''/η)/8
        let shape = shape_x3(64);
        let w = torus_like_metric(&shape);
        let phi = w.phi_k(1).unwrap();
        let closed = GridFunction::from_fn_re(&shape, |x: &[f64]| {
            let t = x[4];
            let xi = 1.0 + 0.5 * t.sin();
            let eta = 1.0 + 0.25 * (2.0 * t).cos();
            let xi2 = -0.5 * t.sin();
            let eta2 = -4.0 * 0.25 * (2.0 * t).cos();
            (xi2 / xi + eta2 / eta) / 8.0
        });
        assert!(phi.sub(&closed).max_abs() <= 1e-10);
    }

    #[test]
    fn f_decomposition_identity() {
        // F(v) = Δv + |∇v|² + ⟨B₁, dv⟩ + φ
        let shape = shape_x3(48);
        let w = torus_like_metric(&shape);
        for k in 1..3 {
            let v = GridFunction::from_fn_re(&shape, |x: &[f64]| {
                0.3 * x[4].sin() + 0.1 * (3.0 * x[4]).cos()
            });
            let f = w.nonlinear_f(k, &v).unwrap();
            let lap = w.laplacian(&v).unwrap();
            let grad = w.grad_norm_sq(&v).unwrap();
            let b1 = w.b1_form(k).unwrap();
            let dv = OneFormPair::differential(&v).unwrap();
            let bdv = w.pair(&b1, &dv).unwrap();
            let phi = w.phi_k(k).unwrap();
            let rhs = lap.add(&grad).add(&bdv).add(&phi);
            let res = f.sub(&rhs).max_abs();
            assert!(res <= 1e-9, "k={k}: decomposition residual {res:.3e}");
        }
    }

    #[test]
    fn f_at_zero_is_phi_and_constant_shift() {
        let shape = shape_x3(32);
        let w = torus_like_metric(&shape);
        let phi = w.phi_k(1).unwrap();
        let zero = GridFunction::zeros(&shape);
        let f0 = w.nonlinear_f(1, &zero).unwrap();
        assert!(f0.sub(&phi).max_abs() <= 1e-10);
        let c = GridFunction::constant_re(&shape, 0.7);
        let fc = w.nonlinear_f(1, &c).unwrap();
        assert!(fc.sub(&phi).max_abs() <= 1e-10);
    }

    #[test]
    fn classify_flat_and_torus() {
        let shape = shape_x3(32);
        let flat = flat_metric(&shape);
        let rep = flat.classify(1e-10).unwrap();
        assert!(rep.is_kahler && rep.is_balanced && rep.is_gauduchon && rep.is_pluriclosed);
        assert!(rep.k_gauduchon_residuals.iter().all(|&r| r <= 1e-10));

        let w = torus_like_metric(&shape);
        let rep = w.classify(1e-10).unwrap();
        assert!(!rep.is_kahler);
        assert!(rep.k_gauduchon_residuals[0] > 1e-3);
        // (n−1)-Gauduchon residual is sup|∂∂̄ω^{n−1}| by definition
        let n = 3;
        let direct = w
            .form()
            .power(n - 1)
            .unwrap()
            .delbar()
            .unwrap()
            .del()
            .unwrap()
            .sup_norm();
        let via = rep.k_gauduchon_residuals[n - 2];
        assert!((direct - via).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn integral_criterion_flat_is_zero() {
        let shape = shape_x3(8);
        let w = flat_metric_form::<f64>(&shape);
        let v = integral_criterion(&w, 1).unwrap();
        assert!(v.abs() <= 1e-12);
    }

    #[test]
    fn streamed_integral_matches_form_path() {
        let shape = shape_x3(32);
        let w = torus_like_metric(&shape);
        let a = w.form().power(1).unwrap();
        let b = w.form().power(1).unwrap();
        let streamed = integral_del_delbar_wedge(&a, &b).unwrap();
        let form_path = a
            .delbar()
            .unwrap()
            .del()
            .unwrap()
            .scale(Complex::new(0.0, 0.5))
            .wedge(&b)
            .unwrap()
            .integrate_top()
            .unwrap();
        assert!((streamed - form_path.re).abs() <= 1e-10 * streamed.abs().max(1.0));
        assert!(form_path.im.abs() <= 1e-10);
    }

    #[test]
    fn volume_floor_invariant() {
        let shape = shape_x3(16);
        let w = torus_like_metric(&shape);
        let n = 3;
        let floor = w.eigen_floor();
        let dv = flat_volume_form::<f64>(&shape);
        let density = w.volume_form().ratio_to_volume(&dv).unwrap();
        // det(g) ≥ floorⁿ and ωⁿ = n! det(g) dV
        let bound = floor.powi(n) * 6.0;
        assert!(density.min_re() >= bound * (1.0 - 1e-12));
    }
}
