//! Periodic scalar fields on the real torus `T^{2n}` with spectral
//! differentiation and exact-for-periodic quadrature.
//!
//! Coordinates are ordered `(x_1, y_1, ..., x_n, y_n)` with `z_j = x_j + i y_j`,
//! period `2π` in every real dimension. A dimension of size 1 denotes data that
//! is constant along that direction; derivatives along it vanish identically.

use crate::scalar::Real;
use crate::{Error, Result};
use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Shape of a uniform periodic grid over `T^{2n}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    n: usize,
    sizes: Vec<usize>,
}

impl GridShape {
    /// `sizes` must have exactly `2n` entries, each ≥ 1.
    pub fn new(n: usize, sizes: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("complex dimension n must be >= 1".into()));
        }
        if sizes.len() != 2 * n {
            return Err(Error::Argument(format!(
                "expected {} grid sizes, got {}",
                2 * n,
                sizes.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::Argument("grid sizes must be >= 1".into()));
        }
        Ok(Self { n, sizes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_points(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Total real volume `(2π)^{2n}` of the torus.
    pub fn volume<R: Real>(&self) -> R {
        let mut v = R::one();
        for _ in 0..2 * self.n {
            v = v * R::TAU;
        }
        v
    }

    /// Row-major stride of dimension `dim` (last dimension varies fastest).
    fn stride(&self, dim: usize) -> usize {
        self.sizes[dim + 1..].iter().product()
    }

    /// Coordinates of the grid point with row-major linear index `idx`.
    pub fn coords<R: Real>(&self, mut idx: usize) -> Vec<R> {
        let mut out = vec![R::zero(); 2 * self.n];
        for dim in (0..2 * self.n).rev() {
            let s = self.sizes[dim];
            let m = idx % s;
            idx /= s;
            out[dim] = R::TAU * R::of(m as f64) / R::of(s as f64);
        }
        out
    }
}

/// A complex scalar field sampled on a [`GridShape`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<R: Real> {
    shape: GridShape,
    values: Vec<Complex<R>>,
}

/// JSON wire format: `{"n":…,"sizes":[…],"re":[…],"im":[…]}`.
#[derive(Serialize, Deserialize)]
pub struct GridFunctionJson {
    pub n: usize,
    pub sizes: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl<R: Real> GridFunction<R> {
    pub fn new(shape: GridShape, values: Vec<Complex<R>>) -> Result<Self> {
        if values.len() != shape.num_points() {
            return Err(Error::Argument(format!(
                "value count {} does not match grid point count {}",
                values.len(),
                shape.num_points()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: &GridShape) -> Self {
        Self {
            values: vec![Complex::zero(); shape.num_points()],
            shape: shape.clone(),
        }
    }

    pub fn constant(shape: &GridShape, c: Complex<R>) -> Self {
        Self {
            values: vec![c; shape.num_points()],
            shape: shape.clone(),
        }
    }

    pub fn constant_re(shape: &GridShape, c: R) -> Self {
        Self::constant(shape, Complex::new(c, R::zero()))
    }

    /// Sample `f(x_1, y_1, ..., x_n, y_n)` at every grid node.
    pub fn from_fn(shape: &GridShape, f: impl Fn(&[R]) -> Complex<R> + Sync) -> Self {
        let values: Vec<_> = (0..shape.num_points())
            .into_par_iter()
            .map(|idx| f(&shape.coords::<R>(idx)))
            .collect();
        Self {
            shape: shape.clone(),
            values,
        }
    }

    /// Real-valued sampling helper.
    pub fn from_fn_re(shape: &GridShape, f: impl Fn(&[R]) -> R + Sync) -> Self {
        Self::from_fn(shape, |x| Complex::new(f(x), R::zero()))
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn values(&self) -> &[Complex<R>] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(Complex<R>) -> Complex<R> + Sync) -> Self {
        Self {
            shape: self.shape.clone(),
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(Complex<R>, Complex<R>) -> Complex<R> + Sync) -> Self {
        assert_eq!(self.shape, other.shape, "grid shape mismatch");
        Self {
            shape: self.shape.clone(),
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    /// Pointwise quotient; errors on any |denominator| ≤ `floor`, reporting the
    /// offending grid point.
    pub fn div_checked(&self, other: &Self, floor: R) -> Result<Self> {
        assert_eq!(self.shape, other.shape, "grid shape mismatch");
        if let Some(idx) = other.values.iter().position(|v| v.norm() <= floor) {
            let coords: Vec<f64> = self.shape.coords::<R>(idx).iter().map(|c| c.as_f64()).collect();
            return Err(Error::SingularVolume { index: idx, coords });
        }
        Ok(self.zip(other, |a, b| a / b))
    }

    pub fn scale(&self, c: Complex<R>) -> Self {
        self.map(|v| v * c)
    }

    pub fn scale_re(&self, c: R) -> Self {
        self.scale(Complex::new(c, R::zero()))
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// Pointwise `exp`.
    pub fn exp(&self) -> Self {
        self.map(|v| v.exp())
    }

    pub fn max_abs(&self) -> R {
        self.values
            .iter()
            .map(|v| v.norm())
            .fold(R::zero(), |a, b| a.max(b))
    }

    pub fn max_imag_abs(&self) -> R {
        self.values
            .iter()
            .map(|v| v.im.abs())
            .fold(R::zero(), |a, b| a.max(b))
    }

    pub fn min_re(&self) -> R {
        self.values
            .iter()
            .map(|v| v.re)
            .fold(R::infinity(), |a, b| a.min(b))
    }

    pub fn max_re(&self) -> R {
        self.values
            .iter()
            .map(|v| v.re)
            .fold(R::neg_infinity(), |a, b| a.max(b))
    }

    /// Drops the imaginary part, asserting it is below `tol` in sup norm.
    pub fn into_real(&self, tol: R) -> Result<Self> {
        let imag = self.max_imag_abs();
        if imag > tol {
            return Err(Error::NotReal {
                imag: imag.as_f64(),
                tol: tol.as_f64(),
            });
        }
        Ok(self.map(|v| Complex::new(v.re, R::zero())))
    }

    /// Mean of the samples.
    pub fn mean(&self) -> Complex<R> {
        let n = R::of(self.values.len() as f64);
        self.values.iter().fold(Complex::zero(), |a, &b| a + b) / n
    }

    /// Uniform quadrature: mean of samples times `(2π)^{2n}`. Exact for
    /// trigonometric polynomials below the Nyquist limit.
    pub fn integrate(&self) -> Complex<R> {
        self.mean() * self.shape.volume::<R>()
    }

    /// Spectral (Fourier) derivative along real dimension `dim`.
    ///
    /// Size-1 dimensions are translation invariant: the derivative is zero.
    /// For even sizes the Nyquist mode of the derivative is set to zero.
    pub fn derivative(&self, dim: usize) -> Result<Self> {
        if dim >= 2 * self.shape.n {
            return Err(Error::Argument(format!(
                "dimension {} out of range 0..{}",
                dim,
                2 * self.shape.n
            )));
        }
        let len = self.shape.sizes[dim];
        if len == 1 {
            return Ok(Self::zeros(&self.shape));
        }
        let mut out = self.clone();
        let mut symbol = vec![Complex::zero(); len];
        for (m, s) in symbol.iter_mut().enumerate() {
            let k = if 2 * m < len {
                m as isize
            } else if 2 * m == len {
                0 // Nyquist mode of the derivative
            } else {
                m as isize - len as isize
            };
            *s = Complex::new(R::zero(), R::of(k as f64));
        }
        apply_along_dim(&mut out.values, &self.shape, dim, &symbol);
        Ok(out)
    }

    /// `∂/∂z_j` (`conjugate = false`) or `∂/∂z̄_j` (`conjugate = true`),
    /// i.e. `½(∂_{x_j} ∓ i ∂_{y_j})`, with `j` zero-based in `0..n`.
    pub fn holomorphic_derivative(&self, j: usize, conjugate: bool) -> Result<Self> {
        if j >= self.shape.n {
            return Err(Error::Argument(format!(
                "holomorphic index {} out of range 0..{}",
                j, self.shape.n
            )));
        }
        let dx = self.derivative(2 * j)?;
        let dy = self.derivative(2 * j + 1)?;
        let half = R::of(0.5);
        let i = Complex::new(R::zero(), R::one());
        let sign = if conjugate { R::one() } else { -R::one() };
        Ok(dx.zip(&dy, |a, b| (a + i * b * sign) * half))
    }

    /// Multiply each Fourier mode by `sym(modes)`, where `modes[d]` is the
    /// signed integer frequency along real dimension `d` (0 for size-1
    /// dimensions, `+len/2` at the Nyquist mode).
    pub fn fourier_multiply(&self, sym: impl Fn(&[i64]) -> Complex<R> + Sync) -> Self {
        let mut vals = self.values.clone();
        let dims = 2 * self.shape.n;
        for dim in 0..dims {
            transform_along_dim(&mut vals, &self.shape, dim, false);
        }
        let norm = R::one() / R::of(self.shape.num_points() as f64);
        let strides: Vec<usize> = (0..dims).map(|d| self.shape.stride(d)).collect();
        vals.par_iter_mut().enumerate().for_each(|(p, v)| {
            let mut modes = vec![0i64; dims];
            for d in 0..dims {
                let len = self.shape.sizes[d];
                let m = (p / strides[d]) % len;
                modes[d] = if 2 * m <= len {
                    m as i64
                } else {
                    m as i64 - len as i64
                };
            }
            *v = *v * sym(&modes) * norm;
        });
        for dim in 0..dims {
            transform_along_dim(&mut vals, &self.shape, dim, true);
        }
        Self {
            shape: self.shape.clone(),
            values: vals,
        }
    }

    /// Spectrally resample onto `new_sizes` (zero-pad or truncate modes).
    pub fn resample(&self, new_sizes: &[usize]) -> Result<Self> {
        let new_shape = GridShape::new(self.shape.n, new_sizes.to_vec())?;
        let mut cur = self.clone();
        for (dim, &size) in new_sizes.iter().enumerate() {
            if cur.shape.sizes[dim] != size {
                cur = cur.resample_dim(dim, size)?;
            }
        }
        debug_assert_eq!(cur.shape, new_shape);
        Ok(cur)
    }

    fn resample_dim(&self, dim: usize, new_len: usize) -> Result<Self> {
        let old_len = self.shape.sizes[dim];
        let mut sizes = self.shape.sizes.clone();
        sizes[dim] = new_len;
        let out_shape = GridShape::new(self.shape.n, sizes)?;
        if old_len == 1 {
            // constant along dim: replicate
            let mut out = GridFunction::zeros(&out_shape);
            let inner = out_shape.stride(dim);
            let outer = out_shape.num_points() / (new_len * inner);
            for o in 0..outer {
                for m in 0..new_len {
                    for i in 0..inner {
                        out.values[(o * new_len + m) * inner + i] = self.values[o * inner + i];
                    }
                }
            }
            return Ok(out);
        }

        let mut planner = FftPlanner::<R>::new();
        let fwd = planner.plan_fft_forward(old_len);
        let inv = planner.plan_fft_inverse(new_len);
        let inner = self.shape.stride(dim);
        let outer = self.shape.num_points() / (old_len * inner);
        let mut out = GridFunction::zeros(&out_shape);
        let norm = R::one() / R::of(old_len as f64);
        let keep = old_len.min(new_len);
        let pos = keep / 2 + keep % 2; // number of non-negative modes kept
        let neg = keep / 2; // number of negative modes kept
        let mut line = vec![Complex::zero(); old_len];
        let mut nline = vec![Complex::zero(); new_len];
        for o in 0..outer {
            for i in 0..inner {
                for (m, l) in line.iter_mut().enumerate() {
                    *l = self.values[(o * old_len + m) * inner + i];
                }
                fwd.process(&mut line);
                nline.iter_mut().for_each(|v| *v = Complex::zero());
                for m in 0..pos {
                    nline[m] = line[m] * norm;
                }
                for m in 1..=neg {
                    nline[new_len - m] = line[old_len - m] * norm;
                }
                inv.process(&mut nline);
                for (m, l) in nline.iter().enumerate() {
                    out.values[(o * new_len + m) * inner + i] = *l;
                }
            }
        }
        Ok(out)
    }

    /// Product with 3/2-rule dealiasing: both operands are padded to 3/2 the
    /// resolution along every active dimension, multiplied pointwise, and the
    /// result truncated back.
    pub fn mul_dealiased(&self, other: &Self) -> Result<Self> {
        assert_eq!(self.shape, other.shape, "grid shape mismatch");
        let padded: Vec<usize> = self
            .shape
            .sizes
            .iter()
            .map(|&s| if s == 1 { 1 } else { (3 * s).div_ceil(2) })
            .collect();
        let a = self.resample(&padded)?;
        let b = other.resample(&padded)?;
        a.mul(&b).resample(self.shape.sizes())
    }

    pub fn to_json(&self) -> GridFunctionJson {
        GridFunctionJson {
            n: self.shape.n,
            sizes: self.shape.sizes.clone(),
            re: self.values.iter().map(|v| v.re.as_f64()).collect(),
            im: self.values.iter().map(|v| v.im.as_f64()).collect(),
        }
    }

    pub fn from_json(j: &GridFunctionJson) -> Result<Self> {
        let shape = GridShape::new(j.n, j.sizes.clone())?;
        if j.re.len() != shape.num_points() || j.im.len() != shape.num_points() {
            return Err(Error::Argument("re/im length does not match grid".into()));
        }
        let values = j
            .re
            .iter()
            .zip(j.im.iter())
            .map(|(&re, &im)| Complex::new(R::of(re), R::of(im)))
            .collect();
        GridFunction::new(shape, values)
    }
}

/// Multiply the Fourier transform along `dim` by `symbol` (inverse-normalized).
fn transform_along_dim<R: Real>(
    values: &mut [Complex<R>],
    shape: &GridShape,
    dim: usize,
    inverse: bool,
) {
    let len = shape.sizes[dim];
    if len == 1 {
        return;
    }
    let inner = shape.stride(dim);
    let mut planner = FftPlanner::<R>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    };
    values.par_chunks_mut(len * inner).for_each(|chunk| {
        let mut line = vec![Complex::zero(); len];
        for i in 0..inner {
            for m in 0..len {
                line[m] = chunk[m * inner + i];
            }
            fft.process(&mut line);
            for m in 0..len {
                chunk[m * inner + i] = line[m];
            }
        }
    });
}

fn apply_along_dim<R: Real>(
    values: &mut [Complex<R>],
    shape: &GridShape,
    dim: usize,
    symbol: &[Complex<R>],
) {
    let len = shape.sizes[dim];
    let inner = shape.stride(dim);
    let outer = values.len() / (len * inner);
    let mut planner = FftPlanner::<R>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let norm = R::one() / R::of(len as f64);
    let scaled: Vec<Complex<R>> = symbol.iter().map(|&s| s * norm).collect();
    let fwd = Arc::clone(&fwd);
    let inv = Arc::clone(&inv);

    // one contiguous block per `outer` slice; lines are strided by `inner`
    values
        .par_chunks_mut(len * inner)
        .for_each(|chunk| {
            let mut line = vec![Complex::zero(); len];
            for i in 0..inner {
                for m in 0..len {
                    line[m] = chunk[m * inner + i];
                }
                fwd.process(&mut line);
                for (l, s) in line.iter_mut().zip(scaled.iter()) {
                    *l = *l * *s;
                }
                inv.process(&mut line);
                for m in 0..len {
                    chunk[m * inner + i] = line[m];
                }
            }
            let _ = outer;
        });
}
