//! Complex exterior algebra of (p,q)-forms with [`GridFunction`] coefficients.
//!
//! A monomial is `dz_I ∧ dz̄_J` with `I` entirely before `J`, both strictly
//! increasing. All reorderings route through [`merge_indices`], the single
//! parity routine. The `(i/2)` weights of the paper's conventions live inside
//! coefficient values, never in the monomial basis.

use crate::grid::{GridFunction, GridFunctionJson, GridShape};
use crate::scalar::Real;
use crate::{Error, Result};
use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Strictly increasing multi-index with entries in `0..n`.
pub type MultiIndex = Vec<u8>;

/// Coefficients below this sup-norm are pruned after arithmetic.
const PRUNE_THRESHOLD: f64 = 1e-15;

/// Merge two strictly increasing index lists, counting the transpositions
/// needed to sort the concatenation `a ++ b`. Returns `None` on a repeated
/// index (the wedge vanishes).
pub fn merge_indices(a: &[u8], b: &[u8]) -> Option<(MultiIndex, i32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut crossings = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            // b[j] moves past the remaining entries of a
            crossings += a.len() - i;
            out.push(b[j]);
            j += 1;
        } else {
            return None;
        }
    }
    let sign = if crossings.is_multiple_of(2) { 1 } else { -1 };
    Some((out, sign))
}

/// A (p,q)-form with sparse grid-function coefficients.
#[derive(Clone, Debug)]
pub struct Form<R: Real> {
    shape: GridShape,
    p: usize,
    q: usize,
    coeffs: BTreeMap<(MultiIndex, MultiIndex), GridFunction<R>>,
}

/// JSON wire format for a form.
#[derive(Serialize, Deserialize)]
pub struct FormJson {
    pub p: usize,
    pub q: usize,
    pub terms: Vec<FormTermJson>,
}

#[derive(Serialize, Deserialize)]
pub struct FormTermJson {
    #[serde(rename = "I")]
    pub i: Vec<u8>,
    #[serde(rename = "J")]
    pub j: Vec<u8>,
    pub coeff: GridFunctionJson,
}

impl<R: Real> Form<R> {
    pub fn zero(shape: &GridShape, p: usize, q: usize) -> Self {
        Self {
            shape: shape.clone(),
            p,
            q,
            coeffs: BTreeMap::new(),
        }
    }

    /// The scalar `u` as a (0,0)-form.
    pub fn from_scalar(u: GridFunction<R>) -> Self {
        let shape = u.shape().clone();
        let mut coeffs = BTreeMap::new();
        coeffs.insert((vec![], vec![]), u);
        Self {
            shape,
            p: 0,
            q: 0,
            coeffs,
        }
    }

    /// The unit (0,0)-form.
    pub fn unit(shape: &GridShape) -> Self {
        Self::from_scalar(GridFunction::constant_re(shape, R::one()))
    }

    /// Constant basis 1-form `dz_j` (or `dz̄_j`).
    pub fn basis(shape: &GridShape, j: u8, conjugate: bool) -> Self {
        let mut f = if conjugate {
            Self::zero(shape, 0, 1)
        } else {
            Self::zero(shape, 1, 0)
        };
        let key = if conjugate {
            (vec![], vec![j])
        } else {
            (vec![j], vec![])
        };
        f.coeffs.insert(key, GridFunction::constant_re(shape, R::one()));
        f
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn degree(&self) -> usize {
        self.p + self.q
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(MultiIndex, MultiIndex), &GridFunction<R>)> {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, i: &[u8], j: &[u8]) -> Option<&GridFunction<R>> {
        self.coeffs.get(&(i.to_vec(), j.to_vec()))
    }

    /// Add `c · dz_I ∧ dz̄_J`; indices must be strictly increasing.
    pub fn add_term(&mut self, i: MultiIndex, j: MultiIndex, c: GridFunction<R>) -> Result<()> {
        let n = self.shape.n() as u8;
        let ok = |idx: &[u8]| idx.windows(2).all(|w| w[0] < w[1]) && idx.iter().all(|&v| v < n);
        if !ok(&i) || !ok(&j) || i.len() != self.p || j.len() != self.q {
            return Err(Error::Argument(format!(
                "invalid multi-index ({i:?},{j:?}) for a ({},{})-form",
                self.p, self.q
            )));
        }
        if c.shape() != &self.shape {
            return Err(Error::ShapeMismatch("coefficient grid".into()));
        }
        self.accumulate((i, j), c, 1);
        Ok(())
    }

    fn accumulate(&mut self, key: (MultiIndex, MultiIndex), c: GridFunction<R>, sign: i32) {
        let c = if sign >= 0 { c } else { c.neg() };
        match self.coeffs.get_mut(&key) {
            Some(existing) => *existing = existing.add(&c),
            None => {
                self.coeffs.insert(key, c);
            }
        }
    }

    fn prune(mut self) -> Self {
        let tol = R::of(PRUNE_THRESHOLD);
        self.coeffs.retain(|_, c| c.max_abs() > tol);
        self
    }

    /// Sup norm over all stored coefficients.
    pub fn sup_norm(&self) -> R {
        self.coeffs
            .values()
            .map(|c| c.max_abs())
            .fold(R::zero(), |a, b| a.max(b))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape || (self.p, self.q) != (other.p, other.q) {
            return Err(Error::ShapeMismatch("form addition".into()));
        }
        let mut out = self.clone();
        for (key, c) in &other.coeffs {
            out.accumulate(key.clone(), c.clone(), 1);
        }
        Ok(out.prune())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex::new(-R::one(), R::zero())))
    }

    pub fn scale(&self, c: Complex<R>) -> Self {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = v.scale(c);
        }
        out.prune()
    }

    pub fn scale_re(&self, c: R) -> Self {
        self.scale(Complex::new(c, R::zero()))
    }

    /// Multiply every coefficient pointwise by the scalar field `u`.
    pub fn scale_fn(&self, u: &GridFunction<R>) -> Self {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = v.mul(u);
        }
        out.prune()
    }

    /// Complex conjugate: maps a (p,q)-form to a (q,p)-form.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero(&self.shape, self.q, self.p);
        let flip = if (self.p * self.q).is_multiple_of(2) { 1 } else { -1 };
        for ((i, j), c) in &self.coeffs {
            out.accumulate((j.clone(), i.clone()), c.conj(), flip);
        }
        out
    }

    /// Wedge product; graded-commutative with permutation-parity signs.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch("wedge operands".into()));
        }
        let n = self.shape.n();
        let (p, q) = (self.p + other.p, self.q + other.q);
        let mut out = Self::zero(&self.shape, p, q);
        if p > n || q > n {
            return Ok(out); // forced zero form
        }
        for ((ia, ja), ca) in &self.coeffs {
            for ((ib, jb), cb) in &other.coeffs {
                let Some((i, si)) = merge_indices(ia, ib) else {
                    continue;
                };
                let Some((j, sj)) = merge_indices(ja, jb) else {
                    continue;
                };
                // move dz_{I_b} (p_b letters) past dz̄_{J_a} (q_a letters)
                let cross = if (ib.len() * ja.len()) % 2 == 0 { 1 } else { -1 };
                out.accumulate((i, j), ca.mul(cb), si * sj * cross);
            }
        }
        Ok(out.prune())
    }

    /// k-fold wedge power of a form; `k = 0` is the unit (0,0)-form.
    pub fn power(&self, k: usize) -> Result<Self> {
        let mut out = Self::unit(&self.shape);
        for _ in 0..k {
            out = out.wedge(self)?;
        }
        Ok(out)
    }

    /// Dolbeault operator `∂`: bidegree `(p+1, q)`.
    pub fn del(&self) -> Result<Self> {
        self.dolbeault(false)
    }

    /// Dolbeault operator `∂̄`: bidegree `(p, q+1)`.
    pub fn delbar(&self) -> Result<Self> {
        self.dolbeault(true)
    }

    fn dolbeault(&self, conjugate: bool) -> Result<Self> {
        let n = self.shape.n();
        let (p, q) = if conjugate {
            (self.p, self.q + 1)
        } else {
            (self.p + 1, self.q)
        };
        let mut out = Self::zero(&self.shape, p, q);
        if p > n || q > n {
            return Ok(out);
        }
        for ((i, j), c) in &self.coeffs {
            for d in 0..n as u8 {
                let skip = if conjugate { j.contains(&d) } else { i.contains(&d) };
                if skip {
                    continue;
                }
                let dc = c.holomorphic_derivative(d as usize, conjugate)?;
                if conjugate {
                    // dz̄_d ∧ dz_I ∧ dz̄_J: past the p dz's, then into J
                    let (jj, sj) = merge_indices(&[d], j).expect("d not in J");
                    let sp = if self.p.is_multiple_of(2) { 1 } else { -1 };
                    out.accumulate((i.clone(), jj), dc, sj * sp);
                } else {
                    let (ii, si) = merge_indices(&[d], i).expect("d not in I");
                    out.accumulate((ii, j.clone()), dc, si);
                }
            }
        }
        Ok(out.prune())
    }

    /// Pointwise quotient of the top coefficients of two (n,n)-forms.
    pub fn ratio_to_volume(&self, vol: &Self) -> Result<GridFunction<R>> {
        let n = self.shape.n();
        if (self.p, self.q) != (n, n) || (vol.p, vol.q) != (n, n) {
            return Err(Error::Argument("ratio_to_volume needs (n,n)-forms".into()));
        }
        if self.shape != vol.shape {
            return Err(Error::ShapeMismatch("ratio_to_volume operands".into()));
        }
        let top: MultiIndex = (0..n as u8).collect();
        let key = (top.clone(), top);
        let denom = vol
            .coeffs
            .get(&key)
            .ok_or_else(|| Error::SingularVolume { index: 0, coords: vec![] })?;
        let numer = match self.coeffs.get(&key) {
            Some(c) => c.clone(),
            None => GridFunction::zeros(&self.shape),
        };
        numer.div_checked(denom, R::of(1e-14))
    }

    /// Integral over the torus of an (n,n)-form.
    ///
    /// The canonical monomial `dz_1∧…∧dz_n∧dz̄_1∧…∧dz̄_n` equals
    /// `(−1)^{n(n−1)/2} (−2i)^n dx_1∧dy_1∧…∧dx_n∧dy_n`.
    pub fn integrate_top(&self) -> Result<Complex<R>> {
        let n = self.shape.n();
        if (self.p, self.q) != (n, n) {
            return Err(Error::Argument("integrate_top needs an (n,n)-form".into()));
        }
        let top: MultiIndex = (0..n as u8).collect();
        match self.coeffs.get(&(top.clone(), top)) {
            Some(c) => Ok(c.integrate() * top_monomial_factor::<R>(n)),
            None => Ok(Complex::zero()),
        }
    }

    pub fn to_json(&self) -> FormJson {
        FormJson {
            p: self.p,
            q: self.q,
            terms: self
                .coeffs
                .iter()
                .map(|((i, j), c)| FormTermJson {
                    i: i.clone(),
                    j: j.clone(),
                    coeff: c.to_json(),
                })
                .collect(),
        }
    }

    pub fn from_json(shape: &GridShape, j: &FormJson) -> Result<Self> {
        let mut out = Self::zero(shape, j.p, j.q);
        for t in &j.terms {
            let c = GridFunction::from_json(&t.coeff)?;
            out.add_term(t.i.clone(), t.j.clone(), c)?;
        }
        Ok(out)
    }
}

/// Value of `dz_1∧…∧dz_n∧dz̄_1∧…∧dz̄_n` against the real volume element.
pub fn top_monomial_factor<R: Real>(n: usize) -> Complex<R> {
    let mut f = Complex::new(R::one(), R::zero());
    for _ in 0..n {
        f = f * Complex::new(R::zero(), -R::of(2.0));
    }
    if (n * (n - 1) / 2) % 2 == 1 {
        f = -f;
    }
    f
}

/// The flat volume form `dV = (i/2)^n dz_1∧dz̄_1∧…∧dz_n∧dz̄_n` as an
/// (n,n)-form (so that `∫ dV = (2π)^{2n}`).
pub fn flat_volume_form<R: Real>(shape: &GridShape) -> Form<R> {
    let n = shape.n();
    let mut c = Complex::new(R::one(), R::zero());
    for _ in 0..n {
        c = c * Complex::new(R::zero(), R::of(0.5));
    }
    if (n * (n - 1) / 2) % 2 == 1 {
        c = -c;
    }
    let top: MultiIndex = (0..n as u8).collect();
    let mut f = Form::zero(shape, n, n);
    f.add_term(top.clone(), top, GridFunction::constant(shape, c))
        .expect("top monomial");
    f
}

/// The flat metric form `(i/2) Σ dz_j∧dz̄_j`.
pub fn flat_metric_form<R: Real>(shape: &GridShape) -> Form<R> {
    let n = shape.n();
    let mut f = Form::zero(shape, 1, 1);
    let half_i = Complex::new(R::zero(), R::of(0.5));
    for j in 0..n as u8 {
        f.add_term(vec![j], vec![j], GridFunction::constant(shape, half_i))
            .expect("diagonal term");
    }
    f
}
