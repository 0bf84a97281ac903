//! Exact constant-coefficient exterior algebra over an invariant coframe.
//!
//! Generators are named (1,0)-forms (conjugates implicit) plus optional
//! formal closed real (1,1) generators with declared nilpotency orders.
//! Structure equations for `∂` and `∂̄` are supplied per generator; the
//! conjugate equations are always derived from `∂̄(ḡ) = conj(∂g)`, never
//! entered by hand. All coefficients are exact Gaussian rationals.

use crate::{Error, Result};
use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Exact Gaussian-rational scalar.
pub type Exact = Complex<BigRational>;

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Real rational as an [`Exact`] scalar.
pub fn exact(num: i64, den: i64) -> Exact {
    Complex::new(rat(num, den), BigRational::zero())
}

/// Imaginary rational `(num/den)·i` as an [`Exact`] scalar.
pub fn exact_i(num: i64, den: i64) -> Exact {
    Complex::new(BigRational::zero(), rat(num, den))
}

/// A degree-1 generator letter: a named (1,0)-form or its conjugate.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum OddLetter {
    Holo(u8),
    Anti(u8),
}

/// A wedge monomial: strictly increasing odd letters times powers of the
/// formal even generators.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Monomial {
    pub odd: Vec<OddLetter>,
    pub even: Vec<u32>,
}

/// A form with exact coefficients over wedge monomials.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct CoframeForm {
    coeffs: BTreeMap<Monomial, Exact>,
}

impl CoframeForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Exact)> {
        self.coeffs.iter()
    }

    fn accumulate(&mut self, m: Monomial, c: Exact) {
        let entry = self.coeffs.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.coeffs {
            out.accumulate(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&exact(-1, 1)))
    }

    pub fn scale(&self, c: &Exact) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|(m, v)| (m.clone(), v.clone() * c.clone()))
                .collect(),
        }
    }

    /// Complex conjugate: swaps each letter with its conjugate and
    /// conjugates coefficients; formal even generators are real.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.coeffs {
            let mut letters: Vec<OddLetter> = m
                .odd
                .iter()
                .map(|l| match l {
                    OddLetter::Holo(i) => OddLetter::Anti(*i),
                    OddLetter::Anti(i) => OddLetter::Holo(*i),
                })
                .collect();
            let sign = sort_count_sign(&mut letters);
            let mono = Monomial {
                odd: letters,
                even: m.even.clone(),
            };
            out.accumulate(mono, apply_sign(c.conj(), sign));
        }
        out
    }

    /// `(p, q)` if homogeneous, else `None`. Zero forms report `(0, 0)`.
    pub fn bidegree(&self) -> Option<(usize, usize)> {
        let mut deg = None;
        for m in self.coeffs.keys() {
            let e: usize = m.even.iter().map(|&x| x as usize).sum();
            let p = m.odd.iter().filter(|l| matches!(l, OddLetter::Holo(_))).count() + e;
            let q = m.odd.iter().filter(|l| matches!(l, OddLetter::Anti(_))).count() + e;
            match deg {
                None => deg = Some((p, q)),
                Some(d) if d != (p, q) => return None,
                _ => {}
            }
        }
        Some(deg.unwrap_or((0, 0)))
    }
}

fn apply_sign(c: Exact, sign: i32) -> Exact {
    if sign >= 0 { c } else { -c }
}

/// Sort letters in place, returning the permutation sign; repeated letters
/// yield sign 0 in callers that check (here input letters are distinct).
fn sort_count_sign(letters: &mut [OddLetter]) -> i32 {
    let mut sign = 1;
    for i in 1..letters.len() {
        let mut j = i;
        while j > 0 && letters[j - 1] > letters[j] {
            letters.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    sign
}

/// Merge two strictly increasing letter lists; `None` on a repeat.
fn merge_odd(a: &[OddLetter], b: &[OddLetter]) -> Option<(Vec<OddLetter>, i32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut crossings = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            return None;
        }
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            crossings += a.len() - i;
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some((out, if crossings.is_multiple_of(2) { 1 } else { -1 }))
}

/// A formal closed real (1,1) generator with `name^order = 0`.
#[derive(Clone, Debug)]
pub struct FormalGenerator {
    pub name: String,
    pub nilpotency: u32,
}

/// The coframe algebra: named (1,0) generators, formal even generators, and
/// the `∂`/`∂̄` structure tables.
#[derive(Clone, Debug)]
pub struct CoframeAlgebra {
    odd_names: Vec<String>,
    formal: Vec<FormalGenerator>,
    del_table: Vec<CoframeForm>,
    delbar_table: Vec<CoframeForm>,
}

/// Per-generator integrability residuals; all lists must be empty.
#[derive(Clone, Debug)]
pub struct IntegrabilityReport {
    pub entries: Vec<GeneratorCheck>,
}

#[derive(Clone, Debug)]
pub struct GeneratorCheck {
    pub name: String,
    pub del_squared: Vec<String>,
    pub delbar_squared: Vec<String>,
    pub anticommutator: Vec<String>,
}

impl GeneratorCheck {
    pub fn is_clean(&self) -> bool {
        self.del_squared.is_empty()
            && self.delbar_squared.is_empty()
            && self.anticommutator.is_empty()
    }
}

impl CoframeAlgebra {
    /// Fresh algebra with all generators closed.
    pub fn new(odd_names: Vec<String>, formal: Vec<FormalGenerator>) -> Result<Self> {
        if odd_names.len() > u8::MAX as usize {
            return Err(Error::Argument("too many generators".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for n in odd_names.iter().chain(formal.iter().map(|f| &f.name)) {
            if n.is_empty() || !seen.insert(n.clone()) {
                return Err(Error::Argument(format!("bad or duplicate generator name `{n}`")));
            }
        }
        for f in &formal {
            if f.nilpotency == 0 {
                return Err(Error::Argument(format!(
                    "formal generator `{}` needs a positive nilpotency order",
                    f.name
                )));
            }
        }
        let zeros = vec![CoframeForm::zero(); odd_names.len()];
        Ok(Self {
            odd_names,
            formal,
            del_table: zeros.clone(),
            delbar_table: zeros,
        })
    }

    pub fn odd_names(&self) -> &[String] {
        &self.odd_names
    }

    pub fn formal_generators(&self) -> &[FormalGenerator] {
        &self.formal
    }

    /// Complex dimension represented: one per (1,0) generator plus
    /// `order − 1` per formal (1,1) generator.
    pub fn complex_dim(&self) -> usize {
        self.odd_names.len()
            + self
                .formal
                .iter()
                .map(|f| f.nilpotency as usize - 1)
                .sum::<usize>()
    }

    fn odd_index(&self, name: &str) -> Option<u8> {
        self.odd_names.iter().position(|n| n == name).map(|i| i as u8)
    }

    fn formal_index(&self, name: &str) -> Option<usize> {
        self.formal.iter().position(|f| f.name == name)
    }

    pub fn set_del(&mut self, name: &str, f: CoframeForm) -> Result<()> {
        let i = self
            .odd_index(name)
            .ok_or_else(|| Error::Argument(format!("unknown generator `{name}`")))?;
        self.del_table[i as usize] = f;
        Ok(())
    }

    pub fn set_delbar(&mut self, name: &str, f: CoframeForm) -> Result<()> {
        let i = self
            .odd_index(name)
            .ok_or_else(|| Error::Argument(format!("unknown generator `{name}`")))?;
        self.delbar_table[i as usize] = f;
        Ok(())
    }

    /// The (1,0) generator `name` as a form.
    pub fn generator(&self, name: &str) -> Result<CoframeForm> {
        if let Some(i) = self.odd_index(name) {
            return Ok(self.letter_form(OddLetter::Holo(i)));
        }
        if let Some(i) = self.formal_index(name) {
            let mut even = vec![0u32; self.formal.len()];
            even[i] = 1;
            let mut f = CoframeForm::zero();
            f.accumulate(Monomial { odd: vec![], even }, exact(1, 1));
            return Ok(f);
        }
        Err(Error::Argument(format!("unknown generator `{name}`")))
    }

    /// Conjugate generator `namē` as a form.
    pub fn conjugate_generator(&self, name: &str) -> Result<CoframeForm> {
        Ok(self.generator(name)?.conj())
    }

    fn letter_form(&self, l: OddLetter) -> CoframeForm {
        let mut f = CoframeForm::zero();
        f.accumulate(
            Monomial {
                odd: vec![l],
                even: vec![0; self.formal.len()],
            },
            exact(1, 1),
        );
        f
    }

    fn wedge_monomial(&self, a: &Monomial, b: &Monomial) -> Option<(Monomial, i32)> {
        let (odd, sign) = merge_odd(&a.odd, &b.odd)?;
        let mut even = a.even.clone();
        for (k, e) in even.iter_mut().enumerate() {
            *e += b.even[k];
            if *e >= self.formal[k].nilpotency {
                return None;
            }
        }
        Some((Monomial { odd, even }, sign))
    }

    pub fn wedge(&self, a: &CoframeForm, b: &CoframeForm) -> CoframeForm {
        let mut out = CoframeForm::zero();
        for (ma, ca) in &a.coeffs {
            for (mb, cb) in &b.coeffs {
                if let Some((m, sign)) = self.wedge_monomial(ma, mb) {
                    out.accumulate(m, apply_sign(ca.clone() * cb.clone(), sign));
                }
            }
        }
        out
    }

    pub fn power(&self, f: &CoframeForm, k: usize) -> CoframeForm {
        let mut out = CoframeForm::zero();
        out.accumulate(
            Monomial {
                odd: vec![],
                even: vec![0; self.formal.len()],
            },
            exact(1, 1),
        );
        for _ in 0..k {
            out = self.wedge(&out, f);
        }
        out
    }

    fn letter_derivative(&self, l: OddLetter, conjugate: bool) -> CoframeForm {
        match (l, conjugate) {
            (OddLetter::Holo(i), false) => self.del_table[i as usize].clone(),
            (OddLetter::Holo(i), true) => self.delbar_table[i as usize].clone(),
            // derived: ∂(ḡ) = conj(∂̄g), ∂̄(ḡ) = conj(∂g)
            (OddLetter::Anti(i), false) => self.delbar_table[i as usize].conj(),
            (OddLetter::Anti(i), true) => self.del_table[i as usize].conj(),
        }
    }

    fn differentiate(&self, f: &CoframeForm, conjugate: bool) -> CoframeForm {
        let mut out = CoframeForm::zero();
        for (m, c) in &f.coeffs {
            // formal even generators are closed; only odd letters contribute
            for (pos, &l) in m.odd.iter().enumerate() {
                let d = self.letter_derivative(l, conjugate);
                if d.is_zero() {
                    continue;
                }
                let mut rest = m.clone();
                rest.odd.remove(pos);
                let sign = if pos % 2 == 0 { 1 } else { -1 };
                for (dm, dc) in &d.coeffs {
                    if let Some((mono, s2)) = self.wedge_monomial(dm, &rest) {
                        out.accumulate(mono, apply_sign(c.clone() * dc.clone(), sign * s2));
                    }
                }
            }
        }
        out
    }

    pub fn del(&self, f: &CoframeForm) -> CoframeForm {
        self.differentiate(f, false)
    }

    pub fn delbar(&self, f: &CoframeForm) -> CoframeForm {
        self.differentiate(f, true)
    }

    /// Render a form using generator names (for reports and errors).
    pub fn format_form(&self, f: &CoframeForm) -> String {
        if f.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (m, c)) in f.coeffs.iter().enumerate() {
            if i > 0 {
                out.push_str(" + ");
            }
            let _ = write!(out, "({})·{}", format_exact(c), self.format_monomial(m));
        }
        out
    }

    fn format_monomial(&self, m: &Monomial) -> String {
        let mut parts: Vec<String> = m
            .odd
            .iter()
            .map(|l| match l {
                OddLetter::Holo(i) => self.odd_names[*i as usize].clone(),
                OddLetter::Anti(i) => format!("~{}", self.odd_names[*i as usize]),
            })
            .collect();
        for (k, &e) in m.even.iter().enumerate() {
            match e {
                0 => {}
                1 => parts.push(self.formal[k].name.clone()),
                _ => parts.push(format!("{}^{}", self.formal[k].name, e)),
            }
        }
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("^")
        }
    }

    /// Check `∂² = ∂̄² = ∂∂̄ + ∂̄∂ = 0` on every generator and its conjugate.
    /// Errors (naming the first offending generator) if any residual is
    /// nonzero; the report lists the residual monomials per generator.
    pub fn verify_integrability(&self) -> Result<IntegrabilityReport> {
        let mut entries = Vec::new();
        let mut gens: Vec<(String, CoframeForm)> = Vec::new();
        for name in &self.odd_names {
            gens.push((name.clone(), self.generator(name)?));
            gens.push((format!("~{name}"), self.conjugate_generator(name)?));
        }
        for f in &self.formal {
            gens.push((f.name.clone(), self.generator(&f.name)?));
        }
        for (name, g) in gens {
            let monomials = |f: &CoframeForm| -> Vec<String> {
                f.terms().map(|(m, _)| self.format_monomial(m)).collect()
            };
            let del2 = self.del(&self.del(&g));
            let delbar2 = self.delbar(&self.delbar(&g));
            let anti = self.del(&self.delbar(&g)).add(&self.delbar(&self.del(&g)));
            entries.push(GeneratorCheck {
                name,
                del_squared: monomials(&del2),
                delbar_squared: monomials(&delbar2),
                anticommutator: monomials(&anti),
            });
        }
        if let Some(bad) = entries.iter().find(|e| !e.is_clean()) {
            let mut detail = Vec::new();
            if !bad.del_squared.is_empty() {
                detail.push(format!("del² residual [{}]", bad.del_squared.join(", ")));
            }
            if !bad.delbar_squared.is_empty() {
                detail.push(format!("delbar² residual [{}]", bad.delbar_squared.join(", ")));
            }
            if !bad.anticommutator.is_empty() {
                detail.push(format!(
                    "anticommutator residual [{}]",
                    bad.anticommutator.join(", ")
                ));
            }
            return Err(Error::Integrability {
                generator: bad.name.clone(),
                detail: detail.join("; "),
            });
        }
        Ok(IntegrabilityReport { entries })
    }

    /// Exact ratio `a / b` of two forms when `a` is a scalar multiple of `b`.
    fn exact_ratio(&self, a: &CoframeForm, b: &CoframeForm) -> Result<Exact> {
        let Some((m0, c0)) = b.coeffs.iter().next() else {
            return Err(Error::Argument("reference form is zero".into()));
        };
        let c = a
            .coeffs
            .get(m0)
            .cloned()
            .unwrap_or_else(|| exact(0, 1))
            / c0.clone();
        if !a.sub(&b.scale(&c)).is_zero() {
            return Err(Error::NotInvariant(format!(
                "`{}` is not a constant multiple of `{}`",
                self.format_form(a),
                self.format_form(b)
            )));
        }
        Ok(c)
    }

    /// `γ_k` of an invariant positive (1,1)-form: the exact constant `γ` with
    /// `(i/2) ∂∂̄ωᵏ ∧ ω^{n−k−1} = γ ωⁿ` (the trivial solution `v ≡ 0` of the
    /// conformal equation, which uniqueness makes THE invariant).
    pub fn gamma_k_invariant(&self, omega: &CoframeForm, k: usize) -> Result<BigRational> {
        let n = self.complex_dim();
        if k == 0 || k >= n {
            return Err(Error::Argument(format!("k must satisfy 1 <= k <= {}", n - 1)));
        }
        if omega.bidegree() != Some((1, 1)) {
            return Err(Error::Argument("omega must have bidegree (1,1)".into()));
        }
        let lhs = self
            .wedge(
                &self.del(&self.delbar(&self.power(omega, k))),
                &self.power(omega, n - k - 1),
            )
            .scale(&exact_i(1, 2));
        let vol = self.power(omega, n);
        let ratio = self.exact_ratio(&lhs, &vol)?;
        if !ratio.im.is_zero() {
            return Err(Error::NotInvariant(format!(
                "γ ratio has nonzero imaginary part {}",
                format_exact(&ratio)
            )));
        }
        Ok(ratio.re)
    }

    /// Coefficient of `(i/2) ∂∂̄(ω_test) ∧ ω₀^{n−2}` against the positive
    /// volume monomial `ω₀ⁿ/n!`. Strict negativity for every positive test
    /// form certifies the pluriclosed obstruction at the algebra level.
    pub fn pluriclosed_obstruction(
        &self,
        omega_test: &CoframeForm,
        omega0: &CoframeForm,
    ) -> Result<BigRational> {
        let n = self.complex_dim();
        for (f, tag) in [(omega_test, "omega_test"), (omega0, "omega0")] {
            if f.bidegree() != Some((1, 1)) {
                return Err(Error::Argument(format!("{tag} must have bidegree (1,1)")));
            }
        }
        if n < 2 {
            return Err(Error::Argument("need complex dimension >= 2".into()));
        }
        let lhs = self
            .wedge(
                &self.del(&self.delbar(omega_test)),
                &self.power(omega0, n - 2),
            )
            .scale(&exact_i(1, 2));
        let mut factorial = BigRational::one();
        for j in 2..=n {
            factorial *= rat(j as i64, 1);
        }
        let vol = self.power(omega0, n).scale(&Complex::new(
            factorial.recip(),
            BigRational::zero(),
        ));
        let ratio = self.exact_ratio(&lhs, &vol)?;
        if !ratio.im.is_zero() {
            return Err(Error::NotInvariant(
                "obstruction ratio has nonzero imaginary part".into(),
            ));
        }
        Ok(ratio.re)
    }

    /// Parse the text definition format:
    ///
    /// ```text
    /// generators: phi1 phi2 phi3
    /// formal: W
    /// W^3 = 0
    /// del phi3 = -phi1^phi2
    /// delbar theta = W
    /// ```
    ///
    /// Conjugate generators are written `~name`; coefficients are signed
    /// rationals with optional factor `i` (e.g. `i/2*theta^~theta`).
    /// Generators without a table line are closed. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut odd_names: Option<Vec<String>> = None;
        let mut formal_names: Vec<String> = Vec::new();
        let mut relations: BTreeMap<String, u32> = BTreeMap::new();
        let mut table_lines: Vec<(bool, String, String)> = Vec::new();

        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("generators:") {
                odd_names = Some(
                    rest.split([' ', ','])
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect(),
                );
            } else if let Some(rest) = line.strip_prefix("formal:") {
                formal_names.extend(
                    rest.split([' ', ','])
                        .filter(|s| !s.is_empty())
                        .map(String::from),
                );
            } else if let Some(rest) = line.strip_prefix("del ") {
                let (lhs, rhs) = split_equation(rest)?;
                table_lines.push((false, lhs, rhs));
            } else if let Some(rest) = line.strip_prefix("delbar ") {
                let (lhs, rhs) = split_equation(rest)?;
                table_lines.push((true, lhs, rhs));
            } else if line.contains('=') {
                // relation line: name^order = 0
                let (lhs, rhs) = split_equation(line)?;
                if rhs != "0" {
                    return Err(Error::Argument(format!(
                        "relation must equal zero: `{line}`"
                    )));
                }
                let (name, order) = lhs
                    .split_once('^')
                    .ok_or_else(|| Error::Argument(format!("bad relation `{line}`")))?;
                let order: u32 = order
                    .trim()
                    .parse()
                    .map_err(|_| Error::Argument(format!("bad nilpotency order in `{line}`")))?;
                relations.insert(name.trim().to_string(), order);
            } else {
                return Err(Error::Argument(format!("unrecognized line `{line}`")));
            }
        }

        let odd_names =
            odd_names.ok_or_else(|| Error::Argument("missing `generators:` line".into()))?;
        let formal = formal_names
            .iter()
            .map(|name| {
                let nil = relations.get(name).copied().ok_or_else(|| {
                    Error::Argument(format!("formal generator `{name}` has no nilpotency relation"))
                })?;
                Ok(FormalGenerator {
                    name: name.clone(),
                    nilpotency: nil,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for name in relations.keys() {
            if !formal_names.contains(name) {
                return Err(Error::Argument(format!(
                    "relation refers to undeclared formal generator `{name}`"
                )));
            }
        }

        let mut alg = Self::new(odd_names, formal)?;
        for (conjugate, lhs, rhs) in table_lines {
            if alg.odd_index(&lhs).is_none() {
                return Err(Error::Argument(format!(
                    "structure equation for unknown (1,0) generator `{lhs}`"
                )));
            }
            let form = alg.parse_form(&rhs)?;
            if conjugate {
                alg.set_delbar(&lhs, form)?;
            } else {
                alg.set_del(&lhs, form)?;
            }
        }
        Ok(alg)
    }

    /// Parse a form expression: `±` separated terms, each a `^`/`*` product
    /// of rational factors, `i`, generators, and `~`-conjugated generators.
    pub fn parse_form(&self, text: &str) -> Result<CoframeForm> {
        let text = text.trim();
        if text == "0" {
            return Ok(CoframeForm::zero());
        }
        let mut out = CoframeForm::zero();
        for (sign, term) in split_signed_terms(text)? {
            let mut coeff = if sign { exact(-1, 1) } else { exact(1, 1) };
            let mut form: Option<CoframeForm> = None;
            for factor in term.split(['^', '*']).map(str::trim) {
                if factor.is_empty() {
                    return Err(Error::Argument(format!("empty factor in `{term}`")));
                }
                if let Some(c) = parse_scalar_factor(factor) {
                    coeff *= c;
                } else {
                    let g = if let Some(name) = factor.strip_prefix('~') {
                        self.conjugate_generator(name)?
                    } else {
                        self.generator(factor)?
                    };
                    form = Some(match form {
                        None => g,
                        Some(f) => self.wedge(&f, &g),
                    });
                }
            }
            let term_form = match form {
                Some(f) => f.scale(&coeff),
                None => {
                    let mut f = CoframeForm::zero();
                    f.accumulate(
                        Monomial {
                            odd: vec![],
                            even: vec![0; self.formal.len()],
                        },
                        coeff,
                    );
                    f
                }
            };
            out = out.add(&term_form);
        }
        Ok(out)
    }
}

fn split_equation(s: &str) -> Result<(String, String)> {
    let (l, r) = s
        .split_once('=')
        .ok_or_else(|| Error::Argument(format!("missing `=` in `{s}`")))?;
    Ok((l.trim().to_string(), r.trim().to_string()))
}

/// Split `a - b + c` into signed terms, keeping `+`/`-` out of factor text.
fn split_signed_terms(s: &str) -> Result<Vec<(bool, String)>> {
    let mut terms = Vec::new();
    let mut current = String::new();
    let mut negative = false;
    let mut seen_any = false;
    for ch in s.chars() {
        match ch {
            '+' | '-' if seen_any && !current.trim().is_empty() => {
                terms.push((negative, current.trim().to_string()));
                current = String::new();
                negative = ch == '-';
            }
            '-' if current.trim().is_empty() => {
                negative = !negative;
                seen_any = true;
            }
            '+' if current.trim().is_empty() => {
                seen_any = true;
            }
            _ => {
                seen_any = true;
                current.push(ch);
            }
        }
    }
    if current.trim().is_empty() {
        return Err(Error::Argument(format!("dangling sign in `{s}`")));
    }
    terms.push((negative, current.trim().to_string()));
    Ok(terms)
}

/// `i`, `3`, `1/2`, `i/2` → scalar; generator names → `None`.
fn parse_scalar_factor(s: &str) -> Option<Exact> {
    if s == "i" {
        return Some(exact_i(1, 1));
    }
    if let Some(den) = s.strip_prefix("i/") {
        return den.parse::<i64>().ok().map(|d| exact_i(1, d));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = num.parse::<i64>().ok()?;
        let d = den.parse::<i64>().ok()?;
        return Some(exact(n, d));
    }
    s.parse::<i64>().ok().map(|n| exact(n, 1))
}

fn format_exact(c: &Exact) -> String {
    match (c.re.is_zero(), c.im.is_zero()) {
        (_, true) => format!("{}", c.re),
        (true, false) => format!("{}i", c.im),
        (false, false) => {
            if c.im.is_positive() {
                format!("{}+{}i", c.re, c.im)
            } else {
                format!("{}{}i", c.re, c.im)
            }
        }
    }
}
