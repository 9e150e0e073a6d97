//! Sparse multivariate polynomial arithmetic over the rationals.
//!
//! Everything else in the crate is built on [`MultiPoly`]: a sparse map from
//! exponent vectors to nonzero `BigRational` coefficients, kept in graded
//! lexicographic order. The canonical order makes leading-term division
//! well defined and serialization stable.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

type Exponents = SmallVec<[u32; 4]>;

/// Exact rational scalar used for all coefficients.
pub type Rat = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("variable count mismatch: expected {expected}, got {got}")]
    VariableCountMismatch { expected: usize, got: usize },
    #[error("arity mismatch: polynomial has {expected} variables, {what} has {got}")]
    ArityMismatch {
        expected: usize,
        got: usize,
        what: &'static str,
    },
    #[error("operation undefined for the zero polynomial")]
    ZeroPolynomial,
    #[error("divisor must be nonzero")]
    ZeroDivisor,
    #[error("divisor must be a non-unit (total degree >= 1)")]
    UnitDivisor,
    #[error("jacobian requires {vars} components in {vars} variables, got {got}")]
    NonSquareSystem { vars: usize, got: usize },
    #[error("line direction must be nonzero")]
    ZeroDirection,
    #[error("expected a univariate polynomial")]
    NotUnivariate,
    #[error("parse error at byte {at}: {msg}")]
    Parse { at: usize, msg: String },
}

/// Exponent vector of fixed length (one entry per ambient variable).
///
/// Packed into one `u128`: a 16-bit total-degree field followed by up to
/// seven 16-bit exponent fields, most significant first. Integer order on
/// the packed word is exactly graded lexicographic order, and monomial
/// multiplication is a single integer addition (fields cannot overflow
/// while total degrees stay below 2^16, which the construction asserts).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Monomial {
    packed: u128,
    vars: u8,
}

const MONO_FIELD_BITS: u32 = 16;
const MONO_FIELD_MASK: u128 = 0xFFFF;
const MONO_MAX_VARS: usize = 7;

#[inline]
fn mono_shift(field: usize) -> u32 {
    // field 0 is the degree, fields 1.. are exponents, high bits first
    128 - MONO_FIELD_BITS * (field as u32 + 1)
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Self::from_slice(&exps)
    }

    pub fn from_slice(exps: &[u32]) -> Self {
        assert!(
            exps.len() <= MONO_MAX_VARS,
            "at most {MONO_MAX_VARS} variables supported"
        );
        let degree: u32 = exps.iter().sum();
        assert!(degree < 1 << MONO_FIELD_BITS, "total degree too large");
        let mut packed = (degree as u128) << mono_shift(0);
        for (i, &e) in exps.iter().enumerate() {
            packed |= (e as u128) << mono_shift(i + 1);
        }
        Monomial {
            packed,
            vars: exps.len() as u8,
        }
    }

    pub fn constant(vars: usize) -> Self {
        assert!(vars <= MONO_MAX_VARS);
        Monomial {
            packed: 0,
            vars: vars as u8,
        }
    }

    /// Componentwise scaling (the monomial raised to `e`).
    fn pow(&self, e: u32) -> Monomial {
        let exps: Vec<u32> = self.exponents_iter().map(|x| x * e).collect();
        Monomial::from_slice(&exps)
    }

    pub fn arity(&self) -> usize {
        self.vars as usize
    }

    #[inline]
    pub fn exponent(&self, var: usize) -> u32 {
        debug_assert!(var < self.vars as usize);
        ((self.packed >> mono_shift(var + 1)) & MONO_FIELD_MASK) as u32
    }

    pub fn exponents_iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.arity()).map(|i| self.exponent(i))
    }

    pub fn exponents(&self) -> Exponents {
        self.exponents_iter().collect()
    }

    #[inline]
    pub fn total_degree(&self) -> u32 {
        ((self.packed >> mono_shift(0)) & MONO_FIELD_MASK) as u32
    }

    #[inline]
    fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.vars, other.vars);
        debug_assert!(
            (self.total_degree() as u64 + other.total_degree() as u64) < (1u64 << MONO_FIELD_BITS)
        );
        Monomial {
            packed: self.packed + other.packed,
            vars: self.vars,
        }
    }

    /// Componentwise difference, `None` when any exponent would go negative.
    #[inline]
    fn try_div(&self, other: &Monomial) -> Option<Monomial> {
        for i in 0..self.arity() {
            if self.exponent(i) < other.exponent(i) {
                return None;
            }
        }
        Some(Monomial {
            packed: self.packed - other.packed,
            vars: self.vars,
        })
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: total degree first, then lexicographic on the
    /// exponent vector. `BTreeMap`'s maximum key is the leading monomial.
    #[inline]
    fn cmp(&self, other: &Self) -> Ordering {
        self.packed.cmp(&other.packed)
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse exact multivariate polynomial over ℚ.
///
/// Invariants: no zero coefficients stored, no duplicate monomials, every
/// stored monomial has arity `vars`.
#[derive(Clone, PartialEq, Eq)]
pub struct MultiPoly {
    vars: usize,
    terms: BTreeMap<Monomial, Rat>,
}

impl MultiPoly {
    pub fn zero(vars: usize) -> Self {
        MultiPoly {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(vars: usize) -> Self {
        Self::constant(vars, Rat::one())
    }

    pub fn constant(vars: usize, c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::constant(vars), c);
        }
        MultiPoly { vars, terms }
    }

    /// The monomial `x_idx`.
    pub fn var(vars: usize, idx: usize) -> Self {
        assert!(idx < vars, "variable index out of range");
        let mut exps = vec![0; vars];
        exps[idx] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::new(exps), Rat::one());
        MultiPoly { vars, terms }
    }

    pub fn from_terms<I>(vars: usize, it: I) -> Self
    where
        I: IntoIterator<Item = (Vec<u32>, Rat)>,
    {
        let mut p = MultiPoly::zero(vars);
        for (exps, c) in it {
            assert_eq!(exps.len(), vars, "exponent vector arity mismatch");
            p.add_term(Monomial::new(exps), c);
        }
        p
    }

    pub fn var_count(&self) -> usize {
        self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .all(|(m, c)| m.total_degree() == 0 && c.is_one())
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rat)> {
        self.terms.iter()
    }

    /// Terms in descending canonical order (leading term first).
    pub fn terms_desc(&self) -> impl Iterator<Item = (&Monomial, &Rat)> {
        self.terms.iter().rev()
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &Rat)> {
        self.terms.iter().next_back()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rat {
        self.terms.get(m).cloned().unwrap_or_else(Rat::zero)
    }

    fn add_term(&mut self, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn check_same_vars(&self, other: &MultiPoly) -> Result<(), PolyError> {
        if self.vars != other.vars {
            return Err(PolyError::VariableCountMismatch {
                expected: self.vars,
                got: other.vars,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &MultiPoly) -> Result<MultiPoly, PolyError> {
        self.check_same_vars(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &MultiPoly) -> Result<MultiPoly, PolyError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> MultiPoly {
        MultiPoly {
            vars: self.vars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, c: &Rat) -> MultiPoly {
        if c.is_zero() {
            return MultiPoly::zero(self.vars);
        }
        MultiPoly {
            vars: self.vars,
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul(&self, other: &MultiPoly) -> Result<MultiPoly, PolyError> {
        self.check_same_vars(other)?;
        let mut out = MultiPoly::zero(self.vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn mul_term(&self, m: &Monomial, c: &Rat) -> MultiPoly {
        if c.is_zero() {
            return MultiPoly::zero(self.vars);
        }
        MultiPoly {
            vars: self.vars,
            terms: self
                .terms
                .iter()
                .map(|(mm, cc)| (mm.mul(m), cc * c))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> MultiPoly {
        let mut result = MultiPoly::one(self.vars);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base).expect("same arity");
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base).expect("same arity");
            }
        }
        result
    }

    /// Total degree of a nonzero polynomial.
    pub fn total_degree(&self) -> Result<u32, PolyError> {
        self.terms
            .keys()
            .map(|m| m.total_degree())
            .max()
            .ok_or(PolyError::ZeroPolynomial)
    }

    /// True when all monomials share one total degree (vacuously for 0).
    pub fn is_homogeneous(&self) -> bool {
        let mut it = self.terms.keys().map(|m| m.total_degree());
        match it.next() {
            None => true,
            Some(d) => it.all(|e| e == d),
        }
    }

    pub fn derivative(&self, var: usize) -> MultiPoly {
        assert!(var < self.vars);
        let mut out = MultiPoly::zero(self.vars);
        for (m, c) in &self.terms {
            let e = m.exponent(var);
            if e == 0 {
                continue;
            }
            let mut exps = m.exponents().to_vec();
            exps[var] -= 1;
            out.add_term(Monomial::new(exps), c * Rat::from(BigInt::from(e)));
        }
        out
    }

    /// Smallest exponent of `var` over the support (`None` for 0).
    pub fn min_var_exponent(&self, var: usize) -> Option<u32> {
        self.terms.keys().map(|m| m.exponent(var)).min()
    }

    /// Divide by `x_var^k`; every term must have exponent >= k in `var`.
    pub fn divide_by_var_power(&self, var: usize, k: u32) -> MultiPoly {
        if k == 0 {
            return self.clone();
        }
        MultiPoly {
            vars: self.vars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let mut exps = m.exponents().to_vec();
                    assert!(exps[var] >= k, "term not divisible by variable power");
                    exps[var] -= k;
                    (Monomial::new(exps), c.clone())
                })
                .collect(),
        }
    }

    /// Rescale so all coefficients are coprime integers and the leading
    /// coefficient is positive. The zero polynomial is unchanged.
    pub fn primitive_part(&self) -> MultiPoly {
        if self.is_zero() {
            return self.clone();
        }
        let mut den = BigInt::one();
        for (_, c) in self.terms() {
            den = den.lcm(c.denom());
        }
        let mut num = BigInt::zero();
        for (_, c) in self.terms() {
            num = num.gcd(&(c * Rat::from(den.clone())).numer().clone());
        }
        let mut scale = Rat::new(den, num);
        if self
            .leading_term()
            .map(|(_, c)| c.is_negative())
            .unwrap_or(false)
        {
            scale = -scale;
        }
        self.scale(&scale)
    }

    /// Exact composition `self(images)`.
    ///
    /// All images must live in one common variable space; the result lives
    /// there too. Evaluation is Horner-style, with an integer fast path for
    /// homogeneous inputs and a direct exponent-transform path when every
    /// image is a single term.
    pub fn substitute(&self, images: &[MultiPoly]) -> Result<MultiPoly, PolyError> {
        if images.len() != self.vars {
            return Err(PolyError::ArityMismatch {
                expected: self.vars,
                got: images.len(),
                what: "image list",
            });
        }
        if self.is_zero() {
            let tvars = images.first().map(|p| p.var_count()).unwrap_or(1);
            return Ok(MultiPoly::zero(tvars));
        }
        let tvars = images
            .first()
            .map(|p| p.var_count())
            .ok_or(PolyError::ZeroPolynomial)?;
        for img in images {
            if img.var_count() != tvars {
                return Err(PolyError::VariableCountMismatch {
                    expected: tvars,
                    got: img.var_count(),
                });
            }
        }
        if images.iter().all(|img| img.term_count() <= 1) {
            return Ok(self.substitute_monomial_images(images, tvars));
        }
        if self.is_homogeneous() {
            return Ok(self.substitute_homogeneous_int(images, tvars));
        }
        Ok(self.substitute_rational(images, tvars))
    }

    /// Every image is 0 or a single term: map each monomial directly.
    fn substitute_monomial_images(&self, images: &[MultiPoly], tvars: usize) -> MultiPoly {
        let mut out = MultiPoly::zero(tvars);
        'term: for (m, c) in &self.terms {
            let mut exps = vec![0u32; tvars];
            let mut coeff = c.clone();
            for (var, e) in m.exponents().iter().enumerate() {
                if *e == 0 {
                    continue;
                }
                match images[var].terms.iter().next() {
                    None => continue 'term, // image 0 kills the term
                    Some((im, ic)) => {
                        for (k, ie) in im.exponents().iter().enumerate() {
                            exps[k] += ie * e;
                        }
                        coeff *= rat_pow(ic, *e);
                    }
                }
            }
            out.add_term(Monomial::new(exps), coeff);
        }
        out
    }

    /// Homogeneous fast path: clear denominators once, run Horner over
    /// `BigInt`, and rescale. Valid because every monomial of a homogeneous
    /// polynomial has the same total degree, so a common image denominator
    /// factors out uniformly.
    fn substitute_homogeneous_int(&self, images: &[MultiPoly], tvars: usize) -> MultiPoly {
        let deg = self.total_degree().expect("nonzero");
        let (self_den, self_int) = clear_denominators(self);
        let mut img_den = BigInt::one();
        for img in images {
            for (_, c) in &img.terms {
                img_den = img_den.lcm(c.denom());
            }
        }
        let images_int: Vec<IntPoly> = images
            .iter()
            .map(|img| {
                let terms = img
                    .terms
                    .iter()
                    .map(|(m, c)| {
                        let scaled = c * Rat::from(img_den.clone());
                        debug_assert!(scaled.denom().is_one());
                        (*m, scaled.numer().clone())
                    })
                    .collect();
                IntPoly { vars: tvars, terms }
            })
            .collect();
        let terms: Vec<(&Monomial, &BigInt)> = self_int.iter().map(|(m, c)| (m, c)).collect();
        let mut table = PowTable::new(images_int);
        let composed = horner_int(&terms, 0, self.vars, &mut table, tvars);
        let scale = Rat::new(BigInt::one(), self_den * pow_bigint(&img_den, deg));
        let mut out = MultiPoly::zero(tvars);
        for (m, c) in composed.terms {
            out.add_term(m, Rat::from(c) * &scale);
        }
        out
    }

    fn substitute_rational(&self, images: &[MultiPoly], tvars: usize) -> MultiPoly {
        let terms: Vec<(&Monomial, &Rat)> = self.terms.iter().collect();
        horner_rat(&terms, 0, self.vars, images, tvars)
    }

    /// Exact single-divisor division by leading-term reduction.
    ///
    /// Returns `Some(q)` with `self = d * q`, or `None` when no exact
    /// quotient exists.
    pub fn exact_divide(&self, d: &MultiPoly) -> Result<Option<MultiPoly>, PolyError> {
        self.check_same_vars(d)?;
        if d.is_zero() {
            return Err(PolyError::ZeroDivisor);
        }
        if self.has_integer_coefficients() && d.has_integer_coefficients() {
            return Ok(self.exact_divide_integer(d));
        }
        let (lm, lc) = d.leading_term().expect("nonzero divisor");
        let lm = *lm;
        let lc = lc.clone();
        let mut rem = self.clone();
        let mut quot = MultiPoly::zero(self.vars);
        while let Some((rm, rc)) = rem.leading_term() {
            let Some(qm) = rm.try_div(&lm) else {
                return Ok(None);
            };
            let qc = rc / &lc;
            // cancel in place: rem -= (qm, qc) * d
            for (dm, dc) in &d.terms {
                rem.add_term(dm.mul(&qm), -(dc * &qc));
            }
            quot.add_term(qm, qc);
        }
        Ok(Some(quot))
    }

    fn has_integer_coefficients(&self) -> bool {
        self.terms.values().all(|c| c.denom().is_one())
    }

    /// Integer-only division loop. When the divisor is primitive over the
    /// integers, exact divisibility over the rationals forces every
    /// intermediate remainder and quotient coefficient to stay integral, so
    /// a fractional step certifies non-divisibility. For a non-primitive
    /// divisor the same loop still decides divisibility of an integer
    /// dividend whose quotient is integral; a fractional quotient step
    /// falls back to the rational loop.
    fn exact_divide_integer(&self, d: &MultiPoly) -> Option<MultiPoly> {
        let (lm, lc) = d.leading_term().expect("nonzero divisor");
        let lm = *lm;
        let lc = lc.numer().clone();
        let div_terms: Vec<(Monomial, BigInt)> = d
            .terms
            .iter()
            .map(|(m, c)| (*m, c.numer().clone()))
            .collect();
        let mut rem: BTreeMap<Monomial, BigInt> = self
            .terms
            .iter()
            .map(|(m, c)| (*m, c.numer().clone()))
            .collect();
        let mut quot: Vec<(Monomial, BigInt)> = Vec::new();
        let mut fractional = false;
        while let Some((rm, rc)) = rem.iter().next_back() {
            let Some(qm) = rm.try_div(&lm) else {
                return None;
            };
            let (qc, r) = rc.div_rem(&lc);
            if !r.is_zero() {
                fractional = true;
                break;
            }
            for (dm, dc) in &div_terms {
                let key = dm.mul(&qm);
                let delta = dc * &qc;
                use std::collections::btree_map::Entry;
                match rem.entry(key) {
                    Entry::Vacant(e) => {
                        e.insert(-delta);
                    }
                    Entry::Occupied(mut e) => {
                        let v: BigInt = e.get() - delta;
                        if v.is_zero() {
                            e.remove();
                        } else {
                            *e.get_mut() = v;
                        }
                    }
                }
            }
            quot.push((qm, qc));
        }
        if fractional {
            // rare: decide over the rationals instead
            let (lm2, lc2) = d.leading_term().expect("nonzero divisor");
            let lm2 = *lm2;
            let lc2 = lc2.clone();
            let mut rem = self.clone();
            let mut quot = MultiPoly::zero(self.vars);
            while let Some((rm, rc)) = rem.leading_term() {
                let Some(qm) = rm.try_div(&lm2) else {
                    return None;
                };
                let qc = rc / &lc2;
                for (dm, dc) in &d.terms {
                    rem.add_term(dm.mul(&qm), -(dc * &qc));
                }
                quot.add_term(qm, qc);
            }
            return Some(quot);
        }
        Some(MultiPoly {
            vars: self.vars,
            terms: quot
                .into_iter()
                .map(|(m, c)| (m, Rat::from(c)))
                .collect(),
        })
    }

    /// Maximal `t` with `self = d^t * q`, `q` not divisible by `d`.
    pub fn extract_power(&self, d: &MultiPoly) -> Result<(u32, MultiPoly), PolyError> {
        self.check_same_vars(d)?;
        if self.is_zero() {
            return Err(PolyError::ZeroPolynomial);
        }
        if d.is_zero() {
            return Err(PolyError::ZeroDivisor);
        }
        if d.total_degree().expect("nonzero") == 0 {
            return Err(PolyError::UnitDivisor);
        }
        let mut t = 0u32;
        let mut q = self.clone();
        while let Some(next) = q.exact_divide(d)? {
            t += 1;
            q = next;
        }
        Ok((t, q))
    }

    pub fn evaluate(&self, point: &[Rat]) -> Result<Rat, PolyError> {
        if point.len() != self.vars {
            return Err(PolyError::ArityMismatch {
                expected: self.vars,
                got: point.len(),
                what: "evaluation point",
            });
        }
        let mut acc = Rat::zero();
        for (m, c) in &self.terms {
            let mut v = c.clone();
            for (var, e) in m.exponents().iter().enumerate() {
                if *e > 0 {
                    v *= rat_pow(&point[var], *e);
                }
            }
            acc += v;
        }
        Ok(acc)
    }

    /// Restriction to the parametrized line `x = base + t * dir`, as a
    /// univariate polynomial in `t`.
    pub fn restrict_to_line(&self, base: &[Rat], dir: &[Rat]) -> Result<MultiPoly, PolyError> {
        if base.len() != self.vars || dir.len() != self.vars {
            return Err(PolyError::ArityMismatch {
                expected: self.vars,
                got: base.len().min(dir.len()),
                what: "line data",
            });
        }
        if dir.iter().all(|c| c.is_zero()) {
            return Err(PolyError::ZeroDirection);
        }
        let images: Vec<MultiPoly> = base
            .iter()
            .zip(dir)
            .map(|(b, d)| {
                let mut p = MultiPoly::constant(1, b.clone());
                p.add_term(Monomial::new(vec![1]), d.clone());
                p
            })
            .collect();
        // general path: the restriction of a non-homogeneous polynomial is fine
        if images.len() != self.vars {
            unreachable!();
        }
        Ok(self.substitute_rational(&images, 1))
    }

    /// Univariate division with remainder; both polynomials in one variable.
    pub fn univariate_divmod(&self, d: &MultiPoly) -> Result<(MultiPoly, MultiPoly), PolyError> {
        if self.vars != 1 || d.vars != 1 {
            return Err(PolyError::NotUnivariate);
        }
        if d.is_zero() {
            return Err(PolyError::ZeroDivisor);
        }
        let (dm, dc) = d.leading_term().expect("nonzero");
        let ddeg = dm.total_degree();
        let dc = dc.clone();
        let mut rem = self.clone();
        let mut quot = MultiPoly::zero(1);
        while let Some((rm, rc)) = rem.leading_term() {
            let rdeg = rm.total_degree();
            if rdeg < ddeg {
                break;
            }
            let qm = Monomial::new(vec![rdeg - ddeg]);
            let qc = rc / &dc;
            for (em, ec) in &d.terms {
                rem.add_term(em.mul(&qm), -(ec * &qc));
            }
            quot.add_term(qm, qc);
        }
        Ok((quot, rem))
    }

    /// Format with the given variable names ("2*x^2*y - 1/2*z").
    pub fn format_with(&self, names: &[&str]) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms_desc().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mut factors: Vec<String> = Vec::new();
            if !mag.is_one() || m.total_degree() == 0 {
                factors.push(format_rat(&mag));
            }
            for (var, e) in m.exponents().iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(names[var].to_string()),
                    _ => factors.push(format!("{}^{}", names[var], e)),
                }
            }
            out.push_str(&factors.join("*"));
        }
        out
    }
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..self.vars).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        write!(f, "{}", self.format_with(&refs))
    }
}

/// Rescale a component list by one common factor so all coefficients are
/// integers with overall gcd 1 and the first nonzero leading coefficient is
/// positive. Preserves the projective map the components define.
pub fn strip_common_content(components: &[MultiPoly]) -> Vec<MultiPoly> {
    let mut den = BigInt::one();
    for poly in components {
        for (_, c) in poly.terms() {
            den = den.lcm(c.denom());
        }
    }
    let mut num = BigInt::zero();
    for poly in components {
        for (_, c) in poly.terms() {
            num = num.gcd(&(c * Rat::from(den.clone())).numer().clone());
        }
    }
    if num.is_zero() {
        return components.to_vec();
    }
    let mut scale = Rat::new(den, num);
    if components
        .iter()
        .find_map(|p| p.leading_term())
        .map(|(_, c)| c.is_negative())
        .unwrap_or(false)
    {
        scale = -scale;
    }
    components.iter().map(|p| p.scale(&scale)).collect()
}

/// Monic gcd of two univariate polynomials by the Euclidean algorithm.
pub fn univariate_gcd(a: &MultiPoly, b: &MultiPoly) -> Result<MultiPoly, PolyError> {
    if a.var_count() != 1 || b.var_count() != 1 {
        return Err(PolyError::NotUnivariate);
    }
    let mut a = a.clone();
    let mut b = b.clone();
    while !b.is_zero() {
        let (_, r) = a.univariate_divmod(&b)?;
        a = b;
        b = make_monic(&r);
    }
    Ok(make_monic(&a))
}

fn make_monic(p: &MultiPoly) -> MultiPoly {
    match p.leading_term() {
        None => p.clone(),
        Some((_, lc)) => {
            let inv = Rat::one() / lc;
            p.scale(&inv)
        }
    }
}

/// Determinant of the partial-derivative matrix of a square system.
pub fn jacobian_det(components: &[MultiPoly]) -> Result<MultiPoly, PolyError> {
    let n = components.len();
    if n == 0 {
        return Err(PolyError::NonSquareSystem { vars: 0, got: 0 });
    }
    let vars = components[0].var_count();
    if vars != n {
        return Err(PolyError::NonSquareSystem { vars, got: n });
    }
    for c in components {
        if c.var_count() != vars {
            return Err(PolyError::VariableCountMismatch {
                expected: vars,
                got: c.var_count(),
            });
        }
    }
    let mat: Vec<Vec<MultiPoly>> = components
        .iter()
        .map(|c| (0..vars).map(|j| c.derivative(j)).collect())
        .collect();
    Ok(poly_det(&mat, &(0..n).collect::<Vec<_>>()))
}

fn poly_det(mat: &[Vec<MultiPoly>], cols: &[usize]) -> MultiPoly {
    let vars = mat[0][0].var_count();
    let row = mat.len() - cols.len();
    if cols.is_empty() {
        return MultiPoly::one(vars);
    }
    let mut acc = MultiPoly::zero(vars);
    for (i, &col) in cols.iter().enumerate() {
        let entry = &mat[row][col];
        if entry.is_zero() {
            continue;
        }
        let rest: Vec<usize> = cols
            .iter()
            .copied()
            .filter(|&c| c != col)
            .collect();
        let minor = poly_det(mat, &rest);
        let signed = if i % 2 == 0 { minor } else { minor.neg() };
        acc = acc.add(&entry.mul(&signed).expect("same arity")).expect("same arity");
    }
    acc
}

pub(crate) fn rat_pow(r: &Rat, e: u32) -> Rat {
    let mut result = Rat::one();
    let mut base = r.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            result *= &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

fn pow_bigint(b: &BigInt, e: u32) -> BigInt {
    let mut result = BigInt::one();
    let mut base = b.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            result *= &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// `(den, terms)` with `self = (1/den) * Σ terms` over the integers.
fn clear_denominators(p: &MultiPoly) -> (BigInt, BTreeMap<Monomial, BigInt>) {
    let mut den = BigInt::one();
    for (_, c) in p.terms() {
        den = den.lcm(c.denom());
    }
    let mut terms = BTreeMap::new();
    for (m, c) in p.terms() {
        let scaled = c * Rat::from(den.clone());
        debug_assert!(scaled.denom().is_one());
        terms.insert(m.clone(), scaled.numer().clone());
    }
    (den, terms)
}

/// Integer polynomial in sorted-vector form (ascending canonical order).
/// The workhorse of composition: addition is a linear merge, products with
/// few-term factors are repeated merge passes, and no per-term allocation
/// happens beyond the coefficients themselves.
#[derive(Clone)]
struct IntPoly {
    vars: usize,
    terms: Vec<(Monomial, BigInt)>,
}

impl IntPoly {
    fn zero(vars: usize) -> Self {
        IntPoly {
            vars,
            terms: Vec::new(),
        }
    }

    fn constant(vars: usize, c: BigInt) -> Self {
        let mut terms = Vec::new();
        if !c.is_zero() {
            terms.push((Monomial::constant(vars), c));
        }
        IntPoly { vars, terms }
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0.total_degree() == 0 && self.terms[0].1.is_one()
    }

    /// Merge-add, consuming both operands.
    fn merged_with(self, other: IntPoly) -> IntPoly {
        if self.terms.is_empty() {
            return other;
        }
        if other.terms.is_empty() {
            return self;
        }
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let mut a = self.terms.into_iter().peekable();
        let mut b = other.terms.into_iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (Some((ma, _)), Some((mb, _))) => {
                    let ord = ma.cmp(mb);
                    match ord {
                        Ordering::Less => out.push(a.next().expect("peeked")),
                        Ordering::Greater => out.push(b.next().expect("peeked")),
                        Ordering::Equal => {
                            let (m, ca) = a.next().expect("peeked");
                            let (_, cb) = b.next().expect("peeked");
                            let sum = ca + cb;
                            if !sum.is_zero() {
                                out.push((m, sum));
                            }
                        }
                    }
                }
                (Some(_), None) => out.push(a.next().expect("peeked")),
                (None, Some(_)) => out.push(b.next().expect("peeked")),
                (None, None) => break,
            }
        }
        IntPoly {
            vars: self.vars,
            terms: out,
        }
    }

    /// Order-preserving shift-and-scale by one term.
    fn mul_term(&self, m: &Monomial, c: &BigInt) -> IntPoly {
        IntPoly {
            vars: self.vars,
            terms: self
                .terms
                .iter()
                .map(|(mm, cc)| (mm.mul(m), cc * c))
                .collect(),
        }
    }

    /// Product via one merge pass per term of the smaller factor.
    fn mul(&self, other: &IntPoly) -> IntPoly {
        let (small, large) = if self.terms.len() <= other.terms.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut acc = IntPoly::zero(self.vars);
        for (m, c) in &small.terms {
            acc = acc.merged_with(large.mul_term(m, c));
        }
        acc
    }
}

/// Lazily extended table of image powers, so every required power is built
/// exactly once per substitution (incrementally, never by squaring large
/// intermediates twice).
struct PowTable {
    images: Vec<IntPoly>,
    pows: Vec<Vec<IntPoly>>,
}

impl PowTable {
    fn new(images: Vec<IntPoly>) -> Self {
        let pows = images
            .iter()
            .map(|img| vec![IntPoly::constant(img.vars, BigInt::one()), img.clone()])
            .collect();
        PowTable { images, pows }
    }

    fn get(&mut self, var: usize, e: u32) -> &IntPoly {
        while self.pows[var].len() <= e as usize {
            let next = self.pows[var].last().expect("seeded").mul(&self.images[var]);
            self.pows[var].push(next);
        }
        &self.pows[var][e as usize]
    }

    /// Multiply by `image[var]^gap` using the table.
    fn scale(&mut self, acc: IntPoly, var: usize, gap: u32) -> IntPoly {
        if gap == 0 || acc.is_zero() || self.images[var].is_one() {
            return acc;
        }
        if self.images[var].terms.len() == 1 {
            let (m, c) = &self.images[var].terms[0];
            return acc.mul_term(&m.pow(gap), &pow_bigint(c, gap));
        }
        acc.mul(self.get(var, gap))
    }
}

/// Horner evaluation of `Σ coeff * x^e` at the integer images, recursing
/// over the source variables.
fn horner_int(
    terms: &[(&Monomial, &BigInt)],
    var: usize,
    src_vars: usize,
    table: &mut PowTable,
    tvars: usize,
) -> IntPoly {
    if terms.is_empty() {
        return IntPoly::zero(tvars);
    }
    if var == src_vars {
        debug_assert_eq!(terms.len(), 1);
        return IntPoly::constant(tvars, terms[0].1.clone());
    }
    let mut groups: BTreeMap<u32, Vec<(&Monomial, &BigInt)>> = BTreeMap::new();
    for &(m, c) in terms {
        groups.entry(m.exponent(var)).or_default().push((m, c));
    }
    let mut iter = groups.into_iter().rev();
    let (top_e, top_group) = iter.next().expect("nonempty");
    let mut acc = horner_int(&top_group, var + 1, src_vars, table, tvars);
    let mut prev = top_e;
    for (e, group) in iter {
        acc = table.scale(acc, var, prev - e);
        acc = acc.merged_with(horner_int(&group, var + 1, src_vars, table, tvars));
        prev = e;
    }
    table.scale(acc, var, prev)
}

fn horner_rat(
    terms: &[(&Monomial, &Rat)],
    var: usize,
    src_vars: usize,
    images: &[MultiPoly],
    tvars: usize,
) -> MultiPoly {
    if terms.is_empty() {
        return MultiPoly::zero(tvars);
    }
    if var == src_vars {
        debug_assert_eq!(terms.len(), 1);
        return MultiPoly::constant(tvars, terms[0].1.clone());
    }
    let mut groups: BTreeMap<u32, Vec<(&Monomial, &Rat)>> = BTreeMap::new();
    for &(m, c) in terms {
        groups.entry(m.exponent(var)).or_default().push((m, c));
    }
    let mut iter = groups.into_iter().rev();
    let (top_e, top_group) = iter.next().expect("nonempty");
    let mut acc = horner_rat(&top_group, var + 1, src_vars, images, tvars);
    let mut prev = top_e;
    for (e, group) in iter {
        acc = scale_by_power_rat(acc, &images[var], prev - e);
        acc = acc
            .add(&horner_rat(&group, var + 1, src_vars, images, tvars))
            .expect("same arity");
        prev = e;
    }
    scale_by_power_rat(acc, &images[var], prev)
}

fn scale_by_power_rat(acc: MultiPoly, image: &MultiPoly, gap: u32) -> MultiPoly {
    if gap == 0 || acc.is_zero() || image.is_one() {
        return acc;
    }
    if image.term_count() == 1 {
        let (m, c) = image.leading_term().expect("single term");
        return acc.mul_term(&m.pow(gap), &rat_pow(c, gap));
    }
    acc.mul(&image.pow(gap)).expect("same arity")
}

// ---------------------------------------------------------------------------
// Rational formatting and JSON form
// ---------------------------------------------------------------------------

/// "n" or "n/d" with the denominator omitted when 1.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rat(s: &str) -> Result<Rat, PolyError> {
    let parse_int = |t: &str| -> Result<BigInt, PolyError> {
        t.parse::<BigInt>().map_err(|e| PolyError::Parse {
            at: 0,
            msg: format!("bad integer {t:?}: {e}"),
        })
    };
    match s.split_once('/') {
        None => Ok(Rat::from(parse_int(s.trim())?)),
        Some((n, d)) => {
            let den = parse_int(d.trim())?;
            if den.is_zero() {
                return Err(PolyError::Parse {
                    at: 0,
                    msg: "zero denominator".into(),
                });
            }
            Ok(Rat::new(parse_int(n.trim())?, den))
        }
    }
}

/// JSON form of a polynomial: variable names plus terms in descending
/// canonical order, coefficients as fraction strings.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PolyJson {
    pub vars: Vec<String>,
    pub terms: Vec<PolyTermJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PolyTermJson {
    pub e: Vec<u32>,
    pub c: String,
}

impl MultiPoly {
    pub fn to_json(&self, names: &[String]) -> PolyJson {
        assert_eq!(names.len(), self.vars);
        PolyJson {
            vars: names.to_vec(),
            terms: self
                .terms_desc()
                .map(|(m, c)| PolyTermJson {
                    e: m.exponents().to_vec(),
                    c: format_rat(c),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &PolyJson) -> Result<(MultiPoly, Vec<String>), PolyError> {
        let vars = json.vars.len();
        let mut p = MultiPoly::zero(vars);
        for t in &json.terms {
            if t.e.len() != vars {
                return Err(PolyError::ArityMismatch {
                    expected: vars,
                    got: t.e.len(),
                    what: "term exponents",
                });
            }
            p.add_term(Monomial::new(t.e.clone()), parse_rat(&t.c)?);
        }
        Ok((p, json.vars.clone()))
    }
}

// ---------------------------------------------------------------------------
// Expression parser (fixtures and tests)
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    names: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn error<T>(&self, msg: impl Into<String>) -> Result<T, PolyError> {
        Err(PolyError::Parse {
            at: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<MultiPoly, PolyError> {
        let vars = self.names.len();
        let mut acc = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                self.term()?.neg()
            }
            Some(b'+') => {
                self.pos += 1;
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?)?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?)?;
                }
                _ => break,
            }
        }
        let _ = vars;
        Ok(acc)
    }

    fn term(&mut self) -> Result<MultiPoly, PolyError> {
        let mut acc = self.power()?;
        while let Some(b'*') = self.peek() {
            self.pos += 1;
            acc = acc.mul(&self.power()?)?;
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<MultiPoly, PolyError> {
        let base = self.atom()?;
        if let Some(b'^') = self.peek() {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return self.error("expected exponent");
            }
            let e: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|e| PolyError::Parse {
                    at: start,
                    msg: format!("bad exponent: {e}"),
                })?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<MultiPoly, PolyError> {
        let vars = self.names.len();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.error("expected ')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let mut lit = std::str::from_utf8(&self.src[start..self.pos])
                    .unwrap()
                    .to_string();
                // rational literal "a/b" (only between digit runs)
                let save = self.pos;
                if self.peek() == Some(b'/') {
                    self.pos += 1;
                    if self
                        .peek()
                        .map(|c| c.is_ascii_digit())
                        .unwrap_or(false)
                    {
                        let dstart = self.pos;
                        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                        lit.push('/');
                        lit.push_str(std::str::from_utf8(&self.src[dstart..self.pos]).unwrap());
                    } else {
                        self.pos = save;
                    }
                }
                Ok(MultiPoly::constant(vars, parse_rat(&lit)?))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                match self.names.iter().position(|n| *n == name) {
                    Some(idx) => Ok(MultiPoly::var(vars, idx)),
                    None => Err(PolyError::Parse {
                        at: start,
                        msg: format!("unknown variable {name:?}"),
                    }),
                }
            }
            _ => self.error("expected '(', number, or variable"),
        }
    }
}

/// Parse an expression like `"y*(y-z)"` or `"3/2*x^2 - z"` over the given
/// variable names.
pub fn parse_poly(src: &str, names: &[&str]) -> Result<MultiPoly, PolyError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        names,
    };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(PolyError::Parse {
            at: p.pos,
            msg: "trailing input".into(),
        });
    }
    Ok(out)
}
