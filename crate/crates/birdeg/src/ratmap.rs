//! Birational maps of projective space: minimal lifts, pull-backs, proper
//! pull-backs with factor extraction, the brute-force iteration oracle, and
//! verification of the declared structure (critical factorization, inverse
//! relation, contraction of critical components).

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blowup::{local_index, BlowupError, ChartSet};
use crate::poly::{
    format_rat, jacobian_det, parse_rat, MultiPoly, PolyError, PolyJson, Rat,
};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("projective point must have a nonzero coordinate")]
    ZeroPoint,
    #[error("point has {got} coordinates, expected {expected}")]
    PointArity { expected: usize, got: usize },
    #[error("descriptor {name}: expected {expected} components, got {got}")]
    ComponentCount {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("descriptor {name}: components must be homogeneous of one common degree")]
    ComponentsNotHomogeneous { name: String },
    #[error("descriptor {name}: declared factor {factor} divides every component")]
    DeclaredCommonFactor { name: String, factor: String },
    #[error("pull-back input must be homogeneous")]
    NotHomogeneous,
    #[error("unknown critical factor {0}")]
    UnknownFactor(String),
    #[error(
        "cross-check mismatch for factor {factor}: trial division gives {division}, \
         chart index gives {chart}"
    )]
    CrossCheckMismatch {
        factor: String,
        division: u32,
        chart: u32,
    },
    #[error("iterate requires n >= 1")]
    ZeroIterate,
    #[error("residual common factor of degree {degree} survives declared stripping at step {step}")]
    ResidualCommonFactor { step: usize, degree: u32 },
    #[error("jacobian determinant leaves a non-constant residual of degree {degree}")]
    IncompleteFactorList { degree: u32 },
    #[error("no inverse components declared")]
    MissingInverse,
    #[error("declared inverse does not compose to a scalar multiple of the identity")]
    NotInverse,
    #[error("inverse composition factor has an undeclared component of degree {degree}")]
    UnexplainedFactor { degree: u32 },
    #[error("critical component {factor} is not contracted to a point")]
    NotContractedToPoint { factor: String },
    #[error("factor {factor} contracts to {found}, declared target {declared}")]
    TargetMismatch {
        factor: String,
        found: String,
        declared: String,
    },
    #[error("factor {factor}: no parametrization available for a nonlinear hypersurface")]
    MissingParametrization { factor: String },
    #[error("invariant numerator and denominator must be homogeneous of equal degree")]
    InvariantShape,
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Blowup(#[from] BlowupError),
}

/// Point of projective space, normalized so the first nonzero coordinate
/// is 1. Equality is coordinate-wise equality of the normal form.
#[derive(Clone, PartialEq, Eq)]
pub struct ProjectivePoint {
    coords: Vec<Rat>,
}

impl ProjectivePoint {
    pub fn new(coords: Vec<Rat>) -> Result<Self, MapError> {
        let pivot = coords
            .iter()
            .position(|c| !c.is_zero())
            .ok_or(MapError::ZeroPoint)?;
        let scale = coords[pivot].clone();
        Ok(ProjectivePoint {
            coords: coords.iter().map(|c| c / &scale).collect(),
        })
    }

    pub fn from_integers(coords: &[i64]) -> Result<Self, MapError> {
        Self::new(coords.iter().map(|&c| Rat::from(BigInt::from(c))).collect())
    }

    pub fn coords(&self) -> &[Rat] {
        &self.coords
    }

    pub fn dimension(&self) -> usize {
        self.coords.len() - 1
    }
}

impl fmt::Display for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(format_rat).collect();
        write!(f, "[{}]", parts.join(":"))
    }
}

impl fmt::Debug for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A declared irreducible component of the critical set contracted to a
/// point, together with the chart resolving the contraction.
#[derive(Debug, Clone)]
pub struct CriticalFactor {
    pub id: String,
    pub polynomial: MultiPoly,
    pub target: ProjectivePoint,
    /// Id of the top-level resolving chart in the fixture's chart set.
    pub chart: String,
}

/// Birational map of projective N-space given by a minimal lift.
#[derive(Debug, Clone)]
pub struct BirationalMapDescriptor {
    pub name: String,
    pub dimension: usize,
    pub variables: Vec<String>,
    pub components: Vec<MultiPoly>,
    pub critical_factors: Vec<CriticalFactor>,
    pub inverse: Option<Vec<MultiPoly>>,
    pub parametrizations: BTreeMap<String, Vec<MultiPoly>>,
}

/// Result of the minimal-lift iteration oracle.
#[derive(Debug, Clone)]
pub struct MinimalIterate {
    pub components: Vec<MultiPoly>,
    pub degree: u32,
}

/// Forward orbit of a point, stopping at the indeterminacy set.
#[derive(Debug, Clone)]
pub struct OrbitResult {
    pub orbit: Vec<ProjectivePoint>,
    pub hit: bool,
}

impl BirationalMapDescriptor {
    pub fn degree(&self) -> u32 {
        self.components[0]
            .total_degree()
            .expect("validated descriptor has nonzero components")
    }

    pub fn factor(&self, id: &str) -> Result<&CriticalFactor, MapError> {
        self.critical_factors
            .iter()
            .find(|f| f.id == id)
            .ok_or_else(|| MapError::UnknownFactor(id.to_string()))
    }

    /// Composition with the minimal lift: `P ∘ f̃`.
    pub fn pull_back(&self, p: &MultiPoly) -> Result<MultiPoly, MapError> {
        if !p.is_homogeneous() {
            return Err(MapError::NotHomogeneous);
        }
        Ok(p.substitute(&self.components)?)
    }

    /// Pull-back with all declared factor powers split off.
    ///
    /// The exponents are computed two independent ways — trial division and
    /// the local index on the factor's resolving chart — and must agree.
    pub fn proper_pull_back(
        &self,
        p: &MultiPoly,
        charts: &ChartSet,
    ) -> Result<(MultiPoly, IndexMap<String, u32>), MapError> {
        if p.is_zero() {
            return Err(MapError::Poly(PolyError::ZeroPolynomial));
        }
        let pulled = self.pull_back(p)?;
        let mut remainder = pulled;
        let mut exponents = IndexMap::new();
        for factor in &self.critical_factors {
            let (t, q) = remainder.extract_power(&factor.polynomial)?;
            let chart = charts.get(&factor.chart)?;
            let idx = local_index(chart, p)?;
            if idx != t {
                return Err(MapError::CrossCheckMismatch {
                    factor: factor.id.clone(),
                    division: t,
                    chart: idx,
                });
            }
            exponents.insert(factor.id.clone(), t);
            remainder = q;
        }
        Ok((remainder, exponents))
    }

    /// Brute-force oracle: compose the minimal lift step by step, stripping
    /// the common factor generated by the declared critical polynomials.
    ///
    /// After each step a safety net restricts the components to random
    /// rational lines and certifies that the univariate gcd across them is
    /// constant on at least one line.
    pub fn iterate_minimal(
        &self,
        n: usize,
        rng: &mut impl Rng,
    ) -> Result<MinimalIterate, MapError> {
        if n == 0 {
            return Err(MapError::ZeroIterate);
        }
        let mut current = self.components.clone();
        for step in 2..=n {
            current = current
                .iter()
                .map(|c| c.substitute(&self.components))
                .collect::<Result<_, _>>()?;
            for factor in &self.critical_factors {
                loop {
                    let divided: Vec<Option<MultiPoly>> = current
                        .iter()
                        .map(|c| c.exact_divide(&factor.polynomial))
                        .collect::<Result<_, _>>()?;
                    if divided.iter().all(|q| q.is_some()) {
                        current = divided.into_iter().map(|q| q.unwrap()).collect();
                    } else {
                        break;
                    }
                }
            }
            current = crate::poly::strip_common_content(&current);
            self.assert_no_common_factor(&current, step, rng)?;
        }
        let degree = current[0]
            .total_degree()
            .map_err(MapError::Poly)?;
        Ok(MinimalIterate {
            components: current,
            degree,
        })
    }

    /// Safety net: on 3 random rational lines, certify that the restricted
    /// components have constant gcd on at least one line. Constancy is
    /// certified modulo random word-size primes, which is sound for the
    /// asserted direction.
    fn assert_no_common_factor(
        &self,
        components: &[MultiPoly],
        step: usize,
        rng: &mut impl Rng,
    ) -> Result<(), MapError> {
        let n1 = self.dimension + 1;
        for _ in 0..3 {
            let base: Vec<Rat> = (0..n1)
                .map(|_| Rat::from(BigInt::from(rng.gen_range(-9i64..=9))))
                .collect();
            let mut dir: Vec<Rat> = (0..n1)
                .map(|_| Rat::from(BigInt::from(rng.gen_range(-9i64..=9))))
                .collect();
            if dir.iter().all(|c| c.is_zero()) {
                dir[0] = Rat::one();
            }
            let restricted: Vec<MultiPoly> = components
                .iter()
                .map(|c| c.restrict_to_line(&base, &dir))
                .collect::<Result<_, _>>()?;
            if restricted.iter().any(|r| r.is_zero()) {
                continue; // line degenerate for this component set
            }
            if gcd_is_constant_mod_p(&restricted) {
                return Ok(());
            }
        }
        let degree = components[0].total_degree().map_err(MapError::Poly)?;
        Err(MapError::ResidualCommonFactor { step, degree })
    }

    /// Degrees deg(f^n) for n = 0..=n_max from one oracle run (one
    /// composition pass, recording the degree after each step).
    pub fn minimal_degree_sequence(
        &self,
        n_max: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<u32>, MapError> {
        let mut out = vec![1u32];
        if n_max == 0 {
            return Ok(out);
        }
        let mut current = self.components.clone();
        out.push(self.degree());
        for step in 2..=n_max {
            current = current
                .iter()
                .map(|c| c.substitute(&self.components))
                .collect::<Result<_, _>>()?;
            for factor in &self.critical_factors {
                loop {
                    let divided: Vec<Option<MultiPoly>> = current
                        .iter()
                        .map(|c| c.exact_divide(&factor.polynomial))
                        .collect::<Result<_, _>>()?;
                    if divided.iter().all(|q| q.is_some()) {
                        current = divided.into_iter().map(|q| q.unwrap()).collect();
                    } else {
                        break;
                    }
                }
            }
            current = crate::poly::strip_common_content(&current);
            self.assert_no_common_factor(&current, step, rng)?;
            out.push(current[0].total_degree().map_err(MapError::Poly)?);
        }
        Ok(out)
    }

    /// True iff every component vanishes at the point.
    pub fn indeterminacy_contains(&self, p: &ProjectivePoint) -> Result<bool, MapError> {
        for c in &self.components {
            if !c.evaluate(p.coords())?.is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Factor the Jacobian determinant over the declared critical
    /// polynomials; the residual must be a nonzero constant.
    pub fn verify_critical_factors(&self) -> Result<(IndexMap<String, u32>, Rat), MapError> {
        let det = jacobian_det(&self.components)?;
        let mut exponents = IndexMap::new();
        let mut residual = det;
        for factor in &self.critical_factors {
            let (t, q) = residual.extract_power(&factor.polynomial)?;
            exponents.insert(factor.id.clone(), t);
            residual = q;
        }
        let deg = residual.total_degree().map_err(MapError::Poly)?;
        if deg != 0 {
            return Err(MapError::IncompleteFactorList { degree: deg });
        }
        let scalar = residual
            .leading_term()
            .map(|(_, c)| c.clone())
            .unwrap_or_else(Rat::zero);
        Ok((exponents, scalar))
    }

    /// Check `f̃₋ ∘ f̃₊ = K₊ · id` and that `K₊` factors over the declared
    /// critical polynomials. Returns `K₊`.
    pub fn verify_inverse(&self) -> Result<MultiPoly, MapError> {
        let inverse = self.inverse.as_ref().ok_or(MapError::MissingInverse)?;
        let n1 = self.dimension + 1;
        let composed: Vec<MultiPoly> = inverse
            .iter()
            .map(|c| c.substitute(&self.components))
            .collect::<Result<_, _>>()?;
        let mut k_plus: Option<MultiPoly> = None;
        for (i, comp) in composed.iter().enumerate() {
            let xi = MultiPoly::var(n1, i);
            let q = comp.exact_divide(&xi)?.ok_or(MapError::NotInverse)?;
            match &k_plus {
                None => k_plus = Some(q),
                Some(prev) if *prev == q => {}
                Some(_) => return Err(MapError::NotInverse),
            }
        }
        let k_plus = k_plus.ok_or(MapError::NotInverse)?;
        if k_plus.is_zero() {
            return Err(MapError::NotInverse);
        }
        let d_plus = self.degree();
        let d_minus = inverse[0].total_degree().map_err(MapError::Poly)?;
        let expected = d_plus * d_minus - 1;
        if k_plus.total_degree().map_err(MapError::Poly)? != expected {
            return Err(MapError::NotInverse);
        }
        // K+ must factor over the declared critical polynomials
        let mut residual = k_plus.clone();
        for factor in &self.critical_factors {
            let (_, q) = residual.extract_power(&factor.polynomial)?;
            residual = q;
        }
        let deg = residual.total_degree().map_err(MapError::Poly)?;
        if deg != 0 {
            return Err(MapError::UnexplainedFactor { degree: deg });
        }
        Ok(k_plus)
    }

    /// Compose the lift with a parametrization of `{K = 0}` and check the
    /// image is one point, equal to the declared target.
    pub fn contraction_check(&self, factor_id: &str) -> Result<ProjectivePoint, MapError> {
        let factor = self.factor(factor_id)?;
        let param = match self.parametrizations.get(factor_id) {
            Some(p) => p.clone(),
            None => linear_parametrization(&factor.polynomial).ok_or_else(|| {
                MapError::MissingParametrization {
                    factor: factor_id.to_string(),
                }
            })?,
        };
        let image: Vec<MultiPoly> = self
            .components
            .iter()
            .map(|c| c.substitute(&param))
            .collect::<Result<_, _>>()?;
        // find a parameter value where the image is a usable lift
        let params = param[0].var_count();
        let mut candidate: Option<Vec<Rat>> = None;
        'search: for trial in 0..64i64 {
            let point: Vec<Rat> = (0..params)
                .map(|k| Rat::from(BigInt::from(trial + 2 + k as i64)))
                .collect();
            let values: Vec<Rat> = image
                .iter()
                .map(|c| c.evaluate(&point))
                .collect::<Result<_, _>>()?;
            if values.iter().any(|v| !v.is_zero()) {
                candidate = Some(values);
                break 'search;
            }
        }
        let candidate = candidate.ok_or_else(|| MapError::NotContractedToPoint {
            factor: factor_id.to_string(),
        })?;
        // all 2x2 minors of (image(t), candidate) must vanish identically
        for i in 0..image.len() {
            for j in (i + 1)..image.len() {
                let lhs = image[i].scale(&candidate[j]);
                let rhs = image[j].scale(&candidate[i]);
                if lhs.sub(&rhs)? != MultiPoly::zero(params) {
                    return Err(MapError::NotContractedToPoint {
                        factor: factor_id.to_string(),
                    });
                }
            }
        }
        let found = ProjectivePoint::new(candidate)?;
        if found != factor.target {
            return Err(MapError::TargetMismatch {
                factor: factor_id.to_string(),
                found: found.to_string(),
                declared: factor.target.to_string(),
            });
        }
        Ok(found)
    }

    /// Apply the map to a point; `None` when the point is indeterminate.
    pub fn apply_point(&self, p: &ProjectivePoint) -> Result<Option<ProjectivePoint>, MapError> {
        let values: Vec<Rat> = self
            .components
            .iter()
            .map(|c| c.evaluate(p.coords()))
            .collect::<Result<_, _>>()?;
        if values.iter().all(|v| v.is_zero()) {
            return Ok(None);
        }
        Ok(Some(ProjectivePoint::new(values)?))
    }

    /// Iterate a point until the orbit lands in the indeterminacy set or
    /// `max_steps` images have been taken. The orbit includes the start.
    pub fn orbit_until_indeterminate(
        &self,
        start: &ProjectivePoint,
        max_steps: usize,
    ) -> Result<OrbitResult, MapError> {
        let mut orbit = vec![start.clone()];
        let mut hit = self.indeterminacy_contains(start)?;
        while !hit && orbit.len() <= max_steps {
            match self.apply_point(orbit.last().expect("nonempty"))? {
                None => {
                    hit = true;
                    break;
                }
                Some(next) => {
                    hit = self.indeterminacy_contains(&next)?;
                    orbit.push(next);
                }
            }
        }
        Ok(OrbitResult { orbit, hit })
    }

    /// True iff `num/den` is invariant: `(num ∘ f̃)·den = (den ∘ f̃)·num`.
    pub fn verify_rational_invariant(
        &self,
        num: &MultiPoly,
        den: &MultiPoly,
    ) -> Result<bool, MapError> {
        if num.is_zero() || den.is_zero() || !num.is_homogeneous() || !den.is_homogeneous() {
            return Err(MapError::InvariantShape);
        }
        if num.total_degree().map_err(MapError::Poly)?
            != den.total_degree().map_err(MapError::Poly)?
        {
            return Err(MapError::InvariantShape);
        }
        let lhs = self.pull_back(num)?.mul(den)?;
        let rhs = self.pull_back(den)?.mul(num)?;
        Ok(lhs == rhs)
    }

    /// Structural and semantic validation; runs at fixture load.
    pub fn validate(&self, charts: &ChartSet) -> Result<(), MapError> {
        let n1 = self.dimension + 1;
        if self.components.len() != n1 {
            return Err(MapError::ComponentCount {
                name: self.name.clone(),
                expected: n1,
                got: self.components.len(),
            });
        }
        let degree = self.components[0]
            .total_degree()
            .map_err(|_| MapError::ComponentsNotHomogeneous {
                name: self.name.clone(),
            })?;
        for c in &self.components {
            if c.var_count() != n1
                || !c.is_homogeneous()
                || c.is_zero()
                || c.total_degree().map_err(MapError::Poly)? != degree
            {
                return Err(MapError::ComponentsNotHomogeneous {
                    name: self.name.clone(),
                });
            }
        }
        for factor in &self.critical_factors {
            let all_divide = self
                .components
                .iter()
                .map(|c| c.exact_divide(&factor.polynomial))
                .collect::<Result<Vec<_>, _>>()?
                .iter()
                .all(|q| q.is_some());
            if all_divide {
                return Err(MapError::DeclaredCommonFactor {
                    name: self.name.clone(),
                    factor: factor.id.clone(),
                });
            }
            let chart = charts.get(&factor.chart)?;
            if chart.center != factor.target {
                return Err(MapError::TargetMismatch {
                    factor: factor.id.clone(),
                    found: chart.center.to_string(),
                    declared: factor.target.to_string(),
                });
            }
        }
        self.verify_critical_factors()?;
        for factor in &self.critical_factors {
            self.contraction_check(&factor.id)?;
        }
        if self.inverse.is_some() {
            self.verify_inverse()?;
        }
        Ok(())
    }
}

/// Parametrize a projective line `{a·x + b·y + c·z + ... = 0}` by one affine
/// parameter, pivoting on the first nonzero coefficient. Only linear forms
/// are handled automatically.
fn linear_parametrization(k: &MultiPoly) -> Option<Vec<MultiPoly>> {
    if k.total_degree().ok()? != 1 {
        return None;
    }
    let n1 = k.var_count();
    let mut coeffs = vec![Rat::zero(); n1];
    for (m, c) in k.terms() {
        let var = m.exponents().iter().position(|&e| e == 1)?;
        coeffs[var] = c.clone();
    }
    let pivot = coeffs.iter().position(|c| !c.is_zero())?;
    let others: Vec<usize> = (0..n1).filter(|&i| i != pivot).collect();
    // x_other0 = a_pivot, x_other1 = a_pivot * t, ...; x_pivot balances the sum
    let params = n1 - 2; // affine parameters for a hyperplane in P^N is N-1
    let nparams = params.max(1);
    let mut images = vec![MultiPoly::zero(nparams); n1];
    let mut pivot_val = MultiPoly::zero(nparams);
    for (k_idx, &var) in others.iter().enumerate() {
        let val = if k_idx == 0 {
            MultiPoly::constant(nparams, coeffs[pivot].clone())
        } else {
            MultiPoly::var(nparams, k_idx - 1).scale(&coeffs[pivot])
        };
        images[var] = val.clone();
        pivot_val = pivot_val
            .add(&val.scale(&coeffs[var]))
            .expect("same arity");
    }
    images[pivot] = pivot_val.scale(&(-Rat::one() / &coeffs[pivot]));
    Some(images)
}

/// Certify that the gcd of univariate rational polynomials is constant by
/// reducing modulo random word-size primes. Degree-0 gcd modulo a prime that
/// preserves every leading coefficient implies degree-0 gcd over ℚ.
fn gcd_is_constant_mod_p(polys: &[MultiPoly]) -> bool {
    const PRIMES: [u64; 4] = [
        4611686018427388039,
        4611686018427387847,
        2305843009213693951,
        1152921504606846883,
    ];
    let ints: Vec<Vec<BigInt>> = polys.iter().map(univariate_int_coeffs).collect();
    'prime: for p in PRIMES {
        let mut reduced: Vec<Vec<u64>> = Vec::with_capacity(ints.len());
        for coeffs in &ints {
            let r: Vec<u64> = coeffs.iter().map(|c| mod_p(c, p)).collect();
            match r.last() {
                Some(&lc) if lc != 0 => reduced.push(r),
                _ => continue 'prime, // leading coefficient vanished: unusable prime
            }
        }
        let mut g = reduced[0].clone();
        for r in &reduced[1..] {
            g = gcd_mod_p(&g, r, p);
            if g.len() == 1 {
                return true;
            }
        }
        if g.len() == 1 {
            return true;
        }
    }
    false
}

/// Dense coefficient vector (low to high) of a univariate polynomial, with
/// denominators cleared.
fn univariate_int_coeffs(p: &MultiPoly) -> Vec<BigInt> {
    let deg = p.total_degree().unwrap_or(0) as usize;
    let mut den = BigInt::one();
    for (_, c) in p.terms() {
        den = den.lcm(c.denom());
    }
    let mut out = vec![BigInt::zero(); deg + 1];
    for (m, c) in p.terms() {
        let scaled = c * Rat::from(den.clone());
        out[m.total_degree() as usize] = scaled.numer().clone();
    }
    out
}

fn mod_p(c: &BigInt, p: u64) -> u64 {
    let p_big = BigInt::from(p);
    let mut r = c % &p_big;
    if r.is_negative() {
        r += &p_big;
    }
    let digits = r.iter_u64_digits().next().unwrap_or(0);
    digits
}

fn gcd_mod_p(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mulp = |x: u64, y: u64| ((x as u128 * y as u128) % p as u128) as u64;
    let subp = |x: u64, y: u64| if x >= y { x - y } else { x + p - y };
    let invp = |x: u64| {
        // Fermat inverse
        let mut result = 1u64;
        let mut base = x;
        let mut e = p - 2;
        while e > 0 {
            if e & 1 == 1 {
                result = mulp(result, base);
            }
            base = mulp(base, base);
            e >>= 1;
        }
        result
    };
    let trim = |v: &mut Vec<u64>| {
        while v.len() > 1 && *v.last().unwrap() == 0 {
            v.pop();
        }
    };
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    trim(&mut a);
    trim(&mut b);
    while !(b.len() == 1 && b[0] == 0) {
        // a mod b
        let lb = *b.last().unwrap();
        let ilb = invp(lb);
        while a.len() >= b.len() && !(a.len() == 1 && a[0] == 0) {
            let shift = a.len() - b.len();
            let q = mulp(*a.last().unwrap(), ilb);
            for (i, &bc) in b.iter().enumerate() {
                let t = mulp(q, bc);
                a[i + shift] = subp(a[i + shift], t);
            }
            trim(&mut a);
            if a.len() == 1 && a[0] == 0 {
                break;
            }
            if a.len() < b.len() {
                break;
            }
        }
        std::mem::swap(&mut a, &mut b);
        trim(&mut b);
    }
    a
}

// ---------------------------------------------------------------------------
// JSON form (map descriptor file)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct MapJson {
    pub name: String,
    pub dimension: usize,
    pub variables: Vec<String>,
    pub components: Vec<PolyJson>,
    #[serde(rename = "criticalFactors")]
    pub critical_factors: Vec<CriticalFactorJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inverse: Option<Vec<PolyJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parametrizations: Option<BTreeMap<String, Vec<PolyJson>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CriticalFactorJson {
    pub id: String,
    #[serde(rename = "K")]
    pub k: PolyJson,
    pub target: Vec<String>,
    #[serde(rename = "chartRef")]
    pub chart_ref: String,
}

impl BirationalMapDescriptor {
    pub fn to_json(&self) -> MapJson {
        let names = &self.variables;
        MapJson {
            name: self.name.clone(),
            dimension: self.dimension,
            variables: names.clone(),
            components: self.components.iter().map(|c| c.to_json(names)).collect(),
            critical_factors: self
                .critical_factors
                .iter()
                .map(|f| CriticalFactorJson {
                    id: f.id.clone(),
                    k: f.polynomial.to_json(names),
                    target: f.target.coords().iter().map(format_rat).collect(),
                    chart_ref: f.chart.clone(),
                })
                .collect(),
            inverse: self
                .inverse
                .as_ref()
                .map(|inv| inv.iter().map(|c| c.to_json(names)).collect()),
            parametrizations: if self.parametrizations.is_empty() {
                None
            } else {
                let pnames: Vec<String> =
                    (0..self.dimension.saturating_sub(1).max(1)).map(|i| format!("t{i}")).collect();
                Some(
                    self.parametrizations
                        .iter()
                        .map(|(id, polys)| {
                            (
                                id.clone(),
                                polys.iter().map(|p| p.to_json(&pnames)).collect(),
                            )
                        })
                        .collect(),
                )
            },
        }
    }

    pub fn from_json(json: &MapJson) -> Result<Self, MapError> {
        let poly = |pj: &PolyJson| -> Result<MultiPoly, MapError> {
            Ok(MultiPoly::from_json(pj).map(|(p, _)| p)?)
        };
        let components = json
            .components
            .iter()
            .map(poly)
            .collect::<Result<Vec<_>, _>>()?;
        let critical_factors = json
            .critical_factors
            .iter()
            .map(|fj| {
                let coords: Result<Vec<Rat>, PolyError> =
                    fj.target.iter().map(|s| parse_rat(s)).collect();
                Ok(CriticalFactor {
                    id: fj.id.clone(),
                    polynomial: poly(&fj.k)?,
                    target: ProjectivePoint::new(coords.map_err(MapError::Poly)?)?,
                    chart: fj.chart_ref.clone(),
                })
            })
            .collect::<Result<Vec<_>, MapError>>()?;
        let inverse = match &json.inverse {
            None => None,
            Some(inv) => Some(inv.iter().map(poly).collect::<Result<Vec<_>, _>>()?),
        };
        let parametrizations = match &json.parametrizations {
            None => BTreeMap::new(),
            Some(m) => m
                .iter()
                .map(|(id, polys)| {
                    Ok((
                        id.clone(),
                        polys.iter().map(poly).collect::<Result<Vec<_>, MapError>>()?,
                    ))
                })
                .collect::<Result<BTreeMap<_, _>, MapError>>()?,
        };
        Ok(BirationalMapDescriptor {
            name: json.name.clone(),
            dimension: json.dimension,
            variables: json.variables.clone(),
            components,
            critical_factors,
            inverse,
            parametrizations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    #[test]
    fn projective_point_normalization() {
        let p = ProjectivePoint::from_integers(&[0, 2, -1]).unwrap();
        let q = ProjectivePoint::from_integers(&[0, 4, -2]).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.to_string(), "[0:1:-1/2]");
        assert!(matches!(
            ProjectivePoint::from_integers(&[0, 0, 0]),
            Err(MapError::ZeroPoint)
        ));
    }

    #[test]
    fn linear_parametrization_stays_on_line() {
        let k = parse_poly("y-z", &["x", "y", "z"]).unwrap();
        let param = linear_parametrization(&k).unwrap();
        let composed = k.substitute(&param).unwrap();
        assert!(composed.is_zero());
        let k2 = parse_poly("2*x+4*y+z", &["x", "y", "z"]).unwrap();
        let param2 = linear_parametrization(&k2).unwrap();
        assert!(k2.substitute(&param2).unwrap().is_zero());
    }

    #[test]
    fn modular_gcd_certificate() {
        let t = &["t"];
        let coprime = vec![
            parse_poly("t^2-1", t).unwrap(),
            parse_poly("t^2-t", t).unwrap(),
            parse_poly("t+3", t).unwrap(),
        ];
        assert!(gcd_is_constant_mod_p(&coprime));
        let shared = vec![
            parse_poly("(t-1)*(t+2)", t).unwrap(),
            parse_poly("(t-1)*(t-5)", t).unwrap(),
        ];
        assert!(!gcd_is_constant_mod_p(&shared));
    }
}
