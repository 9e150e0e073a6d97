//! The degree-sequence engine: proper-pull-back iteration of a generic
//! linear form with exact index tracking, recurrence systems, closed forms,
//! characteristic polynomials, and dynamical degrees.

use indexmap::IndexMap;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blowup::{local_index, BlowupError, ChartSet};
use crate::poly::{univariate_gcd, MultiPoly, PolyError, Rat};
use crate::ratmap::{BirationalMapDescriptor, MapError, ProjectivePoint};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("tracked charts must include every critical-factor chart (missing {0})")]
    MissingCriticalChart(String),
    #[error(
        "degree identity violated at step {step}: got {got}, expected \
         d+*deg(P) - sum nu_i*deg(K_i) = {expected}"
    )]
    DegreeIdentity { step: usize, got: u32, expected: i64 },
    #[error("pull-back at step {step} is not divisible by the declared factor powers")]
    DivisionFailed { step: usize },
    #[error("residual at step {step} still divisible by factor {factor}")]
    ResidualDivisible { step: usize, factor: String },
    #[error("could not draw a generic start form after {attempts} attempts")]
    NonGenericStart { attempts: usize },
    #[error("recurrence dimension mismatch: state has {got}, system has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("no closed form registered for fixture {0}")]
    UnknownFixture(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Blowup(#[from] BlowupError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// One row of the index iteration: the iterate number, the degree, the
/// tracked chart indices, and the proper pull-back itself.
#[derive(Debug, Clone)]
pub struct DegreeIndexState {
    pub n: usize,
    pub d: u32,
    pub nu: IndexMap<String, u32>,
    pub p: MultiPoly,
}

/// Linear recurrence with integer matrix acting on a labelled state vector
/// (degree first, then indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecurrenceSystem {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<i64>>,
    #[serde(rename = "initialState")]
    pub initial: Vec<i64>,
}

impl RecurrenceSystem {
    pub fn dimension(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let n = self.labels.len();
        if self.matrix.len() != n
            || self.matrix.iter().any(|r| r.len() != n)
            || self.initial.len() != n
        {
            return Err(DynamicsError::Dimension {
                expected: n,
                got: self.matrix.len(),
            });
        }
        Ok(())
    }

    /// One step of the recurrence: matrix · state.
    pub fn step(&self, state: &[BigInt]) -> Result<Vec<BigInt>, DynamicsError> {
        let n = self.dimension();
        if state.len() != n {
            return Err(DynamicsError::Dimension {
                expected: n,
                got: state.len(),
            });
        }
        Ok((0..n)
            .map(|i| {
                (0..n)
                    .map(|j| BigInt::from(self.matrix[i][j]) * &state[j])
                    .sum()
            })
            .collect())
    }

    /// State after `n` steps from the initial vector, via iterated squaring
    /// of the matrix.
    pub fn power(&self, n: u64) -> Result<Vec<BigInt>, DynamicsError> {
        self.validate()?;
        let dim = self.dimension();
        let mut result: Vec<Vec<BigInt>> = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                    .collect()
            })
            .collect();
        let mut base: Vec<Vec<BigInt>> = self
            .matrix
            .iter()
            .map(|r| r.iter().map(|&c| BigInt::from(c)).collect())
            .collect();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = mul_big(&result, &base);
            }
            n >>= 1;
            if n > 0 {
                base = mul_big(&base, &base);
            }
        }
        let init: Vec<BigInt> = self.initial.iter().map(|&c| BigInt::from(c)).collect();
        Ok((0..dim)
            .map(|i| (0..dim).map(|j| &result[i][j] * &init[j]).sum())
            .collect())
    }

    /// Degree sequence (first state component) for n = 0..=n_max.
    pub fn degree_sequence(&self, n_max: usize) -> Result<Vec<BigInt>, DynamicsError> {
        self.validate()?;
        let mut state: Vec<BigInt> = self.initial.iter().map(|&c| BigInt::from(c)).collect();
        let mut out = vec![state[0].clone()];
        for _ in 0..n_max {
            state = self.step(&state)?;
            out.push(state[0].clone());
        }
        Ok(out)
    }
}

fn mul_big(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| &a[i][k] * &b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Method used to produce a degree sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Oracle,
    Indices,
    Recurrence,
    Picard,
    ClosedForm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Indices => "indices",
            Method::Recurrence => "recurrence",
            Method::Picard => "picard",
            Method::ClosedForm => "closed-form",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "oracle" => Some(Method::Oracle),
            "indices" => Some(Method::Indices),
            "recurrence" => Some(Method::Recurrence),
            "picard" => Some(Method::Picard),
            "closed-form" => Some(Method::ClosedForm),
            _ => None,
        }
    }
}

/// Degree sequence produced by one method, with run metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegreeSequenceReport {
    pub method: Method,
    pub values: Vec<i64>,
    pub meta: IndexMap<String, String>,
}

/// Core iteration: starting from `p0`, repeatedly split the pull-back into
/// declared factor powers and the proper pull-back, recording the tracked
/// chart indices of every iterate.
///
/// The degree identity `deg P_{n+1} = d·deg P_n − Σ ν_i·deg K_i` is asserted
/// at every step, and the residual is checked not divisible by any factor.
pub fn iterate_indices(
    map: &BirationalMapDescriptor,
    charts: &ChartSet,
    tracked: &[String],
    p0: &MultiPoly,
    n_max: usize,
) -> Result<Vec<DegreeIndexState>, DynamicsError> {
    for f in &map.critical_factors {
        if !tracked.iter().any(|t| *t == f.chart) {
            return Err(DynamicsError::MissingCriticalChart(f.chart.clone()));
        }
    }
    let mut states = Vec::with_capacity(n_max + 1);
    let mut current = p0.clone();
    for n in 0..=n_max {
        let d = current.total_degree().map_err(DynamicsError::Poly)?;
        let mut nu = IndexMap::new();
        for chart_id in tracked {
            let chart = charts.get(chart_id)?;
            nu.insert(chart_id.clone(), local_index(chart, &current)?);
        }
        states.push(DegreeIndexState {
            n,
            d,
            nu: nu.clone(),
            p: current.clone(),
        });
        if n == n_max {
            break;
        }
        let pulled = map.pull_back(&current)?;
        let mut residual = pulled;
        let mut drop: i64 = 0;
        for factor in &map.critical_factors {
            let exponent = *nu
                .get(&factor.chart)
                .expect("tracked includes every critical chart");
            let deg_k = factor
                .polynomial
                .total_degree()
                .map_err(DynamicsError::Poly)? as i64;
            drop += exponent as i64 * deg_k;
            // one factor power at a time keeps the divisor small
            for _ in 0..exponent {
                residual = residual
                    .exact_divide(&factor.polynomial)?
                    .ok_or(DynamicsError::DivisionFailed { step: n })?;
            }
            // the residual must carry no further power of this factor
            if residual.exact_divide(&factor.polynomial)?.is_some() {
                return Err(DynamicsError::ResidualDivisible {
                    step: n,
                    factor: factor.id.clone(),
                });
            }
        }
        let expected = map.degree() as i64 * d as i64 - drop;
        let got = residual.total_degree().map_err(DynamicsError::Poly)?;
        if got as i64 != expected {
            return Err(DynamicsError::DegreeIdentity {
                step: n,
                got,
                expected,
            });
        }
        // iterates are only defined up to scalar; keeping them primitive
        // stops coefficient growth without touching degrees or indices
        current = residual.primitive_part();
    }
    Ok(states)
}

/// Points a generic start form must avoid: every declared contraction
/// target together with its forward orbit.
pub fn exclusion_points(
    map: &BirationalMapDescriptor,
    horizon: usize,
) -> Result<Vec<ProjectivePoint>, DynamicsError> {
    let mut out: Vec<ProjectivePoint> = Vec::new();
    for factor in &map.critical_factors {
        let orbit = map.orbit_until_indeterminate(&factor.target, horizon)?;
        for pt in orbit.orbit {
            if !out.contains(&pt) {
                out.push(pt);
            }
        }
    }
    Ok(out)
}

/// Draw a random linear form with integer coefficients in [-9, 9] that does
/// not vanish at any excluded point.
pub fn draw_generic_linear(
    map: &BirationalMapDescriptor,
    excluded: &[ProjectivePoint],
    rng: &mut impl Rng,
) -> Result<MultiPoly, DynamicsError> {
    let n1 = map.dimension + 1;
    'attempt: for _ in 0..1000 {
        let coeffs: Vec<i64> = (0..n1).map(|_| rng.gen_range(-9i64..=9)).collect();
        if coeffs.iter().all(|&c| c == 0) {
            continue;
        }
        let p = MultiPoly::from_terms(
            n1,
            coeffs.iter().enumerate().map(|(i, &c)| {
                let mut e = vec![0u32; n1];
                e[i] = 1;
                (e, Rat::from(BigInt::from(c)))
            }),
        );
        for pt in excluded {
            if p.evaluate(pt.coords())?.is_zero() {
                continue 'attempt;
            }
        }
        return Ok(p);
    }
    Err(DynamicsError::NonGenericStart { attempts: 1000 })
}

/// Driver: draw a generic start form (retrying on a zero composition up to
/// 5 times) and run the index iteration.
pub fn run_index_iteration(
    map: &BirationalMapDescriptor,
    charts: &ChartSet,
    tracked: &[String],
    n_max: usize,
    rng: &mut impl Rng,
) -> Result<(MultiPoly, Vec<DegreeIndexState>), DynamicsError> {
    let excluded = exclusion_points(map, n_max + 2)?;
    let mut last_err = None;
    for _ in 0..5 {
        let p0 = draw_generic_linear(map, &excluded, rng)?;
        match iterate_indices(map, charts, tracked, &p0, n_max) {
            Ok(states) => return Ok((p0, states)),
            Err(DynamicsError::Blowup(BlowupError::ZeroComposition { .. })) => {
                last_err = Some(DynamicsError::NonGenericStart { attempts: 5 });
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(DynamicsError::NonGenericStart { attempts: 5 }))
}

/// True iff `Σ coeffs[i] · values[k - i] = 0` at every admissible offset.
pub fn scalar_recurrence_check(coeffs: &[i64], values: &[i64]) -> bool {
    if values.len() <= coeffs.len() {
        return false;
    }
    for k in (coeffs.len() - 1)..values.len() {
        let mut acc: i128 = 0;
        for (i, &c) in coeffs.iter().enumerate() {
            acc += c as i128 * values[k - i] as i128;
        }
        if acc != 0 {
            return false;
        }
    }
    true
}

/// Exact characteristic polynomial det(λI − M), coefficients low to high,
/// by the trace recursion over rationals.
pub fn char_poly(matrix: &[Vec<i64>]) -> Vec<BigInt> {
    let n = matrix.len();
    assert!(matrix.iter().all(|r| r.len() == n), "square matrix required");
    let m: Vec<Vec<BigRational>> = matrix
        .iter()
        .map(|r| {
            r.iter()
                .map(|&c| BigRational::from(BigInt::from(c)))
                .collect()
        })
        .collect();
    // Faddeev-LeVerrier: M_1 = M, c_{n-1} = -tr(M_1);
    // M_{k+1} = M (M_k + c_{n-k} I), c_{n-k-1} = -tr(M_{k+1}) / (k+1)
    let mut coeffs = vec![BigRational::zero(); n + 1];
    coeffs[n] = BigRational::one();
    let mut mk = m.clone();
    for k in 1..=n {
        let tr: BigRational = (0..n).map(|i| mk[i][i].clone()).sum();
        let ck = -tr / BigRational::from(BigInt::from(k as i64));
        coeffs[n - k] = ck.clone();
        if k == n {
            break;
        }
        let mut shifted = mk.clone();
        for i in 0..n {
            shifted[i][i] = &shifted[i][i] + &ck;
        }
        mk = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|l| &m[i][l] * &shifted[l][j]).sum())
                    .collect()
            })
            .collect();
    }
    coeffs
        .into_iter()
        .map(|c| {
            assert!(c.denom().is_one(), "characteristic polynomial is integral");
            c.numer().clone()
        })
        .collect()
}

/// Dynamical-degree report: the numeric largest nonnegative real root of
/// the characteristic polynomial, the exact factor description, the final
/// rational bracket, and the empirical degree-ratio tail when a sequence
/// is supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicalDegree {
    pub numeric: f64,
    pub exact: String,
    pub bracket: (String, String),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_tail: Option<f64>,
}

/// Largest real root of det(λI − M) on [0, ∞), bisected with rational
/// endpoints to width 1e-12 via Sturm counts on the square-free part.
pub fn dynamical_degree(matrix: &[Vec<i64>], sequence: Option<&[i64]>) -> DynamicalDegree {
    let cp = char_poly(matrix);
    let p = ints_to_unipoly(&cp);
    let dp = p.derivative(0);
    let gcd = univariate_gcd(&p, &dp).expect("univariate");
    let squarefree = if gcd.total_degree().unwrap_or(0) == 0 {
        p.clone()
    } else {
        p.exact_divide(&gcd)
            .expect("univariate division")
            .expect("gcd divides")
    };
    let chain = sturm_chain(&squarefree);
    // Cauchy bound for a monic-normalized polynomial
    let bound = root_bound(&cp);
    let zero = BigRational::zero();
    let total = sturm_count(&chain, &zero, &bound);
    let report_poly = format_unipoly(&cp);
    let empirical_tail = sequence.and_then(|s| {
        if s.len() >= 2 && s[s.len() - 2] != 0 {
            Some(s[s.len() - 1] as f64 / s[s.len() - 2] as f64)
        } else {
            None
        }
    });
    if total == 0 {
        // no nonnegative real root: degenerate; root at 0 iff constant term 0
        let numeric = if cp[0].is_zero() { 0.0 } else { f64::NAN };
        return DynamicalDegree {
            numeric,
            exact: format!("no nonnegative real root of {report_poly}"),
            bracket: ("0".into(), "0".into()),
            empirical_tail,
        };
    }
    let mut lo = zero;
    let mut hi = bound;
    let eps = BigRational::new(BigInt::one(), BigInt::from(10u64).pow(12));
    // keep the invariant: at least one root in [lo, hi]
    while (&hi - &lo) > eps {
        let mid = (&lo + &hi) / BigRational::from(BigInt::from(2));
        if sturm_count(&chain, &mid, &hi) > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // an exact integer root adjacent to the bracket is reported exactly
    let approx = rat_to_f64(&hi);
    let nearest = approx.round();
    let exact = if nearest >= 0.0 && (approx - nearest).abs() < 1e-6 {
        let r = BigInt::from(nearest as i64);
        if eval_int_poly(&cp, &r).is_zero() {
            let sign = if nearest as i64 >= 0 { "-" } else { "+" };
            format!("factor λ {} {} of {}", sign, (nearest as i64).abs(), report_poly)
        } else {
            format!("root of {report_poly} in the reported bracket")
        }
    } else {
        format!("root of {report_poly} in the reported bracket")
    };
    let numeric = if exact.starts_with("factor") {
        nearest
    } else {
        (rat_to_f64(&lo) + rat_to_f64(&hi)) / 2.0
    };
    DynamicalDegree {
        numeric,
        exact,
        bracket: (format_rat_short(&lo), format_rat_short(&hi)),
        empirical_tail,
    }
}

fn ints_to_unipoly(coeffs: &[BigInt]) -> MultiPoly {
    MultiPoly::from_terms(
        1,
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(e, c)| (vec![e as u32], BigRational::from(c.clone()))),
    )
}

fn eval_int_poly(coeffs: &[BigInt], x: &BigInt) -> BigInt {
    let mut acc = BigInt::zero();
    for c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

fn root_bound(coeffs: &[BigInt]) -> BigRational {
    let lead = coeffs.last().expect("nonempty").clone();
    let mut max = BigRational::zero();
    for c in &coeffs[..coeffs.len() - 1] {
        let r = BigRational::new(c.abs(), lead.abs());
        if r > max {
            max = r;
        }
    }
    max + BigRational::one()
}

fn sturm_chain(p: &MultiPoly) -> Vec<MultiPoly> {
    let mut chain = vec![p.clone(), p.derivative(0)];
    loop {
        let len = chain.len();
        if chain[len - 1].is_zero() {
            chain.pop();
            break;
        }
        let (_, r) = chain[len - 2]
            .univariate_divmod(&chain[len - 1])
            .expect("univariate");
        if r.is_zero() {
            break;
        }
        chain.push(r.neg());
    }
    chain
}

fn sign_changes(chain: &[MultiPoly], x: &BigRational) -> usize {
    let mut last: Option<bool> = None;
    let mut changes = 0;
    for p in chain {
        let v = p.evaluate(std::slice::from_ref(x)).expect("univariate");
        if v.is_zero() {
            continue;
        }
        let pos = v.is_positive();
        if let Some(prev) = last {
            if prev != pos {
                changes += 1;
            }
        }
        last = Some(pos);
    }
    changes
}

/// Number of distinct real roots in (a, b].
fn sturm_count(chain: &[MultiPoly], a: &BigRational, b: &BigRational) -> usize {
    sign_changes(chain, a).saturating_sub(sign_changes(chain, b))
}

fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn format_rat_short(r: &BigRational) -> String {
    format!("{:.15}", rat_to_f64(r))
}

fn format_unipoly(coeffs: &[BigInt]) -> String {
    let mut parts = Vec::new();
    for (e, c) in coeffs.iter().enumerate().rev() {
        if c.is_zero() {
            continue;
        }
        let mag = c.abs();
        let body = match e {
            0 => format!("{mag}"),
            1 if mag.is_one() => "λ".to_string(),
            1 => format!("{mag}λ"),
            _ if mag.is_one() => format!("λ^{e}"),
            _ => format!("{mag}λ^{e}"),
        };
        if parts.is_empty() {
            parts.push(if c.is_negative() {
                format!("-{body}")
            } else {
                body
            });
        } else {
            parts.push(format!("{} {}", if c.is_negative() { "-" } else { "+" }, body));
        }
    }
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" ")
    }
}

/// Closed-form degree laws registered for the builtin fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosedForm {
    /// (3n² + parity correction)/4-type quasi-polynomial with period 2.
    QuasiQuadraticPeriod2,
    /// (6n² − 2cos(2πn/3) + 11)/9 with the cosine resolved by n mod 3.
    QuasiQuadraticPeriod3,
    /// n + 1.
    LinearPlusOne,
    /// 2^n.
    Doubling,
}

impl ClosedForm {
    pub fn eval(self, n: u64) -> BigInt {
        let n2 = BigInt::from(n) * BigInt::from(n);
        match self {
            ClosedForm::QuasiQuadraticPeriod2 => {
                // 3n²/4 + (9 + (−1)^{n+1})/8 = (3n² + 4)/4 for even n,
                // (3n² + 5)/4 for odd n; both divisions exact
                let add = if n % 2 == 0 { 4 } else { 5 };
                (BigInt::from(3) * n2 + BigInt::from(add)) / BigInt::from(4)
            }
            ClosedForm::QuasiQuadraticPeriod3 => {
                // (6n² − 2cos(2πn/3) + 11)/9 with 2cos = 2 for n ≡ 0 (mod 3)
                // and −1 otherwise; both divisions exact
                let add = if n % 3 == 0 { 9 } else { 12 };
                (BigInt::from(6) * n2 + BigInt::from(add)) / BigInt::from(9)
            }
            ClosedForm::LinearPlusOne => BigInt::from(n + 1),
            ClosedForm::Doubling => BigInt::from(2u8).pow(n as u32),
        }
    }

    pub fn check(self, values: &[i64]) -> bool {
        values
            .iter()
            .enumerate()
            .all(|(n, &v)| self.eval(n as u64) == BigInt::from(v))
    }
}

/// Evaluate the registered closed form of a fixture against a value list.
pub fn closed_form_check(
    form: Option<ClosedForm>,
    fixture_id: &str,
    values: &[i64],
) -> Result<bool, DynamicsError> {
    let form = form.ok_or_else(|| DynamicsError::UnknownFixture(fixture_id.to_string()))?;
    Ok(form.check(values))
}
