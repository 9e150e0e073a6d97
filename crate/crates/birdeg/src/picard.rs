//! Integer-lattice side: pull-back matrices on the divisor-class group,
//! their powers, eigenvalue-1 classes, and the surface intersection form.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PicardError {
    #[error("basis mismatch: expected {expected} coordinates, got {got}")]
    BasisMismatch { expected: usize, got: usize },
    #[error("matrix must be square with dimension equal to the basis size")]
    BadShape,
    #[error("intersection form is only defined on a surface basis")]
    NotSurface,
    #[error("basis labels must be unique with H first")]
    BadBasis,
}

/// Ordered divisor-class basis: hyperplane class first, then exceptional
/// classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PicardBasis {
    pub labels: Vec<String>,
    /// True when the ambient variety is a surface, enabling the
    /// intersection form diag(1, -1, ..., -1).
    pub surface: bool,
}

impl PicardBasis {
    pub fn new(labels: Vec<String>, surface: bool) -> Result<Self, PicardError> {
        if labels.is_empty() || labels[0] != "H" {
            return Err(PicardError::BadBasis);
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(PicardError::BadBasis);
            }
        }
        Ok(PicardBasis { labels, surface })
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }
}

/// Integer coefficient vector over a [`PicardBasis`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivisorClass {
    pub coeffs: Vec<BigInt>,
}

impl DivisorClass {
    pub fn from_i64(coeffs: &[i64]) -> Self {
        DivisorClass {
            coeffs: coeffs.iter().map(|&c| BigInt::from(c)).collect(),
        }
    }

    pub fn zero(rank: usize) -> Self {
        DivisorClass {
            coeffs: vec![BigInt::zero(); rank],
        }
    }
}

/// The matrix of the induced pull-back action in a [`PicardBasis`],
/// acting on divisor-class coordinate vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PicardMatrix {
    pub basis: PicardBasis,
    pub matrix: Vec<Vec<i64>>,
}

impl PicardMatrix {
    pub fn new(basis: PicardBasis, matrix: Vec<Vec<i64>>) -> Result<Self, PicardError> {
        let n = basis.rank();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(PicardError::BadShape);
        }
        Ok(PicardMatrix { basis, matrix })
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    /// `(H, H)` entry of the n-th power; the identity for `n = 0`.
    pub fn power_hh_entry(&self, n: u64) -> BigInt {
        let m = self.power(n);
        m[0][0].clone()
    }

    /// Exact n-th power by iterated squaring over `BigInt`.
    pub fn power(&self, n: u64) -> Vec<Vec<BigInt>> {
        let dim = self.rank();
        let mut result = identity_bigint(dim);
        let mut base: Vec<Vec<BigInt>> = self
            .matrix
            .iter()
            .map(|r| r.iter().map(|&c| BigInt::from(c)).collect())
            .collect();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = mat_mul(&result, &base);
            }
            n >>= 1;
            if n > 0 {
                base = mat_mul(&base, &base);
            }
        }
        result
    }

    pub fn apply_to_class(&self, v: &DivisorClass) -> Result<DivisorClass, PicardError> {
        let n = self.rank();
        if v.coeffs.len() != n {
            return Err(PicardError::BasisMismatch {
                expected: n,
                got: v.coeffs.len(),
            });
        }
        let coeffs = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| BigInt::from(self.matrix[i][j]) * &v.coeffs[j])
                    .sum()
            })
            .collect();
        Ok(DivisorClass { coeffs })
    }

    /// Primitive integer generators of the eigenvalue-1 eigenspace, rows of
    /// the Hermite normal form of the rational kernel of `M - I`.
    pub fn fixed_classes(&self) -> Vec<DivisorClass> {
        let n = self.rank();
        let mut m: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut v = BigRational::from(BigInt::from(self.matrix[i][j]));
                        if i == j {
                            v -= BigRational::one();
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        let kernel = rational_kernel(&mut m);
        if kernel.is_empty() {
            return Vec::new();
        }
        let rows: Vec<Vec<BigInt>> = kernel.iter().map(|v| primitive_integer(v)).collect();
        hermite_rows(rows)
            .into_iter()
            .map(|coeffs| DivisorClass { coeffs })
            .collect()
    }

    /// Intersection product `a · b` with the surface form
    /// diag(1, -1, ..., -1).
    pub fn intersection_product(
        basis: &PicardBasis,
        a: &DivisorClass,
        b: &DivisorClass,
    ) -> Result<BigInt, PicardError> {
        if !basis.surface {
            return Err(PicardError::NotSurface);
        }
        let n = basis.rank();
        if a.coeffs.len() != n || b.coeffs.len() != n {
            return Err(PicardError::BasisMismatch {
                expected: n,
                got: a.coeffs.len().min(b.coeffs.len()),
            });
        }
        let mut acc = &a.coeffs[0] * &b.coeffs[0];
        for i in 1..n {
            acc -= &a.coeffs[i] * &b.coeffs[i];
        }
        Ok(acc)
    }

    /// True iff the matrix preserves the surface intersection form:
    /// `Mᵀ J M = J`.
    pub fn orthogonality_check(&self) -> Result<bool, PicardError> {
        if !self.basis.surface {
            return Err(PicardError::NotSurface);
        }
        let n = self.rank();
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0i128;
                for k in 0..n {
                    let sign = if k == 0 { 1i128 } else { -1 };
                    acc += sign * self.matrix[k][i] as i128 * self.matrix[k][j] as i128;
                }
                let expect = if i != j {
                    0
                } else if i == 0 {
                    1
                } else {
                    -1
                };
                if acc != expect {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn identity_bigint(n: usize) -> Vec<Vec<BigInt>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                .collect()
        })
        .collect()
}

fn mat_mul(a: &[Vec<BigInt>], b: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| &a[i][k] * &b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Basis of the kernel of a rational matrix (destroys the input).
fn rational_kernel(m: &mut [Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut rank = 0usize;
    for col in 0..cols {
        let Some(pivot_row) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot_row);
        let inv = BigRational::one() / m[rank][col].clone();
        for c in col..cols {
            m[rank][c] = &m[rank][c] * &inv;
        }
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let factor = m[r][col].clone();
                for c in col..cols {
                    let sub = &factor * &m[rank][c];
                    m[r][c] = &m[r][c] - &sub;
                }
            }
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
    }
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_of_col[free].is_some() {
            continue;
        }
        let mut v = vec![BigRational::zero(); cols];
        v[free] = BigRational::one();
        for col in 0..cols {
            if let Some(prow) = pivot_of_col[col] {
                v[col] = -m[prow][free].clone();
            }
        }
        basis.push(v);
    }
    basis
}

/// Clear denominators and divide by the gcd; orient so the first nonzero
/// entry is positive.
fn primitive_integer(v: &[BigRational]) -> Vec<BigInt> {
    let mut den = BigInt::one();
    for c in v {
        den = den.lcm(c.denom());
    }
    let mut out: Vec<BigInt> = v
        .iter()
        .map(|c| {
            let s = c * BigRational::from(den.clone());
            s.numer().clone()
        })
        .collect();
    let mut g = BigInt::zero();
    for c in &out {
        g = g.gcd(c);
    }
    if !g.is_zero() && !g.is_one() {
        for c in &mut out {
            *c /= &g;
        }
    }
    if let Some(first) = out.iter().find(|c| !c.is_zero()) {
        if first.is_negative() {
            for c in &mut out {
                *c = -c.clone();
            }
        }
    }
    out
}

/// Row-style Hermite normal form of a full-rank set of integer rows; rows
/// come out in pivot order with positive pivots and reduced entries above.
fn hermite_rows(mut rows: Vec<Vec<BigInt>>) -> Vec<Vec<BigInt>> {
    if rows.is_empty() {
        return rows;
    }
    let cols = rows[0].len();
    let mut row = 0usize;
    for col in 0..cols {
        if row >= rows.len() {
            break;
        }
        // gcd-reduce entries of this column below `row`
        loop {
            let mut idx: Option<usize> = None;
            for r in row..rows.len() {
                if !rows[r][col].is_zero()
                    && (idx.is_none()
                        || rows[r][col].abs() < rows[idx.unwrap()][col].abs())
                {
                    idx = Some(r);
                }
            }
            let Some(min_r) = idx else {
                break;
            };
            rows.swap(row, min_r);
            let mut done = true;
            for r in (row + 1)..rows.len() {
                if rows[r][col].is_zero() {
                    continue;
                }
                let q = floor_div(&rows[r][col], &rows[row][col]);
                for c in 0..cols {
                    let sub = &q * &rows[row][c];
                    rows[r][c] -= sub;
                }
                if !rows[r][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if rows[row][col].is_zero() {
            continue;
        }
        if rows[row][col].is_negative() {
            for c in 0..cols {
                rows[row][c] = -rows[row][c].clone();
            }
        }
        // reduce the rows above
        for r in 0..row {
            let q = floor_div(&rows[r][col], &rows[row][col]);
            if !q.is_zero() {
                for c in 0..cols {
                    let sub = &q * &rows[row][c];
                    rows[r][c] -= sub;
                }
            }
        }
        row += 1;
    }
    rows
}

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

// ---------------------------------------------------------------------------
// JSON form (Picard fixture file)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PicardJson {
    pub basis: Vec<String>,
    pub matrix: Vec<Vec<i64>>,
    pub surface: bool,
    #[serde(rename = "knownFixedClasses")]
    pub known_fixed_classes: Vec<Vec<i64>>,
}

impl PicardMatrix {
    pub fn to_json(&self, known_fixed_classes: &[Vec<i64>]) -> PicardJson {
        PicardJson {
            basis: self.basis.labels.clone(),
            matrix: self.matrix.clone(),
            surface: self.basis.surface,
            known_fixed_classes: known_fixed_classes.to_vec(),
        }
    }

    pub fn from_json(json: &PicardJson) -> Result<Self, PicardError> {
        PicardMatrix::new(
            PicardBasis::new(json.basis.clone(), json.surface)?,
            json.matrix.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(n: usize) -> PicardBasis {
        let mut labels = vec!["H".to_string()];
        for i in 1..n {
            labels.push(format!("E{i}"));
        }
        PicardBasis::new(labels, true).unwrap()
    }

    #[test]
    fn hh_powers_of_small_matrix() {
        let m = PicardMatrix::new(basis(2), vec![vec![2, 1], vec![-1, 0]]).unwrap();
        assert_eq!(m.power_hh_entry(0), BigInt::from(1));
        assert_eq!(m.power_hh_entry(7), BigInt::from(8));
        for n in 0..=50u64 {
            assert_eq!(m.power_hh_entry(n), BigInt::from(n + 1));
        }
    }

    #[test]
    fn apply_and_zero() {
        let m = PicardMatrix::new(basis(2), vec![vec![2, 1], vec![-1, 0]]).unwrap();
        let z = DivisorClass::zero(2);
        assert_eq!(m.apply_to_class(&z).unwrap(), z);
        let v = DivisorClass::from_i64(&[1, 0]);
        assert_eq!(m.apply_to_class(&v).unwrap(), DivisorClass::from_i64(&[2, -1]));
        assert!(matches!(
            m.apply_to_class(&DivisorClass::zero(3)),
            Err(PicardError::BasisMismatch { .. })
        ));
    }

    #[test]
    fn fixed_classes_identity_and_shear() {
        let id = PicardMatrix::new(basis(3), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]])
            .unwrap();
        let fixed = id.fixed_classes();
        assert_eq!(fixed.len(), 3);
        let m = PicardMatrix::new(basis(2), vec![vec![2, 1], vec![-1, 0]]).unwrap();
        let fixed = m.fixed_classes();
        assert_eq!(fixed.len(), 1);
        assert_eq!(fixed[0], DivisorClass::from_i64(&[1, -1]));
    }

    #[test]
    fn intersection_form() {
        let b = basis(3);
        let h = DivisorClass::from_i64(&[1, 0, 0]);
        let e1 = DivisorClass::from_i64(&[0, 1, 0]);
        let e2 = DivisorClass::from_i64(&[0, 0, 1]);
        assert_eq!(PicardMatrix::intersection_product(&b, &h, &h).unwrap(), BigInt::from(1));
        assert_eq!(PicardMatrix::intersection_product(&b, &e1, &e2).unwrap(), BigInt::zero());
        assert_eq!(
            PicardMatrix::intersection_product(&b, &e1, &e1).unwrap(),
            BigInt::from(-1)
        );
        let nb = PicardBasis::new(vec!["H".into(), "E1".into()], false).unwrap();
        assert!(matches!(
            PicardMatrix::intersection_product(&nb, &DivisorClass::from_i64(&[1, 0]), &DivisorClass::from_i64(&[1, 0])),
            Err(PicardError::NotSurface)
        ));
    }

    #[test]
    fn orthogonality_small_cases() {
        let not_orth = PicardMatrix::new(basis(2), vec![vec![2, 1], vec![-1, 0]]).unwrap();
        assert!(!not_orth.orthogonality_check().unwrap());
        let id = PicardMatrix::new(basis(2), vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert!(id.orthogonality_check().unwrap());
    }

    #[test]
    fn hermite_rows_canonicalizes() {
        let rows = vec![
            vec![BigInt::from(2), BigInt::from(4), BigInt::from(2)],
            vec![BigInt::from(1), BigInt::from(3), BigInt::from(1)],
        ];
        let h = hermite_rows(rows);
        assert_eq!(h[0][0], BigInt::from(1));
        assert!(h[1][0].is_zero());
    }
}
