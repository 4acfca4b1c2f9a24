//! Dense ownership matrices and the ℓ¹ utilities built on them.
//!
//! Entry `(i, j)` is the fraction of entity `j` owned by firm `i`, so column
//! sums are the total fraction of `j` held inside the group.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Result, XosError};

/// Default margin for the strict column-sum check: a column passes when its
/// sum is at most `1 - DEFAULT_STRICT_MARGIN`.
pub const DEFAULT_STRICT_MARGIN: f64 = 1e-9;

/// Which column-sum constraint a matrix must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Every column sum strictly below one. Used for equity and liability ownership.
    StrictSubstochastic,
    /// Every column sum at most one. Used for exogenous-asset ownership.
    ColumnBounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OwnershipMatrix {
    rows: usize,
    cols: usize,
    // row-major
    data: Vec<f64>,
}

impl OwnershipMatrix {
    /// Builds a matrix from row-major data. Entries must be finite; range
    /// constraints are left to [`validate_ownership`].
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(XosError::DimensionMismatch {
                what: "matrix data".into(),
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(XosError::NonFinite("matrix entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(XosError::DimensionMismatch {
                    what: "matrix row length".into(),
                    expected: n_cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(n_rows, n_cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[f64]>::to_vec).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols.max(1)).take(self.rows) {
            for (s, &x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    /// `out += self · x`
    pub fn mul_vec_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks(self.cols.max(1))) {
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_add(x, &mut out);
        out
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// A single constraint violation found by [`validate_ownership`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeEntry { row: usize, col: usize, value: f64 },
    EntryAboveOne { row: usize, col: usize, value: f64 },
    /// Column sum not strictly below one (beyond the margin).
    ColumnSumNotStrict { col: usize, sum: f64 },
    /// Column sum above one.
    ColumnSumAboveOne { col: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NegativeEntry { row, col, value } => {
                write!(f, "negative entry {value} at ({row}, {col})")
            }
            Violation::EntryAboveOne { row, col, value } => {
                write!(f, "entry {value} above 1 at ({row}, {col})")
            }
            Violation::ColumnSumNotStrict { col, sum } => {
                write!(f, "column {col} sums to {sum}, must be < 1")
            }
            Violation::ColumnSumAboveOne { col, sum } => {
                write!(f, "column {col} sums to {sum}, must be <= 1")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Column indices flagged by a column-sum violation.
    pub fn flagged_columns(&self) -> Vec<usize> {
        self.violations
            .iter()
            .filter_map(|v| match *v {
                Violation::ColumnSumNotStrict { col, .. } | Violation::ColumnSumAboveOne { col, .. } => {
                    Some(col)
                }
                _ => None,
            })
            .collect()
    }
}

/// Checks `matrix` against `kind` with the default strictness margin.
pub fn validate_ownership(matrix: &OwnershipMatrix, kind: MatrixKind) -> ValidationReport {
    validate_ownership_with(matrix, kind, DEFAULT_STRICT_MARGIN)
}

pub fn validate_ownership_with(
    matrix: &OwnershipMatrix,
    kind: MatrixKind,
    strict_margin: f64,
) -> ValidationReport {
    let mut violations = Vec::new();
    for row in 0..matrix.rows() {
        for col in 0..matrix.cols() {
            let value = matrix.get(row, col);
            if value < 0.0 {
                violations.push(Violation::NegativeEntry { row, col, value });
            } else if value > 1.0 {
                violations.push(Violation::EntryAboveOne { row, col, value });
            }
        }
    }
    for (col, sum) in matrix.column_sums().into_iter().enumerate() {
        match kind {
            MatrixKind::StrictSubstochastic if sum > 1.0 - strict_margin => {
                violations.push(Violation::ColumnSumNotStrict { col, sum });
            }
            MatrixKind::ColumnBounded if sum > 1.0 => {
                violations.push(Violation::ColumnSumAboveOne { col, sum });
            }
            _ => {}
        }
    }
    ValidationReport { violations }
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Induced ℓ¹ operator norm: the maximum absolute column sum.
pub fn matrix_l1_norm(m: &OwnershipMatrix) -> f64 {
    let mut sums = vec![0.0; m.cols()];
    for row in 0..m.rows() {
        for (s, x) in sums.iter_mut().zip(m.row(row)) {
            *s += x.abs();
        }
    }
    sums.into_iter().fold(0.0, f64::max)
}

/// `(I - M)^{-1}` for a strictly substochastic square `M`, by LU solve.
pub fn neumann_inverse(m: &OwnershipMatrix) -> Result<DMatrix<f64>> {
    if m.rows() != m.cols() {
        return Err(XosError::DimensionMismatch {
            what: "square matrix columns".into(),
            expected: m.rows(),
            actual: m.cols(),
        });
    }
    let norm = matrix_l1_norm(m);
    if norm >= 1.0 || m.data.iter().any(|&x| x < 0.0) {
        return Err(XosError::NotStrictlySubstochastic { max_column_sum: norm });
    }
    let n = m.rows();
    let a = DMatrix::<f64>::identity(n, n) - m.to_dmatrix();
    let inv = a.clone().lu().try_inverse().ok_or(XosError::Singular)?;
    let residual = (&a * &inv - DMatrix::<f64>::identity(n, n)).abs().max();
    // (I - M) is diagonally dominant by columns, so the solve is well conditioned
    // unless the norm is within rounding of one.
    if residual > 1e-8 {
        return Err(XosError::Singular);
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> OwnershipMatrix {
        OwnershipMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn half_cross_holding_is_strict() {
        let r = validate_ownership(&m(&[&[0.0, 0.5], &[0.5, 0.0]]), MatrixKind::StrictSubstochastic);
        assert!(r.is_valid());
    }

    #[test]
    fn left_stochastic_flags_both_columns() {
        let r = validate_ownership(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), MatrixKind::StrictSubstochastic);
        assert_eq!(r.flagged_columns(), vec![0, 1]);
        let r = validate_ownership(&m(&[&[0.4, 0.3], &[0.6, 0.7]]), MatrixKind::StrictSubstochastic);
        assert_eq!(r.flagged_columns(), vec![0, 1]);
        // but acceptable as an asset-ownership matrix
        assert!(validate_ownership(&m(&[&[0.4, 0.3], &[0.6, 0.7]]), MatrixKind::ColumnBounded).is_valid());
    }

    #[test]
    fn zero_matrix_is_strict() {
        assert!(validate_ownership(&OwnershipMatrix::zeros(3, 3), MatrixKind::StrictSubstochastic).is_valid());
    }

    #[test]
    fn margin_is_configurable() {
        let x = m(&[&[0.0, 0.9999999999], &[0.0, 0.0]]);
        assert!(!validate_ownership(&x, MatrixKind::StrictSubstochastic).is_valid());
        assert!(validate_ownership_with(&x, MatrixKind::StrictSubstochastic, 1e-12).is_valid());
    }

    #[test]
    fn negative_and_large_entries_reported() {
        let r = validate_ownership(&m(&[&[-0.1, 1.5], &[0.0, 0.0]]), MatrixKind::ColumnBounded);
        assert_eq!(
            r.violations,
            vec![
                Violation::NegativeEntry { row: 0, col: 0, value: -0.1 },
                Violation::EntryAboveOne { row: 0, col: 1, value: 1.5 },
                Violation::ColumnSumAboveOne { col: 1, sum: 1.5 },
            ]
        );
    }

    #[test]
    fn non_finite_rejected() {
        assert!(OwnershipMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(OwnershipMatrix::new(2, 1, vec![0.0]).is_err());
    }

    #[test]
    fn vector_norms() {
        assert_eq!(l1_norm(&[1.0, -2.0, 3.0]), 6.0);
        assert_eq!(l1_norm(&[0.0; 4]), 0.0);
        assert_eq!(l1_norm(&[125.0, 125.0]), 250.0);
    }

    #[test]
    fn matrix_norms() {
        assert_eq!(matrix_l1_norm(&m(&[&[0.0, 0.8], &[0.8, 0.0]])), 0.8);
        assert_eq!(matrix_l1_norm(&OwnershipMatrix::zeros(2, 2)), 0.0);
        assert!((matrix_l1_norm(&m(&[&[0.3, 0.1], &[0.2, 0.4]])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn neumann_inverse_examples() {
        let inv = neumann_inverse(&OwnershipMatrix::zeros(3, 3)).unwrap();
        assert_eq!(inv, DMatrix::identity(3, 3));

        let inv = neumann_inverse(&m(&[&[0.0, 0.5], &[0.5, 0.0]])).unwrap();
        let expected = [[4.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 4.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv[(i, j)] - expected[i][j]).abs() < 1e-14);
            }
        }

        let inv = neumann_inverse(&m(&[&[0.8]])).unwrap();
        assert!((inv[(0, 0)] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn neumann_inverse_rejects_stochastic() {
        let err = neumann_inverse(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap_err();
        assert!(matches!(err, XosError::NotStrictlySubstochastic { .. }));
    }

    fn substochastic(n: usize) -> impl Strategy<Value = OwnershipMatrix> {
        (
            proptest::collection::vec(0.0f64..1.0, n * n),
            proptest::collection::vec(0.0f64..0.99, n),
        )
            .prop_map(move |(raw, targets)| {
                let mut data = raw;
                for col in 0..n {
                    let sum: f64 = (0..n).map(|r| data[r * n + col]).sum();
                    if sum > 0.0 {
                        for r in 0..n {
                            data[r * n + col] *= targets[col] / sum;
                        }
                    }
                }
                OwnershipMatrix::new(n, n, data).unwrap()
            })
    }

    proptest! {
        #[test]
        fn induced_norm_bounds_products(
            (mat, x) in (1usize..7).prop_flat_map(|n| (substochastic(n), proptest::collection::vec(-100.0f64..100.0, n)))
        ) {
            let y = mat.mul_vec(&x);
            prop_assert!(l1_norm(&y) <= matrix_l1_norm(&mat) * l1_norm(&x) + 1e-9);
        }

        #[test]
        fn inverse_is_nonnegative(mat in (1usize..8).prop_flat_map(substochastic)) {
            let inv = neumann_inverse(&mat).unwrap();
            for i in 0..mat.rows() {
                prop_assert!(inv[(i, i)] >= 1.0 - 1e-12);
                for j in 0..mat.rows() {
                    prop_assert!(inv[(i, j)] >= -1e-12);
                }
            }
        }

        #[test]
        fn validation_is_idempotent(mat in (1usize..5).prop_flat_map(substochastic)) {
            let a = validate_ownership(&mat, MatrixKind::StrictSubstochastic);
            let b = validate_ownership(&mat, MatrixKind::StrictSubstochastic);
            prop_assert_eq!(a, b);
        }
    }
}
