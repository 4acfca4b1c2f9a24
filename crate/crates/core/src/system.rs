//! The market specification: ownership structure, liability grid and the
//! state and scenario vectors a solve works on.

use crate::error::{Result, SystemReport, XosError};
use crate::liabilities::LiabilitySpec;
use crate::matrix::{
    l1_norm, matrix_l1_norm, validate_ownership_with, MatrixKind, OwnershipMatrix,
    DEFAULT_STRICT_MARGIN,
};

/// `n` firms with `m` seniority levels of liabilities over `q` exogenous assets.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmSystem {
    n: usize,
    m: usize,
    q: usize,
    equity_ownership: OwnershipMatrix,
    liability_ownership: Vec<OwnershipMatrix>,
    asset_ownership: OwnershipMatrix,
    // liabilities[firm][level], level 0 is the most senior
    liabilities: Vec<Vec<LiabilitySpec>>,
}

impl FirmSystem {
    /// Checks dimensional consistency only. Column-sum constraints are
    /// reported by [`FirmSystem::validate`].
    pub fn new(
        equity_ownership: OwnershipMatrix,
        liability_ownership: Vec<OwnershipMatrix>,
        asset_ownership: OwnershipMatrix,
        liabilities: Vec<Vec<LiabilitySpec>>,
    ) -> Result<Self> {
        let n = equity_ownership.rows();
        let m = liability_ownership.len();
        let q = asset_ownership.cols();
        let mismatch = |what: &str, expected: usize, actual: usize| XosError::DimensionMismatch {
            what: what.to_string(),
            expected,
            actual,
        };
        if n == 0 {
            return Err(mismatch("firm count (at least)", 1, 0));
        }
        if m == 0 {
            return Err(mismatch("seniority count (at least)", 1, 0));
        }
        if q == 0 {
            return Err(mismatch("exogenous asset count (at least)", 1, 0));
        }
        if equity_ownership.cols() != n {
            return Err(mismatch("equity_ownership columns", n, equity_ownership.cols()));
        }
        for mat in &liability_ownership {
            if mat.rows() != n {
                return Err(mismatch("liability_ownership rows", n, mat.rows()));
            }
            if mat.cols() != n {
                return Err(mismatch("liability_ownership columns", n, mat.cols()));
            }
        }
        if asset_ownership.rows() != n {
            return Err(mismatch("asset_ownership rows", n, asset_ownership.rows()));
        }
        if liabilities.len() != n {
            return Err(mismatch("liability grid rows (firms)", n, liabilities.len()));
        }
        for (firm, row) in liabilities.iter().enumerate() {
            if row.len() != m {
                return Err(mismatch("liability grid columns (seniorities)", m, row.len()));
            }
            for (level, spec) in row.iter().enumerate() {
                spec.check_assets(q).map_err(|reason| XosError::InvalidLiability {
                    firm,
                    seniority: level + 1,
                    reason,
                })?;
            }
        }
        Ok(Self {
            n,
            m,
            q,
            equity_ownership,
            liability_ownership,
            asset_ownership,
            liabilities,
        })
    }

    pub fn firms(&self) -> usize {
        self.n
    }

    pub fn seniorities(&self) -> usize {
        self.m
    }

    pub fn assets(&self) -> usize {
        self.q
    }

    pub fn equity_ownership(&self) -> &OwnershipMatrix {
        &self.equity_ownership
    }

    pub fn liability_ownership(&self) -> &[OwnershipMatrix] {
        &self.liability_ownership
    }

    pub fn asset_ownership(&self) -> &OwnershipMatrix {
        &self.asset_ownership
    }

    pub fn liabilities(&self) -> &[Vec<LiabilitySpec>] {
        &self.liabilities
    }

    pub fn liability(&self, firm: usize, level: usize) -> &LiabilitySpec {
        &self.liabilities[firm][level]
    }

    /// Length of the stacked state `(r¹, …, rᵐ, s)`.
    pub fn state_len(&self) -> usize {
        self.n * (self.m + 1)
    }

    pub fn validate(&self) -> SystemReport {
        self.validate_with(DEFAULT_STRICT_MARGIN)
    }

    pub fn validate_with(&self, strict_margin: f64) -> SystemReport {
        SystemReport {
            equity: validate_ownership_with(
                &self.equity_ownership,
                MatrixKind::StrictSubstochastic,
                strict_margin,
            ),
            liabilities: self
                .liability_ownership
                .iter()
                .map(|mat| validate_ownership_with(mat, MatrixKind::StrictSubstochastic, strict_margin))
                .collect(),
            assets: validate_ownership_with(&self.asset_ownership, MatrixKind::ColumnBounded, strict_margin),
        }
    }

    /// Returns an error carrying the full report if any matrix is invalid.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(XosError::InvalidSystem(Box::new(report)))
        }
    }

    /// Largest ℓ¹ norm among the equity and liability ownership matrices.
    pub fn max_cross_ownership(&self) -> f64 {
        self.liability_ownership
            .iter()
            .map(matrix_l1_norm)
            .fold(matrix_l1_norm(&self.equity_ownership), f64::max)
    }

    /// `M^a · a`, the exogenous assets held by each firm.
    pub fn exogenous_holdings(&self, scenario: &Scenario) -> Result<Vec<f64>> {
        self.check_scenario(scenario)?;
        Ok(self.asset_ownership.mul_vec(scenario.prices()))
    }

    /// `M^s·s + Σᵢ M^{d,i}·rⁱ`, the endogenous assets held by each firm.
    pub fn internal_holdings(&self, state: &StateVector) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.add_internal_holdings(state.as_slice(), &mut out);
        out
    }

    pub(crate) fn add_internal_holdings(&self, state: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (level, mat) in self.liability_ownership.iter().enumerate() {
            if !mat.is_zero() {
                mat.mul_vec_add(&state[level * n..(level + 1) * n], out);
            }
        }
        if !self.equity_ownership.is_zero() {
            self.equity_ownership.mul_vec_add(&state[self.m * n..], out);
        }
    }

    /// `‖M^s·s‖₁ + Σᵢ ‖M^{d,i}·rⁱ‖₁`, the claims held inside the group.
    pub fn internally_held_claims(&self, state: &StateVector) -> f64 {
        let mut total = l1_norm(&self.equity_ownership.mul_vec(state.equity()));
        for (level, mat) in self.liability_ownership.iter().enumerate() {
            total += l1_norm(&mat.mul_vec(state.recovery(level)));
        }
        total
    }

    pub(crate) fn check_scenario(&self, scenario: &Scenario) -> Result<()> {
        if scenario.len() != self.q {
            return Err(XosError::DimensionMismatch {
                what: "scenario length".into(),
                expected: self.q,
                actual: scenario.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.firms() != self.n || state.seniorities() != self.m {
            return Err(XosError::DimensionMismatch {
                what: "state length".into(),
                expected: self.state_len(),
                actual: state.as_slice().len(),
            });
        }
        Ok(())
    }
}

/// Exogenous asset prices `a`, one entry per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    prices: Vec<f64>,
}

impl Scenario {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.iter().any(|p| !p.is_finite()) {
            return Err(XosError::NonFinite("scenario prices".into()));
        }
        if let Some(p) = prices.iter().find(|&&p| p < 0.0) {
            return Err(XosError::InvalidConfig(format!("negative exogenous price {p}")));
        }
        Ok(Self { prices })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Stacked state `(r¹, …, rᵐ, s)`; each block has one entry per firm.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl StateVector {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            data: vec![0.0; n * (m + 1)],
        }
    }

    /// Builds a state from `m` recovery blocks and the equity block.
    pub fn from_parts(recoveries: &[Vec<f64>], equity: &[f64]) -> Result<Self> {
        let n = equity.len();
        let mut data = Vec::with_capacity(n * (recoveries.len() + 1));
        for r in recoveries {
            if r.len() != n {
                return Err(XosError::DimensionMismatch {
                    what: "recovery block length".into(),
                    expected: n,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        data.extend_from_slice(equity);
        Ok(Self {
            n,
            m: recoveries.len(),
            data,
        })
    }

    pub fn from_flat(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * (m + 1) {
            return Err(XosError::DimensionMismatch {
                what: "state length".into(),
                expected: n * (m + 1),
                actual: data.len(),
            });
        }
        Ok(Self { n, m, data })
    }

    pub fn firms(&self) -> usize {
        self.n
    }

    pub fn seniorities(&self) -> usize {
        self.m
    }

    /// Recovery values of seniority `level` (0 = most senior).
    pub fn recovery(&self, level: usize) -> &[f64] {
        &self.data[level * self.n..(level + 1) * self.n]
    }

    pub fn equity(&self) -> &[f64] {
        &self.data[self.m * self.n..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn l1_norm(&self) -> f64 {
        l1_norm(&self.data)
    }

    pub fn l1_distance(&self, other: &StateVector) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Equity plus all recoveries of one firm: its total claims side.
    pub fn claims_of(&self, firm: usize) -> f64 {
        (0..=self.m).map(|block| self.data[block * self.n + firm]).sum()
    }
}
