use thiserror::Error;

use crate::matrix::ValidationReport;

/// Errors raised while building or solving a firm system.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum XosError {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid liability at firm {firm}, seniority {seniority}: {reason}")]
    InvalidLiability {
        firm: usize,
        seniority: usize,
        reason: String,
    },

    #[error("invalid payoff term: {0}")]
    InvalidPayoff(String),

    #[error("matrix is not strictly substochastic (max column sum {max_column_sum})")]
    NotStrictlySubstochastic { max_column_sum: f64 },

    #[error("matrix (I - M) is singular")]
    Singular,

    #[error("invalid system: {0}")]
    InvalidSystem(Box<SystemReport>),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: u64, residual: f64 },

    #[error("liability hook returned invalid value {value} at firm {firm}, seniority {seniority}")]
    InvalidHookOutput {
        firm: usize,
        seniority: usize,
        value: f64,
    },

    #[error("exogenous asset base ||M^a a||_1 is zero")]
    ZeroExogenousBase,

    #[error("total claims ||s||_1 + sum ||r^i||_1 are zero")]
    ZeroClaims,

    #[error("invalid market model: {0}")]
    InvalidMarket(String),

    #[error("correlation matrix is not positive semidefinite (pivot {pivot:e} at index {index})")]
    NonPsdCorrelation { index: usize, pivot: f64 },

    #[error("system is not in the contractive liability class; prices are not unique")]
    NonContractiveSystem,

    #[error("path {path}: no convergence after {iterations} iterations (residual {residual:e})")]
    PathNoConvergence {
        path: usize,
        iterations: u64,
        residual: f64,
    },

    #[error("expected {metric} = {value} exceeds its bound {bound}")]
    LeverageBoundViolated {
        metric: &'static str,
        value: f64,
        bound: f64,
    },
}

pub type Result<T> = std::result::Result<T, XosError>;

/// Validation outcome for every ownership matrix of a system.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SystemReport {
    pub equity: ValidationReport,
    pub liabilities: Vec<ValidationReport>,
    pub assets: ValidationReport,
}

impl SystemReport {
    pub fn is_valid(&self) -> bool {
        self.equity.is_valid()
            && self.assets.is_valid()
            && self.liabilities.iter().all(ValidationReport::is_valid)
    }

    /// Labelled reports in a fixed order: equity, liability levels 1..m, assets.
    pub fn labelled(&self) -> Vec<(String, &ValidationReport)> {
        let mut out = vec![("equity_ownership".to_string(), &self.equity)];
        for (i, r) in self.liabilities.iter().enumerate() {
            out.push((format!("liability_ownership[{}]", i + 1), r));
        }
        out.push(("asset_ownership".to_string(), &self.assets));
        out
    }
}

impl std::fmt::Display for SystemReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for (label, report) in self.labelled() {
            for v in &report.violations {
                if !first {
                    write!(f, "; ")?;
                }
                first = false;
                write!(f, "{label}: {v}")?;
            }
        }
        if first {
            write!(f, "no violations")?;
        }
        Ok(())
    }
}
