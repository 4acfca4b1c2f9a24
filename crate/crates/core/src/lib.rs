//! Price equilibria for firms linked by cross-holdings of equity and
//! seniority-ranked liabilities.
//!
//! A [`FirmSystem`] combines ownership matrices with per-firm liability
//! schedules. Given an exogenous [`Scenario`], [`solve`] finds the fixed point
//! of the valuation map by Picard iteration; [`scan_equilibria`] searches for
//! further fixed points when liabilities depend on the state. The [`metrics`]
//! module measures how much value is counted twice through cross-holdings and
//! [`pricing`] values every claim before maturity by Monte Carlo.

pub mod equilibrium;
pub mod error;
pub mod liabilities;
pub mod matrix;
pub mod metrics;
pub mod pricing;
pub mod system;

pub use equilibrium::{
    apply_phi, apply_phi_with_hook, balance_bound, balance_check, iteration_bound, picard, scan_equilibria,
    solve, solve_with_hook, Equilibrium, PhiMap, ScanReport, SolverConfig, DEFAULT_SEED,
};
pub use error::{Result, SystemReport, XosError};
pub use liabilities::{
    classify_assumptions, classify_with_hook, evaluate_liabilities, waterfall, AssumptionClass, LiabilityHook,
    LiabilitySpec, PayoffTerm, SquaredTerm, StateDependentLiabilities, StateRef, Waterfall,
};
pub use matrix::{
    l1_norm, matrix_l1_norm, neumann_inverse, validate_ownership, validate_ownership_with, MatrixKind,
    OwnershipMatrix, ValidationReport, Violation, DEFAULT_STRICT_MARGIN,
};
pub use metrics::{
    cross_ownership_degree, external_leverage, internal_leverage, leverage_bounds, leverage_report,
    LeverageBounds, LeverageReport,
};
pub use pricing::{
    price, price_with_hook, simulate_terminal, LeverageMeasures, MarketModel, MetricMode, PriceReport,
    PricingConfig, TerminalSamples,
};
pub use system::{FirmSystem, Scenario, StateVector};
