//! Group-level leverage and cross-ownership measures.

use serde::Serialize;

use crate::error::{Result, XosError};
use crate::matrix::l1_norm;
use crate::system::{FirmSystem, Scenario, StateVector};

/// Externally held equity at or below this (relative to the exogenous base)
/// leaves external leverage undefined.
const EXTERNAL_EQUITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeverageBounds {
    pub i_max: f64,
    /// Infinite when `i_max` reaches one.
    pub l_max: f64,
}

pub fn leverage_bounds(system: &FirmSystem) -> LeverageBounds {
    let i_max = system.max_cross_ownership();
    let l_max = if i_max < 1.0 { i_max / (1.0 - i_max) } else { f64::INFINITY };
    LeverageBounds { i_max, l_max }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeverageReport {
    /// Internal leverage `L`.
    pub internal_leverage: f64,
    /// Degree of cross-ownership `I`.
    pub cross_ownership: f64,
    /// External leverage; `None` when externally held equity is zero.
    pub external_leverage: Option<f64>,
    pub i_max: f64,
    pub l_max: f64,
    pub total_claims: f64,
    pub internal_claims: f64,
    pub exogenous_total: f64,
}

struct Totals {
    exogenous: f64,
    internal: f64,
    total: f64,
    equity: f64,
    internal_equity: f64,
}

fn totals(system: &FirmSystem, scenario: &Scenario, state: &StateVector) -> Result<Totals> {
    system.check_state(state)?;
    let exogenous = l1_norm(&system.exogenous_holdings(scenario)?);
    let internal_equity = l1_norm(&system.equity_ownership().mul_vec(state.equity()));
    Ok(Totals {
        exogenous,
        internal: system.internally_held_claims(state),
        total: state.l1_norm(),
        equity: l1_norm(state.equity()),
        internal_equity,
    })
}

/// `L = (‖M^s·s‖₁ + Σ‖M^{d,i}·rⁱ‖₁) / ‖M^a·a‖₁`
pub fn internal_leverage(system: &FirmSystem, scenario: &Scenario, state: &StateVector) -> Result<f64> {
    let t = totals(system, scenario, state)?;
    if t.exogenous == 0.0 {
        return Err(XosError::ZeroExogenousBase);
    }
    Ok(t.internal / t.exogenous)
}

/// `I` = internally held claims over all claims.
pub fn cross_ownership_degree(system: &FirmSystem, scenario: &Scenario, state: &StateVector) -> Result<f64> {
    let t = totals(system, scenario, state)?;
    if t.total == 0.0 {
        return Err(XosError::ZeroClaims);
    }
    Ok(t.internal / t.total)
}

/// Externally held liabilities over externally held equity.
pub fn external_leverage(system: &FirmSystem, scenario: &Scenario, state: &StateVector) -> Result<Option<f64>> {
    let t = totals(system, scenario, state)?;
    Ok(external_from(&t))
}

fn external_from(t: &Totals) -> Option<f64> {
    let external_equity = t.equity - t.internal_equity;
    if external_equity <= EXTERNAL_EQUITY_EPS * t.exogenous.max(1.0) {
        return None;
    }
    let external_liabilities = (t.total - t.equity) - (t.internal - t.internal_equity);
    Some(external_liabilities / external_equity)
}

pub fn leverage_report(system: &FirmSystem, scenario: &Scenario, state: &StateVector) -> Result<LeverageReport> {
    let t = totals(system, scenario, state)?;
    if t.exogenous == 0.0 {
        return Err(XosError::ZeroExogenousBase);
    }
    let bounds = leverage_bounds(system);
    Ok(LeverageReport {
        internal_leverage: t.internal / t.exogenous,
        cross_ownership: if t.total > 0.0 { t.internal / t.total } else { 0.0 },
        external_leverage: external_from(&t),
        i_max: bounds.i_max,
        l_max: bounds.l_max,
        total_claims: t.total,
        internal_claims: t.internal,
        exogenous_total: t.exogenous,
    })
}
