//! Liability payoffs and the seniority waterfall.
//!
//! The built-in payoff terms depend on exogenous prices only, which keeps every
//! system built from them in the contractive class. Liabilities that depend on
//! the endogenous state go through [`LiabilityHook`].

use crate::error::{Result, XosError};
use crate::system::{FirmSystem, Scenario, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub enum PayoffTerm {
    /// Fixed nominal amount.
    Constant { nominal: f64 },
    /// `size · (weights·a − strike)⁺`
    Call { weights: Vec<f64>, strike: f64, size: f64 },
    /// `size · (weights·a − strike)⁻`
    Put { weights: Vec<f64>, strike: f64, size: f64 },
}

impl PayoffTerm {
    pub fn evaluate(&self, prices: &[f64]) -> f64 {
        match self {
            PayoffTerm::Constant { nominal } => *nominal,
            PayoffTerm::Call { weights, strike, size } => size * (basket(weights, prices) - strike).max(0.0),
            PayoffTerm::Put { weights, strike, size } => size * (strike - basket(weights, prices)).max(0.0),
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        match self {
            PayoffTerm::Constant { nominal } => {
                if !nominal.is_finite() || *nominal < 0.0 {
                    return Err(format!("constant nominal must be finite and >= 0, got {nominal}"));
                }
            }
            PayoffTerm::Call { weights, strike, size } | PayoffTerm::Put { weights, strike, size } => {
                if !size.is_finite() || *size < 0.0 {
                    return Err(format!("option size must be finite and >= 0, got {size}"));
                }
                if !strike.is_finite() || weights.iter().any(|w| !w.is_finite()) {
                    return Err("option strike and weights must be finite".into());
                }
            }
        }
        Ok(())
    }
}

fn basket(weights: &[f64], prices: &[f64]) -> f64 {
    weights.iter().zip(prices).map(|(w, a)| w * a).sum()
}

/// One liability: the sum of its payoff terms. An empty term list is a zero liability.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LiabilitySpec {
    terms: Vec<PayoffTerm>,
}

impl LiabilitySpec {
    pub fn new(terms: Vec<PayoffTerm>) -> Result<Self> {
        for term in &terms {
            term.check().map_err(XosError::InvalidPayoff)?;
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(nominal: f64) -> Result<Self> {
        Self::new(vec![PayoffTerm::Constant { nominal }])
    }

    pub fn terms(&self) -> &[PayoffTerm] {
        &self.terms
    }

    pub fn evaluate(&self, prices: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.evaluate(prices)).sum()
    }

    pub(crate) fn check_assets(&self, q: usize) -> std::result::Result<(), String> {
        for term in &self.terms {
            term.check()?;
            if let PayoffTerm::Call { weights, .. } | PayoffTerm::Put { weights, .. } = term {
                if weights.len() != q {
                    return Err(format!("basket has {} weights, expected {q}", weights.len()));
                }
            }
        }
        Ok(())
    }
}

/// Regularity class of a system's liability functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssumptionClass {
    /// Continuous liabilities: at least one equilibrium exists.
    Continuous,
    /// Continuous and contractive in the endogenous holdings: exactly one equilibrium.
    Contractive,
    Unknown,
}

impl AssumptionClass {
    pub fn is_continuous(self) -> bool {
        matches!(self, AssumptionClass::Continuous | AssumptionClass::Contractive)
    }

    pub fn guarantees_uniqueness(self) -> bool {
        self == AssumptionClass::Contractive
    }

    pub fn label(self) -> &'static str {
        match self {
            AssumptionClass::Continuous => "A1_Continuous",
            AssumptionClass::Contractive => "A2_Contractive",
            AssumptionClass::Unknown => "Unknown",
        }
    }
}

/// Every built-in payoff depends on `a` alone, so the liability functions are
/// constant in the endogenous variables for a fixed scenario.
pub fn classify_assumptions(_system: &FirmSystem) -> AssumptionClass {
    AssumptionClass::Contractive
}

/// Class of a system whose liabilities are evaluated through `hook` when present.
pub fn classify_with_hook(system: &FirmSystem, hook: Option<&dyn LiabilityHook>) -> AssumptionClass {
    match hook {
        Some(h) => h.assumption_class(),
        None => classify_assumptions(system),
    }
}

/// Generic liability evaluator `dⁱ(r, s, a)` for payoffs outside the built-in terms.
pub trait LiabilityHook: Sync {
    /// Writes the dues of level `i` for firm `k` into `dues[i * n + k]`.
    /// Values must be finite and non-negative.
    fn evaluate(&self, system: &FirmSystem, state: &StateVector, scenario: &Scenario, dues: &mut [f64]);

    fn assumption_class(&self) -> AssumptionClass {
        AssumptionClass::Unknown
    }
}

/// `d¹…dᵐ` at `(state, scenario)`, one vector of length `n` per level.
pub fn evaluate_liabilities(
    system: &FirmSystem,
    state: &StateVector,
    scenario: &Scenario,
) -> Result<Vec<Vec<f64>>> {
    system.check_state(state)?;
    system.check_scenario(scenario)?;
    let prices = scenario.prices();
    Ok((0..system.seniorities())
        .map(|level| {
            (0..system.firms())
                .map(|firm| system.liability(firm, level).evaluate(prices))
                .collect()
        })
        .collect())
}

/// Built-in dues flattened level-major, `dues[i * n + k]`.
pub(crate) fn static_dues(system: &FirmSystem, prices: &[f64]) -> Vec<f64> {
    let n = system.firms();
    let mut dues = vec![0.0; n * system.seniorities()];
    for firm in 0..n {
        for level in 0..system.seniorities() {
            dues[level * n + firm] = system.liability(firm, level).evaluate(prices);
        }
    }
    dues
}

/// Outcome of distributing one firm's assets over its claims.
#[derive(Debug, Clone, PartialEq)]
pub struct Waterfall {
    pub payments: Vec<f64>,
    pub residual: f64,
}

impl Waterfall {
    pub fn total(&self) -> f64 {
        self.payments.iter().sum::<f64>() + self.residual
    }
}

/// Pays `dues` in order of seniority out of `x`; the residual goes to equity.
///
/// The first payment is `min(dues[0], x)` without a floor, so for negative `x`
/// the payments plus residual still add up to `x`.
pub fn waterfall(x: f64, dues: &[f64]) -> Waterfall {
    let mut payments = vec![0.0; dues.len()];
    let residual = waterfall_into(x, dues, &mut payments);
    Waterfall { payments, residual }
}

/// Allocation-free [`waterfall`]; returns the residual.
pub fn waterfall_into(x: f64, dues: &[f64], payments: &mut [f64]) -> f64 {
    debug_assert_eq!(dues.len(), payments.len());
    let mut remaining = x;
    for (j, (pay, &due)) in payments.iter_mut().zip(dues).enumerate() {
        *pay = if j == 0 { due.min(x) } else { due.min(remaining.max(0.0)) };
        remaining -= due;
    }
    if dues.is_empty() {
        x.max(0.0)
    } else {
        remaining.max(0.0)
    }
}

/// Which endogenous quantity a state-dependent term reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateRef {
    /// Recovery of `level` (0 = most senior) issued by `firm`.
    Recovery { level: usize, firm: usize },
    Equity { firm: usize },
}

impl StateRef {
    fn read(self, state: &StateVector) -> f64 {
        match self {
            StateRef::Recovery { level, firm } => state.recovery(level)[firm],
            StateRef::Equity { firm } => state.equity()[firm],
        }
    }
}

/// `scale · (x − center)²` owed by `firm` at `level`, where `x` is read from the state.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredTerm {
    pub firm: usize,
    pub level: usize,
    pub variable: StateRef,
    pub center: f64,
    pub scale: f64,
}

/// Built-in liabilities plus state-dependent squared terms.
///
/// These are continuous but generally not contractive; several equilibria may exist.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateDependentLiabilities {
    pub terms: Vec<SquaredTerm>,
}

impl StateDependentLiabilities {
    pub fn new(system: &FirmSystem, terms: Vec<SquaredTerm>) -> Result<Self> {
        let (n, m) = (system.firms(), system.seniorities());
        for t in &terms {
            let bad = |reason: String| XosError::InvalidLiability {
                firm: t.firm,
                seniority: t.level + 1,
                reason,
            };
            if t.firm >= n || t.level >= m {
                return Err(bad("term outside the liability grid".into()));
            }
            let in_range = match t.variable {
                StateRef::Recovery { level, firm } => level < m && firm < n,
                StateRef::Equity { firm } => firm < n,
            };
            if !in_range {
                return Err(bad("term reads a state component outside the system".into()));
            }
            if !t.center.is_finite() || !t.scale.is_finite() || t.scale < 0.0 {
                return Err(bad("center must be finite and scale finite and >= 0".into()));
            }
        }
        Ok(Self { terms })
    }
}

impl LiabilityHook for StateDependentLiabilities {
    fn evaluate(&self, system: &FirmSystem, state: &StateVector, scenario: &Scenario, dues: &mut [f64]) {
        let n = system.firms();
        dues.copy_from_slice(&static_dues(system, scenario.prices()));
        for t in &self.terms {
            let x = t.variable.read(state) - t.center;
            dues[t.level * n + t.firm] += t.scale * x * x;
        }
    }
}
