//! The liquidation-value map and its fixed points.
//!
//! For a state `x = (r¹, …, rᵐ, s)` every firm `k` holds
//! `w_k = (M^a·a + M^s·s + Σᵢ M^{d,i}·rⁱ)_k` and distributes it over its dues
//! by seniority; the payments are the new recoveries and the residual the new
//! equity. Equilibria are the fixed points of this map. In the contractive
//! class the map shrinks ℓ¹ distances by at least the largest cross-ownership
//! norm, so Picard iteration from zero converges to the unique fixed point.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, XosError};
use crate::liabilities::{classify_with_hook, static_dues, waterfall_into, AssumptionClass, LiabilityHook};
use crate::matrix::l1_norm;
use crate::system::{FirmSystem, Scenario, StateVector};

pub const DEFAULT_SEED: u64 = 0x5eed_2010;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// ℓ¹ threshold on `‖Φ(x) − x‖₁`, in currency units.
    pub tol: f64,
    pub max_iter: u64,
    /// Initial points for [`scan_equilibria`].
    pub starts: usize,
    pub seed: u64,
    /// Fixed points closer than this in ℓ¹ are merged by the scan.
    pub dedup_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1_000_000,
            starts: 16,
            seed: DEFAULT_SEED,
            dedup_threshold: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(XosError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(XosError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.starts == 0 {
            return Err(XosError::InvalidConfig("starts must be at least 1".into()));
        }
        if !(self.dedup_threshold >= 0.0) {
            return Err(XosError::InvalidConfig("dedup_threshold must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub state: StateVector,
    /// Number of map evaluations performed.
    pub iterations: u64,
    /// Length `‖x_k − x_{k−1}‖₁` of the last step; the returned state is the
    /// newest iterate `x_k`. Under a contraction this bounds `‖Φ(x_k) − x_k‖₁`.
    pub residual: f64,
    pub converged: bool,
    /// Per firm: assets plus receivables minus equity plus payable liabilities.
    pub balance_residual: Vec<f64>,
    pub class: AssumptionClass,
    /// A-priori iteration count from the contraction rate, when it applies.
    pub iteration_bound: Option<f64>,
}

impl Equilibrium {
    /// True when the liability class guarantees this is the only equilibrium.
    pub fn guaranteed_unique(&self) -> bool {
        self.class.guarantees_uniqueness()
    }

    pub fn max_balance_residual(&self) -> f64 {
        self.balance_residual.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

enum Dues<'a> {
    Static(Vec<f64>),
    Hook(&'a dyn LiabilityHook),
}

/// The map Φ for one system and scenario, with `M^a·a` and any state-independent
/// dues precomputed.
pub struct PhiMap<'a> {
    system: &'a FirmSystem,
    scenario: &'a Scenario,
    exogenous: Vec<f64>,
    dues: Dues<'a>,
}

impl<'a> PhiMap<'a> {
    pub fn new(system: &'a FirmSystem, scenario: &'a Scenario, hook: Option<&'a dyn LiabilityHook>) -> Result<Self> {
        let exogenous = system.exogenous_holdings(scenario)?;
        let dues = match hook {
            Some(h) => Dues::Hook(h),
            None => Dues::Static(static_dues(system, scenario.prices())),
        };
        Ok(Self {
            system,
            scenario,
            exogenous,
            dues,
        })
    }

    pub fn system(&self) -> &FirmSystem {
        self.system
    }

    /// `M^a·a`
    pub fn exogenous(&self) -> &[f64] {
        &self.exogenous
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.system.check_state(state)?;
        let mut out = StateVector::zeros(self.system.firms(), self.system.seniorities());
        let mut scratch = Scratch::new(self.system);
        self.apply_into(state, &mut out, &mut scratch)?;
        Ok(out)
    }

    fn apply_into(&self, state: &StateVector, out: &mut StateVector, scratch: &mut Scratch) -> Result<()> {
        let n = self.system.firms();
        let m = self.system.seniorities();
        let wealth = &mut scratch.wealth;
        wealth.copy_from_slice(&self.exogenous);
        self.system.add_internal_holdings(state.as_slice(), wealth);

        let dues: &[f64] = match &self.dues {
            Dues::Static(d) => d,
            Dues::Hook(hook) => {
                hook.evaluate(self.system, state, self.scenario, &mut scratch.dues);
                for (idx, &value) in scratch.dues.iter().enumerate() {
                    if !value.is_finite() || value < 0.0 {
                        return Err(XosError::InvalidHookOutput {
                            firm: idx % n,
                            seniority: idx / n + 1,
                            value,
                        });
                    }
                }
                &scratch.dues
            }
        };

        let out = out.as_mut_slice();
        for k in 0..n {
            for level in 0..m {
                scratch.firm_dues[level] = dues[level * n + k];
            }
            let residual = waterfall_into(wealth[k], &scratch.firm_dues, &mut scratch.firm_payments);
            for level in 0..m {
                out[level * n + k] = scratch.firm_payments[level];
            }
            out[m * n + k] = residual;
        }
        Ok(())
    }
}

struct Scratch {
    wealth: Vec<f64>,
    dues: Vec<f64>,
    firm_dues: Vec<f64>,
    firm_payments: Vec<f64>,
}

impl Scratch {
    fn new(system: &FirmSystem) -> Self {
        let (n, m) = (system.firms(), system.seniorities());
        Self {
            wealth: vec![0.0; n],
            dues: vec![0.0; n * m],
            firm_dues: vec![0.0; m],
            firm_payments: vec![0.0; m],
        }
    }
}

/// One application of Φ with built-in liabilities.
pub fn apply_phi(system: &FirmSystem, scenario: &Scenario, state: &StateVector) -> Result<StateVector> {
    PhiMap::new(system, scenario, None)?.apply(state)
}

pub fn apply_phi_with_hook(
    system: &FirmSystem,
    scenario: &Scenario,
    state: &StateVector,
    hook: Option<&dyn LiabilityHook>,
) -> Result<StateVector> {
    PhiMap::new(system, scenario, hook)?.apply(state)
}

/// Per firm: `(M^a·a + M^s·s + Σ M^{d,i}·rⁱ) − (s + Σ rⁱ)`.
pub fn balance_check(system: &FirmSystem, scenario: &Scenario, state: &StateVector) -> Result<Vec<f64>> {
    system.check_state(state)?;
    let mut assets = system.exogenous_holdings(scenario)?;
    system.add_internal_holdings(state.as_slice(), &mut assets);
    Ok(assets
        .iter()
        .enumerate()
        .map(|(k, w)| w - state.claims_of(k))
        .collect())
}

/// Upper bound on total balance sheet size, `(L^max + 1)·‖M^a·a‖₁`.
pub fn balance_bound(system: &FirmSystem, scenario: &Scenario) -> Result<f64> {
    let i_max = system.max_cross_ownership();
    Ok(l1_norm(&system.exogenous_holdings(scenario)?) / (1.0 - i_max))
}

/// Iterations a contraction with Lipschitz constant `rate` needs to move
/// less than `tol` when its first step has length `first_step`.
pub fn iteration_bound(rate: f64, tol: f64, first_step: f64) -> Option<f64> {
    if !(0.0..1.0).contains(&rate) {
        return None;
    }
    if first_step == 0.0 {
        return Some(0.0);
    }
    if rate == 0.0 {
        return Some(1.0);
    }
    Some(((tol * (1.0 - rate) / first_step).ln() / rate.ln()).max(0.0).ceil())
}

/// Picard iteration `x ← Φ(x)` from `start`, stopping once a step is no longer
/// than `tol`. Never fails on non-convergence; the result carries
/// `converged = false` instead.
pub fn picard(map: &PhiMap<'_>, start: StateVector, config: &SolverConfig, class: AssumptionClass) -> Result<Equilibrium> {
    let system = map.system();
    system.check_state(&start)?;
    let mut scratch = Scratch::new(system);
    let mut x = start;
    let mut next = StateVector::zeros(system.firms(), system.seniorities());
    let rate = system.max_cross_ownership();
    let mut bound = None;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iter {
        map.apply_into(&x, &mut next, &mut scratch)?;
        iterations += 1;
        residual = x.l1_distance(&next);
        if iterations == 1 && class.guarantees_uniqueness() {
            bound = iteration_bound(rate, config.tol, residual);
        }
        std::mem::swap(&mut x, &mut next);
        if residual <= config.tol {
            converged = true;
            break;
        }
    }

    let balance_residual = balance_check(system, map.scenario, &x)?;
    Ok(Equilibrium {
        state: x,
        iterations,
        residual,
        converged,
        balance_residual,
        class,
        iteration_bound: bound,
    })
}

/// Solves for the equilibrium by Picard iteration from the zero state.
pub fn solve(system: &FirmSystem, scenario: &Scenario, config: &SolverConfig) -> Result<Equilibrium> {
    solve_with_hook(system, scenario, config, None)
}

/// As [`solve`], with liabilities evaluated through `hook`. The result is only
/// marked unique when the hook's class guarantees it.
pub fn solve_with_hook(
    system: &FirmSystem,
    scenario: &Scenario,
    config: &SolverConfig,
    hook: Option<&dyn LiabilityHook>,
) -> Result<Equilibrium> {
    config.validate()?;
    system.ensure_valid()?;
    let map = PhiMap::new(system, scenario, hook)?;
    let class = classify_with_hook(system, hook);
    let zero = StateVector::zeros(system.firms(), system.seniorities());
    let eq = picard(&map, zero, config, class)?;
    if !eq.converged {
        return Err(XosError::NoConvergence {
            iterations: eq.iterations,
            residual: eq.residual,
        });
    }
    Ok(eq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    /// Distinct converged fixed points, ordered by ℓ¹ norm then lexicographically.
    pub equilibria: Vec<Equilibrium>,
    pub starts: usize,
    pub non_convergent: usize,
    pub class: AssumptionClass,
}

impl ScanReport {
    /// No start converged; the system may have no equilibrium.
    pub fn possibly_none(&self) -> bool {
        self.equilibria.is_empty()
    }
}

/// Initial points for the scan: the origin, then uniform draws from the box
/// `[0, (L^max + 1)·‖M^a·a‖₁]^{n(m+1)}`.
pub fn scan_starts(system: &FirmSystem, scenario: &Scenario, config: &SolverConfig) -> Result<Vec<StateVector>> {
    let bound = balance_bound(system, scenario)?;
    let (n, m) = (system.firms(), system.seniorities());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = Vec::with_capacity(config.starts);
    starts.push(StateVector::zeros(n, m));
    for _ in 1..config.starts {
        let data = (0..system.state_len()).map(|_| rng.random::<f64>() * bound).collect();
        starts.push(StateVector::from_flat(n, m, data)?);
    }
    Ok(starts)
}

fn lexicographic(a: &StateVector, b: &StateVector) -> Ordering {
    a.l1_norm().total_cmp(&b.l1_norm()).then_with(|| {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Multi-start Picard search for distinct equilibria.
///
/// This is a heuristic. Picard iteration only reaches attracting fixed points,
/// so an equilibrium at which Φ is locally expansive is found only if a start
/// lands on it exactly (the origin start sometimes does). An empty result
/// with every start non-convergent suggests, but does not prove, that no
/// equilibrium exists.
pub fn scan_equilibria(
    system: &FirmSystem,
    scenario: &Scenario,
    config: &SolverConfig,
    hook: Option<&dyn LiabilityHook>,
) -> Result<ScanReport> {
    config.validate()?;
    system.ensure_valid()?;
    let map = PhiMap::new(system, scenario, hook)?;
    let class = classify_with_hook(system, hook);
    let starts = scan_starts(system, scenario, config)?;
    let n_starts = starts.len();

    let runs: Vec<Equilibrium> = starts
        .into_par_iter()
        .map(|start| picard(&map, start, config, class))
        .collect::<Result<_>>()?;

    let non_convergent = runs.iter().filter(|e| !e.converged).count();
    let mut converged: Vec<Equilibrium> = runs.into_iter().filter(|e| e.converged).collect();
    converged.sort_by(|a, b| lexicographic(&a.state, &b.state));

    let mut distinct: Vec<Equilibrium> = Vec::new();
    for eq in converged {
        if distinct
            .iter()
            .all(|kept| kept.state.l1_distance(&eq.state) > config.dedup_threshold)
        {
            distinct.push(eq);
        }
    }

    Ok(ScanReport {
        equilibria: distinct,
        starts: n_starts,
        non_convergent,
        class,
    })
}
