//! Risk-neutral Monte Carlo prices before maturity.
//!
//! Exogenous assets follow correlated geometric Brownian motions under the
//! money-market measure. Each simulated terminal scenario is solved for its
//! equilibrium and the discounted payoffs are averaged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{solve_with_hook, SolverConfig};
use crate::error::{Result, XosError};
use crate::liabilities::{classify_with_hook, LiabilityHook};
use crate::matrix::l1_norm;
use crate::metrics::leverage_bounds;
use crate::system::{FirmSystem, Scenario, StateVector};

/// Diagonal jitter applied when a correlation matrix misses positive
/// definiteness by less than this amount.
pub const PSD_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Numeraire {
    /// Deterministic account worth `e^{rate·t}`.
    MoneyMarket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    spot: Vec<f64>,
    vols: Vec<f64>,
    correlation: Vec<Vec<f64>>,
    rate: f64,
    maturity: f64,
    numeraire: Numeraire,
    // lower-triangular factor of the correlation, row-major q×q
    factor: Vec<f64>,
}

impl MarketModel {
    pub fn new(spot: Vec<f64>, vols: Vec<f64>, correlation: Vec<Vec<f64>>, rate: f64, maturity: f64) -> Result<Self> {
        let q = spot.len();
        let bad = |msg: String| Err(XosError::InvalidMarket(msg));
        if q == 0 {
            return bad("at least one asset required".into());
        }
        if vols.len() != q || correlation.len() != q || correlation.iter().any(|r| r.len() != q) {
            return bad(format!("spot, vols and correlation must all have dimension {q}"));
        }
        if spot.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return bad("spot prices must be finite and positive".into());
        }
        if vols.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("volatilities must be finite and non-negative".into());
        }
        if !rate.is_finite() {
            return bad("rate must be finite".into());
        }
        if !maturity.is_finite() || maturity <= 0.0 {
            return bad("maturity must be finite and positive".into());
        }
        for i in 0..q {
            if correlation[i][i] != 1.0 {
                return bad(format!("correlation diagonal entry {i} is {}, expected 1", correlation[i][i]));
            }
            for j in 0..q {
                let c = correlation[i][j];
                if !c.is_finite() || c.abs() > 1.0 || c != correlation[j][i] {
                    return bad(format!("correlation entry ({i}, {j}) must be symmetric and in [-1, 1]"));
                }
            }
        }
        let factor = match cholesky(&correlation, 0.0) {
            Ok(f) => f,
            Err(_) => cholesky(&correlation, PSD_JITTER)
                .map_err(|(index, pivot)| XosError::NonPsdCorrelation { index, pivot })?,
        };
        Ok(Self {
            spot,
            vols,
            correlation,
            rate,
            maturity,
            numeraire: Numeraire::MoneyMarket,
            factor,
        })
    }

    /// Independent assets.
    pub fn uncorrelated(spot: Vec<f64>, vols: Vec<f64>, rate: f64, maturity: f64) -> Result<Self> {
        let q = spot.len();
        let correlation = (0..q)
            .map(|i| (0..q).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(spot, vols, correlation, rate, maturity)
    }

    pub fn assets(&self) -> usize {
        self.spot.len()
    }

    pub fn spot(&self) -> &[f64] {
        &self.spot
    }

    pub fn vols(&self) -> &[f64] {
        &self.vols
    }

    pub fn correlation(&self) -> &[Vec<f64>] {
        &self.correlation
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn numeraire(&self) -> Numeraire {
        self.numeraire
    }

    /// `e^{−rate·T}`
    pub fn discount_factor(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }

    fn sample_into(&self, path: usize, seed: u64, z: &mut [f64], out: &mut [f64]) {
        let q = self.spot.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path as u64);
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let sqrt_t = self.maturity.sqrt();
        for j in 0..q {
            let correlated: f64 = (0..=j).map(|k| self.factor[j * q + k] * z[k]).sum();
            let vol = self.vols[j];
            let drift = (self.rate - 0.5 * vol * vol) * self.maturity;
            out[j] = self.spot[j] * (drift + vol * sqrt_t * correlated).exp();
        }
    }
}

/// Lower Cholesky factor of `a + jitter·I`, or the failing `(index, pivot)`.
fn cholesky(a: &[Vec<f64>], jitter: f64) -> std::result::Result<Vec<f64>, (usize, f64)> {
    let q = a.len();
    let mut l = vec![0.0; q * q];
    for j in 0..q {
        let mut pivot = a[j][j] + jitter;
        for k in 0..j {
            pivot -= l[j * q + k] * l[j * q + k];
        }
        if !(pivot > 0.0) {
            return Err((j, pivot));
        }
        let d = pivot.sqrt();
        l[j * q + j] = d;
        for i in j + 1..q {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i * q + k] * l[j * q + k];
            }
            l[i * q + j] = s / d;
        }
    }
    Ok(l)
}

/// Simulated terminal prices, one row of `q` values per path.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSamples {
    q: usize,
    data: Vec<f64>,
}

impl TerminalSamples {
    pub fn paths(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn assets(&self) -> usize {
        self.q
    }

    pub fn path(&self, index: usize) -> &[f64] {
        &self.data[index * self.q..(index + 1) * self.q]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.q)
    }
}

/// Draws `a(T)` under the risk-neutral measure. Path `i` depends only on
/// `(seed, i)`, so the result does not depend on thread scheduling.
pub fn simulate_terminal(model: &MarketModel, paths: usize, seed: u64) -> Result<TerminalSamples> {
    if paths == 0 {
        return Err(XosError::InvalidConfig("paths must be at least 1".into()));
    }
    let q = model.assets();
    let mut data = vec![0.0; q * paths];
    data.par_chunks_mut(q).enumerate().for_each_init(
        || vec![0.0; q],
        |z, (path, out)| model.sample_into(path, seed, z, out),
    );
    Ok(TerminalSamples { q, data })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingConfig {
    pub solver: SolverConfig,
    /// Sum path results in path order so output is identical for any thread count.
    pub reproducible: bool,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            reproducible: true,
        }
    }
}

/// How leverage measures before maturity are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// Risk-neutral expectation of the terminal measures.
    Expectation,
    /// Measures evaluated on the before-maturity prices.
    PriceSubstitution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeverageMeasures {
    pub internal_leverage: f64,
    pub cross_ownership: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceReport {
    /// Discounted expected payoffs `(r¹, …, rᵐ, s)`.
    pub means: StateVector,
    pub std_errors: StateVector,
    /// Discounted expected terminal exogenous prices.
    pub exogenous_means: Vec<f64>,
    pub exogenous_std_errors: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    pub expected_leverage: f64,
    pub expected_cross_ownership: f64,
    pub substituted: LeverageMeasures,
}

impl PriceReport {
    pub fn measures(&self, mode: MetricMode) -> LeverageMeasures {
        match mode {
            MetricMode::Expectation => LeverageMeasures {
                internal_leverage: self.expected_leverage,
                cross_ownership: self.expected_cross_ownership,
            },
            MetricMode::PriceSubstitution => self.substituted,
        }
    }
}

// Running mean and centred second moment, merged with Chan's update.
#[derive(Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn add(mut self, row: &[f64]) -> Self {
        self.count += 1.0;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(row) {
            let delta = x - *mean;
            *mean += delta / self.count;
            *m2 += delta * (x - *mean);
        }
        self
    }

    fn merge(mut self, other: Self) -> Self {
        if other.count == 0.0 {
            return self;
        }
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * other.count / count;
            self.m2[i] += other.m2[i] + delta * delta * self.count * other.count / count;
        }
        self.count = count;
        self
    }

    fn finish(self, paths: usize) -> (Vec<f64>, Vec<f64>) {
        let n = paths as f64;
        let errors = self
            .m2
            .iter()
            .map(|m2| if paths < 2 { 0.0 } else { (m2.max(0.0) / (n - 1.0) / n).sqrt() })
            .collect();
        (self.mean, errors)
    }
}

/// Prices every equity and recovery claim of a contractive system.
pub fn price(system: &FirmSystem, model: &MarketModel, paths: usize, seed: u64, config: &PricingConfig) -> Result<PriceReport> {
    price_with_hook(system, model, paths, seed, config, None)
}

/// As [`price`]; fails with `NonContractiveSystem` unless the liability class
/// guarantees a unique terminal equilibrium for every scenario.
pub fn price_with_hook(
    system: &FirmSystem,
    model: &MarketModel,
    paths: usize,
    seed: u64,
    config: &PricingConfig,
    hook: Option<&dyn LiabilityHook>,
) -> Result<PriceReport> {
    if !classify_with_hook(system, hook).guarantees_uniqueness() {
        return Err(XosError::NonContractiveSystem);
    }
    if model.assets() != system.assets() {
        return Err(XosError::DimensionMismatch {
            what: "market model assets".into(),
            expected: system.assets(),
            actual: model.assets(),
        });
    }
    config.solver.validate()?;
    system.ensure_valid()?;
    let samples = simulate_terminal(model, paths, seed)?;
    let discount = model.discount_factor();
    let (n, m, q) = (system.firms(), system.seniorities(), system.assets());
    let state_len = system.state_len();
    // row layout: discounted state, L, I, discounted a(T)
    let row_len = state_len + 2 + q;

    let path_row = |path: usize| -> Result<Vec<f64>> {
        let prices = samples.path(path);
        let scenario = Scenario::new(prices.to_vec())?;
        let eq = solve_with_hook(system, &scenario, &config.solver, hook).map_err(|e| match e {
            XosError::NoConvergence { iterations, residual } => XosError::PathNoConvergence {
                path,
                iterations,
                residual,
            },
            other => other,
        })?;
        let exogenous = l1_norm(&system.exogenous_holdings(&scenario)?);
        let internal = system.internally_held_claims(&eq.state);
        let total = eq.state.l1_norm();
        // with no exogenous base every claim is zero and both measures are taken as 0
        let leverage = if exogenous > 0.0 { internal / exogenous } else { 0.0 };
        let degree = if total > 0.0 { internal / total } else { 0.0 };
        let mut row = Vec::with_capacity(row_len);
        row.extend(eq.state.as_slice().iter().map(|x| x * discount));
        row.push(leverage);
        row.push(degree);
        row.extend(prices.iter().map(|x| x * discount));
        Ok(row)
    };

    let moments = if config.reproducible {
        let rows: Vec<Vec<f64>> = (0..paths).into_par_iter().map(path_row).collect::<Result<_>>()?;
        rows.iter().fold(Moments::new(row_len), |acc, row| acc.add(row))
    } else {
        (0..paths)
            .into_par_iter()
            .try_fold(
                || Moments::new(row_len),
                |acc, path| path_row(path).map(|row| acc.add(&row)),
            )
            .try_reduce(|| Moments::new(row_len), |a, b| Ok(a.merge(b)))?
    };
    let (means, errors) = moments.finish(paths);

    let bounds = leverage_bounds(system);
    let expected_leverage = means[state_len];
    let expected_cross_ownership = means[state_len + 1];
    if expected_leverage > bounds.l_max * (1.0 + 1e-12) + 1e-12 {
        return Err(XosError::LeverageBoundViolated {
            metric: "E[L]",
            value: expected_leverage,
            bound: bounds.l_max,
        });
    }
    if expected_cross_ownership > bounds.i_max + 1e-12 {
        return Err(XosError::LeverageBoundViolated {
            metric: "E[I]",
            value: expected_cross_ownership,
            bound: bounds.i_max,
        });
    }

    let mean_state = StateVector::from_flat(n, m, means[..state_len].to_vec())?;
    let error_state = StateVector::from_flat(n, m, errors[..state_len].to_vec())?;
    let exogenous_means = means[state_len + 2..].to_vec();
    let exogenous_std_errors = errors[state_len + 2..].to_vec();

    let internal = system.internally_held_claims(&mean_state);
    let exogenous_value = l1_norm(&system.asset_ownership().mul_vec(&exogenous_means));
    let total = mean_state.l1_norm();
    let substituted = LeverageMeasures {
        internal_leverage: if exogenous_value > 0.0 { internal / exogenous_value } else { 0.0 },
        cross_ownership: if total > 0.0 { internal / total } else { 0.0 },
    };

    Ok(PriceReport {
        means: mean_state,
        std_errors: error_state,
        exogenous_means,
        exogenous_std_errors,
        paths,
        seed,
        expected_leverage,
        expected_cross_ownership,
        substituted,
    })
}
