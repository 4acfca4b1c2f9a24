//! The versioned scenario document.
//!
//! Matrices are row-major nested arrays and must match the declared
//! dimensions exactly. Firm indices start at 0; seniority 1 is the most
//! senior liability.

use serde::{Deserialize, Serialize};
use xos_core::{
    FirmSystem, LiabilitySpec, MarketModel, OwnershipMatrix, PayoffTerm, Scenario, SolverConfig, SquaredTerm,
    StateDependentLiabilities, StateRef,
};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub version: u32,
    pub system: SystemDoc,
    #[serde(rename = "scenario", default)]
    pub scenarios: Vec<ScenarioDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDoc {
    pub firms: usize,
    pub seniorities: usize,
    pub assets: usize,
    pub equity_ownership: Vec<Vec<f64>>,
    /// One firms×firms matrix per seniority.
    pub liability_ownership: Vec<Vec<Vec<f64>>>,
    /// firms×assets.
    pub asset_ownership: Vec<Vec<f64>>,
    /// `[firm][seniority − 1]` lists of payoff terms. Empty means no liabilities.
    #[serde(default)]
    pub liabilities: Vec<Vec<Vec<TermDoc>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub state_dependent: Vec<SquaredDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermDoc {
    Constant {
        nominal: f64,
    },
    Call {
        weights: Vec<f64>,
        strike: f64,
        #[serde(default = "unit")]
        size: f64,
    },
    Put {
        weights: Vec<f64>,
        strike: f64,
        #[serde(default = "unit")]
        size: f64,
    },
}

fn unit() -> f64 {
    1.0
}

/// `scale · (x − center)²` added to the dues of `firm` at `seniority`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquaredDoc {
    pub firm: usize,
    pub seniority: usize,
    pub variable: VariableDoc,
    pub center: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VariableDoc {
    Recovery { firm: usize, seniority: usize },
    Equity { firm: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    pub assets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketDoc {
    pub spot: Vec<f64>,
    pub vols: Vec<f64>,
    /// Identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Vec<Vec<f64>>>,
    pub rate: f64,
    pub maturity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedup_threshold: Option<f64>,
}

/// A document turned into solver inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub system: FirmSystem,
    pub hook: Option<StateDependentLiabilities>,
    pub scenarios: Vec<(String, Scenario)>,
    pub market: Option<MarketModel>,
    pub solver: SolverConfig,
}

pub fn parse(text: &str) -> Result<Document, CliError> {
    let doc: Document = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string().trim_end().to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(CliError::Invalid(format!(
            "unsupported version {}, expected {FORMAT_VERSION}",
            doc.version
        )));
    }
    Ok(doc)
}

pub fn to_toml(doc: &Document) -> Result<String, CliError> {
    toml::to_string(doc).map_err(|e| CliError::Output(e.to_string()))
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn check_matrix(what: &str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<OwnershipMatrix, CliError> {
    if m.len() != rows {
        return Err(invalid(format!("{what}: declared {rows} rows, found {}", m.len())));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != cols {
            return Err(invalid(format!("{what} row {i}: declared {cols} columns, found {}", row.len())));
        }
    }
    OwnershipMatrix::from_rows(m).map_err(|e| invalid(format!("{what}: {e}")))
}

impl TermDoc {
    fn to_term(&self) -> PayoffTerm {
        match self.clone() {
            TermDoc::Constant { nominal } => PayoffTerm::Constant { nominal },
            TermDoc::Call { weights, strike, size } => PayoffTerm::Call { weights, strike, size },
            TermDoc::Put { weights, strike, size } => PayoffTerm::Put { weights, strike, size },
        }
    }
}

impl Document {
    pub fn build(&self) -> Result<Model, CliError> {
        let s = &self.system;
        let (n, m, q) = (s.firms, s.seniorities, s.assets);
        if n == 0 || m == 0 || q == 0 {
            return Err(invalid("firms, seniorities and assets must all be at least 1"));
        }
        let equity = check_matrix("system.equity_ownership", &s.equity_ownership, n, n)?;
        if s.liability_ownership.len() != m {
            return Err(invalid(format!(
                "system.liability_ownership: declared {m} seniorities, found {} matrices",
                s.liability_ownership.len()
            )));
        }
        let debt = s
            .liability_ownership
            .iter()
            .enumerate()
            .map(|(i, mat)| check_matrix(&format!("system.liability_ownership[{}]", i + 1), mat, n, n))
            .collect::<Result<Vec<_>, _>>()?;
        let assets = check_matrix("system.asset_ownership", &s.asset_ownership, n, q)?;

        let liabilities = if s.liabilities.is_empty() {
            vec![vec![LiabilitySpec::zero(); m]; n]
        } else {
            if s.liabilities.len() != n {
                return Err(invalid(format!(
                    "system.liabilities: declared {n} firms, found {}",
                    s.liabilities.len()
                )));
            }
            s.liabilities
                .iter()
                .enumerate()
                .map(|(k, levels)| {
                    if levels.len() != m {
                        return Err(invalid(format!(
                            "system.liabilities[{k}]: declared {m} seniorities, found {}",
                            levels.len()
                        )));
                    }
                    levels
                        .iter()
                        .enumerate()
                        .map(|(i, terms)| {
                            LiabilitySpec::new(terms.iter().map(TermDoc::to_term).collect())
                                .map_err(|e| invalid(format!("liability of firm {k}, seniority {}: {e}", i + 1)))
                        })
                        .collect()
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        let system = FirmSystem::new(equity, debt, assets, liabilities).map_err(|e| invalid(e.to_string()))?;

        let hook = if s.state_dependent.is_empty() {
            None
        } else {
            let terms = s
                .state_dependent
                .iter()
                .map(|t| {
                    let level = |seniority: usize| {
                        seniority
                            .checked_sub(1)
                            .ok_or_else(|| invalid("state_dependent: seniorities start at 1"))
                    };
                    let variable = match t.variable {
                        VariableDoc::Recovery { firm, seniority } => StateRef::Recovery {
                            level: level(seniority)?,
                            firm,
                        },
                        VariableDoc::Equity { firm } => StateRef::Equity { firm },
                    };
                    Ok(SquaredTerm {
                        firm: t.firm,
                        level: level(t.seniority)?,
                        variable,
                        center: t.center,
                        scale: t.scale,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Some(StateDependentLiabilities::new(&system, terms).map_err(|e| invalid(format!("state_dependent: {e}")))?)
        };

        let scenarios = self
            .scenarios
            .iter()
            .map(|sc| {
                if sc.assets.len() != q {
                    return Err(invalid(format!(
                        "scenario {}: declared {q} assets, found {}",
                        sc.name,
                        sc.assets.len()
                    )));
                }
                Scenario::new(sc.assets.clone())
                    .map(|s| (sc.name.clone(), s))
                    .map_err(|e| invalid(format!("scenario {}: {e}", sc.name)))
            })
            .collect::<Result<Vec<_>, _>>()?;

        let market = match &self.market {
            None => None,
            Some(mk) => {
                if mk.spot.len() != q {
                    return Err(invalid(format!("market.spot: declared {q} assets, found {}", mk.spot.len())));
                }
                let model = match &mk.correlation {
                    Some(c) => MarketModel::new(mk.spot.clone(), mk.vols.clone(), c.clone(), mk.rate, mk.maturity),
                    None => MarketModel::uncorrelated(mk.spot.clone(), mk.vols.clone(), mk.rate, mk.maturity),
                };
                Some(model.map_err(|e| invalid(format!("market: {e}")))?)
            }
        };

        let mut solver = SolverConfig::default();
        if let Some(doc) = &self.solver {
            doc.apply(&mut solver);
        }
        solver.validate().map_err(|e| invalid(format!("solver: {e}")))?;

        Ok(Model {
            system,
            hook,
            scenarios,
            market,
            solver,
        })
    }
}

impl SolverDoc {
    pub fn apply(&self, config: &mut SolverConfig) {
        if let Some(tol) = self.tol {
            config.tol = tol;
        }
        if let Some(max_iter) = self.max_iter {
            config.max_iter = max_iter;
        }
        if let Some(starts) = self.starts {
            config.starts = starts;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(d) = self.dedup_threshold {
            config.dedup_threshold = d;
        }
    }
}
