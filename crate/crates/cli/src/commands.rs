//! One function per subcommand. Each returns a report and an exit code; all
//! scenarios are evaluated before anything is printed.

use std::path::Path;

use log::{debug, info};
use rayon::prelude::*;
use xos_core::{
    classify_with_hook, leverage_bounds, leverage_report, price_with_hook, scan_equilibria, solve_with_hook,
    AssumptionClass, Equilibrium, LiabilityHook, MetricMode, PricingConfig, Scenario, SolverConfig, StateVector,
    XosError,
};

use crate::document::{Document, Model};
use crate::error::{exit, CliError};
use crate::output::{Cell, Report, Section};

fn hook(model: &Model) -> Option<&dyn LiabilityHook> {
    model.hook.as_ref().map(|h| h as &dyn LiabilityHook)
}

fn class_label(class: AssumptionClass) -> &'static str {
    class.label()
}

/// Runs `f` for every scenario, in parallel if asked, keeping input order.
fn per_scenario<T: Send>(
    model: &Model,
    parallel: bool,
    f: impl Fn(&str, &Scenario) -> Result<T, XosError> + Sync,
) -> Result<Vec<T>, CliError> {
    if model.scenarios.is_empty() {
        return Err(CliError::Invalid("document contains no [[scenario]] entries".into()));
    }
    let run = |(name, scenario): &(String, Scenario)| {
        f(name, scenario).map_err(|source| CliError::Scenario {
            scenario: name.clone(),
            source,
        })
    };
    if parallel {
        model.scenarios.par_iter().map(run).collect()
    } else {
        model.scenarios.iter().map(run).collect()
    }
}

fn claim_columns(m: usize) -> Vec<String> {
    let mut cols = vec!["s".to_string()];
    cols.extend((1..=m).map(|i| format!("r{i}")));
    cols
}

fn claim_cells(state: &StateVector, firm: usize) -> Vec<Cell> {
    let mut cells = vec![Cell::Num(state.equity()[firm])];
    cells.extend((0..state.seniorities()).map(|i| Cell::Num(state.recovery(i)[firm])));
    cells
}

pub fn check(doc: &Document) -> Result<(Report, u8), CliError> {
    let model = doc.build()?;
    let system = &model.system;
    let report = system.validate();
    let class = classify_with_hook(system, hook(&model));
    let bounds = leverage_bounds(system);

    let mut matrices = Section::new("matrices", &["matrix", "valid", "violations"]);
    for (label, r) in report.labelled() {
        let violations: Vec<String> = r.violations.iter().map(ToString::to_string).collect();
        matrices.push(vec![label.into(), r.is_valid().into(), violations.join("; ").into()]);
    }
    let mut summary = Section::new("summary", &["valid", "i_max", "l_max", "class", "unique"]);
    summary.push(vec![
        report.is_valid().into(),
        bounds.i_max.into(),
        bounds.l_max.into(),
        class_label(class).into(),
        (report.is_valid() && class.guarantees_uniqueness()).into(),
    ]);
    let code = if !report.is_valid() {
        exit::INVALID_INPUT
    } else if class.guarantees_uniqueness() {
        exit::SUCCESS
    } else {
        exit::UNKNOWN_CLASS
    };
    Ok((Report { sections: vec![matrices, summary] }, code))
}

fn log_equilibrium(name: &str, eq: &Equilibrium) {
    info!(
        "scenario {name}: {} after {} iterations, residual {:e}",
        if eq.converged { "converged" } else { "stopped" },
        eq.iterations,
        eq.residual
    );
    debug!("scenario {name}: state {:?}", eq.state.as_slice());
}

pub fn solve(model: &Model, config: &SolverConfig, parallel: bool) -> Result<Report, CliError> {
    let results = per_scenario(model, parallel, |name, scenario| {
        let eq = solve_with_hook(&model.system, scenario, config, hook(model))?;
        log_equilibrium(name, &eq);
        Ok(eq)
    })?;
    let (n, m) = (model.system.firms(), model.system.seniorities());
    let mut columns = vec!["scenario".to_string(), "firm".to_string()];
    columns.extend(claim_columns(m));
    columns.extend(["balance_residual".to_string(), "iterations".to_string()]);
    let mut table = Section::with_columns("equilibria", columns).grouped(1);
    let mut diagnostics = Section::new(
        "diagnostics",
        &["scenario", "iterations", "residual", "iteration_bound", "class", "unique"],
    );
    for ((name, _), eq) in model.scenarios.iter().zip(&results) {
        for k in 0..n {
            let mut row: Vec<Cell> = vec![name.as_str().into(), k.into()];
            row.extend(claim_cells(&eq.state, k));
            row.push(eq.balance_residual[k].into());
            row.push(eq.iterations.into());
            table.push(row);
        }
        diagnostics.push(vec![
            name.as_str().into(),
            eq.iterations.into(),
            eq.residual.into(),
            eq.iteration_bound.into(),
            class_label(eq.class).into(),
            eq.guaranteed_unique().into(),
        ]);
    }
    Ok(Report {
        sections: vec![table, diagnostics],
    })
}

pub fn scan(model: &Model, config: &SolverConfig, parallel: bool) -> Result<Report, CliError> {
    let results = per_scenario(model, parallel, |name, scenario| {
        let report = scan_equilibria(&model.system, scenario, config, hook(model))?;
        info!(
            "scenario {name}: {} distinct equilibria from {} starts ({} non-convergent)",
            report.equilibria.len(),
            report.starts,
            report.non_convergent
        );
        Ok(report)
    })?;
    let (n, m) = (model.system.firms(), model.system.seniorities());
    let mut header = Section::new(
        "scan",
        &["scenario", "equilibria", "starts", "non_convergent", "class", "possibly_none"],
    );
    let mut columns = vec!["scenario".to_string(), "equilibrium".to_string(), "firm".to_string()];
    columns.extend(claim_columns(m));
    columns.push("balance_residual".to_string());
    let mut blocks = Section::with_columns("equilibria", columns).grouped(2);
    for ((name, _), report) in model.scenarios.iter().zip(&results) {
        header.push(vec![
            name.as_str().into(),
            report.equilibria.len().into(),
            report.starts.into(),
            report.non_convergent.into(),
            class_label(report.class).into(),
            report.possibly_none().into(),
        ]);
        for (j, eq) in report.equilibria.iter().enumerate() {
            for k in 0..n {
                let mut row: Vec<Cell> = vec![name.as_str().into(), (j + 1).into(), k.into()];
                row.extend(claim_cells(&eq.state, k));
                row.push(eq.balance_residual[k].into());
                blocks.push(row);
            }
        }
    }
    Ok(Report {
        sections: vec![header, blocks],
    })
}

pub fn metrics(model: &Model, config: &SolverConfig, parallel: bool) -> Result<Report, CliError> {
    let results = per_scenario(model, parallel, |name, scenario| {
        let eq = solve_with_hook(&model.system, scenario, config, hook(model))?;
        log_equilibrium(name, &eq);
        // a zero exogenous base is reported in the row, not as a failure
        Ok(leverage_report(&model.system, scenario, &eq.state))
    })?;
    let bounds = leverage_bounds(&model.system);
    let mut table = Section::new(
        "metrics",
        &[
            "scenario",
            "L",
            "I",
            "L_ex",
            "I_max",
            "L_max",
            "total_claims",
            "exogenous_total",
            "error",
        ],
    );
    for ((name, _), result) in model.scenarios.iter().zip(results) {
        let row = match result {
            Ok(r) => vec![
                name.as_str().into(),
                r.internal_leverage.into(),
                r.cross_ownership.into(),
                r.external_leverage.into(),
                r.i_max.into(),
                r.l_max.into(),
                r.total_claims.into(),
                r.exogenous_total.into(),
                "".into(),
            ],
            Err(e) => vec![
                name.as_str().into(),
                Cell::Undef,
                Cell::Undef,
                Cell::Undef,
                bounds.i_max.into(),
                bounds.l_max.into(),
                Cell::Undef,
                Cell::Undef,
                e.to_string().into(),
            ],
        };
        table.push(row);
    }
    Ok(Report { sections: vec![table] })
}

pub struct PriceOptions<'a> {
    pub paths: usize,
    pub reproducible: bool,
    pub plot_data: Option<&'a Path>,
}

pub fn price(model: &Model, config: &SolverConfig, options: &PriceOptions<'_>) -> Result<Report, CliError> {
    let market = model
        .market
        .as_ref()
        .ok_or_else(|| CliError::Invalid("price needs a [market] section".into()))?;
    let pricing = PricingConfig {
        solver: config.clone(),
        reproducible: options.reproducible,
    };
    info!("pricing with {} paths, seed {}", options.paths, config.seed);
    let report = price_with_hook(&model.system, market, options.paths, config.seed, &pricing, hook(model))?;
    let (n, m) = (model.system.firms(), model.system.seniorities());

    // claims in state order: r1 for every firm, …, rm, then s
    let mut claims: Vec<(String, usize, f64, f64)> = Vec::new();
    for i in 0..m {
        for k in 0..n {
            claims.push((format!("r{}", i + 1), k, report.means.recovery(i)[k], report.std_errors.recovery(i)[k]));
        }
    }
    for k in 0..n {
        claims.push(("s".into(), k, report.means.equity()[k], report.std_errors.equity()[k]));
    }

    let mut prices = Section::new("prices", &["claim", "firm", "mean", "std_error"]);
    for (claim, firm, mean, se) in &claims {
        prices.push(vec![claim.as_str().into(), (*firm).into(), (*mean).into(), (*se).into()]);
    }
    let mut assets = Section::new("exogenous", &["asset", "spot", "discounted_mean", "std_error"]);
    for (j, spot) in market.spot().iter().enumerate() {
        assets.push(vec![
            j.into(),
            (*spot).into(),
            report.exogenous_means[j].into(),
            report.exogenous_std_errors[j].into(),
        ]);
    }
    let mut leverage = Section::new("leverage", &["metric_mode", "L", "I"]);
    for (mode, label) in [
        (MetricMode::Expectation, "expectation"),
        (MetricMode::PriceSubstitution, "price_substitution"),
    ] {
        let v = report.measures(mode);
        leverage.push(vec![label.into(), v.internal_leverage.into(), v.cross_ownership.into()]);
    }
    let bounds = leverage_bounds(&model.system);
    let mut summary = Section::new(
        "summary",
        &["paths", "seed", "rate", "maturity", "numeraire", "I_max", "L_max"],
    );
    summary.push(vec![
        report.paths.into(),
        report.seed.into(),
        market.rate().into(),
        market.maturity().into(),
        "money_market".into(),
        bounds.i_max.into(),
        bounds.l_max.into(),
    ]);

    if let Some(path) = options.plot_data {
        let mut plot = Section::new("plot", &["index", "claim", "firm", "price", "std_error"]);
        for (idx, (claim, firm, mean, se)) in claims.iter().enumerate() {
            plot.push(vec![idx.into(), claim.as_str().into(), (*firm).into(), (*mean).into(), (*se).into()]);
        }
        let mut file = std::fs::File::create(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Report { sections: vec![plot] }.render(crate::output::Format::Csv, &mut file)?;
        info!("plot data written to {}", path.display());
    }

    Ok(Report {
        sections: vec![prices, assets, leverage, summary],
    })
}
