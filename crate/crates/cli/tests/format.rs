use proptest::prelude::*;

use xos_cli::document::{MarketDoc, ScenarioDoc, SolverDoc, SquaredDoc, SystemDoc, TermDoc, VariableDoc};
use xos_cli::{parse, to_toml, Document, FORMAT_VERSION};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    // column sums stay below one
    let entry = 0.0f64..(0.99 / rows as f64);
    proptest::collection::vec(proptest::collection::vec(entry, cols), rows)
}

fn term(q: usize) -> impl Strategy<Value = TermDoc> {
    let weights = proptest::collection::vec(0.0f64..2.0, q);
    prop_oneof![
        (0.0f64..500.0).prop_map(|nominal| TermDoc::Constant { nominal }),
        (weights.clone(), 0.0f64..200.0, 0.0f64..3.0)
            .prop_map(|(weights, strike, size)| TermDoc::Call { weights, strike, size }),
        (weights, 0.0f64..200.0, 0.0f64..3.0).prop_map(|(weights, strike, size)| TermDoc::Put { weights, strike, size }),
    ]
}

fn squared(n: usize, m: usize) -> impl Strategy<Value = SquaredDoc> {
    let variable = prop_oneof![
        (0..n, 1..=m).prop_map(|(firm, seniority)| VariableDoc::Recovery { firm, seniority }),
        (0..n).prop_map(|firm| VariableDoc::Equity { firm }),
    ];
    (0..n, 1..=m, variable, -5.0f64..5.0, 0.0f64..2.0).prop_map(|(firm, seniority, variable, center, scale)| {
        SquaredDoc {
            firm,
            seniority,
            variable,
            center,
            scale,
        }
    })
}

fn market(q: usize) -> impl Strategy<Value = Option<MarketDoc>> {
    proptest::option::of(
        (
            proptest::collection::vec(1.0f64..200.0, q),
            proptest::collection::vec(0.0f64..0.8, q),
            proptest::bool::ANY,
            -0.02f64..0.1,
            0.1f64..5.0,
        )
            .prop_map(move |(spot, vols, identity, rate, maturity)| MarketDoc {
                spot,
                vols,
                correlation: identity.then(|| {
                    (0..q)
                        .map(|i| (0..q).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                        .collect()
                }),
                rate,
                maturity,
            }),
    )
}

fn solver() -> impl Strategy<Value = Option<SolverDoc>> {
    proptest::option::of(
        (
            proptest::option::of(1e-14f64..1e-4),
            proptest::option::of(1u64..1_000_000),
            proptest::option::of(1usize..64),
            proptest::option::of(any::<u32>().prop_map(u64::from)),
        )
            .prop_map(|(tol, max_iter, starts, seed)| SolverDoc {
                tol,
                max_iter,
                starts,
                seed,
                dedup_threshold: None,
            }),
    )
}

fn document() -> impl Strategy<Value = Document> {
    (1usize..4, 1usize..3, 1usize..4).prop_flat_map(|(n, m, q)| {
        let liabilities = proptest::collection::vec(
            proptest::collection::vec(proptest::collection::vec(term(q), 0..3), m),
            n,
        );
        let scenarios = proptest::collection::vec(
            ("[a-z][a-z0-9 _-]{0,8}", proptest::collection::vec(0.0f64..300.0, q))
                .prop_map(|(name, assets)| ScenarioDoc { name, assets }),
            0..4,
        );
        (
            matrix(n, n),
            proptest::collection::vec(matrix(n, n), m),
            matrix(n, q),
            liabilities,
            proptest::collection::vec(squared(n, m), 0..3),
            scenarios,
            market(q),
            solver(),
        )
            .prop_map(
                move |(equity, debt, assets, liabilities, state_dependent, scenarios, market, solver)| Document {
                    version: FORMAT_VERSION,
                    system: SystemDoc {
                        firms: n,
                        seniorities: m,
                        assets: q,
                        equity_ownership: equity,
                        liability_ownership: debt,
                        asset_ownership: assets,
                        liabilities,
                        state_dependent,
                    },
                    scenarios,
                    market,
                    solver,
                },
            )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn serialize_then_parse_is_identity(doc in document()) {
        let text = to_toml(&doc).unwrap();
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        let a = doc.build().unwrap();
        let b = back.build().unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn fixtures_round_trip() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let doc = parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let back = parse(&to_toml(&doc).unwrap()).unwrap();
        assert_eq!(back, doc, "{}", path.display());
        assert_eq!(back.build().unwrap(), doc.build().unwrap());
        count += 1;
    }
    assert!(count >= 10);
}
