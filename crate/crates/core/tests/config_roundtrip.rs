use ko_radial::config::{
    parse_config, GradingConfig, NonlinearityConfig, NonlinearityKind, NumericsConfig,
    OutputConfig, ProblemConfig, RunConfig, SweepAxis, WeightConfig,
};
use proptest::prelude::*;

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![0.01f64..10.0, 1e-3f64..1e3]
}

fn weight() -> impl Strategy<Value = WeightConfig> {
    prop_oneof![
        (0.0f64..5.0).prop_map(|c| WeightConfig::Constant { c }),
        (0.0f64..5.0, 0.0f64..6.0).prop_map(|(c, sigma)| WeightConfig::PowerDecay { c, sigma }),
        (0.0f64..5.0, 0.0f64..3.0).prop_map(|(c, k)| WeightConfig::Power { c, k }),
        Just(WeightConfig::Zero),
        (proptest::collection::vec(0.0f64..4.0, 17), 0.01f64..1.0).prop_map(|(values, h)| {
            WeightConfig::Tabulated {
                radii: (0..values.len()).map(|k| k as f64 * h).collect(),
                values,
            }
        }),
    ]
}

fn nonlinearity() -> impl Strategy<Value = NonlinearityConfig> {
    (
        prop_oneof![
            Just(NonlinearityKind::PowerPair),
            Just(NonlinearityKind::CoupledPower)
        ],
        positive(),
        positive(),
        proptest::option::of(1.0f64..4.0),
        proptest::option::of(1.0f64..4.0),
        proptest::option::of(positive()),
        proptest::option::of(positive()),
    )
        .prop_map(
            |(family, alpha, beta, c1bar, c2bar, fbar1_exp, fbar2_exp)| NonlinearityConfig {
                family,
                alpha,
                beta,
                c1bar,
                c2bar,
                fbar1_exp,
                fbar2_exp,
            },
        )
}

fn numerics() -> impl Strategy<Value = NumericsConfig> {
    (
        positive(),
        16usize..5000,
        prop_oneof![
            Just(GradingConfig::Uniform),
            (1.0001f64..1.2).prop_map(|ratio| GradingConfig::Geometric { ratio })
        ],
        1e-14f64..1e-4,
        1usize..1000,
        positive(),
        3usize..=40,
    )
        .prop_map(
            |(r_max, grid_points, grading, tol, max_iter, tail_radius_start, tail_doublings)| {
                NumericsConfig {
                    r_max,
                    grid_points,
                    grading,
                    tol,
                    max_iter,
                    tail_radius_start,
                    tail_doublings,
                }
            },
        )
}

fn config() -> impl Strategy<Value = RunConfig> {
    (
        3usize..8,
        positive(),
        positive(),
        positive(),
        0.0f64..3.0,
        0.0f64..3.0,
        weight(),
        weight(),
        nonlinearity(),
        numerics(),
        proptest::option::of("[a-z]{1,8}\\.csv"),
        proptest::bool::ANY,
    )
        .prop_map(
            |(n_dim, a1, a2, eps, x1, x2, w1, w2, nonlinearity, numerics, csv, sweep)| {
                let min = |a: f64| 1f64.max(1.0 / a);
                RunConfig {
                    problem: ProblemConfig {
                        n_dim,
                        a1,
                        a2,
                        eps,
                        m1: min(a1) + x1,
                        m2: min(a2) + x2,
                    },
                    weights: [w1, w2],
                    nonlinearity,
                    numerics,
                    output: OutputConfig {
                        csv_path: csv.map(Into::into),
                        report_path: None,
                    },
                    sweep: if sweep {
                        vec![SweepAxis {
                            key: "nonlinearity.alpha".into(),
                            values: vec![0.5.into(), 2.0.into()],
                        }]
                    } else {
                        Vec::new()
                    },
                }
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn parse_emit_round_trip(cfg in config()) {
        let text = cfg.emit();
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, cfg);
    }
}
