use std::sync::Arc;

use ko_radial::grid::{make_grid, Grading};
use ko_radial::model::{power_pair, ProblemSpec, WeightFn};
use ko_radial::solver::{audit_monotone_iterates, picard_solve, IterationConfig};
use ko_radial::transforms::{invert_table, FunctionTable};
use proptest::prelude::*;

fn increasing_table() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    proptest::collection::vec((0.01f64..1.0, 0.01f64..1.0), 2..60).prop_map(|steps| {
        let (mut x, mut y) = (vec![0.0], vec![0.0]);
        for (dx, dy) in steps {
            x.push(x.last().unwrap() + dx);
            y.push(y.last().unwrap() + dy);
        }
        (x, y)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inversion_reproduces_abscissae((x, y) in increasing_table(), t in 0.0f64..1.0) {
        let table = FunctionTable::new(x.clone(), y).unwrap();
        let inv = invert_table(&table).unwrap();
        let q = x[0] + t * (x.last().unwrap() - x[0]);
        let back = inv.eval(table.eval(q).unwrap()).unwrap();
        prop_assert!((back - q).abs() <= 1e-9 * (1.0 + q.abs()));
    }

    #[test]
    fn iterates_increase(alpha in 0.3f64..2.0, beta in 0.3f64..2.0, c1 in 0.0f64..2.0, c2 in 0.0f64..2.0, a in 0.2f64..3.0) {
        let spec = ProblemSpec::new(
            3,
            a,
            a,
            [WeightFn::Constant(c1), WeightFn::Constant(c2)],
            power_pair(alpha, beta).unwrap(),
        )
        .unwrap();
        let grid = Arc::new(make_grid(1.0, 64, Grading::Uniform).unwrap());
        let cfg = IterationConfig::for_problem(&spec, 1e-10).with_audit(true);
        let sol = picard_solve(&spec, grid, &cfg).unwrap();
        prop_assert!(audit_monotone_iterates(sol.history.as_deref().unwrap()));
        prop_assert!(sol.u.values().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(sol.du.values().iter().all(|&d| d >= -1e-12));
    }
}

#[test]
fn single_precision_matches_double() {
    let wide = ProblemSpec::new(
        3,
        1.0f64,
        1.0,
        [WeightFn::Constant(1.0), WeightFn::Constant(1.0)],
        power_pair(1.0, 1.0).unwrap(),
    )
    .unwrap();
    let narrow = ProblemSpec::new(
        3,
        1.0f32,
        1.0,
        [WeightFn::Constant(1.0), WeightFn::Constant(1.0)],
        power_pair(1.0, 1.0).unwrap(),
    )
    .unwrap();
    let g64 = Arc::new(make_grid(2.0f64, 256, Grading::Uniform).unwrap());
    let g32 = Arc::new(make_grid(2.0f32, 256, Grading::Uniform).unwrap());
    let s64 = picard_solve(&wide, g64, &IterationConfig::for_problem(&wide, 1e-10)).unwrap();
    let s32 = picard_solve(&narrow, g32, &IterationConfig::for_problem(&narrow, 1e-6)).unwrap();
    for (a, b) in s64.u.values().iter().zip(s32.u.values()) {
        assert!((a - *b as f64).abs() < 1e-5 * a, "{a} vs {b}");
    }
}
