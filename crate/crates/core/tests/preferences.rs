use endo_robust::oracle::{box_regret, box_regret_by_vertices};
use endo_robust::preferences::{
    regret_certificate, regret_columnwise_value, regret_exact_eval, ColumnwiseClause, ColumnwiseLp, PreferenceKind,
    RegretMode,
};
use endo_robust::robust::RobustFormulation;
use endo_robust::spp::{generate_instance, ArcRule, Flavor, GeneratorKind, GeneratorParams};
use proptest::prelude::*;

fn signs(q: usize) -> Vec<Vec<f64>> {
    (0..1u32 << q).map(|m| (0..q).map(|j| if (m >> j) & 1 == 1 { 1.0 } else { -1.0 }).collect()).collect()
}

/// Every combination of block vertices.
fn block_vertices(widths: &[usize]) -> Vec<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new()];
    for &w in widths {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Vec<f64>>| {
                signs(w).into_iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

fn optimistic_regret(p: &ColumnwiseLp, x: &[f64], samples: &[Vec<Vec<f64>>]) -> f64 {
    let best = samples
        .iter()
        .filter_map(|u| p.realized_optimum(u).unwrap())
        .fold(f64::INFINITY, f64::min);
    p.cost().iter().zip(x).map(|(c, x)| c * x).sum::<f64>() - best
}

#[test]
fn columnwise_single_row_matches_vertex_enumeration() {
    // Covering-type row written as <=: -(2 + u0) y0 - (3 + 0.5 u1) y1 <= -(6 + u_b).
    let p = ColumnwiseLp::new(
        vec![1.0, 1.5],
        vec![vec![-2.0], vec![-3.0]],
        vec![vec![vec![-1.0]], vec![vec![-0.5]]],
        vec![-6.0],
        vec![vec![-1.0]],
    )
    .unwrap();
    let vertices = block_vertices(&p.block_widths());
    for x in [[3.0, 0.0], [0.0, 2.0], [1.0, 1.0]] {
        let dual = regret_columnwise_value(&p, &x).unwrap();
        let brute = optimistic_regret(&p, &x, &vertices);
        assert!((dual - brute).abs() < 1e-7, "x {x:?}: {dual} vs {brute}");
    }
}

#[test]
fn columnwise_two_rows_dominate_vertex_regret() {
    let p = ColumnwiseLp::new(
        vec![2.0, 1.0, 3.0],
        vec![vec![-1.0, -1.0], vec![-2.0, 0.0], vec![0.0, -3.0]],
        vec![
            vec![vec![-0.5], vec![0.2]],
            vec![vec![0.3], vec![0.0]],
            vec![vec![0.0], vec![-1.0]],
        ],
        vec![-4.0, -3.0],
        vec![vec![0.5], vec![0.5]],
    )
    .unwrap();
    let vertices = block_vertices(&p.block_widths());
    let x = [2.0, 1.0, 1.0];
    let dual = regret_columnwise_value(&p, &x).unwrap();
    assert!(dual >= optimistic_regret(&p, &x, &vertices) - 1e-7);
}

#[test]
fn columnwise_shape_errors_name_the_clause() {
    let err = ColumnwiseLp::new(vec![1.0], vec![vec![1.0, 2.0]], vec![vec![vec![0.0]]], vec![1.0], vec![vec![0.0]]);
    assert_eq!(err, Err(ColumnwiseClause::RowCount));
    let err = ColumnwiseLp::new(vec![1.0, 2.0], vec![vec![1.0]], vec![vec![vec![0.0]]], vec![1.0], vec![vec![0.0]]);
    assert_eq!(err, Err(ColumnwiseClause::ColumnStructure));
    let err = ColumnwiseLp::new(vec![f64::NAN], vec![vec![1.0]], vec![vec![vec![0.0]]], vec![1.0], vec![vec![0.0]]);
    assert_eq!(err, Err(ColumnwiseClause::NonFinite));
}

#[test]
fn preference_names_round_trip() {
    for p in [
        PreferenceKind::Predictability,
        PreferenceKind::BestCase,
        PreferenceKind::Regret(RegretMode::Exact),
        PreferenceKind::Regret(RegretMode::RltBound),
        PreferenceKind::Regret(RegretMode::Columnwise),
    ] {
        assert_eq!(p.name().parse::<PreferenceKind>().unwrap(), p);
    }
    assert!("foo".parse::<PreferenceKind>().is_err());
}

fn small(kind: GeneratorKind, seed: u64) -> endo_robust::spp::SppInstance {
    let params = GeneratorParams::new(kind, 7, 2, seed)
        .with_box_dim(3)
        .with_arc_rule(ArcRule::Window { max_gap: 3, p: 0.6 });
    generate_instance(&params).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn interval_regret_dual_matches_enumeration(seed in 0u64..10_000) {
        let inst = small(GeneratorKind::BilevelInterval, seed);
        let p = inst.build_problem(Flavor::Interval).unwrap();
        let paths = inst.enumerate_paths(1_000).paths;
        for x in paths.iter().take(6) {
            for s in 0..2 {
                let dual = p.preference(x, s, PreferenceKind::Regret(RegretMode::Exact)).unwrap();
                let brute = box_regret(&p.regime(s).cost_map, x, &paths).unwrap();
                let milp = regret_exact_eval(&p, x, s).unwrap();
                prop_assert!((dual - brute).abs() < 1e-6, "{} vs {}", dual, brute);
                prop_assert!((milp - brute).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn lifted_bound_dominates_exact_regret(seed in 0u64..10_000, correlated in any::<bool>()) {
        let (kind, flavor) = if correlated {
            (GeneratorKind::BilevelCorrelated, Flavor::Correlated)
        } else {
            (GeneratorKind::BilevelBox, Flavor::Box)
        };
        let inst = small(kind, seed);
        let p = inst.build_problem(flavor).unwrap();
        let paths = inst.enumerate_paths(1_000).paths;
        for x in paths.iter().take(4) {
            let cert = regret_certificate(&p, x, 0).unwrap();
            let exchange = box_regret(&p.regime(0).cost_map, x, &paths).unwrap();
            let vertices = box_regret_by_vertices(&p.regime(0).cost_map, x, &paths).unwrap();
            prop_assert!((exchange - vertices).abs() < 1e-9);
            prop_assert!((cert.exact_value.unwrap() - exchange).abs() < 1e-6);
            prop_assert!(cert.bound_value >= exchange - 1e-6);
        }
    }

    #[test]
    fn predictability_is_worst_minus_best(seed in 0u64..10_000) {
        let inst = small(GeneratorKind::BilevelBox, seed);
        let p = inst.build_problem(Flavor::Box).unwrap();
        for x in inst.enumerate_paths(20).paths {
            let cm = &p.regime(1).cost_map;
            let pred = p.preference(&x, 1, PreferenceKind::Predictability).unwrap();
            let best = p.preference(&x, 1, PreferenceKind::BestCase).unwrap();
            prop_assert!((pred - (cm.worst_case_value(&x).unwrap() - cm.best_case_value(&x).unwrap())).abs() < 1e-7);
            prop_assert!((best - cm.best_case_value(&x).unwrap()).abs() < 1e-7);
        }
    }
}
