use endo_robust::oracle::{brute_force_bilevel, brute_force_epsilon, brute_force_rc, box_regret};
use endo_robust::preferences::{regret_exact_eval, PreferenceKind, RegretMode};
use endo_robust::robust::{solve_bilevel, solve_endogenous_rc, solve_epsilon, Encoding, Epsilon, RobustFormulation, SolveOptions};
use endo_robust::spp::{example_diamond_correlated, example_diamond_interval, example_three_regimes, Flavor};

const PRED: PreferenceKind = PreferenceKind::Predictability;
const BEST: PreferenceKind = PreferenceKind::BestCase;
const REGRET: PreferenceKind = PreferenceKind::Regret(RegretMode::Exact);

/// Path through E1, E2, or E3 (arc 0, 1, 2) plus its super-sink arc.
fn path(k: usize) -> Vec<f64> {
    let mut x = vec![0.0; 5];
    x[k] = 1.0;
    x[if k < 2 { 3 } else { 4 }] = 1.0;
    x
}

#[test]
fn three_regimes_have_expected_robust_values() {
    let p = example_three_regimes().build_problem(Flavor::Interval).unwrap();
    let rc = solve_endogenous_rc(&p).unwrap();
    assert_eq!(rc.phi, vec![Some(5.0), Some(4.0), Some(4.0)]);
    assert_eq!(rc.best, 1);
    assert_eq!(rc.phi_star, 4.0);
}

#[test]
fn three_regimes_oracle_sets() {
    let inst = example_three_regimes();
    let p = inst.build_problem(Flavor::Interval).unwrap();
    let paths = inst.enumerate_paths(100).paths;
    assert_eq!(paths.len(), 3);
    let u1 = brute_force_rc(&p, 1, &paths).unwrap();
    assert_eq!(u1.value, 4.0);
    assert_eq!(u1.argmin, vec![path(0), path(1)]);
    assert_eq!(brute_force_rc(&p, 0, &paths).unwrap().argmin.len(), 3);
}

#[test]
fn three_regimes_table_values() {
    let inst = example_three_regimes();
    let p = inst.build_problem(Flavor::Interval).unwrap();
    let paths = inst.enumerate_paths(100).paths;
    // (arc, regime) -> (predictability, regret, best case)
    let rows = [
        (0, 1, 1.0, 2.0, 3.0),
        (1, 1, 2.0, 1.0, 2.0),
        (2, 2, 3.0, 2.0, 1.0),
    ];
    for (k, s, pred, regret, best) in rows {
        let x = path(k);
        assert_eq!(p.preference(&x, s, PRED).unwrap(), pred);
        assert_eq!(p.preference(&x, s, BEST).unwrap(), best);
        assert_eq!(p.preference(&x, s, REGRET).unwrap(), regret, "arc {k}");
        assert_eq!(box_regret(&p.regime(s).cost_map, &x, &paths).unwrap(), regret);
    }
}

#[test]
fn three_regimes_bilevel_choices() {
    let inst = example_three_regimes();
    let p = inst.build_problem(Flavor::Interval).unwrap();
    let paths = inst.enumerate_paths(100).paths;
    for encoding in [Encoding::OneHot, Encoding::Enumerated] {
        let opts = SolveOptions { encoding, ..SolveOptions::default() };
        for (pref, k, s) in [(PRED, 0, 1), (REGRET, 1, 1), (BEST, 2, 2)] {
            let out = solve_bilevel(&p, pref, 0.0, &opts).unwrap();
            assert_eq!(out.x, path(k), "{pref} {encoding:?}");
            assert_eq!(out.regime, s);
            assert_eq!(out.worst_case, 4.0);
            assert_eq!(out.preference_value, 1.0);
            let oracle = brute_force_bilevel(&p, pref, 0.0, &paths).unwrap();
            assert_eq!(oracle.x, out.x);
            assert_eq!(oracle.regime, out.regime);
        }
    }
}

#[test]
fn three_regimes_epsilon_zero_matches_bilevel() {
    let inst = example_three_regimes();
    let p = inst.build_problem(Flavor::Interval).unwrap();
    let paths = inst.enumerate_paths(100).paths;
    for pref in [PRED, REGRET, BEST] {
        let eps = Epsilon::absolute(0.0);
        let out = solve_epsilon(&p, pref, eps, &SolveOptions::default()).unwrap();
        let oracle = brute_force_epsilon(&p, pref, eps, &paths).unwrap();
        let bilevel = brute_force_bilevel(&p, pref, 0.0, &paths).unwrap();
        assert_eq!(out.total_objective, oracle.total_objective);
        assert_eq!(oracle.total_objective, bilevel.total_objective);
    }
}

#[test]
fn diamond_regret_values() {
    let interval = example_diamond_interval();
    let p = interval.build_problem(Flavor::Interval).unwrap();
    let paths = interval.enumerate_paths(10).paths;
    assert_eq!(paths.len(), 2);
    for x in &paths {
        assert!((p.preference(x, 0, REGRET).unwrap() - 2.0).abs() < 1e-9);
        assert!((regret_exact_eval(&p, x, 0).unwrap() - 2.0).abs() < 1e-9);
    }
    let corr = example_diamond_correlated();
    let p = corr.build_problem(Flavor::Correlated).unwrap();
    for x in &paths {
        let bound = p.preference(x, 0, PreferenceKind::Regret(RegretMode::RltBound)).unwrap();
        assert!(bound.abs() < 1e-9, "bound {bound}");
        assert!(regret_exact_eval(&p, x, 0).unwrap().abs() < 1e-9);
        assert!(box_regret(&p.regime(0).cost_map, x, &paths).unwrap().abs() < 1e-9);
    }
}
