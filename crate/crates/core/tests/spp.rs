use endo_robust::oracle::binary_points;
use endo_robust::robust::solve_rc;
use endo_robust::spp::{generate_instance, ArcRule, Flavor, GeneratorKind, GeneratorParams, SppInstance};
use endo_robust::uncertainty::{CostKind, CostMap};
use proptest::prelude::*;

#[test]
fn incidence_columns_have_one_tail_and_one_head() {
    let inst = endo_robust::spp::example_three_regimes();
    let (e, d) = inst.incidence();
    for k in 0..inst.arcs().len() {
        let col: Vec<f64> = e.iter().map(|row| row[k]).collect();
        let (t, h) = inst.arcs()[k];
        assert_eq!(col[t], -1.0);
        assert_eq!(col[h], 1.0);
        assert_eq!(col.iter().sum::<f64>(), 0.0);
    }
    assert_eq!(d.iter().sum::<f64>(), 0.0);
    assert_eq!(d[inst.source()], -1.0);
    assert_eq!(d[inst.sink()], 1.0);
    assert_eq!(inst.flow_rows().len(), inst.node_count() - 1);
}

#[test]
fn generated_interval_costs_stay_in_range() {
    let params = GeneratorParams::new(GeneratorKind::EpsilonStudy, 30, 5, 7);
    let inst = generate_instance(&params).unwrap();
    assert_eq!(inst.node_count(), 30);
    assert_eq!(inst.regimes().len(), 5);
    assert!(inst.sink_reachable());
    for (i, j) in inst.arcs() {
        assert!(i < j && j - i <= 10);
    }
    for r in inst.regimes() {
        assert_eq!(r.activation_cost, 0.0);
        let CostMap::Interval { lower, upper } = &r.cost_map else { panic!("interval expected") };
        assert!(lower.iter().all(|v| (8.0..=10.0).contains(v)));
        assert!(upper.iter().all(|v| (10.0..=12.0).contains(v)));
    }
}

#[test]
fn generated_box_maps_have_requested_width() {
    for (kind, lo) in [(GeneratorKind::BilevelBox, -0.5), (GeneratorKind::BilevelCorrelated, 0.0)] {
        let inst = generate_instance(&GeneratorParams::new(kind, 12, 3, 11).with_box_dim(4)).unwrap();
        for r in inst.regimes() {
            assert_eq!(r.cost_map.uncertainty_dim(), 4);
            let form = r.cost_map.to_box().unwrap();
            assert!(form.nominal.iter().all(|v| (8.0..=12.0).contains(v)));
            assert!(form.loading.iter().flatten().all(|v| (lo..=0.5).contains(v)));
        }
    }
    assert!(generate_instance(&GeneratorParams::new(GeneratorKind::BilevelBox, 12, 3, 11)).is_err());
}

#[test]
fn generation_is_deterministic_per_seed() {
    let p = GeneratorParams::new(GeneratorKind::BilevelInterval, 15, 3, 99);
    let a = generate_instance(&p).unwrap();
    let b = generate_instance(&p).unwrap();
    assert_eq!(a.arcs(), b.arcs());
    assert_eq!(a.regimes(), b.regimes());
    let c = generate_instance(&GeneratorParams { seed: 100, ..p }).unwrap();
    assert_ne!(a.regimes(), c.regimes());
}

#[test]
fn invalid_instances_are_rejected() {
    let cm = CostMap::interval(vec![1.0], vec![2.0]).unwrap();
    let r = endo_robust::uncertainty::Regime::new("U", 0.0, cm);
    assert!(SppInstance::new("x", 2, vec![(0, 2)], 0, 1, vec![r.clone()]).is_err());
    assert!(SppInstance::new("x", 2, vec![(0, 1)], 0, 0, vec![r.clone()]).is_err());
    assert!(SppInstance::new("x", 2, vec![(0, 1)], 0, 1, vec![]).is_err());
    let inst = SppInstance::new("x", 2, vec![(0, 1)], 0, 1, vec![r]).unwrap();
    assert!(inst.build_problem(Flavor::Correlated).is_err());
    assert_eq!(inst.build_problem(Flavor::Box).unwrap().kind(), CostKind::GeneralBox);
}

fn small(seed: u64) -> SppInstance {
    let params = GeneratorParams::new(GeneratorKind::BilevelInterval, 6, 2, seed)
        .with_arc_rule(ArcRule::Window { max_gap: 3, p: 0.6 });
    generate_instance(&params).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn paths_are_the_binary_flow_solutions(seed in 0u64..10_000) {
        let inst = small(seed);
        prop_assume!(inst.arcs().len() <= 14);
        let p = inst.build_problem(Flavor::Interval).unwrap();
        let mut paths = inst.enumerate_paths(10_000).paths;
        let mut points = binary_points(&p).unwrap();
        let key = |v: &Vec<f64>| v.iter().map(|x| *x as u8).collect::<Vec<_>>();
        paths.sort_by_key(key);
        points.sort_by_key(key);
        prop_assert_eq!(paths, points);
    }

    #[test]
    fn flow_relaxation_has_integral_optima(seed in 0u64..10_000) {
        let inst = generate_instance(&GeneratorParams::new(GeneratorKind::BilevelInterval, 12, 2, seed)).unwrap();
        let p = inst.build_problem(Flavor::Interval).unwrap();
        for s in 0..2 {
            let rc = solve_rc(&p, s).unwrap();
            prop_assert!(rc.x.iter().all(|v| (v - v.round()).abs() < 1e-7), "{:?}", rc.x);
        }
    }
}
