use endo_robust::milp::*;
use proptest::prelude::*;

fn expr(terms: &[(Var, f64)]) -> LinExpr<f64> {
    LinExpr::from_terms(terms.iter().copied())
}

#[test]
fn covering_lp_has_unit_dual() {
    let mut m = Model::new(Direction::Minimize);
    let x1 = m.add_continuous("x1", 0.0, f64::INFINITY);
    let x2 = m.add_continuous("x2", 0.0, f64::INFINITY);
    m.constrain(expr(&[(x1, 1.0), (x2, 1.0)]), Sense::Ge, 1.0, "cover");
    m.set_objective(expr(&[(x1, 1.0), (x2, 1.0)]));
    let r = solve_lp(&m).unwrap();
    assert_eq!(r.status, LpStatus::Optimal);
    assert!((r.objective - 1.0).abs() < 1e-9);
    assert!((r.duals[0] - 1.0).abs() < 1e-9);
}

#[test]
fn contradictory_bound_is_infeasible() {
    let mut m = Model::new(Direction::Minimize);
    let x1 = m.add_continuous("x1", 0.0, f64::INFINITY);
    m.constrain(expr(&[(x1, 1.0)]), Sense::Le, -1.0, "neg");
    m.set_objective(expr(&[(x1, 1.0)]));
    assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn unbounded_lp_is_reported() {
    let mut m = Model::new(Direction::Maximize);
    let x = m.add_continuous("x", 0.0, f64::INFINITY);
    let y = m.add_continuous("y", 0.0, f64::INFINITY);
    m.constrain(expr(&[(x, 1.0), (y, -1.0)]), Sense::Le, 1.0, "r");
    m.set_objective(expr(&[(x, 1.0)]));
    assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn dangling_variable_is_a_construction_error() {
    let mut a = Model::<f64>::new(Direction::Minimize);
    let mut b = Model::<f64>::new(Direction::Minimize);
    b.add_continuous("u", 0.0, 1.0);
    let v = b.add_continuous("v", 0.0, 1.0);
    let err = a.add_constraint(Constraint::new(LinExpr::from(v), Sense::Le, 1.0, "bad"));
    assert!(matches!(err, Err(ModelError::DanglingVariable { .. })));
}

#[test]
fn lp_rejects_binaries() {
    let mut m = Model::<f64>::new(Direction::Minimize);
    m.add_binary("b");
    assert!(matches!(solve_lp(&m), Err(ModelError::NotContinuous { .. })));
}

/// Beale's example cycles under textbook Dantzig pricing.
#[test]
fn beale_cycling_example_terminates() {
    let mut m = Model::new(Direction::Minimize);
    let x: Vec<Var> = (0..4).map(|i| m.add_continuous(format!("x{i}"), 0.0, f64::INFINITY)).collect();
    m.constrain(expr(&[(x[0], 0.25), (x[1], -8.0), (x[2], -1.0), (x[3], 9.0)]), Sense::Le, 0.0, "r1");
    m.constrain(expr(&[(x[0], 0.5), (x[1], -12.0), (x[2], -0.5), (x[3], 3.0)]), Sense::Le, 0.0, "r2");
    m.constrain(expr(&[(x[2], 1.0)]), Sense::Le, 1.0, "r3");
    m.set_objective(expr(&[(x[0], -0.75), (x[1], 20.0), (x[2], -0.5), (x[3], 6.0)]));
    let r = solve_lp_with(&m, LpOptions { max_iterations: Some(1000), stall_threshold: 0 }).unwrap();
    assert_eq!(r.status, LpStatus::Optimal);
    assert!((r.objective + 1.25).abs() < 1e-9);
}

#[test]
fn duplicated_rows_terminate() {
    let mut m = Model::new(Direction::Maximize);
    let x: Vec<Var> = (0..3).map(|i| m.add_continuous(format!("x{i}"), 0.0, f64::INFINITY)).collect();
    for k in 0..4 {
        m.constrain(expr(&[(x[0], 1.0), (x[1], 1.0), (x[2], 1.0)]), Sense::Le, 2.0, format!("dup{k}"));
        m.constrain(expr(&[(x[0], 1.0), (x[1], -1.0)]), Sense::Eq, 0.0, format!("eq{k}"));
    }
    m.set_objective(expr(&[(x[0], 1.0), (x[1], 1.0), (x[2], 1.0)]));
    let r = solve_lp(&m).unwrap();
    assert_eq!(r.status, LpStatus::Optimal);
    assert!((r.objective - 2.0).abs() < 1e-9);
}

fn tiny_knapsack() -> (Model<f64>, Var, Var) {
    let mut m = Model::new(Direction::Maximize);
    let x1 = m.add_binary("x1");
    let x2 = m.add_binary("x2");
    m.constrain(expr(&[(x1, 2.0), (x2, 2.0)]), Sense::Le, 3.0, "cap");
    m.set_objective(expr(&[(x1, 3.0), (x2, 2.0)]));
    (m, x1, x2)
}

#[test]
fn binary_knapsack_picks_first_item() {
    let (m, x1, x2) = tiny_knapsack();
    let r = solve_milp(&m, None);
    assert_eq!(r.status, MilpStatus::Optimal);
    assert_eq!(r.incumbent[x1.index()], 1.0);
    assert_eq!(r.incumbent[x2.index()], 0.0);
    assert!((r.objective - 3.0).abs() < 1e-9);
}

#[test]
fn lazy_cut_moves_the_knapsack_optimum() {
    let (m, x1, x2) = tiny_knapsack();
    let mut cb = |x: &[f64]| {
        if x[x1.index()] > 0.5 {
            vec![Constraint::new(LinExpr::from(x1), Sense::Le, 0.0, "no_x1")]
        } else {
            Vec::new()
        }
    };
    let r = solve_milp(&m, Some(&mut cb));
    assert_eq!(r.status, MilpStatus::Optimal);
    assert_eq!(r.incumbent[x1.index()], 0.0);
    assert_eq!(r.incumbent[x2.index()], 1.0);
    assert!((r.objective - 2.0).abs() < 1e-9);
    assert_eq!(r.lazy_cuts_added, 1);
}

#[test]
fn integral_relaxation_matches_lp() {
    let mut m = Model::new(Direction::Minimize);
    let a = m.add_binary("a");
    let b = m.add_binary("b");
    m.constrain(expr(&[(a, 1.0), (b, 1.0)]), Sense::Eq, 1.0, "one");
    m.set_objective(expr(&[(a, 2.0), (b, 1.0)]));
    let r = solve_milp(&m, None);
    assert_eq!(r.node_count, 1);
    assert!((r.objective - 1.0).abs() < 1e-12);
}

#[test]
fn node_cap_reports_resource_exhaustion() {
    let (m, _, _) = tiny_knapsack();
    let r = solve_milp_with(&m, None, MilpOptions { max_nodes: 1, ..Default::default() });
    assert_eq!(r.status, MilpStatus::ResourceExhausted);
}

/// Feasibility of `w` given fixed `x`, `y`, probed by minimizing and
/// maximizing `w` over the envelope.
fn mccormick_range(xv: f64, yv: f64, lo: f64, hi: f64) -> (f64, f64) {
    let mut out = [0.0; 2];
    for (k, dir) in [Direction::Minimize, Direction::Maximize].into_iter().enumerate() {
        let mut m = Model::new(dir);
        let x = m.add_continuous("x", 0.0, 1.0);
        let y = m.add_continuous("y", lo, hi);
        let w = add_mccormick(&mut m, x, y).unwrap();
        m.constrain(LinExpr::from(x), Sense::Eq, xv, "fix_x");
        m.constrain(LinExpr::from(y), Sense::Eq, yv, "fix_y");
        m.set_objective(LinExpr::from(w));
        let r = solve_lp(&m).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        out[k] = r.objective;
    }
    (out[0], out[1])
}

#[test]
fn mccormick_examples() {
    for (xv, yv, lo, hi, want) in [(1.0, 0.7, 0.0, 1.0, 0.7), (0.0, 0.3, 0.0, 1.0, 0.0), (1.0, -0.4, -1.0, 1.0, -0.4)] {
        let (a, b) = mccormick_range(xv, yv, lo, hi);
        assert!((a - want).abs() < 1e-9 && (b - want).abs() < 1e-9, "{xv} {yv}: [{a}, {b}]");
    }
}

#[test]
fn mccormick_rejects_unbounded_partner() {
    let mut m = Model::<f64>::new(Direction::Minimize);
    let x = m.add_binary("x");
    let y = m.add_continuous("y", 0.0, f64::INFINITY);
    assert!(matches!(add_mccormick(&mut m, x, y), Err(ModelError::UnboundedFactor { .. })));
}

fn l1_min(rows: impl Fn(&[Var]) -> Vec<LinExpr<f64>>, fix: &[f64]) -> f64 {
    let mut m = Model::new(Direction::Minimize);
    let x: Vec<Var> = (0..fix.len()).map(|i| m.add_continuous(format!("x{i}"), -10.0, 10.0)).collect();
    for (v, &val) in x.iter().zip(fix) {
        m.constrain(LinExpr::from(*v), Sense::Eq, val, "fix");
    }
    let t = add_l1_epigraph(&mut m, &rows(&x), "t");
    m.set_objective(LinExpr::from(t));
    solve_lp(&m).unwrap().objective
}

#[test]
fn l1_epigraph_examples() {
    let v = l1_min(|x| vec![expr(&[(x[0], 1.0), (x[1], -1.0)])], &[1.0, 0.0]);
    assert!((v - 1.0).abs() < 1e-9);
    let v = l1_min(|_| Vec::new(), &[]);
    assert!(v.abs() < 1e-12);
    let v = l1_min(|x| vec![expr(&[(x[0], 2.0)]), expr(&[(x[0], -3.0)])], &[1.0]);
    assert!((v - 5.0).abs() < 1e-9);
}

#[test]
fn dump_lists_rows() {
    let (m, _, _) = tiny_knapsack();
    let text = m.dump();
    assert!(text.contains("cap: 2 x1 + 2 x2 <= 3"), "{text}");
    assert!(text.starts_with("maximize: 3 x1 + 2 x2"));
}

#[test]
fn single_precision_kernel_solves_small_lp() {
    let mut m = Model::<f32>::new(Direction::Minimize);
    let x1 = m.add_continuous("x1", 0.0, f32::INFINITY);
    let x2 = m.add_continuous("x2", 0.0, f32::INFINITY);
    m.constrain(LinExpr::from_terms([(x1, 1.0), (x2, 2.0)]), Sense::Ge, 4.0, "r");
    m.set_objective(LinExpr::from_terms([(x1, 3.0), (x2, 1.0)]));
    let r = solve_lp(&m).unwrap();
    assert!((r.objective - 2.0).abs() < 1e-5);
}

#[derive(Debug, Clone)]
struct RandomLp {
    n: usize,
    rows: Vec<(Vec<f64>, u8, f64)>,
    cost: Vec<f64>,
    upper: Vec<f64>,
}

fn random_lp() -> impl Strategy<Value = RandomLp> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(-5i32..=5, n), m),
            prop::collection::vec(0u8..3, m),
            prop::collection::vec(0i32..=4, n),
            prop::collection::vec(0i32..=3, m),
            prop::collection::vec(-5i32..=5, n),
            prop::collection::vec(prop::option::of(3i32..=8), n),
        )
            .prop_map(move |(a, senses, x0, slack, cost, ub)| {
                // Rows are built around a known feasible point x0.
                let upper: Vec<f64> = ub.iter().map(|u| u.map_or(f64::INFINITY, f64::from)).collect();
                let x0: Vec<f64> = x0.iter().zip(&upper).map(|(&v, &u)| f64::from(v).min(u)).collect();
                let rows = a
                    .iter()
                    .zip(&senses)
                    .zip(&slack)
                    .map(|((row, &s), &sl)| {
                        let row: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
                        let ax: f64 = row.iter().zip(&x0).map(|(a, b)| a * b).sum();
                        let rhs = match s {
                            0 => ax + f64::from(sl),
                            1 => ax - f64::from(sl),
                            _ => ax,
                        };
                        (row, s, rhs)
                    })
                    .collect();
                let cost = cost.iter().map(|&c| f64::from(c)).collect();
                RandomLp { n, rows, cost, upper }
            })
    })
}

fn build(lp: &RandomLp) -> (Model<f64>, Vec<Var>) {
    let mut m = Model::new(Direction::Minimize);
    let x: Vec<Var> = (0..lp.n).map(|j| m.add_continuous(format!("x{j}"), 0.0, lp.upper[j])).collect();
    for (i, (row, s, rhs)) in lp.rows.iter().enumerate() {
        let sense = match s {
            0 => Sense::Le,
            1 => Sense::Ge,
            _ => Sense::Eq,
        };
        m.constrain(LinExpr::from_terms(x.iter().copied().zip(row.iter().copied())), sense, *rhs, format!("r{i}"));
    }
    m.set_objective(LinExpr::from_terms(x.iter().copied().zip(lp.cost.iter().copied())));
    (m, x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn strong_duality_on_random_lps(lp in random_lp()) {
        // A finite box keeps every instance bounded.
        let mut lp = lp;
        for u in lp.upper.iter_mut() {
            if !u.is_finite() { *u = 20.0; }
        }
        let (m, _) = build(&lp);
        let r = solve_lp(&m).unwrap();
        prop_assert_eq!(r.status, LpStatus::Optimal);
        prop_assert!(m.max_violation(&r.primal) < 1e-6);
        // Lagrangian dual value at the returned multipliers.
        let mut dual = 0.0;
        let mut d = lp.cost.clone();
        for (i, (row, s, rhs)) in lp.rows.iter().enumerate() {
            let y = r.duals[i];
            match s {
                0 => prop_assert!(y <= 1e-9),
                1 => prop_assert!(y >= -1e-9),
                _ => {}
            }
            dual += y * rhs;
            for j in 0..lp.n { d[j] -= y * row[j]; }
        }
        for j in 0..lp.n {
            prop_assert!((d[j] - r.reduced_costs[j]).abs() < 1e-6);
            dual += if d[j] >= 0.0 { 0.0 } else { d[j] * lp.upper[j] };
        }
        prop_assert!((dual - r.objective).abs() < 1e-6 * (1.0 + r.objective.abs()),
            "primal {} dual {}", r.objective, dual);
    }

    #[test]
    fn milp_matches_enumeration(
        n in 1usize..=12,
        seed_rows in prop::collection::vec(prop::collection::vec(-4i32..=6, 12), 1..=4),
        caps in prop::collection::vec(0i32..=12, 4),
        cost in prop::collection::vec(-6i32..=9, 12),
        cont_cost in -3i32..=3,
    ) {
        // Binary program with one continuous variable y in [0, 2] per model.
        let mut m = Model::new(Direction::Maximize);
        let x: Vec<Var> = (0..n).map(|j| m.add_binary(format!("x{j}"))).collect();
        let y = m.add_continuous("y", 0.0, 2.0);
        for (i, row) in seed_rows.iter().enumerate() {
            let mut e = LinExpr::from_terms(x.iter().copied().zip(row.iter().map(|&v| f64::from(v))));
            e.add_term(y, 1.0);
            m.constrain(e, Sense::Le, f64::from(caps[i]), format!("r{i}"));
        }
        let mut obj = LinExpr::from_terms(x.iter().copied().zip(cost.iter().map(|&v| f64::from(v))));
        obj.add_term(y, f64::from(cont_cost));
        m.set_objective(obj);
        let r = solve_milp(&m, None);

        // Oracle: every assignment, with y chosen at the better end of its range.
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << n) {
            let bits: Vec<f64> = (0..n).map(|j| f64::from((mask >> j) & 1)).collect();
            let slack = seed_rows.iter().enumerate().map(|(i, row)| {
                f64::from(caps[i]) - bits.iter().zip(row).map(|(b, &a)| b * f64::from(a)).sum::<f64>()
            }).fold(f64::INFINITY, f64::min);
            if slack < 0.0 { continue; }
            let ymax = slack.min(2.0);
            let yv = if cont_cost > 0 { ymax } else { 0.0 };
            let v = bits.iter().zip(&cost).map(|(b, &c)| b * f64::from(c)).sum::<f64>() + yv * f64::from(cont_cost);
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
        match best {
            None => prop_assert_eq!(r.status, MilpStatus::Infeasible),
            Some(v) => {
                prop_assert_eq!(r.status, MilpStatus::Optimal);
                prop_assert!((r.objective - v).abs() < 1e-6, "milp {} enum {}", r.objective, v);
            }
        }
    }

    #[test]
    fn mccormick_vertices_are_exact(lo in -5i32..=0, width in 0i32..=6, xb in 0u8..2, at_upper in any::<bool>()) {
        let (lo, hi) = (f64::from(lo), f64::from(lo + width));
        let yv = if at_upper { hi } else { lo };
        let xv = f64::from(xb);
        let (a, b) = mccormick_range(xv, yv, lo, hi);
        prop_assert!((a - xv * yv).abs() < 1e-9 && (b - xv * yv).abs() < 1e-9);
    }
}
