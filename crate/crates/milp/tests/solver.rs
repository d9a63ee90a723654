use cvr_milp::{
    solve_lp, solve_milp, solve_milp_with, LinExpr, LpBackend, MilpModel, MilpOptions, ModelError, Sense, Status,
    VarKind,
};
use proptest::prelude::*;

/// Random model with a known feasible point, so it is never infeasible.
#[derive(Debug, Clone)]
struct Spec {
    vars: Vec<(bool, i32, i32, i32)>, // binary?, lower, width, point offset
    rows: Vec<(Vec<(usize, i32)>, u8, i32)>,
    obj: Vec<i32>,
}

fn spec(max_bin: usize) -> impl Strategy<Value = Spec> {
    (1..=max_bin, 0usize..4).prop_flat_map(|(nb, nc)| {
        let n = nb + nc;
        let vars = (0..n)
            .map(|i| {
                if i < nb {
                    (Just(true), Just(0), Just(1), 0..2).boxed()
                } else {
                    (Just(false), -5..5, 0..8, 0..8).boxed()
                }
            })
            .collect::<Vec<_>>();
        let rows = prop::collection::vec((prop::collection::vec((0..n, -4..5), 1..5), 0u8..3, 0..4), 0..7);
        let obj = prop::collection::vec(-9..10, n);
        (vars, rows, obj).prop_map(|(vars, rows, obj)| Spec { vars, rows, obj })
    })
}

fn build(s: &Spec) -> MilpModel {
    let mut m = MilpModel::new("random");
    let mut point = Vec::new();
    for (i, &(bin, lo, w, off)) in s.vars.iter().enumerate() {
        if bin {
            m.add_binary(format!("b{i}")).unwrap();
            point.push(off as f64);
        } else {
            m.add_continuous(format!("x{i}"), lo as f64, (lo + w) as f64).unwrap();
            point.push((lo + off.min(w)) as f64);
        }
    }
    let ids: Vec<_> = m.var_ids().collect();
    for (r, (terms, sense, slack)) in s.rows.iter().enumerate() {
        let e = LinExpr::from(terms.iter().map(|&(i, c)| (ids[i], c as f64)));
        let act: f64 = e.iter().map(|(v, c)| c * point[v.index()]).sum();
        let (sense, rhs) = match sense {
            0 => (Sense::Le, act + *slack as f64),
            1 => (Sense::Eq, act),
            _ => (Sense::Ge, act - *slack as f64),
        };
        m.add_constraint(format!("r{r}"), e, sense, rhs).unwrap();
    }
    m.set_objective(LinExpr::from(ids.iter().zip(&s.obj).map(|(&v, &c)| (v, c as f64)))).unwrap();
    m
}

/// Exhaustive enumeration of the binaries, each leaf solved with the dense LP.
fn brute_force(m: &MilpModel) -> f64 {
    let bins: Vec<_> = m.var_ids().filter(|&v| m.variable(v).kind == VarKind::Binary).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << bins.len()) {
        let mut leaf = m.clone();
        for (k, &b) in bins.iter().enumerate() {
            leaf.fix(b, ((mask >> k) & 1) as f64).unwrap();
        }
        let s = solve_lp(&leaf);
        if s.is_optimal() && s.objective < best {
            best = s.objective;
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn branch_and_bound_matches_enumeration(s in spec(10)) {
        let m = build(&s);
        let want = brute_force(&m);
        // warm_states = 0 forces every node to be replayed from the root.
        let configs = [
            (LpBackend::Sparse, 256, true),
            (LpBackend::Sparse, 256, false),
            (LpBackend::Sparse, 0, false),
            (LpBackend::Dense, 0, true),
            (LpBackend::Dense, 0, false),
        ];
        for (backend, warm_states, presolve) in configs {
            let got = solve_milp_with(&m, &MilpOptions { backend, warm_states, presolve, ..Default::default() });
            prop_assert_eq!(got.status, Status::Optimal);
            prop_assert!(
                (got.objective - want).abs() <= 1e-6 * want.abs().max(1.0),
                "{:?}/{}/{}: {} vs {}", backend, warm_states, presolve, got.objective, want
            );
            prop_assert!(m.max_violation(&got.values) <= 1e-7);
            for v in m.var_ids().filter(|&v| m.variable(v).kind == VarKind::Binary) {
                let x = got.value(v);
                prop_assert!(x == 0.0 || x == 1.0);
            }
        }
    }

    #[test]
    fn defined_free_variables_do_not_change_the_optimum(
        s in spec(8),
        defs in prop::collection::vec((prop::collection::vec((0usize..12, -3i32..4), 1..4), -3i32..4), 1..4),
    ) {
        // Each extra variable is free and defined by one equality over the others;
        // its cost is what presolve has to move onto the defining row.
        let base = build(&s);
        let want = brute_force(&base);
        let mut m = base.clone();
        let ids: Vec<_> = base.var_ids().collect();
        let mut obj = LinExpr::from(base.objective().iter().copied());
        for (k, (terms, cost)) in defs.iter().enumerate() {
            let t = m.add_continuous(format!("t{k}"), f64::NEG_INFINITY, f64::INFINITY).unwrap();
            let mut row = LinExpr::term(t, 2.0);
            let mut mapped = LinExpr::new();
            for &(i, c) in terms {
                row.add(ids[i % ids.len()], -c as f64);
                mapped.add(ids[i % ids.len()], *cost as f64 * c as f64 / 2.0);
            }
            m.add_constraint(format!("def{k}"), row, Sense::Eq, 0.0).unwrap();
            obj.add(t, *cost as f64);
            // Cancel the moved cost so the optimum stays that of `base`.
            for (v, c) in mapped.iter() {
                obj.add(v, -c);
            }
        }
        m.set_objective(obj).unwrap();
        for presolve in [true, false] {
            let got = solve_milp_with(&m, &MilpOptions { presolve, ..Default::default() });
            prop_assert_eq!(got.status, Status::Optimal);
            prop_assert!((got.objective - want).abs() <= 1e-6 * want.abs().max(1.0), "{}: {} vs {}", presolve, got.objective, want);
            prop_assert!(m.max_violation(&got.values) <= 1e-7);
        }
    }

    #[test]
    fn dense_and_sparse_relaxations_agree(s in spec(6)) {
        let relaxed = build(&s).relaxed();
        let dense = solve_lp(&relaxed);
        let sparse = solve_milp_with(&relaxed, &MilpOptions { backend: LpBackend::Sparse, ..Default::default() });
        prop_assert_eq!(dense.status, Status::Optimal);
        prop_assert_eq!(sparse.status, Status::Optimal);
        prop_assert!((dense.objective - sparse.objective).abs() <= 1e-7 * dense.objective.abs().max(1.0));
        prop_assert!(relaxed.max_violation(&dense.values) <= 1e-7);
    }

    #[test]
    fn solves_are_repeatable(s in spec(8)) {
        let m = build(&s);
        let a = solve_milp(&m);
        let b = solve_milp(&m);
        prop_assert_eq!(a.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.stats, b.stats);
    }
}

#[test]
fn row_duals_give_the_dual_objective() {
    // min 2x + 3y  s.t.  x + y >= 4,  x - y <= 2,  x, y >= 0.  Optimum (3, 1), value 9.
    let mut m = MilpModel::new("dual");
    let x = m.add_continuous("x", 0.0, f64::INFINITY).unwrap();
    let y = m.add_continuous("y", 0.0, f64::INFINITY).unwrap();
    m.add_constraint("cover", LinExpr::from([(x, 1.0), (y, 1.0)]), Sense::Ge, 4.0).unwrap();
    m.add_constraint("spread", LinExpr::from([(x, 1.0), (y, -1.0)]), Sense::Le, 2.0).unwrap();
    m.set_objective(LinExpr::from([(x, 2.0), (y, 3.0)])).unwrap();
    let s = solve_lp(&m);
    assert_eq!(s.values, vec![3.0, 1.0]);
    let duals = s.duals.unwrap();
    assert!((duals[0] - 2.5).abs() < 1e-12);
    assert!((duals[1] + 0.5).abs() < 1e-12);
    assert!((4.0 * duals[0] + 2.0 * duals[1] - s.objective).abs() < 1e-12);
}

#[test]
fn model_rejects_bad_input() {
    let mut m = MilpModel::new("errors");
    let x = m.add_continuous("x", 0.0, 1.0).unwrap();
    assert_eq!(m.add_continuous("x", 0.0, 1.0), Err(ModelError::DuplicateName("x".into())));
    assert!(matches!(m.add_continuous("y", 2.0, 1.0), Err(ModelError::InvalidBounds { .. })));
    assert!(matches!(m.add_variable("b", 0.0, 2.0, VarKind::Binary), Err(ModelError::BinaryBounds { .. })));
    assert_eq!(m.add_constraint("c", LinExpr::term(x, f64::NAN), Sense::Le, 1.0), Err(ModelError::NonFinite("c".into())));
    assert_eq!(m.declare_one_hot(vec![x]), Err(ModelError::NotBinary("x".into())));
    let b = m.add_binary("b").unwrap();
    m.declare_one_hot(vec![b]).unwrap();
    assert_eq!(m.declare_one_hot(vec![b]), Err(ModelError::OverlappingGroup("b".into())));
}

#[test]
fn unbounded_relaxation_is_reported() {
    let mut m = MilpModel::new("ray");
    let b = m.add_binary("b").unwrap();
    let x = m.add_continuous("x", 0.0, f64::INFINITY).unwrap();
    m.set_objective(LinExpr::from([(b, 1.0), (x, -1.0)])).unwrap();
    assert_eq!(solve_milp(&m).status, Status::Unbounded);
}
