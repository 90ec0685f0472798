//! End-to-end solver tests: randomized instances against a brute-force
//! enumeration oracle, determinism, warm starts, and file-level MPS round
//! trips.

use miqp::{
    export_mps, parse_mps, solve_qp, warm_start_from, MiqpProblem, MiqpSolution, MiqpSolver,
    QpSolveStatus, Sense, SolveStatus, SolverOptions, VarKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive oracle: tries every binary pattern, solving the continuous QP
/// with the pattern clamped into the bounds. Returns the best objective, or
/// None when no pattern is feasible.
fn enumerate_best(problem: &MiqpProblem) -> Option<f64> {
    let bins: Vec<usize> = (0..problem.num_vars())
        .filter(|&k| problem.kind[k] == VarKind::Binary)
        .collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut fixed = problem.clone();
        for (pos, &k) in bins.iter().enumerate() {
            let b = ((mask >> pos) & 1) as f64;
            fixed.kind[k] = VarKind::Continuous;
            fixed.lb[k] = b;
            fixed.ub[k] = b;
        }
        let sol = solve_qp(&fixed, 1e-9).expect("oracle qp");
        if sol.status == QpSolveStatus::Solved {
            let obj = sol.objective;
            if best.map_or(true, |b| obj < b) {
                best = Some(obj);
            }
        }
    }
    best
}

/// Random mixed-binary QP with gating rows linking continuous variables to
/// binaries, the shape branch-and-bound sees in scheduling problems.
fn random_instance(rng: &mut ChaCha8Rng) -> MiqpProblem {
    let n_cont = rng.gen_range(1..=4);
    let n_bin = rng.gen_range(1..=5);
    let n = n_cont + n_bin;
    let mut p = MiqpProblem::new(n);
    for k in 0..n_cont {
        p.q_diag[k] = rng.gen_range(0.1..2.0);
        p.lin[k] = rng.gen_range(-3.0..3.0);
        p.lb[k] = 0.0;
        p.ub[k] = rng.gen_range(1.0..8.0);
    }
    for k in n_cont..n {
        p.kind[k] = VarKind::Binary;
        p.lb[k] = 0.0;
        p.ub[k] = 1.0;
        p.lin[k] = rng.gen_range(-1.0..2.0);
    }
    p.constant = rng.gen_range(-5.0..5.0);
    // gate each continuous variable with one binary: x_j <= cap * b
    for j in 0..n_cont {
        let b = n_cont + (j % n_bin);
        let cap = p.ub[j];
        p.add_row(vec![(j, 1.0), (b, -cap)], Sense::Le, 0.0, format!("gate{j}"));
    }
    // a coupling budget over everything
    let coeffs: Vec<(usize, f64)> = (0..n).map(|k| (k, rng.gen_range(0.2..1.5))).collect();
    let budget = rng.gen_range(1.0..6.0);
    p.add_row(coeffs, Sense::Le, budget, "budget");
    if rng.gen_bool(0.5) {
        // demand at least one binary on
        let coeffs: Vec<(usize, f64)> = (n_cont..n).map(|k| (k, 1.0)).collect();
        p.add_row(coeffs, Sense::Ge, 1.0, "min-on");
    }
    if rng.gen_bool(0.4) {
        // equality tie between two continuous variables when both exist
        if n_cont >= 2 {
            p.add_row(
                vec![(0, 1.0), (1, -1.0)],
                Sense::Eq,
                rng.gen_range(-0.5..0.5),
                "tie",
            );
        }
    }
    p
}

fn tight_options() -> SolverOptions {
    SolverOptions {
        abs_gap_tol: 1e-7,
        rel_gap_tol: 0.0,
        ..SolverOptions::default()
    }
}

#[test]
fn matches_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut solved = 0;
    let mut infeasible = 0;
    for trial in 0..60 {
        let p = random_instance(&mut rng);
        let oracle = enumerate_best(&p);
        let mut solver = MiqpSolver::new(&p, tight_options()).expect("valid instance");
        let sol = solver.solve();
        match oracle {
            Some(best) => {
                assert!(
                    matches!(sol.status, SolveStatus::Optimal),
                    "trial {trial}: status {:?} vs oracle {best}",
                    sol.status
                );
                assert!(
                    (sol.objective - best).abs() < 1e-5,
                    "trial {trial}: objective {} vs oracle {best}",
                    sol.objective
                );
                assert!(
                    p.max_violation(&sol.values) < 1e-6,
                    "trial {trial}: violation {}",
                    p.max_violation(&sol.values)
                );
                assert!(
                    sol.best_bound <= sol.objective + 1e-9,
                    "trial {trial}: bound {} above objective {}",
                    sol.best_bound,
                    sol.objective
                );
                solved += 1;
            }
            None => {
                assert_eq!(sol.status, SolveStatus::Infeasible, "trial {trial}");
                infeasible += 1;
            }
        }
    }
    // the generator should produce a healthy mix
    assert!(solved >= 40, "only {solved} solvable instances");
    assert!(infeasible <= 20);
}

#[test]
fn deterministic_across_repeat_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = random_instance(&mut rng);
    let run = || {
        let mut solver = MiqpSolver::new(&p, tight_options()).unwrap();
        solver.solve()
    };
    let a = run();
    let b = run();
    assert_eq!(a.status, b.status);
    assert_eq!(a.nodes_explored, b.nodes_explored);
    assert_eq!(a.qp_iterations, b.qp_iterations);
    assert!(a.objective.to_bits() == b.objective.to_bits(), "objective drifted");
    for (x, y) in a.values.iter().zip(&b.values) {
        assert_eq!(x.to_bits(), y.to_bits(), "solution values drifted");
    }
}

#[test]
fn threaded_run_agrees_with_single_thread() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..8 {
        let p = random_instance(&mut rng);
        let mut s1 = MiqpSolver::new(&p, tight_options()).unwrap();
        let one = s1.solve();
        let mut opts = tight_options();
        opts.threads = 2;
        let mut s2 = MiqpSolver::new(&p, opts).unwrap();
        let two = s2.solve();
        assert_eq!(one.status, two.status);
        if one.status == SolveStatus::Optimal {
            assert!(
                (one.objective - two.objective).abs() < 1e-5,
                "thread count changed the optimum: {} vs {}",
                one.objective,
                two.objective
            );
        }
    }
}

#[test]
fn fully_fixed_binaries_collapse_to_one_node() {
    let mut p = MiqpProblem::new(3);
    p.q_diag = vec![1.0, 0.5, 0.0];
    p.lin = vec![-2.0, 0.0, 1.0];
    p.lb = vec![0.0, 1.0, 1.0];
    p.ub = vec![5.0, 1.0, 1.0];
    p.kind[1] = VarKind::Binary;
    p.kind[2] = VarKind::Binary;
    p.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 6.0, "cap");
    let mut solver = MiqpSolver::new(&p, tight_options()).unwrap();
    let sol = solver.solve();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.nodes_explored, 1);
    // x0 = 1 minimizes x^2 - 2x (-1); fixed vars add 0.5*1^2 and 1*1
    assert!((sol.objective - (-1.0 + 0.5 + 1.0)).abs() < 1e-6, "{}", sol.objective);
    assert!((sol.values[0] - 1.0).abs() < 1e-6);
}

#[test]
fn integer_infeasible_with_feasible_relaxation() {
    // b1 + b2 = 1/2 admits fractional points but no binary ones
    let mut p = MiqpProblem::new(2);
    p.kind = vec![VarKind::Binary; 2];
    p.lb = vec![0.0; 2];
    p.ub = vec![1.0; 2];
    p.lin = vec![1.0, 1.0];
    p.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 0.5, "half");
    let mut solver = MiqpSolver::new(&p, tight_options()).unwrap();
    let sol = solver.solve();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn contradictory_rows_are_infeasible() {
    let mut p = MiqpProblem::new(2);
    p.q_diag = vec![1.0, 0.0];
    p.lb = vec![-10.0, 0.0];
    p.ub = vec![10.0, 1.0];
    p.kind[1] = VarKind::Binary;
    p.add_row(vec![(0, 1.0)], Sense::Ge, 4.0, "high");
    p.add_row(vec![(0, 1.0)], Sense::Le, -4.0, "low");
    let mut solver = MiqpSolver::new(&p, tight_options()).unwrap();
    let sol = solver.solve();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn hint_reproduces_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let p = random_instance(&mut rng);
    let mut solver = MiqpSolver::new(&p, tight_options()).unwrap();
    let cold = solver.solve();
    assert_eq!(cold.status, SolveStatus::Optimal);
    let mut warm_solver = MiqpSolver::new(&p, tight_options()).unwrap();
    let warm = warm_solver.solve_with_hint(Some(&cold.values));
    assert_eq!(warm.status, SolveStatus::Optimal);
    assert!(
        (warm.objective - cold.objective).abs() < 1e-6,
        "warm {} vs cold {}",
        warm.objective,
        cold.objective
    );
}

#[test]
fn warm_start_shift_semantics() {
    let sol = MiqpSolution {
        status: SolveStatus::Optimal,
        values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        objective: 0.0,
        best_bound: 0.0,
        gap: 0.0,
        nodes_explored: 1,
        qp_iterations: 0,
        node_failures: 0,
        wall_time: std::time::Duration::ZERO,
    };
    // three steps of two variables
    assert_eq!(warm_start_from(&sol, 2, 0).unwrap(), sol.values);
    assert_eq!(
        warm_start_from(&sol, 2, 1).unwrap(),
        vec![3.0, 4.0, 5.0, 6.0, 5.0, 6.0]
    );
    assert_eq!(
        warm_start_from(&sol, 2, 2).unwrap(),
        vec![5.0, 6.0, 5.0, 6.0, 5.0, 6.0]
    );
    assert!(warm_start_from(&sol, 2, 3).unwrap().is_empty());
    assert!(warm_start_from(&sol, 4, 1).is_err());
}

#[test]
fn qp_interface_reports_tight_residuals() {
    let mut p = MiqpProblem::new(4);
    p.q_diag = vec![1.0, 2.0, 0.5, 1.5];
    p.lin = vec![-1.0, 0.5, -2.0, 0.0];
    p.lb = vec![0.0; 4];
    p.ub = vec![3.0; 4];
    p.constant = 2.5;
    p.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], Sense::Eq, 4.0, "sum");
    p.add_row(vec![(0, 1.0), (2, -1.0)], Sense::Le, 1.0, "skew");
    let sol = solve_qp(&p, 1e-8).unwrap();
    assert_eq!(sol.status, QpSolveStatus::Solved);
    assert!(sol.stationarity_res <= 1e-7, "stationarity {}", sol.stationarity_res);
    assert!(sol.feasibility_res <= 1e-7, "feasibility {}", sol.feasibility_res);
    assert!(sol.complementarity_res <= 1e-6, "complementarity {}", sol.complementarity_res);
    // objective includes the constant term
    let direct = p.objective_value(&sol.values);
    assert!((sol.objective - direct).abs() < 1e-9);
}

#[test]
fn mps_round_trip_through_file() {
    let mut p = MiqpProblem::new(3);
    p.q_diag = vec![0.5, 0.0, 1.0];
    p.lin = vec![1.0, -2.0, 0.0];
    p.constant = -3.25;
    p.lb = vec![0.0, 0.0, -1.5];
    p.ub = vec![1.0, 4.0, f64::INFINITY];
    p.kind[0] = VarKind::Binary;
    p.names = vec!["on flag".into(), "power".into(), "slack".into()];
    p.add_row(vec![(0, 2.0), (1, 1.0)], Sense::Le, 3.5, "cap");
    p.add_row(vec![(1, 1.0), (2, -1.0)], Sense::Eq, 0.25, "balance");

    let path = std::env::temp_dir().join(format!("miqp_rt_{}.mps", std::process::id()));
    export_mps(&p, &path).expect("export");
    let text = std::fs::read_to_string(&path).expect("read back");
    let q = parse_mps(&text).expect("parse");
    std::fs::remove_file(&path).ok();

    assert_eq!(q.num_vars(), 3);
    assert_eq!(q.kind[0], VarKind::Binary);
    // variable names survive (sanitized), labels and structure preserved
    assert_eq!(q.names[1], "power");
    assert_eq!(q.rows.len(), 2);
    assert!((q.constant - p.constant).abs() < 1e-12);
    for k in 0..3 {
        assert!((q.q_diag[k] - p.q_diag[k]).abs() < 1e-12);
        assert!((q.lin[k] - p.lin[k]).abs() < 1e-12);
        assert!((q.lb[k] - p.lb[k]).abs() < 1e-12 || (!q.lb[k].is_finite() && !p.lb[k].is_finite()));
        assert!((q.ub[k] - p.ub[k]).abs() < 1e-12 || (!q.ub[k].is_finite() && !p.ub[k].is_finite()));
    }
    // identical optima on both sides of the round trip
    let mut s_orig = MiqpSolver::new(&p, tight_options()).unwrap();
    let mut s_rt = MiqpSolver::new(&q, tight_options()).unwrap();
    let a = s_orig.solve();
    let b = s_rt.solve();
    assert_eq!(a.status, b.status);
    assert!((a.objective - b.objective).abs() < 1e-8);
}

#[test]
fn node_limit_reports_gap_limit() {
    // a brutal little instance: many symmetric binaries, node limit 1
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let p = random_instance(&mut rng);
    let mut opts = tight_options();
    opts.node_limit = 1;
    opts.heuristic_period = 0;
    let mut solver = MiqpSolver::new(&p, opts).unwrap();
    let sol = solver.solve();
    assert!(
        matches!(sol.status, SolveStatus::GapLimit | SolveStatus::Optimal | SolveStatus::Infeasible),
        "{:?}",
        sol.status
    );
    if sol.status == SolveStatus::GapLimit {
        assert!(sol.best_bound.is_finite() || sol.gap.is_infinite());
    }
}

#[test]
fn weakly_coupled_row_with_large_dual_converges() {
    // A chain of equalities leaves one inequality with a tiny coefficient
    // on the only variable that can satisfy it, so its optimal dual is huge
    // (about 5e3 here). Without penalty escalation on the violated row the
    // ADMM dual ramp dwarfs any reasonable iteration budget and the solve
    // stalls at an infeasible point.
    let mut p = MiqpProblem::new(4);
    p.names = vec!["x".into(), "b".into(), "i".into(), "d".into()];
    p.q_diag = vec![1e-6, 0.0, 0.0, 0.0];
    p.lin = vec![0.0, 0.0, 0.0, 2.0];
    p.lb = vec![0.0, -150.0, -4.0, 0.0];
    p.ub = vec![100.0, 150.0, 4.0, 100.0];
    p.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 0.0, "balance");
    p.add_row(vec![(2, 1.0), (1, 0.04)], Sense::Eq, 0.0, "flow");
    p.add_row(vec![(3, 1.0), (0, -1.0)], Sense::Ge, 0.0, "ramp");
    p.add_row(vec![(2, 0.01)], Sense::Ge, 0.025, "floor");
    let sol = solve_qp(&p, 1e-8).unwrap();
    assert_eq!(sol.status, QpSolveStatus::Solved);
    // the floor forces i = 2.5, hence x = d = 62.5 through the chain
    assert!((sol.values[0] - 62.5).abs() < 1e-4, "x = {}", sol.values[0]);
    let expect = 2.0 * 62.5 + 1e-6 * 62.5 * 62.5;
    assert!((sol.objective - expect).abs() < 1e-4, "obj = {}", sol.objective);

    // the same chain behind an on/off gate: branch-and-bound must turn the
    // source on and land on the identical continuous optimum plus the gate
    // cost, not report a phantom failure from the stalled relaxation
    let mut g = MiqpProblem::new(5);
    g.names = vec!["x".into(), "b".into(), "i".into(), "d".into(), "gate".into()];
    g.q_diag = vec![1e-6, 0.0, 0.0, 0.0, 0.0];
    g.lin = vec![0.0, 0.0, 0.0, 2.0, 13.0];
    g.lb = vec![0.0, -150.0, -4.0, 0.0, 0.0];
    g.ub = vec![100.0, 150.0, 4.0, 100.0, 1.0];
    g.kind[4] = VarKind::Binary;
    g.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 0.0, "balance");
    g.add_row(vec![(2, 1.0), (1, 0.04)], Sense::Eq, 0.0, "flow");
    g.add_row(vec![(3, 1.0), (0, -1.0)], Sense::Ge, 0.0, "ramp");
    g.add_row(vec![(2, 0.01)], Sense::Ge, 0.025, "floor");
    g.add_row(vec![(0, 1.0), (4, -100.0)], Sense::Le, 0.0, "gate-cap");
    g.add_row(vec![(0, 1.0), (4, -10.0)], Sense::Ge, 0.0, "gate-floor");
    let mut solver = MiqpSolver::new(&g, tight_options()).unwrap();
    let mix = solver.solve();
    assert_eq!(mix.status, SolveStatus::Optimal, "{:?}", mix);
    assert!((mix.values[4] - 1.0).abs() < 1e-9, "gate = {}", mix.values[4]);
    assert!(
        (mix.objective - (expect + 13.0)).abs() < 1e-4,
        "obj = {} vs {}",
        mix.objective,
        expect + 13.0
    );
    assert!(g.max_violation(&mix.values) < 1e-6);
}

#[test]
fn depth_first_and_best_bound_find_the_same_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..6 {
        let p = random_instance(&mut rng);
        let mut o1 = tight_options();
        o1.node_selection = miqp::NodeSelection::DepthFirstDive;
        o1.branching = miqp::Branching::MostFractional;
        let mut s1 = MiqpSolver::new(&p, o1).unwrap();
        let a = s1.solve();
        let mut s2 = MiqpSolver::new(&p, tight_options()).unwrap();
        let b = s2.solve();
        assert_eq!(a.status, b.status);
        if a.status == SolveStatus::Optimal {
            assert!((a.objective - b.objective).abs() < 1e-5);
        }
    }
}

#[test]
fn presolve_proves_unreachable_terminal_infeasible() {
    // integrator chain: s_{k+1} = s_k + 0.1*u_k, |u_k| <= 1, s_0 = 50; ten
    // steps move the state at most one unit, so a terminal floor at 89 is
    // empty. Interval propagation alone should prove that, without ever
    // solving a relaxation.
    let steps = 10;
    let s0 = steps + 1; // s_0..s_10 then u_0..u_9
    let mut p = MiqpProblem::new(s0 + steps);
    for k in 0..=steps {
        p.lb[k] = 20.0;
        p.ub[k] = 90.0;
    }
    p.lb[0] = 50.0;
    p.ub[0] = 50.0;
    for k in 0..steps {
        let u = s0 + k;
        p.lb[u] = -1.0;
        p.ub[u] = 1.0;
        p.q_diag[u] = 1e-3;
        p.add_row(
            vec![(k + 1, 1.0), (k, -1.0), (u, -0.1)],
            Sense::Eq,
            0.0,
            format!("step{k}"),
        );
    }
    p.add_row(vec![(steps, 1.0)], Sense::Ge, 89.0, "terminal");
    let sol = MiqpSolver::new(&p, SolverOptions::default())
        .unwrap()
        .solve();
    assert_eq!(sol.status, SolveStatus::Infeasible);
    assert_eq!(sol.nodes_explored, 0, "presolve should close the problem");

    // the same chain with a reachable floor still solves: pushing the state
    // to 50.5 costs sum(u) = 5, split evenly by the quadratic penalty
    let mut q = p.clone();
    q.rows.last_mut().unwrap().rhs = 50.5;
    let sol = MiqpSolver::new(&q, SolverOptions::default())
        .unwrap()
        .solve();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let expect = 10.0 * 1e-3 * 0.25;
    assert!((sol.objective - expect).abs() < 1e-5, "{}", sol.objective);
}
