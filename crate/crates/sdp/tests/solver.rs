use nalgebra::DMatrix;
use proptest::prelude::*;
use sbarrier_sdp::{solve, text, SdpProblem, Settings, Status, VarRef};

fn tight() -> Settings {
    Settings { tol: 1e-9, ..Settings::default() }
}

fn trace_one(n: usize, c: &DMatrix<f64>) -> SdpProblem {
    let mut p = SdpProblem::new();
    let b = p.add_block(n);
    p.add_row((0..n).map(|i| (VarRef::psd(b, i, i), 1.0)).collect(), 1.0);
    for i in 0..n {
        for j in i..n {
            let v = if i == j { c[(i, i)] } else { 2.0 * c[(i, j)] };
            if v != 0.0 {
                p.objective.push((VarRef::psd(b, i, j), v));
            }
        }
    }
    p
}

#[test]
fn identity_objective_equals_trace_constraint() {
    let p = trace_one(2, &DMatrix::identity(2, 2));
    let sol = solve(&p, &tight());
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.primal_objective - 1.0).abs() < 1e-8, "{}", sol.primal_objective);
    assert!(sol.max_violation() <= 1e-9);
}

#[test]
fn smallest_t_with_psd_arrow_is_one() {
    let mut p = SdpProblem::new();
    let t = p.add_free();
    let b = p.add_block(2);
    p.add_row(vec![(VarRef::psd(b, 0, 0), 1.0), (t, -1.0)], 0.0);
    p.add_row(vec![(VarRef::psd(b, 1, 1), 1.0), (t, -1.0)], 0.0);
    p.add_row(vec![(VarRef::psd(b, 0, 1), 1.0)], 1.0);
    p.objective.push((t, 1.0));
    let sol = solve(&p, &tight());
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.value(t) - 1.0).abs() < 1e-8, "t = {}", sol.value(t));
}

#[test]
fn fixed_indefinite_matrix_is_infeasible() {
    let mut p = SdpProblem::new();
    let b = p.add_block(2);
    p.add_row(vec![(VarRef::psd(b, 0, 0), 1.0)], 1.0);
    p.add_row(vec![(VarRef::psd(b, 1, 1), 1.0)], 1.0);
    p.add_row(vec![(VarRef::psd(b, 0, 1), 1.0)], 2.0);
    let sol = solve(&p, &tight());
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn unbounded_free_direction_is_detected() {
    // min -x  s.t. x - y = 0, x, y >= 0
    let mut p = SdpProblem::new();
    let x = p.add_nonneg();
    let y = p.add_nonneg();
    p.add_row(vec![(x, 1.0), (y, -1.0)], 0.0);
    p.objective.push((x, -1.0));
    let sol = solve(&p, &tight());
    assert_eq!(sol.status, Status::Unbounded);
}

#[test]
fn small_lp_matches_hand_solution() {
    // min x1 + 2 x2  s.t. x1 + x2 = 1, x >= 0  -> x1 = 1, objective 1
    let mut p = SdpProblem::new();
    let a = p.add_nonneg();
    let b = p.add_nonneg();
    p.add_row(vec![(a, 1.0), (b, 1.0)], 1.0);
    p.objective.push((a, 1.0));
    p.objective.push((b, 2.0));
    let sol = solve(&p, &tight());
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.primal_objective - 1.0).abs() < 1e-8);
    assert!((sol.value(a) - 1.0).abs() < 1e-7);
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let c = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, -1.0, 1.0, 0.3, 0.5, 0.3, 3.0]);
    let p = trace_one(3, &c);
    let a = solve(&p, &Settings::default());
    let b = solve(&p, &Settings::default());
    assert_eq!(a, b);
    assert_eq!(a.primal_objective.to_bits(), b.primal_objective.to_bits());
}

#[test]
fn text_round_trip_solves_identically() {
    let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, -2.0]);
    let p = trace_one(2, &c);
    let q = text::read(&text::write(&p)).unwrap();
    assert_eq!(solve(&p, &Settings::default()), solve(&q, &Settings::default()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // min <C, X> s.t. tr X = 1 has value lambda_min(C); the eigenvalue
    // routine is an independent oracle for the interior-point path.
    #[test]
    fn trace_one_program_recovers_min_eigenvalue(vals in prop::collection::vec(-3.0f64..3.0, 16)) {
        let n = 4;
        let raw = DMatrix::from_row_slice(n, n, &vals);
        let c = (&raw + raw.transpose()) * 0.5;
        let sol = solve(&trace_one(n, &c), &Settings::default());
        prop_assert_eq!(sol.status, Status::Optimal);
        let lmin = c.clone().symmetric_eigenvalues().min();
        prop_assert!((sol.primal_objective - lmin).abs() <= 1e-6 * (1.0 + lmin.abs()),
            "sdp {} vs eig {}", sol.primal_objective, lmin);
        prop_assert!(sol.min_block_eigenvalue() >= -1e-7);
    }
}
