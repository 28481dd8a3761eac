//! End-to-end runs: generate, store, reload, solve, classify and certify.

use thetacover::certificate::{deterministic_recovery, verify_certificate, RecoveryOptions};
use thetacover::graph::{generate_planted, read_graph, write_graph, GraphDocument};
use thetacover::oracle::{sandwich_check, Budget};
use thetacover::sdp::{classify_recovery, solve_theta, ConicOptions, Recovery};
use thetacover::symmat::CERT_TOL;

#[test]
fn stored_instance_recovers_after_reload() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let inst = generate_planted(&[5, 5, 5, 5], 0.1, 42).unwrap();
    write_graph(&path, &GraphDocument::from(inst.clone())).unwrap();
    let doc = read_graph(&path).unwrap();
    let part = doc.partition.unwrap();
    assert_eq!(doc.graph.edges(), inst.graph.edges());

    let sol = solve_theta(&doc.graph, &ConicOptions::default()).unwrap();
    assert!(sol.converged);
    assert!((sol.theta - 4.0).abs() < 1e-5, "θ = {}", sol.theta);
    assert_eq!(classify_recovery(&sol, &part, 4e-3, 1e-3).unwrap(), Recovery::Strong);

    let report = deterministic_recovery(&doc.graph, &part, RecoveryOptions::default()).unwrap();
    assert!(report.verdict.is_certified(), "{}", report.to_json());
}

#[test]
fn solver_dual_agrees_with_certificate_checks() {
    let inst = generate_planted(&[4, 4, 4], 0.0, 1).unwrap();
    let sol = solve_theta(&inst.graph, &ConicOptions::default()).unwrap();
    let report = verify_certificate(&inst.graph, &inst.partition, &sol.z_hat, 1e-5).unwrap();
    assert!(report.psd_ok && report.support_ok && report.complementarity_ok, "{}", report.to_json());
}

#[test]
fn dense_instance_fails_both_sides() {
    let inst = generate_planted(&[4, 4, 4], 0.9, 5).unwrap();
    let sol = solve_theta(&inst.graph, &ConicOptions::default()).unwrap();
    assert!(sol.theta < 3.0 - 1e-3);
    assert_eq!(classify_recovery(&sol, &inst.partition, 3e-3, 1e-3).unwrap(), Recovery::Fail);
    let report = deterministic_recovery(
        &inst.graph,
        &inst.partition,
        RecoveryOptions { tol: CERT_TOL, ..Default::default() },
    )
    .unwrap();
    assert!(!report.verdict.is_certified());

    let s = sandwich_check(&inst.graph, sol.theta, 1e-4, Budget::default()).unwrap();
    assert!(s.holds && s.alpha as f64 <= sol.theta + 1e-4);
}

#[test]
fn unconverged_solutions_are_not_classified() {
    let inst = generate_planted(&[5, 5], 0.3, 2).unwrap();
    let opts = ConicOptions { max_iter: 3, ..ConicOptions::default() };
    let sol = solve_theta(&inst.graph, &opts).unwrap();
    assert!(!sol.converged);
    assert!(classify_recovery(&sol, &inst.partition, 2e-3, 1e-3).is_err());
}

#[test]
fn sparse_forty_cliques_certify() {
    let certified = (0..20u64)
        .filter(|&seed| {
            let inst = generate_planted(&[40; 4], 0.005, seed).unwrap();
            deterministic_recovery(&inst.graph, &inst.partition, RecoveryOptions::default())
                .unwrap()
                .verdict
                .is_certified()
        })
        .count();
    assert!(certified >= 18, "{certified}/20 certified");

    // Above the sufficient threshold (c_min ≥ 1/40 > 1/100) yet still certified.
    let inst = generate_planted(&[40; 4], 0.01, 3).unwrap();
    let report =
        deterministic_recovery(&inst.graph, &inst.partition, RecoveryOptions::default()).unwrap();
    let r = &report.residuals;
    assert!(r.c_min.unwrap() > r.recovery_threshold.unwrap());
    assert!(report.verdict.is_certified(), "{}", report.to_json());
}
