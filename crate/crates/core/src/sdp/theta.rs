//! The Lovász theta function.
//!
//! The engine solves the trace-normalised program
//! `max ⟨J, Z⟩ s.t. tr Z = 1, Z_ij = 0 on edges, Z ⪰ 0`. Its dual variables
//! give the primal pair `(t, A)` of `min t s.t. tI + A − J ⪰ 0`, with `A`
//! supported on edges: `t` is minus the trace multiplier and `A_ij` is read
//! off the edge multipliers.

use serde::Serialize;

use super::conic::{solve_conic, ConicOptions, ConicProblem, Cone, LinearConstraint, Term};
use crate::certificate::build_canonical;
use crate::error::{Error, Result};
use crate::graph::{CliquePartition, Graph};
use crate::symmat::SymMatrix;

#[derive(Debug, Clone)]
pub struct ThetaSolution {
    pub theta: f64,
    pub t: f64,
    pub a_hat: SymMatrix,
    /// `t·I + A_hat − J`.
    pub x_hat: SymMatrix,
    pub z_hat: SymMatrix,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Computes `ϑ(G)` and a primal/dual pair.
pub fn solve_theta(g: &Graph, opts: &ConicOptions) -> Result<ThetaSolution> {
    let n = g.n();
    if n == 0 {
        return Err(Error::InvalidGraph("theta of the empty vertex set".into()));
    }
    let mut objective = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        objective.push(Term::new(0, i, i, -1.0));
        for j in i + 1..n {
            objective.push(Term::new(0, i, j, -2.0));
        }
    }
    let mut constraints = Vec::with_capacity(1 + g.edge_count());
    constraints.push(LinearConstraint::new(
        (0..n).map(|i| Term::new(0, i, i, 1.0)).collect(),
        1.0,
    ));
    for &(i, j) in g.edges() {
        constraints.push(LinearConstraint::new(vec![Term::new(0, i, j, 1.0)], 0.0));
    }
    let prob = ConicProblem {
        blocks: vec![Cone::Psd(n)],
        objective,
        constraints,
    };
    let sol = solve_conic(&prob, opts)?;

    let z_hat = sol.primal[0]
        .as_psd()
        .expect("single PSD block")
        .clone();
    let t = -sol.duals[0];
    let mut a_hat = SymMatrix::zeros(n);
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        a_hat.set(i, j, -0.5 * sol.duals[1 + e]);
    }
    let x_hat = SymMatrix::from_fn(n, |i, j| {
        let diag = if i == j { t } else { 0.0 };
        diag + a_hat.get(i, j) - 1.0
    });
    let primal_value = z_hat.sum();
    Ok(ThetaSolution {
        theta: 0.5 * (primal_value + t),
        t,
        a_hat,
        x_hat,
        z_hat,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap: sol.gap,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Recovery {
    Strong,
    Weak,
    Fail,
}

impl Recovery {
    pub fn as_str(self) -> &'static str {
        match self {
            Recovery::Strong => "strong",
            Recovery::Weak => "weak",
            Recovery::Fail => "fail",
        }
    }
}

/// Strong when both `θ` and `X_hat` match the planted `(k*, X*)`, weak when
/// only the value does.
///
/// `tol_value` is absolute; `tol_matrix` is relative to `max(1, ‖X*‖_F)`.
pub fn classify_recovery(
    sol: &ThetaSolution,
    part: &CliquePartition,
    tol_value: f64,
    tol_matrix: f64,
) -> Result<Recovery> {
    if !sol.converged {
        return Err(Error::NotConverged);
    }
    if sol.x_hat.order() != part.n() {
        return Err(Error::Dimension(format!(
            "solution of order {} against a partition of {} vertices",
            sol.x_hat.order(),
            part.n()
        )));
    }
    let k = part.k() as f64;
    if (sol.theta - k).abs() > tol_value {
        return Ok(Recovery::Fail);
    }
    let x_star = build_canonical(part).x_star;
    let dist = sol.x_hat.sub(&x_star).frob_norm();
    Ok(if dist <= tol_matrix * x_star.frob_norm().max(1.0) {
        Recovery::Strong
    } else {
        Recovery::Weak
    })
}

/// [`classify_recovery`] at the default tolerances (`1e-3·k*`, `1e-3`).
pub fn classify_recovery_default(sol: &ThetaSolution, part: &CliquePartition) -> Result<Recovery> {
    classify_recovery(sol, part, 1e-3 * part.k() as f64, 1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_planted;

    fn opts(eps: f64) -> ConicOptions {
        ConicOptions {
            eps,
            ..ConicOptions::default()
        }
    }

    #[test]
    fn textbook_values() {
        let c5 = solve_theta(&Graph::cycle(5).unwrap(), &opts(1e-8)).unwrap();
        assert!((c5.theta - 5f64.sqrt()).abs() < 1e-4);
        let k7 = solve_theta(&Graph::complete(7).unwrap(), &opts(1e-8)).unwrap();
        assert!((k7.theta - 1.0).abs() < 1e-6);
        let e4 = solve_theta(&Graph::empty(4).unwrap(), &opts(1e-8)).unwrap();
        assert!((e4.theta - 4.0).abs() < 1e-5);
    }

    #[test]
    fn solution_satisfies_both_programs() {
        let inst = generate_planted(&[3, 4, 2, 3], 0.3, 11).unwrap();
        let eps = 1e-7;
        let s = solve_theta(&inst.graph, &opts(eps)).unwrap();
        assert!(s.converged);
        assert!((s.z_hat.sum() - s.t).abs() <= 10.0 * eps * s.t.max(1.0));
        assert!((s.z_hat.trace() - 1.0).abs() <= 10.0 * eps);
        for &(i, j) in inst.graph.edges() {
            assert!(s.z_hat.get(i, j).abs() <= 10.0 * eps);
        }
        assert!(s.z_hat.eig().unwrap().min() >= -1e-12);
        assert!(s.x_hat.eig().unwrap().min() >= -1e-4 * s.t);
        for i in 0..12 {
            assert_eq!(s.a_hat.get(i, i), 0.0);
            for j in 0..12 {
                if i != j && !inst.graph.has_edge(i, j) {
                    assert_eq!(s.a_hat.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn disjoint_cliques_recover_strongly() {
        let inst = generate_planted(&[3, 5, 2], 0.0, 0).unwrap();
        let s = solve_theta(&inst.graph, &opts(1e-7)).unwrap();
        assert!((s.theta - 3.0).abs() < 1e-5);
        assert_eq!(classify_recovery_default(&s, &inst.partition).unwrap(), Recovery::Strong);
    }

    #[test]
    fn full_join_fails() {
        let inst = generate_planted(&[3, 3, 3], 1.0, 0).unwrap();
        let s = solve_theta(&inst.graph, &opts(1e-7)).unwrap();
        assert!((s.theta - 1.0).abs() < 1e-5);
        assert_eq!(classify_recovery_default(&s, &inst.partition).unwrap(), Recovery::Fail);
    }

    #[test]
    fn unconverged_solutions_are_not_classified() {
        let inst = generate_planted(&[4, 4], 0.2, 1).unwrap();
        let short = ConicOptions {
            max_iter: 3,
            eps: 1e-12,
            ..ConicOptions::default()
        };
        let s = solve_theta(&inst.graph, &short).unwrap();
        assert!(!s.converged);
        assert!(matches!(
            classify_recovery_default(&s, &inst.partition),
            Err(Error::NotConverged)
        ));
    }

    #[test]
    fn more_edges_never_raise_theta() {
        let eps = 1e-7;
        for seed in 0..4 {
            let sparse = generate_planted(&[3, 3, 3], 0.2, seed).unwrap();
            let dense = generate_planted(&[3, 3, 3], 0.6, seed).unwrap();
            // Same uniform draws, so the dense graph contains the sparse one.
            assert!(sparse.graph.edges().iter().all(|&(i, j)| dense.graph.has_edge(i, j)));
            let a = solve_theta(&sparse.graph, &opts(eps)).unwrap().theta;
            let b = solve_theta(&dense.graph, &opts(eps)).unwrap().theta;
            assert!(b <= a + 1e-5, "{b} > {a}");
        }
    }
}
