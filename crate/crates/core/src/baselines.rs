//! Competing relaxations for planted clique covers.
//!
//! - Sparse-plus-low-rank deconvolution of the adjacency matrix, solved with
//!   a two-block proximal splitting.
//! - The k-disjoint-clique SDP.
//! - The Schur-Horn orbitope relaxation (equal block sizes only).
//!
//! The last two run on the shared conic engine. Success is judged against
//! block patterns of the planted partition with a relative Frobenius
//! tolerance (default `1e-3`).

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{CliquePartition, Graph};
use crate::sdp::conic::{solve_conic, ConicOptions, ConicProblem, Cone, LinearConstraint, Term};
use crate::symmat::{sym_eig, SymMatrix};

pub const SUCCESS_TOL: f64 = 1e-3;

/// The λ grid `{0.0, 0.1, …, 1.0}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method")]
pub enum Method {
    Deconvolution { lambda: f64 },
    KDisjointClique { k: usize },
    SchurHorn { n: usize, k: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Deconvolution { .. } => "deconvolution",
            Method::KDisjointClique { .. } => "kdc",
            Method::SchurHorn { .. } => "schurhorn",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineResult {
    pub method: Method,
    pub success: bool,
    /// `‖X − target‖_F / ‖target‖_F`.
    pub distance: f64,
    /// For k-DC: the same distance against the unnormalised `Σ 1_C 1_Cᵀ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unnormalized_distance: Option<f64>,
    /// Largest feasibility / optimality residual reported by the solver.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_secs: f64,
    #[serde(skip)]
    pub solution: SymMatrix,
}

/// `Σ_l w(|C_l|) 1_{C_l}1_{C_l}ᵀ`.
fn block_pattern(part: &CliquePartition, weight: impl Fn(usize) -> f64) -> SymMatrix {
    SymMatrix::from_fn(part.n(), |i, j| {
        if part.same_block(i, j) {
            weight(part.block(part.block_of(i)).len())
        } else {
            0.0
        }
    })
}

fn relative_distance(x: &SymMatrix, target: &SymMatrix) -> f64 {
    x.sub(target).frob_norm() / target.frob_norm().max(f64::MIN_POSITIVE)
}

fn check_order(g: &Graph, part: &CliquePartition) -> Result<()> {
    if g.n() != part.n() {
        return Err(Error::Dimension(format!(
            "graph on {} vertices, partition of {}",
            g.n(),
            part.n()
        )));
    }
    Ok(())
}

/// Iterate of the deconvolution splitting; reusable as a warm start.
#[derive(Debug, Clone)]
pub struct DeconvolutionState {
    l: nalgebra::DMatrix<f64>,
    m: nalgebra::DMatrix<f64>,
    u: nalgebra::DMatrix<f64>,
    rho: f64,
}

#[derive(Debug, Clone)]
pub struct DeconvolutionSolution {
    pub s: SymMatrix,
    pub l: SymMatrix,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub state: DeconvolutionState,
}

/// `min λ‖S‖₁ + ‖L‖_* s.t. S + L = A, 0 ≤ L ≤ J`, where `A` carries a unit
/// diagonal (every vertex is adjacent to itself), so that a disjoint union of
/// cliques is exactly `Σ_l 1_{C_l}1_{C_l}ᵀ`.
///
/// With `S = A − L` eliminated, ADMM splits `L` (nuclear norm) from a copy
/// `M` (the entrywise term and the box), with `L = M` as coupling.
pub fn solve_deconvolution(
    g: &Graph,
    lambda: f64,
    opts: &ConicOptions,
    warm: Option<&DeconvolutionState>,
) -> Result<DeconvolutionSolution> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be ≥ 0, got {lambda}")));
    }
    let n = g.n();
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i == j || g.has_edge(i, j) {
            1.0
        } else {
            0.0
        }
    });
    let (mut l, mut m, mut u, mut rho) = match warm {
        Some(w) if w.l.nrows() == n => (w.l.clone(), w.m.clone(), w.u.clone(), w.rho),
        _ => (a.clone(), a.clone(), nalgebra::DMatrix::zeros(n, n), opts.rho),
    };
    let mut iterations = 0;
    let mut converged = false;
    let (mut rp, mut rd) = (f64::INFINITY, f64::INFINITY);
    while iterations < opts.max_iter {
        iterations += 1;
        // L ← prox_{‖·‖_*/ρ}(M − U): soft-threshold |eigenvalues|.
        let v = &m - &u;
        let (vals, vecs) = sym_eig(&v);
        let shrink = 1.0 / rho;
        let mut scaled = vecs.clone();
        for (k, &lam) in vals.iter().enumerate() {
            let t = lam.signum() * (lam.abs() - shrink).max(0.0);
            scaled.column_mut(k).scale_mut(t);
        }
        l = &scaled * vecs.transpose();
        crate::symmat::symmetrize_in_place(&mut l);

        // M ← argmin λ|A − M| + ρ/2‖M − (L + U)‖² over the box.
        let m_prev = m.clone();
        let thr = lambda / rho;
        for j in 0..n {
            for i in 0..n {
                let target = l[(i, j)] + u[(i, j)];
                let d = target - a[(i, j)];
                let soft = d.signum() * (d.abs() - thr).max(0.0);
                m[(i, j)] = (a[(i, j)] + soft).clamp(0.0, 1.0);
            }
        }
        u += &l - &m;

        let scale = l.norm().max(m.norm()).max(1.0);
        rp = (&l - &m).norm() / scale;
        rd = rho * (&m - &m_prev).norm() / (rho * u.norm()).max(1.0);
        if opts.verbose_every > 0 && iterations % opts.verbose_every == 0 {
            eprintln!("iter {iterations} primal {rp:.3e} dual {rd:.3e} rho {rho:.3e}");
        }
        if rp <= opts.eps && rd <= opts.eps {
            converged = true;
            break;
        }
        if iterations % 25 == 0 {
            if rp > 10.0 * rd {
                rho *= 2.0;
                u /= 2.0;
            } else if rd > 10.0 * rp {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    let l_sym = SymMatrix::symmetrize(l.clone());
    let s = SymMatrix::symmetrize(&a - &l);
    Ok(DeconvolutionSolution {
        s,
        l: l_sym,
        primal_residual: rp,
        dual_residual: rd,
        iterations,
        converged,
        state: DeconvolutionState { l, m, u, rho },
    })
}

pub fn deconvolution_result(
    part: &CliquePartition,
    lambda: f64,
    sol: &DeconvolutionSolution,
    runtime_secs: f64,
) -> BaselineResult {
    let target = block_pattern(part, |_| 1.0);
    let distance = relative_distance(&sol.l, &target);
    BaselineResult {
        method: Method::Deconvolution { lambda },
        success: distance <= SUCCESS_TOL,
        distance,
        unnormalized_distance: None,
        residual: sol.primal_residual.max(sol.dual_residual),
        iterations: sol.iterations,
        converged: sol.converged,
        runtime_secs,
        solution: sol.l.clone(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub success: bool,
    /// Index into `per_lambda` of the first success, or of the smallest distance.
    pub best: usize,
    pub per_lambda: Vec<BaselineResult>,
}

impl SweepResult {
    pub fn best_result(&self) -> &BaselineResult {
        &self.per_lambda[self.best]
    }
}

/// Runs the deconvolution for each λ in `grid`, warm-starting each solve
/// from the previous one.
pub fn sweep_lambda(
    g: &Graph,
    part: &CliquePartition,
    grid: &[f64],
    opts: &ConicOptions,
) -> Result<SweepResult> {
    check_order(g, part)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let mut per_lambda = Vec::with_capacity(grid.len());
    let mut warm: Option<DeconvolutionState> = None;
    for &lambda in grid {
        let start = Instant::now();
        let sol = solve_deconvolution(g, lambda, opts, warm.as_ref())?;
        per_lambda.push(deconvolution_result(
            part,
            lambda,
            &sol,
            start.elapsed().as_secs_f64(),
        ));
        warm = Some(sol.state);
    }
    let best = per_lambda
        .iter()
        .position(|r| r.success)
        .unwrap_or_else(|| {
            (0..per_lambda.len())
                .min_by(|&a, &b| per_lambda[a].distance.total_cmp(&per_lambda[b].distance))
                .expect("non-empty grid")
        });
    Ok(SweepResult {
        success: per_lambda[best].success,
        best,
        per_lambda,
    })
}

fn all_pairs_objective(n: usize, block: usize, diag: f64, off: f64) -> Vec<Term> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        out.push(Term::new(block, i, i, diag));
        for j in i + 1..n {
            out.push(Term::new(block, i, j, off));
        }
    }
    out
}

fn non_edge_masks(g: &Graph, block: usize) -> impl Iterator<Item = LinearConstraint> + '_ {
    let n = g.n();
    (0..n).flat_map(move |i| {
        (i + 1..n)
            .filter(move |&j| !g.has_edge(i, j))
            .map(move |j| LinearConstraint::new(vec![Term::new(block, i, j, 1.0)], 0.0))
    })
}

/// `max ⟨J, X⟩ s.t. X1 ≤ 1, X_ij = 0 off edges, tr X = k, X ⪰ 0`.
pub fn solve_kdc(
    g: &Graph,
    part: &CliquePartition,
    k: usize,
    opts: &ConicOptions,
) -> Result<BaselineResult> {
    check_order(g, part)?;
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    let start = Instant::now();
    let mut constraints = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mut terms: Vec<Term> = (0..n).map(|j| Term::new(0, i, j, 1.0)).collect();
        terms.push(Term::entry(1, i, 1.0));
        constraints.push(LinearConstraint::new(terms, 1.0));
    }
    constraints.push(LinearConstraint::new(
        (0..n).map(|i| Term::new(0, i, i, 1.0)).collect(),
        k as f64,
    ));
    constraints.extend(non_edge_masks(g, 0));
    let prob = ConicProblem {
        blocks: vec![Cone::Psd(n), Cone::NonNeg(n)],
        objective: all_pairs_objective(n, 0, -1.0, -2.0),
        constraints,
    };
    let sol = solve_conic(&prob, opts)?;
    let x = sol.primal[0].as_psd().expect("PSD block").clone();
    let normalized = block_pattern(part, |s| 1.0 / s as f64);
    let distance = relative_distance(&x, &normalized);
    Ok(BaselineResult {
        method: Method::KDisjointClique { k },
        success: distance <= SUCCESS_TOL,
        distance,
        unnormalized_distance: Some(relative_distance(&x, &block_pattern(part, |_| 1.0))),
        residual: sol.primal_residual.max(sol.dual_residual).max(sol.gap),
        iterations: sol.iterations,
        converged: sol.converged,
        runtime_secs: start.elapsed().as_secs_f64(),
        solution: x,
    })
}

/// Schur-Horn relaxation with target spectrum `{n ×k, 0 ×(nk − k)}`.
///
/// `X = n·Z₁`, `Z₀ + Z₁ = I`, `tr Z₁ = k`, `tr Z₀ = nk − k`, both blocks PSD,
/// `X` vanishing off edges; maximise `⟨A, X⟩`.
pub fn solve_schurhorn(
    g: &Graph,
    part: &CliquePartition,
    opts: &ConicOptions,
) -> Result<BaselineResult> {
    check_order(g, part)?;
    let sizes = part.sizes();
    let n = sizes[0];
    if sizes.iter().any(|&s| s != n) {
        return Err(Error::Inapplicable(format!(
            "Schur-Horn needs equal block sizes, got {sizes:?}"
        )));
    }
    let k = part.k();
    let total = g.n();
    let start = Instant::now();
    let objective: Vec<Term> = g
        .edges()
        .iter()
        .map(|&(i, j)| Term::new(0, i, j, -2.0 * n as f64))
        .collect();
    let mut constraints = Vec::new();
    for i in 0..total {
        for j in i..total {
            constraints.push(LinearConstraint::new(
                vec![Term::new(0, i, j, 1.0), Term::new(1, i, j, 1.0)],
                if i == j { 1.0 } else { 0.0 },
            ));
        }
    }
    constraints.push(LinearConstraint::new(
        (0..total).map(|i| Term::new(0, i, i, 1.0)).collect(),
        k as f64,
    ));
    constraints.push(LinearConstraint::new(
        (0..total).map(|i| Term::new(1, i, i, 1.0)).collect(),
        (n * k - k) as f64,
    ));
    constraints.extend(non_edge_masks(g, 0));
    let prob = ConicProblem {
        blocks: vec![Cone::Psd(total), Cone::Psd(total)],
        objective,
        constraints,
    };
    let sol = solve_conic(&prob, opts)?;
    let x = sol.primal[0].as_psd().expect("PSD block").scale(n as f64);
    let distance = relative_distance(&x, &block_pattern(part, |_| 1.0));
    Ok(BaselineResult {
        method: Method::SchurHorn { n, k },
        success: distance <= SUCCESS_TOL,
        distance,
        unnormalized_distance: None,
        residual: sol.primal_residual.max(sol.dual_residual).max(sol.gap),
        iterations: sol.iterations,
        converged: sol.converged,
        runtime_secs: start.elapsed().as_secs_f64(),
        solution: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_planted;

    fn opts() -> ConicOptions {
        ConicOptions {
            eps: 1e-6,
            ..ConicOptions::default()
        }
    }

    #[test]
    fn grid_has_eleven_points() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        assert!((g[10] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_baselines_succeed_without_noise() {
        let inst = generate_planted(&[3, 3, 3], 0.0, 0).unwrap();
        let (g, part) = (&inst.graph, &inst.partition);
        let sweep = sweep_lambda(g, part, &default_lambda_grid(), &opts()).unwrap();
        assert!(sweep.success);
        assert_eq!(sweep.per_lambda.len(), 11);
        assert!(!sweep.per_lambda[0].success);

        let kdc = solve_kdc(g, part, 3, &opts()).unwrap();
        assert!(kdc.success, "{kdc:?}");
        assert!(kdc.unnormalized_distance.unwrap() > 0.5);
        let x = &kdc.solution;
        for i in 0..9 {
            let row: f64 = (0..9).map(|j| x.get(i, j)).sum();
            assert!(row <= 1.0 + 1e-5);
        }
        assert!((x.trace() - 3.0).abs() < 1e-5);

        let sh = solve_schurhorn(g, part, &opts()).unwrap();
        assert!(sh.success, "{sh:?}");
    }

    #[test]
    fn deconvolution_solution_is_feasible() {
        let inst = generate_planted(&[4, 4], 0.3, 2).unwrap();
        let sol = solve_deconvolution(&inst.graph, 0.4, &opts(), None).unwrap();
        assert!(sol.converged);
        let a = SymMatrix::from_fn(8, |i, j| if i == j || inst.graph.has_edge(i, j) { 1.0 } else { 0.0 });
        assert!(sol.s.add(&sol.l).sub(&a).max_abs() < 1e-12);
        for i in 0..8 {
            for j in 0..8 {
                let v = sol.l.get(i, j);
                assert!((-1e-4..=1.0 + 1e-4).contains(&v));
            }
        }
        assert!(solve_deconvolution(&inst.graph, -0.1, &opts(), None).is_err());
    }

    #[test]
    fn complete_graph_single_block() {
        // One clique: L = J = A with S = 0.
        let g = Graph::complete(4).unwrap();
        let part = CliquePartition::contiguous(&[4]).unwrap();
        let sweep = sweep_lambda(&g, &part, &default_lambda_grid(), &opts()).unwrap();
        assert!(sweep.success);
        let split = CliquePartition::contiguous(&[2, 2]).unwrap();
        let sweep = sweep_lambda(&g, &split, &default_lambda_grid(), &opts()).unwrap();
        assert!(!sweep.success);
    }

    #[test]
    fn full_join_defeats_everything() {
        let inst = generate_planted(&[3, 3, 3], 1.0, 0).unwrap();
        let (g, part) = (&inst.graph, &inst.partition);
        assert!(!sweep_lambda(g, part, &default_lambda_grid(), &opts()).unwrap().success);
        assert!(!solve_kdc(g, part, 3, &opts()).unwrap().success);
        assert!(!solve_schurhorn(g, part, &opts()).unwrap().success);
    }

    #[test]
    fn kdc_with_one_block_misses_the_pattern() {
        let inst = generate_planted(&[3, 3, 3], 0.0, 0).unwrap();
        let r = solve_kdc(&inst.graph, &inst.partition, 1, &opts()).unwrap();
        assert!(!r.success);
        assert!((r.solution.trace() - 1.0).abs() < 1e-4);
        assert!(solve_kdc(&inst.graph, &inst.partition, 0, &opts()).is_err());
    }

    #[test]
    fn schurhorn_rejects_unequal_blocks() {
        let inst = generate_planted(&[3, 2], 0.0, 0).unwrap();
        assert!(matches!(
            solve_schurhorn(&inst.graph, &inst.partition, &opts()),
            Err(Error::Inapplicable(_))
        ));
    }

    #[test]
    fn schurhorn_blocks_stay_feasible() {
        let inst = generate_planted(&[3, 3], 0.4, 5).unwrap();
        let r = solve_schurhorn(&inst.graph, &inst.partition, &opts()).unwrap();
        assert!(r.converged);
        // X = 3·Z₁ with tr Z₁ = 2 and Z₁ ⪯ I.
        assert!((r.solution.trace() - 6.0).abs() < 1e-4);
        let s = r.solution.eig().unwrap();
        assert!(s.min() > -1e-4 && s.max() < 3.0 + 1e-4);
    }
}
