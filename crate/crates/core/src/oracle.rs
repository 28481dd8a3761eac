//! Exact clique cover and stability numbers for small graphs.
//!
//! A clique cover of `G` is a proper colouring of its complement, so `χ̄(G)`
//! is computed by DSATUR branch and bound on `Ḡ`; `α(G)` is the clique
//! number of `Ḡ`. Both searches are deterministic: with the same budget they
//! explore the same nodes in the same order.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub max_nodes: u64,
    /// Wall-clock cap. Leaves node counts reproducible only when unset.
    pub max_time: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_nodes: 50_000_000,
            max_time: None,
        }
    }
}

struct Meter {
    budget: Budget,
    start: Instant,
    nodes: u64,
    exhausted: bool,
}

impl Meter {
    fn new(budget: Budget) -> Self {
        Meter {
            budget,
            start: Instant::now(),
            nodes: 0,
            exhausted: false,
        }
    }

    /// Counts a node; returns `false` once the budget is spent.
    fn tick(&mut self) -> bool {
        if self.exhausted {
            return false;
        }
        self.nodes += 1;
        let over_time = self.nodes % 1024 == 0
            && self
                .budget
                .max_time
                .is_some_and(|t| self.start.elapsed() > t);
        if self.nodes > self.budget.max_nodes || over_time {
            self.exhausted = true;
        }
        !self.exhausted
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverSolution {
    pub value: usize,
    pub cover: Vec<Vec<usize>>,
    /// Best proven lower bound (equals `value` when `exact`).
    pub lower_bound: usize,
    pub nodes_explored: u64,
    pub time_secs: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilitySolution {
    pub value: usize,
    pub witness: Vec<usize>,
    pub nodes_explored: u64,
    pub exact: bool,
}

/// Maximum clique by branch and bound with a greedy-colouring bound.
fn max_clique(adj: &[Vec<bool>], meter: &mut Meter) -> Vec<usize> {
    let n = adj.len();
    let mut best: Vec<usize> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    // Candidates ordered by decreasing degree, ties by index.
    let mut order: Vec<usize> = (0..n).collect();
    let degree: Vec<usize> = adj.iter().map(|r| r.iter().filter(|&&b| b).count()).collect();
    order.sort_by(|&a, &b| degree[b].cmp(&degree[a]).then(a.cmp(&b)));
    expand(adj, order, &mut current, &mut best, meter);
    best.sort_unstable();
    best
}

fn colour_bound(adj: &[Vec<bool>], cands: &[usize]) -> (Vec<usize>, Vec<usize>) {
    // Greedy sequential colouring; returns vertices sorted by colour and
    // the colour (1-based) of each, ascending.
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for &v in cands {
        match classes
            .iter_mut()
            .find(|cls| cls.iter().all(|&u| !adj[u][v]))
        {
            Some(cls) => cls.push(v),
            None => classes.push(vec![v]),
        }
    }
    let mut verts = Vec::with_capacity(cands.len());
    let mut cols = Vec::with_capacity(cands.len());
    for (c, cls) in classes.iter().enumerate() {
        for &v in cls {
            verts.push(v);
            cols.push(c + 1);
        }
    }
    (verts, cols)
}

fn expand(
    adj: &[Vec<bool>],
    cands: Vec<usize>,
    current: &mut Vec<usize>,
    best: &mut Vec<usize>,
    meter: &mut Meter,
) {
    if !meter.tick() {
        return;
    }
    let (verts, cols) = colour_bound(adj, &cands);
    let mut remaining = cands;
    for idx in (0..verts.len()).rev() {
        if current.len() + cols[idx] <= best.len() {
            return;
        }
        let v = verts[idx];
        current.push(v);
        let next: Vec<usize> = remaining.iter().copied().filter(|&u| adj[v][u]).collect();
        if next.is_empty() {
            if current.len() > best.len() {
                *best = current.clone();
            }
        } else {
            expand(adj, next, current, best, meter);
        }
        current.pop();
        remaining.retain(|&u| u != v);
        if meter.exhausted {
            return;
        }
    }
}

fn adjacency(g: &Graph) -> Vec<Vec<bool>> {
    (0..g.n())
        .map(|i| (0..g.n()).map(|j| g.has_edge(i, j)).collect())
        .collect()
}

/// `α(G)` with a maximum independent set as witness.
pub fn stability_number(g: &Graph, budget: Budget) -> StabilitySolution {
    let mut meter = Meter::new(budget);
    let witness = max_clique(&adjacency(&g.complement()), &mut meter);
    StabilitySolution {
        value: witness.len(),
        witness,
        nodes_explored: meter.nodes,
        exact: !meter.exhausted,
    }
}

/// `ω(G)` with a maximum clique as witness.
pub fn clique_number(g: &Graph, budget: Budget) -> StabilitySolution {
    let mut meter = Meter::new(budget);
    let witness = max_clique(&adjacency(g), &mut meter);
    StabilitySolution {
        value: witness.len(),
        witness,
        nodes_explored: meter.nodes,
        exact: !meter.exhausted,
    }
}

/// DSATUR branch and bound for the chromatic number of `adj`.
struct Colouring<'a> {
    adj: &'a [Vec<bool>],
    neighbours: Vec<Vec<usize>>,
    colour: Vec<Option<usize>>,
    /// `forbidden[v][c]`: number of coloured neighbours of `v` with colour `c`.
    forbidden: Vec<Vec<u32>>,
    saturation: Vec<usize>,
    best: usize,
    best_colour: Vec<usize>,
    lower: usize,
}

impl<'a> Colouring<'a> {
    fn new(adj: &'a [Vec<bool>], best_colour: Vec<usize>, lower: usize) -> Self {
        let n = adj.len();
        let best = best_colour.iter().map(|&c| c + 1).max().unwrap_or(0);
        Colouring {
            adj,
            neighbours: (0..n).map(|v| (0..n).filter(|&u| adj[v][u]).collect()).collect(),
            colour: vec![None; n],
            forbidden: vec![vec![0; n + 1]; n],
            saturation: vec![0; n],
            best,
            best_colour,
            lower,
        }
    }

    fn assign(&mut self, v: usize, c: usize) {
        self.colour[v] = Some(c);
        for i in 0..self.neighbours[v].len() {
            let u = self.neighbours[v][i];
            if self.forbidden[u][c] == 0 {
                self.saturation[u] += 1;
            }
            self.forbidden[u][c] += 1;
        }
    }

    fn unassign(&mut self, v: usize, c: usize) {
        self.colour[v] = None;
        for i in 0..self.neighbours[v].len() {
            let u = self.neighbours[v][i];
            self.forbidden[u][c] -= 1;
            if self.forbidden[u][c] == 0 {
                self.saturation[u] -= 1;
            }
        }
    }

    /// Uncoloured vertex of maximum saturation, then maximum uncoloured
    /// degree, then lowest index.
    fn select(&self) -> Option<usize> {
        let mut pick: Option<(usize, usize, usize)> = None;
        for v in 0..self.adj.len() {
            if self.colour[v].is_some() {
                continue;
            }
            let deg = self.neighbours[v]
                .iter()
                .filter(|&&u| self.colour[u].is_none())
                .count();
            let key = (self.saturation[v], deg);
            if pick.map_or(true, |(s, d, _)| key > (s, d)) {
                pick = Some((key.0, key.1, v));
            }
        }
        pick.map(|p| p.2)
    }

    fn search(&mut self, used: usize, meter: &mut Meter) {
        if self.best <= self.lower || !meter.tick() {
            return;
        }
        let Some(v) = self.select() else {
            if used < self.best {
                self.best = used;
                self.best_colour = self.colour.iter().map(|c| c.expect("all coloured")).collect();
            }
            return;
        };
        for c in 0..=used.min(self.adj.len() - 1) {
            let opens = c == used;
            if (if opens { used + 1 } else { used }) >= self.best {
                break;
            }
            if self.forbidden[v][c] > 0 {
                continue;
            }
            self.assign(v, c);
            self.search(if opens { used + 1 } else { used }, meter);
            self.unassign(v, c);
            if meter.exhausted || self.best <= self.lower {
                return;
            }
        }
    }
}

/// Greedy DSATUR colouring (no backtracking).
fn greedy_dsatur(adj: &[Vec<bool>]) -> Vec<usize> {
    let mut col = Colouring::new(adj, Vec::new(), 0);
    let mut out = vec![0; adj.len()];
    while let Some(v) = col.select() {
        let c = (0..=adj.len())
            .find(|&c| col.forbidden[v][c] == 0)
            .expect("some colour is free");
        col.assign(v, c);
        out[v] = c;
    }
    out
}

/// Exact `χ̄(G)` via DSATUR branch and bound on the complement.
///
/// The lower bound is a maximum clique of the complement (a maximum
/// independent set of `G`); its vertices are precoloured with distinct
/// colours before branching.
pub fn clique_cover_number(g: &Graph, budget: Budget) -> CoverSolution {
    let start = Instant::now();
    let n = g.n();
    if n == 0 {
        return CoverSolution {
            value: 0,
            cover: Vec::new(),
            lower_bound: 0,
            nodes_explored: 0,
            time_secs: 0.0,
            exact: true,
        };
    }
    let comp = adjacency(&g.complement());
    let mut meter = Meter::new(budget);
    let clique = max_clique(&comp, &mut meter);
    let lower = if meter.exhausted { 1 } else { clique.len() };
    let greedy = greedy_dsatur(&comp);

    let mut col = Colouring::new(&comp, greedy, lower);
    for (c, &v) in clique.iter().enumerate() {
        col.assign(v, c);
    }
    if !meter.exhausted {
        col.search(clique.len(), &mut meter);
    }
    let value = col.best;
    let mut cover = vec![Vec::new(); value];
    for (v, &c) in col.best_colour.iter().enumerate() {
        cover[c].push(v);
    }
    cover.retain(|b| !b.is_empty());
    let exact = !meter.exhausted || value <= lower;
    CoverSolution {
        value: cover.len(),
        cover,
        lower_bound: if exact { value } else { lower },
        nodes_explored: meter.nodes,
        time_secs: start.elapsed().as_secs_f64(),
        exact,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Sandwich {
    pub alpha: usize,
    pub theta: f64,
    pub chi_bar: usize,
    pub holds: bool,
}

/// `α(G) ≤ θ + tol` and `θ ≤ χ̄(G) + tol`, refusing inexact oracle values.
pub fn sandwich_check(g: &Graph, theta: f64, tol: f64, budget: Budget) -> Result<Sandwich> {
    let alpha = stability_number(g, budget);
    let cover = clique_cover_number(g, budget);
    if !alpha.exact || !cover.exact {
        return Err(Error::Inexact);
    }
    Ok(Sandwich {
        alpha: alpha.value,
        theta,
        chi_bar: cover.value,
        holds: alpha.value as f64 <= theta + tol && theta <= cover.value as f64 + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_planted;
    use crate::rng;
    use rand::Rng;

    /// Minimum clique partition by DP over vertex subsets.
    fn brute_cover(g: &Graph) -> usize {
        let n = g.n();
        let full = (1usize << n) - 1;
        let is_clique: Vec<bool> = (0..=full)
            .map(|s| {
                (0..n).all(|i| {
                    s >> i & 1 == 0 || (i + 1..n).all(|j| s >> j & 1 == 0 || g.has_edge(i, j))
                })
            })
            .collect();
        let mut f = vec![usize::MAX; full + 1];
        f[0] = 0;
        for s in 1..=full {
            let low = s & s.wrapping_neg();
            let rest = s ^ low;
            // Cliques containing the lowest vertex of s.
            let mut sub = rest;
            loop {
                let t = sub | low;
                if is_clique[t] && f[s ^ t] != usize::MAX {
                    f[s] = f[s].min(1 + f[s ^ t]);
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        f[full]
    }

    fn brute_alpha(g: &Graph) -> usize {
        let n = g.n();
        (0usize..1 << n)
            .filter(|&s| {
                (0..n).all(|i| {
                    s >> i & 1 == 0 || (i + 1..n).all(|j| s >> j & 1 == 0 || !g.has_edge(i, j))
                })
            })
            .map(|s| s.count_ones() as usize)
            .max()
            .unwrap()
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut r = rng::seeded(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if r.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(n, edges).unwrap()
    }

    #[test]
    fn textbook_values() {
        let b = Budget::default();
        let c5 = Graph::cycle(5).unwrap();
        assert_eq!(clique_cover_number(&c5, b).value, 3);
        assert_eq!(stability_number(&c5, b).value, 2);
        let k6 = Graph::complete(6).unwrap();
        assert_eq!(clique_cover_number(&k6, b).value, 1);
        assert_eq!(stability_number(&k6, b).value, 1);
        let inst = generate_planted(&[3, 4, 2, 5], 0.0, 0).unwrap();
        assert_eq!(clique_cover_number(&inst.graph, b).value, 4);
        assert_eq!(stability_number(&inst.graph, b).value, 4);
        assert_eq!(brute_cover(&c5), 3);
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        for seed in 0..60u64 {
            let n = 4 + (seed % 9) as usize;
            let p = [0.2, 0.5, 0.8][(seed % 3) as usize];
            let g = random_graph(n, p, seed);
            let cover = clique_cover_number(&g, Budget::default());
            assert!(cover.exact);
            assert_eq!(cover.value, brute_cover(&g), "seed {seed}");
            // The witness is a partition into cliques.
            let mut seen = vec![false; n];
            for block in &cover.cover {
                for (a, &i) in block.iter().enumerate() {
                    assert!(!seen[i]);
                    seen[i] = true;
                    for &j in &block[a + 1..] {
                        assert!(g.has_edge(i, j));
                    }
                }
            }
            assert!(seen.iter().all(|&s| s));

            let alpha = stability_number(&g, Budget::default());
            assert_eq!(alpha.value, brute_alpha(&g));
            for (a, &i) in alpha.witness.iter().enumerate() {
                for &j in &alpha.witness[a + 1..] {
                    assert!(!g.has_edge(i, j));
                }
            }
            assert_eq!(clique_number(&g.complement(), Budget::default()).value, alpha.value);
        }
    }

    #[test]
    fn node_counts_are_reproducible() {
        let inst = generate_planted(&[5; 5], 0.6, 9).unwrap();
        let a = clique_cover_number(&inst.graph, Budget::default());
        let b = clique_cover_number(&inst.graph, Budget::default());
        assert_eq!(a.nodes_explored, b.nodes_explored);
        assert_eq!(a.cover, b.cover);
    }

    #[test]
    fn exhausted_budget_is_reported() {
        let inst = generate_planted(&[6; 6], 0.65, 1).unwrap();
        let tiny = Budget {
            max_nodes: 3,
            max_time: None,
        };
        let r = clique_cover_number(&inst.graph, tiny);
        if !r.exact {
            assert!(r.lower_bound <= r.value);
            assert!(matches!(
                sandwich_check(&inst.graph, 6.0, 1e-4, tiny),
                Err(Error::Inexact)
            ));
        }
        let full = clique_cover_number(&inst.graph, Budget::default());
        assert!(full.exact && full.value <= r.value);
    }

    #[test]
    fn edges_never_raise_the_numbers() {
        for seed in 0..10 {
            let sparse = generate_planted(&[3, 3, 3], 0.2, seed).unwrap().graph;
            let dense = generate_planted(&[3, 3, 3], 0.6, seed).unwrap().graph;
            let b = Budget::default();
            assert!(clique_cover_number(&dense, b).value <= clique_cover_number(&sparse, b).value);
            assert!(stability_number(&dense, b).value <= stability_number(&sparse, b).value);
        }
    }

    #[test]
    fn sandwich_examples() {
        let b = Budget::default();
        let s = sandwich_check(&Graph::cycle(5).unwrap(), 5f64.sqrt(), 1e-4, b).unwrap();
        assert_eq!((s.alpha, s.chi_bar), (2, 3));
        assert!(s.holds);
        let s = sandwich_check(&Graph::complete(5).unwrap(), 1.0, 1e-4, b).unwrap();
        assert!(s.holds && s.alpha == 1 && s.chi_bar == 1);
        let s = sandwich_check(&Graph::cycle(5).unwrap(), 3.5, 1e-4, b).unwrap();
        assert!(!s.holds);
    }
}
