//! Graphs, clique partitions and the planted clique-cover model.
//!
//! A planted instance is a disjoint union of cliques with independent
//! cross-clique edges. The structural quantity that governs recovery is the
//! sparse-clique-cover parameter: the largest fraction of any foreign clique
//! that a single vertex is adjacent to.

use std::fmt;
use std::fs;
use std::path::Path;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Undirected simple graph on vertices `0..n`.
///
/// Edges are kept in canonical form: `i < j`, sorted lexicographically.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<bool>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicates and out-of-range endpoints.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
        }
        let mut adj = vec![vec![false; n]; n];
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            if adj[a][b] {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            adj[a][b] = true;
            adj[b][a] = true;
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        Ok(Graph {
            n,
            edges: canon,
            adj,
        })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Graph::new(n, std::iter::empty())
    }

    pub fn complete(n: usize) -> Result<Self> {
        Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// The cycle 0-1-…-(n-1)-0.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGraph("a cycle needs at least 3 vertices".into()));
        }
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v]
            .iter()
            .enumerate()
            .filter_map(|(j, &e)| e.then_some(j))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].iter().filter(|&&e| e).count()
    }

    /// `(i, j)` is an edge of the complement iff `i != j` and it is not an edge here.
    pub fn complement(&self) -> Graph {
        let n = self.n;
        let mut edges = Vec::with_capacity(n * (n - 1) / 2 - self.edges.len());
        for i in 0..n {
            for j in i + 1..n {
                if !self.adj[i][j] {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(n, edges).expect("complement of a valid graph is valid")
    }

    /// Adds edges, returning a new graph. Existing edges are ignored.
    pub fn with_added_edges(&self, extra: &[(usize, usize)]) -> Result<Graph> {
        let mut edges = self.edges.clone();
        for &(a, b) in extra {
            if a < self.n && b < self.n && a != b && !self.adj[a][b] {
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Graph::new(self.n, edges)
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edges)
            .finish()
    }
}

/// Ordered list of disjoint, non-empty vertex blocks covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliquePartition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl CliquePartition {
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidPartition("no blocks".into()));
        }
        let mut block_of = vec![usize::MAX; n];
        for (l, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {l} is empty")));
            }
            for &v in block {
                if v >= n {
                    return Err(Error::InvalidPartition(format!(
                        "vertex {v} in block {l} is out of range for n = {n}"
                    )));
                }
                if block_of[v] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "vertex {v} appears in blocks {} and {l}",
                        block_of[v]
                    )));
                }
                block_of[v] = l;
            }
        }
        if let Some(v) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::InvalidPartition(format!("vertex {v} is not covered")));
        }
        Ok(CliquePartition { blocks, block_of })
    }

    /// Contiguous index ranges of the given sizes, in order.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidArgument("empty block size list".into()));
        }
        if let Some(l) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("block {l} has size 0")));
        }
        let n = sizes.iter().sum();
        let mut start = 0;
        let blocks = sizes
            .iter()
            .map(|&s| {
                let b: Vec<usize> = (start..start + s).collect();
                start += s;
                b
            })
            .collect();
        CliquePartition::new(n, blocks)
    }

    pub fn n(&self) -> usize {
        self.block_of.len()
    }

    /// Number of blocks, `k*`.
    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, l: usize) -> &[usize] {
        &self.blocks[l]
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.block_of[v]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    #[inline]
    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.block_of[i] == self.block_of[j]
    }

    /// First within-block pair that is not an edge of `g`, if any.
    pub fn missing_clique_edge(&self, g: &Graph) -> Option<(usize, usize)> {
        if g.n() != self.n() {
            return Some((0, 0));
        }
        for block in &self.blocks {
            for (a, &i) in block.iter().enumerate() {
                for &j in &block[a + 1..] {
                    if !g.has_edge(i, j) {
                        return Some((i.min(j), i.max(j)));
                    }
                }
            }
        }
        None
    }

    pub fn validate_cliques(&self, g: &Graph) -> Result<()> {
        if g.n() != self.n() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} vertices, graph has {}",
                self.n(),
                g.n()
            )));
        }
        match self.missing_clique_edge(g) {
            None => Ok(()),
            Some((i, j)) => Err(Error::InvalidPartition(format!(
                "vertices {i} and {j} share a block but are not adjacent"
            ))),
        }
    }
}

/// A graph drawn from the planted clique-cover model.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub graph: Graph,
    pub partition: CliquePartition,
    pub p: f64,
    pub seed: u64,
}

/// Draws a planted instance: contiguous cliques of the given sizes plus each
/// cross-block pair independently with probability `p`.
///
/// Pairs are visited in lexicographic order `(i, j), i < j`, one uniform draw
/// per cross pair, so the graph is a pure function of `(sizes, p, seed)`.
pub fn generate_planted(sizes: &[usize], p: f64, seed: u64) -> Result<PlantedInstance> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} is outside [0, 1]")));
    }
    let partition = CliquePartition::contiguous(sizes)?;
    let n = partition.n();
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if partition.same_block(i, j) {
                edges.push((i, j));
            } else if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::new(n, edges)?;
    debug_assert!(partition.missing_clique_edge(&graph).is_none());
    Ok(PlantedInstance {
        graph,
        partition,
        p,
        seed,
    })
}

/// Number of neighbours of `v` inside block `l`. `v` must not belong to `l`.
pub fn cross_edge_count(g: &Graph, part: &CliquePartition, v: usize, l: usize) -> Result<usize> {
    if v >= g.n() || l >= part.k() {
        return Err(Error::InvalidArgument(format!(
            "vertex {v} or block {l} out of range"
        )));
    }
    if part.block_of(v) == l {
        return Err(Error::InvalidArgument(format!(
            "vertex {v} belongs to block {l}"
        )));
    }
    Ok(part.block(l).iter().filter(|&&u| g.has_edge(v, u)).count())
}

/// Smallest `c` for which `g` has the sparse-clique-cover property with respect
/// to `part`: the maximum over vertices `v` and foreign blocks `l` of
/// `|e(v, C_l)| / |C_l|`, kept as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SccParameter {
    pub ratio: Ratio<usize>,
    /// A maximizing `(vertex, block)` pair, absent when there is one block.
    pub witness: Option<(usize, usize)>,
}

impl SccParameter {
    pub fn value(&self) -> f64 {
        *self.ratio.numer() as f64 / *self.ratio.denom() as f64
    }

    /// Whether the graph is `c`-SCC for the given `c`.
    pub fn satisfied_by(&self, c: f64) -> bool {
        self.value() <= c
    }
}

pub fn scc_parameter(g: &Graph, part: &CliquePartition) -> Result<SccParameter> {
    part.validate_cliques(g)?;
    let mut best = SccParameter {
        ratio: Ratio::new_raw(0, 1),
        witness: None,
    };
    for v in 0..g.n() {
        let mut counts = vec![0usize; part.k()];
        for u in g.neighbors(v) {
            counts[part.block_of(u)] += 1;
        }
        for (l, &count) in counts.iter().enumerate() {
            if l == part.block_of(v) {
                continue;
            }
            let r = Ratio::new(count, part.block(l).len());
            if best.witness.is_none() || r > best.ratio {
                best = SccParameter {
                    ratio: r,
                    witness: Some((v, l)),
                };
            }
        }
    }
    Ok(best)
}

/// `min{ ¼ (min_l 1/|C_l| / Σ_l 1/|C_l|)², 1/100 }`.
///
/// Graphs whose sparse-clique-cover parameter is strictly below this value
/// have the planted cover as the unique theta optimum.
pub fn recovery_threshold(part: &CliquePartition) -> f64 {
    let inv: Vec<f64> = part.sizes().iter().map(|&s| 1.0 / s as f64).collect();
    let min = inv.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = inv.iter().sum();
    (0.25 * (min / sum).powi(2)).min(0.01)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoeffdingBound {
    /// `1 − Σ_i |C_i| Σ_{j≠i} exp(−2|C_j|(c−p)²)`; may be negative.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub clamped: f64,
}

/// Lower bound on the probability that a planted instance is `c`-SCC.
pub fn hoeffding_bound(sizes: &[usize], p: f64, c: f64) -> Result<HoeffdingBound> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("empty block size list".into()));
    }
    if !(p < c) {
        return Err(Error::InvalidArgument(format!(
            "bound requires p < c (p = {p}, c = {c})"
        )));
    }
    let d2 = (c - p) * (c - p);
    let mut failure = 0.0;
    for (i, &si) in sizes.iter().enumerate() {
        let inner: f64 = sizes
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &sj)| (-2.0 * sj as f64 * d2).exp())
            .sum();
        failure += si as f64 * inner;
    }
    let raw = 1.0 - failure;
    Ok(HoeffdingBound {
        raw,
        clamped: raw.clamp(0.0, 1.0),
    })
}

/// On-disk JSON form of a graph, optionally carrying its planted cover.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blocks: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// Parsed contents of a graph file.
#[derive(Debug, Clone)]
pub struct GraphDocument {
    pub graph: Graph,
    pub partition: Option<CliquePartition>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
}

impl From<PlantedInstance> for GraphDocument {
    fn from(inst: PlantedInstance) -> Self {
        GraphDocument {
            graph: inst.graph,
            partition: Some(inst.partition),
            p: Some(inst.p),
            seed: Some(inst.seed),
        }
    }
}

impl GraphDocument {
    pub fn to_json(&self) -> String {
        let file = GraphFile {
            n: self.graph.n(),
            edges: self.graph.edges().iter().map(|&(i, j)| [i, j]).collect(),
            blocks: self.partition.as_ref().map(|p| p.blocks().to_vec()),
            p: self.p,
            seed: self.seed,
        };
        serde_json::to_string(&file).expect("graph file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let graph = Graph::new(file.n, file.edges.iter().map(|&[i, j]| (i, j)))
            .map_err(|e| Error::Parse(e.to_string()))?;
        let partition = file
            .blocks
            .map(|b| CliquePartition::new(file.n, b))
            .transpose()?;
        Ok(GraphDocument {
            graph,
            partition,
            p: file.p,
            seed: file.seed,
        })
    }
}

pub fn write_graph(path: &Path, doc: &GraphDocument) -> Result<()> {
    fs::write(path, doc.to_json()).map_err(|e| Error::io(path, e))
}

pub fn read_graph(path: &Path) -> Result<GraphDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GraphDocument::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles_with_cross(extra: &[(usize, usize)]) -> (Graph, CliquePartition) {
        let part = CliquePartition::contiguous(&[3, 3]).unwrap();
        let mut edges = vec![(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)];
        edges.extend_from_slice(extra);
        (Graph::new(6, edges).unwrap(), part)
    }

    #[test]
    fn planted_extremes_of_p() {
        let a = generate_planted(&[3, 3], 0.0, 7).unwrap();
        assert_eq!(a.graph.edge_count(), 6);
        let b = generate_planted(&[3, 3], 1.0, 7).unwrap();
        assert_eq!(b.graph.edge_count(), 15);
        assert_eq!(b.graph, Graph::complete(6).unwrap());
    }

    #[test]
    fn planted_is_deterministic() {
        let a = generate_planted(&[8; 8], 0.2, 12345).unwrap();
        let b = generate_planted(&[8; 8], 0.2, 12345).unwrap();
        assert_eq!(a.graph.edges(), b.graph.edges());
        let c = generate_planted(&[8; 8], 0.2, 12346).unwrap();
        assert_ne!(a.graph.edges(), c.graph.edges());
    }

    #[test]
    fn planted_rejects_bad_input() {
        assert!(generate_planted(&[], 0.1, 0).is_err());
        assert!(generate_planted(&[3, 0], 0.1, 0).is_err());
        assert!(generate_planted(&[3], -0.1, 0).is_err());
        assert!(generate_planted(&[3], 1.5, 0).is_err());
        assert!(generate_planted(&[3], f64::NAN, 0).is_err());
    }

    #[test]
    fn complement_examples() {
        let k6 = Graph::complete(6).unwrap();
        assert_eq!(k6.complement().edge_count(), 0);
        assert_eq!(Graph::empty(4).unwrap().complement(), Graph::complete(4).unwrap());
        // C5 complement is the pentagram 0-2-4-1-3-0, again a 5-cycle.
        let c5 = Graph::cycle(5).unwrap();
        let pentagram = Graph::new(5, [(0, 2), (2, 4), (4, 1), (1, 3), (3, 0)]).unwrap();
        assert_eq!(c5.complement(), pentagram);
        assert_eq!(c5.complement().complement(), c5);
    }

    #[test]
    fn graph_rejects_loops_duplicates_and_range() {
        assert!(Graph::new(3, [(0, 0)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        assert!(Graph::new(0, []).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(CliquePartition::new(4, vec![vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(CliquePartition::new(4, vec![vec![0, 1], vec![2]]).is_err());
        assert!(CliquePartition::new(4, vec![vec![0, 1, 2, 3], vec![]]).is_err());
        assert!(CliquePartition::new(4, vec![vec![3, 1], vec![0, 2]]).is_ok());
    }

    #[test]
    fn cross_edges_by_hand() {
        let (g, part) = two_triangles_with_cross(&[(0, 3), (0, 5)]);
        assert_eq!(cross_edge_count(&g, &part, 0, 1).unwrap(), 2);
        assert_eq!(cross_edge_count(&g, &part, 1, 1).unwrap(), 0);
        assert_eq!(cross_edge_count(&g, &part, 3, 0).unwrap(), 1);
        assert!(cross_edge_count(&g, &part, 0, 0).is_err());

        let full = generate_planted(&[5, 5], 1.0, 0).unwrap();
        assert_eq!(cross_edge_count(&full.graph, &full.partition, 2, 1).unwrap(), 5);
        let none = generate_planted(&[5, 5], 0.0, 0).unwrap();
        assert_eq!(cross_edge_count(&none.graph, &none.partition, 2, 1).unwrap(), 0);
    }

    #[test]
    fn scc_parameter_examples() {
        let none = generate_planted(&[4, 3, 5], 0.0, 1).unwrap();
        assert_eq!(scc_parameter(&none.graph, &none.partition).unwrap().value(), 0.0);

        let full = generate_planted(&[3, 3], 1.0, 1).unwrap();
        assert_eq!(scc_parameter(&full.graph, &full.partition).unwrap().value(), 1.0);

        // Vertex 0 sees {3, 5} of the second triangle; vertex 3 and 5 see one
        // vertex of the first. Exhaustive scan gives max 2/3.
        let (g, part) = two_triangles_with_cross(&[(0, 3), (0, 5)]);
        let c = scc_parameter(&g, &part).unwrap();
        assert_eq!(c.ratio, Ratio::new(2, 3));
        assert_eq!(c.witness, Some((0, 1)));

        // A partition whose block is not a clique is rejected.
        let bad = CliquePartition::contiguous(&[2, 4]).unwrap();
        assert!(scc_parameter(&Graph::empty(6).unwrap(), &bad).is_err());
    }

    #[test]
    fn single_block_has_zero_parameter() {
        let inst = generate_planted(&[5], 0.3, 3).unwrap();
        let c = scc_parameter(&inst.graph, &inst.partition).unwrap();
        assert_eq!(c.value(), 0.0);
        assert!(c.witness.is_none());
    }

    #[test]
    fn recovery_threshold_examples() {
        let ten = CliquePartition::contiguous(&[7; 10]).unwrap();
        assert!((recovery_threshold(&ten) - 0.0025).abs() < 1e-15);
        let two = CliquePartition::contiguous(&[6, 6]).unwrap();
        assert!((recovery_threshold(&two) - 0.01).abs() < 1e-15);
        let uneven = CliquePartition::contiguous(&[2, 4]).unwrap();
        assert!((recovery_threshold(&uneven) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn hoeffding_examples() {
        let big = hoeffding_bound(&[5000, 5000], 0.2, 0.25).unwrap();
        let expect = 1.0 - 1e4 * (-25.0f64).exp();
        assert!((big.raw - expect).abs() < 1e-15);
        assert!((big.raw - 0.999_999_861).abs() < 1e-9);

        let small = hoeffding_bound(&[10; 10], 0.2, 0.25).unwrap();
        assert!((small.raw - (1.0 - 900.0 * (-0.05f64).exp())).abs() < 1e-9);
        assert!((small.raw + 855.1).abs() < 0.05);
        assert_eq!(small.clamped, 0.0);

        let huge = hoeffding_bound(&[100_000, 100_000], 0.0, 0.9).unwrap();
        assert_eq!(huge.clamped, 1.0);

        assert!(hoeffding_bound(&[10], 0.3, 0.3).is_err());
        assert!(hoeffding_bound(&[], 0.1, 0.3).is_err());
    }

    #[test]
    fn graph_file_round_trip_and_errors() {
        let inst = generate_planted(&[4, 3, 3], 0.3, 99).unwrap();
        let doc = GraphDocument::from(inst.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        write_graph(&path, &doc).unwrap();
        let back = read_graph(&path).unwrap();
        assert_eq!(back.graph, inst.graph);
        assert_eq!(back.partition.as_ref(), Some(&inst.partition));
        assert_eq!(back.p, Some(0.3));
        assert_eq!(back.seed, Some(99));

        let dup = r#"{"n": 3, "edges": [[0,1],[1,0]]}"#;
        assert!(matches!(GraphDocument::from_json(dup), Err(Error::Parse(_))));
        let range = r#"{"n": 3, "edges": [[0,3]]}"#;
        assert!(matches!(GraphDocument::from_json(range), Err(Error::Parse(_))));
        let overlap = r#"{"n": 3, "edges": [], "blocks": [[0,1],[1,2]]}"#;
        assert!(matches!(
            GraphDocument::from_json(overlap),
            Err(Error::InvalidPartition(_))
        ));
        let trailing = r#"{"n": 2, "edges": []} x"#;
        assert!(GraphDocument::from_json(trailing).is_err());
        let unknown = r#"{"n": 2, "edges": [], "weights": []}"#;
        assert!(GraphDocument::from_json(unknown).is_err());
    }

    #[test]
    fn canonical_edge_order_in_file() {
        let g = Graph::new(4, [(3, 2), (1, 0), (2, 0)]).unwrap();
        let doc = GraphDocument {
            graph: g,
            partition: None,
            p: None,
            seed: None,
        };
        assert_eq!(doc.to_json(), r#"{"n":4,"edges":[[0,1],[0,2],[2,3]]}"#);
    }
}
