//! Fixed instances shared by the benchmarks.

use thetacover::graph::generate_planted;
use thetacover::PlantedInstance;

/// `blocks` cliques of `size` vertices with cross-edge probability `p`.
pub fn planted(blocks: usize, size: usize, p: f64) -> PlantedInstance {
    generate_planted(&vec![size; blocks], p, 7).expect("valid planted parameters")
}
