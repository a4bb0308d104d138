//! Degree-rank reference labeling used as a sanity floor in benchmarks.

use crate::graph::Graph;

/// Puts every node in a single pair and marks nodes with above-mean weighted
/// degree as core.
pub fn degree_rank(graph: &Graph) -> (Vec<usize>, Vec<bool>) {
    let degrees = graph.degrees();
    let mean = degrees.iter().sum::<f64>() / degrees.len().max(1) as f64;
    let cores = degrees.iter().map(|&d| d > mean).collect();
    (vec![0; graph.n()], cores)
}
