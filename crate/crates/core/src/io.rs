//! Result export: the JSON document, factor CSVs and the reordered adjacency.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::Graph;
use crate::nmf::{DetectionResult, Hyperparameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    /// Position in `active_pairs`.
    pub pair: usize,
    pub core: bool,
    /// `1 − Mᵢₖ` for the assigned pair.
    pub core_score: f64,
    /// `W` row restricted to the active pairs, in `active_pairs` order.
    pub memberships: Vec<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub nodes: Vec<NodeRecord>,
    pub active_pairs: Vec<usize>,
    pub objective_trace: Vec<f64>,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
}

impl ResultDocument {
    pub fn new(graph: &Graph, result: &DetectionResult, hp: &Hyperparameters) -> Self {
        let nodes = graph
            .node_ids()
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let pair = result.pair_labels[i];
                NodeRecord {
                    id: id.clone(),
                    pair,
                    core: result.core_flags[i],
                    core_score: result.core_scores[[i, result.active_pairs[pair]]],
                    memberships: result
                        .active_pairs
                        .iter()
                        .map(|&k| result.state.w[[i, k]])
                        .collect(),
                    low_confidence: result.low_confidence[i],
                }
            })
            .collect();
        Self {
            nodes,
            active_pairs: result.active_pairs.clone(),
            objective_trace: result.objective_trace.clone(),
            hyperparameters: hp.clone(),
            seed: hp.seed,
            iterations: result.iterations,
            converged: result.converged,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Row-major CSV whose header is the column (pair) index.
pub fn matrix_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..m.ncols()).map(|k| k.to_string()).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `W.csv`, `H.csv` (stored transposed, one row per node) and `M.csv` under `dir`.
pub fn factor_files(dir: &Path, result: &DetectionResult) -> Vec<(PathBuf, String)> {
    let s = &result.state;
    vec![
        (dir.join("W.csv"), matrix_csv(&s.w)),
        (dir.join("H.csv"), matrix_csv(&s.h.t().to_owned())),
        (dir.join("M.csv"), matrix_csv(&s.m)),
    ]
}

/// Display order: pairs by size (larger first, ties by pair position), cores
/// before peripheries, and within each group by descending core score.
pub fn display_order(doc: &ResultDocument) -> Vec<usize> {
    let mut sizes = vec![0usize; doc.active_pairs.len()];
    for node in &doc.nodes {
        sizes[node.pair] += 1;
    }
    let mut order: Vec<usize> = (0..doc.nodes.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&doc.nodes[a], &doc.nodes[b]);
        sizes[y.pair]
            .cmp(&sizes[x.pair])
            .then(x.pair.cmp(&y.pair))
            .then(y.core.cmp(&x.core))
            .then(y.core_score.total_cmp(&x.core_score))
            .then(a.cmp(&b))
    });
    order
}

/// Adjacency permuted into display order, each row annotated with node id,
/// pair and core flag.
pub fn reordered_adjacency_csv(graph: &Graph, doc: &ResultDocument) -> String {
    let order = display_order(doc);
    let v = graph.adjacency();
    let ids = graph.node_ids();
    let mut out = String::from("node,pair,core");
    for &j in &order {
        let _ = write!(out, ",{}", ids[j]);
    }
    out.push('\n');
    for &i in &order {
        let node = &doc.nodes[i];
        let _ = write!(out, "{},{},{}", ids[i], node.pair, u8::from(node.core));
        for &j in &order {
            let _ = write!(out, ",{}", v[[i, j]]);
        }
        out.push('\n');
    }
    out
}

/// Writes every file or none: contents go to temporary siblings first and
/// are renamed into place only after all writes succeeded.
pub fn write_all(files: &[(PathBuf, String)]) -> Result<()> {
    let mut staged: Vec<(PathBuf, &PathBuf)> = Vec::with_capacity(files.len());
    let cleanup = |staged: &[(PathBuf, &PathBuf)]| {
        for (tmp, _) in staged {
            let _ = fs::remove_file(tmp);
        }
    };
    for (path, content) in files {
        let mut name = path.file_name().unwrap_or_default().to_os_string();
        name.push(".partial");
        let tmp = path.with_file_name(name);
        if let Err(e) = fs::write(&tmp, content) {
            cleanup(&staged);
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        staged.push((tmp, path));
    }
    let mut done: Vec<&PathBuf> = Vec::new();
    for (i, (tmp, path)) in staged.iter().enumerate() {
        if let Err(e) = fs::rename(tmp, path) {
            cleanup(&staged[i..]);
            for p in done {
                let _ = fs::remove_file(p);
            }
            return Err(e.into());
        }
        done.push(path);
    }
    Ok(())
}
