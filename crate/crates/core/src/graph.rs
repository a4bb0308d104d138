//! Network ingestion and the dense adjacency view used by the factorization.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Directedness {
    #[default]
    Undirected,
    Directed,
}

/// Node-indexed network with a dense adjacency matrix.
///
/// Node identifiers are arbitrary strings mapped to `0..n` in first-appearance
/// order. For undirected input the adjacency is symmetric with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_ids: Vec<String>,
    adjacency: Array2<f64>,
}

impl Graph {
    /// Builds a graph from an adjacency matrix, naming nodes `0..n`.
    pub fn from_adjacency(adjacency: Array2<f64>) -> Result<Self> {
        let ids = (0..adjacency.nrows()).map(|i| i.to_string()).collect();
        Self::with_ids(ids, adjacency)
    }

    pub fn with_ids(node_ids: Vec<String>, adjacency: Array2<f64>) -> Result<Self> {
        let (r, c) = adjacency.dim();
        if r != c {
            return Err(Error::Dimension(format!("adjacency is {r}x{c}")));
        }
        if node_ids.len() != r {
            return Err(Error::Dimension(format!(
                "{} node ids for {r} nodes",
                node_ids.len()
            )));
        }
        let mut seen = HashMap::with_capacity(r);
        for (i, id) in node_ids.iter().enumerate() {
            if seen.insert(id.as_str(), i).is_some() {
                return Err(Error::DuplicateNode {
                    id: id.clone(),
                    line: i + 1,
                });
            }
        }
        if adjacency.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidConfig(
                "adjacency entries must be finite and non-negative".into(),
            ));
        }
        let mut adjacency = adjacency;
        adjacency.diag_mut().fill(0.0);
        Ok(Self {
            node_ids,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn index_of(&self) -> HashMap<&str, usize> {
        self.node_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        let a = &self.adjacency;
        let n = self.n();
        (0..n).all(|i| (i + 1..n).all(|j| a[[i, j]] == a[[j, i]]))
    }

    /// Weighted degree (row sums).
    pub fn degrees(&self) -> Vec<f64> {
        self.adjacency.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Fraction of ordered off-diagonal pairs carrying a nonzero entry.
    pub fn density(&self) -> Result<f64> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "density needs at least 2 nodes, got {n}"
            )));
        }
        let nnz = self
            .adjacency
            .indexed_iter()
            .filter(|((i, j), &x)| i != j && x != 0.0)
            .count();
        Ok(nnz as f64 / (n * (n - 1)) as f64)
    }

    /// Serializes to the edge-list format read by [`parse_edge_list`].
    ///
    /// Each undirected edge is written once (`i < j`). Nodes without edges
    /// are written as self-loops, which the reader registers and then drops.
    pub fn to_edge_list(&self) -> String {
        let n = self.n();
        let a = &self.adjacency;
        let symmetric = self.is_symmetric();
        let mut out = String::new();
        let mut touched = vec![false; n];
        for i in 0..n {
            let start = if symmetric { i + 1 } else { 0 };
            for j in start..n {
                let w = a[[i, j]];
                if i == j || w == 0.0 {
                    continue;
                }
                touched[i] = true;
                touched[j] = true;
                if w == 1.0 {
                    let _ = writeln!(out, "{} {}", self.node_ids[i], self.node_ids[j]);
                } else {
                    let _ = writeln!(out, "{} {} {}", self.node_ids[i], self.node_ids[j], w);
                }
            }
        }
        for (i, t) in touched.iter().enumerate() {
            if !t {
                let id = &self.node_ids[i];
                let _ = writeln!(out, "{id} {id}");
            }
        }
        out
    }

    pub fn save_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

pub fn load_edge_list(path: impl AsRef<Path>, directedness: Directedness) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_edge_list_at(&text, directedness, path)
}

/// Parses edge-list text: `src dst [weight]` per line, `#`/`%` comments.
pub fn parse_edge_list(text: &str, directedness: Directedness) -> Result<Graph> {
    parse_edge_list_at(text, directedness, Path::new("<input>"))
}

fn parse_edge_list_at(text: &str, directedness: Directedness, path: &Path) -> Result<Graph> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();

    let mut intern = |s: &str, ids: &mut Vec<String>| -> usize {
        if let Some(&i) = index.get(s) {
            return i;
        }
        let i = ids.len();
        ids.push(s.to_owned());
        index.insert(s.to_owned(), i);
        i
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            msg,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        let weight = match toks.len() {
            2 => 1.0,
            3 => {
                let w: f64 = toks[2]
                    .parse()
                    .map_err(|_| parse_err(format!("weight {:?} is not a number", toks[2])))?;
                if !w.is_finite() || w < 0.0 {
                    return Err(parse_err(format!("weight {w} must be finite and >= 0")));
                }
                w
            }
            n => return Err(parse_err(format!("expected 2 or 3 tokens, found {n}"))),
        };
        let src = intern(toks[0], &mut ids);
        let dst = intern(toks[1], &mut ids);
        if src != dst {
            edges.push((src, dst, weight));
        }
    }

    if ids.is_empty() {
        return Err(Error::EmptyInput(path.to_path_buf()));
    }

    let n = ids.len();
    let mut adj = Array2::<f64>::zeros((n, n));
    for (s, d, w) in edges {
        let cell = &mut adj[[s, d]];
        *cell = cell.max(w);
        if directedness == Directedness::Undirected {
            let cell = &mut adj[[d, s]];
            *cell = cell.max(w);
        }
    }
    Ok(Graph {
        node_ids: ids,
        adjacency: adj,
    })
}
