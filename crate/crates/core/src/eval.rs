//! Label-comparison metrics and ground-truth file I/O.

use std::collections::HashMap;
use std::fs;
use std::hash::Hash;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Normalized mutual information `2·I(Y;C) / (H(Y) + H(C))`, natural log.
///
/// Two single-class labelings score 1. If only one of them is single-class
/// the mutual information is 0 and so is the score.
pub fn nmi<A, B>(y: &[A], c: &[B]) -> Result<f64>
where
    A: Hash + Eq,
    B: Hash + Eq,
{
    if y.len() != c.len() {
        return Err(Error::LengthMismatch(y.len(), c.len()));
    }
    if y.is_empty() {
        return Err(Error::EmptyLabeling);
    }
    let n = y.len() as f64;
    let ys = dense_ids(y);
    let cs = dense_ids(c);
    let ky = ys.iter().max().map_or(0, |m| m + 1);
    let kc = cs.iter().max().map_or(0, |m| m + 1);

    let mut joint = vec![0usize; ky * kc];
    let mut row = vec![0usize; ky];
    let mut col = vec![0usize; kc];
    for (&a, &b) in ys.iter().zip(&cs) {
        joint[a * kc + b] += 1;
        row[a] += 1;
        col[b] += 1;
    }

    let entropy = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&x| x > 0)
            .map(|&x| {
                let p = x as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let hy = entropy(&row);
    let hc = entropy(&col);
    if hy + hc == 0.0 {
        return Ok(1.0);
    }
    let mut terms = Vec::new();
    for a in 0..ky {
        for b in 0..kc {
            let nab = joint[a * kc + b];
            if nab == 0 {
                continue;
            }
            let nab = nab as f64;
            terms.push(nab / n * (n * nab / (row[a] as f64 * col[b] as f64)).ln());
        }
    }
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok((2.0 * mi / (hy + hc)).clamp(0.0, 1.0))
}

fn dense_ids<T: Hash + Eq>(labels: &[T]) -> Vec<usize> {
    let mut map: HashMap<&T, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpScore {
    pub nmi_pairs: f64,
    pub nmi_core: f64,
    pub nmi_cp: f64,
}

/// Mean of the pair-label NMI and the core-flag NMI.
pub fn nmi_cp<R1, R2>(r: &[R1], r_hat: &[R2], c: &[bool], c_hat: &[bool]) -> Result<CpScore>
where
    R1: Hash + Eq,
    R2: Hash + Eq,
{
    let n = r.len();
    for len in [r_hat.len(), c.len(), c_hat.len()] {
        if len != n {
            return Err(Error::LengthMismatch(n, len));
        }
    }
    let nmi_pairs = nmi(r, r_hat)?;
    let nmi_core = nmi(c, c_hat)?;
    Ok(CpScore {
        nmi_pairs,
        nmi_core,
        nmi_cp: 0.5 * (nmi_pairs + nmi_core),
    })
}

/// Ground-truth labels aligned to a graph's node order.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub pairs: Vec<String>,
    pub cores: Vec<bool>,
}

pub fn load_ground_truth(path: impl AsRef<Path>, graph: &Graph) -> Result<Labels> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_ground_truth(&text, graph.node_ids(), path.as_ref())
}

/// Parses `node_id pair_id core_flag` lines against `node_ids`.
pub fn parse_ground_truth(text: &str, node_ids: &[String], path: &Path) -> Result<Labels> {
    let index: HashMap<&str, usize> = node_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut pairs: Vec<Option<String>> = vec![None; node_ids.len()];
    let mut cores = vec![false; node_ids.len()];
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let line_no = lineno + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("expected `node_id pair_id core_flag`, found {} tokens", toks.len()),
            });
        }
        let core = match toks[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("core flag must be 0 or 1, found {other:?}"),
                })
            }
        };
        let &i = index.get(toks[0]).ok_or_else(|| Error::UnknownNode {
            id: toks[0].to_owned(),
            line: line_no,
        })?;
        if pairs[i].is_some() {
            return Err(Error::DuplicateNode {
                id: toks[0].to_owned(),
                line: line_no,
            });
        }
        pairs[i] = Some(toks[1].to_owned());
        cores[i] = core;
    }
    let missing: Vec<String> = pairs
        .iter()
        .zip(node_ids)
        .filter(|(p, _)| p.is_none())
        .map(|(_, id)| id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingNodes(missing));
    }
    Ok(Labels {
        pairs: pairs.into_iter().map(Option::unwrap).collect(),
        cores,
    })
}

/// Writes `node_id pair_id core_flag` lines.
pub fn format_ground_truth(node_ids: &[String], pairs: &[usize], cores: &[bool]) -> String {
    let mut out = String::new();
    for ((id, p), c) in node_ids.iter().zip(pairs).zip(cores) {
        out.push_str(&format!("{id} {p} {}\n", u8::from(*c)));
    }
    out
}
