//! Pruning of empty pairs and conversion of soft factors into hard labels.

use super::FactorState;
use crate::error::{Error, Result};

/// Pairs whose factors survived the shrinkage prior.
///
/// Pair `k` is active iff `max(‖W₍:,k₎‖, ‖H₍k,:₎‖)` exceeds `threshold` times
/// the largest such norm. The result is ordered by descending `Σᵢ wᵢₖ`, ties
/// going to the lower pair index.
pub fn prune_pairs(state: &FactorState, threshold: f64) -> Result<Vec<usize>> {
    let norms: Vec<f64> = (0..state.k())
        .map(|k| {
            let w = state.w.column(k).iter().map(|x| x * x).sum::<f64>().sqrt();
            let h = state.h.row(k).iter().map(|x| x * x).sum::<f64>().sqrt();
            w.max(h)
        })
        .collect();
    let top = norms.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::AllPairsPruned);
    }
    let cutoff = threshold * top;
    let mut active: Vec<usize> = (0..state.k()).filter(|&k| norms[k] > cutoff).collect();
    let mass: Vec<f64> = (0..state.k()).map(|k| state.w.column(k).sum()).collect();
    active.sort_by(|&x, &y| mass[y].total_cmp(&mass[x]).then(x.cmp(&y)));
    Ok(active)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairAssignment {
    /// Position in the active-pair list for each node.
    pub labels: Vec<usize>,
    /// Nodes whose `W` row is zero on every active pair.
    pub low_confidence: Vec<bool>,
}

/// Hard pair label per node: argmax of `W` over active pairs.
///
/// Ties go to the lowest pair index. Rows that are zero on every active pair
/// get label 0 and are flagged as low confidence.
pub fn discretize_pairs(state: &FactorState, active: &[usize]) -> PairAssignment {
    let n = state.n();
    let mut labels = vec![0; n];
    let mut low_confidence = vec![false; n];
    for i in 0..n {
        let row = state.w.row(i);
        let mut best: Option<(usize, f64, usize)> = None;
        for (pos, &k) in active.iter().enumerate() {
            let x = row[k];
            let better = match best {
                None => true,
                Some((_, bx, bk)) => x > bx || (x == bx && k < bk),
            };
            if better {
                best = Some((pos, x, k));
            }
        }
        match best {
            Some((pos, x, _)) if x > 0.0 => labels[i] = pos,
            _ => low_confidence[i] = true,
        }
    }
    PairAssignment {
        labels,
        low_confidence,
    }
}

/// Core flag per node: `Mᵢₖ` strictly below the mean of column `k` taken over
/// the nodes assigned to pair `k`.
pub fn discretize_core(state: &FactorState, active: &[usize], labels: &[usize]) -> Vec<bool> {
    let mut sums = vec![0.0; active.len()];
    let mut counts = vec![0usize; active.len()];
    for (i, &l) in labels.iter().enumerate() {
        sums[l] += state.m[[i, active[l]]];
        counts[l] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| state.m[[i, active[l]]] < means[l])
        .collect()
}
