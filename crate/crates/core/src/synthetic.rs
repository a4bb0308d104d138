//! Planted core-periphery block model.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub pair_sizes: Vec<usize>,
    pub core_fraction: f64,
    pub p_core_core: f64,
    pub p_core_periph: f64,
    pub p_periph_periph: f64,
    pub p_cross: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            pair_sizes: vec![100, 100],
            core_fraction: 0.5,
            p_core_core: 0.6,
            p_core_periph: 0.6,
            p_periph_periph: 0.05,
            p_cross: 0.05,
            seed: 0,
        }
    }
}

/// Splits `n` nodes into `pairs` sizes differing by at most one, larger first.
pub fn equal_pair_sizes(n: usize, pairs: usize) -> Result<Vec<usize>> {
    if pairs == 0 || n < 2 * pairs {
        return Err(Error::InvalidConfig(format!(
            "cannot split {n} nodes into {pairs} pairs of at least 2"
        )));
    }
    let base = n / pairs;
    let extra = n % pairs;
    Ok((0..pairs).map(|p| base + usize::from(p < extra)).collect())
}

impl PlantedConfig {
    pub fn with_n(n: usize, pairs: usize) -> Result<Self> {
        Ok(Self {
            pair_sizes: equal_pair_sizes(n, pairs)?,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_core_core", self.p_core_core),
            ("p_core_periph", self.p_core_periph),
            ("p_periph_periph", self.p_periph_periph),
            ("p_cross", self.p_cross),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        if !(self.core_fraction > 0.0 && self.core_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "core fraction {} must lie strictly between 0 and 1",
                self.core_fraction
            )));
        }
        if self.pair_sizes.is_empty() {
            return Err(Error::InvalidConfig("no pairs configured".into()));
        }
        for (p, &size) in self.pair_sizes.iter().enumerate() {
            if size < 2 {
                return Err(Error::InvalidConfig(format!("pair {p} has size {size} < 2")));
            }
            let cores = self.cores_in(size);
            if cores == 0 || cores == size {
                return Err(Error::InvalidConfig(format!(
                    "pair {p} of size {size} gets {cores} cores; needs at least one core and one periphery"
                )));
            }
        }
        Ok(())
    }

    fn cores_in(&self, size: usize) -> usize {
        // guard against 0.5 * 10 landing a hair above 5
        let raw = self.core_fraction * size as f64;
        (raw - 1e-9).ceil().max(0.0) as usize
    }

    fn role_probability(&self, a_core: bool, b_core: bool) -> f64 {
        match (a_core, b_core) {
            (true, true) => self.p_core_core,
            (false, false) => self.p_periph_periph,
            _ => self.p_core_periph,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub pair: usize,
    pub core: bool,
}

/// Planted labels. `pair_labels`/`core_flags` hold each node's first
/// membership; `memberships` lists all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub pair_labels: Vec<usize>,
    pub core_flags: Vec<bool>,
    pub memberships: Vec<Vec<Membership>>,
}

impl GroundTruth {
    fn from_memberships(memberships: Vec<Vec<Membership>>) -> Self {
        Self {
            pair_labels: memberships.iter().map(|m| m[0].pair).collect(),
            core_flags: memberships.iter().map(|m| m[0].core).collect(),
            memberships,
        }
    }

    pub fn n(&self) -> usize {
        self.pair_labels.len()
    }

    /// Nodes belonging to more than one pair.
    pub fn overlapping_nodes(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.memberships[i].len() > 1).collect()
    }
}

pub fn generate(cfg: &PlantedConfig) -> Result<(Graph, GroundTruth)> {
    cfg.validate()?;
    let mut memberships = Vec::new();
    for (p, &size) in cfg.pair_sizes.iter().enumerate() {
        let cores = cfg.cores_in(size);
        memberships.extend((0..size).map(|i| vec![Membership { pair: p, core: i < cores }]));
    }
    sample(cfg, memberships)
}

/// Two pairs sharing `overlap` nodes: the last `overlap` members of pair 0
/// are periphery there and core in pair 1.
///
/// Pair sizes count members, so the network has
/// `pair_sizes[0] + pair_sizes[1] − overlap` nodes. Within pair 1 the shared
/// nodes come first and therefore take core slots.
pub fn generate_overlapping(cfg: &PlantedConfig, overlap: usize) -> Result<(Graph, GroundTruth)> {
    cfg.validate()?;
    if cfg.pair_sizes.len() != 2 {
        return Err(Error::InvalidConfig(format!(
            "overlapping generator needs exactly 2 pairs, got {}",
            cfg.pair_sizes.len()
        )));
    }
    let (s0, s1) = (cfg.pair_sizes[0], cfg.pair_sizes[1]);
    if overlap >= s0.min(s1) {
        return Err(Error::InvalidConfig(format!(
            "overlap {overlap} must be smaller than every pair size"
        )));
    }
    let (c0, c1) = (cfg.cores_in(s0), cfg.cores_in(s1));
    if overlap > s0 - c0 || overlap > c1 {
        return Err(Error::InvalidConfig(format!(
            "overlap {overlap} exceeds the periphery of pair 0 ({}) or the core of pair 1 ({c1})",
            s0 - c0
        )));
    }

    let n = s0 + s1 - overlap;
    let mut memberships: Vec<Vec<Membership>> = (0..s0)
        .map(|i| vec![Membership { pair: 0, core: i < c0 }])
        .collect();
    memberships.extend((s0..n).map(|_| Vec::new()));
    for (rank, node) in (s0 - overlap..n).enumerate() {
        memberships[node].push(Membership { pair: 1, core: rank < c1 });
    }
    sample(cfg, memberships)
}

fn sample(cfg: &PlantedConfig, memberships: Vec<Vec<Membership>>) -> Result<(Graph, GroundTruth)> {
    let n = memberships.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adj = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let p = edge_probability(cfg, &memberships[i], &memberships[j]);
            if rng.gen::<f64>() < p {
                adj[[i, j]] = 1.0;
                adj[[j, i]] = 1.0;
            }
        }
    }
    let graph = Graph::from_adjacency(adj)?;
    Ok((graph, GroundTruth::from_memberships(memberships)))
}

/// An edge is present if any shared pair samples it; nodes sharing no pair
/// connect with `p_cross`.
fn edge_probability(cfg: &PlantedConfig, a: &[Membership], b: &[Membership]) -> f64 {
    let mut miss = 1.0;
    let mut shared = false;
    for x in a {
        for y in b.iter().filter(|y| y.pair == x.pair) {
            shared = true;
            miss *= 1.0 - cfg.role_probability(x.core, y.core);
        }
    }
    if shared {
        1.0 - miss
    } else {
        cfg.p_cross
    }
}
