//! Masked Bayesian non-negative matrix factorization.
//!
//! The expected network is `V̂ = WH − (W∘M)(H∘Mᵀ)`, i.e.
//! `v̂ᵢⱼ = Σₖ wᵢₖ hₖⱼ (1 − mᵢₖ mⱼₖ)`. A mask entry near 1 marks node `i` as
//! periphery of pair `k`: links between two periphery nodes of the same pair
//! are suppressed while links touching a core node are kept. `1 − M` is the
//! per-pair core score.

mod discretize;
mod fit;
mod objective;
mod observed;
mod update;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use discretize::{discretize_core, discretize_pairs, prune_pairs, PairAssignment};
pub use fit::{fit, fit_with, initial_state, DetectionResult, FitOptions};
pub use objective::{objective, objective_terms, reconstruct, ObjectiveTerms};
pub use update::{
    grad_h, grad_m, grad_w, update_beta, update_h, update_m, update_mu, update_w,
};

/// How the mask prior gradient `(M − μ)/σ̄²` is split between the numerator
/// and denominator of the `M` update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskPrior {
    /// `μ/σ̄²` in the numerator, `M/σ̄²` in the denominator. The prior pulls
    /// every entry toward `μ` proportionally to its distance.
    #[default]
    Quadratic,
    /// `(M − μ)₋` in the numerator, `(M − μ)₊` in the denominator. An entry
    /// above `μ` whose data numerator vanishes collapses to 0 in one step.
    Signed,
}

/// Fixed priors and run controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Gamma shape of the prior on `β`.
    pub a: f64,
    /// Gamma rate of the prior on `β`.
    pub b: f64,
    /// Scale of the truncated-normal prior on the mask.
    pub sigma_bar: f64,
    /// Scale of the normal prior on `μ`.
    pub sigma_hat: f64,
    /// Mean of the normal prior on `μ`.
    pub mu_hat: f64,
    /// Initial number of pairs `K`.
    pub k_init: usize,
    pub n_iter: usize,
    /// Relative objective change below which the sweep loop stops.
    pub tol: f64,
    pub seed: u64,
    /// Floor applied to `V̂` in ratios and logs and to update denominators.
    pub eps: f64,
    /// Pairs whose factor norm falls below this fraction of the largest are pruned.
    pub prune_threshold: f64,
    #[serde(default)]
    pub mask_prior: MaskPrior,
    /// Independent seeded starts; the one ending at the lowest `𝒰` is kept.
    #[serde(default = "one")]
    pub restarts: usize,
}

fn one() -> usize {
    1
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            a: 5.0,
            b: 10.0,
            sigma_bar: 1.0,
            sigma_hat: 1.0,
            mu_hat: 0.5,
            k_init: 32,
            n_iter: 500,
            tol: 1e-6,
            seed: 0,
            eps: 1e-12,
            prune_threshold: 1e-3,
            mask_prior: MaskPrior::Quadratic,
            restarts: 1,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        if !(self.a > 0.0) {
            return bad("a must be > 0");
        }
        if !(self.b > 0.0) {
            return bad("b must be > 0");
        }
        if !(self.sigma_bar > 0.0) {
            return bad("sigma_bar must be > 0");
        }
        if !(self.sigma_hat > 0.0) {
            return bad("sigma_hat must be > 0");
        }
        if !(0.0..=1.0).contains(&self.mu_hat) {
            return bad("mu_hat must lie in [0, 1]");
        }
        if self.k_init == 0 {
            return bad("k must be >= 1");
        }
        if self.n_iter == 0 {
            return bad("iters must be >= 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be >= 1");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be >= 0");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be > 0");
        }
        if !(0.0..1.0).contains(&self.prune_threshold) {
            return bad("prune threshold must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Model variables: `W` (N×K), `H` (K×N), mask `M` (N×K), `β` and `μ` (length K).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    pub m: Array2<f64>,
    pub beta: Array1<f64>,
    pub mu: Array1<f64>,
}

impl FactorState {
    pub fn new(
        w: Array2<f64>,
        h: Array2<f64>,
        m: Array2<f64>,
        beta: Array1<f64>,
        mu: Array1<f64>,
    ) -> Result<Self> {
        let s = Self { w, h, m, beta, mu };
        s.check_dims()?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    pub fn check_dims(&self) -> Result<()> {
        let (n, k) = self.w.dim();
        let dim = |what: &str, got: (usize, usize), want: (usize, usize)| {
            if got != want {
                Err(Error::Dimension(format!(
                    "{what} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )))
            } else {
                Ok(())
            }
        };
        dim("H", self.h.dim(), (k, n))?;
        dim("M", self.m.dim(), (n, k))?;
        if self.beta.len() != k || self.mu.len() != k {
            return Err(Error::Dimension(format!(
                "beta/mu have lengths {}/{}, expected {k}",
                self.beta.len(),
                self.mu.len()
            )));
        }
        Ok(())
    }

    /// Checks the feasibility constraints: `W, H ≥ 0`, `0 ≤ M ≤ 1`, `β > 0`.
    pub fn is_feasible(&self) -> bool {
        self.w.iter().all(|&x| x >= 0.0)
            && self.h.iter().all(|&x| x >= 0.0)
            && self.m.iter().all(|&x| (0.0..=1.0).contains(&x))
            && self.beta.iter().all(|&x| x > 0.0)
    }
}

pub(crate) fn check_square(v: &Array2<f64>, n: usize) -> Result<()> {
    if v.dim() != (n, n) {
        let (r, c) = v.dim();
        return Err(Error::Dimension(format!(
            "V is {r}x{c}, factors expect {n}x{n}"
        )));
    }
    Ok(())
}
