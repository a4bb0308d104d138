use ndarray::{Array1, Array2, Zip};
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::discretize::{discretize_core, discretize_pairs, prune_pairs};
use super::objective::prior_terms;
use super::observed::{product_total, Observed, Recon};
use super::update::{next_h, next_m, next_w, update_beta, update_mu};
use super::{FactorState, Hyperparameters};
use crate::error::{Error, Result};
use crate::linalg::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    /// 0 or 1 runs the deterministic single-threaded path.
    pub threads: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { threads: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub state: FactorState,
    /// `𝒰` at initialization followed by its value after every sweep.
    pub objective_trace: Vec<f64>,
    /// Index into `active_pairs` for each node.
    pub pair_labels: Vec<usize>,
    pub core_flags: Vec<bool>,
    /// `1 − M`, one column per original pair.
    pub core_scores: Array2<f64>,
    pub active_pairs: Vec<usize>,
    pub low_confidence: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
    /// Factor steps that were shortened or rejected to keep `𝒰` from rising.
    pub damped_steps: usize,
    /// Which of the `restarts` starts reached the lowest objective and was kept.
    pub restart: usize,
}

/// Seeded starting point: `W`, `H`, `M` i.i.d. uniform on (0, 1), `β = μ = 1`.
pub fn initial_state(n: usize, k: usize, seed: u64) -> FactorState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r, c| Array2::from_shape_simple_fn((r, c), || rng.sample::<f64, _>(Open01));
    let w = draw(n, k);
    let h = draw(k, n);
    let m = draw(n, k);
    FactorState {
        w,
        h,
        m,
        beta: Array1::ones(k),
        mu: Array1::ones(k),
    }
}

pub fn fit(v: &Array2<f64>, hp: &Hyperparameters) -> Result<DetectionResult> {
    fit_with(v, hp, &FitOptions::default())
}

pub fn fit_with(v: &Array2<f64>, hp: &Hyperparameters, opts: &FitOptions) -> Result<DetectionResult> {
    hp.validate()?;
    let (n, c) = v.dim();
    if n != c {
        return Err(Error::Dimension(format!("V is {n}x{c}, expected square")));
    }
    if n == 0 {
        return Err(Error::Dimension("V is empty".into()));
    }
    for i in 0..n {
        for j in i..n {
            let (x, y) = (v[[i, j]], v[[j, i]]);
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "V[{i}][{j}] = {x} is not a finite non-negative value"
                )));
            }
            if x != y {
                return Err(Error::Asymmetric(i, j));
            }
        }
    }

    if opts.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| run(v, hp, Exec::Parallel))
    } else {
        run(v, hp, Exec::Sequential)
    }
}

/// Largest number of halvings of the step exponent tried before a block
/// keeps its current value.
const MAX_DAMPING: u32 = 10;

#[derive(Clone, Copy)]
enum Block {
    W,
    H,
    M,
}

struct Sweeper<'a> {
    obs: &'a Observed,
    hp: &'a Hyperparameters,
    exec: Exec,
    vhat: Recon,
    data: f64,
    value: f64,
    damped: usize,
    /// Step length each block starts from; grows back after a full step.
    gamma: [f64; 3],
}

/// `V̂(γ) = V̂ + γ·slope − γ²·curve` along a shortened step.
struct Segment {
    slope: Recon,
    curve: Option<Recon>,
}

impl Sweeper<'_> {
    fn slot(state: &mut FactorState, block: Block) -> &mut Array2<f64> {
        match block {
            Block::W => &mut state.w,
            Block::H => &mut state.h,
            Block::M => &mut state.m,
        }
    }

    /// Applies the multiplicative step for `block` if it does not raise `𝒰`.
    ///
    /// Otherwise the step is shortened to `X + γ(X* − X)` with `γ` halved per
    /// attempt, which keeps zeros, signs and the `[0, 1]` box. Along that
    /// segment `V̂` is linear in `W` and `H` and quadratic in `M`, so shorter
    /// steps are evaluated without reconstructing again.
    fn step(&mut self, state: &mut FactorState, block: Block) {
        let proposal = match block {
            Block::W => next_w(&self.obs, &self.vhat, state, self.hp, self.exec),
            Block::H => next_h(&self.obs, &self.vhat, state, self.hp, self.exec),
            Block::M => next_m(&self.obs, &self.vhat, state, self.hp, self.exec),
        };
        let current = std::mem::replace(Self::slot(state, block), proposal.clone());
        let full = self.obs.reconstruct(state, self.exec);
        let mut segment = None;
        let mut gamma = self.gamma[block as usize];
        for attempt in 0..=MAX_DAMPING {
            let mut blended = None;
            if gamma < 1.0 {
                let seg = segment
                    .get_or_insert_with(|| self.segment(state, block, &current, &proposal, &full));
                *Self::slot(state, block) = Zip::from(&current)
                    .and(&proposal)
                    .map_collect(|&x, &y| x + gamma * (y - x));
                blended = Some(self.along(seg, gamma));
            }
            let vhat = blended.as_ref().unwrap_or(&full);
            let data = self.obs.data_term(vhat, self.hp.eps);
            let value = prior_terms(data, state, self.hp).total();
            if value <= self.value {
                if gamma < 1.0 {
                    self.damped += 1;
                }
                self.gamma[block as usize] = if attempt == 0 { (2.0 * gamma).min(1.0) } else { gamma };
                self.vhat = blended.unwrap_or(full);
                self.data = data;
                self.value = value;
                return;
            }
            gamma *= 0.5;
        }
        *Self::slot(state, block) = current;
        self.damped += 1;
    }

    fn segment(
        &self,
        state: &FactorState,
        block: Block,
        current: &Array2<f64>,
        proposal: &Array2<f64>,
        full: &Recon,
    ) -> Segment {
        let mut slope = Recon {
            entries: full
                .entries
                .iter()
                .zip(&self.vhat.entries)
                .map(|(a, b)| a - b)
                .collect(),
            total: full.total - self.vhat.total,
        };
        let curve = match block {
            Block::W | Block::H => None,
            Block::M => {
                // (W∘D)(H∘Dᵀ) with D the full mask step
                let d = proposal - current;
                let wd = &state.w * &d;
                let hd = &state.h.t() * &d;
                let curve = Recon {
                    entries: self.obs.sample(wd.view(), hd.view(), self.exec),
                    total: product_total(wd.view(), hd.view()),
                };
                for (s, c) in slope.entries.iter_mut().zip(&curve.entries) {
                    *s += c;
                }
                slope.total += curve.total;
                Some(curve)
            }
        };
        Segment { slope, curve }
    }

    fn along(&self, seg: &Segment, gamma: f64) -> Recon {
        let base = &self.vhat;
        let mut entries: Vec<f64> = base
            .entries
            .iter()
            .zip(&seg.slope.entries)
            .map(|(b, s)| b + gamma * s)
            .collect();
        let mut total = base.total + gamma * seg.slope.total;
        if let Some(c) = &seg.curve {
            let g2 = gamma * gamma;
            for (e, c) in entries.iter_mut().zip(&c.entries) {
                *e -= g2 * c;
            }
            total -= g2 * c.total;
        }
        Recon { entries, total }
    }

    fn refresh_priors(&mut self, state: &FactorState) {
        self.value = prior_terms(self.data, state, self.hp).total();
    }
}

/// Seed of the `r`-th start; the first start uses `seed` itself.
fn restart_seed(seed: u64, r: usize) -> u64 {
    seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

struct Descent {
    state: FactorState,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    damped: usize,
}

fn run(v: &Array2<f64>, hp: &Hyperparameters, exec: Exec) -> Result<DetectionResult> {
    let obs = Observed::from_dense(v);
    let mut best: Option<(usize, Descent)> = None;
    for r in 0..hp.restarts {
        let d = descend(&obs, hp, restart_seed(hp.seed, r), exec)?;
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| d.trace.last() < b.trace.last());
        if better {
            best = Some((r, d));
        }
    }
    let (restart, d) = best.expect("restarts >= 1");

    let active = prune_pairs(&d.state, hp.prune_threshold)?;
    let assignment = discretize_pairs(&d.state, &active);
    let core_flags = discretize_core(&d.state, &active, &assignment.labels);
    let core_scores = d.state.m.mapv(|x| 1.0 - x);
    Ok(DetectionResult {
        state: d.state,
        objective_trace: d.trace,
        pair_labels: assignment.labels,
        core_flags,
        core_scores,
        active_pairs: active,
        low_confidence: assignment.low_confidence,
        iterations: d.iterations,
        converged: d.converged,
        damped_steps: d.damped,
        restart,
    })
}

fn descend(obs: &Observed, hp: &Hyperparameters, seed: u64, exec: Exec) -> Result<Descent> {
    let mut state = initial_state(obs.n(), hp.k_init, seed);
    let vhat = obs.reconstruct(&state, exec);
    let data = obs.data_term(&vhat, hp.eps);
    let value = prior_terms(data, &state, hp).total();
    let mut sweeper = Sweeper {
        obs,
        hp,
        exec,
        vhat,
        data,
        value,
        damped: 0,
        gamma: [1.0; 3],
    };
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < hp.n_iter {
        sweeper.step(&mut state, Block::W);
        sweeper.step(&mut state, Block::H);
        sweeper.step(&mut state, Block::M);
        state.mu = update_mu(&state, hp);
        state.beta = update_beta(&state, hp)?;
        sweeper.refresh_priors(&state);

        let prev = *trace.last().unwrap();
        let value = sweeper.value;
        trace.push(value);
        iterations += 1;
        if !value.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "objective became {value} at sweep {iterations}"
            )));
        }
        if (prev - value).abs() <= hp.tol * prev.abs() {
            converged = true;
            break;
        }
    }
    Ok(Descent {
        state,
        trace,
        iterations,
        converged,
        damped: sweeper.damped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn triangle_plus_tail() -> Array2<f64> {
        array![
            [0.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0]
        ]
    }

    #[test]
    fn restarts_keep_the_lowest_objective() {
        let v = triangle_plus_tail();
        let base = Hyperparameters { k_init: 3, n_iter: 30, seed: 6, ..Default::default() };
        let single = fit(&v, &base).unwrap();
        let many = fit(&v, &Hyperparameters { restarts: 4, ..base.clone() }).unwrap();
        assert_eq!(single.restart, 0);
        assert!(many.objective_trace.last() <= single.objective_trace.last());
        let finals: Vec<f64> = (0..4)
            .map(|r| {
                let hp = Hyperparameters { seed: restart_seed(6, r), ..base.clone() };
                *fit(&v, &hp).unwrap().objective_trace.last().unwrap()
            })
            .collect();
        let lowest = finals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(*many.objective_trace.last().unwrap(), lowest);
        assert_eq!(finals[many.restart], lowest);
        assert_eq!(restart_seed(6, 0), 6);
    }

    #[test]
    fn initial_state_ranges() {
        let s = initial_state(10, 3, 42);
        assert!(s.w.iter().chain(s.h.iter()).chain(s.m.iter()).all(|&x| x > 0.0 && x < 1.0));
        assert_eq!(s.beta, Array1::<f64>::ones(3));
        assert_eq!(s.mu, Array1::<f64>::ones(3));
        assert_eq!(s, initial_state(10, 3, 42));
        assert_ne!(s, initial_state(10, 3, 43));
    }

    #[test]
    fn rejects_bad_input() {
        let hp = Hyperparameters::default();
        assert!(matches!(fit(&Array2::zeros((2, 3)), &hp), Err(Error::Dimension(_))));
        let asym = array![[0.0, 1.0], [0.0, 0.0]];
        assert!(matches!(fit(&asym, &hp), Err(Error::Asymmetric(0, 1))));
        let bad = Hyperparameters { n_iter: 0, ..hp };
        assert!(fit(&triangle_plus_tail(), &bad).is_err());
    }

    #[test]
    fn single_pair_labels_all_zero() {
        let hp = Hyperparameters { k_init: 1, n_iter: 50, ..Default::default() };
        let r = fit(&triangle_plus_tail(), &hp).unwrap();
        assert_eq!(r.active_pairs, vec![0]);
        assert!(r.pair_labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn deterministic_given_seed() {
        let hp = Hyperparameters { k_init: 4, n_iter: 40, seed: 9, ..Default::default() };
        let v = triangle_plus_tail();
        assert_eq!(fit(&v, &hp).unwrap(), fit(&v, &hp).unwrap());
    }

    #[test]
    fn trace_starts_at_initial_state() {
        let hp = Hyperparameters { k_init: 3, n_iter: 5, tol: 0.0, ..Default::default() };
        let v = triangle_plus_tail();
        let r = fit(&v, &hp).unwrap();
        assert_eq!(r.iterations, 5);
        assert_eq!(r.objective_trace.len(), 6);
        let init = initial_state(4, 3, hp.seed);
        let u0 = super::super::objective(&v, &init, &hp).unwrap();
        assert!((r.objective_trace[0] - u0).abs() <= 1e-12 * u0.abs());
    }
}
