use ndarray::{concatenate, Array2, Axis, Zip};

use super::{check_square, FactorState, Hyperparameters};
use crate::error::Result;
use crate::linalg::{matmul, Exec};

/// `V̂ = WH − (W∘M)(H∘Mᵀ)`.
pub fn reconstruct(state: &FactorState) -> Result<Array2<f64>> {
    state.check_dims()?;
    Ok(reconstruct_with(state, Exec::Sequential))
}

pub(crate) fn reconstruct_with(state: &FactorState, exec: Exec) -> Array2<f64> {
    // [W | W∘M] · [H ; −(H∘Mᵀ)] evaluates both products in one pass.
    let left = concatenate![Axis(1), state.w, &state.w * &state.m];
    let right = concatenate![Axis(0), state.h, -(&state.h * &state.m.t())];
    matmul(left.view(), right.view(), exec)
}

/// Negative log posterior split by source, additive constants dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// Generalized KL: `Σ v log(v/v̂) + v̂`.
    pub data: f64,
    pub w_prior: f64,
    pub h_prior: f64,
    pub beta_prior: f64,
    pub mask_prior: f64,
    pub mu_prior: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.data + self.w_prior + self.h_prior + self.beta_prior + self.mask_prior + self.mu_prior
    }
}

pub fn objective(v: &Array2<f64>, state: &FactorState, hp: &Hyperparameters) -> Result<f64> {
    Ok(objective_terms(v, state, hp)?.total())
}

pub fn objective_terms(
    v: &Array2<f64>,
    state: &FactorState,
    hp: &Hyperparameters,
) -> Result<ObjectiveTerms> {
    state.check_dims()?;
    check_square(v, state.n())?;
    let vhat = reconstruct_with(state, Exec::Sequential);
    Ok(terms_given_vhat(v, &vhat, state, hp))
}

pub(crate) fn data_term(v: &Array2<f64>, vhat: &Array2<f64>, eps: f64) -> f64 {
    Zip::from(v).and(vhat).fold(0.0, |acc, &x, &y| {
        if x == 0.0 {
            acc + y
        } else {
            acc + x * (x / y.max(eps)).ln() + y
        }
    })
}

pub(crate) fn terms_given_vhat(
    v: &Array2<f64>,
    vhat: &Array2<f64>,
    state: &FactorState,
    hp: &Hyperparameters,
) -> ObjectiveTerms {
    prior_terms(data_term(v, vhat, hp.eps), state, hp)
}

/// Fills in every prior term around an already computed data term.
pub(crate) fn prior_terms(data: f64, state: &FactorState, hp: &Hyperparameters) -> ObjectiveTerms {
    let n = state.n() as f64;
    let mut w_prior = 0.0;
    let mut h_prior = 0.0;
    let mut beta_prior = 0.0;
    let mut mask_prior = 0.0;
    let mut mu_prior = 0.0;
    let mask_scale = 2.0 * hp.sigma_bar * hp.sigma_bar;
    let mu_scale = 2.0 * hp.sigma_hat * hp.sigma_hat;
    for k in 0..state.k() {
        let beta = state.beta[k];
        let ln_beta = beta.ln();
        let w_sq: f64 = state.w.column(k).iter().map(|x| x * x).sum();
        let h_sq: f64 = state.h.row(k).iter().map(|x| x * x).sum();
        w_prior += 0.5 * beta * w_sq - 0.5 * n * ln_beta;
        h_prior += 0.5 * beta * h_sq - 0.5 * n * ln_beta;
        beta_prior += beta * hp.b - (hp.a - 1.0) * ln_beta;
        let mu = state.mu[k];
        mask_prior += state
            .m
            .column(k)
            .iter()
            .map(|&x| (x - mu) * (x - mu))
            .sum::<f64>()
            / mask_scale;
        mu_prior += (mu - hp.mu_hat) * (mu - hp.mu_hat) / mu_scale;
    }
    ObjectiveTerms {
        data,
        w_prior,
        h_prior,
        beta_prior,
        mask_prior,
        mu_prior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn state(w: Array2<f64>, h: Array2<f64>, m: Array2<f64>) -> FactorState {
        let k = w.ncols();
        FactorState::new(w, h, m, Array1::ones(k), Array1::ones(k)).unwrap()
    }

    #[test]
    fn full_mask_cancels() {
        let s = state(
            array![[1.0, 2.0], [0.5, 3.0]],
            array![[1.0, 4.0], [2.0, 0.1]],
            Array2::ones((2, 2)),
        );
        assert!(reconstruct(&s).unwrap().iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn empty_mask_is_plain_product() {
        let w = array![[1.0, 2.0], [0.5, 3.0]];
        let h = array![[1.0, 4.0], [2.0, 0.1]];
        let s = state(w.clone(), h.clone(), Array2::zeros((2, 2)));
        assert_eq!(reconstruct(&s).unwrap(), w.dot(&h));
    }

    #[test]
    fn hand_computed_reconstruction() {
        let s = state(array![[1.0], [2.0]], array![[3.0, 4.0]], array![[0.5], [0.5]]);
        let vhat = reconstruct(&s).unwrap();
        assert_eq!(vhat, array![[2.25, 3.0], [4.5, 6.0]]);
    }

    #[test]
    fn dimension_mismatch() {
        let s = FactorState {
            w: Array2::zeros((3, 2)),
            h: Array2::zeros((2, 4)),
            m: Array2::zeros((3, 2)),
            beta: Array1::ones(2),
            mu: Array1::ones(2),
        };
        assert!(reconstruct(&s).is_err());
        let ok = state(Array2::zeros((3, 2)), Array2::zeros((2, 3)), Array2::zeros((3, 2)));
        let hp = Hyperparameters::default();
        assert!(objective(&Array2::zeros((2, 2)), &ok, &hp).is_err());
    }

    #[test]
    fn all_zero_configuration_scores_zero() {
        let (n, k) = (3, 2);
        let hp = Hyperparameters {
            a: 1.0,
            b: 0.0,
            sigma_bar: 1.0,
            sigma_hat: 1.0,
            mu_hat: 0.0,
            ..Default::default()
        };
        let s = FactorState::new(
            Array2::zeros((n, k)),
            Array2::zeros((k, n)),
            Array2::zeros((n, k)),
            Array1::ones(k),
            Array1::zeros(k),
        )
        .unwrap();
        let t = objective_terms(&Array2::zeros((n, n)), &s, &hp).unwrap();
        assert_eq!(t.total(), 0.0);
        assert_eq!(t.data, 0.0);
    }

    #[test]
    fn scalar_data_terms() {
        assert_eq!(data_term(&array![[2.0]], &array![[2.0]], 1e-12), 2.0);
        let d = data_term(&array![[4.0]], &array![[1.0]], 1e-12);
        assert!((d - (4.0 * 4f64.ln() + 1.0)).abs() < 1e-12);
        assert!((d - 6.545).abs() < 1e-3);
        // zero observation contributes only v̂
        assert_eq!(data_term(&array![[0.0]], &array![[0.25]], 1e-12), 0.25);
    }

    #[test]
    fn data_term_floors_vhat() {
        let d = data_term(&array![[1.0]], &array![[0.0]], 1e-12);
        assert!((d - (1e12f64).ln()).abs() < 1e-9);
    }
}
