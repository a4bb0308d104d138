//! Multiplicative updates for `W`, `H`, `M` and closed-form updates for `μ`, `β`.
//!
//! Each factor gradient splits as `∇ = denominator − numerator` with both
//! parts non-negative, and the update is `X ← X ∘ numerator ÷ denominator`.
//! The same split backs the analytic gradients exposed here. `R = V/V̂` only
//! lives on the nonzero pattern of `V`; see [`Observed`].

use ndarray::{s, Array1, Array2, Axis, Zip};

use super::observed::{Observed, Recon};
use super::{check_square, FactorState, Hyperparameters, MaskPrior};
use crate::error::{Error, Result};
use crate::linalg::Exec;

/// Gradient of the W block split into its two non-negative parts.
pub(crate) fn w_parts(
    obs: &Observed,
    ratio: &[f64],
    s: &FactorState,
    exec: Exec,
) -> (Array2<f64>, Array2<f64>) {
    let k = s.k();
    let ht = s.h.t();
    let ht_m = &ht * &s.m;
    let mut stacked = Array2::zeros((s.n(), 2 * k));
    stacked.slice_mut(s![.., ..k]).assign(&ht);
    stacked.slice_mut(s![.., k..]).assign(&ht_m);
    // numerator: (V/V̂)Hᵀ − ((V/V̂)(H∘Mᵀ)ᵀ)∘M
    let both = obs.times(ratio, stacked.view(), exec);
    let mut num = both.slice(s![.., ..k]).to_owned();
    Zip::from(&mut num)
        .and(both.slice(s![.., k..]))
        .and(&s.m)
        .for_each(|a, &b, &m| *a -= b * m);

    // denominator: 𝟙Hᵀ − (𝟙(H∘Mᵀ)ᵀ)∘M + WB
    let h_mass = s.h.sum_axis(Axis(1));
    let hm_mass = ht_m.sum_axis(Axis(0));
    let mut den = Array2::<f64>::zeros(s.w.raw_dim());
    Zip::indexed(&mut den).for_each(|(i, k), d| {
        *d = h_mass[k] - hm_mass[k] * s.m[[i, k]] + s.w[[i, k]] * s.beta[k];
    });
    (num, den)
}

/// Gradient of the H block split into its two non-negative parts.
pub(crate) fn h_parts(
    obs: &Observed,
    ratio: &[f64],
    s: &FactorState,
    exec: Exec,
) -> (Array2<f64>, Array2<f64>) {
    let k = s.k();
    let wm = &s.w * &s.m;
    let mut stacked = Array2::zeros((s.n(), 2 * k));
    stacked.slice_mut(s![.., ..k]).assign(&s.w);
    stacked.slice_mut(s![.., k..]).assign(&wm);
    // numerator: Wᵀ(V/V̂) − Mᵀ∘((W∘M)ᵀ(V/V̂)), built transposed
    let both = obs.transpose_times(ratio, stacked.view(), exec);
    let mut num_t = both.slice(s![.., ..k]).to_owned();
    Zip::from(&mut num_t)
        .and(both.slice(s![.., k..]))
        .and(&s.m)
        .for_each(|a, &b, &m| *a -= b * m);
    let num = num_t.reversed_axes().as_standard_layout().into_owned();

    // denominator: Wᵀ𝟙 − ((W∘M)ᵀ𝟙)∘Mᵀ + BH
    let w_mass = s.w.sum_axis(Axis(0));
    let wm_mass = wm.sum_axis(Axis(0));
    let mut den = Array2::<f64>::zeros(s.h.raw_dim());
    Zip::indexed(&mut den).for_each(|(k, j), d| {
        *d = w_mass[k] - wm_mass[k] * s.m[[j, k]] + s.beta[k] * s.h[[k, j]];
    });
    (num, den)
}

/// Gradient of the M block split into its two non-negative parts.
///
/// A mask entry `mᵢₖ` enters row `i` of `V̂` through `wᵢₖ` and column `i`
/// through `hₖᵢ`; the column contribution reads the transposed ratio.
pub(crate) fn m_parts(
    obs: &Observed,
    ratio: &[f64],
    s: &FactorState,
    hp: &Hyperparameters,
    exec: Exec,
) -> (Array2<f64>, Array2<f64>) {
    let ht = s.h.t();
    let wm = &s.w * &s.m;
    let ht_m = &ht * &s.m;
    let wm_mass = wm.sum_axis(Axis(0));
    let hm_mass = ht_m.sum_axis(Axis(0));
    let row_term = obs.times(ratio, ht_m.view(), exec);
    let col_term = obs.transpose_times(ratio, wm.view(), exec);
    let inv_var = 1.0 / (hp.sigma_bar * hp.sigma_bar);

    let mut num = Array2::<f64>::zeros(s.m.raw_dim());
    let mut den = Array2::<f64>::zeros(s.m.raw_dim());
    Zip::indexed(&mut num)
        .and(&mut den)
        .for_each(|(i, k), nu, de| {
            let (m, mu) = (s.m[[i, k]], s.mu[k]);
            let (prior_num, prior_den) = match hp.mask_prior {
                MaskPrior::Quadratic => (mu * inv_var, m * inv_var),
                MaskPrior::Signed => {
                    let dev = (m - mu) * inv_var;
                    (-dev.min(0.0), dev.max(0.0))
                }
            };
            // Hᵀ∘(𝟙(W∘M)) + W∘(𝟙(Hᵀ∘M))
            *nu = ht[[i, k]] * wm_mass[k] + s.w[[i, k]] * hm_mass[k] + prior_num;
            // ((V/V̂)(H∘Mᵀ)ᵀ)∘W + ((V/V̂)ᵀ(W∘M))∘Hᵀ
            *de = row_term[[i, k]] * s.w[[i, k]] + col_term[[i, k]] * ht[[i, k]] + prior_den;
        });
    (num, den)
}

fn multiplicative(x: &Array2<f64>, num: &Array2<f64>, den: &Array2<f64>, eps: f64) -> Array2<f64> {
    Zip::from(x)
        .and(num)
        .and(den)
        .map_collect(|&x, &n, &d| if x == 0.0 { 0.0 } else { x * n.max(0.0) / d.max(eps) })
}

pub(crate) fn next_w(obs: &Observed, vhat: &Recon, s: &FactorState, hp: &Hyperparameters, exec: Exec) -> Array2<f64> {
    let r = obs.ratio(vhat, hp.eps);
    let (num, den) = w_parts(obs, &r, s, exec);
    multiplicative(&s.w, &num, &den, hp.eps)
}

pub(crate) fn next_h(obs: &Observed, vhat: &Recon, s: &FactorState, hp: &Hyperparameters, exec: Exec) -> Array2<f64> {
    let r = obs.ratio(vhat, hp.eps);
    let (num, den) = h_parts(obs, &r, s, exec);
    multiplicative(&s.h, &num, &den, hp.eps)
}

pub(crate) fn next_m(obs: &Observed, vhat: &Recon, s: &FactorState, hp: &Hyperparameters, exec: Exec) -> Array2<f64> {
    let r = obs.ratio(vhat, hp.eps);
    let (num, den) = m_parts(obs, &r, s, hp, exec);
    let mut m = multiplicative(&s.m, &num, &den, hp.eps);
    m.mapv_inplace(|x| x.clamp(0.0, 1.0));
    m
}

fn prepared(v: &Array2<f64>, s: &FactorState) -> Result<(Observed, Recon)> {
    s.check_dims()?;
    check_square(v, s.n())?;
    let obs = Observed::from_dense(v);
    let vhat = obs.reconstruct(s, Exec::Sequential);
    Ok((obs, vhat))
}

/// One multiplicative step on `W` with `V̂` taken from the current state.
pub fn update_w(v: &Array2<f64>, s: &FactorState, hp: &Hyperparameters) -> Result<Array2<f64>> {
    let (obs, vhat) = prepared(v, s)?;
    Ok(next_w(&obs, &vhat, s, hp, Exec::Sequential))
}

pub fn update_h(v: &Array2<f64>, s: &FactorState, hp: &Hyperparameters) -> Result<Array2<f64>> {
    let (obs, vhat) = prepared(v, s)?;
    Ok(next_h(&obs, &vhat, s, hp, Exec::Sequential))
}

/// One multiplicative step on `M`, projected onto `[0, 1]`.
pub fn update_m(v: &Array2<f64>, s: &FactorState, hp: &Hyperparameters) -> Result<Array2<f64>> {
    let (obs, vhat) = prepared(v, s)?;
    Ok(next_m(&obs, &vhat, s, hp, Exec::Sequential))
}

/// Posterior mode of `μ` given `M`, clipped to `[0, 1]`.
pub fn update_mu(s: &FactorState, hp: &Hyperparameters) -> Array1<f64> {
    let n = s.n() as f64;
    let var_hat = hp.sigma_hat * hp.sigma_hat;
    let var_bar = hp.sigma_bar * hp.sigma_bar;
    let denom = n * var_hat + var_bar;
    s.m.sum_axis(Axis(0))
        .mapv(|col| ((var_hat * col + var_bar * hp.mu_hat) / denom).clamp(0.0, 1.0))
}

/// Posterior mode of `β` given `W` and `H`.
pub fn update_beta(s: &FactorState, hp: &Hyperparameters) -> Result<Array1<f64>> {
    let shape = s.n() as f64 + hp.a - 1.0;
    let w_sq = s.w.mapv(|x| x * x).sum_axis(Axis(0));
    let h_sq = s.h.mapv(|x| x * x).sum_axis(Axis(1));
    let mut beta = Array1::zeros(s.k());
    for k in 0..s.k() {
        let rate = 0.5 * (w_sq[k] + h_sq[k]) + hp.b;
        if !(shape > 0.0 && rate > 0.0) {
            return Err(Error::DegeneratePrior(format!(
                "pair {k}: shape N+a-1 = {shape}, rate = {rate}"
            )));
        }
        beta[k] = shape / rate;
    }
    Ok(beta)
}

fn gradient(
    v: &Array2<f64>,
    s: &FactorState,
    hp: &Hyperparameters,
    parts: impl Fn(&Observed, &[f64]) -> (Array2<f64>, Array2<f64>),
) -> Result<Array2<f64>> {
    let (obs, vhat) = prepared(v, s)?;
    let r = obs.ratio(&vhat, hp.eps);
    let (num, den) = parts(&obs, &r);
    Ok(den - num)
}

/// Analytic `∂𝒰/∂W`.
pub fn grad_w(v: &Array2<f64>, s: &FactorState, hp: &Hyperparameters) -> Result<Array2<f64>> {
    gradient(v, s, hp, |o, r| w_parts(o, r, s, Exec::Sequential))
}

/// Analytic `∂𝒰/∂H`.
pub fn grad_h(v: &Array2<f64>, s: &FactorState, hp: &Hyperparameters) -> Result<Array2<f64>> {
    gradient(v, s, hp, |o, r| h_parts(o, r, s, Exec::Sequential))
}

/// Analytic `∂𝒰/∂M`.
pub fn grad_m(v: &Array2<f64>, s: &FactorState, hp: &Hyperparameters) -> Result<Array2<f64>> {
    gradient(v, s, hp, |o, r| m_parts(o, r, s, hp, Exec::Sequential))
}
