//! Decomposition of the expected BN loss into population normalization plus
//! an adaptive gamma-decay penalty, and the Gaussian priors of the batch
//! statistics that drive it.
//!
//! For a batch of size M drawn from data with population mean `mu_P`,
//! standard deviation `sigma_P` and excess kurtosis `rho`, the batch
//! statistics behave as `mu_B ~ N(mu_P, sigma_P^2/M)` and
//! `sigma_B ~ N(sigma_P, sigma_P^2 (rho+2)/(4M))` to leading order. Averaging
//! the loss over that randomness yields
//!
//! ```text
//! E_B[(1/P) sum_j l(h_hat_j)] ~= (1/P) sum_j l(h_bar_j) + zeta(h) gamma^2
//! zeta(h) = (rho+2)/(8M) I(gamma) + 1/(2M) mean_j sigma(h_bar_j)
//! ```
//!
//! with `h_bar` the population-normalized pre-activation, `I(gamma)` the
//! Fisher-information estimator and `sigma(.)` the logistic sigmoid (the
//! second term is present only when the batch mean enters the transform).

use crate::error::{Error, Result};
use crate::sgd::StudentState;
use crate::special::{ln_gamma, pairwise_sum, sigmoid, softplus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Population statistics of the pre-activation distribution.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PopulationStats {
    pub mu_p: f64,
    pub sigma_p: f64,
    /// Excess kurtosis (Gaussian -> 0).
    pub rho: f64,
}

/// Sample mean, standard deviation, and excess kurtosis.
pub fn estimate_population(h_samples: &[f64]) -> Result<PopulationStats> {
    if h_samples.len() < 1000 {
        return Err(Error::domain(format!(
            "population estimation needs at least 10^3 samples, got {}",
            h_samples.len()
        )));
    }
    let n = h_samples.len() as f64;
    let mean = pairwise_sum(h_samples) / n;
    let centered_sq: Vec<f64> = h_samples.iter().map(|h| (h - mean) * (h - mean)).collect();
    let var = pairwise_sum(&centered_sq) / n;
    if var <= 0.0 || !var.is_finite() {
        return Err(Error::Degenerate(
            "zero variance: all samples identical".into(),
        ));
    }
    let fourth: Vec<f64> = centered_sq.iter().map(|c| c * c).collect();
    let m4 = pairwise_sum(&fourth) / n;
    Ok(PopulationStats {
        mu_p: mean,
        sigma_p: var.sqrt(),
        rho: m4 / (var * var) - 3.0,
    })
}

/// One moment comparison inside [`PriorReport`].
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct MomentCheck {
    pub empirical: f64,
    pub predicted: f64,
    /// Monte Carlo standard error of the empirical moment.
    pub mc_stderr: f64,
    /// Allowance for the O(1/M) truncation of the prior itself.
    pub truncation_allowance: f64,
    pub rel_dev: f64,
    /// |empirical - predicted| <= 3 mc_stderr + truncation_allowance.
    pub pass: bool,
}

fn moment_check(empirical: f64, predicted: f64, mc_stderr: f64, allowance: f64) -> MomentCheck {
    let dev = (empirical - predicted).abs();
    MomentCheck {
        empirical,
        predicted,
        mc_stderr,
        truncation_allowance: allowance,
        rel_dev: if predicted != 0.0 {
            dev / predicted.abs()
        } else {
            dev
        },
        pass: dev <= 3.0 * mc_stderr + allowance,
    }
}

/// Empirical-vs-predicted moments of the batch statistics.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PriorReport {
    pub mu_mean: MomentCheck,
    pub mu_var: MomentCheck,
    pub sigma_mean: MomentCheck,
    pub sigma_var: MomentCheck,
    pub m: usize,
    pub trials: usize,
}

impl PriorReport {
    pub fn all_pass(&self) -> bool {
        self.mu_mean.pass && self.mu_var.pass && self.sigma_mean.pass && self.sigma_var.pass
    }
}

/// Draw `trials` batches of size `m` (i.i.d. with replacement, matching the
/// random-batch prior model) and compare the empirical mean/variance of
/// `mu_B` and `sigma_B` with the predicted prior moments.
pub fn verify_priors(h_samples: &[f64], m: usize, trials: usize, seed: u64) -> Result<PriorReport> {
    if m < 8 {
        return Err(Error::domain(format!("M >= 8 required, got {m}")));
    }
    if trials < 10_000 {
        return Err(Error::domain(format!(
            "at least 10^4 trials required, got {trials}"
        )));
    }
    let pop = estimate_population(h_samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu_draws = Vec::with_capacity(trials);
    let mut sigma_draws = Vec::with_capacity(trials);
    let len = h_samples.len();
    for _ in 0..trials {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..m {
            let v = h_samples[rng.gen_range(0..len)];
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / m as f64;
        let var = (sum_sq / m as f64 - mean * mean).max(0.0);
        mu_draws.push(mean);
        sigma_draws.push(var.sqrt());
    }

    // empirical mean/variance with standard errors of each estimator
    let stats = |xs: &[f64]| -> (f64, f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = pairwise_sum(xs) / n;
        let c2: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&c2) / n;
        let c4: Vec<f64> = c2.iter().map(|c| c * c).collect();
        let m4 = pairwise_sum(&c4) / n;
        let se_mean = (var / n).sqrt();
        let se_var = ((m4 - var * var).max(0.0) / n).sqrt();
        (mean, var, se_mean, se_var)
    };
    let (mu_mean, mu_var, mu_se_mean, mu_se_var) = stats(&mu_draws);
    let (sg_mean, sg_var, sg_se_mean, sg_se_var) = stats(&sigma_draws);

    let mf = m as f64;
    let pred_mu_var = pop.sigma_p * pop.sigma_p / mf;
    let pred_sg_var = pop.sigma_p * pop.sigma_p * (pop.rho + 2.0) / (4.0 * mf);
    // O(1/M) downward bias of the biased-SD mean; 1.5x head-room for the
    // next-order remainder.
    let sg_mean_allowance = 1.5 * pop.sigma_p * (0.5 / mf + (pop.rho + 2.0) / (8.0 * mf));
    // The prior variance itself carries O(1/M) relative corrections.
    let sg_var_allowance = pred_sg_var * 3.0 / mf;

    Ok(PriorReport {
        mu_mean: moment_check(mu_mean, pop.mu_p, mu_se_mean, 0.0),
        mu_var: moment_check(mu_var, pred_mu_var, mu_se_var, 0.0),
        sigma_mean: moment_check(sg_mean, pop.sigma_p, sg_se_mean, sg_mean_allowance),
        sigma_var: moment_check(sg_var, pred_sg_var, sg_se_var, sg_var_allowance),
        m,
        trials,
    })
}

/// Per-sample loss model entering the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// GLM with softplus partition function (ReLU surrogate):
    /// `l = softplus(h) - y h`, `A'' = sigmoid(h)(1 - sigmoid(h))`.
    SoftplusGlm,
    /// Halved squared error: `l = (h - y)^2 / 2`, `A'' = 1`.
    GaussianHalved,
}

/// Which decomposition convention is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Convention {
    pub loss: LossKind,
    /// Whether the batch mean enters the normalization (full transform) or
    /// only the batch standard deviation does.
    pub include_mean: bool,
}

impl Convention {
    pub fn label(&self) -> String {
        let loss = match self.loss {
            LossKind::SoftplusGlm => "softplus_glm",
            LossKind::GaussianHalved => "gaussian_halved_mse",
        };
        let mean = if self.include_mean {
            "with_mean"
        } else {
            "no_mean"
        };
        format!("{loss}+{mean}")
    }
}

/// The adaptive decay factor and its two components.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ZetaBreakdown {
    pub zeta: f64,
    /// `(rho+2)/(8M) I(gamma)` -- the batch-deviation part.
    pub fisher_term: f64,
    /// `1/(2M) mean(sigma(h_bar))` -- the batch-mean part (0 when the mean
    /// is excluded from the transform).
    pub sigmoid_term: f64,
    /// The Fisher estimator `I(gamma)` itself.
    pub fisher_information: f64,
    /// Mean sigmoid of the PN pre-activations (the literal second-term
    /// factor).
    pub mean_d2a_sigmoid: f64,
    /// Mean of the exact softplus second derivative `sigmoid (1 - sigmoid)`,
    /// exposed for comparison (equals 1 for the Gaussian loss).
    pub mean_d2a_exact: f64,
    pub rho: f64,
}

fn d2a(loss: LossKind, h_bar: f64) -> f64 {
    match loss {
        LossKind::SoftplusGlm => {
            let s = sigmoid(h_bar);
            s * (1.0 - s)
        }
        LossKind::GaussianHalved => 1.0,
    }
}

fn per_sample_loss(loss: LossKind, h_hat: f64, y: f64) -> f64 {
    match loss {
        LossKind::SoftplusGlm => softplus(h_hat) - y * h_hat,
        LossKind::GaussianHalved => 0.5 * (h_hat - y) * (h_hat - y),
    }
}

/// The adaptive decay factor for a dataset of inputs and a student.
///
/// `h_j = w^T x_j` is computed from the row-major inputs; the population
/// statistics come from the same data. The Fisher term uses the Hessian
/// estimator `I(gamma) = mean(A''(h_bar_j) r_j^2)` with `r_j` the
/// standardized pre-activation actually multiplied by the batch-statistic
/// noise.
pub fn zeta_of_h(
    x: &[f64],
    n: usize,
    w: &[f64],
    gamma: f64,
    beta_shift: f64,
    m: usize,
    conv: Convention,
) -> Result<ZetaBreakdown> {
    if n == 0 || x.len() % n != 0 {
        return Err(Error::domain("inputs must be a P x N row-major matrix"));
    }
    let p = x.len() / n;
    let h: Vec<f64> = (0..p)
        .map(|j| x[j * n..(j + 1) * n].iter().zip(w).map(|(a, b)| a * b).sum())
        .collect();
    zeta_of_h_values(&h, gamma, beta_shift, m, conv)
}

/// Same as [`zeta_of_h`] but over precomputed pre-activations.
pub fn zeta_of_h_values(
    h: &[f64],
    gamma: f64,
    beta_shift: f64,
    m: usize,
    conv: Convention,
) -> Result<ZetaBreakdown> {
    if m < 2 {
        return Err(Error::domain("M >= 2 required"));
    }
    let pop = estimate_population(h)?;
    let p = h.len() as f64;
    let mf = m as f64;
    let mu_used = if conv.include_mean { pop.mu_p } else { 0.0 };
    let mut fisher = 0.0;
    let mut mean_sig = 0.0;
    let mut mean_d2a = 0.0;
    for &hj in h {
        let r = (hj - mu_used) / pop.sigma_p;
        let h_bar = gamma * r + beta_shift;
        fisher += d2a(conv.loss, h_bar) * r * r;
        mean_sig += sigmoid(h_bar);
        mean_d2a += d2a(conv.loss, h_bar);
    }
    fisher /= p;
    mean_sig /= p;
    mean_d2a /= p;
    let fisher_term = (pop.rho + 2.0) / (8.0 * mf) * fisher;
    let sigmoid_term = if conv.include_mean {
        match conv.loss {
            LossKind::SoftplusGlm => mean_sig / (2.0 * mf),
            LossKind::GaussianHalved => 1.0 / (2.0 * mf),
        }
    } else {
        0.0
    };
    Ok(ZetaBreakdown {
        zeta: fisher_term + sigmoid_term,
        fisher_term,
        sigmoid_term,
        fisher_information: fisher,
        mean_d2a_sigmoid: mean_sig,
        mean_d2a_exact: mean_d2a,
        rho: pop.rho,
    })
}

/// Exact decay factor for the linear (halved-MSE) case with the batch mean
/// included, from the chi-square moments of the biased batch SD:
///
/// `zeta(M) = [ (1 + E(u^2) - 2 E(u)) + E(u^2)/M ] / 2`, `u = sigma_P/sigma_B`,
///
/// with `E(u) = sqrt(M/2) Gamma((M-2)/2)/Gamma((M-1)/2)` and
/// `E(u^2) = M/(M-3)` evaluated via log-gamma. `M zeta(M) -> 3/4` from
/// above as M grows.
pub fn linear_zeta_exact(m: usize) -> Result<f64> {
    if m < 5 {
        return Err(Error::domain(format!(
            "gamma-function arguments need M >= 5, got {m}"
        )));
    }
    let mf = m as f64;
    let e_u = (mf / 2.0).sqrt() * (ln_gamma((mf - 2.0) / 2.0) - ln_gamma((mf - 1.0) / 2.0)).exp();
    let e_u2 = mf / (mf - 3.0);
    Ok(0.5 * ((1.0 + e_u2 - 2.0 * e_u) + e_u2 / mf))
}

/// Audit record of one decomposition check.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DecompositionReport {
    pub e_bn_mc: f64,
    pub mc_stderr: f64,
    pub pn_loss: f64,
    pub zeta: f64,
    pub fisher_term: f64,
    pub sigmoid_term: f64,
    pub gamma: f64,
    /// `e_bn_mc - (pn_loss + zeta gamma^2)`.
    pub residual: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub convention: String,
    /// Residual when the batch-mean term uses the exact softplus second
    /// derivative instead of the literal mean sigmoid.
    pub residual_exact_d2a: f64,
    pub n_mc: usize,
}

/// Estimate the expected BN loss over random batch draws and compare it with
/// the population-normalized loss plus gamma decay.
///
/// Each draw samples M pre-activations with replacement, recomputes
/// `(mu_B, sigma_B)`, and evaluates the dataset-average loss under the
/// noisy transform. A large residual is a finding, not a failure.
pub fn decompose_check(
    x: &[f64],
    y: &[f64],
    n: usize,
    student: &StudentState,
    m: usize,
    n_mc: usize,
    seed: u64,
    conv: Convention,
) -> Result<DecompositionReport> {
    if n == 0 || x.len() % n != 0 || x.len() / n != y.len() {
        return Err(Error::domain("inputs and labels must agree on P and N"));
    }
    let p = y.len();
    let gamma = student.gamma;
    let beta = student.beta_shift;
    let h: Vec<f64> = (0..p)
        .map(|j| {
            x[j * n..(j + 1) * n]
                .iter()
                .zip(&student.w)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    let pop = estimate_population(&h)?;
    let mu_used = if conv.include_mean { pop.mu_p } else { 0.0 };

    let pn_values: Vec<f64> = h
        .iter()
        .zip(y)
        .map(|(&hj, &yj)| {
            per_sample_loss(conv.loss, gamma * (hj - mu_used) / pop.sigma_p + beta, yj)
        })
        .collect();
    let pn_loss = pairwise_sum(&pn_values) / p as f64;

    let zb = zeta_of_h_values(&h, gamma, beta, m, conv)?;

    // Sufficient statistics make the Gaussian-loss draw O(1): the transform
    // is affine in h, so the dataset-average loss is a quadratic form.
    let (m_hh, m_h, m_hy, m_y, m_yy) = {
        let hh: Vec<f64> = h.iter().map(|v| v * v).collect();
        let hy: Vec<f64> = h.iter().zip(y).map(|(a, b)| a * b).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        (
            pairwise_sum(&hh) / p as f64,
            pairwise_sum(&h) / p as f64,
            pairwise_sum(&hy) / p as f64,
            pairwise_sum(y) / p as f64,
            pairwise_sum(&yy) / p as f64,
        )
    };

    let mut seed_rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_seeds: Vec<u64> = (0..n_mc).map(|_| seed_rng.gen()).collect();
    let draw_values: Vec<f64> = draw_seeds
        .par_iter()
        .map(|&ds| {
            let mut rng = ChaCha8Rng::seed_from_u64(ds);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..m {
                let v = h[rng.gen_range(0..p)];
                sum += v;
                sum_sq += v * v;
            }
            let mu_b = sum / m as f64;
            let var_b = (sum_sq / m as f64 - mu_b * mu_b).max(0.0);
            let sigma_b = var_b.sqrt().max(1e-12);
            let mu_b_used = if conv.include_mean { mu_b } else { 0.0 };
            let a = gamma / sigma_b;
            let b = -gamma * mu_b_used / sigma_b + beta;
            match conv.loss {
                LossKind::GaussianHalved => {
                    0.5 * (a * a * m_hh + 2.0 * a * b * m_h - 2.0 * a * m_hy + b * b
                        - 2.0 * b * m_y
                        + m_yy)
                }
                LossKind::SoftplusGlm => {
                    let vals: Vec<f64> = h
                        .iter()
                        .zip(y)
                        .map(|(&hj, &yj)| per_sample_loss(conv.loss, a * hj + b, yj))
                        .collect();
                    pairwise_sum(&vals) / p as f64
                }
            }
        })
        .collect();

    let e_bn_mc = pairwise_sum(&draw_values) / n_mc as f64;
    let centered: Vec<f64> = draw_values
        .iter()
        .map(|v| (v - e_bn_mc) * (v - e_bn_mc))
        .collect();
    let mc_stderr = (pairwise_sum(&centered) / n_mc as f64 / n_mc as f64).sqrt();

    let residual = e_bn_mc - (pn_loss + zb.zeta * gamma * gamma);
    let zeta_exact_d2a = zb.fisher_term
        + if conv.include_mean {
            match conv.loss {
                LossKind::SoftplusGlm => zb.mean_d2a_exact / (2.0 * m as f64),
                LossKind::GaussianHalved => 1.0 / (2.0 * m as f64),
            }
        } else {
            0.0
        };
    let residual_exact_d2a = e_bn_mc - (pn_loss + zeta_exact_d2a * gamma * gamma);

    Ok(DecompositionReport {
        e_bn_mc,
        mc_stderr,
        pn_loss,
        zeta: zb.zeta,
        fisher_term: zb.fisher_term,
        sigmoid_term: zb.sigmoid_term,
        gamma,
        residual,
        m,
        n,
        convention: conv.label(),
        residual_exact_d2a,
        n_mc,
    })
}

/// Self-contained decomposition audit on synthetic data: Gaussian inputs, a
/// Gaussian student direction, and labels at the GLM mean of the
/// population-normalized pre-activation (so the first-order remainder
/// vanishes pointwise and the measured gap is the second-order content).
#[allow(clippy::too_many_arguments)]
pub fn synthetic_audit(
    n: usize,
    p: usize,
    gamma: f64,
    beta_shift: f64,
    m: usize,
    n_mc: usize,
    seed: u64,
    conv: Convention,
) -> Result<DecompositionReport> {
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (n as f64).sqrt();
    let x: Vec<f64> = (0..n * p)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    let w: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let h: Vec<f64> = (0..p)
        .map(|j| x[j * n..(j + 1) * n].iter().zip(&w).map(|(a, b)| a * b).sum())
        .collect();
    let pop = estimate_population(&h)?;
    let mu_used = if conv.include_mean { pop.mu_p } else { 0.0 };
    let y: Vec<f64> = h
        .iter()
        .map(|hj| {
            let h_bar = gamma * (hj - mu_used) / pop.sigma_p + beta_shift;
            match conv.loss {
                LossKind::GaussianHalved => h_bar,
                LossKind::SoftplusGlm => sigmoid(h_bar),
            }
        })
        .collect();
    let student = crate::sgd::StudentState {
        w,
        gamma,
        beta_shift,
    };
    decompose_check(&x, &y, n, &student, m, n_mc, seed.wrapping_add(1), conv)
}
