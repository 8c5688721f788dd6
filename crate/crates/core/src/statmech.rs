//! Closed-form generalization-error curves and the replica free energy.
//!
//! Conventions: `alpha = P/N` is the effective load, `S` the variance of the
//! static noise on the linear teacher's output. Test error is always against
//! the noiseless teacher.

use crate::error::{Error, Result};
use crate::kernels::{gen_integral, ActivationKind, GenMode};
use crate::optim::golden_min;
use crate::MethodKind;

/// One point of a generalization curve, as emitted to CSV.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GenCurvePoint {
    pub alpha: f64,
    pub eps: f64,
    pub method: MethodKind,
    pub s: f64,
    pub zeta: f64,
}

fn check_alpha_nonneg(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::domain(format!(
            "alpha must be non-negative, got {alpha}"
        )));
    }
    Ok(())
}

/// Vanilla-SGD linear student: `1 - alpha + alpha S/(1 - alpha)` below the
/// interpolation threshold, `S/(alpha - 1)` above it. Diverges at
/// `alpha = 1`.
pub fn eps_id_ord(alpha: f64, s: f64) -> Result<f64> {
    check_alpha_nonneg(alpha)?;
    if alpha == 1.0 {
        return Err(Error::Pole { alpha });
    }
    Ok(if alpha < 1.0 {
        1.0 - alpha + alpha * s / (1.0 - alpha)
    } else {
        s / (alpha - 1.0)
    })
}

/// Vanilla-SGD ReLU student: `1 - alpha/4 + alpha S / (2 (2 - alpha))` for
/// `0 <= alpha < 2`. Diverges at `alpha = 2`.
pub fn eps_relu_ord(alpha: f64, s: f64) -> Result<f64> {
    check_alpha_nonneg(alpha)?;
    if alpha == 2.0 {
        return Err(Error::Pole { alpha });
    }
    if alpha > 2.0 {
        return Err(Error::domain(format!(
            "the ReLU curve is defined for alpha < 2, got {alpha}"
        )));
    }
    Ok(1.0 - alpha / 4.0 + alpha * s / (2.0 * (2.0 - alpha)))
}

/// The ridge response function
/// `G = [1 - alpha - zeta + sqrt((zeta + (1+sqrt(alpha))^2)(zeta + (1-sqrt(alpha))^2))] / (2 zeta)`
/// and the pieces of its zeta-derivatives used by [`eps_id_wn`].
///
/// Writing `W = sqrt(u v)` with `u = zeta + (1+sqrt(alpha))^2` and
/// `v = zeta + (1-sqrt(alpha))^2`, one has `W' = (zeta + 1 + alpha)/W`,
/// `d(zeta G)/d zeta = (W' - 1)/2` and
/// `zeta^2 dG/d zeta = [zeta(W' - 1) - (1 - alpha - zeta + W)]/2`.
fn ridge_w(alpha: f64, zeta: f64) -> (f64, f64) {
    let sq = alpha.sqrt();
    let u = zeta + (1.0 + sq) * (1.0 + sq);
    let v = zeta + (1.0 - sq) * (1.0 - sq);
    let w = (u * v).sqrt();
    let wp = (zeta + 1.0 + alpha) / w;
    (w, wp)
}

/// WN + gamma-decay linear student:
/// `eps = S d(zeta G)/d zeta - zeta^2 dG/d zeta`, with the noise magnitude
/// `delta^2` read as the teacher noise variance `S`. Simplifies to
/// `eps = [S (W' - 1) - zeta W' + 1 - alpha + W] / 2`.
pub fn eps_id_wn(alpha: f64, zeta: f64, s: f64) -> Result<f64> {
    check_alpha_nonneg(alpha)?;
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(Error::domain(format!("zeta must be positive, got {zeta}")));
    }
    let (w, wp) = ridge_w(alpha, zeta);
    Ok(0.5 * (s * (wp - 1.0) - zeta * wp + 1.0 - alpha + w))
}

/// Finite-difference evaluation of the same curve, retained as a runtime
/// cross-check of the analytic derivatives.
pub fn eps_id_wn_fd(alpha: f64, zeta: f64, s: f64) -> Result<f64> {
    check_alpha_nonneg(alpha)?;
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(Error::domain(format!("zeta must be positive, got {zeta}")));
    }
    let g = |z: f64| {
        let (w, _) = ridge_w(alpha, z);
        (1.0 - alpha - z + w) / (2.0 * z)
    };
    let h = 1e-6 * zeta;
    let dg = (g(zeta + h) - g(zeta - h)) / (2.0 * h);
    let dzg = ((zeta + h) * g(zeta + h) - (zeta - h) * g(zeta - h)) / (2.0 * h);
    Ok(s * dzg - zeta * zeta * dg)
}

/// Parameters of the replica free energy (ReLU student, noisy linear
/// teacher). `beta_inv_temp` is the inverse temperature; `q` is the prior
/// length scale of gamma.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct FreeEnergyParams {
    pub gamma: f64,
    pub r: f64,
    pub q: f64,
    pub alpha: f64,
    pub s: f64,
    pub beta_inv_temp: f64,
}

impl FreeEnergyParams {
    fn validate(&self) -> Result<()> {
        if self.q * self.q <= self.gamma * self.gamma {
            return Err(Error::domain(format!(
                "free energy needs q^2 > gamma^2 (q = {}, gamma = {})",
                self.q, self.gamma
            )));
        }
        if !(self.beta_inv_temp.is_finite() && self.beta_inv_temp > 0.0) {
            return Err(Error::domain("inverse temperature must be positive"));
        }
        check_alpha_nonneg(self.alpha)
    }
}

/// The replica expression for `-beta f`, evaluated literally:
///
/// ```text
/// -beta f = (gamma^2 - gamma^2 R^2) / (2 (q^2 - gamma^2))
///         + ln(q^2 - gamma^2) / 2
///         - (alpha/4) ln(1 + beta (q^2 - gamma^2))
///         - alpha beta (1 - 2 gamma R + gamma^2 + S) / (4 (1 + beta (q^2 - gamma^2)))
///         - alpha beta / 4 - alpha beta S / 4
/// ```
pub fn free_energy(p: &FreeEnergyParams) -> Result<f64> {
    p.validate()?;
    let d = p.q * p.q - p.gamma * p.gamma;
    let beta = p.beta_inv_temp;
    let x = 1.0 - 2.0 * p.gamma * p.r + p.gamma * p.gamma + p.s;
    let e = 1.0 + beta * d;
    Ok(p.gamma * p.gamma * (1.0 - p.r * p.r) / (2.0 * d) + 0.5 * d.ln()
        - 0.25 * p.alpha * e.ln()
        - 0.25 * p.alpha * beta * x / e
        - 0.25 * p.alpha * beta * (1.0 + p.s))
}

/// The `(gamma, R)`-dependent part of `-beta f` in the `beta -> infinity`
/// (`a = 1`) limit, with the constant `-alpha beta (1 + S)/4` and
/// `-(alpha/4) ln beta` terms dropped:
///
/// `Phi(gamma, R) = gamma^2 (1 - R^2) / (2D) + ((2 - alpha)/4) ln D - alpha X / (4D)`
///
/// with `D = q^2 - gamma^2` and `X = 1 - 2 gamma R + gamma^2 + S`. The
/// equilibrium maximizes `Phi` (equivalently minimizes `f`).
pub fn neg_beta_f_limit(gamma: f64, r: f64, q: f64, alpha: f64, s: f64) -> f64 {
    let d = q * q - gamma * gamma;
    let x = 1.0 - 2.0 * gamma * r + gamma * gamma + s;
    gamma * gamma * (1.0 - r * r) / (2.0 * d) + 0.25 * (2.0 - alpha) * d.ln() - 0.25 * alpha * x / d
}

/// Numerical minimizer of the free energy over `(gamma, R)` at fixed `q` in
/// the zero-temperature limit.
///
/// The physical equilibrium is a saddle of the joint objective: a maximum
/// along R but a minimum of the R-maximized profile along gamma (the
/// standard replica extremization structure). The search is therefore
/// nested: an inner golden-section maximization over R (the objective is
/// strictly concave in R), and an outer bounded minimization of the profile
/// over gamma, bracketed by a grid scan that stays clear of the divergent
/// `gamma -> q` boundary.
pub fn minimize_free_energy(alpha: f64, s: f64, q: f64) -> Result<(f64, f64)> {
    check_alpha_nonneg(alpha)?;
    if q <= 0.0 {
        return Err(Error::domain("q must be positive"));
    }
    if alpha == 0.0 {
        // No data: the posterior is the prior, the landscape is degenerate
        // in R, and the equilibrium scale collapses to the alpha -> 0 limit.
        return Ok((0.0, 0.0));
    }
    let best_r = |gamma: f64| -> (f64, f64) {
        let (r, neg) = golden_min(&|r| -neg_beta_f_limit(gamma, r, q, alpha, s), 0.0, 1.0, 90);
        (r, -neg)
    };
    let profile = |gamma: f64| best_r(gamma).1;

    // Bracket an interior local minimum of the profile, excluding the last
    // grid cells where the 1/(q^2 - gamma^2) divergence takes over.
    let ng = 160usize;
    let g_lo = 1e-6;
    let g_hi = q - 1e-6;
    let dg = (g_hi - g_lo) / (ng - 1) as f64;
    let values: Vec<f64> = (0..ng).map(|i| profile(g_lo + i as f64 * dg)).collect();
    let mut bracket = None;
    for i in 1..ng - 2 {
        if values[i] <= values[i - 1] && values[i] <= values[i + 1] {
            if bracket
                .map(|(_, v): (usize, f64)| values[i] < v)
                .unwrap_or(true)
            {
                bracket = Some((i, values[i]));
            }
        }
    }
    let (bi, _) =
        bracket.ok_or_else(|| Error::domain("no interior free-energy equilibrium found"))?;
    let lo = g_lo + (bi - 1) as f64 * dg;
    let hi = g_lo + (bi + 1) as f64 * dg;
    let (gamma, _) = golden_min(&profile, lo, hi, 100);
    let (r, _) = best_r(gamma);
    Ok((gamma, r))
}

/// Closed-form equilibrium order parameters of the free energy at `a = 1`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Equilibrium {
    pub gamma_sq: f64,
    pub gamma_r: f64,
    pub eps: f64,
}

/// `gamma^2 = alpha/2 + alpha S/(2 - alpha)`, `gamma R = alpha/2`, and the
/// resulting generalization error `1 - alpha/4 + alpha S/(2 (2 - alpha))`.
pub fn equilibrium(alpha: f64, s: f64) -> Result<Equilibrium> {
    check_alpha_nonneg(alpha)?;
    if alpha == 2.0 {
        return Err(Error::Pole { alpha });
    }
    if alpha > 2.0 {
        return Err(Error::domain(format!(
            "equilibrium is defined for alpha < 2, got {alpha}"
        )));
    }
    let gamma_sq = alpha / 2.0 + alpha * s / (2.0 - alpha);
    let gamma_r = alpha / 2.0;
    let eps = if alpha == 0.0 {
        1.0
    } else {
        let gamma = gamma_sq.sqrt();
        gen_integral(
            gamma,
            gamma_r / gamma,
            ActivationKind::Identity,
            ActivationKind::Relu,
            GenMode::Closed,
        )?
    };
    Ok(Equilibrium {
        gamma_sq,
        gamma_r,
        eps,
    })
}
