//! Gaussian expectations `I1`, `I2`, `I3` over the joint law of the student
//! and teacher pre-activations, plus the generalization integral.
//!
//! With `s` the (normalized) student pre-activation and `t` the teacher
//! pre-activation, `(s, t)` is bivariate Gaussian with covariance
//! `[[Q^2, QR], [QR, 1]]`. Writing `d = g'(s) (g(t) - g(s))` for the
//! per-sample gradient factor,
//!
//! - `I1 = E[d s]`
//! - `I2 = E[d^2 x^T x]`, reduced here via `x^T x -> 1`
//! - `I3 = E[d t]`
//!
//! Closed forms are provided for ReLU and identity activations, together
//! with the partial derivatives the learning-rate analysis needs, and with
//! two independent evaluation routes (deterministic quadrature, Monte Carlo)
//! used as oracles.

use crate::error::{Error, Result};
use crate::quadrature::{GaussianRule, HermiteRule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

/// Activation function of the single-unit student/teacher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Identity,
    Relu,
}

impl ActivationKind {
    /// g(x). The ReLU derivative convention at 0 is g'(0) = 0.
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Identity => x,
            ActivationKind::Relu => x.max(0.0),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActivationKind::Identity => 1.0,
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Order parameters of the student: normalized length `Q` (the scale gamma),
/// teacher overlap `R`, raw weight length `L`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OrderState {
    pub q: f64,
    pub r: f64,
    pub l: f64,
}

impl OrderState {
    pub fn new(q: f64, r: f64, l: f64) -> Result<Self> {
        if !(q.is_finite() && r.is_finite() && l.is_finite()) {
            return Err(Error::domain("order state must be finite"));
        }
        if q <= 0.0 {
            return Err(Error::domain(format!("Q must be positive, got {q}")));
        }
        if l <= 0.0 {
            return Err(Error::domain(format!("L must be positive, got {l}")));
        }
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::domain(format!("R must lie in [-1, 1], got {r}")));
        }
        Ok(OrderState { q, r, l })
    }
}

/// The three Gaussian expectations.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussIntegrals {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

fn check_r(r: f64) -> Result<f64> {
    if !r.is_finite() || r.abs() > 1.0 {
        return Err(Error::domain(format!("R must lie in [-1, 1], got {r}")));
    }
    Ok(r)
}

/// Closed forms for the ReLU activation.
///
/// The bracket `pi + 2R sqrt(1-R^2) + 2 asin R` shared by `i2` and `i3` is
/// the one consistent with the quadrature oracle and with
/// `dI2/dR = -Q` at `R = 1`.
pub mod relu {
    use super::*;

    fn bracket_a(r: f64) -> f64 {
        PI * r + 2.0 * (1.0 - r * r).max(0.0).sqrt() + 2.0 * r * r.asin()
    }

    fn bracket_b(r: f64) -> f64 {
        PI + 2.0 * r * (1.0 - r * r).max(0.0).sqrt() + 2.0 * r.asin()
    }

    pub fn i1(q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok(q * bracket_a(r) / (4.0 * PI) - q * q / 2.0)
    }

    pub fn i2(q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok(q * q / 2.0 + bracket_b(r) / (4.0 * PI) - q * bracket_a(r) / (2.0 * PI))
    }

    pub fn i3(q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok(bracket_b(r) / (4.0 * PI) - q * r / 2.0)
    }

    // Partial derivatives. The raw differentiation of the brackets produces
    // +-2r/sqrt(1-r^2) pairs that cancel exactly; the simplified forms below
    // stay finite at r = +-1.

    pub fn di1_dq(_q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok(bracket_a(r) / (4.0 * PI) - _q)
    }

    pub fn di1_dr(q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok(q * (PI + 2.0 * r.asin()) / (4.0 * PI))
    }

    pub fn di2_dr(q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok((1.0 - r * r).max(0.0).sqrt() / PI - q * (PI + 2.0 * r.asin()) / (2.0 * PI))
    }

    pub fn di3_dr(q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok((1.0 - r * r).max(0.0).sqrt() / PI - q / 2.0)
    }
}

/// Closed forms for the identity activation, where the integrands are
/// polynomials: `d = t - s` gives
/// `I1 = QR - Q^2`, `I2 = 1 + Q^2 - 2QR`, `I3 = 1 - QR`.
pub mod identity {
    use super::*;

    pub fn i1(q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok(q * r - q * q)
    }

    pub fn i2(q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok(1.0 + q * q - 2.0 * q * r)
    }

    pub fn i3(q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok(1.0 - q * r)
    }

    pub fn di1_dq(q: f64, r: f64) -> Result<f64> {
        let r = check_r(r)?;
        Ok(r - 2.0 * q)
    }

    pub fn di1_dr(q: f64, r: f64) -> Result<f64> {
        check_r(r)?;
        Ok(q)
    }

    pub fn di2_dr(q: f64, r: f64) -> Result<f64> {
        check_r(r)?;
        Ok(-2.0 * q)
    }

    pub fn di3_dr(q: f64, r: f64) -> Result<f64> {
        check_r(r)?;
        Ok(-q)
    }
}

/// Closed I1 for the ReLU case (spec surface over [`OrderState`]).
pub fn closed_i1(state: &OrderState) -> Result<f64> {
    relu::i1(state.q, state.r)
}

pub fn closed_i2(state: &OrderState) -> Result<f64> {
    relu::i2(state.q, state.r)
}

pub fn closed_i3(state: &OrderState) -> Result<f64> {
    relu::i3(state.q, state.r)
}

/// Closed-form (I1, I2, I3) for either activation.
pub fn closed_integrals(act: ActivationKind, q: f64, r: f64) -> Result<GaussIntegrals> {
    Ok(match act {
        ActivationKind::Relu => GaussIntegrals {
            i1: relu::i1(q, r)?,
            i2: relu::i2(q, r)?,
            i3: relu::i3(q, r)?,
        },
        ActivationKind::Identity => GaussIntegrals {
            i1: identity::i1(q, r)?,
            i2: identity::i2(q, r)?,
            i3: identity::i3(q, r)?,
        },
    })
}

/// Deterministic quadrature oracle for (I1, I2, I3).
///
/// The joint law is factored as `s = Q z1`, `t = R z1 + sqrt(1-R^2) z2` with
/// independent standard normals. For ReLU the inner `z2` integral is split
/// at the activation kink `t = 0` and the outer integral runs over the
/// half-line `s > 0` where the gradient factor is supported; piecewise
/// Gauss-Legendre against the normal density then converges spectrally.
/// Identity integrands are polynomials and go through tensor Gauss-Hermite.
/// `R = +-1` collapses the covariance; the degenerate 1-D integral is used.
pub fn quad_integrals(state: &OrderState, act: ActivationKind) -> Result<GaussIntegrals> {
    let q = state.q;
    let r = check_r(state.r)?;
    match act {
        ActivationKind::Identity => {
            let gh = HermiteRule::new(64);
            let st = (1.0 - r * r).max(0.0).sqrt();
            let i1 = gh.expect2(|z1, z2| {
                let s = q * z1;
                let t = r * z1 + st * z2;
                (t - s) * s
            });
            let i2 = gh.expect2(|z1, z2| {
                let s = q * z1;
                let t = r * z1 + st * z2;
                (t - s) * (t - s)
            });
            let i3 = gh.expect2(|z1, z2| {
                let s = q * z1;
                let t = r * z1 + st * z2;
                (t - s) * t
            });
            Ok(GaussIntegrals { i1, i2, i3 })
        }
        ActivationKind::Relu => {
            let rule = GaussianRule::default();
            let sigma_t = (1.0 - r * r).max(0.0).sqrt();
            let degenerate = sigma_t < 1e-12;
            // Inner expectations over t | z1 as functions of the outer node.
            let inner = |z1: f64| -> (f64, f64, f64, f64) {
                let m = r * z1;
                if degenerate {
                    let g = m.max(0.0);
                    (g, g * g, g * m, m)
                } else {
                    let kink = -m / sigma_t;
                    let g1 = rule.expect_split(&[kink], &|z2| (m + sigma_t * z2).max(0.0));
                    let g2 =
                        rule.expect_split(&[kink], &|z2| (m + sigma_t * z2).max(0.0).powi(2));
                    let gt = rule.expect_split(&[kink], &|z2| {
                        let t = m + sigma_t * z2;
                        t.max(0.0) * t
                    });
                    let t_mean = rule.expect_split(&[], &|z2| m + sigma_t * z2);
                    (g1, g2, gt, t_mean)
                }
            };
            let i1 = rule.integral(0.0, 9.0, &|z1| {
                let s = q * z1;
                let (g1, _, _, _) = inner(z1);
                (g1 - s) * s
            });
            let i2 = rule.integral(0.0, 9.0, &|z1| {
                let s = q * z1;
                let (g1, g2, _, _) = inner(z1);
                g2 - 2.0 * s * g1 + s * s
            });
            let i3 = rule.integral(0.0, 9.0, &|z1| {
                let s = q * z1;
                let (_, _, gt, t_mean) = inner(z1);
                gt - s * t_mean
            });
            Ok(GaussIntegrals { i1, i2, i3 })
        }
    }
}

/// Monte Carlo estimate with per-component standard errors.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub values: GaussIntegrals,
    pub stderr: GaussIntegrals,
    pub n_samples: usize,
}

/// Monte Carlo estimates of (I1, I2, I3) with standard errors.
pub fn mc_integrals_detailed(
    state: &OrderState,
    act: ActivationKind,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 10_000 {
        return Err(Error::domain(format!(
            "Monte Carlo needs at least 10^4 samples, got {n_samples}"
        )));
    }
    let q = state.q;
    let r = check_r(state.r)?;
    let sigma_t = (1.0 - r * r).max(0.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let (mut s1, mut s2, mut s3) = (0.0f64, 0.0, 0.0);
    let (mut q1, mut q2, mut q3) = (0.0f64, 0.0, 0.0);
    for _ in 0..n_samples {
        let z1: f64 = normal.sample(&mut rng);
        let z2: f64 = normal.sample(&mut rng);
        let s = q * z1;
        let t = r * z1 + sigma_t * z2;
        let d = act.derivative(s) * (act.apply(t) - act.apply(s));
        let a1 = d * s;
        let a2 = d * d; // x^T x taken at its mean 1
        let a3 = d * t;
        s1 += a1;
        s2 += a2;
        s3 += a3;
        q1 += a1 * a1;
        q2 += a2 * a2;
        q3 += a3 * a3;
    }
    let n = n_samples as f64;
    let mean = |s: f64| s / n;
    let se = |s: f64, sq: f64| ((sq / n - (s / n) * (s / n)).max(0.0) / n).sqrt();
    Ok(McEstimate {
        values: GaussIntegrals {
            i1: mean(s1),
            i2: mean(s2),
            i3: mean(s3),
        },
        stderr: GaussIntegrals {
            i1: se(s1, q1),
            i2: se(s2, q2),
            i3: se(s3, q3),
        },
        n_samples,
    })
}

/// Monte Carlo estimates of (I1, I2, I3); `n_samples = 0` selects the
/// deterministic quadrature oracle instead.
pub fn mc_integrals(
    state: &OrderState,
    act: ActivationKind,
    n_samples: usize,
    seed: u64,
) -> Result<GaussIntegrals> {
    if n_samples == 0 {
        return quad_integrals(state, act);
    }
    Ok(mc_integrals_detailed(state, act, n_samples, seed)?.values)
}

/// Evaluation route for [`gen_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMode {
    Closed,
    Quadrature,
}

/// Generalization error of a student with scale `gamma` and overlap `r`
/// against a noiseless linear teacher:
/// `E[(h1 - g(gamma R h1 + gamma sqrt(1-R^2) h2))^2]` over independent
/// standard normals.
///
/// Closed forms: `1 + gamma^2 - 2 gamma R` (identity student) and
/// `1 + gamma^2/2 - gamma R` (ReLU student).
pub fn gen_integral(
    gamma: f64,
    r: f64,
    teacher: ActivationKind,
    student: ActivationKind,
    mode: GenMode,
) -> Result<f64> {
    if teacher != ActivationKind::Identity {
        return Err(Error::domain(
            "only the linear (identity) teacher is supported",
        ));
    }
    let r = check_r(r)?;
    match (mode, student) {
        (GenMode::Closed, ActivationKind::Identity) => Ok(1.0 + gamma * gamma - 2.0 * gamma * r),
        (GenMode::Closed, ActivationKind::Relu) => Ok(1.0 + gamma * gamma / 2.0 - gamma * r),
        (GenMode::Quadrature, ActivationKind::Identity) => {
            let gh = HermiteRule::new(64);
            let st = (1.0 - r * r).max(0.0).sqrt();
            Ok(gh.expect2(|h1, h2| {
                let u = gamma * (r * h1 + st * h2);
                (h1 - u) * (h1 - u)
            }))
        }
        (GenMode::Quadrature, ActivationKind::Relu) => {
            // Rotate so the student pre-activation u = R h1 + sqrt(1-R^2) h2
            // is an axis: h1 = R u - sqrt(1-R^2) v with (u, v) independent.
            // The kink then sits at u = 0 and the v-expectation is a
            // polynomial handled exactly by Gauss-Hermite.
            let rule = GaussianRule::default();
            let gh = HermiteRule::new(16);
            let st = (1.0 - r * r).max(0.0).sqrt();
            Ok(rule.integral_split(-9.0, 9.0, &[0.0], &|u| {
                let gu = (gamma * u).max(0.0);
                gh.expect(|v| {
                    let h1 = r * u - st * v;
                    (h1 - gu) * (h1 - gu)
                })
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state(q: f64, r: f64) -> OrderState {
        OrderState { q, r, l: 1.0 }
    }

    #[test]
    fn relu_i1_examples() {
        assert_abs_diff_eq!(relu::i1(1.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            relu::i1(1.0, 0.0).unwrap(),
            1.0 / (2.0 * PI) - 0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(relu::i1(0.5, 1.0).unwrap(), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn relu_i2_examples() {
        assert_abs_diff_eq!(relu::i2(1.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            relu::i2(1.0, 0.0).unwrap(),
            0.75 - 1.0 / PI,
            epsilon = 1e-15
        );
        // dI2/dR at (Q0, 1) equals -Q0
        for q0 in [0.5, 0.8, 1.0] {
            assert_abs_diff_eq!(relu::di2_dr(q0, 1.0).unwrap(), -q0, epsilon = 1e-14);
        }
    }

    #[test]
    fn relu_i3_examples() {
        assert_abs_diff_eq!(relu::i3(1.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(relu::i3(0.0, 0.0).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn fixed_point_identities() {
        // Q0 = 1/(2 zeta + 1) satisfies I1(Q0,1) = zeta Q0^2 and
        // Q0 I3(Q0,1) = I1(Q0,1).
        for zeta in [0.0, 0.1, 0.5] {
            let q0 = 1.0 / (2.0 * zeta + 1.0);
            let i1 = relu::i1(q0, 1.0).unwrap();
            let i3 = relu::i3(q0, 1.0).unwrap();
            assert_abs_diff_eq!(i1, zeta * q0 * q0, epsilon = 1e-12);
            assert_abs_diff_eq!(q0 * i3, i1, epsilon = 1e-12);
        }
        // zeta = 0.5: both sides are 0.125
        let q0: f64 = 0.5;
        assert_abs_diff_eq!(q0 * relu::i3(q0, 1.0).unwrap(), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn domain_error_outside_r_range() {
        assert!(relu::i1(1.0, 1.5).is_err());
        assert!(relu::i2(1.0, -1.0001).is_err());
        assert!(identity::i3(1.0, f64::NAN).is_err());
        assert!(OrderState::new(0.0, 0.5, 1.0).is_err());
        assert!(OrderState::new(1.0, 0.5, -1.0).is_err());
    }

    #[test]
    fn quadrature_matches_relu_closed_forms() {
        // coarse version of the acceptance grid
        for &q in &[0.25, 0.5, 1.0, 2.0] {
            for &r in &[-0.99, -0.6, 0.0, 0.37, 0.9, 1.0] {
                let closed = closed_integrals(ActivationKind::Relu, q, r).unwrap();
                let quad = quad_integrals(&state(q, r), ActivationKind::Relu).unwrap();
                assert_abs_diff_eq!(closed.i1, quad.i1, epsilon = 1e-8);
                assert_abs_diff_eq!(closed.i2, quad.i2, epsilon = 1e-8);
                assert_abs_diff_eq!(closed.i3, quad.i3, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn quadrature_matches_identity_closed_forms() {
        // Includes the (Q=1, R=0) point: I1 = -1, I2 = 2, I3 = 1.
        let quad = quad_integrals(&state(1.0, 0.0), ActivationKind::Identity).unwrap();
        assert_abs_diff_eq!(quad.i1, -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(quad.i2, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(quad.i3, 1.0, epsilon = 1e-10);
        for &q in &[0.25, 1.0, 2.0] {
            for &r in &[-0.8, 0.0, 0.5, 1.0] {
                let closed = closed_integrals(ActivationKind::Identity, q, r).unwrap();
                let quad = quad_integrals(&state(q, r), ActivationKind::Identity).unwrap();
                assert_abs_diff_eq!(closed.i1, quad.i1, epsilon = 1e-10);
                assert_abs_diff_eq!(closed.i2, quad.i2, epsilon = 1e-10);
                assert_abs_diff_eq!(closed.i3, quad.i3, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        let h = 1e-6;
        for &q in &[0.25, 0.5, 1.0, 2.0] {
            for &r in &[-0.9, -0.3, 0.0, 0.45, 0.9] {
                let fd_dq = (relu::i1(q + h, r).unwrap() - relu::i1(q - h, r).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(relu::di1_dq(q, r).unwrap(), fd_dq, epsilon = 1e-6);
                let fd1 = (relu::i1(q, r + h).unwrap() - relu::i1(q, r - h).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(relu::di1_dr(q, r).unwrap(), fd1, epsilon = 1e-6);
                let fd2 = (relu::i2(q, r + h).unwrap() - relu::i2(q, r - h).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(relu::di2_dr(q, r).unwrap(), fd2, epsilon = 1e-6);
                let fd3 = (relu::i3(q, r + h).unwrap() - relu::i3(q, r - h).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(relu::di3_dr(q, r).unwrap(), fd3, epsilon = 1e-6);

                let fi_dq =
                    (identity::i1(q + h, r).unwrap() - identity::i1(q - h, r).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(identity::di1_dq(q, r).unwrap(), fi_dq, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn mc_agrees_with_closed_forms_within_four_stderr() {
        let st = state(1.0, 0.5);
        let est = mc_integrals_detailed(&st, ActivationKind::Relu, 1_000_000, 7).unwrap();
        let closed = closed_integrals(ActivationKind::Relu, 1.0, 0.5).unwrap();
        assert!((est.values.i1 - closed.i1).abs() <= 4.0 * est.stderr.i1);
        assert!((est.values.i2 - closed.i2).abs() <= 4.0 * est.stderr.i2);
        assert!((est.values.i3 - closed.i3).abs() <= 4.0 * est.stderr.i3);
    }

    #[test]
    fn mc_zero_residual_at_perfect_alignment() {
        // (Q=1, R=1): I2 is an expectation of a quantity that is identically
        // zero, so the estimate is 0 with 0 standard error.
        let est = mc_integrals_detailed(&state(1.0, 1.0), ActivationKind::Relu, 1_000_000, 3)
            .unwrap();
        assert!(est.values.i2.abs() <= 3.0 * est.stderr.i2 + 1e-12);
    }

    #[test]
    fn mc_rejects_small_samples_and_dispatches_quadrature() {
        assert!(mc_integrals(&state(1.0, 0.2), ActivationKind::Relu, 100, 1).is_err());
        let q = mc_integrals(&state(1.0, 0.2), ActivationKind::Relu, 0, 1).unwrap();
        let closed = closed_integrals(ActivationKind::Relu, 1.0, 0.2).unwrap();
        assert_abs_diff_eq!(q.i1, closed.i1, epsilon = 1e-8);
    }

    #[test]
    fn gen_integral_examples() {
        let id = ActivationKind::Identity;
        let relu = ActivationKind::Relu;
        assert_abs_diff_eq!(
            gen_integral(1.0, 1.0, id, id, GenMode::Closed).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            gen_integral(1.0, 1.0, id, relu, GenMode::Closed).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            gen_integral(0.0, 0.3, id, id, GenMode::Closed).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(gen_integral(1.0, 0.5, relu, relu, GenMode::Closed).is_err());
    }

    #[test]
    fn gen_integral_closed_matches_quadrature() {
        for &gamma in &[0.25, 0.5, 1.0, 2.0] {
            for &r in &[-0.99, -0.5, 0.0, 0.5, 0.9, 1.0] {
                for &student in &[ActivationKind::Identity, ActivationKind::Relu] {
                    let c = gen_integral(gamma, r, ActivationKind::Identity, student, GenMode::Closed)
                        .unwrap();
                    let q = gen_integral(
                        gamma,
                        r,
                        ActivationKind::Identity,
                        student,
                        GenMode::Quadrature,
                    )
                    .unwrap();
                    assert_abs_diff_eq!(c, q, epsilon = 1e-8);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn closed_vs_quadrature_property(q in 0.05f64..3.0, r in -0.999f64..0.999) {
            let closed = closed_integrals(ActivationKind::Relu, q, r).unwrap();
            let quad = quad_integrals(&state(q, r), ActivationKind::Relu).unwrap();
            prop_assert!((closed.i1 - quad.i1).abs() <= 1e-6);
            prop_assert!((closed.i2 - quad.i2).abs() <= 1e-6);
            prop_assert!((closed.i3 - quad.i3).abs() <= 1e-6);
            // I2 is an expectation of a square
            prop_assert!(closed.i2 >= -1e-12);
        }

        #[test]
        fn identity_closed_vs_quadrature_property(q in 0.05f64..3.0, r in -0.999f64..0.999) {
            let closed = closed_integrals(ActivationKind::Identity, q, r).unwrap();
            let quad = quad_integrals(&state(q, r), ActivationKind::Identity).unwrap();
            prop_assert!((closed.i1 - quad.i1).abs() <= 1e-8);
            prop_assert!((closed.i2 - quad.i2).abs() <= 1e-8);
            prop_assert!((closed.i3 - quad.i3).abs() <= 1e-8);
        }
    }

    #[test]
    fn relative_error_vs_signed_area() {
        // I2(Q,1) = (Q-1)^2/2 exactly; used by the dynamics fixed point.
        for &q in &[0.25, 0.5, 1.0, 1.5] {
            assert_abs_diff_eq!(
                relu::i2(q, 1.0).unwrap(),
                (q - 1.0) * (q - 1.0) / 2.0,
                epsilon = 1e-14
            );
        }
    }
}
