//! Order-parameter dynamics of the normalized teacher-student model.
//!
//! The state `(Q, R, L)` follows
//!
//! ```text
//! dQ/dt = eta I1/Q - eta zeta Q
//! dR/dt = eta Q I3/L^2 - eta R I1/L^2 - eta^2 Q^2 R I2 / (2 L^4)
//! dL/dt = eta^2 Q^2 I2 / (2 L^3)
//! ```
//!
//! with `I1, I2, I3` the Gaussian expectations of [`crate::kernels`]. BN is
//! represented by weight normalization with gamma decay, so `Bn` and
//! `WnGammaDecay` share dynamics; `Wn` and `VanillaSgd` run with `zeta = 0`.

use crate::error::{Error, Result};
use crate::kernels::{self, ActivationKind, OrderState};

/// Training method whose dynamics/fixed point is being analyzed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Bn,
    Wn,
    WnGammaDecay,
    VanillaSgd,
}

impl MethodKind {
    /// BN and WN+gamma-decay share the same order-parameter dynamics.
    pub fn has_gamma_decay(self) -> bool {
        matches!(self, MethodKind::Bn | MethodKind::WnGammaDecay)
    }
}

/// Parameters of the dynamical system.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DynamicsParams {
    pub eta: f64,
    pub zeta: f64,
    pub act: ActivationKind,
    pub method: MethodKind,
}

impl DynamicsParams {
    pub fn new(eta: f64, zeta: f64, act: ActivationKind, method: MethodKind) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::domain(format!("eta must be positive, got {eta}")));
        }
        if !(zeta.is_finite() && zeta >= 0.0) {
            return Err(Error::domain(format!(
                "zeta must be non-negative, got {zeta}"
            )));
        }
        Ok(DynamicsParams {
            eta,
            zeta,
            act,
            method,
        })
    }

    /// Decay coefficient actually entering the dQ equation.
    fn effective_zeta(&self) -> f64 {
        if self.method.has_gamma_decay() {
            self.zeta
        } else {
            0.0
        }
    }
}

/// A trajectory of order parameters at strictly increasing times `t = j/N`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<OrderState>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&OrderState> {
        self.states.last()
    }
}

/// Outcome of an integration: the trajectory up to `t_end` or up to the
/// first diverged step.
#[derive(Debug, Clone)]
pub struct IntegrationResult {
    pub trajectory: Trajectory,
    pub diverged: bool,
}

/// Eigenvalues of the Jacobian at the fixed point and the learning-rate
/// thresholds they encode.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LrAnalysis {
    pub lambda_q: f64,
    pub lambda_r: f64,
    pub lambda_l: f64,
    /// lambda_q with the eta factor divided out, for direct comparison with
    /// the eta-free closed forms.
    pub lambda_q_over_eta: f64,
    pub eta_max: f64,
    pub eta_eff: f64,
    pub stable: bool,
}

const DIVERGENCE_LIMIT: f64 = 1e6;

/// First-order (eta) and second-order (eta^2) pieces of the right-hand side.
fn rhs_split(state: &[f64; 3], params: &DynamicsParams) -> Result<([f64; 3], [f64; 3])> {
    let [q, r, l] = *state;
    if !(q.is_finite() && l.is_finite()) || q <= 0.0 || l <= 0.0 {
        return Err(Error::domain(format!(
            "dynamics require Q > 0 and L > 0, got Q = {q}, L = {l}"
        )));
    }
    // RK4 stage states may poke marginally outside [-1, 1]; the kernels are
    // only defined there.
    let r = r.clamp(-1.0, 1.0);
    let zeta = params.effective_zeta();
    let eta = params.eta;
    let ints = kernels::closed_integrals(params.act, q, r)?;
    let l2 = l * l;
    let first = [
        eta * (ints.i1 / q - zeta * q),
        eta * (q * ints.i3 - r * ints.i1) / l2,
        0.0,
    ];
    let second = [
        0.0,
        -eta * eta * q * q * r * ints.i2 / (2.0 * l2 * l2),
        eta * eta * q * q * ints.i2 / (2.0 * l2 * l),
    ];
    Ok((first, second))
}

/// Right-hand side (dQ/dt, dR/dt, dL/dt).
pub fn ode_rhs(state: &OrderState, params: &DynamicsParams) -> Result<(f64, f64, f64)> {
    let (a, b) = rhs_split(&[state.q, state.r, state.l], params)?;
    Ok((a[0] + b[0], a[1] + b[1], a[2] + b[2]))
}

/// Only the first-order-in-eta part of the right-hand side; the fixed point
/// is exact for these terms.
pub fn ode_rhs_first_order(state: &OrderState, params: &DynamicsParams) -> Result<(f64, f64, f64)> {
    let (a, _) = rhs_split(&[state.q, state.r, state.l], params)?;
    Ok((a[0], a[1], a[2]))
}

/// Fixed-step RK4 integration from `initial` to `t_end`.
///
/// Terminates early with `diverged = true` when Q or L exceeds 1e6, drops to
/// zero, or becomes non-finite.
pub fn integrate(
    initial: &OrderState,
    params: &DynamicsParams,
    t_end: f64,
    dt: f64,
) -> Result<IntegrationResult> {
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(Error::domain("t_end and dt must be positive"));
    }
    let mut y = [initial.q, initial.r, initial.l];
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![*initial];
    let mut diverged = false;

    let full = |s: &[f64; 3]| -> Result<[f64; 3]> {
        let (a, b) = rhs_split(s, params)?;
        Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2]])
    };

    'outer: while t < t_end - 1e-12 {
        let h = dt.min(t_end - t);
        let step = (|| -> Result<[f64; 3]> {
            let k1 = full(&y)?;
            let y2 = [
                y[0] + 0.5 * h * k1[0],
                y[1] + 0.5 * h * k1[1],
                y[2] + 0.5 * h * k1[2],
            ];
            let k2 = full(&y2)?;
            let y3 = [
                y[0] + 0.5 * h * k2[0],
                y[1] + 0.5 * h * k2[1],
                y[2] + 0.5 * h * k2[2],
            ];
            let k3 = full(&y3)?;
            let y4 = [y[0] + h * k3[0], y[1] + h * k3[1], y[2] + h * k3[2]];
            let k4 = full(&y4)?;
            Ok([
                y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                y[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
            ])
        })();
        let mut next = match step {
            Ok(v) => v,
            Err(_) => {
                diverged = true;
                break 'outer;
            }
        };
        next[1] = next[1].clamp(-1.0, 1.0);
        if !next.iter().all(|v| v.is_finite())
            || next[0] <= 0.0
            || next[2] <= 0.0
            || next[0] > DIVERGENCE_LIMIT
            || next[2] > DIVERGENCE_LIMIT
        {
            diverged = true;
            break 'outer;
        }
        y = next;
        t += h;
        times.push(t);
        states.push(OrderState {
            q: y[0],
            r: y[1],
            l: y[2],
        });
    }

    Ok(IntegrationResult {
        trajectory: Trajectory { times, states },
        diverged,
    })
}

/// Fixed point of the first-order dynamics for the given method.
///
/// `l0` is free for normalized methods and is echoed back; vanilla SGD pins
/// it to 1. For BN the ReLU fixed point is `Q0 = 1/(2 zeta + 1)`; the
/// identity-activation counterpart, obtained from `I1(Q, 1) = zeta Q^2` with
/// the polynomial forms, is `Q0 = 1/(zeta + 1)`.
pub fn fixed_point(params: &DynamicsParams, l0: f64) -> Result<OrderState> {
    if !(l0.is_finite() && l0 > 0.0) {
        return Err(Error::domain(format!("L0 must be positive, got {l0}")));
    }
    let q0 = match (params.method.has_gamma_decay(), params.act) {
        (true, ActivationKind::Relu) => 1.0 / (2.0 * params.zeta + 1.0),
        (true, ActivationKind::Identity) => 1.0 / (params.zeta + 1.0),
        (false, _) => 1.0,
    };
    let l = match params.method {
        MethodKind::VanillaSgd => 1.0,
        _ => l0,
    };
    OrderState::new(q0, 1.0, l)
}

/// Jacobian eigenvalues at the fixed point, with the maximum and effective
/// learning rates for the overlap direction.
///
/// `lambda_R = (dI2/dR) (eta Q0 / 2 L0^2) (eta_max - eta_eff)`, with the
/// partial derivatives evaluated analytically at `(Q0, R=1)`; the fixed
/// point is stable in R exactly when `eta_eff < eta_max`.
pub fn lr_analysis(params: &DynamicsParams, l0: f64) -> Result<LrAnalysis> {
    let fp = fixed_point(params, l0)?;
    let q0 = fp.q;
    let l0 = fp.l;
    let zeta = params.effective_zeta();
    let eta = params.eta;

    let (di1_dq, di1_dr, di2_dr, di3_dr) = match params.act {
        ActivationKind::Relu => (
            kernels::relu::di1_dq(q0, 1.0)?,
            kernels::relu::di1_dr(q0, 1.0)?,
            kernels::relu::di2_dr(q0, 1.0)?,
            kernels::relu::di3_dr(q0, 1.0)?,
        ),
        ActivationKind::Identity => (
            kernels::identity::di1_dq(q0, 1.0)?,
            kernels::identity::di1_dr(q0, 1.0)?,
            kernels::identity::di2_dr(q0, 1.0)?,
            kernels::identity::di3_dr(q0, 1.0)?,
        ),
    };

    let lambda_q_over_eta = di1_dq / q0 - 2.0 * zeta;
    let lambda_q = eta * lambda_q_over_eta;

    let eta_max = ((q0 * di3_dr - di1_dr) / q0 - zeta * q0) / (di2_dr / 2.0);
    let eta_eff = match params.method {
        MethodKind::Bn | MethodKind::WnGammaDecay => eta * q0 / (l0 * l0),
        MethodKind::Wn => eta / (l0 * l0),
        MethodKind::VanillaSgd => eta,
    };
    let lambda_r = di2_dr * (eta * q0 / (2.0 * l0 * l0)) * (eta_max - eta_eff);

    Ok(LrAnalysis {
        lambda_q,
        lambda_r,
        lambda_l: 0.0,
        lambda_q_over_eta,
        eta_max,
        eta_eff,
        stable: lambda_r < 0.0,
    })
}
