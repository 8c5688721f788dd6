//! Simulation-level invariants: agreement between the finite-N dynamics and
//! the order-parameter ODEs, fixed-point convergence, and generalization
//! consistency.

use bnlab_core::dynamics::{integrate, DynamicsParams};
use bnlab_core::kernels::{gen_integral, ActivationKind, GenMode};
use bnlab_core::sgd::{run_experiment, run_online, OnlineParams, TeacherStudentConfig};
use bnlab_core::{MethodKind, OrderState};

/// Online WN+gamma-decay (the BN dynamics proxy) tracks the integrated ODE
/// pointwise after aligning the time axes at t = j/N.
#[test]
fn online_trace_matches_ode() {
    let params = OnlineParams {
        n: 2048,
        eta: 0.05,
        zeta: 0.25,
        s: 0.0,
        act: ActivationKind::Relu,
        method: MethodKind::WnGammaDecay,
        seed: 42,
        t_end: 40.0,
        record_every: 128,
        slow_gamma: true,
    };
    let sim = run_online(&params).unwrap();
    assert!(!sim.diverged);
    let start = sim.order_trace.states[0];
    let dp = DynamicsParams::new(0.05, 0.25, ActivationKind::Relu, MethodKind::Bn).unwrap();
    let ode = integrate(
        &OrderState::new(start.q, start.r, start.l).unwrap(),
        &dp,
        40.0,
        0.01,
    )
    .unwrap();
    let mut worst = 0.0f64;
    for (i, &t) in sim.order_trace.times.iter().enumerate() {
        let k = (t / 0.01).round() as usize;
        if k >= ode.trajectory.states.len() {
            break;
        }
        let s = sim.order_trace.states[i];
        let o = ode.trajectory.states[k];
        worst = worst.max((s.q - o.q).abs()).max((s.r - o.r).abs());
    }
    assert!(worst <= 0.05, "worst |sim - ode| = {worst:.4}");
}

/// Online learning drives Q to the 1/(2 zeta + 1) fixed point.
#[test]
fn online_q_reaches_fixed_point() {
    for &zeta in &[0.1, 0.25] {
        let params = OnlineParams {
            n: 1024,
            eta: 0.05,
            zeta,
            s: 0.0,
            act: ActivationKind::Relu,
            method: MethodKind::WnGammaDecay,
            seed: 7,
            t_end: 400.0,
            record_every: 512,
            slow_gamma: true,
        };
        let sim = run_online(&params).unwrap();
        assert!(!sim.diverged);
        let q_end = sim.order_trace.last().unwrap().q;
        let target = 1.0 / (2.0 * zeta + 1.0);
        assert!(
            (q_end - target).abs() <= 0.02,
            "zeta {zeta}: Q = {q_end:.4}, target {target:.4}"
        );
    }
}

/// Closed-form generalization error at the final order parameters agrees
/// with a fresh-test-set Monte Carlo estimate within 3 standard errors.
#[test]
fn generalization_consistency() {
    for (method, act) in [
        (MethodKind::VanillaSgd, ActivationKind::Identity),
        (MethodKind::WnGammaDecay, ActivationKind::Relu),
        (MethodKind::Bn, ActivationKind::Identity),
    ] {
        let cfg = TeacherStudentConfig {
            n: 256,
            m: if method == MethodKind::VanillaSgd { 1 } else { 16 },
            alpha: 0.5,
            s: 0.25,
            zeta: 0.05,
            eta: 0.3,
            eta_decay: 0.995,
            eta_hold: 100,
            act,
            method,
            seed: 33,
            epochs: 400,
            n_test: 200_000,
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(!r.diverged);
        assert!(
            (r.gen_error - r.gen_error_mc).abs() <= 3.0 * r.gen_error_mc_se,
            "{method:?}/{act:?}: closed {:.5} vs mc {:.5} +- {:.5}",
            r.gen_error,
            r.gen_error_mc,
            r.gen_error_mc_se
        );
    }
}

/// The trajectory recorded by a run respects the order-state invariants and
/// strictly increasing times.
#[test]
fn trace_is_well_formed() {
    let cfg = TeacherStudentConfig {
        n: 128,
        m: 8,
        alpha: 0.75,
        s: 0.25,
        zeta: 0.0,
        eta: 0.3,
        eta_decay: 1.0,
        eta_hold: 0,
        act: ActivationKind::Identity,
        method: MethodKind::Bn,
        seed: 5,
        epochs: 50,
        n_test: 10_000,
    };
    let r = run_experiment(&cfg).unwrap();
    let t = &r.order_trace;
    assert!(t.times.windows(2).all(|w| w[1] > w[0]));
    for s in &t.states {
        assert!(s.q > 0.0 && s.l > 0.0 && (-1.0..=1.0).contains(&s.r), "{s:?}");
    }
    // closed-form error is the gen_integral of the final state
    let last = t.last().unwrap();
    let expect = gen_integral(
        last.q,
        last.r,
        ActivationKind::Identity,
        ActivationKind::Identity,
        GenMode::Closed,
    )
    .unwrap();
    assert!((expect - r.gen_error).abs() < 1e-12);
}
