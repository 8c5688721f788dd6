//! Exploratory protocol tuning, run explicitly with --ignored.

use bnlab_core::dynamics::{integrate, DynamicsParams, MethodKind};
use bnlab_core::kernels::ActivationKind;
use bnlab_core::sgd::{run_experiment, run_online, OnlineParams, TeacherStudentConfig};
use bnlab_core::statmech::{eps_id_ord, eps_id_wn, eps_relu_ord};
use bnlab_core::OrderState;
use std::time::Instant;

fn cfg(
    method: MethodKind,
    act: ActivationKind,
    n: usize,
    m: usize,
    alpha: f64,
    eta: f64,
    eta_decay: f64,
    epochs: usize,
    seed: u64,
) -> TeacherStudentConfig {
    TeacherStudentConfig {
        n,
        m,
        alpha,
        s: 0.25,
        zeta: 0.0,
        eta,
        eta_decay,
        eta_hold: 0,
        act,
        method,
        seed,
        epochs,
        n_test: 40_000,
    }
}

#[test]
#[ignore]
fn tune_vanilla_linear() {
    for &(eta, decay, epochs, hold) in &[(0.5f64, 0.997f64, 4500usize, 2000usize)] {
        println!("--- eta {eta} decay {decay} epochs {epochs} hold {hold}");
        for &alpha in &[0.25, 0.5, 0.75, 1.5, 2.0] {
            let t0 = Instant::now();
            let mut c = cfg(
                MethodKind::VanillaSgd,
                ActivationKind::Identity,
                1024,
                1,
                alpha,
                eta,
                decay,
                epochs,
                42,
            );
            c.eta_hold = hold;
            let r = run_experiment(&c).unwrap();
            let theory = eps_id_ord(alpha, 0.25).unwrap();
            println!(
                "alpha {alpha}: sim {:.4} mc {:.4} theory {:.4} rel {:+.2}% epochs {} [{:.1?}]",
                r.gen_error,
                r.gen_error_mc,
                theory,
                100.0 * (r.gen_error / theory - 1.0),
                r.train_loss_trace.len(),
                t0.elapsed()
            );
        }
    }
}

#[test]
#[ignore]
fn tune_vanilla_relu() {
    for &alpha in &[0.5, 1.0, 1.5, 1.9] {
        let t0 = Instant::now();
        let mut vals = Vec::new();
        for seed in 0..6u64 {
            let mut c = cfg(
                MethodKind::VanillaSgd,
                ActivationKind::Relu,
                1024,
                1,
                alpha,
                0.7,
                0.995,
                2600,
                2000 + seed,
            );
            c.eta_hold = 1400;
            let r = run_experiment(&c).unwrap();
            vals.push(r.gen_error);
        }
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64)
            .sqrt();
        let theory = eps_relu_ord(alpha, 0.25).unwrap();
        println!(
            "alpha {alpha}: mean {mean:.4} sd {sd:.4} theory {theory:.4} rel {:+.2}% [{:.1?}]",
            100.0 * (mean / theory - 1.0),
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn tune_bn_linear() {
    let m = 32usize;
    for &(eta, decay, epochs, hold) in &[(0.3f64, 0.998f64, 5000usize, 3000usize)] {
        println!("--- eta {eta} decay {decay} epochs {epochs} hold {hold}");
        for &alpha in &[0.25, 0.5, 0.75, 0.9, 1.1, 1.25, 1.5, 1.75] {
            let t0 = Instant::now();
            let mut c = cfg(
                MethodKind::Bn,
                ActivationKind::Identity,
                1024,
                m,
                alpha,
                eta,
                decay,
                epochs,
                42,
            );
            c.eta_hold = hold;
            let r = run_experiment(&c).unwrap();
            let theory = eps_id_wn(alpha, 1.0 / (2.0 * m as f64), 0.25).unwrap();
            println!(
                "alpha {alpha}: sim {:.4} mc {:.4} theory {:.4} rel {:+.2}% epochs {} [{:.1?}]",
                r.gen_error,
                r.gen_error_mc,
                theory,
                100.0 * (r.gen_error / theory - 1.0),
                r.train_loss_trace.len(),
                t0.elapsed()
            );
        }
    }
}

#[test]
#[ignore]
fn tune_bn_vs_wn_relu() {
    let m = 16usize;
    let zeta = 1.0 / (4.0 * m as f64);
    for &alpha in &[0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75] {
        let t0 = Instant::now();
        let bn = run_experiment(&cfg(
            MethodKind::Bn,
            ActivationKind::Relu,
            1024,
            m,
            alpha,
            0.3,
            0.998,
            3000,
            42,
        ))
        .unwrap();
        let mut wc = cfg(
            MethodKind::WnGammaDecay,
            ActivationKind::Relu,
            1024,
            m,
            alpha,
            0.3,
            0.998,
            3000,
            43,
        );
        wc.zeta = zeta;
        let wn = run_experiment(&wc).unwrap();
        println!(
            "alpha {alpha}: bn {:.4} wn {:.4} rel {:+.2}% [{:.1?}]",
            bn.gen_error,
            wn.gen_error,
            100.0 * (bn.gen_error / wn.gen_error - 1.0),
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn tune_online_ode_agreement() {
    let t0 = Instant::now();
    let p = OnlineParams {
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
    let sim = run_online(&p).unwrap();
    let start = sim.order_trace.states[0];
    let dp = DynamicsParams::new(0.05, 0.25, ActivationKind::Relu, MethodKind::Bn).unwrap();
    let ode = integrate(
        &OrderState::new(start.q, start.r, start.l).unwrap(),
        &dp,
        40.0,
        0.01,
    )
    .unwrap();
    let mut worst_q = 0.0f64;
    let mut worst_r = 0.0f64;
    for (i, &t) in sim.order_trace.times.iter().enumerate() {
        let k = (t / 0.01).round() as usize;
        if k >= ode.trajectory.states.len() {
            break;
        }
        let s = sim.order_trace.states[i];
        let o = ode.trajectory.states[k];
        worst_q = worst_q.max((s.q - o.q).abs());
        worst_r = worst_r.max((s.r - o.r).abs());
    }
    let end_sim = sim.order_trace.last().unwrap();
    println!(
        "worst |dQ| {worst_q:.4} worst |dR| {worst_r:.4}; final sim Q {:.4} R {:.4} [{:?}]",
        end_sim.q,
        end_sim.r,
        t0.elapsed()
    );
}

#[test]
#[ignore]
fn diagnose_linear_alpha_1_5() {
    use bnlab_core::sgd::{make_teacher, sample_inputs};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    let n = 1024usize;
    let alpha = 1.5f64;
    let p = (alpha * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let teacher = make_teacher(n, rng.gen());
    let x = sample_inputs(n, p, rng.gen());
    let mut y = vec![0.0; p];
    for j in 0..p {
        let t: f64 = x[j * n..(j + 1) * n]
            .iter()
            .zip(&teacher)
            .map(|(a, b)| a * b)
            .sum();
        let s: f64 = rng.sample::<f64, _>(StandardNormal) * 0.5;
        y[j] = t + s;
    }
    // exact LS via conjugate gradient on X^T X w = X^T y
    let matvec = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for j in 0..p {
            let row = &x[j * n..(j + 1) * n];
            let d: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            for (o, r) in out.iter_mut().zip(row) {
                *o += d * r;
            }
        }
        out
    };
    let mut b = vec![0.0; n];
    for j in 0..p {
        let row = &x[j * n..(j + 1) * n];
        for (o, r) in b.iter_mut().zip(row) {
            *o += y[j] * r;
        }
    }
    let mut w = vec![0.0; n];
    let mut r = b.clone();
    let mut pd = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    for it in 0..3000 {
        let ap = matvec(&pd);
        let alpha_cg = rs / pd.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for k in 0..n {
            w[k] += alpha_cg * pd[k];
            r[k] -= alpha_cg * ap[k];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        if rs_new < 1e-24 {
            println!("CG converged at iter {it}");
            break;
        }
        let beta = rs_new / rs;
        for k in 0..n {
            pd[k] = r[k] + beta * pd[k];
        }
        rs = rs_new;
    }
    let eps_ls: f64 = w
        .iter()
        .zip(&teacher)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n as f64;
    println!(
        "exact LS eps = {eps_ls:.4}; thermodynamic theory = {:.4}; finite-N = {:.4}",
        0.5,
        0.25 * n as f64 / (p - n - 1) as f64
    );
}

#[test]
#[ignore]
fn diagnose_sgd_vs_cg_same_data() {
    use bnlab_core::sgd::{make_teacher, sample_inputs};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    let n = 1024usize;
    let alpha = 1.5f64;
    let p = (alpha * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let teacher = make_teacher(n, rng.gen());
    let x = sample_inputs(n, p, rng.gen());
    let mut y = vec![0.0; p];
    for j in 0..p {
        let t: f64 = x[j * n..(j + 1) * n]
            .iter()
            .zip(&teacher)
            .map(|(a, b)| a * b)
            .sum();
        let s: f64 = rng.sample::<f64, _>(StandardNormal) * 0.5;
        y[j] = t + s;
    }
    let eps_of = |w: &[f64]| -> f64 {
        w.iter()
            .zip(&teacher)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64
    };
    // plain per-sample SGD, constant eta
    let eta = 0.5;
    let mut w = vec![0.0; n];
    let mut idx: Vec<usize> = (0..p).collect();
    for epoch in 0..8001usize {
        if epoch % 1000 == 0 {
            println!("epoch {epoch}: eps = {:.4}", eps_of(&w));
        }
        idx.shuffle(&mut rng);
        for &j in &idx {
            let row = &x[j * n..(j + 1) * n];
            let h: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            let e = y[j] - h;
            for (wk, xk) in w.iter_mut().zip(row) {
                *wk += eta * e * xk;
            }
        }
    }
}

#[test]
#[ignore]
fn diagnose_run_experiment_constant_eta() {
    for &(epochs, decay, hold) in &[(1000usize, 1.0f64, 0usize), (3000, 1.0, 0), (4500, 0.997, 2000)] {
        let mut c = cfg(
            MethodKind::VanillaSgd,
            ActivationKind::Identity,
            1024,
            1,
            1.5,
            0.5,
            decay,
            epochs,
            42,
        );
        c.eta_hold = hold;
        let r = run_experiment(&c).unwrap();
        println!(
            "epochs {epochs} decay {decay}: eps {:.4} (mc {:.4}), ran {} epochs, diverged {}",
            r.gen_error,
            r.gen_error_mc,
            r.train_loss_trace.len(),
            r.diverged
        );
    }
}

#[test]
#[ignore]
fn diagnose_final_state() {
    let c = cfg(
        MethodKind::VanillaSgd,
        ActivationKind::Identity,
        1024,
        1,
        1.5,
        0.5,
        1.0,
        1000,
        42,
    );
    let r = run_experiment(&c).unwrap();
    let s = r.order_trace.last().unwrap();
    println!(
        "final Q {:.4} R {:.4} L {:.4}; eps closed {:.4}; L^2 {:.4}; 2QR {:.4}",
        s.q,
        s.r,
        s.l,
        r.gen_error,
        s.l * s.l,
        2.0 * s.q * s.r
    );
}

#[test]
#[ignore]
fn diagnose_replicated_stream() {
    use bnlab_core::sgd::make_teacher;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    let n = 1024usize;
    let p = 1536usize;
    // replicate run_experiment's stream: master(42) -> teacher seed -> x -> noise
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let teacher = make_teacher(n, rng.gen());
    let scale = 1.0 / (n as f64).sqrt();
    let x: Vec<f64> = (0..n * p)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    let mut y = vec![0.0; p];
    for j in 0..p {
        let t: f64 = x[j * n..(j + 1) * n]
            .iter()
            .zip(&teacher)
            .map(|(a, b)| a * b)
            .sum();
        let s: f64 = rng.sample::<f64, _>(StandardNormal) * 0.5;
        y[j] = t + s;
    }
    let eps_of = |w: &[f64]| -> f64 {
        w.iter()
            .zip(&teacher)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64
    };
    let eta = 0.5;
    let mut w = vec![0.0; n];
    let mut idx: Vec<usize> = (0..p).collect();
    for epoch in 0..2001usize {
        if epoch % 500 == 0 {
            println!("replicated epoch {epoch}: eps = {:.4}", eps_of(&w));
        }
        idx.shuffle(&mut rng);
        for &j in &idx {
            let row = &x[j * n..(j + 1) * n];
            let h: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            let e = y[j] - h;
            for (wk, xk) in w.iter_mut().zip(row) {
                *wk += eta * e * xk;
            }
        }
    }
}

#[test]
#[ignore]
fn diagnose_seed_spread() {
    for &alpha in &[0.75f64, 1.5] {
        let mut vals = Vec::new();
        for seed in 0..8u64 {
            let mut c = cfg(
                MethodKind::VanillaSgd,
                ActivationKind::Identity,
                1024,
                1,
                alpha,
                0.5,
                0.995,
                2200,
                1000 + seed,
            );
            c.eta_hold = 1200;
            let r = run_experiment(&c).unwrap();
            vals.push(r.gen_error);
        }
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64)
            .sqrt();
        let theory = eps_id_ord(alpha, 0.25).unwrap();
        println!(
            "alpha {alpha}: mean {mean:.4} sd {sd:.4} theory {theory:.4} rel {:+.2}% vals {:?}",
            100.0 * (mean / theory - 1.0),
            vals.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        );
    }
}

#[test]
#[ignore]
fn diagnose_relu_near_pole() {
    for &(epochs, hold) in &[(12000usize, 11000usize), (30000, 28000)] {
        let t0 = Instant::now();
        let mut vals = Vec::new();
        for seed in 0..3u64 {
            let mut c = cfg(
                MethodKind::VanillaSgd,
                ActivationKind::Relu,
                1024,
                1,
                1.9,
                1.0,
                0.995,
                epochs,
                3000 + seed,
            );
            c.eta_hold = hold;
            let r = run_experiment(&c).unwrap();
            vals.push(r.gen_error);
        }
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        println!(
            "epochs {epochs}: mean eps(1.9) = {mean:.4} vals {:?} [{:.1?}]",
            vals.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>(),
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn diagnose_relu_pole_variants() {
    // what does the final state look like, and what moves it
    for &(n, eta, epochs, hold) in &[
        (1024usize, 1.0f64, 8000usize, 7000usize),
        (1024, 1.5, 8000, 7000),
        (2048, 1.0, 8000, 7000),
    ] {
        let mut c = cfg(
            MethodKind::VanillaSgd,
            ActivationKind::Relu,
            n,
            1,
            1.9,
            eta,
            0.995,
            epochs,
            3000,
        );
        c.eta_hold = hold;
        let t0 = Instant::now();
        let r = run_experiment(&c).unwrap();
        let s = r.order_trace.last().unwrap();
        println!(
            "n {n} eta {eta}: eps {:.3} Q {:.3} R {:.3} (theory gamma^2 5.7, gammaR 0.95) [{:.0?}]",
            r.gen_error,
            s.q,
            s.r,
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn diagnose_relu_pole_hotter() {
    for &(eta, epochs, hold, seed) in &[
        (1.5f64, 16000usize, 14500usize, 3000u64),
        (1.8, 12000, 10500, 3000),
        (1.8, 12000, 10500, 3001),
        (1.8, 12000, 10500, 3002),
    ] {
        let mut c = cfg(
            MethodKind::VanillaSgd,
            ActivationKind::Relu,
            1024,
            1,
            1.9,
            eta,
            0.995,
            epochs,
            seed,
        );
        c.eta_hold = hold;
        let t0 = Instant::now();
        let r = run_experiment(&c).unwrap();
        let s = r.order_trace.last().unwrap();
        println!(
            "eta {eta} epochs {epochs} seed {seed}: eps {:.3} Q {:.3} R {:.3} div {} [{:.0?}]",
            r.gen_error,
            s.q,
            s.r,
            r.diverged,
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn diagnose_bn_eta_scan() {
    for &alpha in &[0.25f64, 0.9] {
        for &(eta, epochs, hold, decay) in &[
            (0.5f64, 4000usize, 3000usize, 0.998f64),
            (0.3, 4000, 3000, 0.998),
            (0.15, 6000, 5000, 0.998),
        ] {
            let mut c = cfg(
                MethodKind::Bn,
                ActivationKind::Identity,
                1024,
                32,
                alpha,
                eta,
                decay,
                epochs,
                42,
            );
            c.eta_hold = hold;
            let t0 = Instant::now();
            let r = run_experiment(&c).unwrap();
            let s = r.order_trace.last().unwrap();
            let theory = eps_id_wn(alpha, 1.0 / 64.0, 0.25).unwrap();
            println!(
                "alpha {alpha} eta {eta}: eps {:.4} (mc {:.4}) theory {:.4} rel {:+.1}% | Q {:.3} R {:.3} L {:.3} [{:.0?}]",
                r.gen_error,
                r.gen_error_mc,
                theory,
                100.0 * (r.gen_error / theory - 1.0),
                s.q,
                s.r,
                s.l,
                t0.elapsed()
            );
        }
    }
}

#[test]
#[ignore]
fn diagnose_bn_gradient_fd() {
    use bnlab_core::sgd::{sgd_step, Batch, StudentState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    let n = 32usize;
    let m = 8usize;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..n * m)
        .map(|_| rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt())
        .collect();
    let y: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let w0: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let gamma0 = 0.8;
    let eta = 1e-3;

    let loss = |w: &[f64], gamma: f64| -> f64 {
        let h: Vec<f64> = (0..m)
            .map(|i| x[i * n..(i + 1) * n].iter().zip(w).map(|(a, b)| a * b).sum())
            .collect();
        let mu: f64 = h.iter().sum::<f64>() / m as f64;
        let var: f64 = h.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m as f64;
        let sigma = var.sqrt();
        let mut total = 0.0;
        for i in 0..m {
            let e = gamma * h[i] / sigma - y[i];
            total += 0.5 * e * e;
        }
        total / m as f64
    };

    let mut c = cfg(MethodKind::Bn, ActivationKind::Identity, 1024, m, 0.5, eta, 1.0, 1, 1);
    c.n = n;
    let student = StudentState {
        w: w0.clone(),
        gamma: gamma0,
        beta_shift: 0.0,
    };
    let batch = Batch { x: &x, y: &y, n };
    let (next, _) = sgd_step(&student, &batch, &c);
    let hfd = 1e-7;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let mut wp = w0.clone();
        wp[k] += hfd;
        let mut wm = w0.clone();
        wm[k] -= hfd;
        let fd = (loss(&wp, gamma0) - loss(&wm, gamma0)) / (2.0 * hfd);
        let step = next.w[k] - w0[k];
        worst = worst.max((step + eta * fd).abs());
    }
    let fd_gamma = (loss(&w0, gamma0 + hfd) - loss(&w0, gamma0 - hfd)) / (2.0 * hfd);
    println!(
        "worst |w-step + eta grad| = {worst:.3e}; gamma step {:+.6e} vs -eta grad {:+.6e}",
        next.gamma - gamma0,
        -eta * fd_gamma
    );
}

#[test]
#[ignore]
fn diagnose_wn_decay_vs_theory_linear() {
    for &alpha in &[0.25f64, 0.9] {
        for &m in &[1usize, 32] {
            let mut c = cfg(
                MethodKind::WnGammaDecay,
                ActivationKind::Identity,
                1024,
                m,
                alpha,
                0.3,
                0.998,
                6000,
                42,
            );
            c.zeta = 1.0 / 64.0;
            c.eta_hold = 4000;
            let r = run_experiment(&c).unwrap();
            let s = r.order_trace.last().unwrap();
            let theory = eps_id_wn(alpha, 1.0 / 64.0, 0.25).unwrap();
            println!(
                "wn alpha {alpha} m {m}: eps {:.4} theory {:.4} rel {:+.1}% | Q {:.3} R {:.3} QR {:.3}",
                r.gen_error,
                theory,
                100.0 * (r.gen_error / theory - 1.0),
                s.q,
                s.r,
                s.q * s.r
            );
        }
    }
}

#[test]
#[ignore]
fn diagnose_bn_long_trace() {
    let mut c = cfg(
        MethodKind::Bn,
        ActivationKind::Identity,
        1024,
        32,
        0.25,
        0.3,
        1.0,
        20000,
        42,
    );
    c.eta_hold = 20000;
    let r = run_experiment(&c).unwrap();
    for (i, s) in r.order_trace.states.iter().enumerate() {
        if i % 2500 == 0 || i == r.order_trace.states.len() - 1 {
            println!(
                "epoch {i}: Q {:.4} R {:.4} L {:.4} QR {:.4} eps {:.4}",
                s.q,
                s.r,
                s.l,
                s.q * s.r,
                1.0 + s.q * s.q - 2.0 * s.q * s.r
            );
        }
    }
}

#[test]
#[ignore]
fn diagnose_bn_gamma_equilibrium() {
    use bnlab_core::sgd::{make_teacher, sample_inputs};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    let n = 1024usize;
    let p = 256usize; // alpha = 0.25
    let m = 32usize;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let teacher = make_teacher(n, rng.gen());
    let x = sample_inputs(n, p, rng.gen());
    let mut y = vec![0.0; p];
    for j in 0..p {
        let t: f64 = x[j * n..(j + 1) * n]
            .iter()
            .zip(&teacher)
            .map(|(a, b)| a * b)
            .sum();
        y[j] = t + rng.sample::<f64, _>(StandardNormal) * 0.5;
    }
    // train BN inline (eta 0.3, 4000 epochs) so we own the weights
    let mut w: Vec<f64> = {
        // in-span init
        let mut w = vec![0.0; n];
        for j in 0..p {
            let c: f64 = rng.sample(StandardNormal);
            for (wk, xk) in w.iter_mut().zip(&x[j * n..(j + 1) * n]) {
                *wk += c * xk;
            }
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let target = (n as f64).sqrt();
        for v in &mut w {
            *v *= target / norm;
        }
        w
    };
    let mut gamma = 1.0f64;
    let eta = 0.3;
    let mut idx: Vec<usize> = (0..p).collect();
    let mut h = vec![0.0; m];
    for _ in 0..4000 {
        idx.shuffle(&mut rng);
        for b in 0..p / m {
            let members = &idx[b * m..(b + 1) * m];
            for (slot, &j) in members.iter().enumerate() {
                h[slot] = x[j * n..(j + 1) * n].iter().zip(&w).map(|(a, c)| a * c).sum();
            }
            let mu: f64 = h.iter().sum::<f64>() / m as f64;
            let var: f64 = h.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m as f64;
            let sigma = var.sqrt().max(1e-12);
            let mut b_acc = 0.0;
            let mut grad_gamma = 0.0;
            let mut coeff = vec![0.0; m];
            for i in 0..m {
                let e = gamma * h[i] / sigma - y[members[i]];
                coeff[i] = e;
                b_acc += e * h[i];
                grad_gamma += e * h[i] / (sigma * m as f64);
            }
            gamma -= eta * grad_gamma;
            let c1 = -eta * gamma / (m as f64 * sigma);
            let c2 = eta * gamma * b_acc / ((m * m) as f64 * sigma * sigma * sigma);
            for (i, &j) in members.iter().enumerate() {
                let ci = c1 * coeff[i] + c2 * (h[i] - mu);
                for (wk, xk) in w.iter_mut().zip(&x[j * n..(j + 1) * n]) {
                    *wk += ci * xk;
                }
            }
        }
    }
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r_overlap: f64 =
        w.iter().zip(&teacher).map(|(a, b)| a * b).sum::<f64>() / (norm * (n as f64).sqrt());
    println!("trained: gamma {gamma:.4} R {r_overlap:.4}");

    // scan the batch-averaged gamma gradient over gamma at the frozen w
    let mut yb = vec![0.0; m];
    for &g in &[0.45f64, 0.55, 0.65, 0.8, 1.0, 1.1, 1.2] {
        let mut acc = 0.0;
        let mut probe_rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 4000;
        for _ in 0..trials {
            for slot in 0..m {
                let j = probe_rng.gen_range(0..p);
                h[slot] = x[j * n..(j + 1) * n].iter().zip(&w).map(|(a, c)| a * c).sum();
                yb[slot] = y[j];
            }
            let mu: f64 = h.iter().sum::<f64>() / m as f64;
            let var: f64 = h.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / m as f64;
            let sigma = var.sqrt().max(1e-12);
            let mut grad = 0.0;
            for i in 0..m {
                grad += (g * h[i] / sigma - yb[i]) * h[i] / (sigma * m as f64);
            }
            acc += grad;
        }
        println!("gamma {g}: E[grad_gamma] = {:+.5}", acc / trials as f64);
    }
    // reference statistics of the trained direction
    let hs: Vec<f64> = (0..p)
        .map(|j| x[j * n..(j + 1) * n].iter().zip(&w).map(|(a, c)| a * c).sum())
        .collect();
    let m_hh: f64 = hs.iter().map(|v| v * v).sum::<f64>() / p as f64;
    let m_hy: f64 = hs.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / p as f64;
    println!("dataset: avg h^2 {m_hh:.4}, avg y h {m_hy:.4}, ratio {:.4}", m_hy / m_hh);
}

#[test]
#[ignore]
fn diagnose_bn_near_pole_budget() {
    for &alpha in &[0.9f64, 1.1] {
        let mut c = cfg(
            MethodKind::Bn,
            ActivationKind::Identity,
            1024,
            32,
            alpha,
            0.3,
            0.9985,
            33000,
            42,
        );
        c.eta_hold = 30000;
        let t0 = Instant::now();
        let r = run_experiment(&c).unwrap();
        let theory = eps_id_wn(alpha, 1.0 / 64.0, 0.25).unwrap();
        println!(
            "alpha {alpha}: sim {:.4} theory {:.4} rel {:+.2}% [{:.0?}]",
            r.gen_error,
            theory,
            100.0 * (r.gen_error / theory - 1.0),
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn diagnose_bn_schedule_scan() {
    for &(eta, hold, decay, epochs) in &[
        (0.3f64, 1800usize, 0.9985f64, 4600usize),
        (0.3, 2100, 0.9985, 4900),
    ] {
        println!("--- eta {eta} hold {hold} decay {decay} epochs {epochs}");
        for &alpha in &[0.25, 0.5, 0.75, 0.9, 1.1, 1.25, 1.5, 1.75] {
            let c = {
                let mut c = cfg(
                    MethodKind::Bn,
                    ActivationKind::Identity,
                    1024,
                    32,
                    alpha,
                    eta,
                    decay,
                    epochs,
                    42,
                );
                c.eta_hold = hold;
                c
            };
            let r = run_experiment(&c).unwrap();
            let theory = eps_id_wn(alpha, 1.0 / 64.0, 0.25).unwrap();
            println!(
                "alpha {alpha}: sim {:.4} theory {:.4} rel {:+.2}%",
                r.gen_error,
                theory,
                100.0 * (r.gen_error / theory - 1.0)
            );
        }
    }
}

#[test]
#[ignore]
fn diagnose_bn_n2048() {
    use bnlab_core::sweeps::alpha_sweep;
    let base = TeacherStudentConfig {
        n: 2048,
        m: 32,
        alpha: 1.0,
        s: 0.25,
        zeta: 0.0,
        eta: 0.3,
        eta_decay: 0.9985,
        eta_hold: 1850,
        act: ActivationKind::Identity,
        method: MethodKind::Bn,
        seed: 4000,
        epochs: 4650,
        n_test: 40_000,
    };
    let t0 = Instant::now();
    let pts = alpha_sweep(&base, &[0.75, 0.9, 1.1, 1.25], 3).unwrap();
    for p in &pts {
        let theory = eps_id_wn(p.alpha, 1.0 / 64.0, 0.25).unwrap();
        println!(
            "alpha {}: bn {:.4} theory {:.4} rel {:+.2}%",
            p.alpha,
            p.gen_error_sim,
            theory,
            100.0 * (p.gen_error_sim / theory - 1.0)
        );
    }
    println!("elapsed {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn diagnose_bn_vs_wn_relu_schedule() {
    use bnlab_core::sweeps::alpha_sweep;
    let bn_base = TeacherStudentConfig {
        n: 1024,
        m: 16,
        alpha: 1.0,
        s: 0.25,
        zeta: 0.0,
        eta: 0.3,
        eta_decay: 0.997,
        eta_hold: 940,
        act: ActivationKind::Relu,
        method: MethodKind::Bn,
        seed: 4100,
        epochs: 2850,
        n_test: 40_000,
    };
    let mut wn_base = bn_base.clone();
    wn_base.method = MethodKind::WnGammaDecay;
    wn_base.zeta = 1.0 / 64.0;
    wn_base.seed = 4200;
    let grid = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75];
    let t0 = Instant::now();
    let bn = alpha_sweep(&bn_base, &grid, 3).unwrap();
    let wn = alpha_sweep(&wn_base, &grid, 3).unwrap();
    for (b, w) in bn.iter().zip(&wn) {
        println!(
            "alpha {}: bn {:.4} wn {:.4} rel {:+.2}%",
            b.alpha,
            b.gen_error_sim,
            w.gen_error_sim,
            100.0 * (b.gen_error_sim / w.gen_error_sim - 1.0)
        );
    }
    println!("elapsed {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn diagnose_bn_relu_trace() {
    let mut c = cfg(
        MethodKind::Bn,
        ActivationKind::Relu,
        1024,
        16,
        1.0,
        0.3,
        0.9985,
        4000,
        4100,
    );
    c.eta_hold = 1880;
    let r = run_experiment(&c).unwrap();
    let n_states = r.order_trace.states.len();
    for (i, s) in r.order_trace.states.iter().enumerate() {
        if i % 500 == 0 || i == n_states - 1 {
            let loss = if i == 0 { f64::NAN } else { r.train_loss_trace[i - 1] };
            println!(
                "epoch {i}: Qeff {:.4} R {:.4} L {:.4} loss {:.5}",
                s.q, s.r, s.l, loss
            );
        }
    }
    println!("gen closed {:.4} mc {:.4}", r.gen_error, r.gen_error_mc);
}
