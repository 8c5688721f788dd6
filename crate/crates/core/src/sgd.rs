//! Finite-N teacher-student SGD simulation.
//!
//! A linear teacher `y* = w*^T x + s` (noise `s` fixed per training example)
//! supervises a single-unit student trained by SGD under one of four
//! methods: vanilla SGD, weight normalization, WN with gamma decay, or batch
//! normalization with the shift frozen at zero and the batch mean dropped
//! from the forward pass. Inputs are `x ~ N(0, I/N)`.
//!
//! Losses are the halved squared error, so the WN update rule is
//!
//! ```text
//! w    <- w    + eta d (gamma sqrt(N)/|w| x - (wt^T x/|w|^2) w)
//! gamma <- gamma + eta (d sqrt(N) w^T x/|w| - zeta gamma)
//! ```
//!
//! with `wt = sqrt(N) gamma w/|w|` and `d = g'(wt^T x)(y - g(wt^T x))`.
//! Generalization errors are always unhalved squared error against the
//! noiseless teacher.

use crate::dynamics::{MethodKind, Trajectory};
use crate::error::{Error, Result};
use crate::kernels::{gen_integral, ActivationKind, GenMode, OrderState};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Full description of one experiment.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TeacherStudentConfig {
    /// Input dimension.
    pub n: usize,
    /// Batch size (BN statistics are computed per batch).
    pub m: usize,
    /// Effective load P/N; the sample count is `round(alpha n)`.
    pub alpha: f64,
    /// Teacher noise variance.
    pub s: f64,
    /// Gamma-decay coefficient (WN+gamma-decay only).
    pub zeta: f64,
    /// Initial learning rate.
    pub eta: f64,
    /// Per-epoch multiplicative learning-rate decay (1.0 disables).
    #[serde(default = "default_eta_decay")]
    pub eta_decay: f64,
    /// Number of initial epochs at constant eta before the decay engages.
    #[serde(default)]
    pub eta_hold: usize,
    pub act: ActivationKind,
    pub method: MethodKind,
    pub seed: u64,
    /// Epoch cap.
    pub epochs: usize,
    /// Fresh test samples for the Monte Carlo generalization estimate.
    #[serde(default = "default_n_test")]
    pub n_test: usize,
}

fn default_eta_decay() -> f64 {
    1.0
}

fn default_n_test() -> usize {
    65_536
}

impl TeacherStudentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 64 {
            return Err(Error::Config(format!("N >= 64 required, got {}", self.n)));
        }
        // BN statistics need at least two samples; the online-style update
        // rules admit M = 1.
        let min_m = if self.method == MethodKind::Bn { 2 } else { 1 };
        if self.m < min_m {
            return Err(Error::Config(format!(
                "M >= {min_m} required for {:?}, got {}",
                self.method, self.m
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha > 0 required, got {}",
                self.alpha
            )));
        }
        if !(self.s.is_finite() && self.s >= 0.0) {
            return Err(Error::Config(format!("S >= 0 required, got {}", self.s)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!("eta > 0 required, got {}", self.eta)));
        }
        if !(self.eta_decay > 0.0 && self.eta_decay <= 1.0) {
            return Err(Error::Config(format!(
                "eta_decay must lie in (0, 1], got {}",
                self.eta_decay
            )));
        }
        if self.zeta < 0.0 {
            return Err(Error::Config(format!(
                "zeta >= 0 required, got {}",
                self.zeta
            )));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        ((self.alpha * self.n as f64).round() as usize).max(1)
    }
}

/// Trainable student parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct StudentState {
    pub w: Vec<f64>,
    pub gamma: f64,
    /// Frozen at 0 in all experiments here.
    pub beta_shift: f64,
}

/// Result of one training run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunResult {
    pub order_trace: Trajectory,
    pub train_loss_trace: Vec<f64>,
    /// Closed-form generalization error at the final order parameters.
    pub gen_error: f64,
    /// Fresh-test-set Monte Carlo cross-check (noiseless teacher).
    pub gen_error_mc: f64,
    pub gen_error_mc_se: f64,
    pub diverged: bool,
}

/// A batch view over row-major inputs.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub n: usize,
}

impl<'a> Batch<'a> {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn row(&self, i: usize) -> &'a [f64] {
        &self.x[i * self.n..(i + 1) * self.n]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Teacher weights: Gaussian direction rescaled so that `(1/N) w*^T w* = 1`
/// exactly.
pub fn make_teacher(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm_sq: f64 = dot(&w, &w);
    let scale = (n as f64 / norm_sq).sqrt();
    for v in &mut w {
        *v *= scale;
    }
    w
}

/// `count` rows of i.i.d. `N(0, 1/N)` inputs, row-major.
pub fn sample_inputs(n: usize, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_inputs_with(&mut rng, n, count)
}

fn sample_inputs_with(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<f64> {
    let scale = 1.0 / (n as f64).sqrt();
    (0..n * count)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect()
}

/// Order parameters of a student: `L = |w|/sqrt(N)`,
/// `R = w^T w* / (|w| sqrt(N))`, and `Q` the effective test-time output
/// scale (gamma for WN, `L` for vanilla SGD, and for BN the trained gamma
/// rescaled from the running batch deviation to the fresh-input scale).
/// A negative effective scale is folded into the sign of R, which leaves
/// the generalization error unchanged.
pub fn order_state(student: &StudentState, teacher: &[f64], method: MethodKind) -> OrderState {
    order_state_scaled(student, teacher, method, None)
}

fn order_state_scaled(
    student: &StudentState,
    teacher: &[f64],
    method: MethodKind,
    bn_sigma_run: Option<f64>,
) -> OrderState {
    let n = teacher.len() as f64;
    let norm = dot(&student.w, &student.w).sqrt();
    let l = (norm / n.sqrt()).max(1e-12);
    let r = if norm > 0.0 {
        (dot(&student.w, teacher) / (norm * n.sqrt())).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let gamma_eff = match method {
        MethodKind::VanillaSgd => l,
        MethodKind::Bn => match bn_sigma_run {
            // test-time function is gamma w^T x / sigma_run
            Some(sigma_run) => student.gamma * l / sigma_run.max(1e-12),
            None => student.gamma,
        },
        _ => student.gamma,
    };
    let (q, r) = if gamma_eff < 0.0 {
        ((-gamma_eff).max(1e-12), -r)
    } else {
        (gamma_eff.max(1e-12), r)
    };
    OrderState { q, r, l }
}

struct Scratch {
    h: Vec<f64>,
    coeff: Vec<f64>,
    /// Batch variance of h from the last BN step, for running statistics.
    last_var: f64,
}

impl Scratch {
    fn new(m: usize) -> Self {
        Scratch {
            h: vec![0.0; m],
            coeff: vec![0.0; m],
            last_var: f64::NAN,
        }
    }
}

const SIGMA_FLOOR: f64 = 1e-12;

/// One batch update in place. Returns the batch loss before the update.
///
/// `eta_gamma` is the learning rate applied to the scale parameter; the
/// online runner can slow it by 1/N to put all three order parameters on
/// the same `t = j/N` clock as the continuous dynamics.
fn step_in_place(
    student: &mut StudentState,
    batch: &Batch,
    method: MethodKind,
    act: ActivationKind,
    zeta: f64,
    eta: f64,
    eta_gamma: f64,
    scratch: &mut Scratch,
) -> f64 {
    let m = batch.len();
    let n = batch.n;
    let mf = m as f64;
    let h = &mut scratch.h[..m];
    for (i, hi) in h.iter_mut().enumerate() {
        *hi = dot(batch.row(i), &student.w);
    }
    let coeff = &mut scratch.coeff[..m];

    match method {
        MethodKind::VanillaSgd => {
            let mut loss = 0.0;
            for i in 0..m {
                let pred = act.apply(h[i]);
                let e = batch.y[i] - pred;
                loss += 0.5 * e * e;
                coeff[i] = eta * act.derivative(h[i]) * e / mf;
            }
            for i in 0..m {
                if coeff[i] != 0.0 {
                    let row = batch.row(i);
                    for (wk, xk) in student.w.iter_mut().zip(row) {
                        *wk += coeff[i] * xk;
                    }
                }
            }
            loss / mf
        }
        MethodKind::Wn | MethodKind::WnGammaDecay => {
            let zeta = if method == MethodKind::WnGammaDecay {
                zeta
            } else {
                0.0
            };
            let omega = dot(&student.w, &student.w).sqrt().max(SIGMA_FLOOR);
            let root_n = (n as f64).sqrt();
            let gamma = student.gamma;
            let mut loss = 0.0;
            let mut grad_gamma_acc = 0.0;
            let mut w_self = 0.0; // coefficient on w itself
            for i in 0..m {
                let s_pre = root_n * gamma * h[i] / omega;
                let pred = act.apply(s_pre);
                let e = batch.y[i] - pred;
                loss += 0.5 * e * e;
                let d = act.derivative(s_pre) * e;
                coeff[i] = eta * d * gamma * root_n / (omega * mf);
                w_self -= eta * d * s_pre / (omega * omega * mf);
                grad_gamma_acc += d * root_n * h[i] / (omega * mf);
            }
            for wk in student.w.iter_mut() {
                *wk += w_self * *wk;
            }
            for i in 0..m {
                if coeff[i] != 0.0 {
                    let row = batch.row(i);
                    for (wk, xk) in student.w.iter_mut().zip(row) {
                        *wk += coeff[i] * xk;
                    }
                }
            }
            student.gamma += eta_gamma * (grad_gamma_acc - zeta * gamma);
            loss / mf
        }
        MethodKind::Bn => {
            let mu: f64 = h.iter().sum::<f64>() / mf;
            let var: f64 = h.iter().map(|hi| (hi - mu) * (hi - mu)).sum::<f64>() / mf;
            scratch.last_var = var;
            let sigma = var.sqrt().max(SIGMA_FLOOR);
            let gamma = student.gamma;
            let mut loss = 0.0;
            let mut b_acc = 0.0; // sum of e g'(u) h
            let mut grad_gamma = 0.0;
            for i in 0..m {
                let u = gamma * h[i] / sigma;
                let pred = act.apply(u);
                let e = pred - batch.y[i];
                loss += 0.5 * e * e;
                let eg = e * act.derivative(u);
                coeff[i] = eg;
                b_acc += eg * h[i];
                grad_gamma += eg * h[i] / (sigma * mf);
            }
            student.gamma -= eta_gamma * grad_gamma;
            // grad_w = (gamma/(M sigma)) sum_i eg_i x_i
            //        - (gamma B/(M^2 sigma^3)) sum_j (h_j - mu) x_j
            let c1 = -eta * gamma / (mf * sigma);
            let c2 = eta * gamma * b_acc / (mf * mf * sigma * sigma * sigma);
            for i in 0..m {
                let ci = c1 * coeff[i] + c2 * (h[i] - mu);
                if ci != 0.0 {
                    let row = batch.row(i);
                    for (wk, xk) in student.w.iter_mut().zip(row) {
                        *wk += ci * xk;
                    }
                }
            }
            loss / mf
        }
    }
}

fn is_diverged(student: &StudentState, n: usize) -> bool {
    if !student.gamma.is_finite() || student.gamma.abs() > 1e6 {
        return true;
    }
    let mut norm_sq = 0.0;
    for v in &student.w {
        if !v.is_finite() {
            return true;
        }
        norm_sq += v * v;
    }
    norm_sq / n as f64 > 1e12
}

/// One SGD update under the configured method (spec surface; training loops
/// use the in-place variant).
pub fn sgd_step(
    state: &StudentState,
    batch: &Batch,
    cfg: &TeacherStudentConfig,
) -> (StudentState, bool) {
    let mut next = state.clone();
    let mut scratch = Scratch::new(batch.len());
    step_in_place(
        &mut next,
        batch,
        cfg.method,
        cfg.act,
        cfg.zeta,
        cfg.eta,
        cfg.eta,
        &mut scratch,
    );
    let diverged = is_diverged(&next, cfg.n);
    (next, diverged)
}

/// Monte Carlo generalization error on fresh inputs against the noiseless
/// teacher, streaming one sample at a time.
fn generalization_mc(
    student: &StudentState,
    teacher: &[f64],
    method: MethodKind,
    act: ActivationKind,
    n_test: usize,
    rng: &mut ChaCha8Rng,
    bn_sigma_run: Option<f64>,
) -> (f64, f64) {
    let n = teacher.len();
    let scale = 1.0 / (n as f64).sqrt();
    let norm = dot(&student.w, &student.w).sqrt().max(SIGMA_FLOOR);
    let root_n = (n as f64).sqrt();
    let mut x = vec![0.0; n];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_test {
        for v in x.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal) * scale;
        }
        let t = dot(teacher, &x);
        let h = dot(&student.w, &x);
        let pre = match (method, bn_sigma_run) {
            (MethodKind::VanillaSgd, _) => h,
            (MethodKind::Bn, Some(sigma_run)) => student.gamma * h / sigma_run.max(SIGMA_FLOOR),
            _ => root_n * student.gamma * h / norm,
        };
        let err = t - act.apply(pre);
        let sq = err * err;
        sum += sq;
        sum_sq += sq * sq;
    }
    let mean = sum / n_test as f64;
    let var = (sum_sq / n_test as f64 - mean * mean).max(0.0);
    (mean, (var / n_test as f64).sqrt())
}

/// In-span initialization `w0 = X^T c`, scaled to the requested length and
/// flipped so the teacher overlap starts non-negative. Keeping the start
/// inside the row span of the data removes the untrained orthogonal
/// component that normalized methods can never erase.
fn init_in_span(
    x: &[f64],
    p: usize,
    n: usize,
    l0: f64,
    teacher: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for j in 0..p {
        let c: f64 = rng.sample(StandardNormal);
        let row = &x[j * n..(j + 1) * n];
        for (wk, xk) in w.iter_mut().zip(row) {
            *wk += c * xk;
        }
    }
    let norm = dot(&w, &w).sqrt();
    if norm > 0.0 {
        let target = l0 * (n as f64).sqrt();
        for v in &mut w {
            *v *= target / norm;
        }
    }
    if dot(&w, teacher) < 0.0 {
        for v in &mut w {
            *v = -*v;
        }
    }
    w
}

/// Train to the convergence criterion (relative epoch-loss change below
/// 1e-6) or the epoch cap, recording order parameters each epoch.
pub fn run_experiment(cfg: &TeacherStudentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let n = cfg.n;
    let p = cfg.sample_count();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let teacher = make_teacher(n, rng.gen());
    let x = sample_inputs_with(&mut rng, n, p);
    let mut y = vec![0.0; p];
    let noise_sd = cfg.s.sqrt();
    for j in 0..p {
        let t = dot(&teacher, &x[j * n..(j + 1) * n]);
        let s: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sd;
        y[j] = t + s;
    }

    let mut student = match (cfg.method, cfg.act) {
        (MethodKind::VanillaSgd, ActivationKind::Identity) => StudentState {
            w: vec![0.0; n],
            gamma: 1.0,
            beta_shift: 0.0,
        },
        (MethodKind::VanillaSgd, ActivationKind::Relu) => StudentState {
            w: init_in_span(&x, p, n, 0.1, &teacher, &mut rng),
            gamma: 1.0,
            beta_shift: 0.0,
        },
        _ => StudentState {
            w: init_in_span(&x, p, n, 1.0, &teacher, &mut rng),
            gamma: 1.0,
            beta_shift: 0.0,
        },
    };

    let mut order = vec![order_state(&student, &teacher, cfg.method)];
    let mut times = vec![0.0];
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut diverged = false;
    let mut quiet_epochs = 0usize;
    // Running estimate of the batch variance (standard BN inference stats).
    let mut sigma_run: Option<f64> = None;
    let mut eta = cfg.eta;
    let mut indices: Vec<usize> = (0..p).collect();
    let mut scratch = Scratch::new(cfg.m);
    let mut batch_x = vec![0.0; cfg.m * n];
    let mut batch_y = vec![0.0; cfg.m];

    'training: for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_var = 0.0;
        let mut batches = 0usize;
        let mut start = 0;
        while start + cfg.m <= p {
            let members = &indices[start..start + cfg.m];
            for (slot, &j) in members.iter().enumerate() {
                batch_x[slot * n..(slot + 1) * n].copy_from_slice(&x[j * n..(j + 1) * n]);
                batch_y[slot] = y[j];
            }
            let batch = Batch {
                x: &batch_x,
                y: &batch_y,
                n,
            };
            epoch_loss += step_in_place(
                &mut student,
                &batch,
                cfg.method,
                cfg.act,
                cfg.zeta,
                eta,
                eta,
                &mut scratch,
            );
            epoch_var += scratch.last_var;
            batches += 1;
            start += cfg.m;
        }
        if batches == 0 {
            return Err(Error::Config(format!(
                "batch size {} exceeds sample count {p}",
                cfg.m
            )));
        }
        let loss = epoch_loss / batches as f64;
        if is_diverged(&student, n) {
            diverged = true;
            break 'training;
        }
        if cfg.method == MethodKind::Bn {
            sigma_run = Some((epoch_var / batches as f64).sqrt());
        }
        order.push(order_state_scaled(&student, &teacher, cfg.method, sigma_run));
        times.push((epoch + 1) as f64 * cfg.alpha);
        // Single sub-threshold epochs happen by chance in noisy losses;
        // require a short run of them before declaring convergence.
        let quiet = losses
            .last()
            .map(|prev: &f64| (loss - prev).abs() <= 1e-6 * prev.abs().max(1e-12))
            .unwrap_or(false);
        quiet_epochs = if quiet { quiet_epochs + 1 } else { 0 };
        losses.push(loss);
        if quiet_epochs >= 3 {
            break 'training;
        }
        if epoch >= cfg.eta_hold {
            eta *= cfg.eta_decay;
        }
    }

    let final_state = order.last().copied().unwrap();
    let gen_error = if diverged {
        f64::NAN
    } else {
        gen_integral(
            final_state.q,
            final_state.r,
            ActivationKind::Identity,
            cfg.act,
            GenMode::Closed,
        )?
    };
    let (gen_error_mc, gen_error_mc_se) = if diverged {
        (f64::NAN, f64::NAN)
    } else {
        generalization_mc(
            &student,
            &teacher,
            cfg.method,
            cfg.act,
            cfg.n_test,
            &mut rng,
            sigma_run,
        )
    };

    Ok(RunResult {
        order_trace: Trajectory {
            times,
            states: order,
        },
        train_loss_trace: losses,
        gen_error,
        gen_error_mc,
        gen_error_mc_se,
        diverged,
    })
}

/// Parameters for online (fresh sample per step) learning, the protocol the
/// order-parameter ODEs describe.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct OnlineParams {
    pub n: usize,
    pub eta: f64,
    pub zeta: f64,
    /// Teacher output noise variance; the ODE comparison uses 0.
    pub s: f64,
    pub act: ActivationKind,
    pub method: MethodKind,
    pub seed: u64,
    pub t_end: f64,
    /// Record order parameters every this many steps.
    pub record_every: usize,
    /// Scale the gamma learning rate by 1/N so that the scale parameter
    /// evolves on the same t = j/N clock as the overlap and length, the
    /// convention of the order-parameter differential equations.
    #[serde(default)]
    pub slow_gamma: bool,
}

/// Online learning with single-sample updates; time is `t = j/N`.
pub fn run_online(params: &OnlineParams) -> Result<RunResult> {
    if params.n < 64 {
        return Err(Error::Config("N >= 64 required".into()));
    }
    if params.method == MethodKind::Bn {
        return Err(Error::Config(
            "online learning uses single-sample updates; BN needs M >= 2".into(),
        ));
    }
    if !(params.t_end > 0.0) {
        return Err(Error::Config("t_end must be positive".into()));
    }
    let n = params.n;
    let steps = (params.t_end * n as f64).round() as usize;
    let every = params.record_every.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let teacher = make_teacher(n, rng.gen());
    let mut student = StudentState {
        w: {
            let mut w: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let norm_sq = dot(&w, &w);
            let scale = (n as f64 / norm_sq).sqrt();
            for v in &mut w {
                *v *= scale;
            }
            if dot(&w, &teacher) < 0.0 {
                for v in &mut w {
                    *v = -*v;
                }
            }
            w
        },
        gamma: 1.0,
        beta_shift: 0.0,
    };

    let scale = 1.0 / (n as f64).sqrt();
    let noise_sd = params.s.sqrt();
    let eta_gamma = if params.slow_gamma {
        params.eta / n as f64
    } else {
        params.eta
    };
    let mut x = vec![0.0; n];
    let mut scratch = Scratch::new(1);
    let mut order = vec![order_state(&student, &teacher, params.method)];
    let mut times = vec![0.0];
    let mut losses = Vec::new();
    let mut diverged = false;

    for j in 0..steps {
        for v in x.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal) * scale;
        }
        let t = dot(&teacher, &x);
        let label = params.act.apply(t)
            + if noise_sd > 0.0 {
                rng.sample::<f64, _>(StandardNormal) * noise_sd
            } else {
                0.0
            };
        let batch = Batch {
            x: &x,
            y: std::slice::from_ref(&label),
            n,
        };
        let loss = step_in_place(
            &mut student,
            &batch,
            params.method,
            params.act,
            params.zeta,
            params.eta,
            eta_gamma,
            &mut scratch,
        );
        if is_diverged(&student, n) {
            diverged = true;
            break;
        }
        if (j + 1) % every == 0 {
            order.push(order_state(&student, &teacher, params.method));
            times.push((j + 1) as f64 / n as f64);
            losses.push(loss);
        }
    }

    let final_state = order.last().copied().unwrap();
    let gen_error = if diverged {
        f64::NAN
    } else {
        gen_integral(
            final_state.q,
            final_state.r,
            ActivationKind::Identity,
            params.act,
            GenMode::Closed,
        )?
    };

    Ok(RunResult {
        order_trace: Trajectory {
            times,
            states: order,
        },
        train_loss_trace: losses,
        gen_error,
        gen_error_mc: f64::NAN,
        gen_error_mc_se: f64::NAN,
        diverged,
    })
}
