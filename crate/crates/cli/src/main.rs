//! Experiment harness for the batch-normalization theory laboratory.
//!
//! Every subcommand reads a JSON config, validates it, runs the experiment,
//! and writes CSV/JSON outputs plus a manifest that fully determines
//! re-execution. Exit codes: 0 success, 1 config error, 2 a required run
//! diverged.

mod config;
mod output;

use anyhow::Result;
use bnlab_core::dynamics::{self, DynamicsParams};
use bnlab_core::sgd::{self, OnlineParams, TeacherStudentConfig};
use bnlab_core::statmech::GenCurvePoint;
use bnlab_core::sweeps;
use bnlab_core::{MethodKind, OrderState};
use clap::Parser;
use config::{load_config, validate_config, CurveSpec, ExperimentConfig, FigureConfig, SimMode};
use output::{curve_csv, run_csv, sweep_as_curve, sweep_csv, trajectory_csv, write_file};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "bnlab", version, about = "Batch-normalization theory laboratory")]
struct Cli {
    /// Experiment to run; must match the config's "experiment" tag.
    command: String,
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (the BNLAB_OUT environment variable overrides this).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed override; falls back to the config's seed, then 42.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps (0 = library default).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    seed: u64,
    jobs: usize,
    config: &'a ExperimentConfig,
    outputs: Vec<String>,
}

struct RunOutputs {
    files: Vec<String>,
    diverged: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = match std::env::var_os("BNLAB_OUT") {
        Some(dir) => PathBuf::from(dir),
        None => cli.out.clone(),
    };

    let cfg = match load_config(&cli.config) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(1);
        }
    };
    if cfg.kind() != cli.command {
        eprintln!(
            "config error: config is for '{}' but the command is '{}'",
            cfg.kind(),
            cli.command
        );
        return ExitCode::from(1);
    }
    let diags = validate_config(&cfg);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("config error: {d}");
        }
        return ExitCode::from(1);
    }

    let seed = cli.seed.or(cfg.seed()).unwrap_or(42);

    let run = || -> Result<RunOutputs> {
        match &cfg {
            ExperimentConfig::Dynamics(c) => run_dynamics(c, &out_dir),
            ExperimentConfig::Simulate(c) => run_simulate(c, seed, &out_dir),
            ExperimentConfig::Statmech(c) => run_statmech(c, &out_dir),
            ExperimentConfig::Decompose(c) => run_decompose(c, seed, &out_dir),
            ExperimentConfig::Figure1a(c) => run_figure(c, false, seed, &out_dir),
            ExperimentConfig::Figure1b(c) => run_figure(c, true, seed, &out_dir),
        }
    };

    let result = if cli.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build()
            .expect("thread pool");
        pool.install(run)
    } else {
        run()
    };

    match result {
        Ok(outputs) => {
            let manifest = Manifest {
                command: cfg.kind(),
                tool_version: env!("CARGO_PKG_VERSION"),
                seed,
                jobs: cli.jobs,
                config: &cfg,
                outputs: outputs.files.clone(),
            };
            let text = serde_json::to_string_pretty(&manifest).expect("manifest json");
            if let Err(e) = write_file(&out_dir, "manifest.json", &format!("{text}\n")) {
                eprintln!("cannot write manifest: {e}");
                return ExitCode::from(1);
            }
            if outputs.diverged {
                eprintln!("a required run diverged");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run_dynamics(c: &config::DynamicsConfig, out: &Path) -> Result<RunOutputs> {
    let params = DynamicsParams::new(c.eta, c.zeta, c.activation, c.method)?;
    let initial = OrderState::new(c.initial[0], c.initial[1], c.initial[2])?;
    let integration = dynamics::integrate(&initial, &params, c.t_end, c.dt)?;
    let analysis = dynamics::lr_analysis(&params, c.l0)?;
    let mut files = Vec::new();
    write_file(
        out,
        "trajectory_dynamics.csv",
        &trajectory_csv(&integration.trajectory),
    )?;
    files.push("trajectory_dynamics.csv".into());
    let analysis_json = serde_json::to_string_pretty(&analysis)?;
    write_file(out, "lr_analysis.json", &format!("{analysis_json}\n"))?;
    files.push("lr_analysis.json".into());
    Ok(RunOutputs {
        files,
        diverged: integration.diverged,
    })
}

#[derive(Serialize)]
struct SimulateResult {
    gen_error: f64,
    gen_error_mc: f64,
    gen_error_mc_se: f64,
    diverged: bool,
    epochs_run: usize,
}

fn run_simulate(c: &config::SimulateConfig, seed: u64, out: &Path) -> Result<RunOutputs> {
    let mut files = Vec::new();
    let (result, trace_name) = match &c.mode {
        SimMode::Offline => {
            let cfg = TeacherStudentConfig {
                n: c.n,
                m: c.m,
                alpha: c.alpha,
                s: c.s,
                zeta: c.zeta,
                eta: c.eta,
                eta_decay: c.eta_decay,
                eta_hold: c.eta_hold,
                act: c.activation,
                method: c.method,
                seed,
                epochs: c.epochs,
                n_test: 65_536,
            };
            let r = sgd::run_experiment(&cfg)?;
            write_file(
                out,
                "run_simulate.csv",
                &run_csv(&r.order_trace, &r.train_loss_trace),
            )?;
            (r, "run_simulate.csv")
        }
        SimMode::Online { t_end, record_every } => {
            let params = OnlineParams {
                n: c.n,
                eta: c.eta,
                zeta: c.zeta,
                s: c.s,
                act: c.activation,
                method: c.method,
                seed,
                t_end: *t_end,
                record_every: *record_every,
                slow_gamma: c.slow_gamma,
            };
            let r = sgd::run_online(&params)?;
            write_file(out, "trajectory_online.csv", &trajectory_csv(&r.order_trace))?;
            (r, "trajectory_online.csv")
        }
    };
    files.push(trace_name.into());
    let summary = SimulateResult {
        gen_error: result.gen_error,
        gen_error_mc: result.gen_error_mc,
        gen_error_mc_se: result.gen_error_mc_se,
        diverged: result.diverged,
        epochs_run: result.train_loss_trace.len(),
    };
    let json = serde_json::to_string_pretty(&summary)?;
    write_file(out, "result_simulate.json", &format!("{json}\n"))?;
    files.push("result_simulate.json".into());
    Ok(RunOutputs {
        files,
        diverged: result.diverged,
    })
}

fn curve_name(spec: &CurveSpec) -> String {
    match spec {
        CurveSpec::IdOrd => "curve_id_ord.csv".into(),
        CurveSpec::ReluOrd => "curve_relu_ord.csv".into(),
        CurveSpec::ReluLowerBound => "curve_relu_lower_bound.csv".into(),
        CurveSpec::IdWn { zeta } => format!("curve_id_wn_z{zeta}.csv"),
    }
}

fn run_statmech(c: &config::StatmechConfig, out: &Path) -> Result<RunOutputs> {
    let mut files = Vec::new();
    for spec in &c.curves {
        let points: Vec<GenCurvePoint> = match spec {
            CurveSpec::IdOrd => sweeps::curve_id_ord(&c.alpha_grid, c.s)?,
            CurveSpec::ReluOrd => sweeps::curve_relu_ord(&c.alpha_grid, c.s)?,
            CurveSpec::ReluLowerBound => sweeps::curve_relu_ord(&c.alpha_grid, 0.0)?,
            CurveSpec::IdWn { zeta } => sweeps::curve_id_wn(&c.alpha_grid, *zeta, c.s)?,
        };
        let name = curve_name(spec);
        write_file(out, &name, &curve_csv(&points))?;
        files.push(name);
    }
    Ok(RunOutputs {
        files,
        diverged: false,
    })
}

fn run_decompose(c: &config::DecomposeConfig, seed: u64, out: &Path) -> Result<RunOutputs> {
    let report = bnlab_core::decompose::synthetic_audit(
        c.n,
        c.p,
        c.gamma,
        c.beta_shift,
        c.m,
        c.n_mc,
        seed,
        config::convention_of(c),
    )?;
    let json = serde_json::to_string_pretty(&report)?;
    write_file(out, "decompose_report.json", &format!("{json}\n"))?;
    Ok(RunOutputs {
        files: vec!["decompose_report.json".into()],
        diverged: false,
    })
}

fn run_figure(c: &FigureConfig, figure_b: bool, seed: u64, out: &Path) -> Result<RunOutputs> {
    let resolved = c.resolve(figure_b, seed);
    let mut files = Vec::new();
    let mut diverged = false;

    if !figure_b {
        let m = resolved.base.m as f64;
        let theory: [(&str, Vec<GenCurvePoint>); 3] = [
            (
                "curve_sgd_id_theory.csv",
                sweeps::curve_id_ord(&resolved.alphas, c.s)?,
            ),
            (
                "curve_wn_zeta_half_m.csv",
                sweeps::curve_id_wn(&resolved.alphas, 1.0 / (2.0 * m), c.s)?,
            ),
            (
                "curve_wn_zeta_025.csv",
                sweeps::curve_id_wn(&resolved.alphas, 0.25, c.s)?,
            ),
        ];
        for (name, points) in &theory {
            write_file(out, name, &curve_csv(points))?;
            files.push(name.to_string());
        }

        let bn = sweeps::alpha_sweep(&resolved.base, &resolved.alphas, resolved.replicates)?;
        diverged |= bn.iter().any(|p| p.diverged);
        write_file(out, "sweep_bn_sim.csv", &sweep_csv(&bn))?;
        files.push("sweep_bn_sim.csv".into());
        write_file(out, "curve_bn_sim.csv", &curve_csv(&sweep_as_curve(&bn, c.s)))?;
        files.push("curve_bn_sim.csv".into());
    } else {
        let theory: [(&str, Vec<GenCurvePoint>); 2] = [
            (
                "curve_relu_theory.csv",
                sweeps::curve_relu_ord(&resolved.alphas, c.s)?,
            ),
            (
                "curve_relu_lower_bound.csv",
                sweeps::curve_relu_ord(&resolved.alphas, 0.0)?,
            ),
        ];
        for (name, points) in &theory {
            write_file(out, name, &curve_csv(points))?;
            files.push(name.to_string());
        }

        let bn = sweeps::alpha_sweep(&resolved.base, &resolved.alphas, resolved.replicates)?;
        diverged |= bn.iter().any(|p| p.diverged);
        write_file(out, "sweep_bn_sim.csv", &sweep_csv(&bn))?;
        files.push("sweep_bn_sim.csv".into());
        write_file(out, "curve_bn_sim.csv", &curve_csv(&sweep_as_curve(&bn, c.s)))?;
        files.push("curve_bn_sim.csv".into());

        let mut wn_base = resolved.base.clone();
        wn_base.method = MethodKind::WnGammaDecay;
        wn_base.zeta = 1.0 / (4.0 * resolved.base.m as f64);
        wn_base.seed = seed.wrapping_add(1_000_003);
        let wn = sweeps::alpha_sweep(&wn_base, &resolved.alphas, resolved.replicates)?;
        diverged |= wn.iter().any(|p| p.diverged);
        write_file(out, "sweep_wn_decay_sim.csv", &sweep_csv(&wn))?;
        files.push("sweep_wn_decay_sim.csv".into());
        write_file(
            out,
            "curve_wn_decay_sim.csv",
            &curve_csv(&sweep_as_curve(&wn, c.s)),
        )?;
        files.push("curve_wn_decay_sim.csv".into());
    }

    Ok(RunOutputs { files, diverged })
}
