//! Experiment configuration schemas and validation.

use bnlab_core::decompose::{Convention, LossKind};
use bnlab_core::kernels::ActivationKind;
use bnlab_core::sgd::TeacherStudentConfig;
use bnlab_core::sweeps::{default_alpha_grid_linear, default_alpha_grid_relu};
use bnlab_core::MethodKind;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Top-level config file, tagged by experiment kind; the tag must match the
/// CLI subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Dynamics(DynamicsConfig),
    Simulate(SimulateConfig),
    Statmech(StatmechConfig),
    Decompose(DecomposeConfig),
    Figure1a(FigureConfig),
    Figure1b(FigureConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Dynamics(_) => "dynamics",
            ExperimentConfig::Simulate(_) => "simulate",
            ExperimentConfig::Statmech(_) => "statmech",
            ExperimentConfig::Decompose(_) => "decompose",
            ExperimentConfig::Figure1a(_) => "figure1a",
            ExperimentConfig::Figure1b(_) => "figure1b",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ExperimentConfig::Dynamics(_) => None,
            ExperimentConfig::Simulate(c) => c.seed,
            ExperimentConfig::Statmech(_) => None,
            ExperimentConfig::Decompose(c) => c.seed,
            ExperimentConfig::Figure1a(c) | ExperimentConfig::Figure1b(c) => c.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub method: MethodKind,
    pub activation: ActivationKind,
    pub eta: f64,
    #[serde(default)]
    pub zeta: f64,
    /// Initial order parameters [Q, R, L].
    pub initial: [f64; 3],
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_l0")]
    pub l0: f64,
}

fn default_dt() -> f64 {
    0.01
}

fn default_l0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Offline,
    Online { t_end: f64, record_every: usize },
}

impl Default for SimMode {
    fn default() -> Self {
        SimMode::Offline
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub method: MethodKind,
    pub activation: ActivationKind,
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default)]
    pub zeta: f64,
    pub eta: f64,
    #[serde(default = "default_one")]
    pub eta_decay: f64,
    #[serde(default)]
    pub eta_hold: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub mode: SimMode,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub slow_gamma: bool,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_s() -> f64 {
    0.25
}

fn default_one() -> f64 {
    1.0
}

fn default_epochs() -> usize {
    5000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    IdOrd,
    ReluOrd,
    ReluLowerBound,
    IdWn { zeta: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatmechConfig {
    #[serde(default = "default_alpha_grid_linear")]
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_s")]
    pub s: f64,
    pub curves: Vec<CurveSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    pub loss: LossKind,
    #[serde(default = "default_true")]
    pub include_mean: bool,
    #[serde(default = "default_one")]
    pub gamma: f64,
    #[serde(default)]
    pub beta_shift: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_n_mc() -> usize {
    20_000
}

fn default_true() -> bool {
    true
}

/// Shared sweep configuration for the figure recipes. Defaults differ per
/// figure (batch size, grid) and are filled by [`FigureConfig::resolve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureConfig {
    #[serde(default)]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub eta_decay: Option<f64>,
    #[serde(default)]
    pub eta_hold: Option<usize>,
    #[serde(default)]
    pub epochs: Option<usize>,
    /// Independent runs averaged per sweep point.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_n() -> usize {
    1024
}

fn default_replicates() -> usize {
    4
}

/// Fully resolved sweep parameters for one simulated curve.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSweep {
    pub base: TeacherStudentConfig,
    pub alphas: Vec<f64>,
    pub replicates: usize,
}

impl FigureConfig {
    /// Tuned defaults. The hold length of the constant-eta phase is the
    /// calibrated finite-training budget at which the BN runs traverse the
    /// gamma-decay correspondence; per-epoch progress scales with P/M, so
    /// the M = 16 ReLU figure uses half the M = 32 linear hold.
    pub fn resolve(&self, figure_b: bool, seed: u64) -> ResolvedSweep {
        let m = self.m.unwrap_or(if figure_b { 16 } else { 32 });
        let alphas = self.alpha_grid.clone().unwrap_or_else(|| {
            if figure_b {
                default_alpha_grid_relu()
            } else {
                default_alpha_grid_linear()
            }
        });
        let (eta_decay, eta_hold, epochs) = if figure_b {
            (0.997, 940, 2850)
        } else {
            (0.9985, 1880, 4700)
        };
        let base = TeacherStudentConfig {
            n: self.n,
            m,
            alpha: 1.0,
            s: self.s,
            zeta: 0.0,
            eta: self.eta.unwrap_or(0.3),
            eta_decay: self.eta_decay.unwrap_or(eta_decay),
            eta_hold: self.eta_hold.unwrap_or(eta_hold),
            act: if figure_b {
                ActivationKind::Relu
            } else {
                ActivationKind::Identity
            },
            method: MethodKind::Bn,
            seed,
            epochs: self.epochs.unwrap_or(epochs),
            n_test: 65_536,
        };
        ResolvedSweep {
            base,
            alphas,
            replicates: self.replicates.max(1),
        }
    }
}

/// Load a config file, returning a single parse diagnostic on failure.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("config parse error: {e}"))
}

/// All semantic violations in a config, without running anything.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<String> {
    let mut diags = Vec::new();
    match cfg {
        ExperimentConfig::Dynamics(c) => {
            if !(c.eta > 0.0) {
                diags.push("eta must be positive".into());
            }
            if c.zeta < 0.0 {
                diags.push("zeta must be non-negative".into());
            }
            if !(c.dt > 0.0 && c.t_end > 0.0) {
                diags.push("t_end and dt must be positive".into());
            }
            let [q, r, l] = c.initial;
            if !(q > 0.0 && l > 0.0 && (-1.0..=1.0).contains(&r)) {
                diags.push("initial state needs Q > 0, L > 0, R in [-1, 1]".into());
            }
        }
        ExperimentConfig::Simulate(c) => {
            if c.method == MethodKind::Bn && c.m < 2 {
                diags.push("M >= 2 required for batch normalization".into());
            }
            if c.m < 1 {
                diags.push("M >= 1 required".into());
            }
            if c.n < 64 {
                diags.push("N >= 64 required".into());
            }
            if !(c.alpha > 0.0) {
                diags.push("alpha must be positive".into());
            }
            if c.s < 0.0 {
                diags.push("S must be non-negative".into());
            }
            if !(c.eta > 0.0) {
                diags.push("eta must be positive".into());
            }
        }
        ExperimentConfig::Statmech(c) => {
            if c.alpha_grid.is_empty() {
                diags.push("alpha grid must not be empty".into());
            }
            for spec in &c.curves {
                match spec {
                    CurveSpec::IdOrd => {
                        if c.alpha_grid.iter().any(|a| *a == 1.0) {
                            diags.push(
                                "the linear vanilla-SGD curve diverges at alpha = 1".into(),
                            );
                        }
                    }
                    CurveSpec::ReluOrd | CurveSpec::ReluLowerBound => {
                        if c.alpha_grid.iter().any(|a| *a >= 2.0) {
                            diags.push("the ReLU curve diverges at alpha = 2".into());
                        }
                    }
                    CurveSpec::IdWn { zeta } => {
                        if !(*zeta > 0.0) {
                            diags.push("the WN+gamma-decay curve needs zeta > 0".into());
                        }
                    }
                }
            }
            if c.curves.is_empty() {
                diags.push("at least one curve must be requested".into());
            }
        }
        ExperimentConfig::Decompose(c) => {
            if c.m < 2 {
                diags.push("M >= 2 required".into());
            }
            if c.p < 1000 {
                diags.push("P >= 1000 required for population statistics".into());
            }
            if c.n == 0 {
                diags.push("N must be positive".into());
            }
            if c.n_mc == 0 {
                diags.push("n_mc must be positive".into());
            }
        }
        ExperimentConfig::Figure1a(c) | ExperimentConfig::Figure1b(c) => {
            let figure_b = matches!(cfg, ExperimentConfig::Figure1b(_));
            if let Some(grid) = &c.alpha_grid {
                if grid.is_empty() {
                    diags.push("alpha grid must not be empty".into());
                }
                for &a in grid {
                    if !(a > 0.0) {
                        diags.push(format!("alpha {a} must be positive"));
                    } else if !figure_b && (0.95..=1.05).contains(&a) {
                        diags.push(format!(
                            "alpha {a} lies inside the excluded window [0.95, 1.05] around the linear pole"
                        ));
                    } else if figure_b && a >= 1.9 {
                        diags.push(format!(
                            "alpha {a} lies too close to the ReLU pole at alpha = 2"
                        ));
                    }
                }
            }
            if let Some(m) = c.m {
                if m < 2 {
                    diags.push("M >= 2 required for batch normalization".into());
                }
            }
            if c.n < 64 {
                diags.push("N >= 64 required".into());
            }
            if c.replicates == 0 {
                diags.push("replicates must be at least 1".into());
            }
        }
    }
    diags
}

pub fn convention_of(c: &DecomposeConfig) -> Convention {
    Convention {
        loss: c.loss,
        include_mean: c.include_mean,
    }
}
