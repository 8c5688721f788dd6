//! Deterministic CSV/JSON emission.
//!
//! Floats are serialized with 17 significant digits so that every value
//! round-trips bit-exactly and repeated runs produce byte-identical files.

use bnlab_core::dynamics::Trajectory;
use bnlab_core::statmech::GenCurvePoint;
use bnlab_core::sweeps::SweepPoint;
use bnlab_core::MethodKind;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn method_name(m: MethodKind) -> &'static str {
    match m {
        MethodKind::Bn => "bn",
        MethodKind::Wn => "wn",
        MethodKind::WnGammaDecay => "wn_gamma_decay",
        MethodKind::VanillaSgd => "vanilla_sgd",
    }
}

pub fn parse_method(s: &str) -> Option<MethodKind> {
    Some(match s {
        "bn" => MethodKind::Bn,
        "wn" => MethodKind::Wn,
        "wn_gamma_decay" => MethodKind::WnGammaDecay,
        "vanilla_sgd" => MethodKind::VanillaSgd,
        _ => return None,
    })
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut f = fs::File::create(&path)?;
    f.write_all(contents.as_bytes())?;
    Ok(path)
}

/// curve CSV: one GenCurvePoint per row.
pub fn curve_csv(points: &[GenCurvePoint]) -> String {
    let mut out = String::from("alpha,eps,method,s,zeta\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(p.alpha),
            fmt_f64(p.eps),
            method_name(p.method),
            fmt_f64(p.s),
            fmt_f64(p.zeta)
        ));
    }
    out
}

pub fn parse_curve_csv(text: &str) -> Option<Vec<GenCurvePoint>> {
    let mut lines = text.lines();
    if lines.next()? != "alpha,eps,method,s,zeta" {
        return None;
    }
    let mut points = Vec::new();
    for line in lines {
        let mut it = line.split(',');
        points.push(GenCurvePoint {
            alpha: it.next()?.parse().ok()?,
            eps: it.next()?.parse().ok()?,
            method: parse_method(it.next()?)?,
            s: it.next()?.parse().ok()?,
            zeta: it.next()?.parse().ok()?,
        });
        if it.next().is_some() {
            return None;
        }
    }
    Some(points)
}

/// sweep CSV: simulated points with their theory reference.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("alpha,gen_error_sim,gen_error_theory,method,m,zeta,seed\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(p.alpha),
            fmt_f64(p.gen_error_sim),
            fmt_f64(p.gen_error_theory),
            method_name(p.method),
            p.m,
            fmt_f64(p.zeta),
            p.seed
        ));
    }
    out
}

/// Sweep points re-expressed as a plain curve (eps = simulated error).
pub fn sweep_as_curve(points: &[SweepPoint], s: f64) -> Vec<GenCurvePoint> {
    points
        .iter()
        .map(|p| GenCurvePoint {
            alpha: p.alpha,
            eps: p.gen_error_sim,
            method: p.method,
            s,
            zeta: p.zeta,
        })
        .collect()
}

/// trajectory CSV: (t, Q, R, L).
pub fn trajectory_csv(t: &Trajectory) -> String {
    let mut out = String::from("t,Q,R,L\n");
    for (time, state) in t.times.iter().zip(&t.states) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(*time),
            fmt_f64(state.q),
            fmt_f64(state.r),
            fmt_f64(state.l)
        ));
    }
    out
}

pub fn parse_trajectory_csv(text: &str) -> Option<Trajectory> {
    let mut lines = text.lines();
    if lines.next()? != "t,Q,R,L" {
        return None;
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for line in lines {
        let mut it = line.split(',');
        times.push(it.next()?.parse().ok()?);
        states.push(bnlab_core::OrderState {
            q: it.next()?.parse().ok()?,
            r: it.next()?.parse().ok()?,
            l: it.next()?.parse().ok()?,
        });
    }
    Some(Trajectory { times, states })
}

/// per-run CSV: (epoch, Q, R, L, train_loss).
pub fn run_csv(t: &Trajectory, losses: &[f64]) -> String {
    let mut out = String::from("epoch,Q,R,L,train_loss\n");
    for (i, state) in t.states.iter().enumerate() {
        // losses are recorded after each epoch; epoch 0 is the initial state
        let loss = if i == 0 {
            f64::NAN
        } else {
            losses.get(i - 1).copied().unwrap_or(f64::NAN)
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i,
            fmt_f64(state.q),
            fmt_f64(state.r),
            fmt_f64(state.l),
            fmt_f64(loss)
        ));
    }
    out
}
