//! Bounded Nelder-Mead simplex minimization.

/// Result of a Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub xmin: Vec<f64>,
    pub fmin: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` inside the axis-aligned box `[lo_i, hi_i]`.
///
/// Standard reflection/expansion/contraction/shrink moves; candidate points
/// are clamped to the box. Convergence on the spread of function values and
/// on the simplex diameter.
pub fn nelder_mead_bounded(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
    tol: f64,
) -> NelderMeadResult {
    let n = x0.len();
    assert!(n >= 1 && lo.len() == n && hi.len() == n);
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };

    // Initial simplex: x0 plus per-axis steps sized to the box.
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut base = x0.to_vec();
    clamp(&mut base);
    simplex.push(base.clone());
    for i in 0..n {
        let mut v = base.clone();
        let span = (hi[i] - lo[i]).abs();
        let step = (0.05 * span).max(1e-8);
        v[i] = if v[i] + step <= hi[i] { v[i] + step } else { v[i] - step };
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;

    for it in 0..max_iter {
        iterations = it + 1;
        // order ascending by f
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fv[a].partial_cmp(&fv[b]).unwrap_or(std::cmp::Ordering::Equal));
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let fordered: Vec<f64> = idx.iter().map(|&i| fv[i]).collect();
        simplex = ordered;
        fv = fordered;

        let diam = (1..=n)
            .map(|i| {
                (0..n)
                    .map(|d| (simplex[i][d] - simplex[0][d]).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if (fv[n] - fv[0]).abs() <= tol && diam <= tol.sqrt() * 1e-2 + tol {
            converged = true;
            break;
        }

        // centroid of all but worst
        let mut centroid = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for d in 0..n {
                centroid[d] += v[d] / n as f64;
            }
        }

        let mut reflected: Vec<f64> = (0..n)
            .map(|d| centroid[d] + alpha * (centroid[d] - simplex[n][d]))
            .collect();
        clamp(&mut reflected);
        let fr = f(&reflected);

        if fr < fv[0] {
            let mut expanded: Vec<f64> = (0..n)
                .map(|d| centroid[d] + gamma * (reflected[d] - centroid[d]))
                .collect();
            clamp(&mut expanded);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                fv[n] = fe;
            } else {
                simplex[n] = reflected;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            simplex[n] = reflected;
            fv[n] = fr;
        } else {
            let mut contracted: Vec<f64> = (0..n)
                .map(|d| centroid[d] + rho * (simplex[n][d] - centroid[d]))
                .collect();
            clamp(&mut contracted);
            let fc = f(&contracted);
            if fc < fv[n] {
                simplex[n] = contracted;
                fv[n] = fc;
            } else {
                // shrink toward best
                for i in 1..=n {
                    for d in 0..n {
                        simplex[i][d] = simplex[0][d] + sigma * (simplex[i][d] - simplex[0][d]);
                    }
                    fv[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if fv[i] < fv[best] {
            best = i;
        }
    }
    NelderMeadResult {
        xmin: simplex[best].clone(),
        fmin: fv[best],
        iterations,
        converged,
    }
}

/// Golden-section minimization of a unimodal function on [lo, hi].
pub fn golden_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// A few rounds of shrinking coordinate-wise golden-section polish; tightens
/// a Nelder-Mead minimum on smooth low-dimensional objectives.
pub fn coordinate_polish(
    f: &dyn Fn(&[f64]) -> f64,
    x: &mut Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    rounds: usize,
    initial_step: f64,
) -> f64 {
    let n = x.len();
    let mut fx = f(x);
    let mut step = initial_step;
    for _ in 0..rounds {
        for d in 0..n {
            loop {
                let mut improved = false;
                for dir in [-1.0, 1.0] {
                    let mut y = x.clone();
                    y[d] = (y[d] + dir * step).clamp(lo[d], hi[d]);
                    let fy = f(&y);
                    if fy < fx {
                        *x = y;
                        fx = fy;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
        }
        step *= 0.25;
    }
    fx
}
