//! Gaussian quadrature rules and Gaussian-weighted integration.
//!
//! Two kinds of rules live here:
//!
//! - [`HermiteRule`]: Gauss-Hermite nodes rescaled to the standard normal
//!   measure, exact for polynomial integrands. Used for smooth (identity
//!   activation) expectations.
//! - [`GaussianRule`]: composite Gauss-Legendre panels against the normal
//!   density on a finite window, with explicit split points. ReLU-type
//!   integrands have kinks along lines; splitting the 1-D inner integrals at
//!   the kink restores spectral convergence, which plain tensor
//!   Gauss-Hermite does not achieve for such integrands.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-like initial guess.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Hermite nodes and weights for the weight e^{-x^2}, largest root
/// first within each half; symmetric.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    let mut z = 0.0;
    let nf = n as f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Orthonormal Hermite recurrence.
            let mut p1 = PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Hermite rule transformed to expectations under N(0, 1):
/// E[f(Z)] ~= sum_i w_i f(z_i), with sum w_i = 1.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    pub fn new(order: usize) -> Self {
        let (x, w) = gauss_hermite(order);
        let nodes = x.iter().map(|&xi| std::f64::consts::SQRT_2 * xi).collect();
        let weights = w.iter().map(|&wi| wi / PI.sqrt()).collect();
        HermiteRule { nodes, weights }
    }

    /// E[f(Z)], Z ~ N(0,1).
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }

    /// E[f(Z1, Z2)] over independent standard normals, tensor product.
    pub fn expect2(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (&z1, &w1) in self.nodes.iter().zip(&self.weights) {
            let mut inner = 0.0;
            for (&z2, &w2) in self.nodes.iter().zip(&self.weights) {
                inner += w2 * f(z1, z2);
            }
            acc += w1 * inner;
        }
        acc
    }
}

/// Composite Gauss-Legendre integration of f against the standard normal
/// density on [a, b], with the window clamped to [-zmax, zmax].
#[derive(Debug, Clone)]
pub struct GaussianRule {
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
    panel_width: f64,
    zmax: f64,
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

impl Default for GaussianRule {
    fn default() -> Self {
        GaussianRule::new(32, 2.0, 8.5)
    }
}

impl GaussianRule {
    pub fn new(gl_order: usize, panel_width: f64, zmax: f64) -> Self {
        let (n, w) = gauss_legendre(gl_order);
        GaussianRule {
            gl_nodes: n,
            gl_weights: w,
            panel_width,
            zmax,
        }
    }

    /// integral_a^b f(z) phi(z) dz; the integrand must be smooth on [a, b].
    pub fn integral(&self, a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
        let a = a.max(-self.zmax);
        let b = b.min(self.zmax);
        if a >= b {
            return 0.0;
        }
        let n_panels = ((b - a) / self.panel_width).ceil() as usize;
        let h = (b - a) / n_panels as f64;
        let mut acc = 0.0;
        for p in 0..n_panels {
            let lo = a + p as f64 * h;
            let half = 0.5 * h;
            let mid = lo + half;
            for (&xi, &wi) in self.gl_nodes.iter().zip(&self.gl_weights) {
                let z = mid + half * xi;
                acc += wi * half * f(z) * normal_pdf(z);
            }
        }
        acc
    }

    /// Same as [`integral`](Self::integral), but the integrand may have kinks
    /// at the given interior points; the range is split there.
    pub fn integral_split(
        &self,
        a: f64,
        b: f64,
        kinks: &[f64],
        f: &dyn Fn(f64) -> f64,
    ) -> f64 {
        let mut cuts: Vec<f64> = kinks
            .iter()
            .copied()
            .filter(|k| k.is_finite() && *k > a && *k < b)
            .collect();
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut acc = 0.0;
        let mut lo = a;
        for c in cuts {
            acc += self.integral(lo, c, f);
            lo = c;
        }
        acc + self.integral(lo, b, f)
    }

    /// E[f(Z)] over the whole line, split at the given kinks.
    pub fn expect_split(&self, kinks: &[f64], f: &dyn Fn(f64) -> f64) -> f64 {
        self.integral_split(-self.zmax, self.zmax, kinks, f)
    }
}
