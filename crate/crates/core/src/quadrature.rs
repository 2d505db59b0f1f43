//! Quadrature rules and deterministic summation.
//!
//! Gauss–Legendre nodes come from Newton iteration on `P_n`. Ball rules map
//! the unit ball `B₁ ⊂ ℝ^d` to polar (d = 2) or spherical (d = 3)
//! coordinates, so that for a function `f` supported in `B₁`
//!
//! ```text
//! ∫_{B₁} f(z) dz ≈ Σ_q w_q f(z_q),     Σ_q w_q = |B₁|.
//! ```

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre on `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (
        x.iter().map(|t| c + h * t).collect(),
        w.iter().map(|v| v * h).collect(),
    )
}

/// Composite Gauss–Legendre integral of `f` on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let parts: Vec<f64> = (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            x.iter()
                .zip(&w)
                .map(|(t, wt)| wt * 0.5 * h * f(lo + 0.5 * h * (t + 1.0)))
                .sum()
        })
        .collect();
    pairwise_sum(&parts)
}

/// Volume of the unit ball in `ℝ^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / libm::tgamma(d as f64 / 2.0 + 1.0)
}

/// Pairwise (tree) summation in fixed order.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// A quadrature rule over the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRule {
    pub d: usize,
    /// Row-major node coordinates, `len = n·d`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BallRule {
    /// Tensor Gauss–Legendre rule using at most `budget` nodes.
    pub fn with_budget(d: usize, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::Config("quadrature node budget is zero".into()));
        }
        match d {
            1 => {
                let (x, w) = gauss_legendre(budget);
                Ok(BallRule { d, nodes: x, weights: w })
            }
            2 => {
                // the bump needs ~45 radial nodes for 1e-10 mass accuracy
                let nr = ((budget as f64).sqrt().round() as usize).max(1);
                let nt = (budget / nr).max(1);
                let (r, wr) = gauss_legendre_on(nr, 0.0, 1.0);
                let mut nodes = Vec::with_capacity(2 * nr * nt);
                let mut weights = Vec::with_capacity(nr * nt);
                for (ri, wri) in r.iter().zip(&wr) {
                    for j in 0..nt {
                        let th = 2.0 * PI * (j as f64 + 0.5) / nt as f64;
                        nodes.push(ri * th.cos());
                        nodes.push(ri * th.sin());
                        weights.push(wri * ri * 2.0 * PI / nt as f64);
                    }
                }
                Ok(BallRule { d, nodes, weights })
            }
            3 => {
                // radial kernels only see the radial rule, so it gets the
                // larger share
                let nr = ((2.4 * (budget as f64).cbrt()).round() as usize).clamp(1, budget);
                let n = (((budget / nr) as f64 / 2.0).sqrt().round() as usize).max(1);
                let np = (budget / (nr * n)).max(1);
                let (r, wr) = gauss_legendre_on(nr, 0.0, 1.0);
                let (c, wc) = gauss_legendre(n);
                let mut nodes = Vec::with_capacity(3 * nr * n * np);
                let mut weights = Vec::with_capacity(nr * n * np);
                for (ri, wri) in r.iter().zip(&wr) {
                    for (ci, wci) in c.iter().zip(&wc) {
                        let si = (1.0 - ci * ci).sqrt();
                        for k in 0..np {
                            let ph = 2.0 * PI * (k as f64 + 0.5) / np as f64;
                            nodes.push(ri * si * ph.cos());
                            nodes.push(ri * si * ph.sin());
                            nodes.push(ri * ci);
                            weights.push(wri * ri * ri * wci * 2.0 * PI / np as f64);
                        }
                    }
                }
                Ok(BallRule { d, nodes, weights })
            }
            _ => Err(Error::param("d", format!("ball rules exist for d ≤ 3, got {d}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, q: usize) -> &[f64] {
        &self.nodes[q * self.d..(q + 1) * self.d]
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = pairwise_sum(v) / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Midpoint rule over the ball `B_s(0)` with roughly `n` points per radius.
///
/// Returns nodes (row-major) and weights summing to `|B_s|`.
pub fn midpoint_ball(d: usize, s: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let n = n.max(2);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match d {
        1 => {
            let h = 2.0 * s / n as f64;
            for i in 0..n {
                nodes.push(-s + (i as f64 + 0.5) * h);
                weights.push(h);
            }
        }
        2 => {
            let nt = 4 * n;
            let hr = s / n as f64;
            for i in 0..n {
                let r = (i as f64 + 0.5) * hr;
                // exact annulus area split evenly over the angles
                let area = PI * (((i + 1) as f64 * hr).powi(2) - (i as f64 * hr).powi(2));
                for j in 0..nt {
                    let th = 2.0 * PI * (j as f64 + 0.5) / nt as f64;
                    nodes.push(r * th.cos());
                    nodes.push(r * th.sin());
                    weights.push(area / nt as f64);
                }
            }
        }
        _ => {
            let np = 2 * n;
            let hr = s / n as f64;
            for i in 0..n {
                let r = (i as f64 + 0.5) * hr;
                let shell = 4.0 / 3.0 * PI * (((i + 1) as f64 * hr).powi(3) - (i as f64 * hr).powi(3));
                for a in 0..n {
                    let c = -1.0 + (a as f64 + 0.5) * 2.0 / n as f64;
                    let si = (1.0 - c * c).sqrt();
                    for k in 0..np {
                        let ph = 2.0 * PI * (k as f64 + 0.5) / np as f64;
                        nodes.extend_from_slice(&[r * si * ph.cos(), r * si * ph.sin(), r * c]);
                        weights.push(shell / (n * np) as f64);
                    }
                }
            }
        }
    }
    (nodes, weights)
}
