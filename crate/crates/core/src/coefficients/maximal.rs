//! Local maximal function
//!
//! ```text
//! M_R φ(x) = sup_{0<s<R} |B_s|^{−1} ∫_{B_s(x)} φ(y) dy,
//! ```
//!
//! approximated by the maximum over a log-spaced radius ladder, each ball
//! average by midpoint quadrature.

use crate::error::{Error, Result};
use crate::quadrature::{midpoint_ball, pairwise_sum};

/// Piecewise-constant samples of a scalar field on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
    /// Row-major, last axis fastest.
    pub values: Vec<f64>,
}

impl SampledGrid {
    /// Sample `f` at cell midpoints.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(lo: &[f64], hi: &[f64], shape: &[usize], f: F) -> Self {
        let d = lo.len();
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let mut rem = flat;
            for k in (0..d).rev() {
                let i = rem % shape[k];
                rem /= shape[k];
                let h = (hi[k] - lo[k]) / shape[k] as f64;
                x[k] = lo[k] + (i as f64 + 0.5) * h;
            }
            values.push(f(&x));
        }
        SampledGrid {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            shape: shape.to_vec(),
            values,
        }
    }

    pub fn d(&self) -> usize {
        self.lo.len()
    }

    pub fn cell(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]) / self.shape[k] as f64
    }

    pub fn min_cell(&self) -> f64 {
        (0..self.d()).map(|k| self.cell(k)).fold(f64::INFINITY, f64::min)
    }

    pub fn value(&self, x: &[f64]) -> Option<f64> {
        let mut flat = 0;
        for k in 0..self.d() {
            let t = (x[k] - self.lo[k]) / self.cell(k);
            if !(t >= 0.0) || t > self.shape[k] as f64 {
                return None;
            }
            let i = (t as usize).min(self.shape[k] - 1);
            flat = flat * self.shape[k] + i;
        }
        Some(self.values[flat])
    }

    pub fn covers_ball(&self, x: &[f64], r: f64) -> bool {
        (0..self.d()).all(|k| x[k] - r >= self.lo[k] - 1e-12 && x[k] + r <= self.hi[k] + 1e-12)
    }
}

/// Radii `s_0 = R > s_1 > … > s_{n−1} = r_min`, geometrically spaced.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusLadder {
    pub radii: Vec<f64>,
}

impl RadiusLadder {
    pub const MIN_RUNGS: usize = 32;

    pub fn log_spaced(r_max: f64, r_min: f64, n: usize) -> Self {
        let n = n.max(2);
        let q = (r_min / r_max).ln() / (n - 1) as f64;
        RadiusLadder {
            radii: (0..n).map(|k| r_max * (q * k as f64).exp()).collect(),
        }
    }
}

/// Midpoint resolution per radius that keeps ball averages cheap in `d ≥ 2`.
fn resolution(d: usize, s: f64, h: f64) -> usize {
    let n = (8.0 * s / h).ceil() as usize;
    match d {
        1 => n.clamp(32, 1 << 14),
        2 => n.clamp(12, 128),
        _ => n.clamp(6, 24),
    }
}

/// `|B_s|^{−1} ∫_{B_s(x)} f` by midpoint quadrature with `n` radial cells.
pub fn ball_average<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], s: f64, n: usize) -> f64 {
    let d = x.len();
    let (nodes, w) = midpoint_ball(d, s, n);
    let mut y = vec![0.0; d];
    let vals: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(q, wq)| {
            for i in 0..d {
                y[i] = x[i] + nodes[q * d + i];
            }
            wq * f(&y)
        })
        .collect();
    pairwise_sum(&vals) / w.iter().sum::<f64>()
}

/// `M_R φ(x)` for a grid-sampled `φ`.
pub fn maximal_function(phi: &SampledGrid, r: f64, x: &[f64]) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::param("R", format!("must be positive, got {r}")));
    }
    if !phi.covers_ball(x, r) {
        return Err(Error::Domain(format!("sampling grid does not cover B_{r}({x:?})")));
    }
    let h = phi.min_cell();
    let ladder = RadiusLadder::log_spaced(r, (0.5 * h).min(r).max(r * 1e-4), RadiusLadder::MIN_RUNGS);
    let d = phi.d();
    let f = |y: &[f64]| phi.value(y).unwrap_or(0.0);
    Ok(ladder
        .radii
        .iter()
        .map(|&s| ball_average(f, x, s, resolution(d, s, h)))
        .fold(0.0, f64::max))
}

/// `M_R f(x)` for a function that can be evaluated anywhere; `n` radial
/// cells per ball.
pub fn maximal_function_of<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], ladder: &RadiusLadder, n: usize) -> f64 {
    ladder
        .radii
        .iter()
        .map(|&s| ball_average(&f, x, s, n))
        .fold(0.0, f64::max)
}

/// Nested midpoint rule for all ladder balls at once.
///
/// Shell `k` covers `r_{k−1} < |z| < r_k` (with `r_{−1} = 0`) and is split
/// into equal radial cells times a midpoint rule on directions, so the
/// average over `B_{r_k}` is a cumulative sum over shells `0..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellRule {
    pub d: usize,
    /// Ascending radii.
    pub radii: Vec<f64>,
    /// Row-major offsets.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `shell_end[k]` is one past the last node of shell `k`.
    pub shell_end: Vec<usize>,
}

/// Unit directions with equal solid-angle shares.
fn directions(d: usize, angular: usize) -> Vec<f64> {
    let a = angular.max(1);
    match d {
        1 => vec![-1.0, 1.0],
        2 => (0..a)
            .flat_map(|j| {
                let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / a as f64;
                [th.cos(), th.sin()]
            })
            .collect(),
        _ => {
            let np = 2 * a;
            let mut v = Vec::with_capacity(3 * a * np);
            for i in 0..a {
                let c = -1.0 + (i as f64 + 0.5) * 2.0 / a as f64;
                let si = (1.0 - c * c).sqrt();
                for k in 0..np {
                    let ph = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / np as f64;
                    v.extend_from_slice(&[si * ph.cos(), si * ph.sin(), c]);
                }
            }
            v
        }
    }
}

impl ShellRule {
    /// `radial` cells per shell; `angular` directions in 2D, polar cells in
    /// 3D (with twice as many azimuths).
    pub fn new(d: usize, ladder: &RadiusLadder, radial: usize, angular: usize) -> Self {
        let mut radii = ladder.radii.clone();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let dirs = directions(d, angular);
        let nd = dirs.len() / d;
        let vol = crate::quadrature::unit_ball_volume(d);
        let radial = radial.max(1);
        let (mut nodes, mut weights, mut shell_end) = (Vec::new(), Vec::new(), Vec::new());
        let mut lo = 0.0;
        for &hi in &radii {
            let h = (hi - lo) / radial as f64;
            for i in 0..radial {
                let (a, b) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
                let r = 0.5 * (a + b);
                let w = vol * (b.powi(d as i32) - a.powi(d as i32)) / nd as f64;
                for q in 0..nd {
                    nodes.extend(dirs[q * d..(q + 1) * d].iter().map(|u| r * u));
                    weights.push(w);
                }
            }
            shell_end.push(weights.len());
            lo = hi;
        }
        ShellRule {
            d,
            radii,
            nodes,
            weights,
            shell_end,
        }
    }

    /// Averages of `f` over `B_{r_k}(x)` for every ascending radius.
    pub fn averages<F: Fn(&[f64]) -> f64>(&self, f: F, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut y = vec![0.0; d];
        let (mut acc, mut mass, mut start) = (0.0, 0.0, 0);
        let mut out = Vec::with_capacity(self.radii.len());
        for &end in &self.shell_end {
            let vals: Vec<f64> = (start..end)
                .map(|q| {
                    for i in 0..d {
                        y[i] = x[i] + self.nodes[q * d + i];
                    }
                    self.weights[q] * f(&y)
                })
                .collect();
            acc += pairwise_sum(&vals);
            mass += pairwise_sum(&self.weights[start..end]);
            out.push(acc / mass);
            start = end;
        }
        out
    }

    /// Largest ladder average at `x`.
    pub fn maximal<F: Fn(&[f64]) -> f64>(&self, f: F, x: &[f64]) -> f64 {
        self.averages(f, x).into_iter().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indicator_grid() -> SampledGrid {
        SampledGrid::from_fn(&[-5.0], &[5.0], &[1000], |x| if x[0].abs() <= 1.0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn constants_are_fixed() {
        let g = SampledGrid::from_fn(&[-3.0, -3.0], &[3.0, 3.0], &[60, 60], |_| 2.5);
        let v = maximal_function(&g, 1.0, &[0.1, 0.2]).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn indicator_examples() {
        let g = indicator_grid();
        assert!((maximal_function(&g, 2.0, &[0.0]).unwrap() - 1.0).abs() < 1e-12);
        // sup over s of (s−1)/(2s) on (1, 2) is attained at s = R
        let v = maximal_function(&g, 2.0, &[2.0]).unwrap();
        assert!((v - 0.25).abs() < 2e-3, "{v}");
        assert!(matches!(maximal_function(&g, 4.0, &[2.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn shell_rule_matches_direct_averages() {
        let ladder = RadiusLadder::log_spaced(1.0, 1e-3, RadiusLadder::MIN_RUNGS);
        for d in 1..=3 {
            let rule = ShellRule::new(d, &ladder, 2, 8);
            let m: f64 = rule.weights.iter().sum();
            assert!((m - crate::quadrature::unit_ball_volume(d)).abs() < 1e-12);
            let f = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>();
            let x = vec![0.3; d];
            let avg = rule.averages(f, &x);
            // ⨍_{B_s(x)} |y|² = |x|² + d s²/(d+2)
            for (a, s) in avg.iter().zip(&rule.radii) {
                let exact = 0.09 * d as f64 + d as f64 * s * s / (d as f64 + 2.0);
                assert!((a - exact).abs() < 2e-2 * exact, "d={d} s={s}: {a} vs {exact}");
            }
        }
    }
}
