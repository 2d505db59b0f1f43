use crate::error::{Error, Result};
use crate::flow_sim::BoxLayout;
use crate::quadrature::{pairwise_sum, unit_ball_volume};
use std::collections::BTreeMap;

/// The weight `λ` of `μ(dx) = e^{λ(x)} dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// `λ = 0`.
    Lebesgue,
    /// `λ = −α log(1 + |x|²)`.
    LogDecay { alpha: f64 },
    /// `λ = −|x|^{2α}`, `α ≥ 1`.
    Power { alpha: f64 },
}

/// A weighted measure with its growth envelopes and quadrature grid.
///
/// The envelopes hold for every `y` with `|y| ≤ shift`:
///
/// ```text
/// λ(x) ≤ γ₁(x−y),   |∇λ(x)| ≤ γ₂(x−y),   |∇²λ(x)| ≤ γ₃(x−y).
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    pub d: usize,
    pub weight: Weight,
    /// Radius `ε` of admissible shifts `y` in the envelope inequalities.
    pub shift: f64,
    pub grid: BoxLayout,
    /// `∫_cell e^λ` per grid cell.
    pub cell_mass: Vec<f64>,
    /// `C_α = sup_{r≥0} [½ r^{2α} − ((r−½)⁺)^{2α}]` for power weights.
    envelope_constant: f64,
}

impl WeightedMeasure {
    pub fn new(d: usize, weight: Weight, half_width: f64, cells: usize) -> Result<Self> {
        match weight {
            Weight::LogDecay { alpha } if !(alpha > 0.0) => {
                return Err(Error::param("alpha", "log-decay weights need α > 0"));
            }
            Weight::Power { alpha } if !(alpha >= 1.0) => {
                return Err(Error::param("alpha", "power weights need α ≥ 1 to be C²"));
            }
            _ => {}
        }
        if !(half_width > 0.0) || cells == 0 {
            return Err(Error::param("grid", "need a positive half-width and at least one cell"));
        }
        let grid = BoxLayout::new(&vec![-half_width; d], &vec![half_width; d], &vec![cells; d])?;
        let mut m = WeightedMeasure {
            d,
            weight,
            shift: 0.5,
            grid,
            cell_mass: Vec::new(),
            envelope_constant: 0.0,
        };
        let lam = |x: &[f64]| m.lambda(x);
        let masses = (0..m.grid.cells()).map(|c| m.grid.cell_mass(c, &lam)).collect();
        m.cell_mass = masses;
        if let Weight::Power { alpha } = weight {
            let a2 = 2.0 * alpha;
            // the sup is attained on [0, 1 + 2^{1/(2α−1)}]; scan then refine
            let f = |r: f64| 0.5 * r.powf(a2) - (r - 0.5).max(0.0).powf(a2);
            let hi = 2.0 + 2f64.powf(1.0 / (a2 - 1.0).max(1e-9));
            let mut best = (0.0, f(0.0));
            for i in 0..=20000 {
                let r = hi * i as f64 / 20000.0;
                if f(r) > best.1 {
                    best = (r, f(r));
                }
            }
            m.envelope_constant = best.1 + 1e-9 * (1.0 + best.1.abs());
        }
        Ok(m)
    }

    /// Catalog lookup: `lebesgue`, `log_decay`, `power`, `gaussian`.
    pub fn catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str, v: f64| params.get(k).copied().unwrap_or(v);
        let allowed: &[&str] = match name {
            "lebesgue" | "gaussian" => &["d", "half_width", "cells"],
            "log_decay" | "power" => &["d", "alpha", "half_width", "cells"],
            _ => {
                return Err(Error::Config(format!(
                    "unknown measure `{name}`; expected one of lebesgue, log_decay, power, gaussian"
                )))
            }
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::param(format!("{name}.{k}"), "unknown parameter for this measure"));
        }
        let d = get("d", 1.0);
        if !(1.0..=3.0).contains(&d) || d.fract() != 0.0 {
            return Err(Error::param(format!("{name}.d"), "must be 1, 2 or 3"));
        }
        let d = d as usize;
        let cells = get("cells", if d == 1 { 2000.0 } else { 256.0 });
        if !(cells >= 1.0) || cells.fract() != 0.0 {
            return Err(Error::param(format!("{name}.cells"), "must be a positive integer"));
        }
        let weight = match name {
            "lebesgue" => Weight::Lebesgue,
            "gaussian" => Weight::Power { alpha: 1.0 },
            "log_decay" => Weight::LogDecay { alpha: get("alpha", 2.0) },
            _ => Weight::Power { alpha: get("alpha", 1.0) },
        };
        let hw = get("half_width", if matches!(weight, Weight::Power { .. }) { 6.0 } else { 20.0 });
        Self::new(d, weight, hw, cells as usize)
    }

    pub fn lambda(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self.weight {
            Weight::Lebesgue => 0.0,
            Weight::LogDecay { alpha } => -alpha * r2.ln_1p(),
            Weight::Power { alpha } => -r2.powf(alpha),
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.lambda(x).exp()
    }

    pub fn grad_lambda(&self, x: &[f64], out: &mut [f64]) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let c = match self.weight {
            Weight::Lebesgue => 0.0,
            Weight::LogDecay { alpha } => -2.0 * alpha / (1.0 + r2),
            Weight::Power { alpha } => {
                if alpha == 1.0 {
                    -2.0
                } else {
                    -2.0 * alpha * r2.powf(alpha - 1.0)
                }
            }
        };
        for (o, xi) in out.iter_mut().zip(x) {
            *o = c * xi;
        }
    }

    /// Row-major `∇²λ`.
    pub fn hess_lambda(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let (a, b) = match self.weight {
            Weight::Lebesgue => (0.0, 0.0),
            Weight::LogDecay { alpha } => {
                let q = 1.0 + r2;
                (-2.0 * alpha / q, 4.0 * alpha / (q * q))
            }
            Weight::Power { alpha } => {
                if alpha == 1.0 {
                    (-2.0, 0.0)
                } else {
                    let a = -2.0 * alpha * r2.powf(alpha - 1.0);
                    let b = -4.0 * alpha * (alpha - 1.0) * r2.powf(alpha - 2.0);
                    (a, if r2 > 0.0 { b } else { 0.0 })
                }
            }
        };
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                out[i * d + j] = a * delta + b * x[i] * x[j];
            }
        }
    }

    /// `γ₁(z)`.
    pub fn gamma1(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        match self.weight {
            Weight::Lebesgue => 0.0,
            Weight::LogDecay { alpha } => -alpha * r2.ln_1p() + alpha * 2f64.ln(),
            Weight::Power { alpha } => self.envelope_constant - 0.5 * r2.powf(alpha),
        }
    }

    /// `γ₂(z)`.
    pub fn gamma2(&self, z: &[f64]) -> f64 {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self.weight {
            Weight::Lebesgue => 0.0,
            Weight::LogDecay { alpha } => 8.0 * alpha / (1.0 + r),
            Weight::Power { alpha } => 2.0 * alpha * (r + 0.5).powf(2.0 * alpha - 1.0),
        }
    }

    /// `γ₃(z)`.
    pub fn gamma3(&self, z: &[f64]) -> f64 {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self.weight {
            Weight::Lebesgue => 0.0,
            Weight::LogDecay { alpha } => 12.0 * alpha / (1.0 + r * r),
            Weight::Power { alpha } => {
                let a2 = 2.0 * alpha;
                // Frobenius norm of ∇²λ is at most √d·a2·(2α−1)·|x|^{2α−2}
                (self.d as f64).sqrt() * a2 * (a2 - 1.0).max(1.0) * (r + 0.5).powf(a2 - 2.0)
            }
        }
    }

    /// `μ(ℝ^d)` when finite.
    pub fn total_mass(&self) -> Option<f64> {
        let d = self.d as f64;
        match self.weight {
            Weight::Lebesgue => None,
            Weight::LogDecay { alpha } => {
                if alpha > d / 2.0 {
                    Some(std::f64::consts::PI.powf(d / 2.0) * libm::tgamma(alpha - d / 2.0) / libm::tgamma(alpha))
                } else {
                    None
                }
            }
            Weight::Power { alpha } => {
                let sphere = d * unit_ball_volume(self.d);
                Some(sphere * libm::tgamma(d / (2.0 * alpha)) / (2.0 * alpha))
            }
        }
    }

    /// `μ` of the quadrature box.
    pub fn grid_mass(&self) -> f64 {
        pairwise_sum(&self.cell_mass)
    }

    /// `‖φ‖_{L^p_μ}` by quadrature on the grid.
    pub fn lp_norm<F: Fn(&[f64]) -> f64>(&self, phi: F, p: f64) -> f64 {
        let terms: Vec<f64> = (0..self.grid.cells())
            .map(|c| phi(&self.grid.center(c)).abs().powf(p) * self.cell_mass[c])
            .collect();
        pairwise_sum(&terms).powf(1.0 / p)
    }

    /// `∫ φ dμ` by quadrature on the grid.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, phi: F) -> f64 {
        let terms: Vec<f64> = (0..self.grid.cells())
            .map(|c| phi(&self.grid.center(c)) * self.cell_mass[c])
            .collect();
        pairwise_sum(&terms)
    }
}
