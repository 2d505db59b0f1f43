use crate::error::{Error, Result};
use crate::flow_sim::BoxLayout;
use crate::quadrature::pairwise_sum;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// A cell-averaged density on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct FVGrid {
    pub layout: BoxLayout,
    /// Cell averages, row-major, last axis fastest.
    pub u: Vec<f64>,
}

impl FVGrid {
    pub fn new(layout: BoxLayout, u: Vec<f64>) -> Result<Self> {
        if u.len() != layout.cells() {
            return Err(Error::Dimension {
                expected: layout.cells(),
                got: u.len(),
            });
        }
        Ok(FVGrid { layout, u })
    }

    /// Exact cell averages of `f` (4-point Gauss rule per axis).
    pub fn project<F: Fn(&[f64]) -> f64>(layout: &BoxLayout, f: F) -> Self {
        let v = layout.cell_volume();
        let lf = |x: &[f64]| f(x).ln();
        let u = (0..layout.cells()).map(|c| layout.cell_mass(c, &lf) / v).collect();
        FVGrid {
            layout: layout.clone(),
            u,
        }
    }

    pub fn d(&self) -> usize {
        self.layout.d()
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.u) * self.layout.cell_volume()
    }

    /// Rescaled to unit mass.
    pub fn normalized(mut self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("density has mass {m} on the grid")));
        }
        self.u.iter_mut().for_each(|v| *v /= m);
        Ok(self)
    }

    /// Marginal along `axis` (2D grids), as a density on that axis.
    pub fn marginal(&self, axis: usize) -> Vec<f64> {
        let l = &self.layout;
        let mut out = vec![0.0; l.shape[axis]];
        let other: f64 = (0..l.d()).filter(|&k| k != axis).map(|k| l.width(k)).product();
        for c in 0..l.cells() {
            out[l.unflatten(c)[axis]] += self.u[c] * other;
        }
        out
    }

    /// `∫ u^p e^{(1−p)λ} dx` by the midpoint rule.
    pub fn weighted_power<L: Fn(&[f64]) -> f64>(&self, p: f64, lambda: L) -> f64 {
        let l = &self.layout;
        let terms: Vec<f64> = (0..l.cells())
            .map(|c| {
                let u = self.u[c].max(0.0);
                if u == 0.0 {
                    0.0
                } else {
                    (p * u.ln() + (1.0 - p) * lambda(&l.center(c))).exp()
                }
            })
            .collect();
        pairwise_sum(&terms) * l.cell_volume()
    }
}

/// Initial densities with matching samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialDensity {
    /// Product of `N(mean_k, var)`; sampled as `mean + √var · Z`.
    Gaussian { mean: Vec<f64>, var: f64 },
    /// Uniform on a box; sampled by inverse CDF per axis.
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

impl InitialDensity {
    pub fn d(&self) -> usize {
        match self {
            InitialDensity::Gaussian { mean, .. } => mean.len(),
            InitialDensity::Uniform { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialDensity::Gaussian { var, .. } if !(*var > 0.0) => Err(Error::param("var", "must be positive")),
            InitialDensity::Uniform { lo, hi } if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) => {
                Err(Error::param("uniform", "need lo < hi in every coordinate"))
            }
            _ => Ok(()),
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            InitialDensity::Gaussian { mean, var } => {
                let r2: f64 = x.iter().zip(mean).map(|(a, m)| (a - m).powi(2)).sum();
                (-0.5 * r2 / var).exp() / (2.0 * std::f64::consts::PI * var).powf(0.5 * mean.len() as f64)
            }
            InitialDensity::Uniform { lo, hi } => {
                if x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *a <= *v && *v <= *b) {
                    1.0 / lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample<G: Rng>(&self, rng: &mut G) -> Vec<f64> {
        match self {
            InitialDensity::Gaussian { mean, var } => {
                let s = var.sqrt();
                mean.iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + s * z
                    })
                    .collect()
            }
            InitialDensity::Uniform { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                .collect(),
        }
    }
}
