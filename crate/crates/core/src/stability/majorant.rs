use crate::coefficients::{ball_average, mollify, MollifierKernel, VectorFieldSpec};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::quadrature::{gauss_legendre_on, pairwise_sum, unit_ball_volume, BallRule};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Gauss–Legendre nodes per radial integral.
const RADIAL_NODES: usize = 8;

/// The three pieces of `f_{δ,ε}(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MajorantTerms {
    /// `ε^{−d}‖ϱ‖_∞ ∫_{B₁}|∇b|(x+z) dz`.
    pub coarse: f64,
    /// `δ^{−1}∫₀^δ ⨍_{B_s}|∇b|(x+·) ds`.
    pub small_scale: f64,
    /// `∫_δ^{√δ} s^{−1} ⨍_{B_s}|∇(b_ε−b)|(x+·) ds`.
    pub mollification: f64,
}

impl MajorantTerms {
    pub fn total(&self) -> f64 {
        self.coarse + self.small_scale + self.mollification
    }
}

/// Both sides of
/// `∫_{B_R} f_{δ,ε} ≤ C_{ϱ,d} ε^{−d}‖∇b‖_{L¹(B_{R+1})} + ½ log δ⁻¹ ‖∇(b_ε−b)‖_{L¹(B_{R+1})}`
/// with `C_{ϱ,d} = ‖ϱ‖_∞|B₁| + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetCheck {
    pub radius: f64,
    pub integral: f64,
    pub grad_l1: f64,
    pub mollification_l1: f64,
    pub constant: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `f_{δ,ε}` for a field and its mollification.
#[derive(Debug, Clone)]
pub struct FDeltaEps {
    pub field: VectorFieldSpec,
    pub mollified: VectorFieldSpec,
    pub delta: f64,
    pub eps: f64,
    /// `‖ϱ‖_∞` of the unscaled kernel.
    pub rho_sup: f64,
    /// Midpoint cells per ball average in the `s`-integrals.
    pub resolution: usize,
    /// Midpoint cells for the unit-ball average of the coarse term.
    pub coarse_resolution: usize,
}

fn default_resolution(d: usize) -> (usize, usize) {
    match d {
        1 => (256, 8192),
        2 => (32, 256),
        _ => (10, 32),
    }
}

impl FDeltaEps {
    pub fn new(field: &VectorFieldSpec, delta: f64, eps: f64, kernel: &Arc<MollifierKernel>) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.25) {
            return Err(Error::param("delta", format!("must lie in (0, 1/4), got {delta}")));
        }
        if !(eps > 0.0 && eps < 0.25) {
            return Err(Error::param("eps", format!("must lie in (0, 1/4), got {eps}")));
        }
        let d = field.d();
        field.drift_gradient_norm(&vec![0.5; d])?;
        Ok(FDeltaEps {
            field: field.clone(),
            mollified: mollify(field, eps, kernel)?,
            delta,
            eps,
            rho_sup: kernel.sup(),
            resolution: default_resolution(d).0,
            coarse_resolution: default_resolution(d).1,
        })
    }

    pub fn with_resolution(mut self, n: usize) -> Self {
        self.resolution = n.max(2);
        self
    }

    fn grad(&self, y: &[f64]) -> f64 {
        self.field.drift_gradient_norm(y).unwrap_or(f64::NAN)
    }

    fn grad_gap(&self, y: &[f64]) -> f64 {
        match (self.mollified.drift_jacobian_at(y), self.field.drift_jacobian_at(y)) {
            (Ok(a), Ok(b)) => norm(&a.iter().zip(&b).map(|(u, v)| u - v).collect::<Vec<_>>()),
            _ => f64::NAN,
        }
    }

    pub fn terms(&self, x: &[f64]) -> MajorantTerms {
        let d = x.len();
        let n = self.resolution;
        let vol = unit_ball_volume(d);
        let coarse = self.eps.powi(-(d as i32)) * self.rho_sup * vol * ball_average(|y| self.grad(y), x, 1.0, self.coarse_resolution);
        let (s, w) = gauss_legendre_on(RADIAL_NODES, 0.0, self.delta);
        let small_scale = s
            .iter()
            .zip(&w)
            .map(|(s, w)| w * ball_average(|y| self.grad(y), x, *s, n))
            .sum::<f64>()
            / self.delta;
        // ds/s = du with s = e^u
        let (u, w) = gauss_legendre_on(RADIAL_NODES, self.delta.ln(), 0.5 * self.delta.ln());
        let mollification = u
            .iter()
            .zip(&w)
            .map(|(u, w)| w * ball_average(|y| self.grad_gap(y), x, u.exp(), n))
            .sum::<f64>();
        MajorantTerms {
            coarse,
            small_scale,
            mollification,
        }
    }

    /// `∫_{B_r} g` on a scaled Gauss–Legendre ball rule; its nodes are
    /// irrational, so they avoid lattice-aligned singular points.
    fn ball_integral<G: Fn(&[f64]) -> f64 + Sync>(&self, r: f64, budget: usize, g: G) -> Result<f64> {
        let d = self.field.d();
        let rule = BallRule::with_budget(d, budget)?;
        let scale = r.powi(d as i32);
        let vals: Vec<f64> = (0..rule.len())
            .into_par_iter()
            .map(|q| {
                let y: Vec<f64> = rule.node(q).iter().map(|v| r * v).collect();
                rule.weights[q] * scale * g(&y)
            })
            .collect();
        Ok(pairwise_sum(&vals))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms(x).total()
    }

    /// Integrate `f_{δ,ε}` over `B_R` on a Gauss–Legendre ball rule with
    /// `budget` nodes; the `L¹(B_{R+1})` norms use four times as many.
    pub fn budget_check(&self, radius: f64, budget: usize) -> Result<BudgetCheck> {
        if !(radius > 0.0) {
            return Err(Error::param("R", format!("must be positive, got {radius}")));
        }
        let d = self.field.d();
        let integral = self.ball_integral(radius, budget, |y| self.eval(y))?;
        let grad_l1 = self.ball_integral(radius + 1.0, 4 * budget, |y| self.grad(y))?;
        let mollification_l1 = self.ball_integral(radius + 1.0, 4 * budget, |y| self.grad_gap(y))?;
        let constant = self.rho_sup * unit_ball_volume(d) + 1.0;
        let bound = constant * self.eps.powi(-(d as i32)) * grad_l1 + 0.5 * (1.0 / self.delta).ln() * mollification_l1;
        Ok(BudgetCheck {
            radius,
            integral,
            grad_l1,
            mollification_l1,
            constant,
            bound,
            holds: integral <= bound,
        })
    }
}

/// `f_{δ,ε}(x)`.
pub fn f_delta_eps_majorant(field: &VectorFieldSpec, x: &[f64], delta: f64, eps: f64, kernel: &Arc<MollifierKernel>) -> Result<MajorantTerms> {
    if x.len() != field.d() {
        return Err(Error::Dimension {
            expected: field.d(),
            got: x.len(),
        });
    }
    Ok(FDeltaEps::new(field, delta, eps, kernel)?.terms(x))
}
