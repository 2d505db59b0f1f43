use super::xi::XiDelta;
use crate::density::WeightedMeasure;
use crate::error::{Error, Result};
use crate::flow_sim::FlowEnsemble;
use crate::quadrature::pairwise_sum;
use serde::Serialize;
use std::sync::Arc;

/// Gap functionals between two flows under one noise path.
///
/// Integrals are over `B_N` against `μ`, with particle weights taken as
/// Lebesgue cell volumes times `e^{λ(x_i)}`; the supremum in time runs over
/// the saved times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub levels: Option<(usize, usize)>,
    pub delta: f64,
    pub ball_radius: f64,
    pub confinement_radius: f64,
    /// `μ(B_N)` on the particle quadrature.
    pub ball_mass: f64,
    /// `∫_{B_N} sup_t ξ_δ(|Z_t|²) ∧ 1 dμ`.
    pub xi_gap: f64,
    /// `∫_{B_N} sup_t |Z_t|² ∧ 1 dμ`.
    pub sq_gap: f64,
    /// `∫_{B_N ∩ G_R} log(Φ/δ² + 1) dμ`.
    pub log_functional: f64,
    /// `μ(B_N ∩ G_Rᶜ)`.
    pub excluded_mass: f64,
    /// `∫_{B_N} sup_t |X_t| ∨ |X̂_t| dμ`.
    pub sup_modulus: f64,
    pub confined: usize,
    pub excluded: usize,
    pub total: usize,
    /// Particles with `log(Φ/δ²+1) ≤ ½log δ⁻¹` but `Φ ≥ δ`.
    pub threshold_violations: usize,
}

impl StabilityReport {
    /// `μ(B_N ∩ G_Rᶜ) ≤ R⁻¹ ∫_{B_N} sup_t |X_t| ∨ |X̂_t| dμ`.
    pub fn chebyshev_holds(&self, slack: f64) -> bool {
        self.excluded_mass <= self.sup_modulus / self.confinement_radius + slack
    }
}

fn same_path(a: &FlowEnsemble, b: &FlowEnsemble) -> bool {
    match (&a.path, &b.path) {
        (None, None) => true,
        (Some(p), Some(q)) => Arc::ptr_eq(p, q) || p == q,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy)]
struct ParticleGap {
    weight: f64,
    xi: f64,
    sq: f64,
    phi: f64,
    sup_mod: f64,
    confined: bool,
}

/// Gap functionals of `Z_t = X_t − X̂_t`.
pub fn flow_gap(
    a: &FlowEnsemble,
    b: &FlowEnsemble,
    delta: f64,
    ball_radius: f64,
    confinement_radius: f64,
    measure: &WeightedMeasure,
) -> Result<StabilityReport> {
    let xi = XiDelta::new(delta)?;
    if !(ball_radius > 0.0) || !(confinement_radius > 0.0) {
        return Err(Error::param("N, R", "ball and confinement radii must be positive"));
    }
    if a.d != b.d || a.d != measure.d {
        return Err(Error::Dimension {
            expected: a.d,
            got: if a.d != b.d { b.d } else { measure.d },
        });
    }
    if !(Arc::ptr_eq(&a.grid, &b.grid) || a.grid == b.grid) {
        return Err(Error::Incompatible("flow gap needs both ensembles on the same particle grid".into()));
    }
    if !same_path(a, b) {
        return Err(Error::Incompatible("flow gap needs both ensembles driven by the same noise path".into()));
    }
    if a.save_steps != b.save_steps || a.steps != b.steps {
        return Err(Error::Incompatible("ensembles were saved at different times".into()));
    }
    let d = a.d;
    let grid = &a.grid;
    let mut gaps = Vec::new();
    for i in 0..grid.len() {
        let x0 = grid.point(i);
        if crate::linalg::norm(x0) > ball_radius {
            continue;
        }
        let mut sup_z2 = 0.0f64;
        let mut sup_mod = 0.0f64;
        let mut broken = a.diverged[i] || b.diverged[i];
        for s in 0..a.save_times.len() {
            let (xa, xb) = (a.state(s, i), b.state(s, i));
            let z2: f64 = (0..d).map(|k| (xa[k] - xb[k]).powi(2)).sum();
            if !z2.is_finite() {
                broken = true;
                break;
            }
            sup_z2 = sup_z2.max(z2);
            sup_mod = sup_mod.max(crate::linalg::norm(xa)).max(crate::linalg::norm(xb));
        }
        if broken {
            sup_z2 = f64::INFINITY;
            sup_mod = f64::INFINITY;
        }
        // ξ_δ is nondecreasing, so sup_t ξ_δ(|Z_t|²) = ξ_δ(sup_t |Z_t|²)
        let phi = xi.value(sup_z2);
        gaps.push(ParticleGap {
            weight: grid.weights[i] * measure.density(x0),
            xi: phi.min(1.0),
            sq: sup_z2.min(1.0),
            phi,
            sup_mod,
            confined: sup_mod <= confinement_radius,
        });
    }
    let sum = |f: &dyn Fn(&ParticleGap) -> f64| pairwise_sum(&gaps.iter().map(f).collect::<Vec<_>>());
    let log_threshold = 0.5 * (1.0 / delta).ln();
    let psi = |g: &ParticleGap| (g.phi / (delta * delta)).ln_1p();
    let confined = gaps.iter().filter(|g| g.confined).count();
    Ok(StabilityReport {
        levels: None,
        delta,
        ball_radius,
        confinement_radius,
        ball_mass: sum(&|g| g.weight),
        xi_gap: sum(&|g| g.weight * g.xi),
        sq_gap: sum(&|g| g.weight * g.sq),
        log_functional: sum(&|g| if g.confined { g.weight * psi(g) } else { 0.0 }),
        excluded_mass: sum(&|g| if g.confined { 0.0 } else { g.weight }),
        sup_modulus: sum(&|g| g.weight * g.sup_mod),
        confined,
        excluded: gaps.len() - confined,
        total: gaps.len(),
        threshold_violations: gaps.iter().filter(|g| psi(g) <= log_threshold && g.phi >= delta).count(),
    })
}
