use super::integrate::FlowEnsemble;
use crate::coefficients::VectorFieldSpec;
use crate::error::{Error, Result};
use crate::linalg::det;
use crate::rng::BrownianPath;

/// `log det ∇X_{t_k}` from the exponential formula, `k = 0, …, steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianFormula {
    pub log_det: Vec<f64>,
}

impl JacobianFormula {
    pub fn det(&self, k: usize) -> f64 {
        self.log_det[k].exp()
    }
}

/// Integrand terms of the determinant formula at `x`: `(div σ^{·l}, div b −
/// ½∂_iσ^{jl}∂_jσ^{il})`.
pub fn formula_integrands(field: &VectorFieldSpec, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let dv = field.div_diffusion(x)?;
    let drift = field.div_drift(x)? - 0.5 * field.noise_contraction(x)?;
    Ok((dv, drift))
}

/// `exp{∫₀ᵗ div σ(X_s) dW_s + ∫₀ᵗ [div b − ½∂_iσ^{jl}∂_jσ^{il}](X_s) ds}`
/// with left-point sums along a trajectory sampled at every step.
///
/// `trajectory` is row-major `(steps + 1) × d`.
pub fn jacobian_via_formula(field: &VectorFieldSpec, trajectory: &[f64], path: &BrownianPath) -> Result<JacobianFormula> {
    let d = field.d();
    if trajectory.len() != (path.steps + 1) * d {
        return Err(Error::Dimension {
            expected: (path.steps + 1) * d,
            got: trajectory.len(),
        });
    }
    let mut log_det = Vec::with_capacity(path.steps + 1);
    let mut acc = 0.0;
    log_det.push(0.0);
    for k in 0..path.steps {
        let x = &trajectory[k * d..(k + 1) * d];
        let (dv, drift) = formula_integrands(field, x)?;
        let dw = path.increment(k);
        acc += dv.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>() + drift * path.dt;
        log_det.push(acc);
    }
    Ok(JacobianFormula { log_det })
}

/// `log det` of each particle's tangent at a save.
pub fn tangent_log_det(ensemble: &FlowEnsemble, save: usize) -> Result<Vec<f64>> {
    let d = ensemble.d;
    (0..ensemble.len())
        .map(|i| {
            let j = ensemble
                .tangent(save, i)
                .ok_or_else(|| Error::Precondition("ensemble carries no tangent data".into()))?;
            Ok(det(j, d).abs().ln())
        })
        .collect()
}

/// The bracket `−div b + ½∂_iσ^{jl}∂_jσ^{il} + σ^{il}∂²_{ij}σ^{jl} +
/// (p/2)|div σ|²` at `x`.
pub fn inverse_moment_bracket(field: &VectorFieldSpec, p: f64, x: &[f64]) -> Result<f64> {
    let dv = field.div_diffusion(x)?;
    Ok(-field.div_drift(x)?
        + 0.5 * field.noise_contraction(x)?
        + field.hessian_contraction(x)?
        + 0.5 * p * dv.iter().map(|v| v * v).sum::<f64>())
}

/// Bound and Monte Carlo estimate of `sup_x E|det ∇X_t(x)|^{−p}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseJacobianMoment {
    pub p: f64,
    pub t: f64,
    /// `sup [bracket]⁺` over the sample points.
    pub bracket_sup: f64,
    /// `exp{t p sup[...]⁺}`, `+∞` when the bracket is unbounded.
    pub bound: f64,
    /// Largest per-particle mean over replicates.
    pub mc_estimate: f64,
    pub mc_se: f64,
    /// `mc_estimate ≤ bound (1 + dt) + 3 SE`; the `dt` slack absorbs
    /// time-discretisation bias of the tangent.
    pub dominated: bool,
}

/// `inverse_jacobian_moment` over replicate ensembles with tangent data at
/// save `save`; the sup of the bracket is taken over `sample` (row-major).
pub fn inverse_jacobian_moment(field: &VectorFieldSpec, p: f64, sample: &[f64], replicates: &[FlowEnsemble], save: usize) -> Result<InverseJacobianMoment> {
    if !(p >= 1.0) {
        return Err(Error::param("p", format!("must be ≥ 1, got {p}")));
    }
    let first = replicates
        .first()
        .ok_or_else(|| Error::Precondition("no replicate ensembles".into()))?;
    let d = field.d();
    let t = first.save_times[save];
    let mut sup = 0.0f64;
    for x in sample.chunks(d) {
        let v = inverse_moment_bracket(field, p, x)?;
        if !v.is_finite() {
            sup = f64::INFINITY;
            break;
        }
        sup = sup.max(v);
    }
    let bound = (t * p * sup).exp();
    let n = first.len();
    let logs: Vec<Vec<f64>> = replicates.iter().map(|e| tangent_log_det(e, save)).collect::<Result<_>>()?;
    let r = replicates.len() as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let vals: Vec<f64> = logs
            .iter()
            .zip(replicates)
            .filter(|(_, e)| !e.diverged[i])
            .map(|(l, _)| (-p * l[i]).exp())
            .collect();
        if vals.is_empty() {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() as f64 - 1.0)
        } else {
            0.0
        };
        if mean > best.0 {
            best = (mean, (var / r).sqrt());
        }
    }
    let dt = 1.0 / first.steps as f64;
    Ok(InverseJacobianMoment {
        p,
        t,
        bracket_sup: sup,
        bound,
        mc_estimate: best.0,
        mc_se: best.1,
        dominated: best.0 <= bound * (1.0 + dt) + 3.0 * best.1,
    })
}
