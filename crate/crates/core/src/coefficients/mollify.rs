//! Convolution with the standard bump
//!
//! ```text
//! ϱ(z) = C_d exp(−1/(1−|z|²)) 1_{|z|<1},     ϱ_ε(z) = ε^{−d} ϱ(z/ε),
//! ```
//!
//! evaluated as `b_ε(x) = Σ_q ω_q b(x − ε z_q)` with `ω_q = w_q ϱ(z_q)` on a
//! tensor Gauss–Legendre rule of the unit ball. Derivatives move onto the
//! kernel: `∂_k b_ε(x) = ε^{−1} Σ_q w_q ∂_kϱ(z_q) b(x − ε z_q)`, and the
//! Hessian picks up `ε^{−2}` and `∂_k∂_jϱ`.

use super::{Coefficients, VectorFieldSpec};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, unit_ball_volume, BallRule};
use std::sync::Arc;

/// Default node budget: 2048 in `d ≤ 2`, 8192 in `d = 3`.
pub fn default_budget(d: usize) -> usize {
    if d <= 2 {
        2048
    } else {
        8192
    }
}

/// Unnormalised bump `exp(−1/(1−r²))`.
fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Normalised bump kernel together with its quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierKernel {
    pub d: usize,
    /// `C_d`, so that `∫ C_d exp(−1/(1−|z|²)) dz = 1`.
    pub normalization: f64,
    pub rule: BallRule,
    /// `ω_q`, rescaled to sum to one exactly.
    pub weights: Vec<f64>,
    /// `w_q ∇ϱ(z_q)`, row-major `n × d`.
    pub grad_weights: Vec<f64>,
    /// `w_q ∇²ϱ(z_q)`, row-major `n × d × d`.
    pub hess_weights: Vec<f64>,
    /// `|Σ_q w_q ϱ(z_q) − 1|` before rescaling.
    pub mass_defect: f64,
}

impl MollifierKernel {
    pub fn new(d: usize, budget: usize) -> Result<Self> {
        let rule = BallRule::with_budget(d, budget)?;
        let sphere = d as f64 * unit_ball_volume(d);
        let radial = integrate(|r| bump(r * r) * r.powi(d as i32 - 1), 0.0, 1.0, 200, 16);
        let normalization = 1.0 / (sphere * radial);
        let n = rule.len();
        let mut weights = Vec::with_capacity(n);
        let mut grad_weights = Vec::with_capacity(n * d);
        let mut hess_weights = Vec::with_capacity(n * d * d);
        for q in 0..n {
            let z = rule.node(q);
            let r2: f64 = z.iter().map(|v| v * v).sum();
            let w = rule.weights[q];
            let rho = normalization * bump(r2);
            weights.push(w * rho);
            if rho == 0.0 {
                grad_weights.extend(std::iter::repeat_n(0.0, d));
                hess_weights.extend(std::iter::repeat_n(0.0, d * d));
                continue;
            }
            let u = 1.0 - r2;
            for zj in z {
                grad_weights.push(w * rho * (-2.0 * zj / (u * u)));
            }
            for k in 0..d {
                for j in 0..d {
                    let zz = z[j] * z[k];
                    let delta = if j == k { 1.0 } else { 0.0 };
                    let v = 4.0 * zz / u.powi(4) - 2.0 * delta / (u * u) - 8.0 * zz / u.powi(3);
                    hess_weights.push(w * rho * v);
                }
            }
        }
        let mass: f64 = weights.iter().sum();
        let mass_defect = (mass - 1.0).abs();
        for v in weights
            .iter_mut()
            .chain(grad_weights.iter_mut())
            .chain(hess_weights.iter_mut())
        {
            *v /= mass;
        }
        Ok(MollifierKernel {
            d,
            normalization,
            rule,
            weights,
            grad_weights,
            hess_weights,
            mass_defect,
        })
    }

    pub fn standard(d: usize) -> Self {
        Self::new(d, default_budget(d)).expect("default budget is positive")
    }

    /// `ϱ(z)`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.normalization * bump(z.iter().map(|v| v * v).sum())
    }

    /// `‖ϱ‖∞ = C_d e^{−1}`.
    pub fn sup(&self) -> f64 {
        self.normalization * (-1.0f64).exp()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug)]
struct Mollified {
    base: VectorFieldSpec,
    eps: f64,
    kernel: Arc<MollifierKernel>,
}

impl Mollified {
    /// `out[a·w + c] = scale · Σ_q W[q·w + c] f_a(x − ε z_q)`.
    fn sum<F: Fn(&[f64], &mut [f64])>(&self, x: &[f64], n: usize, w: &[f64], width: usize, scale: f64, out: &mut [f64], f: F) {
        let d = self.kernel.d;
        let mut y = vec![0.0; d];
        let mut v = vec![0.0; n];
        out.fill(0.0);
        for q in 0..self.kernel.len() {
            let wq = &w[q * width..(q + 1) * width];
            if wq.iter().all(|c| *c == 0.0) {
                continue;
            }
            let z = self.kernel.rule.node(q);
            for i in 0..d {
                y[i] = x[i] - self.eps * z[i];
            }
            f(&y, &mut v);
            for a in 0..n {
                for c in 0..width {
                    out[a * width + c] += wq[c] * v[a];
                }
            }
        }
        if scale != 1.0 {
            out.iter_mut().for_each(|o| *o *= scale);
        }
    }
}

impl Coefficients for Mollified {
    fn dim(&self) -> usize {
        self.base.d()
    }
    fn noise_dim(&self) -> usize {
        self.base.m()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let k = &self.kernel;
        self.sum(x, self.dim(), &k.weights, 1, 1.0, out, |y, o| self.base.drift(y, o));
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let k = &self.kernel;
        let n = self.dim() * self.noise_dim();
        self.sum(x, n, &k.weights, 1, 1.0, out, |y, o| self.base.diffusion(y, o));
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let k = &self.kernel;
        let d = self.dim();
        self.sum(x, d, &k.grad_weights, d, 1.0 / self.eps, out, |y, o| self.base.drift(y, o));
        true
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let k = &self.kernel;
        let d = self.dim();
        let n = d * self.noise_dim();
        self.sum(x, n, &k.grad_weights, d, 1.0 / self.eps, out, |y, o| self.base.diffusion(y, o));
        true
    }
    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let k = &self.kernel;
        let d = self.dim();
        let n = d * self.noise_dim();
        let s = 1.0 / (self.eps * self.eps);
        self.sum(x, n, &k.hess_weights, d * d, s, out, |y, o| self.base.diffusion(y, o));
        true
    }
}

/// `(b * ϱ_ε, σ * ϱ_ε)` with kernel-differentiated derivatives.
pub fn mollify(field: &VectorFieldSpec, eps: f64, kernel: &Arc<MollifierKernel>) -> Result<VectorFieldSpec> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    if kernel.is_empty() {
        return Err(Error::Config("mollifier quadrature has no nodes".into()));
    }
    if kernel.d != field.d() {
        return Err(Error::Dimension {
            expected: field.d(),
            got: kernel.d,
        });
    }
    let mut params = field.params.clone();
    params.insert("eps".into(), eps);
    let mut out = VectorFieldSpec::new(
        format!("{}*rho_{eps}", field.name),
        Arc::new(Mollified {
            base: field.clone(),
            eps,
            kernel: kernel.clone(),
        }),
    )
    .with_params(params);
    if let Some(c) = field.growth_constant {
        out = out.with_growth(c * (1.0 + eps));
    }
    out.warnings = field.warnings.clone();
    if let Some(beta) = field.singular_exponent {
        if beta <= -(field.locus.codim(field.d()) as f64) {
            out.warnings.push(format!(
                "`{}` has a non-integrable singularity (exponent {beta}); values at points within {eps} of it are unreliable",
                field.name
            ));
        }
    }
    Ok(out)
}
