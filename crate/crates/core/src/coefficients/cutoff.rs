//! Smooth radial cutoff `χ_n(x) = χ(|x|/n)` with
//!
//! ```text
//! χ(r) = 1 − s(r−1),   s(t) = ψ(t)/(ψ(t)+ψ(1−t)),   ψ(t) = e^{−1/t} 1_{t>0},
//! ```
//!
//! so `χ = 1` on `[0,1]`, `χ = 0` on `[2,∞)`, and `|∇χ_n| ≤ C/n` with
//! `C = max|s′|`.

use super::{Coefficients, VectorFieldSpec};
use crate::error::{Error, Result};
use std::sync::Arc;

/// `(ψ, ψ′, ψ″)` at `t`.
fn psi(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let e = (-1.0 / t).exp();
    let t2 = t * t;
    (e, e / t2, e * (1.0 / (t2 * t2) - 2.0 / (t2 * t)))
}

/// `(s, s′, s″)` of the smooth step on `[0, 1]`.
fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (a, a1, a2) = psi(t);
    let (b, b1, b2) = psi(1.0 - t);
    // derivatives of B(t) = ψ(1−t)
    let (b1, b2) = (-b1, b2);
    let den = a + b;
    let num = a1 * b - a * b1;
    let s1 = num / (den * den);
    let num1 = a2 * b - a * b2;
    let den1 = 2.0 * den * (a1 + b1);
    let s2 = (num1 * den * den - num * den1) / den.powi(4);
    (a / den, s1, s2)
}

/// The cutoff family at scale `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub n: f64,
}

impl CutoffProfile {
    pub fn new(n: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::param("n", format!("must be positive, got {n}")));
        }
        Ok(CutoffProfile { n })
    }

    /// `(χ, χ′, χ″)` of the base profile at radius `r`.
    pub fn radial(r: f64) -> (f64, f64, f64) {
        let (s, s1, s2) = smoothstep(r - 1.0);
        (1.0 - s, -s1, -s2)
    }

    /// `C` in `‖∇χ_n‖∞ ≤ C/n`; `s′` peaks at the midpoint by symmetry.
    pub fn gradient_constant() -> f64 {
        smoothstep(0.5).1
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        Self::radial(crate::linalg::norm(x) / self.n).0
    }

    /// `χ_n`, `∇χ_n` and `∇²χ_n` (row-major) at `x`.
    pub fn derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = x.len();
        let r = crate::linalg::norm(x);
        let (c, c1, c2) = Self::radial(r / self.n);
        grad.fill(0.0);
        hess.fill(0.0);
        if c1 == 0.0 && c2 == 0.0 {
            return c;
        }
        let g = c1 / self.n;
        let h = c2 / (self.n * self.n);
        for j in 0..d {
            grad[j] = g * x[j] / r;
            for k in 0..d {
                let xx = x[j] * x[k] / (r * r);
                let delta = if j == k { 1.0 } else { 0.0 };
                hess[j * d + k] = h * xx + g * (delta - xx) / r;
            }
        }
        c
    }
}

#[derive(Debug)]
struct Cutoff {
    base: VectorFieldSpec,
    profile: CutoffProfile,
}

impl Cutoff {
    fn outside(&self, x: &[f64]) -> bool {
        crate::linalg::norm(x) >= 2.0 * self.profile.n
    }
}

impl Coefficients for Cutoff {
    fn dim(&self) -> usize {
        self.base.d()
    }
    fn noise_dim(&self) -> usize {
        self.base.m()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        if self.outside(x) {
            out.fill(0.0);
            return;
        }
        self.base.drift(x, out);
        let c = self.profile.value(x);
        out.iter_mut().for_each(|v| *v *= c);
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        if self.outside(x) {
            out.fill(0.0);
            return;
        }
        self.base.diffusion(x, out);
        let c = self.profile.value(x);
        out.iter_mut().for_each(|v| *v *= c);
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.dim();
        if self.outside(x) {
            out.fill(0.0);
            return true;
        }
        if self.base.drift_jacobian(x, out).is_err() {
            return false;
        }
        let (mut g, mut h) = (vec![0.0; d], vec![0.0; d * d]);
        let c = self.profile.derivatives(x, &mut g, &mut h);
        let b = self.base.drift_at(x);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = c * out[i * d + j] + b[i] * g[j];
            }
        }
        true
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.dim();
        if self.outside(x) {
            out.fill(0.0);
            return true;
        }
        if self.base.diffusion_jacobian(x, out).is_err() {
            return false;
        }
        let (mut g, mut h) = (vec![0.0; d], vec![0.0; d * d]);
        let c = self.profile.derivatives(x, &mut g, &mut h);
        let s = self.base.diffusion_at(x);
        for (r, sr) in s.iter().enumerate() {
            for k in 0..d {
                out[r * d + k] = c * out[r * d + k] + sr * g[k];
            }
        }
        true
    }
    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.dim();
        if self.outside(x) {
            out.fill(0.0);
            return true;
        }
        let Ok(j) = self.base.diffusion_jacobian_at(x) else {
            return false;
        };
        if self.base.diffusion_hessian(x, out).is_err() {
            return false;
        }
        let (mut g, mut h) = (vec![0.0; d], vec![0.0; d * d]);
        let c = self.profile.derivatives(x, &mut g, &mut h);
        let s = self.base.diffusion_at(x);
        for (r, sr) in s.iter().enumerate() {
            for k in 0..d {
                for l in 0..d {
                    let idx = (r * d + k) * d + l;
                    out[idx] = c * out[idx] + g[k] * j[r * d + l] + g[l] * j[r * d + k] + sr * h[k * d + l];
                }
            }
        }
        true
    }
}

/// `(b χ_n, σ χ_n)`, supported in `B_{2n}`.
pub fn apply_cutoff(field: &VectorFieldSpec, profile: CutoffProfile) -> VectorFieldSpec {
    let mut params = field.params.clone();
    params.insert("cutoff_n".into(), profile.n);
    let mut out = VectorFieldSpec::new(
        format!("{}*chi_{}", field.name, profile.n),
        Arc::new(Cutoff {
            base: field.clone(),
            profile,
        }),
    )
    .with_params(params)
    .with_finite_differences(field.finite_differences);
    out.smoothness = field.smoothness;
    out.locus = field.locus.clone();
    out.singular_exponent = field.singular_exponent;
    out.growth_constant = field.growth_constant;
    out.warnings = field.warnings.clone();
    out
}
