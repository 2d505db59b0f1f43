//! Coefficient pairs `(b, σ)` and the operations that approximate them.
//!
//! A field is a drift `b: ℝ^d → ℝ^d` and a diffusion `σ: ℝ^d → ℝ^{d×m}`
//! stored row-major, `σ^{il} = out[i·m + l]`. Derivative layouts:
//!
//! ```text
//! ∂_j b^i        = jac[i·d + j]
//! ∂_k σ^{il}     = jac[(i·m + l)·d + k]
//! ∂_k∂_j σ^{il}  = hess[((i·m + l)·d + k)·d + j]
//! ```
//!
//! Analytic derivatives are optional. When a field does not provide them the
//! evaluators fall back to central differences with step `h = 1e-4·(1+|x|)`,
//! unless the fallback has been disabled.

mod catalog;
mod cutoff;
mod maximal;
mod mollify;
mod stratonovich;

pub use catalog::{catalog, entry, CATALOG};
pub use cutoff::{apply_cutoff, CutoffProfile};
pub use maximal::{ball_average, maximal_function, maximal_function_of, RadiusLadder, SampledGrid, ShellRule};
pub use mollify::{mollify, MollifierKernel};
pub use stratonovich::{drift_corrected, rescale_time, scale_diffusion, stratonovich_correction};

use crate::error::{Error, Result};
use crate::linalg::norm;
use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Raw evaluators of a coefficient pair.
///
/// The derivative methods return `false` when no analytic expression is
/// available at `x`.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
    fn drift_jacobian(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }
    fn diffusion_jacobian(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }
    fn diffusion_hessian(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Smooth,
    SobolevSingular,
}

/// Where a field fails to be differentiable.
#[derive(Debug, Clone, PartialEq)]
pub enum SingularLocus {
    None,
    Point(Vec<f64>),
    Hyperplane { axis: usize, offset: f64 },
}

impl SingularLocus {
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            SingularLocus::None => f64::INFINITY,
            SingularLocus::Point(p) => crate::linalg::dist(x, p),
            SingularLocus::Hyperplane { axis, offset } => (x[*axis] - offset).abs(),
        }
    }

    /// Codimension of the locus in `ℝ^d`.
    pub fn codim(&self, d: usize) -> usize {
        match self {
            SingularLocus::None => 0,
            SingularLocus::Point(_) => d,
            SingularLocus::Hyperplane { .. } => 1,
        }
    }
}

/// Perturbation applied to queries that hit the singular locus exactly.
pub const LOCUS_NUDGE: f64 = 1e-12;

/// A named coefficient pair with its metadata.
#[derive(Debug, Clone)]
pub struct VectorFieldSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub smoothness: Smoothness,
    pub locus: SingularLocus,
    /// `C` in `|b(x)| + |σ(x)| ≤ C(1+|x|)`, when the entry has linear growth.
    pub growth_constant: Option<f64>,
    /// `β` such that `|b| ~ dist(x, locus)^β` near the locus; the field is
    /// locally integrable iff `β > −codim`.
    pub singular_exponent: Option<f64>,
    pub finite_differences: bool,
    pub warnings: Vec<String>,
    inner: Arc<dyn Coefficients>,
}

impl VectorFieldSpec {
    pub fn new(name: impl Into<String>, inner: Arc<dyn Coefficients>) -> Self {
        VectorFieldSpec {
            name: name.into(),
            params: BTreeMap::new(),
            smoothness: Smoothness::Smooth,
            locus: SingularLocus::None,
            growth_constant: None,
            singular_exponent: None,
            finite_differences: true,
            warnings: Vec::new(),
            inner,
        }
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn with_growth(mut self, c: f64) -> Self {
        self.growth_constant = Some(c);
        self
    }

    pub fn with_singularity(mut self, locus: SingularLocus, exponent: f64) -> Self {
        self.smoothness = Smoothness::SobolevSingular;
        self.locus = locus;
        self.singular_exponent = Some(exponent);
        self
    }

    pub fn with_finite_differences(mut self, on: bool) -> Self {
        self.finite_differences = on;
        self
    }

    pub fn coefficients(&self) -> &Arc<dyn Coefficients> {
        &self.inner
    }

    pub fn d(&self) -> usize {
        self.inner.dim()
    }

    pub fn m(&self) -> usize {
        self.inner.noise_dim()
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.inner.drift(x, out)
    }

    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        self.inner.diffusion(x, out)
    }

    pub fn drift_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d()];
        self.drift(x, &mut out);
        out
    }

    pub fn diffusion_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d() * self.m()];
        self.diffusion(x, &mut out);
        out
    }

    /// `x`, moved off the singular locus if it lies exactly on it.
    fn guard<'a>(&self, x: &'a [f64]) -> Cow<'a, [f64]> {
        if self.locus.distance(x) != 0.0 {
            return Cow::Borrowed(x);
        }
        let mut y = x.to_vec();
        let k = match self.locus {
            SingularLocus::Hyperplane { axis, .. } => axis,
            _ => 0,
        };
        y[k] += LOCUS_NUDGE;
        Cow::Owned(y)
    }

    fn missing(&self, what: &str) -> Error {
        Error::MissingDerivative(format!(
            "{what} of `{}` has no analytic form and finite differences are disabled",
            self.name
        ))
    }

    /// `∂_j b^i` (analytic, else central differences).
    pub fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let x = self.guard(x);
        if self.inner.drift_jacobian(&x, out) {
            return Ok(());
        }
        if !self.finite_differences {
            return Err(self.missing("∇b"));
        }
        let d = self.d();
        central_difference(&x, d, out, |y, o| self.inner.drift(y, o));
        Ok(())
    }

    /// `∂_k σ^{il}` (analytic, else central differences).
    pub fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let x = self.guard(x);
        if self.inner.diffusion_jacobian(&x, out) {
            return Ok(());
        }
        if !self.finite_differences {
            return Err(self.missing("∇σ"));
        }
        let dm = self.d() * self.m();
        central_difference(&x, dm, out, |y, o| self.inner.diffusion(y, o));
        Ok(())
    }

    /// `∂_k∂_j σ^{il}` (analytic, else differences of the Jacobian).
    pub fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let x = self.guard(x);
        if self.inner.diffusion_hessian(&x, out) {
            return Ok(());
        }
        if !self.finite_differences {
            return Err(self.missing("∇²σ"));
        }
        let d = self.d();
        let n = d * self.m() * d;
        let mut tmp = vec![0.0; n * d];
        central_difference(&x, n, &mut tmp, |y, o| {
            if !self.inner.diffusion_jacobian(y, o) {
                central_difference(y, n / d, o, |z, p| self.inner.diffusion(z, p));
            }
        });
        // tmp[((i m + l) d + k) d + j] = ∂_j ∂_k σ^{il}; symmetrise
        for a in 0..n / d {
            for k in 0..d {
                for j in 0..d {
                    let v = 0.5 * (tmp[(a * d + k) * d + j] + tmp[(a * d + j) * d + k]);
                    out[(a * d + k) * d + j] = v;
                }
            }
        }
        Ok(())
    }

    pub fn drift_jacobian_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d() * self.d()];
        self.drift_jacobian(x, &mut out)?;
        Ok(out)
    }

    pub fn diffusion_jacobian_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d() * self.m() * self.d()];
        self.diffusion_jacobian(x, &mut out)?;
        Ok(out)
    }

    pub fn diffusion_hessian_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.d();
        let mut out = vec![0.0; d * self.m() * d * d];
        self.diffusion_hessian(x, &mut out)?;
        Ok(out)
    }

    /// `div b`.
    pub fn div_drift(&self, x: &[f64]) -> Result<f64> {
        let d = self.d();
        let j = self.drift_jacobian_at(x)?;
        Ok((0..d).map(|i| j[i * d + i]).sum())
    }

    /// `|∇b|` in the Frobenius norm.
    pub fn drift_gradient_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(norm(&self.drift_jacobian_at(x)?))
    }

    /// `div σ^{·l} = ∂_i σ^{il}` for each noise column.
    pub fn div_diffusion(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (d, m) = (self.d(), self.m());
        let j = self.diffusion_jacobian_at(x)?;
        Ok((0..m)
            .map(|l| (0..d).map(|i| j[(i * m + l) * d + i]).sum())
            .collect())
    }

    /// `∂_i σ^{jl} ∂_j σ^{il}`.
    pub fn noise_contraction(&self, x: &[f64]) -> Result<f64> {
        let j = self.diffusion_jacobian_at(x)?;
        Ok(contraction(&j, self.d(), self.m()))
    }

    /// `σ^{il} ∂²_{ij} σ^{jl}`.
    pub fn hessian_contraction(&self, x: &[f64]) -> Result<f64> {
        let (d, m) = (self.d(), self.m());
        let s = self.diffusion_at(x);
        let h = self.diffusion_hessian_at(x)?;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                for l in 0..m {
                    acc += s[i * m + l] * h[((j * m + l) * d + i) * d + j];
                }
            }
        }
        Ok(acc)
    }

    /// `Σ_{j,l} σ^{jl} ∂_j σ^{il}`, the Itô–Stratonovich correction
    /// without its factor ½.
    pub fn stratonovich_term(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let (d, m) = (self.d(), self.m());
        let s = self.diffusion_at(x);
        let j = self.diffusion_jacobian_at(x)?;
        stratonovich_contract(&s, &j, d, m, out);
        Ok(())
    }
}

/// `∂_i σ^{jl} ∂_j σ^{il}` from a diffusion Jacobian.
pub fn contraction(j: &[f64], d: usize, m: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        for k in 0..d {
            for l in 0..m {
                acc += j[(k * m + l) * d + i] * j[(i * m + l) * d + k];
            }
        }
    }
    acc
}

pub(crate) fn stratonovich_contract(s: &[f64], j: &[f64], d: usize, m: usize, out: &mut [f64]) {
    for i in 0..d {
        let mut acc = 0.0;
        for k in 0..d {
            for l in 0..m {
                acc += s[k * m + l] * j[(i * m + l) * d + k];
            }
        }
        out[i] = acc;
    }
}

/// Finite-difference step used by the fallback.
pub fn fd_step(x: &[f64]) -> f64 {
    1e-4 * (1.0 + norm(x))
}

/// Central differences of a vector function with `n` outputs; writes
/// `out[a·d + k] = ∂_k f_a`.
pub(crate) fn central_difference<F: Fn(&[f64], &mut [f64])>(x: &[f64], n: usize, out: &mut [f64], f: F) {
    let d = x.len();
    let h = fd_step(x);
    let mut y = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for k in 0..d {
        y[k] = x[k] + h;
        f(&y, &mut fp);
        y[k] = x[k] - h;
        f(&y, &mut fm);
        y[k] = x[k];
        for a in 0..n {
            out[a * d + k] = (fp[a] - fm[a]) / (2.0 * h);
        }
    }
}
