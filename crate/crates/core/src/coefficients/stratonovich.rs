//! Drift corrections between Stratonovich and Itô forms, and diffusion
//! rescaling.
//!
//! A Stratonovich equation `dX = b dt + σ ∘ dW` has the Itô form with drift
//!
//! ```text
//! b_σ^i = b^i + ½ σ^{jl} ∂_j σ^{il}.
//! ```

use super::{Coefficients, VectorFieldSpec};
use crate::error::{Error, Result};
use std::sync::Arc;

#[derive(Debug)]
struct DriftCorrected {
    base: VectorFieldSpec,
    factor: f64,
}

impl Coefficients for DriftCorrected {
    fn dim(&self) -> usize {
        self.base.d()
    }
    fn noise_dim(&self) -> usize {
        self.base.m()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        self.base.drift(x, out);
        let mut c = vec![0.0; d];
        // availability was checked at construction
        if self.base.stratonovich_term(x, &mut c).is_ok() {
            for i in 0..d {
                out[i] += self.factor * c[i];
            }
        }
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        self.base.diffusion(x, out)
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let (d, m) = (self.dim(), self.noise_dim());
        if self.base.drift_jacobian(x, out).is_err() {
            return false;
        }
        let (Ok(j), Ok(h)) = (self.base.diffusion_jacobian_at(x), self.base.diffusion_hessian_at(x)) else {
            return false;
        };
        let s = self.base.diffusion_at(x);
        for i in 0..d {
            for k in 0..d {
                let mut acc = 0.0;
                for q in 0..d {
                    for l in 0..m {
                        acc += j[(q * m + l) * d + k] * j[(i * m + l) * d + q]
                            + s[q * m + l] * h[((i * m + l) * d + k) * d + q];
                    }
                }
                out[i * d + k] += self.factor * acc;
            }
        }
        true
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        self.base.diffusion_jacobian(x, out).is_ok()
    }
    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        self.base.diffusion_hessian(x, out).is_ok()
    }
}

/// Drift `b + factor · σ^{jl}∂_jσ^{·l}` with unchanged diffusion.
pub fn drift_corrected(field: &VectorFieldSpec, factor: f64) -> Result<VectorFieldSpec> {
    let probe = vec![0.0; field.d()];
    let mut c = vec![0.0; field.d()];
    field.stratonovich_term(&probe, &mut c).map_err(|e| match e {
        Error::MissingDerivative(s) => Error::MissingDerivative(format!("drift correction needs ∇σ: {s}")),
        e => e,
    })?;
    let mut out = VectorFieldSpec::new(
        format!("{}+{factor}σ∂σ", field.name),
        Arc::new(DriftCorrected {
            base: field.clone(),
            factor,
        }),
    )
    .with_params(field.params.clone())
    .with_finite_differences(field.finite_differences);
    out.smoothness = field.smoothness;
    out.locus = field.locus.clone();
    out.singular_exponent = field.singular_exponent;
    out.warnings = field.warnings.clone();
    Ok(out)
}

/// The Itô drift `b_σ = b + ½σ^{jl}∂_jσ^{·l}` of a Stratonovich pair.
pub fn stratonovich_correction(field: &VectorFieldSpec) -> Result<VectorFieldSpec> {
    drift_corrected(field, 0.5)
}

#[derive(Debug)]
struct ScaledDiffusion {
    base: VectorFieldSpec,
    scale: f64,
}

impl Coefficients for ScaledDiffusion {
    fn dim(&self) -> usize {
        self.base.d()
    }
    fn noise_dim(&self) -> usize {
        self.base.m()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.base.drift(x, out)
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        self.base.diffusion(x, out);
        out.iter_mut().for_each(|v| *v *= self.scale);
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        self.base.drift_jacobian(x, out).is_ok()
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let ok = self.base.diffusion_jacobian(x, out).is_ok();
        out.iter_mut().for_each(|v| *v *= self.scale);
        ok
    }
    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let ok = self.base.diffusion_hessian(x, out).is_ok();
        out.iter_mut().for_each(|v| *v *= self.scale);
        ok
    }
}

/// `(b, c σ)`.
pub fn scale_diffusion(field: &VectorFieldSpec, c: f64) -> VectorFieldSpec {
    let mut out = VectorFieldSpec::new(
        format!("{}[σ×{c}]", field.name),
        Arc::new(ScaledDiffusion {
            base: field.clone(),
            scale: c,
        }),
    )
    .with_params(field.params.clone())
    .with_finite_differences(field.finite_differences);
    out.smoothness = field.smoothness;
    out.locus = field.locus.clone();
    out.singular_exponent = field.singular_exponent;
    out.warnings = field.warnings.clone();
    out
}

#[derive(Debug)]
struct TimeRescaled {
    base: VectorFieldSpec,
    horizon: f64,
}

impl Coefficients for TimeRescaled {
    fn dim(&self) -> usize {
        self.base.d()
    }
    fn noise_dim(&self) -> usize {
        self.base.m()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.base.drift(x, out);
        out.iter_mut().for_each(|v| *v *= self.horizon);
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        self.base.diffusion(x, out);
        let s = self.horizon.sqrt();
        out.iter_mut().for_each(|v| *v *= s);
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let ok = self.base.drift_jacobian(x, out).is_ok();
        out.iter_mut().for_each(|v| *v *= self.horizon);
        ok
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let ok = self.base.diffusion_jacobian(x, out).is_ok();
        let s = self.horizon.sqrt();
        out.iter_mut().for_each(|v| *v *= s);
        ok
    }
    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let ok = self.base.diffusion_hessian(x, out).is_ok();
        let s = self.horizon.sqrt();
        out.iter_mut().for_each(|v| *v *= s);
        ok
    }
}

/// `(T b, √T σ)`: the law of `X_{Ts}` for `s ∈ [0, 1]`.
pub fn rescale_time(field: &VectorFieldSpec, horizon: f64) -> Result<VectorFieldSpec> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param("t_end", format!("must be positive, got {horizon}")));
    }
    let mut out = VectorFieldSpec::new(
        format!("{}[t×{horizon}]", field.name),
        Arc::new(TimeRescaled {
            base: field.clone(),
            horizon,
        }),
    )
    .with_params(field.params.clone())
    .with_finite_differences(field.finite_differences);
    out.smoothness = field.smoothness;
    out.locus = field.locus.clone();
    out.singular_exponent = field.singular_exponent;
    out.warnings = field.warnings.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::catalog::entry;

    #[test]
    fn geometric_correction_is_half_x() {
        let f = entry("geometric", &[("a", 0.0), ("s", 1.0)]).unwrap();
        let g = stratonovich_correction(&f).unwrap();
        assert!((g.drift_at(&[0.8])[0] - 0.4).abs() < 1e-15);
        assert!((g.drift_jacobian_at(&[0.8]).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shear_noise_has_no_correction() {
        let f = entry("shear_noise", &[]).unwrap();
        let g = stratonovich_correction(&f).unwrap();
        assert_eq!(g.drift_at(&[0.3, -1.2]), vec![0.0, 0.0]);
    }

    #[test]
    fn missing_derivatives_are_reported() {
        #[derive(Debug)]
        struct Bare;
        impl Coefficients for Bare {
            fn dim(&self) -> usize {
                1
            }
            fn noise_dim(&self) -> usize {
                1
            }
            fn drift(&self, _: &[f64], o: &mut [f64]) {
                o[0] = 0.0
            }
            fn diffusion(&self, x: &[f64], o: &mut [f64]) {
                o[0] = x[0].sin()
            }
        }
        let f = VectorFieldSpec::new("bare", Arc::new(Bare));
        let g = stratonovich_correction(&f).unwrap();
        let x = 0.4f64;
        assert!((g.drift_at(&[x])[0] - 0.5 * x.sin() * x.cos()).abs() < 1e-8);
        let f = f.with_finite_differences(false);
        assert!(matches!(stratonovich_correction(&f), Err(Error::MissingDerivative(_))));
    }
}
