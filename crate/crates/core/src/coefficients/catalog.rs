//! Named catalog of coefficient pairs.
//!
//! | name             | d | m | drift                  | diffusion              |
//! |------------------|---|---|------------------------|------------------------|
//! | `zero`           | d | m | 0                      | 0                      |
//! | `constant`       | d | m | c                      | S                      |
//! | `linear`         | d | m | A x + c                | S + B x                |
//! | `brownian`       | d | d | 0                      | s I                    |
//! | `ou`             | d | d | −θ x                   | s I                    |
//! | `geometric`      | 1 | 1 | a x                    | s x                    |
//! | `rotation`       | 2 | 2 | ω(−y, x)               | s I                    |
//! | `shear_noise`    | 2 | 1 | 0                      | (c y, 0)ᵀ              |
//! | `degenerate`     | 2 | 2 | 0                      | diag(s, 0)             |
//! | `singular_drift` | 1 | 1 | sign(x)\|x\|^γ         | s                      |
//! | `sine_diffusion` | 1 | 1 | −θ x                   | 1 + a sin x            |
//! | `double_well`    | 1 | 1 | x − x³                 | s                      |
//!
//! Matrix parameters are spelled with digit suffixes: `a01` is `A_{01}`,
//! `s10` is `S_{10}` and `b102` is the coefficient of `x_2` in `σ^{10}`.
//! Scalars `c` and `s` broadcast to every drift component and to the
//! diagonal of `S` respectively.

use super::{Coefficients, SingularLocus, VectorFieldSpec};
use crate::error::{Error, Result};
use crate::linalg::norm;
use std::collections::BTreeMap;
use std::sync::Arc;

pub const CATALOG: &[&str] = &[
    "zero",
    "constant",
    "linear",
    "brownian",
    "ou",
    "geometric",
    "rotation",
    "shear_noise",
    "degenerate",
    "singular_drift",
    "sine_diffusion",
    "double_well",
];

/// Drift `A x + c`, diffusion `S + B x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub d: usize,
    pub m: usize,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    pub s: Vec<f64>,
    /// `σ^{il}(x) = S^{il} + Σ_j B[(i m + l) d + j] x_j`.
    pub b: Vec<f64>,
}

impl Affine {
    pub fn zero(d: usize, m: usize) -> Self {
        Affine {
            d,
            m,
            c: vec![0.0; d],
            a: vec![0.0; d * d],
            s: vec![0.0; d * m],
            b: vec![0.0; d * m * d],
        }
    }

    fn growth(&self) -> f64 {
        (norm(&self.c) + norm(&self.s)).max(norm(&self.a) + norm(&self.b))
    }
}

impl Coefficients for Affine {
    fn dim(&self) -> usize {
        self.d
    }
    fn noise_dim(&self) -> usize {
        self.m
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            out[i] = self.c[i] + (0..d).map(|j| self.a[i * d + j] * x[j]).sum::<f64>();
        }
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let (d, m) = (self.d, self.m);
        for r in 0..d * m {
            out[r] = self.s[r] + (0..d).map(|j| self.b[r * d + j] * x[j]).sum::<f64>();
        }
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&self.a);
        true
    }
    fn diffusion_jacobian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out.copy_from_slice(&self.b);
        true
    }
    fn diffusion_hessian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out.fill(0.0);
        true
    }
}

/// `b(x) = sign(x)|x|^γ`, constant `σ = s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularDrift {
    pub gamma: f64,
    pub sigma: f64,
}

impl Coefficients for SingularDrift {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        // odd, so the limiting value at 0 is 0
        out[0] = x[0].signum() * x[0].abs().powf(self.gamma);
        if x[0] == 0.0 {
            out[0] = 0.0;
        }
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        out[0] = self.gamma * x[0].abs().powf(self.gamma - 1.0);
        true
    }
    fn diffusion_jacobian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[0] = 0.0;
        true
    }
    fn diffusion_hessian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[0] = 0.0;
        true
    }
}

/// `b = −θx`, `σ = 1 + a sin x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineDiffusion {
    pub theta: f64,
    pub amp: f64,
}

impl Coefficients for SineDiffusion {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.theta * x[0];
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0 + self.amp * x[0].sin();
    }
    fn drift_jacobian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[0] = -self.theta;
        true
    }
    fn diffusion_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        out[0] = self.amp * x[0].cos();
        true
    }
    fn diffusion_hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        out[0] = -self.amp * x[0].sin();
        true
    }
}

/// `b = x − x³`, constant `σ = s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWell {
    pub sigma: f64,
}

impl Coefficients for DoubleWell {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] - x[0].powi(3);
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn drift_jacobian(&self, x: &[f64], out: &mut [f64]) -> bool {
        out[0] = 1.0 - 3.0 * x[0] * x[0];
        true
    }
    fn diffusion_jacobian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[0] = 0.0;
        true
    }
    fn diffusion_hessian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[0] = 0.0;
        true
    }
}

struct Params<'a> {
    entry: &'a str,
    map: &'a BTreeMap<String, f64>,
    used: Vec<String>,
}

impl<'a> Params<'a> {
    fn get(&mut self, key: &str, default: f64) -> f64 {
        self.used.push(key.to_string());
        self.map.get(key).copied().unwrap_or(default)
    }

    fn dim(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = self.get(key, default as f64);
        if v < 1.0 || v > 3.0 || v.fract() != 0.0 {
            return Err(Error::param(
                format!("{}.{key}", self.entry),
                format!("must be an integer in 1..=3, got {v}"),
            ));
        }
        Ok(v as usize)
    }

    /// Digit-suffixed matrix entries, with an optional scalar broadcast.
    fn indexed(&mut self, prefix: &str, dims: &[usize], out: &mut [f64]) {
        let mut idx = vec![0usize; dims.len()];
        for v in out.iter_mut() {
            let key: String = std::iter::once(prefix.to_string())
                .chain(idx.iter().map(|i| i.to_string()))
                .collect();
            *v = self.get(&key, *v);
            for p in (0..dims.len()).rev() {
                idx[p] += 1;
                if idx[p] < dims[p] {
                    break;
                }
                idx[p] = 0;
            }
        }
    }

    fn finish(self) -> Result<()> {
        for k in self.map.keys() {
            if !self.used.contains(k) {
                return Err(Error::param(
                    format!("{}.{k}", self.entry),
                    "unknown parameter for this catalog entry",
                ));
            }
        }
        Ok(())
    }
}

fn affine_spec(name: &str, map: &BTreeMap<String, f64>, f: Affine) -> VectorFieldSpec {
    let g = f.growth();
    VectorFieldSpec::new(name, Arc::new(f))
        .with_params(map.clone())
        .with_growth(g)
}

/// Build a catalog entry from its name and parameter map.
pub fn catalog(name: &str, map: &BTreeMap<String, f64>) -> Result<VectorFieldSpec> {
    let mut p = Params {
        entry: name,
        map,
        used: Vec::new(),
    };
    let spec = match name {
        "zero" => {
            let d = p.dim("d", 1)?;
            let m = p.dim("m", d)?;
            affine_spec(name, map, Affine::zero(d, m))
        }
        "constant" | "linear" => {
            let d = p.dim("d", 1)?;
            let m = p.dim("m", d)?;
            let mut f = Affine::zero(d, m);
            let c = p.get("c", 0.0);
            f.c.fill(c);
            p.indexed("c", &[d], &mut f.c);
            let s = p.get("s", 0.0);
            for i in 0..d.min(m) {
                f.s[i * m + i] = s;
            }
            p.indexed("s", &[d, m], &mut f.s);
            if name == "linear" {
                p.indexed("a", &[d, d], &mut f.a);
                p.indexed("b", &[d, m, d], &mut f.b);
            }
            affine_spec(name, map, f)
        }
        "brownian" | "ou" => {
            let d = p.dim("d", 1)?;
            let s = p.get("sigma", 1.0);
            let theta = if name == "ou" { p.get("theta", 1.0) } else { 0.0 };
            let mut f = Affine::zero(d, d);
            for i in 0..d {
                f.a[i * d + i] = -theta;
                f.s[i * d + i] = s;
            }
            affine_spec(name, map, f)
        }
        "geometric" => {
            let mut f = Affine::zero(1, 1);
            f.a[0] = p.get("a", 0.1);
            f.b[0] = p.get("s", 0.2);
            affine_spec(name, map, f)
        }
        "rotation" => {
            let w = p.get("omega", 1.0);
            let s = p.get("sigma", 0.0);
            let mut f = Affine::zero(2, 2);
            f.a = vec![0.0, -w, w, 0.0];
            f.s = vec![s, 0.0, 0.0, s];
            affine_spec(name, map, f)
        }
        "shear_noise" => {
            let mut f = Affine::zero(2, 1);
            f.b[1] = p.get("c", 1.0);
            affine_spec(name, map, f)
        }
        "degenerate" => {
            let mut f = Affine::zero(2, 2);
            f.s[0] = p.get("sigma", 1.0);
            affine_spec(name, map, f)
        }
        "singular_drift" => {
            let gamma = p.get("gamma", 0.5);
            let sigma = p.get("sigma", 0.5);
            if !(0.0..1.0).contains(&gamma) {
                return Err(Error::param("singular_drift.gamma", "must lie in [0, 1)"));
            }
            VectorFieldSpec::new(name, Arc::new(SingularDrift { gamma, sigma }))
                .with_params(map.clone())
                .with_growth(1.0 + sigma.abs())
                .with_singularity(SingularLocus::Point(vec![0.0]), gamma)
        }
        "sine_diffusion" => {
            let theta = p.get("theta", 0.0);
            let amp = p.get("amp", 0.5);
            VectorFieldSpec::new(name, Arc::new(SineDiffusion { theta, amp }))
                .with_params(map.clone())
                .with_growth(theta.abs().max(1.0 + amp.abs()))
        }
        "double_well" => {
            let sigma = p.get("sigma", 0.5);
            VectorFieldSpec::new(name, Arc::new(DoubleWell { sigma })).with_params(map.clone())
        }
        _ => {
            return Err(Error::Config(format!(
                "unknown field `{name}`; expected one of {}",
                CATALOG.join(", ")
            )))
        }
    };
    p.finish()?;
    Ok(spec)
}

/// Shorthand for building a catalog entry from `(key, value)` pairs.
pub fn entry(name: &str, params: &[(&str, f64)]) -> Result<VectorFieldSpec> {
    let map = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    catalog(name, &map)
}
