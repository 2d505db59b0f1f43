use super::grid::FVGrid;
use crate::coefficients::{mollify, MollifierKernel, Smoothness, VectorFieldSpec};
use crate::error::{Error, Result};
use crate::flow_sim::BoxLayout;
use crate::quadrature::pairwise_sum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Safety factor in the explicit stability limit.
pub const CFL_FACTOR: f64 = 0.4;

/// Clipped negative mass above which a warning is attached.
pub const CLIP_WARNING: f64 = 1e-6;

/// Reconstruction of face values for the advective flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FvScheme {
    /// First-order upwind, forward Euler.
    #[default]
    Upwind,
    /// Minmod-limited linear reconstruction with two-stage SSP Runge–Kutta.
    Muscl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpeConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Snapshot times in `[0, t_end]`, snapped to the step grid.
    pub saves: Vec<f64>,
    pub scheme: FvScheme,
    /// Mollification radius for irregular fields; `None` means one cell.
    pub eps_pde: Option<f64>,
}

/// Density trajectory with conservation diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FpeSolution {
    pub times: Vec<f64>,
    pub snapshots: Vec<FVGrid>,
    pub dt: f64,
    pub steps: usize,
    pub dt_limit: f64,
    /// Largest `|Σu·vol|` change over a single step.
    pub max_mass_drift: f64,
    /// Mass that the zero-flux walls held back (outward flux with empty
    /// ghost cells, accumulated).
    pub boundary_leak: f64,
    /// Negative mass removed by clipping.
    pub clipped_mass: f64,
    /// Mollification radius applied to the coefficients, if any.
    pub eps_pde: Option<f64>,
    pub warnings: Vec<String>,
}

/// Discrete operator `L u = −div(bu) + ½∂²_{ij}(a^{ij}u)` on a fixed grid.
struct Operator {
    layout: BoxLayout,
    d: usize,
    h: Vec<f64>,
    strides: Vec<usize>,
    /// Normal drift at faces, per axis; a face is indexed by the cell on
    /// its upper side, `i_k ∈ 0..=n_k`.
    bface: Vec<Vec<f64>>,
    face_strides: Vec<Vec<usize>>,
    /// `a = σσᵀ` per cell, row-major `d × d`.
    a: Vec<f64>,
    diffusive: bool,
    scheme: FvScheme,
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

impl Operator {
    fn new(field: &VectorFieldSpec, layout: &BoxLayout, scheme: FvScheme) -> Self {
        let d = layout.d();
        let m = field.m();
        let h: Vec<f64> = (0..d).map(|k| layout.width(k)).collect();
        let strides = strides_of(&layout.shape);
        let mut bface = Vec::with_capacity(d);
        let mut face_strides = Vec::with_capacity(d);
        for k in 0..d {
            let mut fs = layout.shape.clone();
            fs[k] += 1;
            let st = strides_of(&fs);
            let total: usize = fs.iter().product();
            let vals: Vec<f64> = (0..total)
                .into_par_iter()
                .map(|f| {
                    let mut x = vec![0.0; d];
                    let mut rem = f;
                    for j in 0..d {
                        let i = rem / st[j];
                        rem %= st[j];
                        x[j] = if j == k {
                            layout.lo[j] + i as f64 * h[j]
                        } else {
                            layout.lo[j] + (i as f64 + 0.5) * h[j]
                        };
                    }
                    field.drift_at(&x)[k]
                })
                .collect();
            bface.push(vals);
            face_strides.push(st);
        }
        let a: Vec<f64> = (0..layout.cells())
            .into_par_iter()
            .flat_map_iter(|c| {
                let s = field.diffusion_at(&layout.center(c));
                (0..d * d).map(move |ij| {
                    let (i, j) = (ij / d, ij % d);
                    (0..m).map(|l| s[i * m + l] * s[j * m + l]).sum::<f64>()
                })
            })
            .collect();
        Operator {
            layout: layout.clone(),
            d,
            h,
            strides,
            bface,
            face_strides,
            diffusive: a.iter().any(|v| *v != 0.0),
            a,
            scheme,
        }
    }

    fn limit(&self) -> f64 {
        let mut lim = f64::INFINITY;
        for k in 0..self.d {
            let bmax = self.bface[k].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if bmax > 0.0 {
                lim = lim.min(self.h[k] / bmax);
            }
        }
        let dd = self.d * self.d;
        let amax = (0..self.layout.cells())
            .map(|c| self.a[c * dd..(c + 1) * dd].iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        let hmin = self.h.iter().copied().fold(f64::INFINITY, f64::min);
        if amax > 0.0 {
            lim = lim.min(hmin * hmin / amax);
        }
        CFL_FACTOR * lim
    }

    fn idx(&self, c: usize, k: usize) -> usize {
        (c / self.strides[k]) % self.layout.shape[k]
    }

    /// `∂_j(a^{kj}u)` at cell `c`, centred inside and one-sided at walls.
    fn cross_derivative(&self, u: &[f64], c: usize, k: usize, j: usize) -> f64 {
        let dd = self.d * self.d;
        let au = |c: usize| self.a[c * dd + k * self.d + j] * u[c];
        let i = self.idx(c, j);
        let n = self.layout.shape[j];
        let s = self.strides[j];
        if n == 1 {
            return 0.0;
        }
        if i == 0 {
            (au(c + s) - au(c)) / self.h[j]
        } else if i == n - 1 {
            (au(c) - au(c - s)) / self.h[j]
        } else {
            (au(c + s) - au(c - s)) / (2.0 * self.h[j])
        }
    }

    fn slope(&self, u: &[f64], c: usize, k: usize) -> f64 {
        if self.scheme == FvScheme::Upwind {
            return 0.0;
        }
        let i = self.idx(c, k);
        let n = self.layout.shape[k];
        if i == 0 || i == n - 1 {
            return 0.0;
        }
        let s = self.strides[k];
        minmod(u[c] - u[c - s], u[c + s] - u[c])
    }

    /// Flux through the face of axis `k` between cells `lo` and `hi`
    /// (either may be a wall) in the `+e_k` direction.
    fn flux(&self, u: &[f64], k: usize, face: usize, lo: Option<usize>, hi: Option<usize>) -> f64 {
        self.flux_with(u, k, face, lo, hi, |c| self.slope(u, c, k))
    }

    fn flux_with<S: Fn(usize) -> f64>(&self, u: &[f64], k: usize, face: usize, lo: Option<usize>, hi: Option<usize>, slope: S) -> f64 {
        let dd = self.d * self.d;
        let b = self.bface[k][face];
        let ul = lo.map_or(0.0, |c| u[c] + 0.5 * slope(c));
        let ur = hi.map_or(0.0, |c| u[c] - 0.5 * slope(c));
        let adv = b.max(0.0) * ul + b.min(0.0) * ur;
        let akk = |c: Option<usize>| c.map_or(0.0, |c| self.a[c * dd + k * self.d + k] * u[c]);
        if !self.diffusive {
            return adv;
        }
        let mut dif = -0.5 * (akk(hi) - akk(lo)) / self.h[k];
        for j in (0..self.d).filter(|&j| j != k) {
            let cd = |c: Option<usize>| c.map_or(0.0, |c| self.cross_derivative(u, c, k, j));
            let n = lo.is_some() as usize + hi.is_some() as usize;
            dif -= 0.5 * (cd(lo) + cd(hi)) / n as f64;
        }
        adv + dif
    }

    fn face_of(&self, c: usize, k: usize, upper: bool) -> usize {
        let mut f = 0;
        for j in 0..self.d {
            let mut i = self.idx(c, j);
            if j == k && upper {
                i += 1;
            }
            f += i * self.face_strides[k][j];
        }
        f
    }

    /// Lower and upper cells of face `f` on axis `k`.
    fn face_cells(&self, k: usize, f: usize) -> (Option<usize>, Option<usize>) {
        let st = &self.face_strides[k];
        let (mut rem, mut c, mut ik) = (f, 0, 0);
        for j in 0..self.d {
            let i = rem / st[j];
            rem %= st[j];
            if j == k {
                ik = i;
            } else {
                c += i * self.strides[j];
            }
        }
        let s = self.strides[k];
        let n = self.layout.shape[k];
        ((ik > 0).then(|| c + (ik - 1) * s), (ik < n).then(|| c + ik * s))
    }

    /// `L u` into `out`; returns the outward wall flux rate.
    fn apply(&self, u: &[f64], out: &mut [f64], faces: &mut [Vec<f64>], slopes: &mut [f64]) -> f64 {
        for (k, buf) in faces.iter_mut().enumerate() {
            if self.scheme == FvScheme::Muscl {
                slopes.par_iter_mut().enumerate().for_each(|(c, s)| *s = self.slope(u, c, k));
            }
            let slopes = &*slopes;
            buf.par_iter_mut().enumerate().for_each(|(f, slot)| {
                *slot = match self.face_cells(k, f) {
                    (Some(lo), Some(hi)) => self.flux_with(u, k, f, Some(lo), Some(hi), |c| slopes[c]),
                    _ => 0.0,
                };
            });
        }
        out.par_iter_mut().enumerate().for_each(|(c, o)| {
            let mut acc = 0.0;
            for k in 0..self.d {
                let f = self.face_of(c, k, false);
                acc -= (faces[k][f + self.face_strides[k][k]] - faces[k][f]) / self.h[k];
            }
            *o = acc;
        });
        let area = |k: usize| (0..self.d).filter(|&j| j != k).map(|j| self.h[j]).product::<f64>();
        let leaks: Vec<f64> = (0..self.layout.cells())
            .flat_map(|c| (0..self.d).map(move |k| (c, k)))
            .filter_map(|(c, k)| {
                let i = self.idx(c, k);
                let n = self.layout.shape[k];
                let mut l = 0.0;
                if i + 1 == n {
                    l += self.flux(u, k, self.face_of(c, k, true), Some(c), None).max(0.0);
                }
                if i == 0 {
                    l += (-self.flux(u, k, self.face_of(c, k, false), None, Some(c))).max(0.0);
                }
                (l > 0.0).then(|| l * area(k))
            })
            .collect();
        pairwise_sum(&leaks)
    }
}

/// Coefficients the scheme actually sees: irregular fields are mollified.
pub fn pde_coefficients(field: &VectorFieldSpec, layout: &BoxLayout, eps_pde: Option<f64>) -> Result<(VectorFieldSpec, Option<f64>)> {
    if field.smoothness == Smoothness::Smooth && eps_pde.is_none() {
        return Ok((field.clone(), None));
    }
    let hmin = (0..layout.d()).map(|k| layout.width(k)).fold(f64::INFINITY, f64::min);
    let eps = eps_pde.unwrap_or(hmin);
    let kernel = Arc::new(MollifierKernel::new(layout.d(), if layout.d() == 1 { 256 } else { 1024 })?);
    Ok((mollify(field, eps, &kernel)?, Some(eps)))
}

/// Explicit conservative solve of the Fokker–Planck equation.
pub fn solve_fpe(field: &VectorFieldSpec, phi0: &FVGrid, cfg: &FpeConfig) -> Result<FpeSolution> {
    let layout = &phi0.layout;
    let d = layout.d();
    if !(1..=2).contains(&d) {
        return Err(Error::param("d", format!("the finite-volume solver handles d ∈ {{1, 2}}, got {d}")));
    }
    if field.d() != d {
        return Err(Error::Dimension { expected: d, got: field.d() });
    }
    if phi0.u.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::param("phi0", "initial density must be nonnegative"));
    }
    if ((phi0.mass() - 1.0).abs()) > 1e-6 {
        return Err(Error::param("phi0", format!("initial density has mass {} on the grid", phi0.mass())));
    }
    if !(cfg.t_end > 0.0) || !(cfg.dt > 0.0) {
        return Err(Error::param("t_end, dt", "must be positive"));
    }
    let (coef, eps_pde) = pde_coefficients(field, layout, cfg.eps_pde)?;
    let op = Operator::new(&coef, layout, cfg.scheme);
    let dt_limit = op.limit();
    if cfg.dt > dt_limit {
        return Err(Error::Cfl { dt: cfg.dt, limit: dt_limit });
    }
    let steps = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.t_end / steps as f64;
    if dt > dt_limit {
        return Err(Error::Cfl { dt, limit: dt_limit });
    }
    let mut save_steps: Vec<usize> = Vec::with_capacity(cfg.saves.len());
    for &t in &cfg.saves {
        if !(0.0..=cfg.t_end * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::param("saves", format!("time {t} outside [0, {}]", cfg.t_end)));
        }
        save_steps.push((t / dt).round() as usize);
    }
    let vol = layout.cell_volume();
    let n = layout.cells();
    let mut u = phi0.u.clone();
    let (mut k1, mut u1, mut k2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut faces: Vec<Vec<f64>> = op.bface.iter().map(|b| vec![0.0; b.len()]).collect();
    let mut slopes = vec![0.0; n];
    let mut out = FpeSolution {
        times: Vec::new(),
        snapshots: Vec::new(),
        dt,
        steps,
        dt_limit,
        max_mass_drift: 0.0,
        boundary_leak: 0.0,
        clipped_mass: 0.0,
        eps_pde,
        warnings: coef.warnings.clone(),
    };
    let mut mass = pairwise_sum(&u) * vol;
    let record = |k: usize, u: &[f64], out: &mut FpeSolution| {
        for _ in save_steps.iter().filter(|&&s| s == k) {
            out.times.push(k as f64 * dt);
            out.snapshots.push(FVGrid {
                layout: layout.clone(),
                u: u.to_vec(),
            });
        }
    };
    record(0, &u, &mut out);
    for step in 1..=steps {
        let leak = match cfg.scheme {
            FvScheme::Upwind => {
                let l = op.apply(&u, &mut k1, &mut faces, &mut slopes);
                u.iter_mut().zip(&k1).for_each(|(v, r)| *v += dt * r);
                l * dt
            }
            FvScheme::Muscl => {
                let l1 = op.apply(&u, &mut k1, &mut faces, &mut slopes);
                u1.iter_mut().zip(u.iter().zip(&k1)).for_each(|(w, (v, r))| *w = v + dt * r);
                let l2 = op.apply(&u1, &mut k2, &mut faces, &mut slopes);
                u.iter_mut()
                    .zip(u1.iter().zip(&k2))
                    .for_each(|(v, (w, r))| *v = 0.5 * *v + 0.5 * (w + dt * r));
                0.5 * (l1 + l2) * dt
            }
        };
        out.boundary_leak += leak;
        let clipped: f64 = u.iter_mut().filter(|v| **v < 0.0).map(|v| std::mem::replace(v, 0.0)).sum();
        out.clipped_mass -= clipped * vol;
        let m = pairwise_sum(&u) * vol;
        out.max_mass_drift = out.max_mass_drift.max((m - mass).abs());
        mass = m;
        record(step, &u, &mut out);
    }
    if out.clipped_mass > CLIP_WARNING {
        out.warnings.push(format!("clipped {:.3e} of negative mass", out.clipped_mass));
    }
    Ok(out)
}
