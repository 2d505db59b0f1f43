use super::target::{Functional, TargetSet};
use crate::coefficients::VectorFieldSpec;
use crate::error::{Error, Result};
use crate::flow_sim::{DIVERGENCE_RADIUS, MAX_DT};
use crate::rng::stream;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// One-sided 95% normal quantile.
pub const Z95_ONE_SIDED: f64 = 1.644_853_626_951_472_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallNoiseConfig {
    pub eps: Vec<f64>,
    pub particles: usize,
    pub dt: f64,
    pub seed: u64,
    /// Brownian-bridge correction for crossings between grid times.
    #[serde(default = "yes")]
    pub bridge: bool,
}

fn yes() -> bool {
    true
}

impl SmallNoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(Error::param("eps", "every ladder value must lie in (0, 1)"));
        }
        if self.particles == 0 {
            return Err(Error::param("particles", "must be positive"));
        }
        steps_of(self.dt).map(|_| ())
    }
}

pub(crate) fn steps_of(dt: f64) -> Result<usize> {
    let steps = (1.0 / dt).round();
    if !(dt > 0.0) || dt > MAX_DT + 1e-15 || (steps * dt - 1.0).abs() > 1e-9 {
        return Err(Error::param("dt", format!("need 1/dt integral and dt ≤ {MAX_DT}, got {dt}")));
    }
    Ok(steps as usize)
}

/// Euler–Maruyama path of `dX = b dt + √ε σ dW` from `x0`; returns the
/// endpoint and whether `event` was hit (with bridge sampling between grid
/// times when requested).
pub(crate) struct Particle<'a> {
    pub field: &'a VectorFieldSpec,
    pub x0: &'a [f64],
    pub eps: f64,
    pub steps: usize,
}

impl Particle<'_> {
    pub fn run<G: Rng>(&self, rng: &mut G, event: Option<(&TargetSet, bool)>) -> (Vec<f64>, bool) {
        let (d, m) = (self.field.d(), self.field.m());
        let dt = 1.0 / self.steps as f64;
        let sq = (self.eps * dt).sqrt();
        let mut x = self.x0.to_vec();
        let mut b = vec![0.0; d];
        let mut s = vec![0.0; d * m];
        let mut dw = vec![0.0; m];
        let mut running_max = x.clone();
        let sup = match event {
            Some((TargetSet::SupAbove { coord, level }, bridge)) => Some((*coord, *level, bridge)),
            _ => None,
        };
        if let Some((i, c, _)) = sup {
            if x[i] >= c {
                return (x, true);
            }
        }
        for _ in 0..self.steps {
            self.field.drift(&x, &mut b);
            self.field.diffusion(&x, &mut s);
            for w in dw.iter_mut() {
                *w = StandardNormal.sample(rng);
            }
            let prev = sup.map(|(i, _, _)| x[i]);
            for i in 0..d {
                x[i] += b[i] * dt + sq * (0..m).map(|l| s[i * m + l] * dw[l]).sum::<f64>();
            }
            if !(crate::linalg::norm(&x) <= DIVERGENCE_RADIUS) {
                return (x, false);
            }
            for i in 0..d {
                running_max[i] = running_max[i].max(x[i]);
            }
            if let (Some((i, c, bridge)), Some(p)) = (sup, prev) {
                if x[i] >= c {
                    return (x, true);
                }
                if bridge {
                    let a: f64 = (0..m).map(|l| s[i * m + l].powi(2)).sum();
                    if a > 0.0 {
                        let pc = (-2.0 * (c - p) * (c - x[i]) / (self.eps * a * dt)).exp();
                        if rng.random::<f64>() < pc {
                            return (x, true);
                        }
                    }
                }
            }
        }
        let hit = match event {
            Some((t, _)) => t.contains(&x, &running_max),
            None => false,
        };
        (x, hit)
    }
}

/// Wilson score interval for `k` hits in `n` trials; one-sided upper bound
/// at zero hits.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64, bool) {
    let nf = n as f64;
    if k == 0 {
        let z2 = Z95_ONE_SIDED * Z95_ONE_SIDED;
        return (0.0, z2 / (nf + z2), true);
    }
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0), false)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallNoiseRow {
    pub eps: f64,
    pub hits: usize,
    pub particles: usize,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub one_sided: bool,
    /// `ε log P̂`; `−∞` without hits.
    pub eps_log_p: f64,
    pub used_in_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallNoiseTable {
    pub event: TargetSet,
    pub x0: Vec<f64>,
    pub rows: Vec<SmallNoiseRow>,
    /// Intercept of the least-squares line `ε log P̂ ≈ c₀ + c₁ ε` through
    /// the three smallest ε with hits.
    pub limit: Option<f64>,
    pub slope: Option<f64>,
    pub warnings: Vec<String>,
}

/// Fit `y = c₀ + c₁ x`; returns `(c₀, c₁)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Monte Carlo estimate of `P(X^ε ∈ B)` along an ε ladder.
pub fn small_noise_mc(field: &VectorFieldSpec, x0: &[f64], event: &TargetSet, cfg: &SmallNoiseConfig) -> Result<SmallNoiseTable> {
    cfg.validate()?;
    event.validate(field.d())?;
    if x0.len() != field.d() {
        return Err(Error::Dimension {
            expected: field.d(),
            got: x0.len(),
        });
    }
    if !event.is_thick() {
        return Err(Error::Precondition("point events have probability zero".into()));
    }
    let steps = steps_of(cfg.dt)?;
    let mut rows = Vec::with_capacity(cfg.eps.len());
    for (r, &eps) in cfg.eps.iter().enumerate() {
        let hits = if matches!(event, TargetSet::Whole) {
            cfg.particles
        } else {
            let p = Particle { field, x0, eps, steps };
            (0..cfg.particles)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream(cfg.seed, r as u64, i as u64);
                    p.run(&mut rng, Some((event, cfg.bridge))).1 as usize
                })
                .sum()
        };
        let (lo, hi, one_sided) = wilson_interval(hits, cfg.particles);
        let p_hat = hits as f64 / cfg.particles as f64;
        rows.push(SmallNoiseRow {
            eps,
            hits,
            particles: cfg.particles,
            p_hat,
            ci_lo: lo,
            ci_hi: hi,
            one_sided,
            eps_log_p: if hits > 0 { eps * p_hat.ln() } else { f64::NEG_INFINITY },
            used_in_fit: false,
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].hits > 0).collect();
    order.sort_by(|&a, &b| rows[a].eps.total_cmp(&rows[b].eps));
    order.truncate(3);
    let mut warnings = Vec::new();
    for r in rows.iter().filter(|r| r.hits == 0) {
        warnings.push(format!("no hits at ε = {}; excluded from the extrapolation", r.eps));
    }
    let (limit, slope) = if order.len() == 3 {
        order.iter().for_each(|&i| rows[i].used_in_fit = true);
        let x: Vec<f64> = order.iter().map(|&i| rows[i].eps).collect();
        let y: Vec<f64> = order.iter().map(|&i| rows[i].eps_log_p).collect();
        let (c0, c1) = linear_fit(&x, &y);
        (Some(c0), Some(c1))
    } else {
        warnings.push(format!("only {} ladder points with hits; no extrapolation", order.len()));
        (None, None)
    };
    Ok(SmallNoiseTable {
        event: event.clone(),
        x0: x0.to_vec(),
        rows,
        limit,
        slope,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceEstimate {
    pub eps: f64,
    pub particles: usize,
    /// `ε log E exp(−g(X^ε)/ε)`.
    pub value: f64,
    /// `(Σw)² / Σw²` of the weights `exp(−g/ε)`.
    pub ess: f64,
    pub reliable: bool,
    pub g_bound: f64,
}

/// Effective sample sizes below this flag the estimate.
pub const MIN_ESS: f64 = 100.0;

pub fn laplace_estimate(field: &VectorFieldSpec, x0: &[f64], g: &Functional, eps: f64, particles: usize, dt: f64, seed: u64) -> Result<LaplaceEstimate> {
    g.validate(field.d())?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", "must lie in (0, 1)"));
    }
    if particles == 0 {
        return Err(Error::param("particles", "must be positive"));
    }
    if x0.len() != field.d() {
        return Err(Error::Dimension {
            expected: field.d(),
            got: x0.len(),
        });
    }
    let steps = steps_of(dt)?;
    let values: Vec<f64> = if let Functional::Constant { c } = g {
        vec![*c; particles]
    } else {
        let p = Particle { field, x0, eps, steps };
        (0..particles)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, 0, i as u64);
                let (end, _) = p.run(&mut rng, None);
                if end.iter().all(|v| v.is_finite()) {
                    g.eval(&end)
                } else {
                    g.bound()
                }
            })
            .collect()
    };
    let gmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = values.iter().map(|v| (-(v - gmin) / eps).exp()).collect();
    let sw = crate::quadrature::pairwise_sum(&w);
    let sw2 = crate::quadrature::pairwise_sum(&w.iter().map(|v| v * v).collect::<Vec<_>>());
    let ess = sw * sw / sw2;
    Ok(LaplaceEstimate {
        eps,
        particles,
        value: -gmin + eps * (sw / particles as f64).ln(),
        ess,
        reliable: ess >= MIN_ESS,
        g_bound: g.bound(),
    })
}
