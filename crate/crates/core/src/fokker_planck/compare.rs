use super::grid::{FVGrid, InitialDensity};
use super::solver::FpeSolution;
use crate::coefficients::{rescale_time, VectorFieldSpec};
use crate::density::WeightedMeasure;
use crate::error::{Error, Result};
use crate::flow_sim::{simulate_independent, BoxLayout, IndependentRun, Scheme, MAX_DT};
use serde::Serialize;

/// Normalised histogram of `Y_t` on a finite-volume grid.
#[derive(Debug, Clone, PartialEq)]
pub struct McHistogram {
    /// Density estimate; sums to one over the grid.
    pub density: FVGrid,
    /// Standard error per cell.
    pub se: Vec<f64>,
    pub particles: usize,
    /// Particles that ended outside the grid or diverged.
    pub outside: usize,
    pub steps: usize,
}

/// Options for the Monte Carlo side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRun {
    pub particles: usize,
    pub t_end: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: u64,
}

/// Histogram of `Y_t = X_t(Y_0)` with `Y_0 ~ φ0`, binned on `bins`.
///
/// The SDE is integrated on `[0, 1]` with coefficients `(T b, √T σ)`, which
/// has the law of `Y` at time `T·s`.
pub fn mc_histogram(field: &VectorFieldSpec, phi0: &InitialDensity, run: McRun, bins: &BoxLayout) -> Result<McHistogram> {
    phi0.validate()?;
    if phi0.d() != field.d() || bins.d() != field.d() {
        return Err(Error::Dimension {
            expected: field.d(),
            got: if phi0.d() != field.d() { phi0.d() } else { bins.d() },
        });
    }
    if run.particles == 0 {
        return Err(Error::param("particles", "must be positive"));
    }
    if !(run.dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let scaled = rescale_time(field, run.t_end)?;
    let steps = ((run.t_end / run.dt).round() as usize).max((1.0 / MAX_DT).ceil() as usize);
    let summary = simulate_independent(
        &scaled,
        IndependentRun {
            scheme: run.scheme,
            noise_scale: 1.0,
            control: None,
            steps,
            seed: run.seed,
            replicate: 0,
        },
        run.particles,
        |rng| phi0.sample(rng),
    )?;
    let mut counts = vec![0u64; bins.cells()];
    let mut outside = 0;
    for i in 0..summary.len() {
        match (summary.diverged[i], bins.locate(summary.final_state(i))) {
            (false, Some(c)) => counts[c] += 1,
            _ => outside += 1,
        }
    }
    let inside = (run.particles - outside) as f64;
    if inside == 0.0 {
        return Err(Error::Domain("no particle ended inside the histogram grid".into()));
    }
    let vol = bins.cell_volume();
    let u = counts.iter().map(|&k| k as f64 / (inside * vol)).collect();
    let se = counts
        .iter()
        .map(|&k| {
            let p = k as f64 / inside;
            (p * (1.0 - p) / inside).sqrt() / vol
        })
        .collect();
    Ok(McHistogram {
        density: FVGrid::new(bins.clone(), u)?,
        se,
        particles: run.particles,
        outside,
        steps,
    })
}

/// Cellwise comparison of two densities on one grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Report {
    /// `Σ |u − v| · vol`.
    pub l1: f64,
    pub max_abs: f64,
    /// `(u − v)/se` per cell when standard errors are supplied.
    #[serde(skip)]
    pub z_scores: Option<Vec<f64>>,
    /// Largest `|z|` over cells with positive standard error.
    pub max_z: Option<f64>,
    /// Fraction of such cells with `|z| ≤ 3`.
    pub within_3se: Option<f64>,
}

pub fn l1_compare(u: &FVGrid, v: &FVGrid, se: Option<&[f64]>) -> Result<L1Report> {
    if u.layout != v.layout {
        return Err(Error::Incompatible("densities live on different grids".into()));
    }
    if let Some(s) = se {
        if s.len() != u.u.len() {
            return Err(Error::Dimension {
                expected: u.u.len(),
                got: s.len(),
            });
        }
    }
    let diff: Vec<f64> = u.u.iter().zip(&v.u).map(|(a, b)| a - b).collect();
    let vol = u.layout.cell_volume();
    let l1 = crate::quadrature::pairwise_sum(&diff.iter().map(|x| x.abs()).collect::<Vec<_>>()) * vol;
    let max_abs = diff.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let z_scores: Option<Vec<f64>> = se.map(|s| {
        diff.iter()
            .zip(s)
            .map(|(d, s)| if *s > 0.0 { d / s } else { f64::NAN })
            .collect()
    });
    let (max_z, within_3se) = match &z_scores {
        Some(z) => {
            let valid: Vec<f64> = z.iter().copied().filter(|v| v.is_finite()).collect();
            let mz = valid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let w = if valid.is_empty() {
                1.0
            } else {
                valid.iter().filter(|v| v.abs() <= 3.0).count() as f64 / valid.len() as f64
            };
            (Some(mz), Some(w))
        }
        None => (None, None),
    };
    Ok(L1Report {
        l1,
        max_abs,
        z_scores,
        max_z,
        within_3se,
    })
}

/// `sup_t ∫ u_t^p e^{(1−p)λ} dx` over the saved snapshots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMp {
    pub p: f64,
    pub per_time: Vec<f64>,
    pub sup: f64,
    pub finite: bool,
}

pub fn class_mp_diagnostic(solution: &FpeSolution, p: f64, measure: &WeightedMeasure) -> Result<ClassMp> {
    class_mp_of(&solution.snapshots, p, measure)
}

/// As [`class_mp_diagnostic`] for arbitrary snapshots.
pub fn class_mp_of(snapshots: &[FVGrid], p: f64, measure: &WeightedMeasure) -> Result<ClassMp> {
    if !(p > 1.0) {
        return Err(Error::param("p", format!("must exceed 1, got {p}")));
    }
    if let Some(s) = snapshots.iter().find(|s| s.d() != measure.d) {
        return Err(Error::Dimension {
            expected: measure.d,
            got: s.d(),
        });
    }
    let per_time: Vec<f64> = snapshots.iter().map(|s| s.weighted_power(p, |x| measure.lambda(x))).collect();
    let sup = per_time.iter().copied().fold(0.0, f64::max);
    Ok(ClassMp {
        p,
        per_time,
        sup,
        finite: sup.is_finite(),
    })
}
