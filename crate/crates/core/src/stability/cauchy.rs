use super::gap::{flow_gap, StabilityReport};
use crate::coefficients::{apply_cutoff, mollify, CutoffProfile, MollifierKernel, VectorFieldSpec};
use crate::density::WeightedMeasure;
use crate::error::{Error, Result};
use crate::flow_sim::{all_step_times, simulate_flow, ParticleGrid, Scheme};
use crate::quadrature::mean_se;
use crate::rng::BrownianPath;
use serde::Serialize;
use std::sync::Arc;

/// `b_n = (b * ϱ_{1/n}) χ_n`, likewise for `σ`; the cutoff is optional.
pub fn level_field(field: &VectorFieldSpec, n: usize, kernel: &Arc<MollifierKernel>, cutoff: bool) -> Result<VectorFieldSpec> {
    if n == 0 {
        return Err(Error::param("level", "must be positive"));
    }
    let mut f = mollify(field, 1.0 / n as f64, kernel)?;
    if cutoff {
        f = apply_cutoff(&f, CutoffProfile::new(n as f64)?);
    }
    f.name = format!("{}@{n}", field.name);
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyConfig {
    /// Strictly increasing mollification levels `n₁ < … < n_K`.
    pub levels: Vec<usize>,
    pub delta: f64,
    pub ball_radius: f64,
    pub confinement_radius: f64,
    pub replicates: usize,
    pub seed: u64,
    pub steps: usize,
    pub scheme: Scheme,
    pub cutoff: bool,
}

/// Replicate statistics of one level pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyRow {
    pub n: usize,
    pub m: usize,
    pub consecutive: bool,
    pub sq_gap: f64,
    pub sq_gap_se: f64,
    pub xi_gap: f64,
    pub xi_gap_se: f64,
    pub log_functional: f64,
    pub log_functional_se: f64,
    pub excluded_mass: f64,
    pub sup_modulus: f64,
    pub threshold_violations: usize,
    #[serde(skip)]
    pub per_replicate: Vec<StabilityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyTable {
    pub rows: Vec<CauchyRow>,
    pub replicates: usize,
    /// Paired decrease `gap(n_k, n_{k+1}) − gap(n_{k+1}, n_{k+2})`: mean and
    /// standard error over replicates.
    pub decrements: Vec<(f64, f64)>,
}

impl CauchyTable {
    pub fn consecutive(&self) -> impl Iterator<Item = &CauchyRow> {
        self.rows.iter().filter(|r| r.consecutive)
    }

    /// Every consecutive gap is below its predecessor, up to `k` standard
    /// errors of the paired decrement.
    pub fn decreasing_within(&self, k: f64) -> bool {
        self.decrements.iter().all(|(m, se)| *m + k * se > 0.0)
    }
}

/// Gaps between mollification levels under shared noise: consecutive pairs
/// and the extreme pair.
pub fn cauchy_study(
    field: &VectorFieldSpec,
    cfg: &CauchyConfig,
    grid: &Arc<ParticleGrid>,
    measure: &WeightedMeasure,
    kernel: &Arc<MollifierKernel>,
) -> Result<CauchyTable> {
    if cfg.levels.len() < 2 || cfg.levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("levels", "need at least two strictly increasing levels"));
    }
    if cfg.replicates == 0 {
        return Err(Error::param("replicates", "must be positive"));
    }
    let fields = cfg
        .levels
        .iter()
        .map(|&n| level_field(field, n, kernel, cfg.cutoff))
        .collect::<Result<Vec<_>>>()?;
    let k = cfg.levels.len();
    let mut pairs: Vec<(usize, usize, bool)> = (0..k - 1).map(|i| (i, i + 1, true)).collect();
    if k > 2 {
        pairs.push((0, k - 1, false));
    }
    let saves = all_step_times(cfg.steps);
    let mut reports: Vec<Vec<StabilityReport>> = vec![Vec::new(); pairs.len()];
    for r in 0..cfg.replicates {
        let path = Arc::new(BrownianPath::generate(field.m(), cfg.steps, cfg.seed, r as u64));
        let flows = fields
            .iter()
            .map(|f| simulate_flow(f, grid, &path, &saves, cfg.scheme))
            .collect::<Result<Vec<_>>>()?;
        for (p, &(i, j, _)) in pairs.iter().enumerate() {
            let mut rep = flow_gap(&flows[i], &flows[j], cfg.delta, cfg.ball_radius, cfg.confinement_radius, measure)?;
            rep.levels = Some((cfg.levels[i], cfg.levels[j]));
            reports[p].push(rep);
        }
    }
    let stat = |v: &[StabilityReport], f: fn(&StabilityReport) -> f64| mean_se(&v.iter().map(f).collect::<Vec<_>>());
    let rows: Vec<CauchyRow> = pairs
        .iter()
        .zip(reports)
        .map(|(&(i, j, consecutive), reps)| {
            let (sq, sq_se) = stat(&reps, |r| r.sq_gap);
            let (xi, xi_se) = stat(&reps, |r| r.xi_gap);
            let (lg, lg_se) = stat(&reps, |r| r.log_functional);
            CauchyRow {
                n: cfg.levels[i],
                m: cfg.levels[j],
                consecutive,
                sq_gap: sq,
                sq_gap_se: sq_se,
                xi_gap: xi,
                xi_gap_se: xi_se,
                log_functional: lg,
                log_functional_se: lg_se,
                excluded_mass: stat(&reps, |r| r.excluded_mass).0,
                sup_modulus: stat(&reps, |r| r.sup_modulus).0,
                threshold_violations: reps.iter().map(|r| r.threshold_violations).sum(),
                per_replicate: reps,
            }
        })
        .collect();
    let decrements = (0..k.saturating_sub(2))
        .map(|c| {
            let d: Vec<f64> = rows[c]
                .per_replicate
                .iter()
                .zip(&rows[c + 1].per_replicate)
                .map(|(a, b)| a.sq_gap - b.sq_gap)
                .collect();
            mean_se(&d)
        })
        .collect();
    Ok(CauchyTable {
        rows,
        replicates: cfg.replicates,
        decrements,
    })
}
