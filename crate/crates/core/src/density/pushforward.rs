use super::measure::WeightedMeasure;
use crate::error::{Error, Result};
use crate::flow_sim::{BoxLayout, FlowEnsemble};
use crate::quadrature::{mean_se, pairwise_sum};

/// Binned pushforward density `J_t = (X_t)_♯μ / μ` over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub bins: BoxLayout,
    pub time: f64,
    /// `μ(bin)`.
    pub bin_mass: Vec<f64>,
    /// Per replicate and bin, row-major `replicates × bins`.
    pub per_replicate: Vec<f64>,
    pub replicates: usize,
    /// Replicate mean of `J_t` per bin.
    pub mean: Vec<f64>,
    /// Standard error of the mean per bin.
    pub se: Vec<f64>,
    /// A bin is defined when it has positive mass and lies inside the image
    /// of the particle box in every replicate.
    pub defined: Vec<bool>,
    /// Mean over replicates of the weight landing inside the bin box.
    pub captured_mass: f64,
    pub excluded_divergent: usize,
}

impl DensityEstimate {
    pub fn defined_count(&self) -> usize {
        self.defined.iter().filter(|d| **d).count()
    }

    /// Largest `|J − 1|` over defined bins.
    pub fn max_deviation_from_one(&self) -> f64 {
        self.mean
            .iter()
            .zip(&self.defined)
            .filter(|(_, d)| **d)
            .map(|(j, _)| (j - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `E ∫ |J_t|^p dμ` over defined bins: mean over replicates and its SE.
    pub fn lp_moment(&self, p: f64) -> (f64, f64) {
        let nb = self.bin_mass.len();
        let vals: Vec<f64> = (0..self.replicates)
            .map(|r| {
                let terms: Vec<f64> = (0..nb)
                    .filter(|&b| self.defined[b])
                    .map(|b| self.per_replicate[r * nb + b].powf(p) * self.bin_mass[b])
                    .collect();
                pairwise_sum(&terms)
            })
            .collect();
        mean_se(&vals)
    }

    /// `∫ J_t dμ` over defined bins, with SE.
    pub fn mass(&self) -> (f64, f64) {
        self.lp_moment(1.0)
    }
}


fn point_in_polygon(px: f64, py: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Bins that lie inside the image of the particle box.
fn covered(ens: &FlowEnsemble, save: usize, bins: &BoxLayout) -> Vec<bool> {
    let nb = bins.cells();
    let Some(lp) = ens.grid.boundary_loop() else {
        return vec![true; nb];
    };
    match ens.d {
        1 => {
            let a = ens.state(save, lp[0])[0];
            let b = ens.state(save, lp[1])[0];
            let (lo, hi) = (a.min(b), a.max(b));
            let w = bins.width(0);
            (0..nb)
                .map(|c| {
                    let x = bins.lo[0] + c as f64 * w;
                    x >= lo && x + w <= hi
                })
                .collect()
        }
        2 => {
            let poly: Vec<(f64, f64)> = lp
                .iter()
                .map(|&i| {
                    let s = ens.state(save, i);
                    (s[0], s[1])
                })
                .collect();
            if poly.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return vec![false; nb];
            }
            let (wx, wy) = (bins.width(0), bins.width(1));
            // corner lattice, tested once per corner
            let (nx, ny) = (bins.shape[0], bins.shape[1]);
            let inside: Vec<bool> = (0..=nx)
                .flat_map(|i| (0..=ny).map(move |j| (i, j)))
                .map(|(i, j)| point_in_polygon(bins.lo[0] + i as f64 * wx, bins.lo[1] + j as f64 * wy, &poly))
                .collect();
            let corner = |i: usize, j: usize| inside[i * (ny + 1) + j];
            let mut cov: Vec<bool> = (0..nb)
                .map(|c| {
                    let (i, j) = (c / ny, c % ny);
                    corner(i, j) && corner(i + 1, j) && corner(i, j + 1) && corner(i + 1, j + 1)
                })
                .collect();
            // a polygon vertex inside a bin means the boundary cuts through it
            for &(x, y) in &poly {
                if let Some(c) = bins.locate(&[x, y]) {
                    cov[c] = false;
                }
            }
            cov
        }
        _ => vec![true; nb],
    }
}

/// Histogram estimate of `J_t` from replicate ensembles at save `save`.
pub fn estimate_pushforward(replicates: &[FlowEnsemble], save: usize, measure: &WeightedMeasure, bins: &BoxLayout) -> Result<DensityEstimate> {
    let first = replicates
        .first()
        .ok_or_else(|| Error::Precondition("no replicate ensembles".into()))?;
    if bins.d() != measure.d || first.d != measure.d {
        return Err(Error::Dimension {
            expected: measure.d,
            got: bins.d(),
        });
    }
    let lam = |x: &[f64]| measure.lambda(x);
    let nb = bins.cells();
    let bin_mass: Vec<f64> = (0..nb).map(|c| bins.cell_mass(c, &lam)).collect();
    let mut defined: Vec<bool> = bin_mass.iter().map(|m| *m > 0.0).collect();
    let mut per_replicate = vec![0.0; replicates.len() * nb];
    let mut captured = Vec::with_capacity(replicates.len());
    let mut excluded = 0;
    for (r, e) in replicates.iter().enumerate() {
        if e.grid.len() != first.grid.len() || e.save_times != first.save_times {
            return Err(Error::Incompatible("replicates differ in grid or saved times".into()));
        }
        let mut acc = vec![0.0; nb];
        let mut cap = 0.0;
        for i in 0..e.len() {
            if e.diverged[i] {
                excluded += 1;
                continue;
            }
            if let Some(c) = bins.locate(e.state(save, i)) {
                acc[c] += e.grid.weights[i];
                cap += e.grid.weights[i];
            }
        }
        captured.push(cap);
        for c in 0..nb {
            per_replicate[r * nb + c] = if bin_mass[c] > 0.0 { acc[c] / bin_mass[c] } else { 0.0 };
        }
        for (d, c) in defined.iter_mut().zip(covered(e, save, bins)) {
            *d &= c;
        }
    }
    let nr = replicates.len();
    let mut mean = vec![0.0; nb];
    let mut se = vec![0.0; nb];
    for c in 0..nb {
        let v: Vec<f64> = (0..nr).map(|r| per_replicate[r * nb + c]).collect();
        let (m, s) = mean_se(&v);
        mean[c] = m;
        se[c] = s;
    }
    Ok(DensityEstimate {
        bins: bins.clone(),
        time: first.save_times[save],
        bin_mass,
        per_replicate,
        replicates: nr,
        mean,
        se,
        defined,
        captured_mass: pairwise_sum(&captured) / nr as f64,
        excluded_divergent: excluded,
    })
}
