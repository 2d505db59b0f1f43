use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Tensor box `∏[lo_k, hi_k]` cut into `shape` equal cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxLayout {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
}

impl BoxLayout {
    pub fn new(lo: &[f64], hi: &[f64], shape: &[usize]) -> Result<Self> {
        let d = lo.len();
        if hi.len() != d || shape.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: hi.len().min(shape.len()),
            });
        }
        for k in 0..d {
            if !(hi[k] > lo[k]) || shape[k] == 0 {
                return Err(Error::param("box", format!("axis {k}: need lo < hi and at least one cell")));
            }
        }
        Ok(BoxLayout {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            shape: shape.to_vec(),
        })
    }

    pub fn d(&self) -> usize {
        self.lo.len()
    }

    pub fn cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn width(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]) / self.shape[k] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.d()).map(|k| self.width(k)).product()
    }

    /// Multi-index of a flat cell index (last axis fastest).
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d()];
        for k in (0..self.d()).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .iter()
            .enumerate()
            .map(|(k, &i)| self.lo[k] + (i as f64 + 0.5) * self.width(k))
            .collect()
    }

    /// Flat index of the cell containing `x`, if inside the box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for k in 0..self.d() {
            let t = (x[k] - self.lo[k]) / self.width(k);
            if !(t >= 0.0 && t < self.shape[k] as f64) {
                return None;
            }
            flat = flat * self.shape[k] + (t as usize).min(self.shape[k] - 1);
        }
        Some(flat)
    }

    /// `∫_cell e^{λ}` by a 4-point Gauss–Legendre tensor rule.
    pub fn cell_mass<F: Fn(&[f64]) -> f64>(&self, flat: usize, log_density: &F) -> f64 {
        let d = self.d();
        let (t, w) = gauss_legendre(4);
        let idx = self.unflatten(flat);
        let mut acc = 0.0;
        let mut x = vec![0.0; d];
        for q in 0..4usize.pow(d as u32) {
            let mut rem = q;
            let mut wq = 1.0;
            for k in 0..d {
                let j = rem % 4;
                rem /= 4;
                let h = self.width(k);
                x[k] = self.lo[k] + (idx[k] as f64 + 0.5 + 0.5 * t[j]) * h;
                wq *= 0.5 * w[j] * h;
            }
            acc += wq * log_density(&x).exp();
        }
        acc
    }
}

/// Initial points with quadrature weights for the base measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleGrid {
    pub d: usize,
    /// Row-major `n × d`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Present when the points are the cell midpoints of a box.
    pub layout: Option<BoxLayout>,
}

impl ParticleGrid {
    /// Cell midpoints of a box, weighted by Lebesgue cell volume.
    pub fn lebesgue_box(lo: &[f64], hi: &[f64], shape: &[usize]) -> Result<Self> {
        let layout = BoxLayout::new(lo, hi, shape)?;
        let v = layout.cell_volume();
        let n = layout.cells();
        Ok(ParticleGrid {
            d: layout.d(),
            points: (0..n).flat_map(|c| layout.center(c)).collect(),
            weights: vec![v; n],
            layout: Some(layout),
        })
    }

    /// Cell midpoints weighted by the cell masses of `e^{λ} dx`.
    pub fn weighted_box<F: Fn(&[f64]) -> f64 + Sync>(lo: &[f64], hi: &[f64], shape: &[usize], log_density: F) -> Result<Self> {
        let mut g = Self::lebesgue_box(lo, hi, shape)?;
        let layout = g.layout.clone().unwrap();
        g.weights = (0..layout.cells()).map(|c| layout.cell_mass(c, &log_density)).collect();
        if g.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Domain("weighted grid has a cell of zero mass".into()));
        }
        Ok(g)
    }

    pub fn from_points(d: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != d * weights.len() {
            return Err(Error::Dimension {
                expected: d * weights.len(),
                got: points.len(),
            });
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::param("weights", "must be positive"));
        }
        Ok(ParticleGrid {
            d,
            points,
            weights,
            layout: None,
        })
    }

    pub fn single(x: &[f64]) -> Self {
        ParticleGrid {
            d: x.len(),
            points: x.to_vec(),
            weights: vec![1.0],
            layout: None,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn total_weight(&self) -> f64 {
        crate::quadrature::pairwise_sum(&self.weights)
    }

    /// Indices of the outermost particles, as an ordered loop in 2D and as
    /// the two endpoints in 1D.
    pub fn boundary_loop(&self) -> Option<Vec<usize>> {
        let l = self.layout.as_ref()?;
        match l.d() {
            1 => Some(vec![0, l.shape[0] - 1]),
            2 => {
                let (nx, ny) = (l.shape[0], l.shape[1]);
                let at = |i: usize, j: usize| i * ny + j;
                let mut v = Vec::new();
                for j in 0..ny {
                    v.push(at(0, j));
                }
                for i in 1..nx {
                    v.push(at(i, ny - 1));
                }
                for j in (0..ny - 1).rev() {
                    v.push(at(nx - 1, j));
                }
                for i in (1..nx - 1).rev() {
                    v.push(at(i, 0));
                }
                Some(v)
            }
            _ => None,
        }
    }
}

/// Piecewise-constant control on `k` uniform cells of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub m: usize,
    pub k: usize,
    /// Row-major `k × m`.
    pub values: Vec<f64>,
}

impl Control {
    pub fn zeros(k: usize, m: usize) -> Self {
        Control {
            m,
            k,
            values: vec![0.0; k * m],
        }
    }

    pub fn constant(k: usize, v: &[f64]) -> Self {
        Control {
            m: v.len(),
            k,
            values: (0..k).flat_map(|_| v.iter().copied()).collect(),
        }
    }

    pub fn from_values(k: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != k * m {
            return Err(Error::Dimension {
                expected: k * m,
                got: values.len(),
            });
        }
        Ok(Control { m, k, values })
    }

    /// Exact cell averages of `t ↦ F′(t)` given its antiderivative `F`.
    pub fn from_antiderivative<F: Fn(f64) -> Vec<f64>>(k: usize, m: usize, anti: F) -> Self {
        let dt = 1.0 / k as f64;
        let mut values = Vec::with_capacity(k * m);
        for c in 0..k {
            let (a, b) = (anti(c as f64 * dt), anti((c + 1) as f64 * dt));
            values.extend((0..m).map(|l| (b[l] - a[l]) / dt));
        }
        Control { m, k, values }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.k as f64
    }

    pub fn value(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.m..(cell + 1) * self.m]
    }

    /// `‖h‖²_{L²} = Σ_k |h_k|² dt`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.dt()
    }

    /// `½‖h‖²`.
    pub fn energy(&self) -> f64 {
        0.5 * self.norm_sq()
    }

    pub fn in_ball(&self, radius: f64) -> bool {
        self.norm_sq().sqrt() <= radius
    }

    /// `‖h − g‖_{L²}`; both controls must share the partition.
    pub fn distance(&self, other: &Control) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            * self.dt().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_grid_mass() {
        let g = ParticleGrid::weighted_box(&[-8.0], &[8.0], &[400], |x| -x[0] * x[0]).unwrap();
        let m = g.total_weight();
        assert!((m / std::f64::consts::PI.sqrt() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn boundary_loop_visits_every_edge_cell_once() {
        let g = ParticleGrid::lebesgue_box(&[0.0, 0.0], &[1.0, 1.0], &[4, 5]).unwrap();
        let mut b = g.boundary_loop().unwrap();
        assert_eq!(b.len(), 2 * 4 + 2 * 5 - 4);
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 14);
    }

    #[test]
    fn control_energy() {
        let h = Control::constant(10, &[2.0, 0.0]);
        assert!((h.norm_sq() - 4.0).abs() < 1e-14);
        assert!((h.energy() - 2.0).abs() < 1e-14);
        assert!(h.in_ball(2.0) && !h.in_ball(1.9));
    }
}
