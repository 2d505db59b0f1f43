use crate::coefficients::VectorFieldSpec;
use crate::error::{Error, Result};
use crate::flow_sim::{all_step_times, solve_skeleton, Control, FlowEnsemble, ParticleGrid};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// `h_n(t) = cos(2πnt) v` as exact cell averages on `k` intervals.
pub fn oscillating_control(n: usize, k: usize, v: &[f64]) -> Control {
    let w = 2.0 * PI * n as f64;
    Control::from_antiderivative(k, v.len(), |t| v.iter().map(|c| c * (w * t).sin() / w).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakRow {
    pub n: usize,
    pub control_norm: f64,
    /// `max_x sup_t |w_t(x)|`, `w_t = ∫₀ᵗ σ(X^h_s)(h_n − h)_s ds`.
    pub sup_w: f64,
    /// `max_x sup_t |X^{h_n}_t(x) − X^h_t(x)|`.
    pub skeleton_gap: f64,
    /// `(Σ_x ν_x sup_t |X^{h_n}_t − X^h_t|^{2p})^{1/(2p)}`.
    pub skeleton_gap_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakTable {
    pub rows: Vec<WeakRow>,
    /// Least-squares slope of `log sup_w` against `log n` over rows with
    /// positive `sup_w`.
    pub w_slope: Option<f64>,
}

impl WeakTable {
    /// Each gap at most `(1 + tol)` times the previous one.
    pub fn gaps_nonincreasing(&self, tol: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].skeleton_gap <= (1.0 + tol) * w[0].skeleton_gap + 1e-14)
    }
}

fn sup_gap(a: &FlowEnsemble, b: &FlowEnsemble, i: usize) -> f64 {
    let mut s: f64 = 0.0;
    for t in 0..a.save_times.len() {
        let d: f64 = a.state(t, i).iter().zip(b.state(t, i)).map(|(x, y)| (x - y).powi(2)).sum();
        s = s.max(d.sqrt());
    }
    s
}

/// Gaps of the skeletons driven by `controls` against the one driven by
/// `limit`, for controls with `‖h‖²_{L²} ≤ bound`.
pub fn weak_convergence_check(
    field: &VectorFieldSpec,
    controls: &[(usize, Control)],
    limit: &Control,
    grid: &Arc<ParticleGrid>,
    dt: f64,
    bound: f64,
    p: f64,
) -> Result<WeakTable> {
    if !(p >= 1.0) {
        return Err(Error::param("p", "must be at least 1"));
    }
    for (n, h) in controls.iter().map(|(n, h)| (*n, h)).chain(std::iter::once((0, limit))) {
        if h.norm_sq() > bound * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "control {n} has ‖h‖² = {:.6} above the bound {bound}",
                h.norm_sq()
            )));
        }
        if h.m != field.m() {
            return Err(Error::Dimension {
                expected: field.m(),
                got: h.m,
            });
        }
    }
    let steps = (1.0 / dt).round() as usize;
    let saves = all_step_times(steps);
    let base = solve_skeleton(field, limit, grid, dt, &saves)?;
    let (d, m) = (field.d(), field.m());
    let sig: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| (0..=steps).flat_map(|t| field.diffusion_at(base.state(t, i))).collect())
        .collect();
    let mut rows = Vec::with_capacity(controls.len());
    for (n, h) in controls {
        if h.k != limit.k && (steps % h.k != 0 || steps % limit.k != 0) {
            return Err(Error::Incompatible("control partitions must divide the step count".into()));
        }
        let run = solve_skeleton(field, h, grid, dt, &saves)?;
        let (mut sup_w, mut gap, mut s_acc) = (0.0f64, 0.0f64, 0.0);
        let mut w = vec![0.0; d];
        for i in 0..grid.len() {
            w.fill(0.0);
            let mut local: f64 = 0.0;
            for t in 0..steps {
                let (hn, hl) = (h.value(t * h.k / steps), limit.value(t * limit.k / steps));
                let (s0, s1) = (&sig[i][t * d * m..(t + 1) * d * m], &sig[i][(t + 1) * d * m..(t + 2) * d * m]);
                for a in 0..d {
                    w[a] += dt * (0..m).map(|l| 0.5 * (s0[a * m + l] + s1[a * m + l]) * (hn[l] - hl[l])).sum::<f64>();
                }
                local = local.max(crate::linalg::norm(&w));
            }
            sup_w = sup_w.max(local);
            let g = sup_gap(&run, &base, i);
            gap = gap.max(g);
            s_acc += grid.weights[i] * g.powf(2.0 * p);
        }
        rows.push(WeakRow {
            n: *n,
            control_norm: h.norm_sq().sqrt(),
            sup_w,
            skeleton_gap: gap,
            skeleton_gap_s: s_acc.powf(0.5 / p),
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sup_w > 0.0 && r.n > 0)
        .map(|r| ((r.n as f64).ln(), r.sup_w.ln()))
        .collect();
    let w_slope = (pts.len() >= 2).then(|| {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        super::small_noise::linear_fit(&x, &y).1
    });
    Ok(WeakTable { rows, w_slope })
}
