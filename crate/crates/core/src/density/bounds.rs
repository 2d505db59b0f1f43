use super::measure::WeightedMeasure;
use crate::quadrature::mean_se;
use crate::coefficients::VectorFieldSpec;
use crate::error::{Error, Result};
use crate::flow_sim::{inverse_moment_bracket, FlowEnsemble};
use crate::linalg::norm;

/// `(Λ₁, Λ₂)` at `x`:
///
/// ```text
/// Λ₁^l = div σ^{·l} + σ^{il} ∂_iλ
/// Λ₂   = div b + b^i ∂_iλ + ½(σ^{il}σ^{jl} ∂²_{ij}λ − ∂_iσ^{jl} ∂_jσ^{il})
/// ```
pub fn lambda_functionals(field: &VectorFieldSpec, measure: &WeightedMeasure, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (d, m) = (field.d(), field.m());
    if measure.d != d {
        return Err(Error::Dimension { expected: d, got: measure.d });
    }
    let s = field.diffusion_at(x);
    let b = field.drift_at(x);
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    measure.grad_lambda(x, &mut g);
    measure.hess_lambda(x, &mut h);
    let dv = field.div_diffusion(x)?;
    let l1: Vec<f64> = (0..m)
        .map(|l| dv[l] + (0..d).map(|i| s[i * m + l] * g[i]).sum::<f64>())
        .collect();
    let mut ssh = 0.0;
    for i in 0..d {
        for j in 0..d {
            let a: f64 = (0..m).map(|l| s[i * m + l] * s[j * m + l]).sum();
            ssh += a * h[i * d + j];
        }
    }
    let l2 = field.div_drift(x)? + crate::linalg::dot(&b, &g) + 0.5 * (ssh - field.noise_contraction(x)?);
    Ok((l1, l2))
}

/// Right side of the `L^p` density bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LpBound {
    pub p: f64,
    pub times: Vec<f64>,
    /// `log ∫ exp{t p³|Λ₁|² − t p² Λ₂} dμ` on the grid, per time.
    pub log_integrals: Vec<f64>,
    /// `μ(ℝ^d)^{p/(p+1)} (sup_t ∫…)^{1/(p+1)}`, or `+∞` when the
    /// integrand overflows or the grid tail dominates.
    pub value: f64,
    /// The same quantity from the truncated grid, even if tail-dominated.
    pub truncated_value: f64,
    /// Largest share of an integral carried by the outer 10% of the box.
    pub tail_fraction: f64,
    /// Grid point with the largest contribution at the maximising time.
    pub dominant_point: Vec<f64>,
}

/// Tail share above which a truncated integral is declared divergent.
pub const TAIL_DOMINATED: f64 = 0.5;

/// `μ(ℝ^d)^{p/(p+1)} · (sup_t ∫exp{tp³|Λ₁|² − tp²Λ₂} dμ)^{1/(p+1)}`.
pub fn lp_bound_rhs(field: &VectorFieldSpec, measure: &WeightedMeasure, p: f64, times: &[f64]) -> Result<LpBound> {
    if !(p > 1.0) {
        return Err(Error::param("p", format!("must exceed 1, got {p}")));
    }
    let mass = measure
        .total_mass()
        .ok_or_else(|| Error::Precondition("the L^p bound needs μ(ℝ^d) < ∞".into()))?;
    let grid = &measure.grid;
    let n = grid.cells();
    let mut a = Vec::with_capacity(n);
    let mut c2 = Vec::with_capacity(n);
    for c in 0..n {
        let x = grid.center(c);
        let (l1, l2) = lambda_functionals(field, measure, &x)?;
        a.push(l1.iter().map(|v| v * v).sum::<f64>());
        c2.push(l2);
    }
    let hw: Vec<f64> = (0..grid.d()).map(|k| 0.5 * (grid.hi[k] - grid.lo[k])).collect();
    let mid: Vec<f64> = (0..grid.d()).map(|k| 0.5 * (grid.hi[k] + grid.lo[k])).collect();
    let outer: Vec<bool> = (0..n)
        .map(|c| {
            let x = grid.center(c);
            (0..grid.d()).any(|k| (x[k] - mid[k]).abs() > 0.9 * hw[k])
        })
        .collect();
    let mut log_integrals = Vec::with_capacity(times.len());
    let mut tail = 0.0f64;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for &t in times {
        let e: Vec<f64> = (0..n)
            .map(|c| measure.cell_mass[c].ln() + t * p.powi(3) * a[c] - t * p * p * c2[c])
            .collect();
        let mx = e.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
        let arg = e.iter().position(|v| *v == mx).unwrap_or(0);
        let (mut s_all, mut s_out) = (0.0, 0.0);
        for c in 0..n {
            let w = (e[c] - mx).exp();
            if w.is_finite() {
                s_all += w;
                if outer[c] {
                    s_out += w;
                }
            }
        }
        let li = mx + s_all.ln();
        tail = tail.max(s_out / s_all);
        if li > best.0 {
            best = (li, arg);
        }
        log_integrals.push(li);
    }
    let log_val = p / (p + 1.0) * mass.ln() + best.0 / (p + 1.0);
    let truncated_value = log_val.exp();
    let value = if tail > TAIL_DOMINATED || !best.0.is_finite() {
        f64::INFINITY
    } else {
        truncated_value
    };
    Ok(LpBound {
        p,
        times: times.to_vec(),
        log_integrals,
        value,
        truncated_value,
        tail_fraction: tail,
        dominant_point: grid.center(best.1),
    })
}

/// Nonnegative test functions for transport certificates.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `1_{B_r(c)}`.
    Ball { center: Vec<f64>, radius: f64 },
    /// `exp(−|x−c|²/(2w²))`.
    Gaussian { center: Vec<f64>, width: f64 },
    /// `|x| ∧ cap`.
    Truncation { cap: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Ball { center, radius } => {
                if crate::linalg::dist(x, center) <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Gaussian { center, width } => {
                let r = crate::linalg::dist(x, center);
                (-r * r / (2.0 * width * width)).exp()
            }
            TestFunction::Truncation { cap } => norm(x).min(*cap),
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::Ball { center, radius } => format!("ball(c={center:?},r={radius})"),
            TestFunction::Gaussian { center, width } => format!("gauss(c={center:?},w={width})"),
            TestFunction::Truncation { cap } => format!("abs_trunc({cap})"),
        }
    }

    /// Six functions covering the three families in `d` dimensions.
    pub fn preset(d: usize) -> Vec<TestFunction> {
        let e = |v: f64| {
            let mut c = vec![0.0; d];
            c[0] = v;
            c
        };
        vec![
            TestFunction::Ball { center: e(0.0), radius: 0.5 },
            TestFunction::Ball { center: e(1.0), radius: 0.5 },
            TestFunction::Gaussian { center: e(0.0), width: 0.3 },
            TestFunction::Gaussian { center: e(-1.0), width: 0.5 },
            TestFunction::Truncation { cap: 0.5 },
            TestFunction::Truncation { cap: 1.0 },
        ]
    }
}

/// Source of the constant `K_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KSource {
    /// `K_p = RHS(p′)^{1−1/p}` with `p′ = p/(p−1)`; needs `μ` finite, `p > 1`.
    LpBound,
    /// `K_1 = exp{t sup[…]⁺}` from the inverse-Jacobian moment bound;
    /// for Lebesgue measure and `p = 1`.
    InverseJacobian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateEntry {
    pub name: String,
    /// `sup_t E∫φ(X_t) dμ`.
    pub left: f64,
    pub left_se: f64,
    /// `‖φ‖_{L^p_μ}`.
    pub norm: f64,
    /// `K_p ‖φ‖_{L^p_μ}`.
    pub right: f64,
    pub pass: bool,
}

/// Empirical transport bound `sup_t E∫φ(X_t) dμ ≤ K_p ‖φ‖_{L^p_μ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowCertificate {
    pub p: f64,
    pub k_p: f64,
    pub source: KSource,
    pub entries: Vec<CertificateEntry>,
}

impl FlowCertificate {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Fill a certificate from replicate ensembles whose grid weights carry `μ`.
///
/// An entry passes when `left ≤ right + 3 SE`.
pub fn check_transport_bound(
    field: &VectorFieldSpec,
    measure: &WeightedMeasure,
    p: f64,
    tests: &[TestFunction],
    replicates: &[FlowEnsemble],
    source: KSource,
) -> Result<FlowCertificate> {
    let first = replicates
        .first()
        .ok_or_else(|| Error::Precondition("no replicate ensembles".into()))?;
    let times = first.save_times.clone();
    let k_p = match source {
        KSource::LpBound => {
            if !(p > 1.0) {
                return Err(Error::param("p", "the L^p route needs p > 1"));
            }
            let q = p / (p - 1.0);
            lp_bound_rhs(field, measure, q, &times)?.value.powf(1.0 - 1.0 / p)
        }
        KSource::InverseJacobian => {
            let tmax = times.iter().copied().fold(0.0, f64::max);
            let mut sup = 0.0f64;
            for c in 0..measure.grid.cells() {
                sup = sup.max(inverse_moment_bracket(field, 1.0, &measure.grid.center(c))?);
            }
            (tmax * sup).exp()
        }
    };
    let mut entries = Vec::with_capacity(tests.len());
    for phi in tests {
        let mut left = (f64::NEG_INFINITY, 0.0);
        for s in 0..times.len() {
            let vals: Vec<f64> = replicates
                .iter()
                .map(|e| {
                    let terms: Vec<f64> = (0..e.len())
                        .filter(|&i| !e.diverged[i])
                        .map(|i| e.grid.weights[i] * phi.eval(e.state(s, i)))
                        .collect();
                    crate::quadrature::pairwise_sum(&terms)
                })
                .collect();
            let (m, se) = mean_se(&vals);
            if m > left.0 {
                left = (m, se);
            }
        }
        let nrm = measure.lp_norm(|x| phi.eval(x), p);
        let right = k_p * nrm;
        entries.push(CertificateEntry {
            name: phi.name(),
            left: left.0,
            left_se: left.1,
            norm: nrm,
            right,
            pass: left.0 <= right + 3.0 * left.1,
        });
    }
    Ok(FlowCertificate { p, k_p, source, entries })
}

/// `exp{∫Λ₁ dW + ∫Λ₂ ds}` exponent along a trajectory sampled at every step.
pub fn lambda_formula_exponent(
    field: &VectorFieldSpec,
    measure: &WeightedMeasure,
    trajectory: &[f64],
    path: &crate::rng::BrownianPath,
) -> Result<f64> {
    let d = field.d();
    let mut acc = 0.0;
    for k in 0..path.steps {
        let (l1, l2) = lambda_functionals(field, measure, &trajectory[k * d..(k + 1) * d])?;
        acc += crate::linalg::dot(&l1, path.increment(k)) + l2 * path.dt;
    }
    Ok(acc)
}
