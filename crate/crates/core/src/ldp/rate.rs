use super::skeleton::Skeleton;
use super::target::{Functional, TargetSet};
use crate::coefficients::VectorFieldSpec;
use crate::error::{Error, Result};
use crate::flow_sim::Control;
use crate::linalg::norm;
use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use serde::{Deserialize, Serialize};

/// Optimizer settings for the control problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateConfig {
    /// Number of control intervals `K`.
    pub k: usize,
    /// Heun steps per interval; `None` picks the smallest count with at
    /// least 256 steps in total.
    pub substeps: Option<usize>,
    pub penalty0: f64,
    pub penalty_growth: f64,
    pub stages: usize,
    pub max_iters: u64,
    /// On `|∇J|`, relative to `1 + P`.
    pub grad_tol: f64,
    /// Largest accepted distance of the skeleton to the target.
    pub feasibility_tol: f64,
    pub memory: usize,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            k: 64,
            substeps: None,
            penalty0: 100.0,
            penalty_growth: 10.0,
            stages: 4,
            max_iters: 500,
            grad_tol: 1e-9,
            feasibility_tol: 1e-3,
            memory: 10,
        }
    }
}

impl RateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 16 {
            return Err(Error::param("k", format!("need K ≥ 16 control intervals, got {}", self.k)));
        }
        if self.substeps == Some(0) || self.stages == 0 || self.memory == 0 || self.max_iters == 0 {
            return Err(Error::param("rate", "substeps, stages, memory and max_iters must be positive"));
        }
        if !(self.penalty0 > 0.0) || !(self.penalty_growth >= 1.0) {
            return Err(Error::param("penalty", "need P0 > 0 and growth ≥ 1"));
        }
        if !(self.grad_tol > 0.0) || !(self.feasibility_tol > 0.0) {
            return Err(Error::param("tolerances", "must be positive"));
        }
        Ok(())
    }

    fn substeps(&self) -> usize {
        self.substeps.unwrap_or_else(|| 256usize.div_ceil(self.k))
    }
}

/// One continuation stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub penalty: f64,
    pub iterations: u64,
    pub objective: f64,
    pub grad_norm: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    pub target: TargetSet,
    pub x0: Vec<f64>,
    #[serde(skip)]
    pub control: Control,
    /// `½‖h*‖²`, or `∞` when the problem was flagged infeasible.
    pub value: f64,
    /// `½‖h*‖²` of the returned control regardless of feasibility.
    pub energy: f64,
    pub feasible: bool,
    pub converged: bool,
    /// Distance of the skeleton of `h*` to the target.
    pub residual: f64,
    pub endpoint: Vec<f64>,
    pub steps: usize,
    pub trace: Vec<Stage>,
}

#[derive(Clone, Copy)]
struct Problem<'a> {
    skel: &'a Skeleton<'a>,
    cost: Cost<'a>,
    k: usize,
}

#[derive(Clone, Copy)]
enum Cost<'a> {
    Penalty(&'a TargetSet, f64),
    Terminal(&'a Functional),
}

impl Problem<'_> {
    fn energy(&self, h: &[f64]) -> f64 {
        0.5 * h.iter().map(|v| v * v).sum::<f64>() / self.k as f64
    }

    fn state_term(&self, states: &[f64]) -> (f64, Option<(usize, Vec<f64>)>) {
        let d = self.skel.field.d();
        match &self.cost {
            Cost::Penalty(t, p) => {
                let (v, g) = t.dist_sq(states, d);
                (p * v, g.map(|(n, g)| (n, g.iter().map(|x| p * x).collect())))
            }
            Cost::Terminal(f) => {
                let n = states.len() / d - 1;
                let end = &states[n * d..];
                let g = match f {
                    Functional::Constant { .. } => vec![0.0; d],
                    Functional::CappedDistance { target, cap } => {
                        let r2: f64 = end.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum();
                        if r2 <= *cap {
                            end.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect()
                        } else {
                            vec![0.0; d]
                        }
                    }
                };
                (f.eval(end), Some((n, g)))
            }
        }
    }
}

impl CostFunction for Problem<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, h: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let states = match self.skel.forward(h) {
            Ok(s) => s,
            Err(_) => return Ok(f64::INFINITY),
        };
        Ok(self.energy(h) + self.state_term(&states).0)
    }
}

impl Gradient for Problem<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, h: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let states = self.skel.forward(h)?;
        let mut grad: Vec<f64> = h.iter().map(|v| v / self.k as f64).collect();
        if let (_, Some((n, g))) = self.state_term(&states) {
            let gs = self.skel.adjoint(h, &states, n, &g)?;
            grad.iter_mut().zip(gs).for_each(|(a, b)| *a += b);
        }
        Ok(grad)
    }
}

fn minimize(problem: Problem, start: Vec<f64>, cfg: &RateConfig, scale: f64) -> Result<(Vec<f64>, u64, f64, f64)> {
    let gtol = cfg.grad_tol * scale;
    let g0 = Gradient::gradient(&problem, &start).map_err(|e| Error::Domain(e.to_string()))?;
    if norm(&g0) <= gtol {
        let c = CostFunction::cost(&problem, &start).map_err(|e| Error::Domain(e.to_string()))?;
        return Ok((start, 0, c, norm(&g0)));
    }
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), cfg.memory)
        .with_tolerance_grad(gtol)
        .and_then(|s| s.with_tolerance_cost(0.0))
        .map_err(|e| Error::Domain(e.to_string()))?;
    let res = Executor::new(problem, solver)
        .configure(|s| s.param(start.clone()).max_iters(cfg.max_iters))
        .run();
    let (h, iters) = match res {
        Ok(r) => {
            let it = r.state().get_iter();
            (r.state.best_param.unwrap_or(start), it)
        }
        // the line search gives up once no representable decrease remains
        Err(_) => (start, cfg.max_iters),
    };
    let c = CostFunction::cost(&problem, &h).map_err(|e| Error::Domain(e.to_string()))?;
    let g = Gradient::gradient(&problem, &h).map_err(|e| Error::Domain(e.to_string()))?;
    Ok((h, iters, c, norm(&g)))
}

/// `inf {½‖h‖² : X^h(x₀) ∈ B}` over controls constant on `K` intervals,
/// by quadratic penalty continuation `P_s = P₀ · growth^s`.
pub fn rate_minimize(field: &VectorFieldSpec, x0: &[f64], target: &TargetSet, cfg: &RateConfig) -> Result<RateEstimate> {
    cfg.validate()?;
    target.validate(field.d())?;
    let m = field.m();
    let skel = Skeleton::new(field, x0, cfg.k, cfg.substeps())?;
    let mut h = vec![0.0; cfg.k * m];
    let mut trace = Vec::with_capacity(cfg.stages);
    let mut penalty = cfg.penalty0;
    if matches!(target, TargetSet::Whole) {
        return finish(field, x0, target, Control::zeros(cfg.k, m), &skel, trace, true, cfg);
    }
    let mut converged = true;
    for _ in 0..cfg.stages {
        let problem = Problem {
            skel: &skel,
            cost: Cost::Penalty(target, penalty),
            k: cfg.k,
        };
        let (hn, iterations, objective, grad_norm) = minimize(problem, h, cfg, 1.0 + penalty)?;
        h = hn;
        let states = skel.forward(&h)?;
        let ok = grad_norm <= cfg.grad_tol * (1.0 + penalty) * 10.0;
        converged = ok;
        trace.push(Stage {
            penalty,
            iterations,
            objective,
            grad_norm,
            residual: target.dist_sq(&states, field.d()).0.sqrt(),
            converged: ok,
        });
        penalty *= cfg.penalty_growth;
    }
    let control = Control::from_values(cfg.k, m, h)?;
    finish(field, x0, target, control, &skel, trace, converged, cfg)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    field: &VectorFieldSpec,
    x0: &[f64],
    target: &TargetSet,
    control: Control,
    skel: &Skeleton,
    trace: Vec<Stage>,
    converged: bool,
    cfg: &RateConfig,
) -> Result<RateEstimate> {
    let d = field.d();
    let states = skel.forward(&control.values)?;
    let residual = target.dist_sq(&states, d).0.sqrt();
    let feasible = converged && residual <= cfg.feasibility_tol;
    let energy = control.energy();
    Ok(RateEstimate {
        target: target.clone(),
        x0: x0.to_vec(),
        value: if feasible { energy } else { f64::INFINITY },
        energy,
        feasible,
        converged,
        residual,
        endpoint: states[states.len() - d..].to_vec(),
        steps: skel.steps(),
        trace,
        control,
    })
}

/// `inf_h {g(X^h_1) + ½‖h‖²}` without constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalValue {
    pub value: f64,
    pub energy: f64,
    pub g: f64,
    pub endpoint: Vec<f64>,
    pub iterations: u64,
    pub grad_norm: f64,
    #[serde(skip)]
    pub control: Control,
}

pub fn variational_laplace(field: &VectorFieldSpec, x0: &[f64], g: &Functional, cfg: &RateConfig) -> Result<VariationalValue> {
    cfg.validate()?;
    g.validate(field.d())?;
    let m = field.m();
    let skel = Skeleton::new(field, x0, cfg.k, cfg.substeps())?;
    let problem = Problem {
        skel: &skel,
        cost: Cost::Terminal(g),
        k: cfg.k,
    };
    let (h, iterations, _, grad_norm) = minimize(problem, vec![0.0; cfg.k * m], cfg, 1.0)?;
    let control = Control::from_values(cfg.k, m, h)?;
    let states = skel.forward(&control.values)?;
    let endpoint = states[states.len() - field.d()..].to_vec();
    let (energy, gv) = (control.energy(), g.eval(&endpoint));
    Ok(VariationalValue {
        value: gv + energy,
        energy,
        g: gv,
        endpoint,
        iterations,
        grad_norm,
        control,
    })
}

/// `min_a {g(a) + I(a)}` over a list of endpoints, each `I(a)` from
/// [`rate_minimize`] with a point target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateScan {
    pub endpoints: Vec<Vec<f64>>,
    pub rates: Vec<f64>,
    pub totals: Vec<f64>,
    pub best: usize,
    pub value: f64,
}

pub fn laplace_rate_scan(field: &VectorFieldSpec, x0: &[f64], g: &Functional, endpoints: &[Vec<f64>], cfg: &RateConfig) -> Result<RateScan> {
    g.validate(field.d())?;
    if endpoints.is_empty() {
        return Err(Error::param("endpoints", "need at least one endpoint"));
    }
    let mut rates = Vec::with_capacity(endpoints.len());
    let mut totals = Vec::with_capacity(endpoints.len());
    for a in endpoints {
        let r = rate_minimize(field, x0, &TargetSet::Point { x: a.clone() }, cfg)?;
        rates.push(r.value);
        totals.push(r.value + g.eval(a));
    }
    let best = (0..totals.len()).fold(0, |b, i| if totals[i] < totals[b] { i } else { b });
    Ok(RateScan {
        endpoints: endpoints.to_vec(),
        rates,
        value: totals[best],
        totals,
        best,
    })
}
