use crate::error::{Error, Result};
use crate::linalg::norm;
use serde::{Deserialize, Serialize};

/// Events and endpoint constraints on a trajectory of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSet {
    /// Every trajectory.
    Whole,
    /// `{X_1 = x}`.
    Point { x: Vec<f64> },
    /// `{⟨ν, X_1⟩ ≥ level}` with `ν` normalised internally.
    HalfSpace { normal: Vec<f64>, level: f64 },
    /// `{|X_1 − c| ≤ r}`.
    Ball { center: Vec<f64>, radius: f64 },
    /// `{sup_t X_t^i ≥ level}`.
    SupAbove { coord: usize, level: f64 },
}

impl TargetSet {
    pub fn validate(&self, d: usize) -> Result<()> {
        let check = |v: &[f64], name: &str| {
            if v.len() != d {
                Err(Error::Dimension { expected: d, got: v.len() })
            } else if v.iter().any(|x| !x.is_finite()) {
                Err(Error::param(name, "must be finite"))
            } else {
                Ok(())
            }
        };
        match self {
            TargetSet::Whole => Ok(()),
            TargetSet::Point { x } => check(x, "x"),
            TargetSet::HalfSpace { normal, level } => {
                check(normal, "normal")?;
                if norm(normal) == 0.0 || !level.is_finite() {
                    return Err(Error::param("half_space", "need a nonzero normal and a finite level"));
                }
                Ok(())
            }
            TargetSet::Ball { center, radius } => {
                check(center, "center")?;
                if !(*radius > 0.0) {
                    return Err(Error::param("radius", "must be positive"));
                }
                Ok(())
            }
            TargetSet::SupAbove { coord, level } => {
                if *coord >= d {
                    return Err(Error::param("coord", format!("must be below d = {d}")));
                }
                if !level.is_finite() {
                    return Err(Error::param("level", "must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Whether the event can have positive probability for a diffusion.
    pub fn is_thick(&self) -> bool {
        !matches!(self, TargetSet::Point { .. })
    }

    /// Membership from the endpoint and the running maximum.
    pub fn contains(&self, end: &[f64], running_max: &[f64]) -> bool {
        match self {
            TargetSet::Whole => true,
            TargetSet::Point { x } => end == x.as_slice(),
            TargetSet::HalfSpace { normal, level } => {
                let n = norm(normal);
                end.iter().zip(normal).map(|(a, b)| a * b / n).sum::<f64>() >= *level
            }
            TargetSet::Ball { center, radius } => {
                end.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= *radius
            }
            TargetSet::SupAbove { coord, level } => running_max[*coord] >= *level,
        }
    }

    /// Squared distance of a trajectory (`(N+1) × d`, row-major) to the set,
    /// with its gradient: `(step, ∂/∂x_step)`. Ties in the running maximum
    /// resolve to the latest step.
    pub fn dist_sq(&self, states: &[f64], d: usize) -> (f64, Option<(usize, Vec<f64>)>) {
        let last = states.len() / d - 1;
        let end = &states[last * d..];
        match self {
            TargetSet::Whole => (0.0, None),
            TargetSet::Point { x } => {
                let g: Vec<f64> = end.iter().zip(x).map(|(a, b)| 2.0 * (a - b)).collect();
                (0.25 * g.iter().map(|v| v * v).sum::<f64>(), Some((last, g)))
            }
            TargetSet::HalfSpace { normal, level } => {
                let n = norm(normal);
                let s = (level - end.iter().zip(normal).map(|(a, b)| a * b / n).sum::<f64>()).max(0.0);
                (s * s, Some((last, normal.iter().map(|v| -2.0 * s * v / n).collect())))
            }
            TargetSet::Ball { center, radius } => {
                let diff: Vec<f64> = end.iter().zip(center).map(|(a, b)| a - b).collect();
                let r = norm(&diff);
                let s = (r - radius).max(0.0);
                let g = if s > 0.0 {
                    diff.iter().map(|v| 2.0 * s * v / r).collect()
                } else {
                    vec![0.0; d]
                };
                (s * s, Some((last, g)))
            }
            TargetSet::SupAbove { coord, level } => {
                let mut best = 0;
                for n in 0..=last {
                    if states[n * d + coord] >= states[best * d + coord] {
                        best = n;
                    }
                }
                let s = (level - states[best * d + coord]).max(0.0);
                let mut g = vec![0.0; d];
                g[*coord] = -2.0 * s;
                (s * s, Some((best, g)))
            }
        }
    }
}

/// Bounded terminal functionals `g(X_1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Functional {
    /// `g ≡ c`.
    Constant { c: f64 },
    /// `g = min(|X_1 − a|², cap)`.
    CappedDistance { target: Vec<f64>, cap: f64 },
}

impl Functional {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            Functional::Constant { c } if !c.is_finite() => Err(Error::param("c", "must be finite")),
            Functional::CappedDistance { target, .. } if target.len() != d => Err(Error::Dimension {
                expected: d,
                got: target.len(),
            }),
            Functional::CappedDistance { cap, .. } if !(*cap > 0.0 && cap.is_finite()) => {
                Err(Error::param("cap", "must be positive and finite"))
            }
            _ => Ok(()),
        }
    }

    /// `sup |g|`.
    pub fn bound(&self) -> f64 {
        match self {
            Functional::Constant { c } => c.abs(),
            Functional::CappedDistance { cap, .. } => *cap,
        }
    }

    pub fn eval(&self, end: &[f64]) -> f64 {
        match self {
            Functional::Constant { c } => *c,
            Functional::CappedDistance { target, cap } => {
                end.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().min(*cap)
            }
        }
    }
}
