use crate::coefficients::{RadiusLadder, ShellRule, VectorFieldSpec};
use crate::error::{Error, Result};
use crate::linalg::dist;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Default exclusion radius around declared singular loci.
pub const EXCLUSION_RADIUS: f64 = 1e-6;

/// Absolute slack in the pointwise inequality.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;

/// Outcome of auditing
/// `|b(x) − b(y)| ≤ 2^d |x − y| (M_R|∇b|(x) + M_R|∇b|(y))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzAudit {
    pub field: String,
    pub radius: f64,
    pub pairs: usize,
    /// Pairs with a point within the exclusion radius of the singular locus.
    pub excluded: usize,
    pub violations: usize,
    pub fraction: f64,
    /// Largest `lhs / rhs` over audited pairs.
    pub worst_ratio: f64,
}

/// Radial cells per shell and angular resolution.
fn shell_resolution(d: usize) -> (usize, usize) {
    match d {
        1 => (4, 1),
        2 => (2, 16),
        _ => (2, 6),
    }
}

/// Audit the difference-quotient bound on the given pairs.
pub fn lipschitz_maximal_check(field: &VectorFieldSpec, radius: f64, pairs: &[(Vec<f64>, Vec<f64>)], exclusion: f64) -> Result<LipschitzAudit> {
    if !(radius > 0.0) {
        return Err(Error::param("R", format!("must be positive, got {radius}")));
    }
    let d = field.d();
    if let Some((x, y)) = pairs.iter().find(|(x, y)| x.len() != d || y.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: if x.len() != d { x.len() } else { y.len() },
        });
    }
    let ladder = RadiusLadder::log_spaced(radius, radius * 1e-4, RadiusLadder::MIN_RUNGS);
    let (nr, na) = shell_resolution(d);
    let rule = ShellRule::new(d, &ladder, nr, na);
    let grad = |z: &[f64]| field.drift_gradient_norm(z).unwrap_or(f64::NAN);
    field.drift_gradient_norm(&vec![0.5; d])?;
    let scale = 2f64.powi(d as i32);
    // (lhs / rhs, violated) per audited pair
    let outcome: Vec<Option<(f64, bool)>> = pairs
        .par_iter()
        .map(|(x, y)| {
            if field.locus.distance(x) < exclusion || field.locus.distance(y) < exclusion || dist(x, y) > radius {
                return None;
            }
            let lhs = dist(&field.drift_at(x), &field.drift_at(y));
            let mx = rule.maximal(grad, x);
            let my = rule.maximal(grad, y);
            let rhs = scale * dist(x, y) * (mx + my);
            let violated = !(lhs <= rhs + LIPSCHITZ_SLACK);
            let ratio = if rhs > 0.0 { lhs / rhs } else if violated { f64::INFINITY } else { 0.0 };
            Some((ratio, violated))
        })
        .collect();
    let audited = outcome.iter().flatten().count();
    let violations = outcome.iter().flatten().filter(|o| o.1).count();
    Ok(LipschitzAudit {
        field: field.name.clone(),
        radius,
        pairs: pairs.len(),
        excluded: pairs.len() - audited,
        violations,
        fraction: if audited == 0 { 0.0 } else { violations as f64 / audited as f64 },
        worst_ratio: outcome.iter().flatten().map(|o| o.0).fold(0.0, f64::max),
    })
}

/// `n` pairs with `x` uniform in `[−h, h]^d` and `y` uniform in `B_R(x)`,
/// rejecting points within `exclusion` of the field's singular locus.
pub fn sample_pairs<G: Rng>(field: &VectorFieldSpec, half_width: f64, radius: f64, n: usize, exclusion: f64, rng: &mut G) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = field.d();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-half_width..=half_width)).collect();
        let y = loop {
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
            if crate::linalg::norm(&u) <= 1.0 {
                break x.iter().zip(&u).map(|(a, b)| a + radius * b).collect::<Vec<f64>>();
            }
        };
        if field.locus.distance(&x) >= exclusion && field.locus.distance(&y) >= exclusion {
            out.push((x, y));
        }
    }
    out
}
