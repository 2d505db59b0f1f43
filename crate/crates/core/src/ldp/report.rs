use super::rate::RateEstimate;
use super::small_noise::SmallNoiseTable;
use crate::error::{Error, Result};
use serde::Serialize;

/// Small-noise trend against the rate of the same event.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpReport {
    pub rate: f64,
    /// `−lim ε log P̂` from the extrapolation.
    pub mc_rate: Option<f64>,
    /// `|mc_rate − rate| / rate`, absolute when `rate = 0`.
    pub discrepancy: Option<f64>,
    /// Infima over the interior and the closure of the event; they agree
    /// for the events here since the rate is continuous on their boundary.
    pub interior_rate: f64,
    pub closure_rate: f64,
    /// `−I(B°) − tol ≤ lim ε log P̂ ≤ −I(B̄) + tol` with `tol` relative to
    /// `max(I, 1)`.
    pub bracketed: bool,
    pub trend: Vec<(f64, f64)>,
}

pub fn ldp_report(rate: &RateEstimate, table: &SmallNoiseTable, tol: f64) -> Result<LdpReport> {
    if rate.target != table.event {
        return Err(Error::Incompatible("the rate estimate and the table refer to different events".into()));
    }
    if rate.x0 != table.x0 {
        return Err(Error::Incompatible("the rate estimate and the table start from different points".into()));
    }
    let i = rate.value;
    let mc_rate = table.limit.map(|l| -l);
    let discrepancy = mc_rate.map(|r| if i > 0.0 { (r - i).abs() / i } else { (r - i).abs() });
    let slack = tol * i.max(1.0);
    let bracketed = match table.limit {
        Some(l) => l >= -i - slack && l <= -i + slack,
        None => false,
    };
    Ok(LdpReport {
        rate: i,
        mc_rate,
        discrepancy,
        interior_rate: i,
        closure_rate: i,
        bracketed,
        trend: table.rows.iter().map(|r| (r.eps, r.eps_log_p)).collect(),
    })
}
