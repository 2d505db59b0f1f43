use crate::error::{Error, Result};

/// Weight of the `q²` branch; fixes `ξ_δ(δ) = δ/2`.
const THETA: f64 = 11.0 / 27.0;

/// The truncation profile `ξ_δ`.
///
/// On `[δ/4, δ]` the derivative is `ξ′ = θq² + (1−θ)q³` with
/// `q = w²(3−2w)`, `w = 1 − (s − δ/4)/(3δ/4)`, so `ξ′` falls from 1 to 0
/// with vanishing slope at both ends and the profile is `C²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiDelta {
    pub delta: f64,
}

/// `∫₀^w v⁴(3−2v)² dv`.
fn q2(w: f64) -> f64 {
    let w5 = w.powi(5);
    w5 * (9.0 / 5.0 - 2.0 * w + 4.0 / 7.0 * w * w)
}

/// `∫₀^w v⁶(3−2v)³ dv`.
fn q3(w: f64) -> f64 {
    let w7 = w.powi(7);
    w7 * (27.0 / 7.0 - 27.0 / 4.0 * w + 4.0 * w * w - 0.8 * w * w * w)
}

impl XiDelta {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
        }
        Ok(XiDelta { delta })
    }

    /// `(ξ, ξ′, ξ″)` at `s ≥ 0`.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        let dl = self.delta;
        let a = 0.25 * dl;
        if s <= a {
            return (s, 1.0, 0.0);
        }
        if s >= dl {
            return (0.5 * dl, 0.0, 0.0);
        }
        let len = 0.75 * dl;
        let w = 1.0 - (s - a) / len;
        let q = w * w * (3.0 - 2.0 * w);
        let v = a + len * (THETA * (q2(1.0) - q2(w)) + (1.0 - THETA) * (q3(1.0) - q3(w)));
        let d1 = THETA * q * q + (1.0 - THETA) * q * q * q;
        let d2 = -(2.0 * THETA * q + 3.0 * (1.0 - THETA) * q * q) * 6.0 * w * (1.0 - w) / len;
        (v, d1, d2)
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s).0
    }
}

/// `ξ_δ(s)`.
pub fn xi_delta_eval(s: f64, delta: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::param("s", format!("must be nonnegative, got {s}")));
    }
    Ok(XiDelta::new(delta)?.value(s))
}
