//! Stability of approximate flows.
//!
//! For two flows `X`, `X̂` driven by one Brownian path put `Z_t = X_t − X̂_t`
//! and `Φ = sup_t ξ_δ(|Z_t|²)`, where `ξ_δ(s) = s` on `[0, δ/4]` and
//! `ξ_δ(s) = δ/2` on `[δ, ∞)`. On the confined set
//! `G_R = {sup_t |X_t| ∨ |X̂_t| ≤ R}` the functional
//!
//! ```text
//! E ∫_{B_N ∩ G_R} log(Φ/δ² + 1) dμ
//! ```
//!
//! grows only like `log δ⁻¹` times the coefficient gap, while Chebyshev
//! controls `μ(B_N ∩ G_Rᶜ)` by `R⁻¹ E∫_{B_N} sup_t |X_t| ∨ |X̂_t| dμ`.
//!
//! Difference quotients of Sobolev fields are controlled by the maximal
//! function,
//!
//! ```text
//! |b(x) − b(y)| ≤ 2^d |x − y| (M_R|∇b|(x) + M_R|∇b|(y)),   |x − y| ≤ R,
//! ```
//!
//! and for `W^{1,1}` fields by the majorant `f_{δ,ε}`.

mod cauchy;
mod gap;
mod lipschitz;
mod majorant;
mod xi;

pub use cauchy::{cauchy_study, level_field, CauchyConfig, CauchyRow, CauchyTable};
pub use gap::{flow_gap, StabilityReport};
pub use lipschitz::{lipschitz_maximal_check, sample_pairs, LipschitzAudit, EXCLUSION_RADIUS, LIPSCHITZ_SLACK};
pub use majorant::{f_delta_eps_majorant, BudgetCheck, FDeltaEps, MajorantTerms};
pub use xi::{xi_delta_eval, XiDelta};
