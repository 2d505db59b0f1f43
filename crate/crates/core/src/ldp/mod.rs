//! Small-noise asymptotics of `dX^ε = b(X^ε) dt + √ε σ(X^ε) dW`.
//!
//! The rate of a trajectory set `B` is
//!
//! ```text
//! I(B) = inf { ½‖h‖²_{L²} : X^h ∈ B },    Ẋ^h = b(X^h) + σ(X^h) h,
//! ```
//!
//! approximated over controls constant on `K` intervals. The constraint is
//! enforced by the penalty `P·dist(X^h, B)²` with `P` raised geometrically;
//! gradients come from the adjoint of the Heun step,
//!
//! ```text
//! λ_n = (∂x_{n+1}/∂x_n)ᵀ λ_{n+1},   ∂J/∂h_k = h_k Δ + Σ_{n ∈ k} (∂x_{n+1}/∂h_k)ᵀ λ_{n+1}.
//! ```
//!
//! Monte Carlo checks: `ε log P(X^ε ∈ B) → −I(B)`, and the Laplace form
//! `ε log E e^{−g(X^ε)/ε} → −inf_h {g(X^h) + ½‖h‖²}`.

mod rate;
mod report;
mod skeleton;
mod small_noise;
mod target;
mod weak;

pub use rate::{laplace_rate_scan, rate_minimize, variational_laplace, RateConfig, RateEstimate, RateScan, Stage, VariationalValue};
pub use report::{ldp_report, LdpReport};
pub use small_noise::{
    laplace_estimate, linear_fit, small_noise_mc, wilson_interval, LaplaceEstimate, SmallNoiseConfig, SmallNoiseRow,
    SmallNoiseTable, MIN_ESS, Z95, Z95_ONE_SIDED,
};
pub use target::{Functional, TargetSet};
pub use weak::{oscillating_control, weak_convergence_check, WeakRow, WeakTable};
