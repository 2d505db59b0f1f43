//! Pushforward densities of flows under weighted measures.
//!
//! For `μ(dx) = e^{λ(x)} dx` the pushforward density `J_t` is defined by
//! `∫φ(X_t) dμ = ∫φ J_t dμ`, and along each trajectory
//!
//! ```text
//! e^{λ(X_t)−λ(x)} det ∇X_t(x) = exp{∫₀ᵗ Λ₁(X_s) dW_s + ∫₀ᵗ Λ₂(X_s) ds}.
//! ```
//!
//! When `μ` is finite and `p > 1`,
//!
//! ```text
//! E∫|J_t|^p dμ ≤ μ(ℝ^d)^{p/(p+1)} (sup_t ∫exp{tp³|Λ₁|² − tp²Λ₂} dμ)^{1/(p+1)},
//! ```
//!
//! and Hölder turns that into a transport bound `E∫φ(X_t)dμ ≤ K_p‖φ‖_{L^p_μ}`.

mod bounds;
mod measure;
mod pushforward;

pub use bounds::{
    check_transport_bound, lambda_formula_exponent, lambda_functionals, lp_bound_rhs, CertificateEntry, FlowCertificate,
    KSource, LpBound, TestFunction, TAIL_DOMINATED,
};
pub use measure::{Weight, WeightedMeasure};
pub use pushforward::{estimate_pushforward, DensityEstimate};
