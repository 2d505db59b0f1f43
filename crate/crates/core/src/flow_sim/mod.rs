//! Stochastic flows driven by a shared Brownian path.
//!
//! For `dX = b(X) dt + σ(X) dW` every particle of a grid is integrated with
//! the same increments `ΔW_k`, so `x ↦ X_t(x)` is a discrete flow map. The
//! tangent `J_t = ∇X_t` solves
//!
//! ```text
//! dJ = ∇b(X) J dt + ∇σ^{·l}(X) J dW^l,     J_0 = I,
//! ```
//!
//! and is obtained by differentiating the scheme itself, so it is the exact
//! Jacobian of the discrete map. Its determinant is compared with
//!
//! ```text
//! det ∇X_t = exp{∫₀ᵗ div σ dW + ∫₀ᵗ [div b − ½∂_iσ^{jl}∂_jσ^{il}] ds}.
//! ```

mod grid;
mod integrate;
mod jacobian;

pub use grid::{BoxLayout, Control, ParticleGrid};
pub use integrate::{
    all_step_times, crossing_count, simulate_controlled, simulate_flow, simulate_flow_as, simulate_independent,
    simulate_tangent, solve_skeleton, Convention, FlowEnsemble, IndependentRun, IndependentSummary, Scheme,
    DIVERGENCE_RADIUS, MAX_DT,
};
pub use jacobian::{
    formula_integrands, inverse_jacobian_moment, inverse_moment_bracket, jacobian_via_formula, tangent_log_det,
    InverseJacobianMoment, JacobianFormula,
};
