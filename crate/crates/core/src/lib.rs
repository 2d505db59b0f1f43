//! Numerical laboratory for degenerate SDEs with Sobolev coefficients.
//!
//! The crate is organised around the objects that appear when a rough
//! coefficient pair `(b, σ)` is approximated by smooth ones and the resulting
//! stochastic flows are compared:
//!
//! * [`coefficients`]: catalog fields, mollification, cutoffs, the
//!   Stratonovich drift correction and the local maximal function.
//! * [`flow_sim`]: common-noise particle flows, tangent flows, the Jacobian
//!   determinant formula, the skeleton ODE and the small-noise controlled SDE.
//! * [`density`]: weighted measures `e^λ dx`, pushforward densities, the
//!   Λ-functionals, the `L^p` density bound and transport certificates.
//! * [`stability`]: the ξ_δ profile, flow-gap functionals and the Cauchy
//!   study across mollification levels.
//! * [`fokker_planck`]: a conservative finite-volume solver cross-checked
//!   against Monte Carlo histograms.
//! * [`ldp`]: rate-function minimisation, small-noise probabilities and
//!   Laplace functionals.

pub mod coefficients;
pub mod density;
pub mod error;
pub mod flow_sim;
pub mod fokker_planck;
pub mod ldp;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod stability;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
