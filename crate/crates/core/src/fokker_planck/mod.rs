//! Fokker–Planck equation of the flow,
//!
//! ```text
//! ∂_t u = −div(b u) + ½ ∂_i∂_j(a^{ij} u),    a = σσᵀ,    u_0 = φ0,
//! ```
//!
//! solved by explicit finite volumes with zero-flux walls: advective fluxes
//! are upwinded at faces, diffusive fluxes `−½∂_j(a^{kj}u)` are centred, so
//! `Σ u·vol` is conserved up to rounding. The solution is compared with the
//! histogram of `Y_t = X_t(Y_0)`, `Y_0 ~ φ0`, and with the weighted norm
//! `∫ u_t^p e^{(1−p)λ} dx` that defines the class `M_p`.

mod compare;
mod grid;
mod solver;

pub use compare::{class_mp_diagnostic, class_mp_of, l1_compare, mc_histogram, ClassMp, L1Report, McHistogram, McRun};
pub use grid::{FVGrid, InitialDensity};
pub use solver::{pde_coefficients, solve_fpe, FpeConfig, FpeSolution, FvScheme, CFL_FACTOR, CLIP_WARNING};
