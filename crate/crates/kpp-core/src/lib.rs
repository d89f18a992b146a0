//! Numerical laboratory for the higher-order KPP family
//!
//!   u_t = (-1)^{m+1} D_x^{2m} u + u(1 - u),   m = 1, 2, 3, ...
//!
//! Traveling waves u(x,t) = f(y), y = x - lambda*t, satisfy the 2m-th order
//! ODE  (-1)^{m+1} f^{(2m)} + lambda f' + f(1 - f) = 0  with f(-inf) = 1 and
//! f(+inf) = 0. The crate provides:
//!
//! * [`model`] - shared domain types, exact solutions, integral identities,
//!   and the profile validity gate used everywhere else;
//! * [`charpoly`] - characteristic polynomials of the linearizations about
//!   the two rest states, root classification, and double-root loci;
//! * [`twsolver`] - a banded damped-Newton solver for the truncated
//!   traveling-wave boundary-value problem, branch continuation, and the
//!   maximal-speed scan;
//! * [`cauchy`] - IMEX time integration of the PDE from step-like data,
//!   front tracking, log-shift fitting, and blow-up detection;
//! * [`linearized`] - the moving-frame linearized operator, the
//!   affine-centre-subspace solves, and the small-time self-similar profile.
//!
//! Everything is deterministic: no randomness, no global state.

pub mod banded;
pub mod cauchy;
pub mod charpoly;
pub mod grid;
pub mod linearized;
pub mod model;
pub mod quad;
pub mod stencil;
pub mod twsolver;

pub use grid::Grid;
pub use model::{EquilibriumSide, ModelSpec, TWProfile};
