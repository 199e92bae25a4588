//! Guaranteed lower and upper bounds on the error of black-box PDE
//! approximations.
//!
//! The residual of an approximation is restricted to a rectangle inside
//! the domain and extended to a rectangle around it. Its dual norms there
//! come from small spectral Galerkin solves and, scaled by the stability
//! constants of the operator, bracket the `H¹` error:
//!
//! ```text
//! c_B ‖r_◯‖_{H⁻¹(◯)}  ≤  |u − ũ|_{H¹(Ω)}  ≤  C_B ‖r_◻‖_{H⁻¹(◻)}
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod approximant;
pub mod catalog;
pub mod certify;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod residual;
pub mod run;
pub mod spectral;

pub use approximant::{Field, Sample};
pub use certify::{certify_elliptic, certify_parabolic, elliptic_constants, BoundReport, Certifier, Resolution, StabilityConstants};
pub use error::{Error, Result};
pub use geometry::{Embedding, Polygon, Rect};
pub use residual::{EllipticProblem, SpaceTimeProblem};
pub use spectral::{RieszSolver, SpectralSpace};
