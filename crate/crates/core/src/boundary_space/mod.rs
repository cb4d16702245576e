//! The computable pieces of the boundary tail norm.

mod half;
mod norms;
mod projection;
mod tail;
mod trace;

pub use half::half_derivative;
pub use norms::{h1_boundary_norm, h1_dual_norm, h1_norm_from_gradients, RieszMap};
pub use projection::project_zero_flux;
pub use tail::{h_tail_norm, h_tail_norm_with, HTailNorm, TailFit, TailParts, TAIL_SHARE};
pub use trace::BoundaryTrace;
