//! First-kind boundary Volterra equation for the single-layer density.

mod diagnostics;
pub mod manufactured;
mod solve;
mod system;

pub use diagnostics::{
    density_tail_fit, trace_consistency, DensityTail, TraceConsistency, TraceProbe, HORIZON_GUARD, TAIL_MIN_POINTS,
    TAIL_TOLERANCE,
};
pub use solve::{solve_density, solve_density_with, DensitySolveReport, SolveOptions};
pub use system::{assemble, assemble_with, AssembleOptions, VolterraSystem, CONDITION_LIMIT};
