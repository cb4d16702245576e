//! Volume, initial-data and single-layer potentials of the Oseen kernel.

mod density;
mod export;
mod fields;
mod probe;
mod single_layer;
mod traces;
mod volume;

pub(crate) use density::slab_flux;
pub use density::{SurfaceDensity, TimeGrid};
pub use export::{read_samples_csv, write_samples_csv, PotentialSample, SampleRow};
pub use fields::{InitialField, SourceField, TRUNCATION};
pub use probe::{convolution_scaling_probe, ProbeParams, ScalingProbe, Window, PROBE_MARGIN};
pub use single_layer::{
    eval_single_layer, near_boundary, single_layer_trace, slab_kernel, slab_kernel_derivative, time_rule, LayerQuadrature, Target,
};
pub use traces::{initial_potential_trace, volume_potential_trace, TraceContent};
pub use volume::{
    eval_initial_potential, eval_initial_potential_with, eval_volume_potential, eval_volume_potential_with, Evaluation,
    PotentialOptions,
};
