//! Decay-rate experiments and the closed-form rate calculators.

mod envelope;
mod experiments;
mod fit;
mod rates;

pub use envelope::{interpolation_envelope, Envelope};
pub use experiments::{
    fit_spatial_decay, fit_temporal_decay, geometric_times, initial_rate, magnitude, spatial_rate, volume_rate, DecayExperiment,
    DecaySample, Field, FieldProbe, RayDirection, RaySpec, TemporalTarget, LAYER_RATE,
};
pub use fit::{fit_power_law, DecayFit, FitCheck, FitOptions, MIN_WINDOW, SPATIAL_TOLERANCE, TEMPORAL_TOLERANCE};
pub use rates::{
    epsilon_grid, exponent_margin, exponent_sum, predict_linear_rates, predict_nonlinear_rates, step_count, verify_exponent_sums,
    Counterexample, ExponentSumReport, NonlinearRates, RateInputs,
};
