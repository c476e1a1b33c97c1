//! Monte Carlo experiment harnesses built on the propagator.

mod fit;
mod ramsey;
mod spectroscopy;
mod sweep;
mod validation;

pub use fit::{
    analytic_fid, analytic_fid_raw, coherence_gain, fit_t2, ripple_amplitude, FitMethod, GainReference, T2Fit,
};
pub use ramsey::{
    make_trace, ramsey_ensemble, ramsey_trajectories, ramsey_trajectory, sample_times, EnsembleSignal, NoiseModel,
    RamseyConfig,
};
pub use spectroscopy::{probe_response_map, refocus_threshold, ResponseMap, SpectroscopyConfig};
pub use sweep::{gain_sweep, GainRow};
pub use validation::{validate_noise, CorrelationCheck, NoiseValidation, NoiseValidationConfig};
