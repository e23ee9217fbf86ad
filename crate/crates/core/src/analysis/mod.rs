//! Post-processing of simulated records: phase-diffusion statistics, power
//! spectra, the dispersive-coupling fit, and parameter sweeps.

mod diffusion;
mod fit;
mod spectrum;
mod sweep;

pub use diffusion::{ensemble_diffusion, linear_fit, phase_diffusion_stats, DiffusionStats, EnsembleDiffusion, LinearFit, MIN_RECORD_LEN};
pub use fit::{fit_dispersive_coupling, CouplingFit, ModeScale, REFERENCE_DISPERSIVE_GAMMA};
pub use spectrum::{spectrum, Signal, PARSEVAL_TOLERANCE, SpectrumConfig, SpectrumEstimate, Window};
pub use sweep::{sweep_amplitude_vs_detuning, sweep_lambda3_vs_pump, zero_state_growth_rate, AmplitudeCurve, Lambda3Curve, Lambda3Point};
