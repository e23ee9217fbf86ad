use thiserror::Error;

/// Errors raised by the model, simulators, and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("pump below self-oscillation threshold (Xi = {xi})")]
    BelowThreshold { xi: f64 },

    #[error("zero-amplitude state is the only stable state (detuning {delta_f} rad/s <= -omega_c = {neg_omega_c} rad/s)")]
    ZeroStateStable { delta_f: f64, neg_omega_c: f64 },

    #[error("invalid pump calibration: {0}")]
    InvalidCalibration(String),

    #[error("integrator step {dt} s exceeds limit {limit} s")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("non-finite state at t = {t} s")]
    NonFinite { t: f64 },

    #[error("insufficient time resolution: {0}")]
    InsufficientResolution(String),

    #[error("full-model run too large: {0}")]
    ScaleTooLarge(String),

    #[error("degenerate spectrum: eigenvalues {a} and {b} coincide")]
    DegenerateSpectrum { a: String, b: String },

    #[error("pump-phase step {delta_theta} rad outside the linear regime (|step| <= {limit})")]
    NonlinearRegime { delta_theta: f64, limit: f64 },

    #[error("detuning pulse is not adiabatic: {0}")]
    NotAdiabatic(String),

    #[error("phase unwrap fault at t = {t} s (jump {jump} rad)")]
    UnwrapFault { t: f64, jump: f64 },

    #[error("pump phase excursion {theta} rad exceeds limit {limit} rad at cycle {cycle}")]
    Excursion { cycle: usize, theta: f64, limit: f64 },

    #[error("self-oscillation collapsed to the zero-amplitude state at t = {t} s")]
    AmplitudeCollapse { t: f64 },

    #[error("record too short: {got} < {need}")]
    TooShort { got: usize, need: usize },

    #[error("non-uniform sampling at index {index}")]
    NonUniformSampling { index: usize },

    #[error("degenerate fit data: {0}")]
    DegenerateData(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Short class name, stable across releases; used in CLI diagnostics.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "InvalidParams",
            Error::BelowThreshold { .. } => "BelowThreshold",
            Error::ZeroStateStable { .. } => "ZeroStateStable",
            Error::InvalidCalibration(_) => "InvalidCalibration",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::NonFinite { .. } => "NonFinite",
            Error::InsufficientResolution(_) => "InsufficientResolution",
            Error::ScaleTooLarge(_) => "ScaleTooLarge",
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::NonlinearRegime { .. } => "NonlinearRegime",
            Error::NotAdiabatic(_) => "NotAdiabatic",
            Error::UnwrapFault { .. } => "UnwrapFault",
            Error::Excursion { .. } => "ExcursionWarning",
            Error::AmplitudeCollapse { .. } => "AmplitudeCollapse",
            Error::TooShort { .. } => "TooShort",
            Error::NonUniformSampling { .. } => "NonUniformSampling",
            Error::DegenerateData(_) => "DegenerateData",
            Error::Config(_) => "ConfigError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
