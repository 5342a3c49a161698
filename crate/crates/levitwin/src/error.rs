use thiserror::Error;

/// Errors produced by the physics routines.
///
/// Configuration problems are reported as `InvalidConfig`; everything else is
/// a physics- or numerics-level failure.
#[derive(Debug, Error)]
pub enum Error {
    /// A raw input failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The difference mode is not trapped (omega0^2 + 4 g omega0 <= 0).
    #[error("unstable trap: omega_minus^2 = {omega_minus_sq} rad^2/s^2 <= 0")]
    UnstableTrap { omega_minus_sq: f64 },

    /// Q1 = Q2 makes the compensation field diverge.
    #[error("equal charges: compensation field undefined for Q1 = Q2")]
    EqualCharges,

    /// Integration step exceeds the stability bound.
    #[error("step too large: dt = {dt} s exceeds bound {bound} s")]
    StepTooLarge { dt: f64, bound: f64 },

    /// A covariance matrix violated positivity beyond tolerance.
    #[error("non-physical state: minimum symplectic eigenvalue {min_eig} < 1/2")]
    NonPhysicalState { min_eig: f64 },

    /// Undamped resonance evaluated exactly on resonance.
    #[error("singular mechanical response at omega = {omega} rad/s")]
    SingularResponse { omega: f64 },

    /// Requested filter bandwidth is below the minimum of the filter family.
    #[error("filter bandwidth {requested} rad/s below family minimum {minimum} rad/s")]
    BandwidthUnreachable { requested: f64, minimum: f64 },

    /// Electron-demo geometry violates the far-field assumptions.
    #[error("invalid demo geometry: {0}")]
    GeometryInvalid(String),

    /// Feedback kernel construction produced a non-causal kernel.
    #[error("feedback kernel is not causal: {0}")]
    KernelNotCausal(String),

    /// Record too short for the requested spectral estimate.
    #[error("record segment too short: {0}")]
    SegmentTooShort(String),
}

pub type Result<T> = std::result::Result<T, Error>;
