use thiserror::Error;

/// Coarse classification used by front-ends to map failures onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input: bad parameters, mismatched dimensions.
    Validation,
    /// The requested physics has no answer (below threshold, no steady state).
    Regime,
    /// A numerical guard fired (truncation, step size, positivity).
    Numerical,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlywheelError {
    #[error("Fock space needs at least two levels, got {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("engine requires omega_h > omega_c > 0 (omega_h = {omega_h}, omega_c = {omega_c})")]
    InvalidFrequencies { omega_h: f64, omega_c: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("|alpha|^2 = {alpha_sq} exceeds the truncation guard dim/4 = {limit}")]
    DisplacementTooLargeForTruncation { alpha_sq: f64, limit: f64 },

    #[error("truncation insufficient: population {population:e} in the top two Fock levels")]
    TruncationInsufficient { population: f64 },

    #[error("truncation breached at t = {time}: population {population:e} in the top two Fock levels")]
    TruncationBreached { time: f64, population: f64 },

    #[error("feedback (kappa_f = {kappa_f}) requires a measurement signal (gamma_m > 0)")]
    FeedbackWithoutMeasurement { kappa_f: f64 },

    #[error("generator contains a negative-rate dissipator and is not a standard-form composite")]
    NegativeRateStandalone,

    #[error("composed generator is not of standard form (down = {down}, up = {up})")]
    NonStandardComposite { down: f64, up: f64 },

    #[error("step dt = {dt} exceeds the stability bound {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("no steady state: {0}")]
    NoSteadyState(String),

    #[error("feedback kappa_f = {kappa_f} is not above the threshold {threshold}")]
    BelowThreshold { kappa_f: f64, threshold: f64 },

    #[error("kappa_f = {kappa_f} lies within relative 1e-12 of the threshold {threshold}")]
    NearThreshold { kappa_f: f64, threshold: f64 },

    #[error("conditional state eigenvalue {min_eigenvalue:e} below tolerance")]
    NonPositiveEigenvalueBeyondTolerance { min_eigenvalue: f64 },

    #[error("steady-state solver residual {residual:e} above tolerance")]
    SolverResidual { residual: f64 },

    #[error("need at least {required} trajectories, got {available}")]
    InsufficientTrajectories { required: usize, available: usize },
}

impl FlywheelError {
    pub fn class(&self) -> ErrorClass {
        use FlywheelError::*;
        match self {
            InvalidDimension(_)
            | DimensionMismatch { .. }
            | InvalidParameter(_)
            | InvalidFrequencies { .. }
            | InvalidState(_)
            | FeedbackWithoutMeasurement { .. }
            | NegativeRateStandalone
            | InsufficientTrajectories { .. } => ErrorClass::Validation,
            NonStandardComposite { .. }
            | NoSteadyState(_)
            | BelowThreshold { .. }
            | NearThreshold { .. } => ErrorClass::Regime,
            DisplacementTooLargeForTruncation { .. }
            | TruncationInsufficient { .. }
            | TruncationBreached { .. }
            | StepTooLarge { .. }
            | NonPositiveEigenvalueBeyondTolerance { .. }
            | SolverResidual { .. } => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, FlywheelError>;
