//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the parameter chain, the Fock-space
/// layer, and the propagators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid circuit design: {0}")]
    InvalidDesign(String),

    #[error("capacitance matrix is not safely invertible (det = {det:.6e} fF^3, scale = {scale:.6e} fF)")]
    SingularCapacitance { det: f64, scale: f64 },

    #[error("flux {flux_rad} rad is off the principal branch: cos(flux/2) must stay positive")]
    FluxBranch { flux_rad: f64 },

    #[error(
        "target detuning {target_ghz} GHz is unreachable: it requires a bias Josephson energy \
         of {required_ghz} GHz outside (0, {max_ghz}] GHz"
    )]
    UnreachableDetuning {
        target_ghz: f64,
        required_ghz: f64,
        max_ghz: f64,
    },

    #[error("|Delta_c| = {delta_c_ghz:.6e} GHz is below the {threshold_ghz:.0e} GHz division threshold")]
    DetuningTooSmall { delta_c_ghz: f64, threshold_ghz: f64 },

    #[error("Fock dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("Fock dimensions {dims:?} give total dimension {total}, above the cap {cap}")]
    SpaceTooLarge {
        dims: [usize; 3],
        total: usize,
        cap: usize,
    },

    #[error("operator dimension {op} does not match the subsystem dimension {expected}")]
    DimensionMismatch { op: usize, expected: usize },

    #[error("state vectors live on different spaces: {left:?} vs {right:?}")]
    SpaceMismatch { left: [usize; 3], right: [usize; 3] },

    #[error("Gram matrix is numerically singular (min eigenvalue {min_eig:.3e}, max {max_eig:.3e})")]
    SingularGram { min_eig: f64, max_eig: f64 },

    #[error("no sign change over bracket [{lo}, {hi}]: f(lo) = {f_lo:.6e}, f(hi) = {f_hi:.6e}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root finder did not converge within {0} iterations")]
    RootIterationCap(usize),

    #[error("eigensolver failed to converge")]
    EigenFailure,

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error(
        "step size underflow at t = {t_ns} ns (h = {h_ns:.3e} ns): \
         the problem is too stiff for the requested tolerance"
    )]
    StepSizeUnderflow { t_ns: f64, h_ns: f64 },

    #[error("Hamiltonian is not Hermitian at t = {t_ns} ns (relative defect {defect:.3e})")]
    NotHermitian { t_ns: f64, defect: f64 },

    #[error("logical amplitude |u| = {0:.3e} is too small for phase extraction")]
    ZeroAmplitude(f64),

    #[error(
        "gate time {t_g_ns} ns is too short: the coupler detuning would reach \
         {delta_c_ghz:.6e} GHz at the pulse peak"
    )]
    GateTimeTooShort { t_g_ns: f64, delta_c_ghz: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 3 for numerical failures. (Verification failures exit 4, but those are
    /// reported through `verify::VerifyReport`, not through `Error`.)
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidDesign(_) | Error::Config(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
