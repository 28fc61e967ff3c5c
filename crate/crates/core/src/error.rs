use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by field evaluation, integration and layer analysis.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A state or vector did not have the system's dimension.
    DimensionMismatch { expected: usize, found: usize },
    /// The switching multiplier was outside `[-1, 1]`.
    LambdaOutOfRange(f64),
    /// A vector field produced a non-finite component.
    NonFiniteField { component: usize, value: f64 },
    /// A parameter violated its documented invariant.
    InvalidParameter(&'static str),
    /// The sigmoid argument lies outside its domain (Hill functions need `x > 0`).
    SigmoidDomain(f64),
    /// The requested tail expansion is not available for this sigmoid kind.
    UnsupportedExpansion { kind: &'static str, order: usize },
    /// The tail expansion was requested too close to the switch (`|v| < 3ε`).
    OutsideTailRegion { v: f64, eps: f64 },
    /// Asymptotic matching needs a non-zero leading tail coefficient.
    MatchingUndefined,
    /// Layer analysis needs coordinates in which `v(x) = x₁`.
    NonAdaptedCoordinates,
    /// The initial state of a surface search was already on the surface.
    StartsOnSurface,
    /// `f₁` vanishes on a whole λ-interval; the sliding multiplier is not determined.
    DegenerateInclusion { lambda_lo: f64, lambda_hi: f64 },
    /// The step-size controller shrank the step below representable size.
    StepSizeUnderflow { t: f64 },
    /// The integration did not reach its end time within `max_steps`.
    MaxStepsExceeded { t: f64, steps: usize },
    /// Newton continuation of a sliding multiplier failed (fold or loss of root).
    ContinuationFailed { t: f64 },
    /// A hybrid trajectory stopped making progress along the surface.
    Stalled { t: f64 },
    /// Layer equilibria require an autonomous layer system.
    TimeDependentLayer,
}

impl Error {
    /// Errors that the step controller recovers from by shrinking the step.
    pub(crate) fn is_recoverable(&self) -> bool {
        matches!(self, Error::ContinuationFailed { .. } | Error::NonFiniteField { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::LambdaOutOfRange(l) => write!(f, "switching multiplier {l} outside [-1, 1]"),
            Error::NonFiniteField { component, value } => {
                write!(f, "non-finite field component {component}: {value}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::SigmoidDomain(x) => write!(f, "sigmoid argument {x} outside domain"),
            Error::UnsupportedExpansion { kind, order } => {
                write!(f, "no tail expansion of order {order} for {kind} sigmoid")
            }
            Error::OutsideTailRegion { v, eps } => {
                write!(f, "tail expansion needs |v| >= 3 eps (v = {v}, eps = {eps})")
            }
            Error::MatchingUndefined => write!(f, "asymptotic matching undefined for c0 = 0"),
            Error::NonAdaptedCoordinates => {
                write!(f, "layer analysis requires adapted coordinates with v(x) = x1")
            }
            Error::StartsOnSurface => write!(f, "initial state lies on the switching surface"),
            Error::DegenerateInclusion { lambda_lo, lambda_hi } => write!(
                f,
                "f1 vanishes identically for lambda in [{lambda_lo}, {lambda_hi}]; sliding multiplier undetermined"
            ),
            Error::StepSizeUnderflow { t } => write!(f, "step size underflow at t = {t}"),
            Error::MaxStepsExceeded { t, steps } => {
                write!(f, "exceeded {steps} steps at t = {t}")
            }
            Error::ContinuationFailed { t } => {
                write!(f, "sliding multiplier continuation failed at t = {t}")
            }
            Error::Stalled { t } => write!(f, "hybrid trajectory stalled at t = {t}"),
            Error::TimeDependentLayer => {
                write!(f, "layer equilibria need an autonomous layer system")
            }
        }
    }
}

impl core::error::Error for Error {}
