use thiserror::Error;

/// Every failure the toolkit reports.
///
/// Variants carry enough context to act on: which axis, which mode, which
/// stage. Numerical diagnostics that are *reported* rather than enforced
/// (law checks, bound checks) live in report structs instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteerError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-axis-aligned nodal set on axis {axis}: {detail}")]
    NonAxisAligned { axis: usize, detail: String },

    #[error("ambiguous sign: cell {cell:?} is sign-neutral")]
    AmbiguousSign { cell: Vec<usize> },

    #[error("oscillation violation: eigenfunction {mode} has {found} interior sign changes, expected {expected}")]
    OscillationViolation { mode: usize, expected: usize, found: usize },

    #[error("unbounded potential: max |v| = {max_abs:.6e} exceeds cap {cap:.6e}")]
    UnboundedPotential { max_abs: f64, cap: f64 },

    #[error("degenerate target eigenvalue: gap {gap:.3e} at mode {mode}")]
    DegenerateTarget { mode: usize, gap: f64 },

    #[error("target mode {multi_index:?} not among the {available} assembled eigenpairs")]
    ModeNotAssembled { multi_index: Vec<usize>, available: usize },

    #[error("blow-up in stage '{stage}' at t = {time:.6e}: norm {norm:.3e}")]
    BlowUp { stage: String, time: f64, norm: f64 },

    #[error("target exceeds the state on {fraction:.4} of the retained nodes; amplify first")]
    TargetExceedsState { fraction: f64 },

    #[error("wrong-sign coefficient: c0 = {c0:.6e} must be positive")]
    WrongSignCoefficient { c0: f64 },

    #[error("degenerate gap: {gap:.3e}")]
    DegenerateGap { gap: f64 },

    #[error("rank deficient on axis {axis}: neither the point-evaluation matrix has full rank nor is the target vector outside its span")]
    RankDeficient { axis: usize },

    #[error("payoff degenerate: |mu| = {payoff:.3e}")]
    PayoffDegenerate { payoff: f64 },

    #[error("no valid probe point: best residual {best:.3e}")]
    NoValidProbe { best: f64 },

    #[error("pattern mismatch: {0}")]
    PatternMismatch(String),

    #[error("assumption failure on axis {axis}: {detail}")]
    AssumptionFailure { axis: usize, detail: String },

    #[error("coupling infeasible at sweep index {index}: best bound {best:.3e} above envelope {envelope:.3e}")]
    CouplingInfeasible { index: usize, best: f64, envelope: f64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for SteerError {
    fn from(e: std::io::Error) -> Self {
        SteerError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SteerError>;
