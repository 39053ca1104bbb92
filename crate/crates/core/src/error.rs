use thiserror::Error;

use crate::system::AtomId;

/// Every failure the engine can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermoError {
    #[error("a system needs at least one atom")]
    EmptySystem,
    #[error("atom {0} is not registered in this world")]
    UnknownAtom(AtomId),
    #[error("refusing to enumerate subsystems of a system with {0} atoms")]
    SizeLimit(usize),
    #[error("not a proper subsystem")]
    NotProperSubsystem,

    #[error("process has no entries")]
    EmptyProcess,
    #[error("states of atom {0} do not match at the concatenation point")]
    StateMismatch(AtomId),
    #[error("processes share atom {0}")]
    Overlap(AtomId),
    #[error("process is not catalytic on the given system")]
    NotCatalytic,
    #[error("process is not a work process on the given system")]
    NotWorkProcess,
    #[error("process carries no reverse witness")]
    NoReverseWitness,
    #[error("joint state does not cover atom {0}")]
    MissingState(AtomId),

    #[error("search depth {0} exhausted without a decision")]
    DepthExceeded(usize),
    #[error("no connecting work process for atom {0}")]
    Unreachable(AtomId),

    #[error("precondition not met: {0}")]
    PreconditionNotMet(String),
    #[error("the two reservoirs are the same atom")]
    SameReservoir,
    #[error("atom {0} is not a heat reservoir")]
    NotAReservoir(AtomId),
    #[error("atom {0} is not an ideal gas")]
    NotAGas(AtomId),

    #[error("no temperature can be assigned to this heat flow")]
    NoTemperature,
    #[error("heat flow is zero")]
    ZeroHeat,
    #[error("record sequence is not cyclic on the probe system")]
    NotCyclic,
    #[error("record {0} has non-zero heat but no temperature")]
    UnassignedTemperature(usize),

    #[error("parameter {0} outside [0, 1] or reversed interval")]
    OutOfDomain(f64),
    #[error("quadrature error estimate {estimate:e} above tolerance {tol:e}")]
    ToleranceNotMet { estimate: f64, tol: f64 },

    #[error("type-1 processes can only raise the pressure ({from} -> {to})")]
    PressureDecrease { from: f64, to: f64 },
    #[error("gas state pV = {pv} is not on the reservoir isotherm nR\u{3b8} = {target}")]
    OffIsotherm { pv: f64, target: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("scale factor must be positive")]
    NonPositiveScale,
    #[error("scaled systems do not share a base model")]
    IncompatibleBases,
    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),
    #[error("export failed: {0}")]
    Export(String),
}

pub type Result<T, E = ThermoError> = std::result::Result<T, E>;
