use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("infeasible action at period {period}: {violation}")]
    InfeasibleAction { period: u64, violation: Violation },

    #[error("invariant violated at period {period}: {message}")]
    Invariant { period: u64, message: String },

    #[error("training diverged at period {period} (alpha = {alpha}): {message}")]
    Divergence { period: u64, alpha: f64, message: String },

    #[error("state space of {states} states exceeds the configured bound of {bound}")]
    StateSpaceTooLarge { states: u64, bound: u64 },

    #[error("action set too large for enumeration: more than {bound} actions")]
    ActionSetTooLarge { bound: u64 },

    #[error("no selection satisfies the vehicle budget {budget}")]
    SelectionInfeasible { budget: f64 },

    #[error("no cyclic schedule found: period {period} needs {visits} visits but the fleet has {fleet}")]
    ScheduleInfeasible { period: u64, visits: u32, fleet: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// The constraint of the feasible action set that an action breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Dimension { expected: usize, found: usize },
    SupplyExceeded { shipped: u64, available: u32 },
    CustomerCapacity { customer: usize, level: u64, capacity: u32 },
    VehicleCapacity { customer: usize, quantity: u32, carried: u64 },
    FleetSize { used: u64, fleet: u32 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Dimension { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Violation::SupplyExceeded { shipped, available } => write!(
                f,
                "supply constraint: shipping and selling {shipped} units with {available} on hand"
            ),
            Violation::CustomerCapacity {
                customer,
                level,
                capacity,
            } => write!(
                f,
                "customer capacity: customer {customer} would hold {level} > {capacity}"
            ),
            Violation::VehicleCapacity {
                customer,
                quantity,
                carried,
            } => write!(
                f,
                "vehicle capacity: customer {customer} receives {quantity} but its vehicles carry {carried}"
            ),
            Violation::FleetSize { used, fleet } => {
                write!(f, "fleet size: {used} vehicles dispatched, fleet has {fleet}")
            }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
