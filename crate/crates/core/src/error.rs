use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a rational number: {0:?}")]
pub struct ParseRationalError(pub String);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("edge {edge} is a self-loop on vertex {vertex}")]
    SelfLoop { edge: usize, vertex: usize },

    #[error("edge {edge} references vertex {vertex}, but the graph has {vertex_count} vertices")]
    VertexOutOfRange {
        edge: usize,
        vertex: usize,
        vertex_count: usize,
    },

    #[error("graph has more than {cap} simple directed cycles")]
    CycleCapExceeded { cap: usize },

    #[error("edge {edge}: lower bound {lower} exceeds upper bound {upper}")]
    InvalidInterval {
        edge: usize,
        lower: String,
        upper: String,
    },

    #[error("invalid terminal: {0}")]
    InvalidTerminal(String),

    #[error("vector length {got} does not match expected length {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("disturbance is not matched: net terminal flow {imbalance} on the component containing vertex {vertex}")]
    NoMatching { vertex: usize, imbalance: String },

    #[error("network has no terminals")]
    NoTerminals,

    #[error("network still has terminals; absorb the disturbance first")]
    TerminalsPresent,

    #[error("edge {edge} has an interval straddling zero; split it before reorienting")]
    Bidirectional { edge: usize },

    #[error("edge {edge} is not compatibly oriented (need upper >= lower >= 0)")]
    NotCompatible { edge: usize },

    #[error("no feasible circulation respects the edge bounds")]
    Infeasible,

    #[error("circulation is not feasible: {0}")]
    NotFeasible(String),

    #[error("flow decomposition failed: {0}")]
    Decomposition(String),

    #[error("network is not weakly connected")]
    NotWeaklyConnected,

    #[error("counterexample requires a failing verdict")]
    NotApplicable,

    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("target is not admissible: total {target_total} differs from initial total {initial_total}")]
    InadmissibleTarget {
        target_total: f64,
        initial_total: f64,
    },

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid network: {0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
