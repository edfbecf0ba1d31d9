use thiserror::Error;

/// Errors produced anywhere in the simulation and mitigation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid qubit index: {0}")]
    QubitIndex(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("expectation value has imaginary part {0:e}; state is corrupted")]
    ComplexExpectation(f64),

    #[error("channel is not CPTP: {0}")]
    NotCptp(String),

    #[error("invalid channel parameters: {0}")]
    InvalidChannel(String),

    #[error("circuit too large: {0} qubits (limit {1})")]
    CircuitTooLarge(usize, usize),

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no positive gap solution: {0}")]
    NoGapSolution(String),

    #[error("qubits {0} and {1} are not adjacent on the coupling map")]
    NotAdjacent(usize, usize),

    #[error("neighbor qubit {neighbor} collides with active qubits of CNOT({control}, {target})")]
    NeighborCollision {
        control: usize,
        target: usize,
        neighbor: usize,
    },

    #[error("no noise channel assigned to junction ({0}, {1})")]
    UnassignedJunction(usize, usize),

    #[error("ill-conditioned confusion matrix (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("not a noise-estimation circuit: {0}")]
    NotNec(String),

    #[error("configuration error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("numerical invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
