use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size error: {0}")]
    Size(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("binding error: {0}")]
    Binding(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("unsupported parameter: {0}")]
    Unsupported(String),
    #[error("channel error: {0}")]
    Channel(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no rank drop up to k = {k_max}; determinants {determinants:?}")]
    Inconclusive {
        k_max: usize,
        determinants: Vec<f64>,
    },
    #[error("optimizer diverged at iteration {iteration} (cost {cost})")]
    Divergence {
        iteration: usize,
        cost: f64,
        trace: Vec<f64>,
    },
    #[error("eigenvector extraction failed: {0}")]
    Extraction(String),
    #[error("ambiguous branch for pair {pair}: candidates {candidates:?}")]
    Ambiguity { pair: usize, candidates: Vec<f64> },
    #[error("unreliable phase estimate: |amplitude| = {0}")]
    UnreliablePhase(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
