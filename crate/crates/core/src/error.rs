use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("boundary coordinate r = {r} outside [0, {length})")]
    OutOfRange { r: f64, length: f64 },

    #[error("grazing collision at r = {r:.15}, phi = {phi:.15}")]
    GrazingCollision { r: f64, phi: f64 },

    #[error("numerical loss: {0}")]
    NumericalLoss(String),

    #[error("implicit corridor update did not converge (x = {x}, w = {w})")]
    NoConvergence { x: f64, w: f64 },

    #[error("separatrix bracket unclassified after {m_max} steps")]
    Unclassified { m_max: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cell resolution limit reached at n = {n} (height {height:e})")]
    ResolutionLimit { n: usize, height: f64 },

    #[error("insufficient tail: {events} events beyond n = {n_lo}, need {required}")]
    InsufficientTail {
        events: u64,
        n_lo: usize,
        required: u64,
    },

    #[error("bad fit range: {0}")]
    BadRange(String),

    #[error("non-positive value {value} at n = {n}")]
    NonPositiveValues { n: f64, value: f64 },
}
