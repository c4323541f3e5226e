//! Estimators: singularity cells, return-time tails, correlations,
//! expansion sums and power-law fits.

pub mod cells;
pub mod correlations;
pub mod expansion;
pub mod fit;
pub mod tail;
