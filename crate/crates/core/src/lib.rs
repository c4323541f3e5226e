//! Dispersing billiards whose boundary has flat points.
//!
//! The table is bounded by `y = ±(|x|^β + 1)` near the y axis and closed by
//! circular dispersing arcs. Collisions near the flat points `(0, ±1)` are
//! only weakly hyperbolic; this crate simulates the collision map and
//! measures the scaling laws that govern the resulting polynomial decay of
//! correlations.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod billiard;
pub mod corridor;
pub mod error;
pub mod geometry;
pub mod hyperbolicity;
pub mod parallel;
mod quad;
pub mod statistics;
pub mod vec2;
pub mod verify;

pub use billiard::{Billiard, CollisionRecord, PhasePoint, ReturnTime, WindowSpec};
pub use corridor::{CorridorState, CorridorTrace, ExitType};
pub use error::{Error, Result};
pub use geometry::{build_table, BetaTable, FlatFamilyParams, Variant};
pub use parallel::Exec;

/// Predicted scaling exponents for a given `β`.
pub mod exponents {
    /// Correlation decay exponent `a = (β+2)/(β-2)`.
    pub fn a(beta: f64) -> f64 {
        (beta + 2.0) / (beta - 2.0)
    }

    /// Cell-height and expansion exponent `b = a + 2`.
    pub fn b(beta: f64) -> f64 {
        (3.0 * beta - 2.0) / (beta - 2.0)
    }

    /// Survival tail `P(R > n) ~ n^{-(a+1)}`.
    pub fn tail(beta: f64) -> f64 {
        -(a(beta) + 1.0)
    }

    /// Growth of the expansion accumulated before the crossing.
    pub fn first_half_expansion(beta: f64) -> f64 {
        (2.0 * beta - 2.0) / (beta - 2.0)
    }

    /// Growth of the expansion accumulated after the crossing.
    pub fn second_half_expansion(beta: f64) -> f64 {
        beta / (beta - 2.0)
    }

    /// Decay of the crossing angle with the excursion length.
    pub fn crossing_angle(beta: f64) -> f64 {
        beta / (2.0 - beta)
    }

    /// Constant in the curvature lower bound `m² K(r_m)`.
    pub fn curvature_constant(beta: f64) -> f64 {
        beta * (beta - 1.0) / (beta - 2.0).powi(2)
    }

    /// Constant in the front lower bound `m B(X_{m-1})`.
    pub fn front_constant(beta: f64) -> f64 {
        (beta - 1.0) / (beta - 2.0)
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn reference_values() {
            for (beta, a_, b_) in [(3.0, 5.0, 7.0), (4.0, 3.0, 5.0), (6.0, 2.0, 4.0)] {
                assert_eq!(a(beta), a_);
                assert_eq!(b(beta), b_);
                assert_eq!(b(beta), a(beta) + 2.0);
            }
        }
    }
}
