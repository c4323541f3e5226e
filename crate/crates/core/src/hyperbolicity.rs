//! Expansion of unstable fronts along excursions.
//!
//! A beam of trajectories leaving a collision has an orthogonal front with
//! curvature `B > 0`. Across a free flight of length `τ` the front is
//! stretched by `1 + τB` and the curvature becomes `1/(τ + 1/B)`; a
//! collision on a wall of curvature `K` then adds `2K/cos φ`.

use serde::Serialize;

use crate::billiard::{CollisionRecord, PhasePoint};
use crate::error::{Error, Result};
use crate::statistics::fit::{fit_power_law, DecayFit, FitModel};

pub const DEFAULT_FRONT_CURVATURE: f64 = 1.0;

/// Curvature of the outgoing front after a collision.
pub fn front_update(curvature: f64, cos_phi: f64, tau_prev: f64, b_prev: f64) -> Result<f64> {
    if !(cos_phi > 0.0) {
        return Err(Error::Domain(format!("cos(phi) = {cos_phi} <= 0")));
    }
    if !(b_prev > 0.0) || !(tau_prev > 0.0) {
        return Err(Error::Domain(format!(
            "front update needs tau > 0 and B > 0 (tau = {tau_prev}, B = {b_prev})"
        )));
    }
    Ok(2.0 * curvature / cos_phi + 1.0 / (tau_prev + 1.0 / b_prev))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionBreakdown {
    pub n: usize,
    pub n_prime: usize,
    pub log_lambda_1: f64,
    pub log_lambda_2: f64,
    pub log_lambda_total: f64,
}

impl ExpansionBreakdown {
    pub fn lambda_total(&self) -> f64 {
        self.log_lambda_total.exp()
    }
    pub fn lambda_1(&self) -> f64 {
        self.log_lambda_1.exp()
    }
    pub fn lambda_2(&self) -> f64 {
        self.log_lambda_2.exp()
    }
}

/// Front curvatures `B(X_0), ..., B(X_{n-1})` along the records.
pub fn front_sequence(records: &[CollisionRecord], b0: f64) -> Result<Vec<f64>> {
    if !(b0 > 0.0) {
        return Err(Error::Domain(format!("initial front curvature {b0} <= 0")));
    }
    let mut out = Vec::with_capacity(records.len());
    let mut b = b0;
    for (m, rec) in records.iter().enumerate() {
        if m > 0 {
            b = front_update(
                rec.point.curvature,
                rec.phase.phi.cos(),
                records[m - 1].tau,
                b,
            )?;
        }
        out.push(b);
    }
    Ok(out)
}

/// `Λ = Π (1 + τ_m B_m)` over the records, split at `n_prime`.
pub fn expansion_product(
    records: &[CollisionRecord],
    b0: f64,
    n_prime: usize,
) -> Result<ExpansionBreakdown> {
    if records.is_empty() {
        return Err(Error::InvalidParams("empty excursion".into()));
    }
    let fronts = front_sequence(records, b0)?;
    let mut first = 0.0;
    let mut second = 0.0;
    for (m, (rec, b)) in records.iter().zip(&fronts).enumerate() {
        let term = (rec.tau * b).ln_1p();
        if m < n_prime {
            first += term;
        } else {
            second += term;
        }
    }
    Ok(ExpansionBreakdown {
        n: records.len(),
        n_prime: n_prime.min(records.len()),
        log_lambda_1: first,
        log_lambda_2: second,
        log_lambda_total: first + second,
    })
}

/// Slope `dφ/dr` of the unstable direction.
pub fn unstable_slope(b: f64, curvature: f64, cos_phi: f64) -> f64 {
    cos_phi * b - curvature
}

/// `|V|_p / |V|` for the tangent vector `(1, slope)` at `phase`.
pub fn pnorm_ratio(phase: PhasePoint, slope: f64) -> f64 {
    phase.phi.cos() / (1.0 + slope * slope).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct SplitRatioReport {
    /// `(n, n Λ^(2) / Λ^(1))`.
    pub ratios: Vec<(f64, f64)>,
    pub min_ratio: f64,
    pub trend: DecayFit,
    pub max_decay_slope: f64,
    pub pass: bool,
}

/// Largest downward log-log trend of `n Λ^(2)/Λ^(1)` still read as flat.
pub const SPLIT_RATIO_MAX_DECAY: f64 = -0.2;

pub fn split_ratio_check(family: &[ExpansionBreakdown]) -> Result<SplitRatioReport> {
    let ratios: Vec<(f64, f64)> = family
        .iter()
        .map(|b| {
            let n = b.n as f64;
            (n, (n.ln() + b.log_lambda_2 - b.log_lambda_1).exp())
        })
        .collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(n, _)| {
            (lo.min(n), hi.max(n))
        });
    if !(hi >= 10.0 * lo) {
        return Err(Error::BadRange(format!(
            "split-ratio family spans n in [{lo}, {hi}], less than a decade"
        )));
    }
    let min_ratio = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let trend = fit_power_law(&ratios, None, (lo, hi), FitModel::PurePower)?;
    Ok(SplitRatioReport {
        pass: min_ratio > 0.0 && trend.exponent >= SPLIT_RATIO_MAX_DECAY,
        ratios,
        min_ratio,
        trend,
        max_decay_slope: SPLIT_RATIO_MAX_DECAY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryPoint;
    use crate::vec2::Vec2;

    fn rec(tau: f64, curvature: f64, phi: f64) -> CollisionRecord {
        CollisionRecord {
            phase: PhasePoint::new(0.0, phi),
            point: BoundaryPoint {
                r: 0.0,
                position: Vec2::new(0.0, 0.0),
                unit_tangent: Vec2::new(1.0, 0.0),
                unit_inward_normal: Vec2::new(0.0, 1.0),
                curvature,
                component_id: 0,
            },
            tau,
            in_window: true,
        }
    }

    #[test]
    fn front_update_values() {
        let b = front_update(0.2, 1.0, 2.0, 1.0).unwrap();
        assert!((b - (0.4 + 1.0 / 3.0)).abs() < 1e-15);
        assert!((front_update(0.0, 1.0, 2.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            front_update(0.1, 0.0, 1.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn single_factor() {
        let b = expansion_product(&[rec(2.0, 0.0, 0.0)], 1.0, 0).unwrap();
        assert!((b.lambda_total() - 3.0).abs() < 1e-14);
        assert_eq!(b.log_lambda_1, 0.0);
    }

    #[test]
    fn split_multiplies_to_total() {
        let records: Vec<_> = (0..20)
            .map(|m| rec(2.0 + 0.01 * m as f64, 0.05 * (m % 3) as f64, 0.1))
            .collect();
        let b = expansion_product(&records, 0.7, 8).unwrap();
        let rel = (b.lambda_1() * b.lambda_2() / b.lambda_total() - 1.0).abs();
        assert!(rel < 1e-10);
        assert!(b.lambda_1() >= 1.0 && b.lambda_2() >= 1.0);
    }

    #[test]
    fn pure_flight_dilutes_front() {
        // Flat walls: B_m = 1/(Σ τ + 1/B_0), so the product telescopes to
        // 1 + B_0 Σ τ.
        let records: Vec<_> = (0..50).map(|_| rec(2.0, 0.0, 0.0)).collect();
        let fronts = front_sequence(&records, 1.0).unwrap();
        assert!((fronts[49] - 1.0 / 99.0).abs() < 1e-14);
        let b = expansion_product(&records, 1.0, 25).unwrap();
        assert!((b.lambda_total() - 101.0).abs() < 1e-9);
    }

    #[test]
    fn slope_and_pnorm() {
        assert_eq!(unstable_slope(1.0, 0.0, 1.0), 1.0);
        assert_eq!(pnorm_ratio(PhasePoint::new(0.0, 0.0), 0.0), 1.0);
        let v = pnorm_ratio(PhasePoint::new(0.0, std::f64::consts::FRAC_PI_3), 1.0);
        assert!((v - 0.5 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn split_ratio_flat_family_passes() {
        let family: Vec<_> = (20..=500)
            .step_by(20)
            .map(|n| {
                let l1 = 2.5 * (n as f64).ln();
                ExpansionBreakdown {
                    n,
                    n_prime: n / 2,
                    log_lambda_1: l1,
                    log_lambda_2: l1 - (n as f64).ln() + 0.3,
                    log_lambda_total: 2.0 * l1,
                }
            })
            .collect();
        let report = split_ratio_check(&family).unwrap();
        assert!(report.pass);
        assert!(report.trend.exponent.abs() < 1e-10);
    }
}
