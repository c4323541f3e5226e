//! One-step expansion sum `Σ 1/Λ_i` over the singularity cells.

use serde::Serialize;

use crate::statistics::cells::{CellRecord, CellType};
use crate::statistics::fit::{fit_power_law, FitModel};

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionSum {
    pub n_delta: usize,
    /// Sum over located cells with `n ≥ n_delta`.
    pub measured: f64,
    /// Bound for the cells beyond the last located one.
    pub tail: f64,
    pub total: f64,
    pub cells: usize,
    /// Fitted growth exponents of `Λ_n` used for the tail, per cell type.
    pub growth: Vec<(CellType, f64)>,
    pub holds: bool,
}

/// `Σ 1/λ_min` over both cell types for `n ≥ n_delta`, plus
/// `Σ_{n > n_last} C n^{-b} ≤ C n_last^{1-b}/(b-1)` from a power fit of
/// `λ_min` against `n` for each type.
pub fn expansion_sum(cells: &[CellRecord], n_delta: usize) -> ExpansionSum {
    let used: Vec<&CellRecord> = cells.iter().filter(|c| c.n >= n_delta).collect();
    let measured: f64 = used.iter().map(|c| 1.0 / c.lambda_min).sum();
    let mut tail = 0.0;
    let mut growth = Vec::new();
    for t in [CellType::Prime, CellType::Dprime] {
        let series: Vec<(f64, f64)> = used
            .iter()
            .filter(|c| c.cell_type == t)
            .map(|c| (c.n as f64, c.lambda_min))
            .collect();
        let Some(n_last) = series.iter().map(|p| p.0).reduce(f64::max) else {
            continue;
        };
        let n_first = series.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        match fit_power_law(&series, None, (n_first, n_last), FitModel::PurePower) {
            Ok(fit) if fit.exponent > 1.0 => {
                let c = fit.intercept.exp();
                tail += n_last.powf(1.0 - fit.exponent) / (c * (fit.exponent - 1.0));
                growth.push((t, fit.exponent));
            }
            // Without a summable fit the tail is unbounded.
            _ => tail = f64::INFINITY,
        }
    }
    let total = measured + tail;
    ExpansionSum {
        n_delta,
        measured,
        tail,
        total,
        cells: used.len(),
        growth,
        holds: total < 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolicity::ExpansionBreakdown;

    fn cells(b: f64, scale: f64) -> Vec<CellRecord> {
        let mut out = Vec::new();
        for t in [CellType::Prime, CellType::Dprime] {
            for n in 2..=100 {
                let lambda = scale * (n as f64).powf(b);
                out.push(CellRecord {
                    n,
                    cell_type: t,
                    phi_lower: 0.0,
                    phi_upper: 1.0 / lambda,
                    height: 1.0 / lambda,
                    lambda_min: lambda,
                    log_lambda_min: lambda.ln(),
                    breakdown: ExpansionBreakdown {
                        n,
                        n_prime: n / 2,
                        log_lambda_1: 0.5 * lambda.ln(),
                        log_lambda_2: 0.5 * lambda.ln(),
                        log_lambda_total: lambda.ln(),
                    },
                });
            }
        }
        out
    }

    #[test]
    fn decreases_with_n_delta() {
        let cs = cells(3.0, 0.5);
        let sums: Vec<f64> = [2, 5, 10, 20, 40]
            .iter()
            .map(|&n| expansion_sum(&cs, n).total)
            .collect();
        assert!(sums.windows(2).all(|w| w[1] < w[0]), "{sums:?}");
        assert!(expansion_sum(&cs, 40).holds);
    }

    #[test]
    fn tail_bounds_the_missing_terms() {
        let cs = cells(4.0, 1.0);
        let s = expansion_sum(&cs, 10);
        let exact_tail: f64 = (101..200_000).map(|n| 2.0 / (n as f64).powi(4)).sum();
        assert!(
            s.tail >= exact_tail && s.tail < 1.1 * exact_tail,
            "{} vs {exact_tail}",
            s.tail
        );
        assert_eq!(s.cells, 182);
    }

    #[test]
    fn slow_growth_is_not_summable() {
        let cs = cells(0.8, 1.0);
        assert!(!expansion_sum(&cs, 10).holds);
    }
}
