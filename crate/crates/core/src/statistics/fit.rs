//! Weighted least-squares power-law fits on log-log data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_FIT_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `y = c n^e`.
    PurePower,
    /// `y = c (ln n)^{a+1} / n^a`, reported with `exponent = -a`.
    PowerWithLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub fit_range: (f64, f64),
    pub r_squared: f64,
    pub stderr: f64,
    pub model: FitModel,
    pub points: usize,
}

impl DecayFit {
    /// Fitted curve at `n`.
    pub fn predict(&self, n: f64) -> f64 {
        match self.model {
            FitModel::PurePower => (self.intercept + self.exponent * n.ln()).exp(),
            FitModel::PowerWithLog => {
                let a = -self.exponent;
                (self.intercept + (a + 1.0) * n.ln().ln() - a * n.ln()).exp()
            }
        }
    }
}

/// Straight-line WLS. Returns (slope, intercept, slope stderr, r²).
pub(crate) fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64, f64, f64) {
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
        syy += w * (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let stderr = (ss_res / dof / sxx).sqrt();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, stderr, r_squared)
}

/// Fits `series` restricted to `range` (inclusive). `stderrs`, when given,
/// are absolute standard errors of `y` and set weights `(y/σ)²`.
/// Inverse-variance mean of several fits' exponents and its stderr.
pub fn pooled_exponent(fits: &[&DecayFit]) -> (f64, f64) {
    let w: Vec<f64> = fits
        .iter()
        .map(|f| 1.0 / f.stderr.powi(2).max(1e-300))
        .collect();
    let sw: f64 = w.iter().sum();
    let mean = fits
        .iter()
        .zip(&w)
        .map(|(f, w)| f.exponent * w)
        .sum::<f64>()
        / sw;
    (mean, (1.0 / sw).sqrt())
}

pub fn fit_power_law(
    series: &[(f64, f64)],
    stderrs: Option<&[f64]>,
    range: (f64, f64),
    model: FitModel,
) -> Result<DecayFit> {
    let (lo, hi) = range;
    if !(lo < hi) {
        return Err(Error::BadRange(format!("empty fit range [{lo}, {hi}]")));
    }
    if let Some(se) = stderrs {
        if se.len() != series.len() {
            return Err(Error::BadRange("stderr length differs from series".into()));
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (i, &(n, y)) in series.iter().enumerate() {
        if n < lo || n > hi {
            continue;
        }
        if !(y > 0.0) {
            return Err(Error::NonPositiveValues { n, value: y });
        }
        if model == FitModel::PowerWithLog && !(n > 1.0) {
            return Err(Error::BadRange(format!(
                "log-corrected model needs n > 1, got {n}"
            )));
        }
        let w = match stderrs {
            Some(se) if se[i] > 0.0 => (y / se[i]).powi(2),
            _ => 1.0,
        };
        let (x, target) = match model {
            FitModel::PurePower => (n.ln(), y.ln()),
            FitModel::PowerWithLog => {
                let ll = n.ln().ln();
                (ll - n.ln(), y.ln() - ll)
            }
        };
        xs.push(x);
        ys.push(target);
        ws.push(w);
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::BadRange(format!(
            "{} points in [{lo}, {hi}], need {MIN_FIT_POINTS}",
            xs.len()
        )));
    }
    let (slope, intercept, stderr, r_squared) = weighted_line(&xs, &ys, &ws);
    let exponent = match model {
        FitModel::PurePower => slope,
        FitModel::PowerWithLog => -slope,
    };
    Ok(DecayFit {
        exponent,
        intercept,
        fit_range: range,
        r_squared,
        stderr,
        model,
        points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, lo: usize, hi: usize) -> Vec<(f64, f64)> {
        (lo..=hi).map(|n| (n as f64, f(n as f64))).collect()
    }

    #[test]
    fn exact_power_law() {
        let s = series(|n| n.powi(-3), 2, 200);
        let fit = fit_power_law(&s, None, (2.0, 200.0), FitModel::PurePower).unwrap();
        assert!((fit.exponent + 3.0).abs() < 1e-12);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn log_corrected_model_recovers_exponent() {
        let s = series(|n| n.ln().powi(4) / n.powi(3), 10, 100);
        let pure = fit_power_law(&s, None, (10.0, 100.0), FitModel::PurePower).unwrap();
        assert!(pure.exponent > -3.0);
        let logged = fit_power_law(&s, None, (10.0, 100.0), FitModel::PowerWithLog).unwrap();
        assert!((logged.exponent + 3.0).abs() < 0.05);
        assert!((logged.predict(20.0) / s[10].1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sub_range_is_stable() {
        // Mild multiplicative wobble on an exact law.
        let s = series(
            |n| 2.0 * n.powf(-2.5) * (1.0 + 0.01 * (n * 1.7).sin()),
            10,
            1000,
        );
        let full = fit_power_law(&s, None, (10.0, 1000.0), FitModel::PurePower).unwrap();
        let sub = fit_power_law(&s, None, (30.0, 600.0), FitModel::PurePower).unwrap();
        assert!((full.exponent - sub.exponent).abs() < full.stderr.max(sub.stderr) * 3.0);
        assert!((full.exponent + 2.5).abs() < 0.01);
    }

    #[test]
    fn errors() {
        let s = series(|n| 1.0 / n, 1, 5);
        assert!(matches!(
            fit_power_law(&s, None, (1.0, 5.0), FitModel::PurePower),
            Err(Error::BadRange(_))
        ));
        let mut s = series(|n| 1.0 / n, 1, 20);
        s[4].1 = 0.0;
        assert!(matches!(
            fit_power_law(&s, None, (1.0, 20.0), FitModel::PurePower),
            Err(Error::NonPositiveValues { .. })
        ));
        assert!(matches!(
            fit_power_law(&s, None, (5.0, 5.0), FitModel::PurePower),
            Err(Error::BadRange(_))
        ));
    }

    #[test]
    fn pooled_favours_precise_fits() {
        let fit = |exponent, stderr| DecayFit {
            exponent,
            stderr,
            intercept: 0.0,
            fit_range: (1.0, 10.0),
            r_squared: 1.0,
            model: FitModel::PurePower,
            points: 10,
        };
        let (a, b) = (fit(-4.0, 0.01), fit(-3.0, 1.0));
        let (m, se) = pooled_exponent(&[&a, &b]);
        assert!((m + 4.0).abs() < 1e-3, "{m}");
        assert!(se < 0.01);
    }
}
