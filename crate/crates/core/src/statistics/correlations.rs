//! Time correlations `C_n(f, g) = ∫ (f∘Fⁿ) g dμ − ∫f dμ ∫g dμ` estimated
//! from an ensemble of independent orbits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::billiard::{Billiard, Collision};
use crate::error::{Error, Result};
use crate::parallel::{stream_rng, Exec};
use crate::statistics::fit::{fit_power_law, DecayFit, FitModel};

pub const DEFAULT_BURN_IN: usize = 10_000;
pub const DEFAULT_CHUNKS: usize = 64;
pub const DEFAULT_MAX_LAG: usize = 40;
/// Noise multiple used by the envelope and mixing checks.
pub const NOISE_SIGMAS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    FreePath,
    CosPhi,
    WindowIndicator,
    XCoordinate,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::FreePath,
        Observable::CosPhi,
        Observable::WindowIndicator,
        Observable::XCoordinate,
    ];

    fn eval(self, billiard: &Billiard, c: &Collision, tau: f64) -> f64 {
        match self {
            Observable::FreePath => tau,
            Observable::CosPhi => c.cos_phi(),
            Observable::WindowIndicator => billiard.in_window(c) as u8 as f64,
            Observable::XCoordinate => c.position.x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::FreePath => "free_path",
            Observable::CosPhi => "cos_phi",
            Observable::WindowIndicator => "window_indicator",
            Observable::XCoordinate => "x_coordinate",
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown observable {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct CorrelationConfig {
    pub orbit_length: u64,
    pub f: Observable,
    pub g: Observable,
    pub max_lag: usize,
    pub seed: u64,
    pub chunks: usize,
    pub burn_in: usize,
}

impl CorrelationConfig {
    pub fn new(orbit_length: u64, f: Observable, g: Observable, seed: u64) -> Self {
        CorrelationConfig {
            orbit_length,
            f,
            g,
            max_lag: DEFAULT_MAX_LAG,
            seed,
            chunks: DEFAULT_CHUNKS,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrelationSeries {
    pub observable_f: Observable,
    pub observable_g: Observable,
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    /// Collisions used after burn-in.
    pub sample_count: u64,
    /// Batch means over the independent orbits.
    pub standard_errors: Vec<f64>,
    pub restarts: u64,
}

#[derive(Default)]
struct ChunkSums {
    fg: Vec<f64>,
    pairs: Vec<u64>,
    f: f64,
    g: f64,
    count: u64,
    restarts: u64,
}

impl ChunkSums {
    fn estimate(&self) -> Vec<f64> {
        let mf = self.f / self.count as f64;
        let mg = self.g / self.count as f64;
        self.fg
            .iter()
            .zip(&self.pairs)
            .map(|(s, &p)| s / p as f64 - mf * mg)
            .collect()
    }
}

fn run_chunk(billiard: &Billiard, cfg: &CorrelationConfig, index: usize, length: u64) -> ChunkSums {
    let lags = cfg.max_lag + 1;
    let mut rng = stream_rng(cfg.seed, index as u64);
    let mut sums = ChunkSums {
        fg: vec![0.0; lags],
        pairs: vec![0; lags],
        ..Default::default()
    };
    // Ring buffer of g over the current unbroken stretch.
    let mut ring = vec![0.0; lags];
    let mut stretch = 0usize;
    let mut cur = billiard.sample_collision(&mut rng);
    let mut burn = cfg.burn_in;
    while sums.count < length {
        let (next, tau) = match billiard.advance(&cur) {
            Ok(v) => v,
            Err(_) => {
                sums.restarts += 1;
                cur = billiard.sample_collision(&mut rng);
                stretch = 0;
                continue;
            }
        };
        if burn > 0 {
            burn -= 1;
            cur = next;
            continue;
        }
        let fv = cfg.f.eval(billiard, &cur, tau);
        let gv = cfg.g.eval(billiard, &cur, tau);
        ring[stretch % lags] = gv;
        for n in 0..lags.min(stretch + 1) {
            sums.fg[n] += fv * ring[(stretch - n) % lags];
            sums.pairs[n] += 1;
        }
        sums.f += fv;
        sums.g += gv;
        sums.count += 1;
        stretch += 1;
        cur = next;
    }
    sums
}

pub fn correlations(
    billiard: &Billiard,
    cfg: &CorrelationConfig,
    exec: Exec,
) -> Result<CorrelationSeries> {
    if cfg.chunks < 2 {
        return Err(Error::InvalidParams(
            "need at least two independent orbits".into(),
        ));
    }
    let per = cfg.orbit_length / cfg.chunks as u64;
    if per <= cfg.max_lag as u64 {
        return Err(Error::InvalidParams(format!(
            "orbit length {} too short for {} chunks and lag {}",
            cfg.orbit_length, cfg.chunks, cfg.max_lag
        )));
    }
    let chunks = exec.map_indices(cfg.chunks, |i| run_chunk(billiard, cfg, i, per));
    let estimates: Vec<Vec<f64>> = chunks.iter().map(ChunkSums::estimate).collect();
    let k = estimates.len() as f64;
    let lags: Vec<usize> = (0..=cfg.max_lag).collect();
    let mut values = Vec::with_capacity(lags.len());
    let mut standard_errors = Vec::with_capacity(lags.len());
    for n in 0..lags.len() {
        let mean = estimates.iter().map(|e| e[n]).sum::<f64>() / k;
        let var = estimates.iter().map(|e| (e[n] - mean).powi(2)).sum::<f64>() / (k - 1.0);
        values.push(mean);
        standard_errors.push((var / k).sqrt());
    }
    Ok(CorrelationSeries {
        observable_f: cfg.f,
        observable_g: cfg.g,
        lags,
        values,
        sample_count: chunks.iter().map(|c| c.count).sum(),
        standard_errors,
        restarts: chunks.iter().map(|c| c.restarts).sum(),
    })
}

/// `(ln n)^{a+1} / n^a`.
pub fn envelope(a: f64, n: f64) -> f64 {
    n.ln().powf(a + 1.0) / n.powf(a)
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub a: f64,
    /// Smallest constant covering `|C_n|` on the calibration lags.
    pub constant: f64,
    pub calibration: (usize, usize),
    pub checked: (usize, usize),
    /// Lags where `|C_n|` exceeds the envelope by more than the noise.
    pub violations: Vec<usize>,
    pub pass: bool,
}

/// Calibrates `c` on `calibration` and checks `|C_n| ≤ c·env(n) + 3σ_n` on
/// `checked`. The envelope vanishes at `n = 1`, so both ranges start at 2.
pub fn envelope_check(
    series: &CorrelationSeries,
    a: f64,
    calibration: (usize, usize),
    checked: (usize, usize),
) -> Result<EnvelopeReport> {
    if calibration.0 < 2 || checked.0 < 2 || checked.1 >= series.values.len() {
        return Err(Error::BadRange(format!(
            "envelope ranges {calibration:?}, {checked:?} outside 2..{}",
            series.values.len()
        )));
    }
    let constant = (calibration.0..=calibration.1)
        .map(|n| series.values[n].abs() / envelope(a, n as f64))
        .fold(0.0, f64::max);
    let violations: Vec<usize> = (checked.0..=checked.1)
        .filter(|&n| {
            series.values[n].abs()
                > constant * envelope(a, n as f64) + NOISE_SIGMAS * series.standard_errors[n]
        })
        .collect();
    Ok(EnvelopeReport {
        a,
        constant,
        calibration,
        checked,
        pass: violations.is_empty(),
        violations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingReport {
    pub c0: f64,
    pub fraction: f64,
    pub lags: (usize, usize),
    /// Largest `(|C_n| − 3σ_n) / C_0` over the lags.
    pub worst: f64,
    pub pass: bool,
}

/// `|C_n|` below `fraction · C_0` up to noise on the given lags.
pub fn mixing_check(
    series: &CorrelationSeries,
    fraction: f64,
    lags: (usize, usize),
) -> Result<MixingReport> {
    if lags.1 >= series.values.len() || lags.0 > lags.1 {
        return Err(Error::BadRange(format!("mixing lags {lags:?}")));
    }
    let c0 = series.values[0];
    if !(c0 > 0.0) {
        return Err(Error::NonPositiveValues { n: 0.0, value: c0 });
    }
    let worst = (lags.0..=lags.1)
        .map(|n| (series.values[n].abs() - NOISE_SIGMAS * series.standard_errors[n]) / c0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MixingReport {
        c0,
        fraction,
        lags,
        worst,
        pass: worst < fraction,
    })
}

/// Log-corrected fit of `|C_n|` over lags where the signal clears the
/// noise. Reported only; the exponent is not resolvable at this scale.
pub fn correlation_decay_fit(
    series: &CorrelationSeries,
    range: (usize, usize),
) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = (range.0.max(2)..=range.1.min(series.values.len() - 1))
        .filter(|&n| series.values[n].abs() > NOISE_SIGMAS * series.standard_errors[n])
        .map(|n| (n as f64, series.values[n].abs()))
        .collect();
    fit_power_law(
        &pts,
        None,
        (range.0 as f64, range.1 as f64),
        FitModel::PowerWithLog,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::billiard::WindowSpec;
    use crate::geometry::{build_table, FlatFamilyParams};

    fn billiard(beta: f64) -> Billiard {
        let table = build_table(FlatFamilyParams::new(beta)).unwrap();
        let window = WindowSpec::new(&table, 0.5).unwrap();
        Billiard::new(table, window)
    }

    fn small(f: Observable, g: Observable) -> CorrelationConfig {
        CorrelationConfig {
            chunks: 8,
            burn_in: 100,
            max_lag: 10,
            ..CorrelationConfig::new(80_000, f, g, 5)
        }
    }

    #[test]
    fn variance_is_nonnegative() {
        let b = billiard(6.0);
        for o in Observable::ALL {
            let s = correlations(&b, &small(o, o), Exec::Sequential).unwrap();
            assert!(s.values[0] >= 0.0, "{o}: {}", s.values[0]);
            assert_eq!(s.lags.len(), 11);
            assert_eq!(s.sample_count, 80_000);
        }
    }

    #[test]
    fn decorrelates() {
        let b = billiard(6.0);
        let s = correlations(
            &b,
            &small(Observable::CosPhi, Observable::CosPhi),
            Exec::Sequential,
        )
        .unwrap();
        assert!(s.values[10].abs() < 0.2 * s.values[0] + 3.0 * s.standard_errors[10]);
    }

    #[test]
    fn deterministic_across_modes() {
        let b = billiard(4.0);
        let cfg = small(Observable::FreePath, Observable::XCoordinate);
        let a = correlations(&b, &cfg, Exec::Sequential).unwrap();
        let p = correlations(&b, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a.values, p.values);
        assert_eq!(a.standard_errors, p.standard_errors);
    }

    #[test]
    fn observable_names_round_trip() {
        for o in Observable::ALL {
            assert_eq!(o.name().parse::<Observable>().unwrap(), o);
        }
        assert!("speed".parse::<Observable>().is_err());
    }

    #[test]
    fn envelope_and_mixing_on_synthetic_series() {
        let a = 2.0;
        let values: Vec<f64> = (0..=40)
            .map(|n| {
                if n == 0 {
                    1.0
                } else {
                    0.3 * envelope(a, n as f64)
                }
            })
            .collect();
        let series = CorrelationSeries {
            observable_f: Observable::FreePath,
            observable_g: Observable::FreePath,
            lags: (0..=40).collect(),
            values,
            sample_count: 1,
            standard_errors: vec![1e-6; 41],
            restarts: 0,
        };
        let env = envelope_check(&series, a, (2, 10), (2, 30)).unwrap();
        assert!(env.pass && (env.constant - 0.3).abs() < 1e-12);
        assert!(mixing_check(&series, 0.1, (30, 40)).unwrap().pass);
        let fit = correlation_decay_fit(&series, (2, 30)).unwrap();
        assert!((fit.exponent + a).abs() < 1e-9);
        assert!(envelope_check(&series, a, (1, 10), (2, 30)).is_err());
    }
}
