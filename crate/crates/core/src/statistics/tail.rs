//! Monte Carlo tail of the return time to the region outside the window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::billiard::{Billiard, ReturnTime};
use crate::error::{Error, Result};
use crate::parallel::{batch_sizes, stream_rng, Exec};
use crate::statistics::fit::{fit_power_law, DecayFit, FitModel};

pub const DEFAULT_TAIL_BATCH: u64 = 1 << 16;
pub const JACKKNIFE_GROUPS: usize = 16;
pub const MIN_TAIL_EVENTS: u64 = 100;
pub const MIN_TAIL_R2: f64 = 0.98;
/// Fit points per octave of `n`.
const POINTS_PER_OCTAVE: f64 = 8.0;

#[derive(Clone, Debug)]
pub struct ReturnTailConfig {
    pub samples: u64,
    pub n_max: usize,
    pub seed: u64,
    pub batch: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TailHistogram {
    /// Return time to count; censored samples are kept apart.
    pub counts: BTreeMap<usize, u64>,
    pub samples: u64,
    pub censored: u64,
    pub grazes: u64,
}

impl TailHistogram {
    fn merge(&mut self, other: &TailHistogram) {
        for (&n, &c) in &other.counts {
            *self.counts.entry(n).or_default() += c;
        }
        self.samples += other.samples;
        self.censored += other.censored;
        self.grazes += other.grazes;
    }

    /// Samples with a defined return time (grazes excluded).
    pub fn valid(&self) -> u64 {
        self.samples - self.grazes
    }

    /// Number of samples with `R > n`; censored ones count for every `n`
    /// below the step limit.
    pub fn exceeding(&self, n: usize) -> u64 {
        self.counts.range(n + 1..).map(|(_, c)| c).sum::<u64>() + self.censored
    }

    pub fn survival(&self, n: usize) -> f64 {
        self.exceeding(n) as f64 / self.valid() as f64
    }

    /// `(n, P(R > n))` for every `n` up to the largest observed return.
    pub fn survival_series(&self) -> Vec<(usize, f64)> {
        let top = self.counts.keys().next_back().copied().unwrap_or(0);
        let valid = self.valid() as f64;
        let mut above = self.exceeding(0);
        let mut out = Vec::with_capacity(top);
        for n in 1..=top {
            above -= self.counts.get(&n).copied().unwrap_or(0);
            out.push((n, above as f64 / valid));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReturnTail {
    pub histogram: TailHistogram,
    /// Power law in `n + 1/2`; `fit_range` is the window in `n`.
    pub fit: DecayFit,
    /// Weighted least-squares stderr; `fit.stderr` holds the jackknife one.
    pub wls_stderr: f64,
    pub tail_events: u64,
}

fn run_batch(billiard: &Billiard, seed: u64, index: u64, size: u64, n_max: usize) -> TailHistogram {
    let mut rng = stream_rng(seed, index);
    let mut h = TailHistogram {
        samples: size,
        ..Default::default()
    };
    for _ in 0..size {
        let c = billiard.sample_outside_window(&mut rng);
        match billiard.return_time_from(&c, n_max) {
            Ok(ReturnTime::Returned(n)) => *h.counts.entry(n).or_default() += 1,
            Ok(ReturnTime::Censored(_)) => h.censored += 1,
            Err(_) => h.grazes += 1,
        }
    }
    h
}

/// Histograms per jackknife group. Group `g` holds the batches with index
/// `≡ g mod JACKKNIFE_GROUPS`.
pub fn tail_histograms(
    billiard: &Billiard,
    cfg: &ReturnTailConfig,
    exec: Exec,
) -> Vec<TailHistogram> {
    let sizes = batch_sizes(cfg.samples, cfg.batch.max(1));
    let batches = exec.map_indices(sizes.len(), |i| {
        run_batch(billiard, cfg.seed, i as u64, sizes[i], cfg.n_max)
    });
    let mut groups = vec![TailHistogram::default(); JACKKNIFE_GROUPS];
    for (i, b) in batches.iter().enumerate() {
        groups[i % JACKKNIFE_GROUPS].merge(b);
    }
    groups
}

fn fit_points(n_lo: usize, n_hi: usize) -> Vec<usize> {
    let octaves = (n_hi as f64 / n_lo as f64).log2();
    let steps = (octaves * POINTS_PER_OCTAVE).round() as usize;
    let mut pts: Vec<usize> = (0..=steps)
        .map(|k| (n_lo as f64 * 2f64.powf(k as f64 / POINTS_PER_OCTAVE)).round() as usize)
        .map(|n| n.min(n_hi))
        .collect();
    pts.push(n_hi);
    pts.dedup();
    pts
}

fn fit_survival(h: &TailHistogram, points: &[usize], range: (usize, usize)) -> Result<DecayFit> {
    let valid = h.valid() as f64;
    // P(R > n) sums the point masses at n+1, n+2, ...; the matching
    // continuous tail is evaluated at n + 1/2.
    let series: Vec<(f64, f64)> = points
        .iter()
        .map(|&n| (n as f64 + 0.5, h.survival(n)))
        .collect();
    let se: Vec<f64> = series
        .iter()
        .map(|&(_, s)| (s * (1.0 - s) / valid).sqrt())
        .collect();
    fit_power_law(
        &series,
        Some(&se),
        (range.0 as f64 + 0.5, range.1 as f64 + 0.5),
        FitModel::PurePower,
    )
}

/// Fit window: the largest decade `[n_hi/10, n_hi]` with at least
/// `MIN_TAIL_EVENTS` returns beyond `n_hi`, sampled at dyadic fractions.
/// `n_hi` is halved while the fit has `r² < MIN_TAIL_R2`.
pub fn fit_tail(groups: &[TailHistogram]) -> Result<ReturnTail> {
    let mut total = TailHistogram::default();
    for g in groups {
        total.merge(g);
    }
    // Walk down from the largest return until enough events lie beyond.
    let mut beyond = total.censored;
    let mut n_hi = 0;
    for (&n, &c) in total.counts.iter().rev() {
        if beyond >= MIN_TAIL_EVENTS {
            n_hi = n;
            break;
        }
        beyond += c;
    }
    loop {
        // The shortest window is [1, 10]; it needs the events beyond 10.
        if n_hi < 10 {
            return Err(Error::InsufficientTail {
                events: total.exceeding(10),
                n_lo: 10,
                required: MIN_TAIL_EVENTS,
            });
        }
        let n_lo = n_hi / 10;
        let events = total.exceeding(n_lo);
        let points = fit_points(n_lo, n_hi);
        let fit = fit_survival(&total, &points, (n_lo, n_hi))?;
        if fit.r_squared < MIN_TAIL_R2 && n_hi / 2 >= 10 {
            n_hi /= 2;
            continue;
        }
        let jack: Vec<f64> = (0..groups.len())
            .map(|g| {
                let mut rest = TailHistogram::default();
                for (k, h) in groups.iter().enumerate() {
                    if k != g {
                        rest.merge(h);
                    }
                }
                fit_survival(&rest, &points, (n_lo, n_hi)).map(|f| f.exponent)
            })
            .collect::<Result<_>>()?;
        let g = jack.len() as f64;
        let mean = jack.iter().sum::<f64>() / g;
        let var = jack.iter().map(|e| (e - mean).powi(2)).sum::<f64>() * (g - 1.0) / g;
        let wls_stderr = fit.stderr;
        return Ok(ReturnTail {
            fit: DecayFit {
                stderr: var.sqrt(),
                fit_range: (n_lo as f64, n_hi as f64),
                ..fit
            },
            wls_stderr,
            tail_events: events,
            histogram: total,
        });
    }
}

pub fn return_tail(billiard: &Billiard, cfg: &ReturnTailConfig, exec: Exec) -> Result<ReturnTail> {
    if cfg.samples == 0 || cfg.n_max == 0 {
        return Err(Error::InvalidParams(
            "samples and n_max must be positive".into(),
        ));
    }
    fit_tail(&tail_histograms(billiard, cfg, exec))
}
