//! The acceptance suite: nine pass/fail checks with pinned tolerances.
//!
//! Each check records what it measured next to the target so a failing run
//! still says by how much it missed.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::billiard::{Billiard, PhasePoint, WindowSpec, DEFAULT_EPSILON, DEFAULT_N_MAX};
use crate::corridor;
use crate::error::{Error, Result};
use crate::exponents;
use crate::geometry::{build_table, FlatFamilyParams};
use crate::hyperbolicity::{split_ratio_check, DEFAULT_FRONT_CURVATURE};
use crate::parallel::{stream_rng, Exec};
use crate::statistics::cells::{
    cell_expansions, cell_mass_survival, locate_cells, CellScan, CellScanConfig, CellType,
    DEFAULT_BORDER_TOLERANCE, DEFAULT_PHI_GRID,
};
use crate::statistics::correlations::{
    correlations, envelope_check, mixing_check, CorrelationConfig, Observable,
};
use crate::statistics::expansion::expansion_sum;
use crate::statistics::fit::{pooled_exponent, DecayFit};
use crate::statistics::tail::{return_tail, ReturnTail, ReturnTailConfig, DEFAULT_TAIL_BATCH};

pub const INVERSE_TOL: f64 = 1e-9;
pub const REFLECTION_TOL: f64 = 1e-10;
pub const PERIOD_TWO_TOL: f64 = 1e-12;
pub const INVARIANCE_SIGMAS: f64 = 3.0;
pub const DIFFERENCE_RATIO_RANGE: (f64, f64) = (1.0, 5.0);
/// Tail increment of `Z_m` relative to `(β - 2)√2`.
pub const Z_INCREMENT_RANGE: (f64, f64) = (0.5, 1.05);
pub const EQUIVALENCE_TOL: f64 = 1e-9;
pub const EQUIVALENCE_STEPS: usize = 50;
pub const SCALING_RANGE: (usize, usize) = (10, 100);
pub const SLOPE_TOL: f64 = 0.4;
pub const MAX_LAMBDA_HEIGHT_SPREAD: f64 = 10.0;
pub const B0_SWEEP: [f64; 2] = [0.1, 10.0];
pub const B0_SLOPE_TOL: f64 = 0.1;
pub const TAIL_TOL: f64 = 0.3;
pub const MIN_TAIL_SAMPLES: u64 = 100_000_000;
pub const CELL_MASS_FACTOR: f64 = 2.0;
pub const CELL_MASS_RANGE: (usize, usize) = (10, 50);
pub const CROSSING_REL_TOL: f64 = 0.1;
pub const CROSSING_RANGE: (usize, usize) = (20, 2000);
pub const EXPANSION_N_DELTA: usize = 10;
pub const MIXING_FRACTION: f64 = 0.1;
pub const MIXING_LAGS: (usize, usize) = (30, 40);
pub const ENVELOPE_CALIBRATION: (usize, usize) = (2, 10);
pub const ENVELOPE_CHECKED: (usize, usize) = (2, 30);
/// Launch abscissa and relative offsets above the separatrix for the
/// corridor checks.
pub const CORRIDOR_X0: f64 = 0.5;
pub const CORRIDOR_OFFSETS: [f64; 4] = [1e-6, 1e-10, 1e-12, 1e-14];
/// Offsets at or below this feed the Z increment check.
pub const Z_INCREMENT_MAX_OFFSET: f64 = 1e-14;

#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    pub beta: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub corridor_betas: Vec<f64>,
    pub expansion_betas: Vec<f64>,
    pub map_samples: usize,
    pub invariance_samples: usize,
    pub tail_samples: u64,
    pub tail_n_max: usize,
    pub correlation_length: u64,
    pub cell_limit: usize,
    pub mass_lines: usize,
}

impl VerifyConfig {
    /// The full suite at its stated sample sizes.
    pub fn acceptance() -> Self {
        VerifyConfig {
            beta: 6.0,
            epsilon: DEFAULT_EPSILON,
            seed: 1,
            corridor_betas: vec![3.0, 4.0, 6.0],
            expansion_betas: vec![4.0, 6.0],
            map_samples: 10_000,
            invariance_samples: 1_000_000,
            tail_samples: MIN_TAIL_SAMPLES,
            tail_n_max: DEFAULT_N_MAX,
            correlation_length: 10_000_000,
            cell_limit: 130,
            mass_lines: 512,
        }
    }

    /// The suite with the single-`β` checks run at `beta`; the corridor and
    /// expansion-sum checks keep their fixed families.
    pub fn for_beta(beta: f64) -> Self {
        VerifyConfig {
            beta,
            ..Self::acceptance()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub target: String,
    pub measured: BTreeMap<String, f64>,
    pub note: Option<String>,
}

impl CriterionResult {
    fn new(id: u8, name: &'static str, target: String) -> Self {
        CriterionResult {
            id,
            name,
            pass: true,
            target,
            measured: BTreeMap::new(),
            note: None,
        }
    }

    fn set(&mut self, key: impl Into<String>, value: f64) {
        self.measured.insert(key.into(), value);
    }

    fn require(&mut self, ok: bool, why: impl Into<String>) {
        if !ok {
            self.pass = false;
            let why = why.into();
            self.note = Some(match self.note.take() {
                Some(n) => format!("{n}; {why}"),
                None => why,
            });
        }
    }

    fn failed(mut self, e: &Error) -> Self {
        self.require(false, e.to_string());
        self
    }

    /// One line: `criterion N name: PASS|FAIL (note)`.
    pub fn summary_line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!("criterion {} {}: {verdict}", self.id, self.name);
        for (k, v) in &self.measured {
            s.push_str(&format!(" {k}={}", short(*v)));
        }
        if let Some(n) = &self.note {
            s.push_str(&format!(" [{n}]"));
        }
        s
    }
}

/// Six significant digits, switching to scientific notation for small or
/// large magnitudes.
fn short(v: f64) -> String {
    let m = v.abs();
    if v.fract() == 0.0 && m < 1e15 {
        format!("{v:.0}")
    } else if !v.is_finite() || (1e-3..1e6).contains(&m) {
        let digits = if m >= 1.0 {
            5usize.saturating_sub(m.log10() as usize)
        } else {
            6
        };
        format!("{v:.digits$}")
    } else {
        format!("{v:.5e}")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Exponents {
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub beta: f64,
    pub predicted: Exponents,
    pub measured: BTreeMap<String, f64>,
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
}

fn billiard(beta: f64, epsilon: f64) -> Result<Billiard> {
    let table = build_table(FlatFamilyParams::new(beta))?;
    let window = WindowSpec::new(&table, epsilon)?;
    Ok(Billiard::new(table, window))
}

pub fn map_correctness(b: &Billiard, samples: usize, seed: u64) -> CriterionResult {
    let mut r = CriterionResult::new(
        1,
        "map correctness",
        format!(
            "inverse < {INVERSE_TOL:e}, reflection < {REFLECTION_TOL:e}, period-2 tau = 2 within {PERIOD_TWO_TOL:e}"
        ),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inverse, mut reflection, mut grazes, mut used) = (0.0f64, 0.0f64, 0usize, 0usize);
    for _ in 0..samples {
        let c = b.sample_collision(&mut rng);
        let p = b.phase_of(&c);
        let Ok((next, tau)) = b.advance(&c) else {
            grazes += 1;
            continue;
        };
        let Ok((back, _)) = b.step_inverse(b.phase_of(&next)) else {
            grazes += 1;
            continue;
        };
        used += 1;
        let dr = (back.r - p.r).abs();
        let dr = dr.min(b.table().total_length - dr);
        inverse = inverse.max(dr).max((back.phi - p.phi).abs());
        let v = c.velocity;
        let res = (v.dot(next.normal) + next.velocity.dot(next.normal)).abs()
            + (v.dot(next.tangent) - next.velocity.dot(next.tangent)).abs()
            + ((next.position - c.position).norm() - tau).abs();
        reflection = reflection.max(res);
    }
    r.set("samples_used", used as f64);
    r.set("grazes", grazes as f64);
    r.set("max_inverse_error", inverse);
    r.set("max_reflection_residual", reflection);
    r.require(inverse < INVERSE_TOL, "step_inverse does not undo step");
    r.require(
        reflection < REFLECTION_TOL,
        "reflection law residual too large",
    );

    let table = b.table();
    let start = match table.r_at_flat_x(table.top_component(), 0.0) {
        Ok(top) => PhasePoint::new(top, 0.0),
        Err(e) => return r.failed(&e),
    };
    let mut p = start;
    let mut tau_err = 0.0f64;
    for _ in 0..2 {
        match b.step(p) {
            Ok((q, tau)) => {
                tau_err = tau_err.max((tau - 2.0).abs());
                p = q;
            }
            Err(e) => return r.failed(&e),
        }
    }
    let fixed = (p.r - start.r).abs().max(p.phi.abs());
    r.set("period_two_tau_error", tau_err);
    r.set("period_two_drift", fixed);
    r.require(
        tau_err < PERIOD_TWO_TOL && fixed < PERIOD_TWO_TOL,
        "period-2 orbit not fixed",
    );
    r
}

pub fn measure_invariance(b: &Billiard, samples: usize, seed: u64, exec: Exec) -> CriterionResult {
    let mut r = CriterionResult::new(
        2,
        "measure invariance",
        format!("|mean(f∘F) - mean(f)| < {INVARIANCE_SIGMAS} se for cos phi and window indicator"),
    );
    const CHUNKS: usize = 64;
    let per = samples / CHUNKS;
    // Per chunk: sums of f, f∘F and (f∘F - f)² for both observables.
    let sums = exec.map_indices(CHUNKS, |k| {
        let mut rng = stream_rng(seed, k as u64);
        let mut acc = [0.0f64; 6];
        let mut n = 0usize;
        for _ in 0..per {
            let c = b.sample_collision(&mut rng);
            let Ok((next, _)) = b.advance(&c) else {
                continue;
            };
            let f0 = [c.cos_phi(), b.in_window(&c) as u8 as f64];
            let f1 = [next.cos_phi(), b.in_window(&next) as u8 as f64];
            for i in 0..2 {
                acc[3 * i] += f0[i];
                acc[3 * i + 1] += f1[i];
                acc[3 * i + 2] += (f1[i] - f0[i]).powi(2);
            }
            n += 1;
        }
        (acc, n)
    });
    let n: usize = sums.iter().map(|s| s.1).sum();
    let nf = n as f64;
    r.set("samples_used", nf);
    for (i, name) in ["cos_phi", "window_indicator"].iter().enumerate() {
        let s0: f64 = sums.iter().map(|s| s.0[3 * i]).sum();
        let s1: f64 = sums.iter().map(|s| s.0[3 * i + 1]).sum();
        let sq: f64 = sums.iter().map(|s| s.0[3 * i + 2]).sum();
        let diff = (s1 - s0) / nf;
        let se = ((sq / nf - diff * diff) / nf).sqrt();
        r.set(format!("{name}_mean"), s0 / nf);
        r.set(format!("{name}_shift"), diff);
        r.set(format!("{name}_sigmas"), diff.abs() / se);
        r.require(
            diff.abs() < INVARIANCE_SIGMAS * se,
            format!("{name} mean moves under F"),
        );
    }
    r
}

pub fn corridor_suite(betas: &[f64], epsilon: f64) -> CriterionResult {
    let mut r = CriterionResult::new(
        3,
        "corridor lemmas",
        format!(
            "no energy violations; difference ratio in {DIFFERENCE_RATIO_RANGE:?}; Z increment in {Z_INCREMENT_RANGE:?} x (beta-2)sqrt2; corridor vs geometry < {EQUIVALENCE_TOL:e} over {EQUIVALENCE_STEPS} steps"
        ),
    );
    for &beta in betas {
        let w_star = match corridor::locate_stable_manifold(beta, CORRIDOR_X0, 1_000_000) {
            Ok(w) => w,
            Err(e) => return r.failed(&e),
        };
        let mut violations = 0;
        let (mut ratio_lo, mut ratio_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut z_lo, mut z_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for rel in CORRIDOR_OFFSETS {
            let tr = match corridor::trace(
                beta,
                CORRIDOR_X0,
                w_star * (1.0 + rel),
                CORRIDOR_X0,
                1_000_000,
            ) {
                Ok(t) => t,
                Err(e) => return r.failed(&e),
            };
            let rep = corridor::lemma_diagnostics(&tr, beta);
            violations += rep.energy_monotonicity.violations;
            if let Some(d) = rep.difference_ratio {
                ratio_lo = ratio_lo.min(d.min);
                ratio_hi = ratio_hi.max(d.max);
            }
            if rel > Z_INCREMENT_MAX_OFFSET {
                continue;
            }
            if let Some(z) = rep.z_increments.tail_average {
                let rel = z / rep.z_increments.predicted;
                z_lo = z_lo.min(rel);
                z_hi = z_hi.max(rel);
            }
        }
        r.set(format!("beta{beta}_energy_violations"), violations as f64);
        r.set(format!("beta{beta}_difference_ratio_min"), ratio_lo);
        r.set(format!("beta{beta}_difference_ratio_max"), ratio_hi);
        r.set(format!("beta{beta}_z_increment_min"), z_lo);
        r.set(format!("beta{beta}_z_increment_max"), z_hi);
        r.require(
            violations == 0,
            format!("beta {beta}: energy monotonicity violated"),
        );
        r.require(
            ratio_lo >= DIFFERENCE_RATIO_RANGE.0 && ratio_hi <= DIFFERENCE_RATIO_RANGE.1,
            format!("beta {beta}: difference ratio out of range"),
        );
        r.require(
            z_lo >= Z_INCREMENT_RANGE.0 && z_hi <= Z_INCREMENT_RANGE.1,
            format!("beta {beta}: Z increment out of range"),
        );
        match corridor_equivalence(beta, epsilon, w_star) {
            Ok(err) => {
                r.set(format!("beta{beta}_geometry_deviation"), err);
                r.require(
                    err < EQUIVALENCE_TOL,
                    format!("beta {beta}: corridor map differs from billiard"),
                );
            }
            Err(e) => r.require(false, format!("beta {beta}: {e}")),
        }
    }
    r
}

/// Largest `|x|` difference between the corridor recurrence and the
/// billiard over the first steps of a lingering orbit.
pub fn corridor_equivalence(beta: f64, epsilon: f64, w_star: f64) -> Result<f64> {
    let b = billiard(beta, epsilon)?;
    let w0 = w_star * (1.0 + 1e-8);
    let tr = corridor::trace(beta, CORRIDOR_X0, w0, CORRIDOR_X0, 1_000_000)?;
    if tr.states.len() <= EQUIVALENCE_STEPS {
        return Err(Error::NumericalLoss(
            "corridor trace shorter than the comparison".into(),
        ));
    }
    let mut c = b.corridor_launch(CORRIDOR_X0, w0)?;
    let mut worst = 0.0f64;
    for m in 1..=EQUIVALENCE_STEPS {
        c = b.advance(&c)?.0;
        worst = worst.max((c.position.x - tr.states[m].x).abs());
    }
    Ok(worst)
}

pub fn scaling_exponents(b: &Billiard, scan: &CellScan, exec: Exec) -> CriterionResult {
    let beta = b.table().beta();
    let target_b = exponents::b(beta);
    let mut r = CriterionResult::new(
        4,
        "scaling exponents",
        format!(
            "height slope -{target_b} ± {SLOPE_TOL}, Lambda slope +{target_b} ± {SLOPE_TOL} over n in {SCALING_RANGE:?}; Lambda h spread < {MAX_LAMBDA_HEIGHT_SPREAD}; B0 sweep shifts < {B0_SLOPE_TOL}"
        ),
    );
    for t in [CellType::Prime, CellType::Dprime] {
        let tag = type_tag(t);
        let (h, l) = match (
            scan.height_fit(t, SCALING_RANGE),
            scan.lambda_fit(t, SCALING_RANGE),
        ) {
            (Ok(h), Ok(l)) => (h, l),
            (Err(e), _) | (_, Err(e)) => return r.failed(&e),
        };
        r.set(format!("{tag}_height_slope"), h.exponent);
        r.set(format!("{tag}_lambda_slope"), l.exponent);
        r.require(
            (h.exponent + target_b).abs() <= SLOPE_TOL,
            format!("{tag} height slope"),
        );
        r.require(
            (l.exponent - target_b).abs() <= SLOPE_TOL,
            format!("{tag} Lambda slope"),
        );
        let spread = scan
            .lambda_height_spread(t, SCALING_RANGE)
            .unwrap_or(f64::INFINITY);
        r.set(format!("{tag}_lambda_height_spread"), spread);
        r.require(
            spread < MAX_LAMBDA_HEIGHT_SPREAD,
            format!("{tag} Lambda h spread"),
        );
    }
    let mut shift = 0.0f64;
    for b0 in B0_SWEEP {
        let lambdas = cell_expansions(b, scan, b0, exec);
        for t in [CellType::Prime, CellType::Dprime] {
            let mut swept = scan.clone();
            swept.cells = scan
                .cells
                .iter()
                .zip(&lambdas)
                .filter_map(|(c, l)| {
                    l.as_ref().map(|l| {
                        let mut c = c.clone();
                        c.lambda_min = l.log_lambda_total.exp();
                        c
                    })
                })
                .collect();
            match (
                swept.lambda_fit(t, SCALING_RANGE),
                scan.lambda_fit(t, SCALING_RANGE),
            ) {
                (Ok(a), Ok(base)) => shift = shift.max((a.exponent - base.exponent).abs()),
                (Err(e), _) | (_, Err(e)) => return r.failed(&e),
            }
        }
    }
    r.set("b0_sweep_max_shift", shift);
    r.require(
        shift < B0_SLOPE_TOL,
        "Lambda slope depends on the initial front",
    );
    r
}

fn type_tag(t: CellType) -> &'static str {
    match t {
        CellType::Prime => "turn",
        CellType::Dprime => "pass",
    }
}

pub fn return_tail_check(
    b: &Billiard,
    tail: &Result<ReturnTail>,
    samples: u64,
    mass_lines: usize,
    exec: Exec,
) -> CriterionResult {
    let beta = b.table().beta();
    let target = exponents::tail(beta);
    let mut r = CriterionResult::new(
        5,
        "return tail",
        format!(
            "survival slope {target} ± {TAIL_TOL} from >= {MIN_TAIL_SAMPLES} samples; cell masses within {CELL_MASS_FACTOR}x for n in {CELL_MASS_RANGE:?}"
        ),
    );
    let tail = match tail {
        Ok(t) => t,
        Err(e) => return r.failed(e),
    };
    r.set("samples", samples as f64);
    r.set("exponent", tail.fit.exponent);
    r.set("stderr", tail.fit.stderr);
    r.set("fit_lo", tail.fit.fit_range.0);
    r.set("fit_hi", tail.fit.fit_range.1);
    r.set("tail_events", tail.tail_events as f64);
    r.set("censored", tail.histogram.censored as f64);
    r.require(
        samples >= MIN_TAIL_SAMPLES,
        "too few samples for this check",
    );
    r.require(
        (tail.fit.exponent - target).abs() <= TAIL_TOL,
        "survival slope off target",
    );
    let ns: Vec<usize> = (CELL_MASS_RANGE.0..=CELL_MASS_RANGE.1).step_by(5).collect();
    match cell_mass_survival(
        b,
        &ns,
        mass_lines,
        DEFAULT_PHI_GRID,
        DEFAULT_BORDER_TOLERANCE,
        exec,
    ) {
        Ok(m) => {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for (&n, &s) in ns.iter().zip(&m.survival) {
                let ratio = s / tail.histogram.survival(n);
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
            r.set("cell_mass_ratio_min", lo);
            r.set("cell_mass_ratio_max", hi);
            r.require(
                lo >= 1.0 / CELL_MASS_FACTOR && hi <= CELL_MASS_FACTOR,
                "cell masses disagree with Monte Carlo",
            );
        }
        Err(e) => r.require(false, e.to_string()),
    }
    r
}

pub fn exponent_chain(beta: f64, scan: &CellScan, tail: &Result<ReturnTail>) -> CriterionResult {
    let mut r = CriterionResult::new(
        6,
        "exponent chain",
        format!(
            "b - (a+1) = 1 within combined stderr; crossing angle slope {} ± {}%",
            exponents::crossing_angle(beta),
            CROSSING_REL_TOL * 100.0
        ),
    );
    let tail = match tail {
        Ok(t) => t,
        Err(e) => return r.failed(e),
    };
    let fits: Vec<DecayFit> = [CellType::Prime, CellType::Dprime]
        .into_iter()
        .filter_map(|t| scan.height_fit(t, SCALING_RANGE).ok())
        .collect();
    if fits.is_empty() {
        return r.failed(&Error::BadRange("no cell height fits".into()));
    }
    let (slope, se_b) = pooled_exponent(&fits.iter().collect::<Vec<_>>());
    let b_meas = -slope;
    let a1 = -tail.fit.exponent;
    let gap = b_meas - a1 - 1.0;
    let combined = (se_b * se_b + tail.fit.stderr * tail.fit.stderr).sqrt();
    r.set("b_measured", b_meas);
    r.set("b_stderr", se_b);
    r.set("a_plus_1_measured", a1);
    r.set("a_plus_1_stderr", tail.fit.stderr);
    r.set("chain_gap", gap);
    r.set("combined_stderr", combined);
    r.require(
        gap.abs() <= combined,
        "b - (a+1) differs from 1 beyond the combined stderr",
    );
    match corridor::crossing_angle_exponent(
        beta,
        CORRIDOR_X0,
        CORRIDOR_X0,
        CROSSING_RANGE.0,
        CROSSING_RANGE.1,
    ) {
        Ok(c) => {
            r.set("crossing_slope", c.fit.exponent);
            r.set("crossing_predicted", c.predicted);
            r.require(
                ((c.fit.exponent - c.predicted) / c.predicted).abs() <= CROSSING_REL_TOL,
                "crossing angle slope off target",
            );
        }
        Err(e) => r.require(false, e.to_string()),
    }
    r
}

pub fn expansion_condition(scans: &[(f64, Result<CellScan>)]) -> CriterionResult {
    let mut r = CriterionResult::new(
        7,
        "expansion sum",
        format!("sum of 1/Lambda over cells with n >= {EXPANSION_N_DELTA} below 1"),
    );
    for (beta, scan) in scans {
        match scan {
            Ok(scan) => {
                let s = expansion_sum(&scan.cells, EXPANSION_N_DELTA);
                r.set(format!("beta{beta}_sum"), s.total);
                r.set(format!("beta{beta}_tail"), s.tail);
                r.require(s.holds, format!("beta {beta}: sum >= 1"));
            }
            Err(e) => r.require(false, format!("beta {beta}: {e}")),
        }
    }
    r
}

pub fn split_ratio(scan: &CellScan) -> CriterionResult {
    let mut r = CriterionResult::new(
        8,
        "split ratio",
        "n Lambda2/Lambda1 bounded below with log-log trend >= -0.2 across a decade".into(),
    );
    for t in [CellType::Prime, CellType::Dprime] {
        let family: Vec<_> = scan
            .of_type(t)
            .filter(|c| c.n >= SCALING_RANGE.0)
            .map(|c| c.breakdown.clone())
            .collect();
        match split_ratio_check(&family) {
            Ok(rep) => {
                let tag = type_tag(t);
                r.set(format!("{tag}_min_ratio"), rep.min_ratio);
                r.set(format!("{tag}_trend"), rep.trend.exponent);
                r.require(rep.pass, format!("{tag}: ratio decays"));
            }
            Err(e) => r.require(false, e.to_string()),
        }
    }
    r
}

pub fn mixing(b: &Billiard, length: u64, seed: u64, a: f64, exec: Exec) -> CriterionResult {
    let mut r = CriterionResult::new(
        9,
        "mixing",
        format!(
            "|C_n(free path)| < {MIXING_FRACTION} C_0 up to noise for n in {MIXING_LAGS:?}; envelope (ln n)^(a+1)/n^a on {ENVELOPE_CHECKED:?}"
        ),
    );
    let cfg = CorrelationConfig::new(length, Observable::FreePath, Observable::FreePath, seed);
    let series = match correlations(b, &cfg, exec) {
        Ok(s) => s,
        Err(e) => return r.failed(&e),
    };
    r.set("collisions", series.sample_count as f64);
    r.set("restarts", series.restarts as f64);
    r.set("c0", series.values[0]);
    match mixing_check(&series, MIXING_FRACTION, MIXING_LAGS) {
        Ok(m) => {
            r.set("worst_excess_fraction", m.worst);
            r.require(m.pass, "correlations stay above the threshold");
        }
        Err(e) => return r.failed(&e),
    }
    match envelope_check(&series, a, ENVELOPE_CALIBRATION, ENVELOPE_CHECKED) {
        Ok(env) => {
            r.set("envelope_a", a);
            r.set("envelope_constant", env.constant);
            r.set("envelope_violations", env.violations.len() as f64);
            r.require(
                env.pass,
                format!("envelope exceeded at lags {:?}", env.violations),
            );
        }
        Err(e) => r.require(false, e.to_string()),
    }
    r
}

/// Runs all nine checks. `progress` receives each result as it completes.
pub fn run(
    cfg: &VerifyConfig,
    exec: Exec,
    mut progress: impl FnMut(&CriterionResult),
) -> Result<VerifyReport> {
    let b = billiard(cfg.beta, cfg.epsilon)?;
    let mut criteria = Vec::new();
    let mut emit = |r: CriterionResult, criteria: &mut Vec<CriterionResult>| {
        progress(&r);
        criteria.push(r);
    };

    emit(
        map_correctness(&b, cfg.map_samples, cfg.seed),
        &mut criteria,
    );
    emit(
        measure_invariance(&b, cfg.invariance_samples, cfg.seed, exec),
        &mut criteria,
    );
    emit(
        corridor_suite(&cfg.corridor_betas, cfg.epsilon),
        &mut criteria,
    );

    let scan_cfg = CellScanConfig {
        n_top: cfg.cell_limit,
        b0: DEFAULT_FRONT_CURVATURE,
        ..Default::default()
    };
    let scan = locate_cells(&b, &scan_cfg, exec)?;
    emit(scaling_exponents(&b, &scan, exec), &mut criteria);

    let tail_cfg = ReturnTailConfig {
        samples: cfg.tail_samples,
        n_max: cfg.tail_n_max,
        seed: cfg.seed,
        batch: DEFAULT_TAIL_BATCH,
    };
    let tail = return_tail(&b, &tail_cfg, exec);
    emit(
        return_tail_check(&b, &tail, cfg.tail_samples, cfg.mass_lines, exec),
        &mut criteria,
    );
    emit(exponent_chain(cfg.beta, &scan, &tail), &mut criteria);

    let scans: Vec<(f64, Result<CellScan>)> = cfg
        .expansion_betas
        .iter()
        .map(|&beta| {
            let s = if beta == cfg.beta {
                Ok(scan.clone())
            } else {
                billiard(beta, cfg.epsilon).and_then(|bb| locate_cells(&bb, &scan_cfg, exec))
            };
            (beta, s)
        })
        .collect();
    emit(expansion_condition(&scans), &mut criteria);
    emit(split_ratio(&scan), &mut criteria);

    let a_meas = tail.as_ref().map(|t| -t.fit.exponent - 1.0).ok();
    let a_env = a_meas.unwrap_or_else(|| exponents::a(cfg.beta));
    emit(
        mixing(&b, cfg.correlation_length, cfg.seed, a_env, exec),
        &mut criteria,
    );

    let mut measured = BTreeMap::new();
    if let Some(a) = a_meas {
        measured.insert("a".to_string(), a);
    }
    let fits: Vec<DecayFit> = [CellType::Prime, CellType::Dprime]
        .into_iter()
        .filter_map(|t| scan.height_fit(t, SCALING_RANGE).ok())
        .collect();
    if !fits.is_empty() {
        measured.insert(
            "b".to_string(),
            -pooled_exponent(&fits.iter().collect::<Vec<_>>()).0,
        );
    }
    let pass = criteria.iter().all(|c| c.pass);
    Ok(VerifyReport {
        beta: cfg.beta,
        predicted: Exponents {
            a: exponents::a(cfg.beta),
            b: exponents::b(cfg.beta),
        },
        measured,
        criteria,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_keeps_small_values_visible() {
        assert_eq!(short(0.0), "0");
        assert_eq!(short(1e8), "100000000");
        assert_eq!(short(1.5), "1.50000");
        assert_eq!(short(3.7e-11), "3.70000e-11");
        assert_eq!(short(-2.88361), "-2.88361");
    }

    #[test]
    fn map_checks_pass_on_small_sample() {
        let b = billiard(4.0, 0.5).unwrap();
        let r = map_correctness(&b, 500, 2);
        assert!(r.pass, "{}", r.summary_line());
        assert_eq!(r.id, 1);
    }

    #[test]
    fn failed_criterion_records_reason() {
        let r =
            CriterionResult::new(7, "x", "t".into()).failed(&Error::InvalidParams("bad".into()));
        assert!(!r.pass);
        assert!(r.summary_line().contains("FAIL"));
    }
}
