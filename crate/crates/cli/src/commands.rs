use flatbill::corridor::{self, lemma_diagnostics, z_increment_constant};
use flatbill::exponents;
use flatbill::geometry::validate_table;
use flatbill::hyperbolicity::{split_ratio_check, ExpansionBreakdown};
use flatbill::parallel::stream_rng;
use flatbill::statistics::cells::{locate_cells, CellScan, CellScanConfig, CellType, ScanLine};
use flatbill::statistics::correlations::{
    correlation_decay_fit, correlations, mixing_check, CorrelationConfig,
};
use flatbill::statistics::expansion::expansion_sum;
use flatbill::statistics::fit::{pooled_exponent, DecayFit};
use flatbill::statistics::tail::{fit_tail, tail_histograms, ReturnTailConfig, DEFAULT_TAIL_BATCH};
use flatbill::verify::{self, VerifyConfig, EXPANSION_N_DELTA, MIXING_FRACTION, SCALING_RANGE};
use flatbill::{build_table, Billiard, Exec, WindowSpec};
use serde_json::json;

use crate::artifact::{fit_json, num, Artifact};
use crate::config::{Command, ExperimentConfig};
use crate::Failure;

const EXEC: Exec = Exec::Parallel;

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<(), Failure> {
    let art = match cmd {
        Command::Table => table(cfg)?,
        Command::Orbit => orbit(cfg)?,
        Command::Corridor => corridor_trace(cfg)?,
        Command::Cells => cells(cfg)?,
        Command::ReturnTail => return_tail(cfg)?,
        Command::Expansion => expansion(cfg)?,
        Command::Correlations => correlation_series(cfg)?,
        Command::Verify => return verify_suite(cfg),
    };
    emit(&art, cfg)
}

fn emit(art: &Artifact, cfg: &ExperimentConfig) -> Result<(), Failure> {
    if let Some(dir) = &cfg.out {
        art.write_to(cfg, dir).map_err(Failure::Io)?;
        eprintln!("wrote {}/{}.{{csv,json}}", dir.display(), art.name);
    }
    print!("{}", art.render(cfg, cfg.format));
    Ok(())
}

/// Parameter problems caught while building the table are config errors.
fn billiard(cfg: &ExperimentConfig) -> Result<Billiard, Failure> {
    let table = build_table(cfg.table_params()).map_err(|e| Failure::Config(e.to_string()))?;
    let window =
        WindowSpec::new(&table, cfg.epsilon).map_err(|e| Failure::Config(e.to_string()))?;
    Ok(Billiard::new(table, window))
}

fn predicted(beta: f64) -> serde_json::Value {
    json!({ "a": exponents::a(beta), "b": exponents::b(beta) })
}

fn type_name(t: CellType) -> &'static str {
    match t {
        CellType::Prime => "turn_back",
        CellType::Dprime => "pass_through",
    }
}

fn table(cfg: &ExperimentConfig) -> Result<Artifact, Failure> {
    let b = billiard(cfg)?;
    let t = b.table();
    let mut art = Artifact::new(
        "table",
        &[
            "component",
            "kind",
            "arclength_start",
            "arclength_end",
            "length",
        ],
    );
    for (i, c) in t.components.iter().enumerate() {
        let kind = serde_json::to_value(c.kind)
            .ok()
            .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_owned))
            .unwrap_or_default();
        art.row(vec![
            i.to_string(),
            kind,
            num(c.arclength_start),
            num(c.arclength_end),
            num(c.length()),
        ]);
    }
    art.put("table", t.describe());
    art.put("validation", validate_table(t));
    art.put("total_length", t.total_length);
    art.put("predicted", predicted(cfg.beta));
    Ok(art)
}

fn orbit(cfg: &ExperimentConfig) -> Result<Artifact, Failure> {
    let b = billiard(cfg)?;
    let start = b.sample_mu(&mut stream_rng(cfg.seed, 0));
    let o = b.orbit(start, cfg.orbit_length() as usize)?;
    let mut art = Artifact::new(
        "orbit",
        &[
            "k",
            "r",
            "phi",
            "x",
            "y",
            "component",
            "curvature",
            "tau",
            "in_window",
        ],
    );
    for (k, rec) in o.records.iter().enumerate() {
        art.row(vec![
            k.to_string(),
            num(rec.phase.r),
            num(rec.phase.phi),
            num(rec.point.position.x),
            num(rec.point.position.y),
            rec.point.component_id.to_string(),
            num(rec.point.curvature),
            num(rec.tau),
            (rec.in_window as u8).to_string(),
        ]);
    }
    art.put("start", start);
    art.put("counts", json!({ "collisions": o.records.len() }));
    art.put("truncated", o.truncated.as_ref().map(|e| e.to_string()));
    Ok(art)
}

fn corridor_trace(cfg: &ExperimentConfig) -> Result<Artifact, Failure> {
    let (beta, x0) = (cfg.beta, cfg.corridor_x0);
    let w_star = corridor::locate_stable_manifold(beta, x0, cfg.n_max)?;
    let w0 = w_star * (1.0 + cfg.corridor_offset);
    let tr = corridor::trace(beta, x0, w0, x0, cfg.n_max)?;
    let mut art = Artifact::new("corridor", &["m", "x", "w"]);
    for s in &tr.states {
        art.row(vec![s.m.to_string(), num(s.x), num(s.w)]);
    }
    art.put("w_star", w_star);
    art.put("w0", w0);
    art.put(
        "counts",
        json!({
            "n": tr.n(),
            "n_prime": tr.n_prime,
            "n_dprime": tr.n_dprime,
            "escaped": tr.escaped,
        }),
    );
    art.put("exit_type", tr.exit_type);
    art.put("lemma", lemma_diagnostics(&tr, beta));
    art.put(
        "predicted",
        json!({
            "a": exponents::a(beta),
            "b": exponents::b(beta),
            "z_increment": z_increment_constant(beta),
            "crossing_angle": exponents::crossing_angle(beta),
        }),
    );
    Ok(art)
}

fn scan(b: &Billiard, cfg: &ExperimentConfig) -> Result<CellScan, Failure> {
    let line = match cfg.r0 {
        Some(r) => Some(ScanLine::at_r(b, r).map_err(|e| Failure::Config(e.to_string()))?),
        None => None,
    };
    let scfg = CellScanConfig {
        line,
        n_top: cfg.cell_limit,
        ..Default::default()
    };
    Ok(locate_cells(b, &scfg, EXEC)?)
}

/// The scaling window, clipped to the located cells.
fn scaling_range(cfg: &ExperimentConfig) -> (usize, usize) {
    (SCALING_RANGE.0, SCALING_RANGE.1.min(cfg.cell_limit))
}

/// Per-type fits and their inverse-variance pooled exponent. The two cell
/// types share the exponent but not the prefactor.
fn pooled_fits(
    fit: impl Fn(CellType) -> flatbill::Result<DecayFit>,
) -> (
    serde_json::Value,
    serde_json::Map<String, serde_json::Value>,
) {
    let mut by_type = serde_json::Map::new();
    let mut fits = Vec::new();
    for t in [CellType::Prime, CellType::Dprime] {
        let f = fit(t).ok();
        by_type.insert(type_name(t).into(), json!(f.as_ref().map(fit_json)));
        fits.extend(f);
    }
    if fits.is_empty() {
        return (serde_json::Value::Null, by_type);
    }
    let (exponent, stderr) = pooled_exponent(&fits.iter().collect::<Vec<_>>());
    let r2 = fits
        .iter()
        .map(|f| f.r_squared)
        .fold(f64::INFINITY, f64::min);
    let range = fits[0].fit_range;
    let pooled = json!({
        "exponent": exponent,
        "stderr": stderr,
        "range": [range.0, range.1],
        "r2": r2,
        "points": fits.iter().map(|f| f.points).sum::<usize>(),
    });
    (pooled, by_type)
}

fn counts_json(s: &CellScan) -> serde_json::Value {
    json!({
        "cells": s.cells.len(),
        "turn_back": s.of_type(CellType::Prime).count(),
        "pass_through": s.of_type(CellType::Dprime).count(),
        "truncated_at": s.truncated_at,
    })
}

fn cells(cfg: &ExperimentConfig) -> Result<Artifact, Failure> {
    let b = billiard(cfg)?;
    let s = scan(&b, cfg)?;
    let range = scaling_range(cfg);
    let mut art = Artifact::new(
        "cells",
        &[
            "n",
            "type",
            "phi_lower",
            "phi_upper",
            "height",
            "lambda_min",
        ],
    );
    for c in &s.cells {
        art.row(vec![
            c.n.to_string(),
            type_name(c.cell_type).into(),
            num(c.phi_lower),
            num(c.phi_upper),
            num(c.height),
            num(c.lambda_min),
        ]);
    }
    let (pooled, by_type) = pooled_fits(|t| s.height_fit(t, range));
    art.put("counts", counts_json(&s));
    art.put("fit", pooled);
    art.put("fit_by_type", by_type);
    art.put("phi_infinity", s.phi_infinity);
    art.put("line", s.line);
    art.put("predicted", predicted(cfg.beta));
    Ok(art)
}

fn return_tail(cfg: &ExperimentConfig) -> Result<Artifact, Failure> {
    let b = billiard(cfg)?;
    let tcfg = ReturnTailConfig {
        samples: cfg.samples(),
        n_max: cfg.n_max,
        seed: cfg.seed,
        batch: DEFAULT_TAIL_BATCH,
    };
    let tail = fit_tail(&tail_histograms(&b, &tcfg, EXEC))?;
    let h = &tail.histogram;
    let mut art = Artifact::new("return_tail", &["n", "count", "survival"]);
    for (n, s) in h.survival_series() {
        art.row(vec![
            n.to_string(),
            h.counts.get(&n).copied().unwrap_or(0).to_string(),
            num(s),
        ]);
    }
    art.put(
        "counts",
        json!({
            "samples": h.samples,
            "valid": h.valid(),
            "censored": h.censored,
            "grazes": h.grazes,
            "tail_events": tail.tail_events,
        }),
    );
    let mut fit = fit_json(&tail.fit);
    fit["wls_stderr"] = json!(tail.wls_stderr);
    art.put("fit", fit);
    art.put(
        "predicted",
        json!({
            "a": exponents::a(cfg.beta),
            "b": exponents::b(cfg.beta),
            "tail": exponents::tail(cfg.beta),
        }),
    );
    Ok(art)
}

fn expansion(cfg: &ExperimentConfig) -> Result<Artifact, Failure> {
    let b = billiard(cfg)?;
    let s = scan(&b, cfg)?;
    let range = scaling_range(cfg);
    let mut art = Artifact::new(
        "expansion",
        &[
            "n",
            "type",
            "n_prime",
            "log_lambda_1",
            "log_lambda_2",
            "log_lambda_total",
            "split_ratio",
        ],
    );
    for c in &s.cells {
        let e = &c.breakdown;
        art.row(vec![
            c.n.to_string(),
            type_name(c.cell_type).into(),
            e.n_prime.to_string(),
            num(e.log_lambda_1),
            num(e.log_lambda_2),
            num(e.log_lambda_total),
            num(c.n as f64 * e.lambda_2() / e.lambda_1()),
        ]);
    }
    let (pooled, by_type) = pooled_fits(|t| s.lambda_fit(t, range));
    let mut split = serde_json::Map::new();
    for t in [CellType::Prime, CellType::Dprime] {
        let family: Vec<ExpansionBreakdown> = s
            .of_type(t)
            .filter(|c| c.n >= range.0)
            .map(|c| c.breakdown.clone())
            .collect();
        let rep = match split_ratio_check(&family) {
            Ok(r) => json!({
                "min_ratio": r.min_ratio,
                "trend": fit_json(&r.trend),
                "max_decay_slope": r.max_decay_slope,
                "pass": r.pass,
            }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        split.insert(type_name(t).into(), json!(rep));
    }
    art.put("counts", counts_json(&s));
    art.put("fit", pooled);
    art.put("fit_by_type", by_type);
    art.put("split_ratio", split);
    art.put("expansion_sum", expansion_sum(&s.cells, EXPANSION_N_DELTA));
    art.put(
        "predicted",
        json!({
            "a": exponents::a(cfg.beta),
            "b": exponents::b(cfg.beta),
            "first_half": exponents::first_half_expansion(cfg.beta),
            "second_half": exponents::second_half_expansion(cfg.beta),
        }),
    );
    Ok(art)
}

fn correlation_series(cfg: &ExperimentConfig) -> Result<Artifact, Failure> {
    let b = billiard(cfg)?;
    let mut ccfg = CorrelationConfig::new(
        cfg.orbit_length(),
        cfg.observable_f,
        cfg.observable_g,
        cfg.seed,
    );
    ccfg.max_lag = cfg.max_lag;
    let s = correlations(&b, &ccfg, EXEC)?;
    let mut art = Artifact::new("correlations", &["lag", "value", "stderr"]);
    for ((lag, v), se) in s.lags.iter().zip(&s.values).zip(&s.standard_errors) {
        art.row(vec![lag.to_string(), num(*v), num(*se)]);
    }
    let top = cfg.max_lag;
    art.put(
        "counts",
        json!({
            "collisions": s.sample_count,
            "chunks": ccfg.chunks,
            "restarts": s.restarts,
        }),
    );
    art.put(
        "fit",
        correlation_decay_fit(&s, (2, top))
            .ok()
            .map(|f| fit_json(&f)),
    );
    art.put(
        "mixing",
        mixing_check(&s, MIXING_FRACTION, (top - top / 4, top)).ok(),
    );
    art.put("predicted", predicted(cfg.beta));
    Ok(art)
}

fn verify_suite(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let suite = VerifyConfig {
        epsilon: cfg.epsilon,
        seed: cfg.seed,
        tail_samples: cfg.samples(),
        tail_n_max: cfg.n_max,
        correlation_length: cfg.orbit_length(),
        cell_limit: cfg.cell_limit,
        ..VerifyConfig::for_beta(cfg.beta)
    };
    let report = verify::run(&suite, EXEC, |r| eprintln!("{}", r.summary_line()))?;
    let mut art = Artifact::new("verify", &["criterion", "name", "pass", "key", "value"]);
    for c in &report.criteria {
        for (k, v) in &c.measured {
            art.row(vec![
                c.id.to_string(),
                c.name.into(),
                c.pass.to_string(),
                k.clone(),
                num(*v),
            ]);
        }
    }
    art.put("suite", &suite);
    art.put("predicted", &report.predicted);
    art.put("measured", &report.measured);
    art.put("criteria", &report.criteria);
    art.put("pass", report.pass);
    emit(&art, cfg)?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}
