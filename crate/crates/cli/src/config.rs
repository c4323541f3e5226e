//! Experiment configuration: `key = value` files, flag overrides and
//! per-command defaults.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flatbill::billiard::{DEFAULT_EPSILON, DEFAULT_N_MAX};
use flatbill::geometry::{DEFAULT_CLOSURE_SLACK, DEFAULT_HALF_WIDTH};
use flatbill::statistics::cells::DEFAULT_CELL_LIMIT;
use flatbill::statistics::correlations::{Observable, DEFAULT_MAX_LAG};
use flatbill::{FlatFamilyParams, Variant};
use serde::Serialize;

/// Keys accepted in config files; flags use the same names with dashes.
pub const KEYS: [&str; 19] = [
    "beta",
    "epsilon",
    "half_width",
    "closure_slack",
    "variant",
    "seed",
    "samples",
    "orbit_length",
    "n_max",
    "r0",
    "cell_limit",
    "max_lag",
    "observable_f",
    "observable_g",
    "corridor_x0",
    "corridor_offset",
    "workers",
    "out",
    "format",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("expected csv or json, got '{s}'")),
        }
    }
}

impl Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Table,
    Orbit,
    Corridor,
    Cells,
    ReturnTail,
    Expansion,
    Correlations,
    Verify,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub beta: f64,
    pub epsilon: f64,
    pub half_width: f64,
    pub closure_slack: f64,
    pub variant: Variant,
    pub seed: u64,
    /// Monte Carlo samples; the default depends on the command.
    pub samples: Option<u64>,
    /// Collisions per orbit; the default depends on the command.
    pub orbit_length: Option<u64>,
    pub n_max: usize,
    /// Boundary coordinate of the cell scan line; the window corner if unset.
    pub r0: Option<f64>,
    pub cell_limit: usize,
    pub max_lag: usize,
    pub observable_f: Observable,
    pub observable_g: Observable,
    pub corridor_x0: f64,
    /// Relative launch offset above the separatrix.
    pub corridor_offset: f64,
    // Output plumbing; none of these change results.
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            beta: 6.0,
            epsilon: DEFAULT_EPSILON,
            half_width: DEFAULT_HALF_WIDTH,
            closure_slack: DEFAULT_CLOSURE_SLACK,
            variant: Variant::Full,
            seed: 1,
            samples: None,
            orbit_length: None,
            n_max: DEFAULT_N_MAX,
            r0: None,
            cell_limit: DEFAULT_CELL_LIMIT,
            max_lag: DEFAULT_MAX_LAG,
            observable_f: Observable::FreePath,
            observable_g: Observable::FreePath,
            corridor_x0: 0.5,
            corridor_offset: 1e-10,
            workers: None,
            out: None,
            format: Format::Json,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| format!("{key}: cannot parse '{value}': {e}"))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "beta" => self.beta = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "half_width" => self.half_width = parse(key, value)?,
            "closure_slack" => self.closure_slack = parse(key, value)?,
            "variant" => self.variant = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "samples" => self.samples = Some(parse(key, value)?),
            "orbit_length" => self.orbit_length = Some(parse(key, value)?),
            "n_max" => self.n_max = parse(key, value)?,
            "r0" => self.r0 = Some(parse(key, value)?),
            "cell_limit" => self.cell_limit = parse(key, value)?,
            "max_lag" => self.max_lag = parse(key, value)?,
            "observable_f" => self.observable_f = parse(key, value)?,
            "observable_g" => self.observable_g = parse(key, value)?,
            "corridor_x0" => self.corridor_x0 = parse(key, value)?,
            "corridor_offset" => self.corridor_offset = parse(key, value)?,
            "workers" => self.workers = Some(parse(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = parse(key, value)?,
            _ => return Err(format!("unknown key '{key}' (known: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{origin}:{}: expected key = value", i + 1))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| format!("{origin}:{}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Fills the command-dependent defaults.
    pub fn resolve(mut self, cmd: Command) -> Self {
        let (samples, orbit_length) = match cmd {
            Command::Verify => (100_000_000, 10_000_000),
            Command::Orbit => (1_000_000, 1000),
            _ => (1_000_000, 1_000_000),
        };
        self.samples.get_or_insert(samples);
        self.orbit_length.get_or_insert(orbit_length);
        self
    }

    pub fn samples(&self) -> u64 {
        self.samples.unwrap_or(1_000_000)
    }

    pub fn orbit_length(&self) -> u64 {
        self.orbit_length.unwrap_or(1_000_000)
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("beta", self.beta),
            ("epsilon", self.epsilon),
            ("half_width", self.half_width),
            ("closure_slack", self.closure_slack),
            ("corridor_x0", self.corridor_x0),
            ("corridor_offset", self.corridor_offset),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{k} must be positive and finite, got {v}"));
            }
        }
        if self.beta <= 2.0 {
            return Err(format!("beta must exceed 2, got {}", self.beta));
        }
        if self.epsilon >= self.half_width {
            return Err(format!(
                "epsilon ({}) must be below half_width ({})",
                self.epsilon, self.half_width
            ));
        }
        if self.corridor_x0 >= self.half_width {
            return Err("corridor_x0 must lie inside the flat part".into());
        }
        let counts = [
            ("samples", self.samples()),
            ("orbit_length", self.orbit_length()),
            ("n_max", self.n_max as u64),
            ("cell_limit", self.cell_limit as u64),
            ("max_lag", self.max_lag as u64),
            ("workers", self.workers.unwrap_or(1) as u64),
        ];
        for (k, v) in counts {
            if v == 0 {
                return Err(format!("{k} must be positive"));
            }
        }
        if self.r0.is_some_and(|r| !(r >= 0.0 && r.is_finite())) {
            return Err("r0 must be a non-negative boundary coordinate".into());
        }
        Ok(())
    }

    pub fn table_params(&self) -> FlatFamilyParams {
        FlatFamilyParams {
            beta: self.beta,
            half_width: self.half_width,
            closure_slack: self.closure_slack,
            variant: self.variant,
        }
    }

    /// The config as `key = value` lines that reproduce it. Output location
    /// and worker count are left out: they do not change results.
    pub fn to_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("beta = {}", self.beta),
            format!("epsilon = {}", self.epsilon),
            format!("half_width = {}", self.half_width),
            format!("closure_slack = {}", self.closure_slack),
            format!("variant = {}", self.variant),
            format!("seed = {}", self.seed),
            format!("samples = {}", self.samples()),
            format!("orbit_length = {}", self.orbit_length()),
            format!("n_max = {}", self.n_max),
        ];
        if let Some(r0) = self.r0 {
            out.push(format!("r0 = {r0}"));
        }
        out.extend([
            format!("cell_limit = {}", self.cell_limit),
            format!("max_lag = {}", self.max_lag),
            format!("observable_f = {}", self.observable_f),
            format!("observable_g = {}", self.observable_g),
            format!("corridor_x0 = {}", self.corridor_x0),
            format!("corridor_offset = {}", self.corridor_offset),
        ]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_with_comments() {
        let mut c = ExperimentConfig::default();
        c.apply_text(
            "# beta six\nbeta = 4   # inline\n\nseed=7\nvariant = half\n",
            "t",
        )
        .unwrap();
        assert_eq!(c.beta, 4.0);
        assert_eq!(c.seed, 7);
        assert_eq!(c.variant, Variant::Half);
    }

    #[test]
    fn unknown_key_names_the_line() {
        let mut c = ExperimentConfig::default();
        let e = c.apply_text("beta = 4\nbogus = 1\n", "f.conf").unwrap_err();
        assert!(e.starts_with("f.conf:2:"), "{e}");
        assert!(c.apply_text("beta 4", "g").is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let values = [
            "5",
            "0.3",
            "0.8",
            "3",
            "full",
            "2",
            "10",
            "10",
            "10",
            "1.5",
            "20",
            "10",
            "cos_phi",
            "x_coordinate",
            "0.4",
            "1e-8",
            "2",
            "/tmp",
            "csv",
        ];
        let mut c = ExperimentConfig::default();
        for (k, v) in KEYS.iter().zip(values) {
            c.set(k, v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        c.validate().unwrap();
    }

    #[test]
    fn round_trips_through_lines() {
        let mut c = ExperimentConfig::default();
        c.set("r0", "1.25").unwrap();
        c.set("observable_g", "window_indicator").unwrap();
        let c = c.resolve(Command::Correlations);
        let mut back = ExperimentConfig::default();
        back.apply_text(&c.to_lines().join("\n"), "lines").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_invalid_values() {
        for (k, v) in [
            ("beta", "2"),
            ("epsilon", "0.9"),
            ("samples", "0"),
            ("corridor_x0", "-1"),
        ] {
            let mut c = ExperimentConfig::default();
            c.set(k, v).unwrap();
            assert!(c.resolve(Command::Cells).validate().is_err(), "{k}={v}");
        }
    }

    #[test]
    fn command_defaults_do_not_override_explicit_values() {
        let mut c = ExperimentConfig::default();
        c.set("samples", "1000").unwrap();
        let c = c.resolve(Command::Verify);
        assert_eq!(c.samples, Some(1000));
        assert_eq!(c.orbit_length, Some(10_000_000));
    }
}
