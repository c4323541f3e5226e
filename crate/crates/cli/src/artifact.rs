//! Output artifacts. Each carries the resolved config and the build
//! version, so it is enough to re-run the experiment that produced it.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Format};

pub const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "+",
    env!("FLATBILL_GIT_DESCRIBE")
);

pub struct Artifact {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Command-specific JSON fields, merged after `version` and `params`.
    pub summary: Map<String, Value>,
}

impl Artifact {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Artifact {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
            summary: Map::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn put(&mut self, key: &str, value: impl serde::Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    pub fn to_json(&self, cfg: &ExperimentConfig) -> String {
        let mut obj = Map::new();
        obj.insert("version".into(), json!(VERSION));
        obj.insert("command".into(), json!(self.name));
        obj.insert("params".into(), json!(cfg));
        obj.insert("seed".into(), json!(cfg.seed));
        for (k, v) in &self.summary {
            obj.insert(k.clone(), v.clone());
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("json");
        s.push('\n');
        s
    }

    /// CSV preceded by `#` lines holding the version and a config file that
    /// reproduces the run.
    pub fn to_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = format!("# flatbill {VERSION} {}\n", self.name);
        for line in cfg.to_lines() {
            out.push_str(&format!("# {line}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("csv");
        for r in &self.rows {
            w.write_record(r).expect("csv");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("csv")).expect("utf8"));
        out
    }

    pub fn render(&self, cfg: &ExperimentConfig, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(cfg),
            Format::Json => self.to_json(cfg),
        }
    }

    /// Writes `<name>.csv` and `<name>.json` into `dir`.
    pub fn write_to(&self, cfg: &ExperimentConfig, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for format in [Format::Csv, Format::Json] {
            let path = dir.join(format!("{}.{format}", self.name));
            std::fs::File::create(&path)?.write_all(self.render(cfg, format).as_bytes())?;
        }
        Ok(())
    }
}

/// `{exponent, stderr, range, r2}` plus the model and point count.
pub fn fit_json(fit: &flatbill::statistics::fit::DecayFit) -> Value {
    json!({
        "exponent": fit.exponent,
        "stderr": fit.stderr,
        "range": [fit.fit_range.0, fit.fit_range.1],
        "r2": fit.r_squared,
        "intercept": fit.intercept,
        "model": fit.model,
        "points": fit.points,
    })
}

pub fn num(v: f64) -> String {
    format!("{v}")
}
