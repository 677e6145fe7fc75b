//! Experiment reports: metric tables, named-bound verdicts, CSV and JSON
//! output, and the config digest that ties a report to its run.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// Confidence half-width when the metric is a rate or mean; zero for
    /// exact quantities.
    pub ci_half: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Self-contained bound name, e.g. `block_error_fraction_lower`.
    pub bound: String,
    /// Human-readable relation, e.g. `value >= 0.24`.
    pub expr: String,
    pub observed: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config_digest: String,
    pub seed: u64,
    pub exec_mode: String,
    pub metrics: Vec<Metric>,
    pub verdicts: Vec<Verdict>,
    pub wall_clock_secs: f64,
}

impl ExperimentReport {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        ExperimentReport {
            experiment: cfg.experiment.name().to_string(),
            config_digest: config_digest(cfg),
            seed: cfg.seed,
            exec_mode: tokmark_core::exec::ExecMode::default().name().to_string(),
            metrics: Vec::new(),
            verdicts: Vec::new(),
            wall_clock_secs: 0.0,
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64, ci_half: f64) {
        self.metrics.push(Metric {
            name: name.into(),
            value,
            ci_half,
        });
    }

    pub fn verdict_ge(&mut self, bound: impl Into<String>, observed: f64, threshold: f64) {
        let bound = bound.into();
        self.verdicts.push(Verdict {
            expr: format!("{bound} >= {threshold}"),
            bound,
            observed,
            threshold,
            pass: observed >= threshold,
        });
    }

    pub fn verdict_le(&mut self, bound: impl Into<String>, observed: f64, threshold: f64) {
        let bound = bound.into();
        self.verdicts.push(Verdict {
            expr: format!("{bound} <= {threshold}"),
            bound,
            observed,
            threshold,
            pass: observed <= threshold,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn metric_value(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    /// Bit-exact fingerprint of the metric values; reproducibility checks
    /// compare this across reruns.
    pub fn metrics_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.metrics {
            h.update(m.name.as_bytes());
            h.update(m.value.to_le_bytes());
            h.update(m.ci_half.to_le_bytes());
        }
        hex(&h.finalize())
    }

    pub fn write_json<W: Write>(&self, w: &mut W) -> Result<()> {
        serde_json::to_writer_pretty(&mut *w, self)
            .map_err(|e| crate::HarnessError::Config(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "kind,name,value,ci_half,threshold,pass")?;
        for m in &self.metrics {
            writeln!(w, "metric,{},{},{},,", m.name, m.value, m.ci_half)?;
        }
        for v in &self.verdicts {
            writeln!(
                w,
                "verdict,{},{},,{},{}",
                v.bound, v.observed, v.threshold, v.pass
            )?;
        }
        Ok(())
    }

    /// Write `<dir>/<experiment>.json` and `.csv`; returns the JSON path.
    pub fn write_files(&self, dir: &Path) -> Result<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let json_path = dir.join(format!("{}.json", self.experiment));
        let mut jf = std::fs::File::create(&json_path)?;
        self.write_json(&mut jf)?;
        let mut cf = std::fs::File::create(dir.join(format!("{}.csv", self.experiment)))?;
        self.write_csv(&mut cf)?;
        Ok(json_path)
    }
}

/// SHA-256 over the canonical JSON form of the config.
pub fn config_digest(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Run timer helper.
pub struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch(Instant::now())
    }

    pub fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

impl Default for Stopwatch {
    fn default() -> Self {
        Self::start()
    }
}
