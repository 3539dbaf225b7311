//! Run archives: metrics CSV, summary record, resolved config snapshot.
//!
//! `metrics.csv` is fully determined by the run configuration (no timestamps),
//! so re-running an archived config reproduces it byte for byte. The summary
//! carries the wall time and a SHA-256 of the metrics so reproducibility can
//! be verified without byte comparison.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{RunMetrics, RunOutput};
use crate::error::{Error, Result};

use super::config::FileConfig;

pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Render the metrics table as CSV (leading comment line carries the schema
/// version; floats use shortest round-trip formatting).
pub fn metrics_csv(metrics: &RunMetrics) -> String {
    let mut out = String::new();
    out.push_str(&format!("# scb2o-metrics schema_version={METRICS_SCHEMA_VERSION}\n"));
    out.push_str("step,t,L_consensus,G_consensus,dist_theta_star,spread,v_hat,fourth_moment");
    for i in 1..=metrics.mass_radii.len() {
        out.push_str(&format!(",mass_r{i}"));
    }
    out.push('\n');
    for row in 0..metrics.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            metrics.steps[row],
            metrics.times[row],
            metrics.l_at_consensus[row],
            metrics.g_at_consensus[row],
            metrics.dist_to_theta_star[row],
            metrics.spread[row],
            metrics.v_hat[row],
            metrics.fourth_moment[row],
        ));
        for series in &metrics.mass_in_ball {
            out.push_str(&format!(",{}", series[row]));
        }
        out.push('\n');
    }
    out
}

/// Parse a metrics CSV produced by [`metrics_csv`].
pub fn parse_metrics_csv(text: &str) -> Result<RunMetrics> {
    let mut lines = text.lines().filter(|l| !l.is_empty());
    let schema = lines
        .next()
        .ok_or_else(|| Error::config("empty metrics file"))?;
    if !schema.starts_with("# scb2o-metrics schema_version=") {
        return Err(Error::config("missing metrics schema header"));
    }
    let header = lines
        .next()
        .ok_or_else(|| Error::config("missing metrics column header"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let n_mass = columns.iter().filter(|c| c.starts_with("mass_r")).count();
    let mut metrics = RunMetrics {
        mass_radii: vec![f64::NAN; n_mass],
        steps: vec![],
        times: vec![],
        l_at_consensus: vec![],
        g_at_consensus: vec![],
        dist_to_theta_star: vec![],
        spread: vec![],
        v_hat: vec![],
        fourth_moment: vec![],
        mass_in_ball: vec![Vec::new(); n_mass],
        initial_bump_mass: vec![],
        final_consensus: vec![],
    };
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::config(format!("ragged metrics row: {line}")));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|e| Error::config(format!("bad number '{}': {e}", fields[i])))
        };
        metrics.steps.push(
            fields[0]
                .parse()
                .map_err(|e| Error::config(format!("bad step '{}': {e}", fields[0])))?,
        );
        metrics.times.push(num(1)?);
        metrics.l_at_consensus.push(num(2)?);
        metrics.g_at_consensus.push(num(3)?);
        metrics.dist_to_theta_star.push(num(4)?);
        metrics.spread.push(num(5)?);
        metrics.v_hat.push(num(6)?);
        metrics.fourth_moment.push(num(7)?);
        for (k, series) in metrics.mass_in_ball.iter_mut().enumerate() {
            series.push(num(8 + k)?);
        }
    }
    Ok(metrics)
}

/// Final-state scalar metrics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FinalMetrics {
    pub l_consensus: f64,
    pub g_consensus: f64,
    pub dist_theta_star: f64,
    pub spread: f64,
    pub v_hat: f64,
    pub fourth_moment: f64,
}

/// The structured per-run summary record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub library_version: String,
    pub benchmark: String,
    pub mode: String,
    pub seed: u64,
    pub final_step: usize,
    pub final_consensus: Vec<f64>,
    pub final_metrics: FinalMetrics,
    pub mass_radii: Vec<f64>,
    pub initial_bump_mass: Vec<f64>,
    pub sup_fourth_moment: f64,
    pub metrics_sha256: String,
    pub wall_time_seconds: f64,
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn summarize(config: &FileConfig, output: &RunOutput, metrics_text: &str) -> Summary {
    let m = &output.metrics;
    let last = m.len() - 1;
    Summary {
        schema_version: METRICS_SCHEMA_VERSION,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        benchmark: config.benchmark.clone(),
        mode: config.mode.clone(),
        seed: config.seed,
        final_step: m.steps[last],
        final_consensus: m.final_consensus.clone(),
        final_metrics: FinalMetrics {
            l_consensus: m.l_at_consensus[last],
            g_consensus: m.g_at_consensus[last],
            dist_theta_star: m.dist_to_theta_star[last],
            spread: m.spread[last],
            v_hat: m.v_hat[last],
            fourth_moment: m.fourth_moment[last],
        },
        mass_radii: m.mass_radii.clone(),
        initial_bump_mass: m.initial_bump_mass.clone(),
        sup_fourth_moment: m.sup_fourth_moment(),
        metrics_sha256: sha256_hex(metrics_text),
        wall_time_seconds: output.wall_time.as_secs_f64(),
    }
}

/// Write `config.toml`, `metrics.csv`, and `summary.json` into `dir`.
pub fn write_archive(dir: &Path, config: &FileConfig, output: &RunOutput) -> Result<Summary> {
    std::fs::create_dir_all(dir)?;
    let metrics_text = metrics_csv(&output.metrics);
    let summary = summarize(config, output, &metrics_text);
    std::fs::write(dir.join("config.toml"), super::config::to_toml(config))?;
    std::fs::write(dir.join("metrics.csv"), &metrics_text)?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    Ok(summary)
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(dir.join("summary.json"))
        .map_err(|e| Error::config(format!("cannot read summary in {}: {e}", dir.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::config(format!("bad summary: {e}")))
}

pub fn read_metrics(dir: &Path) -> Result<RunMetrics> {
    let text = std::fs::read_to_string(dir.join("metrics.csv"))
        .map_err(|e| Error::config(format!("cannot read metrics in {}: {e}", dir.display())))?;
    parse_metrics_csv(&text)
}

pub fn read_config(dir: &Path) -> Result<FileConfig> {
    super::config::load(&dir.join("config.toml"), &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_csv_round_trip() {
        let m = RunMetrics {
            mass_radii: vec![0.5, 1.0],
            steps: vec![0, 2],
            times: vec![0.0, 0.1],
            l_at_consensus: vec![1.5, 0.25],
            g_at_consensus: vec![4.0, 3.5],
            dist_to_theta_star: vec![0.7, 0.01],
            spread: vec![2.0, 0.1],
            v_hat: vec![3.0, 0.4],
            fourth_moment: vec![10.0, 1.0],
            mass_in_ball: vec![vec![0.0, 0.5], vec![0.1, 0.9]],
            initial_bump_mass: vec![0.01, 0.05],
            final_consensus: vec![0.78, 0.62],
        };
        let text = metrics_csv(&m);
        assert!(text.starts_with("# scb2o-metrics schema_version=1\n"));
        let parsed = parse_metrics_csv(&text).unwrap();
        assert_eq!(parsed.steps, m.steps);
        assert_eq!(parsed.times, m.times);
        assert_eq!(parsed.mass_in_ball, m.mass_in_ball);
        // Bit-exact floats through the shortest round-trip formatter.
        assert_eq!(parsed.v_hat, m.v_hat);
    }

    #[test]
    fn sha_is_stable() {
        assert_eq!(
            sha256_hex("scb2o"),
            "e7621e04cb2a7e54347b8fb799d3ad6f7e8a9a070812eaa55f5f215297a23d19"
        );
    }
}
