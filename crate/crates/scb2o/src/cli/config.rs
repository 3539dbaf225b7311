//! Run-configuration files.
//!
//! The schema is a flat TOML key-value table with an embedded
//! `schema_version`. Unknown keys are errors, so typos fail loudly. In soft
//! mode the sharpness is specified either as `xi` (the user-facing knob,
//! `ξ = 1/(τα)`) or as `tau` directly; the resolved snapshot always carries
//! both. Units: `dt` and derived horizons are in the dynamics' time unit; all
//! other quantities are dimensionless.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench;
use crate::dynamics::{Init, Mode, RunConfig};
use crate::error::{Error, Result};
use crate::params::AlgorithmParams;

pub const SCHEMA_VERSION: u32 = 1;

fn default_mode() -> String {
    "soft".to_string()
}

fn default_init_kind() -> String {
    "gaussian".to_string()
}

fn default_init_scale() -> f64 {
    50.0
}

fn default_record_every() -> usize {
    1
}

fn default_mass_radii() -> Vec<f64> {
    vec![0.5]
}

fn default_workers() -> usize {
    1
}

/// The on-disk configuration schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub schema_version: u32,
    /// Benchmark name: `circle`, `star`, `rippled`, or a registered custom
    /// objective.
    pub benchmark: String,
    /// `soft` or `hard`.
    #[serde(default = "default_mode")]
    pub mode: String,
    pub alpha: f64,
    pub beta: f64,
    /// Sharpness `ξ = 1/(τα)` (soft mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    /// Selector temperature (soft mode alternative to `xi`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub lambda: f64,
    pub sigma: f64,
    /// Time step (time units).
    pub dt: f64,
    pub steps: usize,
    pub n_particles: usize,
    #[serde(default)]
    pub seed: u64,
    /// `gaussian` or `uniform`.
    #[serde(default = "default_init_kind")]
    pub init: String,
    #[serde(default)]
    pub init_loc: f64,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_hi: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Radii of the mass-in-ball series around `θ*`.
    #[serde(default = "default_mass_radii")]
    pub mass_radii: Vec<f64>,
    #[serde(default)]
    pub allow_overshoot: bool,
    /// Worker threads for parallel sections (results are identical at any
    /// worker count).
    #[serde(default = "default_workers")]
    pub workers: usize,
}

/// A fully validated configuration: the normalized snapshot plus the
/// executable [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Snapshot with both `xi` and `tau` populated in soft mode.
    pub file: FileConfig,
    pub run: RunConfig,
    pub benchmark: bench::BenchmarkInstance,
    pub workers: usize,
}

/// Parse a config file and apply `key=value` overrides.
pub fn load(path: &Path, overrides: &[String]) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    from_str_with_overrides(&text, overrides)
}

/// Parse config text and apply `key=value` overrides.
pub fn from_str_with_overrides(text: &str, overrides: &[String]) -> Result<FileConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| Error::config(format!("config parse error: {e}")))?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override '{item}' is not key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        // Accept any TOML literal; bare words fall back to strings so users
        // can write mode=hard without quoting.
        let value = match format!("v = {raw}").parse::<toml::Table>() {
            Ok(t) => t["v"].clone(),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        table.insert(key.to_string(), value);
    }
    let config: FileConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Error::config(format!("config error: {e}")))?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(Error::config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    Ok(config)
}

/// Serialize a configuration snapshot.
pub fn to_toml(config: &FileConfig) -> String {
    toml::to_string(config).expect("config serializes")
}

/// Validate, normalize, and translate into an executable run.
pub fn resolve(config: &FileConfig) -> Result<Resolved> {
    let mut normalized = config.clone();

    let mode = match config.mode.as_str() {
        "soft" => Mode::Soft,
        "hard" => Mode::Hard,
        other => return Err(Error::config(format!("mode must be soft or hard, got '{other}'"))),
    };

    let tau = match mode {
        Mode::Hard => {
            if config.xi.is_some() || config.tau.is_some() {
                return Err(Error::config("hard mode takes neither xi nor tau"));
            }
            0.0
        }
        Mode::Soft => {
            if !(config.alpha.is_finite() && config.alpha > 0.0) {
                return Err(Error::config(format!("alpha must be positive, got {}", config.alpha)));
            }
            let tau = match (config.xi, config.tau) {
                (Some(xi), None) => {
                    if !(xi.is_finite() && xi > 0.0) {
                        return Err(Error::config(format!("xi must be positive, got {xi}")));
                    }
                    1.0 / (xi * config.alpha)
                }
                (None, Some(tau)) => tau,
                (Some(xi), Some(tau)) => {
                    if (xi * tau * config.alpha - 1.0).abs() > 1e-9 {
                        return Err(Error::config(format!(
                            "xi and tau are inconsistent: xi*tau*alpha = {}",
                            xi * tau * config.alpha
                        )));
                    }
                    tau
                }
                (None, None) => {
                    return Err(Error::config("soft mode requires xi or tau"));
                }
            };
            // Echo both knobs into the snapshot.
            normalized.tau = Some(tau);
            normalized.xi = Some(1.0 / (tau * config.alpha));
            tau
        }
    };

    let params = AlgorithmParams::new(
        config.alpha,
        config.beta,
        tau,
        config.lambda,
        config.sigma,
        config.dt,
        config.steps,
        config.n_particles,
    )?;

    let init = match config.init.as_str() {
        "gaussian" => Init::Gaussian { loc: config.init_loc, scale: config.init_scale },
        "uniform" => {
            let lo = config
                .init_lo
                .ok_or_else(|| Error::config("uniform init requires init_lo"))?;
            let hi = config
                .init_hi
                .ok_or_else(|| Error::config("uniform init requires init_hi"))?;
            Init::Uniform { lo, hi }
        }
        other => {
            return Err(Error::config(format!(
                "init must be gaussian or uniform, got '{other}'"
            )))
        }
    };

    if config.workers == 0 {
        return Err(Error::config("workers must be positive"));
    }

    let benchmark = bench::benchmark(&config.benchmark)?;
    let mut run = RunConfig::new(params, benchmark.objective.clone());
    run.mode = mode;
    run.seed = config.seed;
    run.init = init;
    run.record_every = config.record_every;
    run.mass_radii = config.mass_radii.clone();
    run.allow_overshoot = config.allow_overshoot;

    Ok(Resolved { file: normalized, run, benchmark, workers: config.workers })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1
benchmark = "circle"
mode = "soft"
alpha = 30.0
beta = 0.05
xi = 10000.0
lambda = 1.0
sigma = 1.0
dt = 0.05
steps = 600
n_particles = 100
seed = 0
"#;

    #[test]
    fn parse_resolve_and_round_trip() {
        let config = from_str_with_overrides(BASE, &[]).unwrap();
        let resolved = resolve(&config).unwrap();
        assert!(resolved.file.tau.is_some());
        assert!((resolved.run.params.tau() - 1.0 / (1e4 * 30.0)).abs() < 1e-18);

        // Round trip of the resolved snapshot is a fixed point.
        let text = to_toml(&resolved.file);
        let reparsed = from_str_with_overrides(&text, &[]).unwrap();
        assert_eq!(reparsed, resolved.file);
        let resolved2 = resolve(&reparsed).unwrap();
        assert_eq!(to_toml(&resolved2.file), text);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{BASE}\nsgima = 2.0\n");
        let err = from_str_with_overrides(&text, &[]).unwrap_err();
        assert!(err.to_string().contains("sgima"), "{err}");
    }

    #[test]
    fn beta_out_of_range_message() {
        let config = from_str_with_overrides(BASE, &["beta=1.5".to_string()]).unwrap();
        let err = resolve(&config).unwrap_err();
        assert!(err.to_string().contains("beta out of (0,1)"), "{err}");
    }

    #[test]
    fn overrides_accept_bare_strings() {
        let config =
            from_str_with_overrides(BASE, &["mode=hard".into(), "xi=".into()]).unwrap_err();
        // Empty value is not valid TOML and not a valid number for xi.
        let _ = config;
        let config = from_str_with_overrides(
            BASE,
            &["seed=7".into(), "n_particles=25".into()],
        )
        .unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.n_particles, 25);
    }

    #[test]
    fn hard_mode_rejects_sharpness_knobs() {
        let config = from_str_with_overrides(BASE, &["mode=hard".into()]).unwrap();
        assert!(resolve(&config).is_err());
        let text = BASE.replace("xi = 10000.0", "");
        let config = from_str_with_overrides(&text, &["mode=hard".into()]).unwrap();
        let resolved = resolve(&config).unwrap();
        assert_eq!(resolved.run.params.tau(), 0.0);
        assert!(resolved.file.xi.is_none());
    }

    #[test]
    fn soft_mode_requires_a_sharpness_knob() {
        let text = BASE.replace("xi = 10000.0", "");
        let config = from_str_with_overrides(&text, &[]).unwrap();
        let err = resolve(&config).unwrap_err();
        assert!(err.to_string().contains("xi or tau"));
    }
}
