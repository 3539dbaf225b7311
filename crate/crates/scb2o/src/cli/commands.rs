//! Subcommand implementations for the `scb2o` binary.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bench::{self, baselines};
use crate::diagnostics::{theory_constants, DEFAULT_B4D};
use crate::dynamics::{run, Init, Mode, NoiseSource, RunConfig, Stream};
use crate::error::{Error, Result};
use crate::numeric;

use super::archive::{self, Summary};
use super::checks;
use super::config::{self, Resolved};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Execute a resolved run and write its archive into `out`.
pub fn execute_to_archive(resolved: &Resolved, out: &Path) -> Result<Summary> {
    let output = run(&resolved.run)?;
    archive::write_archive(out, &resolved.file, &output)
}

pub fn cmd_run(config_path: &Path, overrides: &[String], out: &Path) -> Result<()> {
    let file = config::load(config_path, overrides)?;
    let resolved = config::resolve(&file)?;
    let summary = execute_to_archive(&resolved, out)?;
    log::info!(
        "run complete: final L={:e} G={} dist={} spread={:e}",
        summary.final_metrics.l_consensus,
        summary.final_metrics.g_consensus,
        summary.final_metrics.dist_theta_star,
        summary.final_metrics.spread,
    );
    println!("archive written to {}", out.display());
    Ok(())
}

/// One grid cell of a sweep.
#[derive(Debug, Clone)]
struct SweepCell {
    label: String,
    value: String,
    seed: u64,
    dir: PathBuf,
    overrides: Vec<String>,
}

fn parse_list(list: &str) -> Vec<String> {
    list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

/// Derive a per-cell seed from the base seed and the cell index.
fn derive_cell_seed(base: u64, cell_index: u64) -> u64 {
    // splitmix-style avalanche of (base, index).
    let mut z = base ^ cell_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SWEEPABLE: [&str; 4] = ["xi", "beta", "n_particles", "seed"];

/// Returns `Ok(true)` when every cell succeeded.
pub fn cmd_sweep(
    config_path: &Path,
    overrides: &[String],
    sweep_spec: &str,
    seeds: Option<&str>,
    out: &Path,
) -> Result<bool> {
    let base = config::load(config_path, overrides)?;
    let (param, values_text) = sweep_spec
        .split_once('=')
        .ok_or_else(|| Error::config("sweep spec must be parameter=v1,v2,..."))?;
    let param = param.trim();
    if !SWEEPABLE.contains(&param) {
        return Err(Error::config(format!(
            "cannot sweep '{param}' (sweepable: {})",
            SWEEPABLE.join(", ")
        )));
    }
    let values = parse_list(values_text);
    if values.is_empty() {
        return Err(Error::config("empty sweep grid"));
    }
    let seed_list: Option<Vec<u64>> = match seeds {
        Some(text) => {
            let parsed: std::result::Result<Vec<u64>, _> =
                parse_list(text).iter().map(|s| s.parse()).collect();
            Some(parsed.map_err(|e| Error::config(format!("bad seed list: {e}")))?)
        }
        None => None,
    };

    // Build the grid: parameter values × seeds. Sweeping the seed itself uses
    // the value axis as the seed axis; with no explicit seed list, per-cell
    // seeds derive from (base seed, cell index).
    let mut cells = Vec::new();
    if param == "seed" {
        for v in &values {
            let seed: u64 = v.parse().map_err(|e| Error::config(format!("bad seed '{v}': {e}")))?;
            cells.push(SweepCell {
                label: "seed".to_string(),
                value: v.clone(),
                seed,
                dir: out.join(format!("seed={v}")),
                overrides: vec![format!("seed={seed}")],
            });
        }
    } else {
        for v in &values {
            match &seed_list {
                Some(seeds) => {
                    for &seed in seeds {
                        cells.push(SweepCell {
                            label: param.to_string(),
                            value: v.clone(),
                            seed,
                            dir: out.join(format!("{param}={v}")).join(format!("seed={seed}")),
                            overrides: vec![format!("{param}={v}"), format!("seed={seed}")],
                        });
                    }
                }
                None => {
                    let idx = cells.len() as u64;
                    let seed = derive_cell_seed(base.seed, idx);
                    cells.push(SweepCell {
                        label: param.to_string(),
                        value: v.clone(),
                        seed,
                        dir: out.join(format!("{param}={v}")).join(format!("seed={seed}")),
                        overrides: vec![format!("{param}={v}"), format!("seed={seed}")],
                    });
                }
            }
        }
    }

    std::fs::create_dir_all(out)?;
    let results: Vec<(SweepCell, Result<Summary>)> = cells
        .into_par_iter()
        .map(|cell| {
            let outcome = (|| {
                let mut all = overrides.to_vec();
                all.extend(cell.overrides.clone());
                let file = config::load(config_path, &all)?;
                let resolved = config::resolve(&file)?;
                execute_to_archive(&resolved, &cell.dir)
            })();
            (cell, outcome)
        })
        .collect();

    // Aggregate across seeds per parameter value, in grid order.
    let mut table = String::from(
        "parameter,value,seeds,failures,l_mean,l_std,l_min,l_max,g_mean,g_std,g_min,g_max,\
         dist_mean,dist_std,dist_min,dist_max,spread_mean,spread_std,spread_min,spread_max\n",
    );
    let mut seen_values: Vec<String> = Vec::new();
    for (cell, _) in &results {
        if !seen_values.contains(&cell.value) {
            seen_values.push(cell.value.clone());
        }
    }
    let mut any_failed = false;
    for value in &seen_values {
        let group: Vec<&(SweepCell, Result<Summary>)> =
            results.iter().filter(|(c, _)| &c.value == value).collect();
        let ok: Vec<&Summary> = group.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
        let failures = group.len() - ok.len();
        if failures > 0 {
            any_failed = true;
            for (cell, r) in &group {
                if let Err(e) = r {
                    log::error!("sweep cell {}={} seed {} failed: {e}", cell.label, cell.value, cell.seed);
                }
            }
        }
        let stats = |f: &dyn Fn(&Summary) -> f64| -> String {
            let xs: Vec<f64> = ok.iter().map(|s| f(s)).collect();
            if xs.is_empty() {
                return ",,,".to_string();
            }
            let mean = numeric::mean(&xs);
            let std = if xs.len() >= 2 { numeric::sample_variance(&xs).sqrt() } else { 0.0 };
            let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            format!("{mean},{std},{min},{max}")
        };
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            results[0].0.label,
            value,
            ok.len(),
            failures,
            stats(&|s| s.final_metrics.l_consensus),
            stats(&|s| s.final_metrics.g_consensus),
            stats(&|s| s.final_metrics.dist_theta_star),
            stats(&|s| s.final_metrics.spread),
        ));
    }
    std::fs::write(out.join("aggregate.csv"), table)?;
    println!(
        "sweep complete: {} cells, aggregate at {}",
        results.len(),
        out.join("aggregate.csv").display()
    );
    Ok(!any_failed)
}

pub fn cmd_check(
    config_path: Option<&Path>,
    overrides: &[String],
    archive_dir: Option<&Path>,
    checks_list: &str,
    out: Option<&Path>,
) -> Result<bool> {
    let names = parse_list(checks_list);
    if names.is_empty() {
        return Err(Error::config("empty check list"));
    }
    let resolved = match config_path {
        Some(p) => Some(config::resolve(&config::load(p, overrides)?)?),
        None => None,
    };
    if resolved.is_none() && archive_dir.is_none() {
        return Err(Error::config("check needs --config or --archive"));
    }
    let records = checks::run_checks(&names, resolved.as_ref(), archive_dir)?;
    let mut report = String::new();
    for r in &records {
        report.push_str(&r.line());
        report.push('\n');
        println!("{}", r.line());
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("check_report.txt"), report)?;
    }
    let failed: Vec<&checks::CheckRecord> =
        records.iter().filter(|r| r.verdict == checks::Verdict::Fail).collect();
    for f in &failed {
        eprintln!("FAILED: {} ({})", f.check, f.name);
    }
    Ok(failed.is_empty())
}

const METHODS: [&str; 4] = ["scb2o", "cb2o", "sbgd1", "vpbgd1"];

pub fn cmd_compare(
    benchmark_name: &str,
    methods_list: &str,
    seeds: Option<&str>,
    out: &Path,
) -> Result<()> {
    let methods = parse_list(methods_list);
    if methods.is_empty() {
        return Err(Error::config("no methods requested"));
    }
    for m in &methods {
        if !METHODS.contains(&m.as_str()) {
            return Err(Error::config(format!(
                "unknown method '{m}' (known: {})",
                METHODS.join(", ")
            )));
        }
    }
    let instance = bench::benchmark(benchmark_name)?;
    let seeds: Vec<u64> = match seeds {
        Some(text) => parse_list(text)
            .iter()
            .map(|s| s.parse().map_err(|e| Error::config(format!("bad seed '{s}': {e}"))))
            .collect::<Result<_>>()?,
        None => instance.default_seeds.clone(),
    };
    if seeds.is_empty() {
        return Err(Error::config("empty seed list"));
    }

    std::fs::create_dir_all(out)?;
    let mut series = String::from("method,seed,step,metric,value\n");
    let mut table = String::from(
        "method,seeds,f_mean,f_std,l_mean,l_std,dist_mean,dist_std,spread_mean,spread_std\n",
    );

    let theta_star = instance.objective.theta_star().expect("benchmarks declare theta_star");
    for method in &methods {
        #[derive(Default)]
        struct Finals {
            f: Vec<f64>,
            l: Vec<f64>,
            dist: Vec<f64>,
            spread: Vec<f64>,
        }
        let mut finals = Finals::default();
        for &seed in &seeds {
            match method.as_str() {
                "scb2o" | "cb2o" => {
                    let mut config = RunConfig::new(instance.default_params, instance.objective.clone());
                    config.mode = if method == "scb2o" { Mode::Soft } else { Mode::Hard };
                    if config.mode == Mode::Hard {
                        // Hard selection ignores τ; keep the same parameters
                        // otherwise.
                        config.params = crate::params::AlgorithmParams::new(
                            config.params.alpha(),
                            config.params.beta(),
                            0.0,
                            config.params.lambda(),
                            config.params.sigma(),
                            config.params.dt(),
                            config.params.steps(),
                            config.params.n_particles(),
                        )?;
                    }
                    config.seed = seed;
                    config.init = instance.default_init.clone();
                    config.mass_radii = instance.default_mass_radii.clone();
                    let output = run(&config)?;
                    let m = &output.metrics;
                    for row in 0..m.len() {
                        for (metric, value) in [
                            ("f", m.g_at_consensus[row]),
                            ("L", m.l_at_consensus[row]),
                            ("dist", m.dist_to_theta_star[row]),
                            ("spread", m.spread[row]),
                        ] {
                            series.push_str(&format!(
                                "{method},{seed},{},{metric},{value}\n",
                                m.steps[row]
                            ));
                        }
                    }
                    let last = m.len() - 1;
                    finals.f.push(m.g_at_consensus[last]);
                    finals.l.push(m.l_at_consensus[last]);
                    finals.dist.push(m.dist_to_theta_star[last]);
                    finals.spread.push(m.spread[last]);
                }
                "sbgd1" | "vpbgd1" => {
                    let grads = instance.gradients.clone().ok_or_else(|| {
                        Error::config(format!(
                            "benchmark '{benchmark_name}' has no analytic gradients for {method}"
                        ))
                    })?;
                    let kind = if method == "sbgd1" {
                        baselines::BaselineMethod::Sbgd1
                    } else {
                        baselines::BaselineMethod::Vpbgd1
                    };
                    // Same seed-specific draw as particle 0 of the consensus
                    // methods' initialization.
                    let noise = NoiseSource::new(seed);
                    let (loc, scale) = match instance.default_init {
                        Init::Gaussian { loc, scale } => (loc, scale),
                        _ => (0.0, 50.0),
                    };
                    let d = instance.objective.dim();
                    let x0: Vec<f64> = (0..d)
                        .map(|j| loc + scale * noise.standard_normal(Stream::Init, 0, 0, j as u64))
                        .collect();
                    let params = baselines::BaselineParams::default();
                    let steps = instance.default_params.steps();
                    let traj = baselines::run_baseline(kind, &x0, steps, &params, &grads)?;
                    for (step, x) in traj.iter().enumerate() {
                        for (metric, value) in [
                            ("f", (grads.upper)(x)),
                            ("L", (grads.lower)(x)),
                            ("dist", numeric::dist2(x, theta_star)),
                        ] {
                            series.push_str(&format!("{method},{seed},{step},{metric},{value}\n"));
                        }
                    }
                    let x = traj.last().expect("trajectory nonempty");
                    finals.f.push((grads.upper)(x));
                    finals.l.push((grads.lower)(x));
                    finals.dist.push(numeric::dist2(x, theta_star));
                }
                _ => unreachable!(),
            }
        }
        let cell = |xs: &[f64]| -> String {
            if xs.is_empty() {
                return ",".to_string();
            }
            let mean = numeric::mean(xs);
            let std = if xs.len() >= 2 { numeric::sample_variance(xs).sqrt() } else { 0.0 };
            format!("{mean},{std}")
        };
        table.push_str(&format!(
            "{method},{},{},{},{},{}\n",
            seeds.len(),
            cell(&finals.f),
            cell(&finals.l),
            cell(&finals.dist),
            cell(&finals.spread),
        ));
    }
    std::fs::write(out.join("compare.csv"), &table)?;
    std::fs::write(out.join("series.csv"), &series)?;
    print!("{table}");
    Ok(())
}

pub fn cmd_constants(
    config_path: &Path,
    overrides: &[String],
    b4d: Option<f64>,
    format: OutputFormat,
) -> Result<()> {
    let file = config::load(config_path, overrides)?;
    let resolved = config::resolve(&file)?;
    // μ₄ from the actual (deterministic) initial ensemble.
    let mut init = crate::dynamics::initial_ensemble_for(&resolved.run)?;
    init.refresh(&resolved.benchmark.objective)?;
    let mu4 = init.fourth_moment();
    let tc = theory_constants(
        &resolved.run.params,
        &resolved.benchmark.objective,
        resolved.run.params.horizon(),
        b4d.unwrap_or(DEFAULT_B4D),
        mu4,
    )?;
    match format {
        OutputFormat::Json => {
            let json = serde_json::json!({
                "c_m": {"value": tc.c_m.value, "ln": tc.c_m.ln, "overflowed": tc.c_m.overflowed},
                "b_g": {"value": tc.b_g.value, "ln": tc.b_g.ln, "overflowed": tc.b_g.overflowed},
                "a_r4": {"value": tc.a_r4.value, "ln": tc.a_r4.ln, "overflowed": tc.a_r4.overflowed},
                "kappa": tc.kappa,
                "k_bd": {"value": tc.k_bd.value, "ln": tc.k_bd.ln, "overflowed": tc.k_bd.overflowed},
                "c_bd": {"value": tc.c_bd.value, "ln": tc.c_bd.ln, "overflowed": tc.c_bd.overflowed},
                "b4d": tc.b4d,
                "mu4": tc.mu4,
                "a_lyap": tc.a_lyap,
                "b_lyap": tc.b_lyap,
                "c_d": tc.c_d,
            });
            println!("{}", serde_json::to_string_pretty(&json).expect("json"));
        }
        OutputFormat::Csv => {
            println!("constant,value,ln,overflowed");
            for (name, o) in [
                ("c_m", tc.c_m),
                ("b_g", tc.b_g),
                ("a_r4", tc.a_r4),
                ("k_bd", tc.k_bd),
                ("c_bd", tc.c_bd),
            ] {
                println!("{name},{},{},{}", o.value, o.ln, o.overflowed);
            }
            println!("kappa,{},,", tc.kappa);
            println!("b4d,{},,", tc.b4d);
            println!("mu4,{},,", tc.mu4);
            println!("a_lyap,{},,", tc.a_lyap);
            println!("b_lyap,{},,", tc.b_lyap);
            println!("c_d,{},,", tc.c_d);
        }
    }
    Ok(())
}
