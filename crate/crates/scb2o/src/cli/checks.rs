//! The diagnostics check registry behind `scb2o check`.
//!
//! Each check emits one record per verified inequality: a check id, an
//! invariant name, a reference slug, the two sides of the inequality, and a
//! verdict. Checks run either against a fresh run resolved from a config or
//! against a stored archive (where only the final state is available, some
//! checks verify less or skip).

use std::fmt;
use std::path::Path;

use crate::consensus;
use crate::diagnostics::{
    cutoff_monitor, decay_rate_fit, laplace_bound_check, mass_bound_check, theory_constants,
    MassTrajectory, DEFAULT_B4D, DEFAULT_VARTHETA,
};
use crate::dynamics::{run_observed, NoiseSource, RunMetrics, Stream};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::numeric;
use crate::quantile;

use super::archive;
use super::config::Resolved;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "PASS"),
            Verdict::Fail => write!(f, "FAIL"),
            Verdict::Skip => write!(f, "SKIP"),
        }
    }
}

/// One verified inequality.
#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub check: String,
    pub name: String,
    pub reference: String,
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: Verdict,
}

impl CheckRecord {
    pub fn line(&self) -> String {
        format!(
            "check={} name={} reference={} lhs={:e} rhs={:e} verdict={}",
            self.check, self.name, self.reference, self.lhs, self.rhs, self.verdict
        )
    }
}

pub const KNOWN_CHECKS: [&str; 8] = [
    "quantile-suite",
    "consensus-moment",
    "denominator-bound",
    "soft-hard-limit",
    "mass-bound",
    "laplace",
    "cutoff",
    "decay",
];

/// Run the named checks against a fresh run or an archive.
pub fn run_checks(
    names: &[String],
    resolved: Option<&Resolved>,
    archive_dir: Option<&Path>,
) -> Result<Vec<CheckRecord>> {
    if names.is_empty() {
        return Err(Error::config("empty check list"));
    }
    let mut records = Vec::new();
    for name in names {
        match name.as_str() {
            "quantile-suite" => records.extend(quantile_suite()?),
            "consensus-moment" => match (resolved, archive_dir) {
                (Some(r), _) => records.extend(consensus_moment_fresh(r)?),
                (None, Some(dir)) => records.extend(consensus_moment_archive(dir)?),
                (None, None) => return Err(Error::config("check needs a config or an archive")),
            },
            "denominator-bound" => match resolved {
                Some(r) => records.extend(denominator_bound_fresh(r)?),
                None => records.push(skip(name, "needs-fresh-run")),
            },
            "soft-hard-limit" => records.extend(soft_hard_limit(resolved)?),
            "mass-bound" => match (resolved, archive_dir) {
                (Some(r), _) => records.extend(mass_bound(r)?),
                (None, Some(dir)) => records.extend(mass_bound_archive(dir)?),
                (None, None) => return Err(Error::config("check needs a config or an archive")),
            },
            "laplace" => match resolved {
                Some(r) => records.extend(laplace(r)?),
                None => records.push(skip(name, "needs-fresh-run")),
            },
            "cutoff" => match (resolved, archive_dir) {
                (Some(r), _) => records.extend(cutoff_fresh(r)?),
                (None, Some(dir)) => records.extend(cutoff_archive(dir)?),
                (None, None) => return Err(Error::config("check needs a config or an archive")),
            },
            "decay" => match resolved {
                Some(r) => records.extend(decay(r)?),
                None => records.push(skip(name, "needs-fresh-run")),
            },
            other => {
                return Err(Error::config(format!(
                    "unknown check '{other}' (known: {})",
                    KNOWN_CHECKS.join(", ")
                )))
            }
        }
    }
    Ok(records)
}

fn skip(check: &str, reason: &str) -> CheckRecord {
    CheckRecord {
        check: check.to_string(),
        name: reason.to_string(),
        reference: reason.to_string(),
        lhs: f64::NAN,
        rhs: f64::NAN,
        verdict: Verdict::Skip,
    }
}

fn record(check: &str, name: &str, reference: &str, lhs: f64, rhs: f64, pass: bool) -> CheckRecord {
    CheckRecord {
        check: check.to_string(),
        name: name.to_string(),
        reference: reference.to_string(),
        lhs,
        rhs,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
    }
}

/// Randomized soft-quantile invariant sweep: residual tolerance, localization,
/// selection-mass identity, and inverse stability over 1000 instances.
fn quantile_suite() -> Result<Vec<CheckRecord>> {
    let noise = NoiseSource::new(0x5C_B2_01);
    let mut max_residual: f64 = 0.0;
    let mut max_loc_violation: f64 = f64::NEG_INFINITY;
    let mut max_mass_err: f64 = 0.0;
    let mut max_stab_ratio: f64 = 0.0;
    for case in 0..1000u64 {
        let n = 1 + (noise.uniform(Stream::Init, case, 0, 0) * 500.0) as usize;
        let beta = 0.01 + 0.98 * noise.uniform(Stream::Init, case, 1, 0);
        let tau = 10f64.powf(-4.0 * noise.uniform(Stream::Init, case, 2, 0));
        let clustered = noise.uniform(Stream::Init, case, 3, 0) < 0.5;
        let l: Vec<f64> = (0..n)
            .map(|i| {
                if clustered {
                    let which = noise.uniform(Stream::Init, case, 4, i as u64) < 0.5;
                    let center = if which { 0.2 } else { 0.8 };
                    center + 1e-3 * noise.standard_normal(Stream::Init, case, 5, i as u64)
                } else {
                    noise.uniform(Stream::Init, case, 6, i as u64)
                }
            })
            .collect();
        let sol = quantile::soft_quantile(&l, beta, tau)?;
        max_residual = max_residual.max(sol.residual);
        let l_min = l.iter().cloned().fold(f64::INFINITY, f64::min);
        let l_max = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z_beta = crate::selector::logit(beta);
        max_loc_violation = max_loc_violation
            .max(l_min + tau * z_beta - sol.q)
            .max(sol.q - (l_max + tau * z_beta));
        let eta = quantile::eta_weights(sol.q, &l, tau);
        max_mass_err = max_mass_err.max((numeric::mean(&eta) - beta).abs());

        // Inverse stability against a jittered copy.
        let l2: Vec<f64> = l
            .iter()
            .enumerate()
            .map(|(i, &v)| v + 0.05 * noise.uniform(Stream::Init, case, 7, i as u64))
            .collect();
        let (lhs, rhs) = quantile::inverse_stability_slack(&l, &l2, beta, tau)?;
        if lhs > 0.0 {
            max_stab_ratio = max_stab_ratio.max(lhs / (rhs * (1.0 + 1e-8)));
        }
    }
    Ok(vec![
        record("quantile-suite", "residual", "soft-quantile-residual", max_residual, 1e-12, max_residual <= 1e-12),
        record(
            "quantile-suite",
            "localization",
            "quantile-localization",
            max_loc_violation,
            1e-9,
            max_loc_violation <= 1e-9,
        ),
        record(
            "quantile-suite",
            "selection-mass",
            "selection-mass-identity",
            max_mass_err,
            1e-10,
            max_mass_err <= 1e-10,
        ),
        record(
            "quantile-suite",
            "inverse-stability",
            "quantile-inverse-stability",
            max_stab_ratio,
            1.0,
            max_stab_ratio <= 1.0,
        ),
    ])
}

fn replay_metrics(resolved: &Resolved) -> Result<(RunMetrics, Ensemble)> {
    let out = crate::dynamics::run(&resolved.run)?;
    Ok((out.metrics, out.final_ensemble))
}

/// `‖m‖₂⁴ ≤ C_m⁴ R₄` at every step of a fresh run (log-space ratio).
fn consensus_moment_fresh(resolved: &Resolved) -> Result<Vec<CheckRecord>> {
    let bounds = resolved
        .benchmark
        .objective
        .bounds()
        .ok_or_else(|| Error::config("consensus-moment needs declared bounds"))?;
    let params = resolved.run.params;
    let log_c_m = consensus::log_c_m(params.alpha(), params.beta(), bounds.g_min, bounds.g_max);
    let mut worst: f64 = f64::NEG_INFINITY;
    run_observed(&resolved.run, &mut |_, ensemble, report| {
        let m_norm = numeric::norm2(&report.m);
        let r4 = ensemble.fourth_moment();
        // ln(‖m‖⁴) − ln(C_m⁴ R₄) ≤ 0; degenerate all-at-origin gives −∞ ≤ 0.
        let margin = 4.0 * m_norm.ln() - (4.0 * log_c_m + r4.ln());
        if margin > worst {
            worst = margin;
        }
        Ok(())
    })?;
    Ok(vec![record(
        "consensus-moment",
        "log-margin",
        "consensus-moment",
        worst,
        0.0,
        worst <= 0.0,
    )])
}

/// Final-state consensus-moment check from a stored archive.
fn consensus_moment_archive(dir: &Path) -> Result<Vec<CheckRecord>> {
    let summary = archive::read_summary(dir)?;
    let config = archive::read_config(dir)?;
    let resolved = super::config::resolve(&config)?;
    let bounds = resolved
        .benchmark
        .objective
        .bounds()
        .ok_or_else(|| Error::config("consensus-moment needs declared bounds"))?;
    let params = resolved.run.params;
    let log_c_m = consensus::log_c_m(params.alpha(), params.beta(), bounds.g_min, bounds.g_max);
    let m_norm = numeric::norm2(&summary.final_consensus);
    let margin = 4.0 * m_norm.ln() - (4.0 * log_c_m + summary.final_metrics.fourth_moment.ln());
    Ok(vec![record(
        "consensus-moment",
        "log-margin-final",
        "consensus-moment",
        margin,
        0.0,
        margin <= 0.0,
    )])
}

/// `B ≥ b_G` and `‖A‖₂ ≤ a(R₄)` with empirical extremes, every step.
fn denominator_bound_fresh(resolved: &Resolved) -> Result<Vec<CheckRecord>> {
    let params = resolved.run.params;
    let mut min_b_margin: f64 = f64::INFINITY;
    let mut max_a_margin: f64 = f64::NEG_INFINITY;
    run_observed(&resolved.run, &mut |_, ensemble, report| {
        min_b_margin = min_b_margin.min(report.log_b - report.log_b_g);
        let g = ensemble.g_values();
        let g_min_emp = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let r4 = ensemble.fourth_moment();
        let log_a_bound = 0.5 * params.beta().ln() - params.alpha() * g_min_emp + 0.25 * r4.ln();
        max_a_margin = max_a_margin.max(report.log_a_norm - log_a_bound);
        Ok(())
    })?;
    let b_floor = (-1e-12f64).ln_1p();
    Ok(vec![
        record(
            "denominator-bound",
            "log-b-margin",
            "denominator-lower-witness",
            min_b_margin,
            b_floor,
            min_b_margin >= b_floor,
        ),
        record(
            "denominator-bound",
            "log-a-margin",
            "numerator-upper-witness",
            max_a_margin,
            1e-12,
            max_a_margin <= 1e-12,
        ),
    ])
}

/// Soft consensus converges to the hard consensus as τ ↓ 0 on frozen random
/// ensembles with an integer selection count.
fn soft_hard_limit(resolved: Option<&Resolved>) -> Result<Vec<CheckRecord>> {
    let alpha = resolved.map_or(30.0, |r| r.run.params.alpha());
    let noise = NoiseSource::new(0x5C_B2_02);
    let n = 100usize;
    let beta = 0.05;
    let mut max_final: f64 = 0.0;
    let mut monotone = true;
    for case in 0..50u64 {
        let positions: Vec<f64> =
            (0..2 * n).map(|i| 2.0 * noise.standard_normal(Stream::Init, case, 0, i as u64)).collect();
        let l: Vec<f64> = (0..n).map(|i| noise.uniform(Stream::Init, case, 1, i as u64)).collect();
        let g: Vec<f64> = (0..n).map(|i| noise.uniform(Stream::Init, case, 2, i as u64)).collect();
        let ensemble = Ensemble::from_parts(positions, 2, l, g)?;
        let hard = consensus::hard_consensus_point(&ensemble, alpha, beta)?;
        let mut prev = f64::INFINITY;
        for k in 1..=6 {
            let tau = 10f64.powi(-k);
            let params =
                crate::params::AlgorithmParams::new(alpha, beta, tau, 1.0, 1.0, 0.1, 1, n)?;
            let soft = consensus::consensus_point(&ensemble, &params)?;
            let dist = numeric::dist2(&soft.m, &hard.m);
            if dist > prev * (1.0 + 1e-12) {
                monotone = false;
            }
            prev = dist;
            if k == 6 {
                max_final = max_final.max(dist);
            }
        }
    }
    Ok(vec![
        record("soft-hard-limit", "monotone", "soft-hard-monotone", f64::from(u8::from(monotone)), 1.0, monotone),
        record("soft-hard-limit", "final-gap", "soft-hard-final", max_final, 1e-6, max_final <= 1e-6),
    ])
}

fn b0_from(resolved: &Resolved, sup_fourth: f64) -> Result<f64> {
    let objective = &resolved.benchmark.objective;
    let bounds = objective
        .bounds()
        .ok_or_else(|| Error::config("mass-bound needs declared bounds"))?;
    let params = resolved.run.params;
    let log_c_m = consensus::log_c_m(params.alpha(), params.beta(), bounds.g_min, bounds.g_max);
    let theta_star = objective
        .theta_star()
        .ok_or_else(|| Error::config("mass-bound needs theta_star"))?;
    Ok((log_c_m + 0.25 * sup_fourth.ln()).exp() + numeric::norm2(theta_star))
}

fn mass_bound_records(
    resolved: &Resolved,
    metrics: &RunMetrics,
    check: &str,
) -> Result<Vec<CheckRecord>> {
    if metrics.mass_radii.is_empty() {
        return Ok(vec![skip(check, "no-mass-radii")]);
    }
    let theta_star = resolved.benchmark.objective.theta_star().expect("validated").to_vec();
    let b0 = b0_from(resolved, metrics.sup_fourth_moment())?;
    let mut out = Vec::new();
    for (idx, &r) in metrics.mass_radii.iter().enumerate() {
        let traj = MassTrajectory::from_metrics(metrics, idx, resolved.run.params.n_particles());
        let rep = mass_bound_check(&traj, &theta_star, r, &resolved.run.params, 2, b0)?;
        let name = format!("ball-r{}", idx + 1);
        let (lhs, rhs) = match rep.first_violation {
            Some(i) => (rep.measured[i], rep.lower_bound[i]),
            None => (1.0, 0.0),
        };
        out.push(record(check, &name, "mass-lower-bound", lhs, rhs, rep.held));
    }
    Ok(out)
}

fn mass_bound(resolved: &Resolved) -> Result<Vec<CheckRecord>> {
    let (metrics, _) = replay_metrics(resolved)?;
    mass_bound_records(resolved, &metrics, "mass-bound")
}

fn mass_bound_archive(dir: &Path) -> Result<Vec<CheckRecord>> {
    let config = archive::read_config(dir)?;
    let resolved = super::config::resolve(&config)?;
    let mut metrics = archive::read_metrics(dir)?;
    let summary = archive::read_summary(dir)?;
    metrics.mass_radii = summary.mass_radii.clone();
    metrics.initial_bump_mass = summary.initial_bump_mass.clone();
    mass_bound_records(&resolved, &metrics, "mass-bound")
}

fn laplace(resolved: &Resolved) -> Result<Vec<CheckRecord>> {
    let objective = &resolved.benchmark.objective;
    if objective.geometry().is_none() || objective.lipschitz().is_none() {
        log::warn!("laplace check skipped: objective lacks geometry or Lipschitz constants");
        return Ok(vec![skip("laplace", "missing-geometry")]);
    }
    if resolved.run.params.tau() <= 0.0 {
        return Ok(vec![skip("laplace", "hard-mode")]);
    }
    let (_, final_ensemble) = replay_metrics(resolved)?;
    let rep = laplace_bound_check(&final_ensemble, &resolved.run.params, objective)?;
    if !rep.violated.is_empty() {
        let reason = format!("hypotheses-violated:{:?}", rep.violated);
        log::warn!("laplace check not applicable: {reason}");
        return Ok(vec![skip("laplace", &reason)]);
    }
    Ok(vec![record(
        "laplace",
        "domination",
        "quantiled-laplace-bound",
        rep.actual,
        rep.bound,
        rep.domination_holds,
    )])
}

fn cutoff_fresh(resolved: &Resolved) -> Result<Vec<CheckRecord>> {
    let (metrics, _) = replay_metrics(resolved)?;
    cutoff_records(resolved, &metrics)
}

fn cutoff_archive(dir: &Path) -> Result<Vec<CheckRecord>> {
    let config = archive::read_config(dir)?;
    let resolved = super::config::resolve(&config)?;
    let metrics = archive::read_metrics(dir)?;
    cutoff_records(&resolved, &metrics)
}

fn cutoff_records(resolved: &Resolved, metrics: &RunMetrics) -> Result<Vec<CheckRecord>> {
    let params = resolved.run.params;
    let mu4 = metrics.fourth_moment[0];
    let tc = theory_constants(
        &params,
        &resolved.benchmark.objective,
        params.horizon(),
        DEFAULT_B4D,
        mu4,
    )?;
    let sup = metrics.sup_fourth_moment();
    let m_level = 10.0 * sup;
    let rep = cutoff_monitor(&metrics.fourth_moment, None, m_level, &tc.c_bd)?;
    Ok(vec![
        record("cutoff", "omega-m", "fourth-moment-cutoff", sup, m_level, rep.omega_m_held),
        // Sanity in log space: sup X ≤ C_bd(T) (vacuously loose).
        record(
            "cutoff",
            "moment-sanity",
            "fourth-moment-level",
            sup.ln(),
            tc.c_bd.ln,
            sup.ln() <= tc.c_bd.ln,
        ),
    ])
}

fn decay(resolved: &Resolved) -> Result<Vec<CheckRecord>> {
    let (metrics, _) = replay_metrics(resolved)?;
    let steps = resolved.run.params.steps();
    let window = steps / 10..steps / 2;
    let fit = decay_rate_fit(&metrics, window, &resolved.run.params, 2, DEFAULT_VARTHETA)?;
    if !fit.informative {
        return Ok(vec![skip("decay", "non-informative-dissipativity")]);
    }
    Ok(vec![record(
        "decay",
        "rate",
        "lyapunov-decay-rate",
        fit.fitted_rate,
        fit.target_rate,
        fit.fitted_rate >= fit.target_rate,
    )])
}

/// Forced-violation helper for negative tests: corrupt a summary's final
/// consensus point in place.
#[doc(hidden)]
pub fn corrupt_summary_consensus(dir: &Path, value: f64) -> Result<()> {
    let mut summary = archive::read_summary(dir)?;
    for c in &mut summary.final_consensus {
        *c = value;
    }
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    Ok(())
}
