//! The Euler–Maruyama particle loop.
//!
//! One step of the discretization moves every particle toward the consensus
//! point and diffuses it isotropically with amplitude proportional to its
//! distance from the consensus:
//!
//! ```text
//! θᵢ ← θᵢ − λΔt (θᵢ − m) + σ√Δt ‖θᵢ − m‖₂ Bᵢₖ,     Bᵢₖ ~ N(0, I_d)
//! ```
//!
//! All randomness flows from a counter-based [`NoiseSource`], so a run is a
//! pure function of its configuration: identical config and seed reproduce
//! metrics bit-for-bit at any worker count.

mod noise;

pub use noise::{normal_quantile, NoiseSource, Stream};

use rayon::prelude::*;

use crate::consensus::{self, ConsensusReport};
use crate::diagnostics::bump_mass;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::numeric;
use crate::objective::ObjectiveSpec;
use crate::params::AlgorithmParams;

/// Consensus selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Soft quantile selection at temperature `τ > 0`.
    Soft,
    /// Hard rank cut at `⌈βN⌉`.
    Hard,
}

/// Initial particle placement.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// i.i.d. `N(loc, scale² I_d)` per coordinate.
    Gaussian { loc: f64, scale: f64 },
    /// i.i.d. uniform on `[lo, hi]` per coordinate.
    Uniform { lo: f64, hi: f64 },
    /// Explicit row-major `n × d` matrix (regression fixtures).
    Explicit(Vec<f64>),
}

/// Full specification of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: AlgorithmParams,
    pub objective: ObjectiveSpec,
    pub mode: Mode,
    pub seed: u64,
    pub init: Init,
    /// Record a metrics row every this many steps (the final state is always
    /// recorded).
    pub record_every: usize,
    /// Radii for the mass-in-ball series around `θ*`.
    pub mass_radii: Vec<f64>,
    /// Permit `λΔt > 1` (overshooting drift); refused by default.
    pub allow_overshoot: bool,
}

impl RunConfig {
    pub fn new(params: AlgorithmParams, objective: ObjectiveSpec) -> Self {
        Self {
            params,
            objective,
            mode: Mode::Soft,
            seed: 0,
            init: Init::Gaussian { loc: 0.0, scale: 50.0 },
            record_every: 1,
            mass_radii: vec![0.5],
            allow_overshoot: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.record_every == 0 {
            return Err(Error::config("record_every must be positive"));
        }
        if self.mode == Mode::Soft && self.params.tau() <= 0.0 {
            return Err(Error::config("soft mode requires tau > 0"));
        }
        let overshoot = self.params.lambda() * self.params.dt();
        if overshoot > 1.0 && !self.allow_overshoot {
            return Err(Error::config(format!(
                "lambda*dt = {overshoot} > 1 overshoots the drift; set allow_overshoot to proceed"
            )));
        }
        if self.objective.theta_star().is_none() {
            return Err(Error::config(
                "objective must declare theta_star so distance metrics are defined",
            ));
        }
        if let Init::Explicit(m) = &self.init {
            let expected = self.params.n_particles() * self.objective.dim();
            if m.len() != expected {
                return Err(Error::config(format!(
                    "explicit init has {} entries, expected {expected}",
                    m.len()
                )));
            }
        }
        if self.mass_radii.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
            return Err(Error::config("mass radii must be positive"));
        }
        Ok(())
    }
}

/// Per-run time series, recorded every `record_every` steps plus the final
/// state. Deterministic: a pure function of the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub mass_radii: Vec<f64>,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub l_at_consensus: Vec<f64>,
    pub g_at_consensus: Vec<f64>,
    pub dist_to_theta_star: Vec<f64>,
    pub spread: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub fourth_moment: Vec<f64>,
    /// `mass_in_ball[radius_index][row]`.
    pub mass_in_ball: Vec<Vec<f64>>,
    /// Smooth-bump mass at `t = 0`, one entry per radius.
    pub initial_bump_mass: Vec<f64>,
    /// Consensus point of the final ensemble.
    pub final_consensus: Vec<f64>,
}

impl RunMetrics {
    fn with_radii(mass_radii: Vec<f64>) -> Self {
        let k = mass_radii.len();
        Self {
            mass_radii,
            steps: Vec::new(),
            times: Vec::new(),
            l_at_consensus: Vec::new(),
            g_at_consensus: Vec::new(),
            dist_to_theta_star: Vec::new(),
            spread: Vec::new(),
            v_hat: Vec::new(),
            fourth_moment: Vec::new(),
            mass_in_ball: vec![Vec::new(); k],
            initial_bump_mass: Vec::new(),
            final_consensus: Vec::new(),
        }
    }

    /// Number of recorded rows.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Largest recorded fourth moment.
    pub fn sup_fourth_moment(&self) -> f64 {
        self.fourth_moment.iter().cloned().fold(0.0, f64::max)
    }
}

/// Everything a run produces beyond the deterministic metrics.
#[derive(Debug)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    /// Final particle state (for ensemble-level diagnostics).
    pub final_ensemble: Ensemble,
    pub wall_time: std::time::Duration,
}

/// One Euler–Maruyama step of every particle toward the consensus point `m`.
///
/// Each particle uses its own noise vector indexed by `(step k, particle i)`;
/// a particle exactly at `m` is a fixed point of both the drift and the
/// diffusion (`D(0) = 0`).
pub fn em_step(
    ensemble: &Ensemble,
    m: &[f64],
    params: &AlgorithmParams,
    noise: &NoiseSource,
    k: usize,
) -> Result<Ensemble> {
    if m.len() != ensemble.dim() {
        return Err(Error::domain("consensus point dimension mismatch"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("consensus point must be finite"));
    }
    let d = ensemble.dim();
    let lambda_dt = params.lambda() * params.dt();
    let noise_scale = params.sigma() * params.dt().sqrt();

    let rows: Vec<Vec<f64>> = (0..ensemble.len())
        .into_par_iter()
        .map(|i| {
            let x = ensemble.position(i);
            let mut diff = vec![0.0; d];
            for j in 0..d {
                diff[j] = x[j] - m[j];
            }
            let norm = numeric::norm2(&diff);
            let mut out = vec![0.0; d];
            for j in 0..d {
                let b = noise.standard_normal(Stream::Step, k as u64, i as u64, j as u64);
                out[j] = x[j] - lambda_dt * diff[j] + noise_scale * norm * b;
            }
            out
        })
        .collect();

    let mut positions = Vec::with_capacity(ensemble.len() * d);
    for (i, row) in rows.iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: k,
                particle: i,
                message: "particle position became non-finite".to_string(),
            });
        }
        positions.extend_from_slice(row);
    }
    let mut next = Ensemble::new(positions, d)?;
    next.set_step_index(k + 1);
    Ok(next)
}

/// Materialize the initial ensemble a config's seed produces (the exact state
/// a run starts from).
pub fn initial_ensemble_for(config: &RunConfig) -> Result<Ensemble> {
    initial_ensemble(config, &NoiseSource::new(config.seed))
}

fn initial_ensemble(config: &RunConfig, noise: &NoiseSource) -> Result<Ensemble> {
    let n = config.params.n_particles();
    let d = config.objective.dim();
    let positions = match &config.init {
        Init::Gaussian { loc, scale } => {
            if !(scale.is_finite() && *scale >= 0.0) {
                return Err(Error::config("gaussian init scale must be nonnegative"));
            }
            (0..n * d)
                .map(|idx| {
                    let (i, j) = (idx / d, idx % d);
                    loc + scale * noise.standard_normal(Stream::Init, 0, i as u64, j as u64)
                })
                .collect()
        }
        Init::Uniform { lo, hi } => {
            #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN endpoints
            if !(lo <= hi) {
                return Err(Error::config("uniform init requires lo <= hi"));
            }
            (0..n * d)
                .map(|idx| {
                    let (i, j) = (idx / d, idx % d);
                    lo + (hi - lo) * noise.uniform(Stream::Init, 0, i as u64, j as u64)
                })
                .collect()
        }
        Init::Explicit(m) => m.clone(),
    };
    Ensemble::new(positions, d)
}

fn consensus_for(ensemble: &Ensemble, config: &RunConfig) -> Result<ConsensusReport> {
    match config.mode {
        Mode::Soft => consensus::consensus_point(ensemble, &config.params),
        Mode::Hard => {
            consensus::hard_consensus_point(ensemble, config.params.alpha(), config.params.beta())
        }
    }
}

fn record_row(
    metrics: &mut RunMetrics,
    config: &RunConfig,
    ensemble: &Ensemble,
    report: &ConsensusReport,
    k: usize,
) {
    let theta_star = config.objective.theta_star().expect("validated");
    metrics.steps.push(k);
    metrics.times.push(k as f64 * config.params.dt());
    metrics.l_at_consensus.push(config.objective.lower_at(&report.m));
    metrics.g_at_consensus.push(config.objective.upper_at(&report.m));
    metrics.dist_to_theta_star.push(numeric::dist2(&report.m, theta_star));
    metrics.spread.push(ensemble.coordinate_spread());
    metrics.v_hat.push(ensemble.half_second_moment_about(theta_star));
    metrics.fourth_moment.push(ensemble.fourth_moment());
    for (series, &r) in metrics.mass_in_ball.iter_mut().zip(&config.mass_radii) {
        series.push(ensemble.mass_in_ball(theta_star, r));
    }
}

/// Execute a full run.
///
/// At every step the objective caches are refreshed, the consensus point is
/// computed (soft or hard per the configured mode), metrics are recorded on
/// the configured cadence, and all particles take one Euler–Maruyama step.
/// Errors carry the step index at which they occurred.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    run_observed(config, &mut |_, _, _| Ok(()))
}

/// [`run`] with a per-step observer, invoked at every step `k = 0..=K` with
/// the current ensemble and its consensus report (before the update at `k`).
/// Observer errors abort the run.
pub fn run_observed(
    config: &RunConfig,
    observer: &mut dyn FnMut(usize, &Ensemble, &ConsensusReport) -> Result<()>,
) -> Result<RunOutput> {
    config.validate()?;
    let start = std::time::Instant::now();
    let noise = NoiseSource::new(config.seed);
    let theta_star = config.objective.theta_star().expect("validated").to_vec();

    let mut ensemble = initial_ensemble(config, &noise)?;
    ensemble.refresh(&config.objective)?;

    let mut metrics = RunMetrics::with_radii(config.mass_radii.clone());
    metrics.initial_bump_mass = config
        .mass_radii
        .iter()
        .map(|&r| bump_mass(&ensemble, &theta_star, r))
        .collect();

    let steps = config.params.steps();
    for k in 0..steps {
        let report = consensus_for(&ensemble, config)?;
        if k % config.record_every == 0 {
            record_row(&mut metrics, config, &ensemble, &report, k);
        }
        observer(k, &ensemble, &report)?;
        ensemble = em_step(&ensemble, &report.m, &config.params, &noise, k)?;
        ensemble.refresh(&config.objective)?;
    }
    let final_report = consensus_for(&ensemble, config)?;
    record_row(&mut metrics, config, &ensemble, &final_report, steps);
    observer(steps, &ensemble, &final_report)?;
    metrics.final_consensus = final_report.m.clone();

    Ok(RunOutput { metrics, final_ensemble: ensemble, wall_time: start.elapsed() })
}

/// One point of the self-averaging study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub n_particles: usize,
    /// Across-seed sample variance of the final consensus point, summed over
    /// coordinates.
    pub variance: f64,
}

/// Across-seed variance of the final consensus point as the particle count
/// grows: the empirical surrogate for mean-field self-averaging.
pub fn variance_scaling_study(
    base: &RunConfig,
    n_values: &[usize],
    seeds: &[u64],
) -> Result<Vec<ScalingPoint>> {
    if n_values.is_empty() {
        return Err(Error::config("at least one particle count required"));
    }
    if seeds.len() < 2 {
        return Err(Error::config(
            "a variance needs at least two seeds; eight or more recommended",
        ));
    }
    let mut out = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let finals: Vec<Vec<f64>> = seeds
            .par_iter()
            .map(|&seed| {
                let mut config = base.clone();
                config.params = config.params.with_n_particles(n)?;
                config.seed = seed;
                Ok(run(&config)?.metrics.final_consensus)
            })
            .collect::<Result<_>>()?;
        let d = base.objective.dim();
        let mut variance = 0.0;
        for j in 0..d {
            let coord: Vec<f64> = finals.iter().map(|c| c[j]).collect();
            variance += numeric::sample_variance(&coord);
        }
        out.push(ScalingPoint { n_particles: n, variance });
    }
    Ok(out)
}
