//! Certifiable theory diagnostics.
//!
//! This module evaluates the closed-form constants the convergence analysis
//! produces and checks the quantitative statements that are testable at desk
//! scale: the consensus-moment certificate, the denominator/numerator bound
//! witnesses, the mass lower bound near the target, domination by the
//! quantiled Laplace bound, the fourth-moment cutoff, and the exponential
//! decay-rate fit for the Lyapunov functional.
//!
//! Several constants are astronomically large at experiment scale (they
//! involve `e^{α(G_max − G_min)}` at `α = 30`). Anything that can overflow an
//! `f64` is carried as an [`Overflowable`]: the natural logarithm stays exact
//! while the value saturates, and an explicit flag records the saturation.

use std::ops::Range;

use crate::consensus;
use crate::dynamics::RunMetrics;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::numeric::{self, log_add_exp};
use crate::objective::ObjectiveSpec;
use crate::params::AlgorithmParams;
use crate::quantile;
use crate::selector::{logit, sigmoid};

/// Default BDG constant `B_{4,d}`; any fixed admissible constant is
/// acceptable, and the value only scales reported constants, never the
/// pass/fail of empirical checks.
pub const DEFAULT_B4D: f64 = 36.0;

/// Default interpolation parameter `ϑ` for decay-rate targets.
pub const DEFAULT_VARTHETA: f64 = 0.5;

/// A positive quantity that may exceed `f64::MAX`.
///
/// `ln` is always finite when the quantity itself is a finite real (even when
/// its value saturates to `+∞`); `overflowed` records the saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overflowable {
    pub value: f64,
    pub ln: f64,
    pub overflowed: bool,
}

impl Overflowable {
    pub fn from_ln(ln: f64) -> Self {
        let value = ln.exp();
        Self { value, ln, overflowed: ln.is_finite() && !value.is_finite() }
    }

    pub fn from_value(value: f64) -> Self {
        Self { value, ln: value.ln(), overflowed: false }
    }
}

/// `ln(1 + e^x)` without overflow.
fn ln_1p_exp(x: f64) -> f64 {
    if x > 36.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// The explicit constants of the analysis for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConstants {
    /// Consensus-moment constant `C_m = β^{−1/4} e^{α(G_max−G_min)}`.
    pub c_m: Overflowable,
    /// Denominator witness `b_G = β e^{−α G_max}`.
    pub b_g: Overflowable,
    /// Numerator bound `a(R₄) = β^{1/2} e^{−α G_min} R₄^{1/4}` evaluated at
    /// the initial fourth moment `R₄ = μ₄`.
    pub a_r4: Overflowable,
    /// Quantile stability `κ = c_s/τ` over the declared value range of `L`.
    pub kappa: f64,
    /// Fourth-moment growth rate `K_bd(T) = 216(1+C_m⁴)(λ⁴T³ + σ⁴ B_{4,d} d² T)`.
    pub k_bd: Overflowable,
    /// Fourth-moment level `C_bd(T) = 54 μ₄ exp(K_bd(T)·T)`; its logarithm can
    /// itself overflow, in which case `ln` is `+∞` and the flag is set.
    pub c_bd: Overflowable,
    /// The BDG constant used.
    pub b4d: f64,
    /// Initial fourth moment `μ₄`.
    pub mu4: f64,
    /// Lyapunov drift rate `a = 2λ − dσ²`.
    pub a_lyap: f64,
    /// Lyapunov cross term `b = √2(λ + dσ²)`.
    pub b_lyap: f64,
    /// Lyapunov noise floor `c_d = dσ²/2`.
    pub c_d: f64,
}

/// Evaluate every closed-form constant for the given parameters and declared
/// objective bounds over horizon `T`.
pub fn theory_constants(
    params: &AlgorithmParams,
    objective: &ObjectiveSpec,
    horizon_t: f64,
    b4d: f64,
    mu4: f64,
) -> Result<TheoryConstants> {
    let bounds = objective
        .bounds()
        .ok_or_else(|| Error::config("theory constants require declared objective bounds"))?;
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN inputs
    if !(horizon_t > 0.0 && b4d > 0.0 && mu4 >= 0.0) {
        return Err(Error::config("horizon, b4d must be positive and mu4 nonnegative"));
    }
    let (alpha, beta) = (params.alpha(), params.beta());
    let (lambda, sigma) = (params.lambda(), params.sigma());
    let d = objective.dim() as f64;

    let ln_c_m = -0.25 * beta.ln() + alpha * (bounds.g_max - bounds.g_min);
    let ln_b_g = beta.ln() - alpha * bounds.g_max;
    let ln_a_r4 = 0.5 * beta.ln() - alpha * bounds.g_min + 0.25 * mu4.ln();

    let kappa = if params.tau() > 0.0 {
        quantile::stability_constants(bounds.l_min, bounds.l_max, beta, params.tau()).kappa
    } else {
        f64::INFINITY
    };

    // K_bd = 216(1+C_m⁴)(λ⁴T³ + σ⁴ B_{4,d} d² T), assembled in log space so
    // C_m⁴ may exceed f64 range.
    let poly = lambda.powi(4) * horizon_t.powi(3) + sigma.powi(4) * b4d * d * d * horizon_t;
    let ln_k_bd = 216.0f64.ln() + ln_1p_exp(4.0 * ln_c_m) + poly.ln();
    let k_bd = Overflowable::from_ln(ln_k_bd);

    // ln C_bd = ln 54 + ln μ₄ + K_bd·T; the product K_bd·T may overflow, in
    // which case even the logarithm saturates.
    let k_bd_t = if k_bd.value.is_finite() {
        k_bd.value * horizon_t
    } else {
        (ln_k_bd + horizon_t.ln()).exp()
    };
    let ln_c_bd = 54.0f64.ln() + mu4.ln() + k_bd_t;
    let c_bd = Overflowable { value: ln_c_bd.exp(), ln: ln_c_bd, overflowed: !ln_c_bd.is_finite() || !ln_c_bd.exp().is_finite() };

    Ok(TheoryConstants {
        c_m: Overflowable::from_ln(ln_c_m),
        b_g: Overflowable::from_ln(ln_b_g),
        a_r4: Overflowable::from_ln(ln_a_r4),
        kappa,
        k_bd,
        c_bd,
        b4d,
        mu4,
        a_lyap: 2.0 * lambda - d * sigma * sigma,
        b_lyap: std::f64::consts::SQRT_2 * (lambda + d * sigma * sigma),
        c_d: d * sigma * sigma / 2.0,
    })
}

/// Smooth bump supported on `B_r(center)`:
/// `exp(1 − r²/(r² − ‖θ−center‖²))` inside, 0 on and outside the boundary.
pub fn bump_value(dist_sq: f64, r: f64) -> f64 {
    let r_sq = r * r;
    if dist_sq < r_sq {
        (1.0 - r_sq / (r_sq - dist_sq)).exp()
    } else {
        0.0
    }
}

/// Mean of the bump over an ensemble: `(1/N) Σ φ_r(θᵢ)`.
pub fn bump_mass(ensemble: &Ensemble, center: &[f64], r: f64) -> f64 {
    let mut acc = numeric::NeumaierSum::new();
    for x in ensemble.iter_positions() {
        acc.add(bump_value(numeric::dist2_sq(x, center), r));
    }
    acc.value() / ensemble.len() as f64
}

/// Smallest `c ∈ (1/2, 1)` on a grid of 10⁴ points with
/// `d(1−c)² ≤ c(2c−1)`.
pub fn admissible_c(d: usize) -> Result<f64> {
    let steps = 10_000;
    for k in 1..steps {
        let c = 0.5 + 0.5 * k as f64 / steps as f64;
        if d as f64 * (1.0 - c) * (1.0 - c) <= c * (2.0 * c - 1.0) {
            return Ok(c);
        }
    }
    Err(Error::domain(format!(
        "no admissible c in (1/2,1) for dimension {d}"
    )))
}

/// Ball-mass trajectory extracted from a run.
#[derive(Debug, Clone)]
pub struct MassTrajectory<'a> {
    pub times: &'a [f64],
    pub measured_mass: &'a [f64],
    pub initial_bump_mass: f64,
    pub n_particles: usize,
}

impl<'a> MassTrajectory<'a> {
    /// View of the mass series for the radius at `radius_index` in `metrics`.
    pub fn from_metrics(metrics: &'a RunMetrics, radius_index: usize, n_particles: usize) -> Self {
        Self {
            times: &metrics.times,
            measured_mass: &metrics.mass_in_ball[radius_index],
            initial_bump_mass: metrics.initial_bump_mass[radius_index],
            n_particles,
        }
    }
}

/// Outcome of the mass-lower-bound check.
#[derive(Debug, Clone)]
pub struct MassBoundReport {
    pub r: f64,
    /// The grid-selected constant `c ∈ (1/2, 1)`.
    pub c: f64,
    /// Consensus-excursion bound `B₀` supplied by the caller.
    pub b0: f64,
    pub k1: Overflowable,
    pub k2: Overflowable,
    /// Decay rate `p = 2·max(K₁, K₂)`.
    pub p: Overflowable,
    pub initial_bump_mass: f64,
    /// `e^{−pt}·(initial bump mass)` per recorded step.
    pub lower_bound: Vec<f64>,
    /// Measured `ρ̂_t(B_r(θ*))` per recorded step.
    pub measured: Vec<f64>,
    /// Particle count the finite-`N` proxy used.
    pub n_particles: usize,
    /// Whether the bound held at every recorded step.
    pub held: bool,
    /// Index of the first violated step, when any.
    pub first_violation: Option<usize>,
}

/// Check the mass lower bound `ρ̂_t(B_r(θ*)) ≥ e^{−pt}·∫φ_r dρ̂₀` along a
/// recorded trajectory.
///
/// `b0` bounds `‖m(ρ_t) − θ*‖₂` over the horizon; callers typically build it
/// from the consensus-moment constant and the measured supremum of the fourth
/// moment (`C_m·sup_t R₄(t)^{1/4} + ‖θ*‖₂`). The decay constants follow the
/// closed forms
///
/// ```text
/// K₁ = 2λ(cr + B₀√c)/((1−c)² r) + 2σ²(cr² + B₀²)(2c + d)/((1−c)⁴ r²),
/// K₂ = λ²/(σ² c(2c−1)),       p = 2 max{K₁, K₂},
/// ```
///
/// assembled in log space because `B₀²` routinely overflows.
pub fn mass_bound_check(
    traj: &MassTrajectory<'_>,
    theta_star: &[f64],
    r: f64,
    params: &AlgorithmParams,
    dim: usize,
    b0: f64,
) -> Result<MassBoundReport> {
    if traj.times.len() != traj.measured_mass.len() || traj.times.is_empty() {
        return Err(Error::domain("mass trajectory series lengths differ or are empty"));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(r > 0.0) {
        return Err(Error::domain("ball radius must be positive"));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(b0 >= 0.0) {
        return Err(Error::domain("b0 must be nonnegative"));
    }
    let _ = theta_star;
    let c = admissible_c(dim)?;
    let (lambda, sigma) = (params.lambda(), params.sigma());
    let d = dim as f64;

    // K₁ in log space: term1 = 2λ(cr + B₀√c)/((1−c)²r),
    // term2 = 2σ²(cr² + B₀²)(2c+d)/((1−c)⁴r²).
    let one_minus_c = 1.0 - c;
    let ln_term1 =
        (2.0 * lambda).ln() + (c * r + b0 * c.sqrt()).ln() - (one_minus_c * one_minus_c * r).ln();
    let ln_b0_sq = if b0 > 0.0 { 2.0 * b0.ln() } else { f64::NEG_INFINITY };
    let ln_cr2_plus_b0sq = log_add_exp((c * r * r).ln(), ln_b0_sq);
    let ln_term2 = (2.0 * sigma * sigma * (2.0 * c + d)).ln() + ln_cr2_plus_b0sq
        - (one_minus_c.powi(4) * r * r).ln();
    let k1 = Overflowable::from_ln(log_add_exp(ln_term1, ln_term2));
    let k2 = Overflowable::from_value(lambda * lambda / (sigma * sigma * c * (2.0 * c - 1.0)));
    let p = Overflowable::from_ln(2.0f64.ln() + k1.ln.max(k2.ln));

    let bump0 = traj.initial_bump_mass;
    let mut lower_bound = Vec::with_capacity(traj.times.len());
    for &t in traj.times {
        let factor = if t == 0.0 {
            1.0
        } else {
            // e^{−pt}; when p itself saturated, compute the exponent in log
            // space so p·t never becomes inf·0 or inf−inf.
            let pt = if p.value.is_finite() { p.value * t } else { (p.ln + t.ln()).exp() };
            (-pt).exp()
        };
        lower_bound.push(bump0 * factor);
    }
    let mut first_violation = None;
    for (i, (&lo, &measured)) in lower_bound.iter().zip(traj.measured_mass).enumerate() {
        if measured < lo {
            first_violation = Some(i);
            break;
        }
    }
    Ok(MassBoundReport {
        r,
        c,
        b0,
        k1,
        k2,
        p,
        initial_bump_mass: bump0,
        lower_bound,
        measured: traj.measured_mass.to_vec(),
        n_particles: traj.n_particles,
        held: first_violation.is_none(),
        first_violation,
    })
}

/// Hypotheses of the Laplace-principle bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplaceHypothesis {
    /// `q + δ_lev ≤ L_min + min{L_∞, (η_L r_G)^{1/ν_L}}`.
    LevelMargin,
    /// `u + G̃_r ≤ G_∞`.
    UpperWindow,
    /// `ϱ(B_r(θ*)) > 0`.
    PositiveLocalMass,
}

/// Outcome of the Laplace-principle domination check.
#[derive(Debug, Clone)]
pub struct LaplaceBoundReport {
    pub q: f64,
    /// `c_in(q,r) = s((q − L_min − L_L r)/τ)`.
    pub c_in: f64,
    /// `c_out(δ_lev) = s(−δ_lev/τ)`.
    pub c_out: f64,
    /// `(u + G̃_r)^{ν_G}/η_G`.
    pub term_geometry: f64,
    /// `e^{−αu}/(c_in·ϱ(B_r))·(√(2V) + β r_G)`.
    pub term_leak_in: f64,
    /// `e^{αΔ_r} c_out/(c_in·ϱ(B_r))·(√(2V) + r_G)`.
    pub term_leak_out: f64,
    /// `r_G` plus the three terms.
    pub bound: f64,
    /// `‖m(ϱ) − θ*‖₂`.
    pub actual: f64,
    pub local_mass: f64,
    pub v_rho: f64,
    pub g_tilde_r: f64,
    pub delta_r: f64,
    pub theta_tilde: Vec<f64>,
    /// How the ball suprema and `θ̃` were estimated.
    pub estimation: String,
    /// Hypotheses that failed for this instance (empty when all hold).
    pub violated: Vec<LaplaceHypothesis>,
    /// True when every hypothesis holds and the domination was asserted.
    pub checked: bool,
    /// `actual ≤ bound`; only meaningful when `checked`.
    pub domination_holds: bool,
}

/// Grid points covering the cube around `center` with half-width `r`,
/// budgeted at roughly 10⁶ points for `d ≤ 3`.
fn ball_grid(center: &[f64], r: f64) -> Vec<Vec<f64>> {
    let d = center.len();
    let per_axis = match d {
        1 => 1_000_000,
        2 => 1_000,
        _ => 100,
    };
    let mut pts = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        let p: Vec<f64> = (0..d)
            .map(|j| center[j] - r + 2.0 * r * idx[j] as f64 / (per_axis - 1) as f64)
            .collect();
        if numeric::dist2(&p, center) < r {
            pts.push(p);
        }
        // Odometer increment.
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < per_axis {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == d {
                return pts;
            }
        }
    }
}

/// Check the quantiled Laplace bound on one fresh ensemble.
///
/// Requires geometry constants, Lipschitz constants, and declared bounds on
/// the objective. Ball suprema and the local minimizer `θ̃` are estimated by
/// dense grid sampling for `d ≤ 3` and by particle-support sampling otherwise;
/// the report records the method. Failed hypotheses produce a report with
/// `checked = false` instead of an error.
pub fn laplace_bound_check(
    ensemble: &Ensemble,
    params: &AlgorithmParams,
    objective: &ObjectiveSpec,
) -> Result<LaplaceBoundReport> {
    let geo = objective
        .geometry()
        .ok_or_else(|| Error::config("laplace check requires geometry constants"))?;
    let lip = objective
        .lipschitz()
        .ok_or_else(|| Error::config("laplace check requires Lipschitz constants"))?;
    let bounds = objective
        .bounds()
        .ok_or_else(|| Error::config("laplace check requires declared bounds"))?;
    let theta_star = objective
        .theta_star()
        .ok_or_else(|| Error::config("laplace check requires theta_star"))?;
    if params.tau() <= 0.0 {
        return Err(Error::domain("laplace check applies to the soft dynamics (tau > 0)"));
    }

    let l_values = ensemble.l_values();
    let q = quantile::soft_quantile(l_values, params.beta(), params.tau())?.q;

    // Estimate θ̃: minimize G over the near-feasible part of B_{r_G}(θ*),
    // where near-feasible means the lower objective certifies distance ≤ r_G
    // to the feasible set through the Hölderian error bound.
    let level_cap = bounds.l_min + (geo.eta_l * geo.r_g).powf(1.0 / geo.nu_l);
    let dim = objective.dim();
    let (candidates, estimation) = if dim <= 3 {
        let per_axis = match dim {
            1 => 1_000_000,
            2 => 1_000,
            _ => 100,
        };
        (ball_grid(theta_star, geo.r_g), format!("grid({per_axis}^{dim})"))
    } else {
        let pts: Vec<Vec<f64>> = ensemble
            .iter_positions()
            .filter(|x| numeric::dist2(x, theta_star) < geo.r_g)
            .map(|x| x.to_vec())
            .collect();
        (pts, "particle-support".to_string())
    };
    let mut theta_tilde = theta_star.to_vec();
    let mut g_tilde = objective.upper_at(theta_star);
    for p in &candidates {
        if objective.lower_at(p) <= level_cap {
            let g = objective.upper_at(p);
            if g < g_tilde {
                g_tilde = g;
                theta_tilde = p.clone();
            }
        }
    }

    // Suprema over B_r(θ*).
    let sup_points: Vec<Vec<f64>> = if dim <= 3 {
        ball_grid(theta_star, geo.r)
    } else {
        ensemble
            .iter_positions()
            .filter(|x| numeric::dist2(x, theta_star) < geo.r)
            .map(|x| x.to_vec())
            .collect()
    };
    let mut sup_g = objective.upper_at(theta_star);
    for p in &sup_points {
        sup_g = sup_g.max(objective.upper_at(p));
    }
    let g_tilde_r = sup_g - g_tilde;
    let delta_r = sup_g - bounds.g_min;

    let local_mass = ensemble.mass_in_ball(theta_star, geo.r);
    let v_rho = ensemble.half_second_moment_about(theta_star);

    let mut violated = Vec::new();
    let h_l = geo.l_inf.min((geo.eta_l * geo.r_g).powf(1.0 / geo.nu_l));
    if q + geo.delta_lev > bounds.l_min + h_l {
        violated.push(LaplaceHypothesis::LevelMargin);
    }
    if geo.u + g_tilde_r > geo.g_inf {
        violated.push(LaplaceHypothesis::UpperWindow);
    }
    if local_mass <= 0.0 {
        violated.push(LaplaceHypothesis::PositiveLocalMass);
    }

    let tau = params.tau();
    let c_in = sigmoid((q - bounds.l_min - lip.lower * geo.r) / tau);
    let c_out = sigmoid(-geo.delta_lev / tau);

    let term_geometry = (geo.u + g_tilde_r).max(0.0).powf(geo.nu_g) / geo.eta_g;
    let denom = c_in * local_mass;
    let sqrt_2v = (2.0 * v_rho).sqrt();
    let leak_in_num = (-params.alpha() * geo.u).exp() * (sqrt_2v + params.beta() * geo.r_g);
    let term_leak_in = if leak_in_num == 0.0 { 0.0 } else { leak_in_num / denom };
    let leak_out_num = (params.alpha() * delta_r).exp() * c_out * (sqrt_2v + geo.r_g);
    let term_leak_out = if leak_out_num == 0.0 { 0.0 } else { leak_out_num / denom };
    let bound = geo.r_g + term_geometry + term_leak_in + term_leak_out;

    let report_m = if params.tau() > 0.0 {
        consensus::consensus_point(ensemble, params)?
    } else {
        consensus::hard_consensus_point(ensemble, params.alpha(), params.beta())?
    };
    let actual = numeric::dist2(&report_m.m, theta_star);

    let checked = violated.is_empty();
    // NaN-safe comparison: a NaN bound never dominates.
    let domination_holds = actual <= bound;
    Ok(LaplaceBoundReport {
        q,
        c_in,
        c_out,
        term_geometry,
        term_leak_in,
        term_leak_out,
        bound,
        actual,
        local_mass,
        v_rho,
        g_tilde_r,
        delta_r,
        theta_tilde,
        estimation,
        violated,
        checked,
        domination_holds,
    })
}

/// Result of the exponential decay-rate fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Negative least-squares slope of `ln v̂` against `t` on the window.
    pub fitted_rate: f64,
    /// `(1−ϑ)(2λ − dσ²)`.
    pub target_rate: f64,
    /// False when `2λ ≤ dσ²`: the target degenerates to ≤ 0 and the check
    /// carries no information.
    pub informative: bool,
}

/// Fit the decay rate of `v̂` over the rows whose step index lies in `window`.
pub fn decay_rate_fit(
    metrics: &RunMetrics,
    window: Range<usize>,
    params: &AlgorithmParams,
    dim: usize,
    vartheta: f64,
) -> Result<DecayFit> {
    if !(0.0..1.0).contains(&vartheta) {
        return Err(Error::domain(format!("vartheta out of (0,1): {vartheta}")));
    }
    let mut ts = Vec::new();
    let mut ln_v = Vec::new();
    for (i, &step) in metrics.steps.iter().enumerate() {
        if window.contains(&step) {
            let v = metrics.v_hat[i];
            #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
            if !(v > 0.0) {
                return Err(Error::domain(format!(
                    "v_hat must be strictly positive on the fit window, got {v} at step {step}"
                )));
            }
            ts.push(metrics.times[i]);
            ln_v.push(v.ln());
        }
    }
    if ts.len() < 2 {
        return Err(Error::domain("decay fit window selects fewer than two rows"));
    }
    let slope = numeric::ls_slope(&ts, &ln_v)
        .ok_or_else(|| Error::domain("degenerate time axis in decay fit"))?;
    let a = 2.0 * params.lambda() - dim as f64 * params.sigma() * params.sigma();
    Ok(DecayFit {
        fitted_rate: -slope,
        target_rate: (1.0 - vartheta) * a,
        informative: a > 0.0,
    })
}

/// Result of the fourth-moment cutoff monitor.
#[derive(Debug, Clone)]
pub struct CutoffReport {
    /// Running fourth-moment series `X_t^N` (elementwise max with the
    /// reference series when one is provided).
    pub x_series: Vec<f64>,
    /// Whether `max_t X_t^N ≤ M`.
    pub omega_m_held: bool,
    /// The tail probability bound `C_bd(T)/M` clipped to `[0,1]`.
    pub markov_bound: f64,
    /// `ln(C_bd(T)/M)` (may be `+∞` when the constant saturates).
    pub markov_bound_ln: f64,
}

/// Monitor the cutoff event `Ω_M = {sup_t X_t^N ≤ M}` along a recorded run.
///
/// The paired mean-field copy in the definition of `X_t^N` is approximated by
/// an optional large-`N` reference series at the same recorded steps; with no
/// reference, the monitor is restricted to the single available ensemble.
pub fn cutoff_monitor(
    fourth_moments: &[f64],
    reference: Option<&[f64]>,
    m: f64,
    c_bd: &Overflowable,
) -> Result<CutoffReport> {
    if fourth_moments.is_empty() {
        return Err(Error::domain("cutoff monitor needs a recorded trajectory"));
    }
    if let Some(r) = reference {
        if r.len() != fourth_moments.len() {
            return Err(Error::domain(
                "reference series must match the trajectory's recorded steps",
            ));
        }
    }
    let x_series: Vec<f64> = match reference {
        Some(r) => fourth_moments.iter().zip(r).map(|(&a, &b)| a.max(b)).collect(),
        None => fourth_moments.to_vec(),
    };
    let sup = x_series.iter().cloned().fold(0.0, f64::max);
    let markov_bound_ln = c_bd.ln - m.ln();
    let markov_bound = markov_bound_ln.exp().min(1.0);
    Ok(CutoffReport { x_series, omega_m_held: sup <= m, markov_bound, markov_bound_ln })
}

/// The τ-indexed parameter schedule of the mean-field convergence analysis,
/// exposed as a documentation-level calculator.
///
/// Given the geometry constants, a local-mass level `m̄ ∈ (0,1)`, a leakage
/// constant `K > 1`, and the ball radius `r̄`, returns `(β_τ, α_τ)` with
///
/// ```text
/// S_τ = s((h_L(r_G) − δ_lev − L_L r̄)/τ),      β_τ = ½ m̄ S_τ,
/// Γ_τ = m̄ · s(z_{β_τ} − L_L r̄/τ),            α_τ = (1/u)·ln(K/Γ_τ).
/// ```
///
/// `m̄` (the mollified initial mass near `θ*`) is not observable from a finite
/// run, so no acceptance claim attaches to these values.
pub fn soft_parameter_schedule(
    tau: f64,
    m_bar: f64,
    k_big: f64,
    r_bar: f64,
    l_lipschitz: f64,
    geo: &crate::objective::GeometryConstants,
) -> Result<(f64, f64)> {
    if !(tau > 0.0 && m_bar > 0.0 && m_bar < 1.0 && k_big > 1.0 && r_bar > 0.0) {
        return Err(Error::domain(
            "schedule requires tau > 0, m_bar in (0,1), K > 1, r_bar > 0",
        ));
    }
    let h_l = geo.l_inf.min((geo.eta_l * geo.r_g).powf(1.0 / geo.nu_l));
    let s_tau = sigmoid((h_l - geo.delta_lev - l_lipschitz * r_bar) / tau);
    let beta_tau = 0.5 * m_bar * s_tau;
    let z_beta_tau = logit(beta_tau);
    let gamma_tau = m_bar * sigmoid(z_beta_tau - l_lipschitz * r_bar / tau);
    // α_τ = (1/u)·ln(K/Γ_τ); Γ_τ underflows for sharp selectors, so expand
    // the logarithm instead of dividing.
    let ln_gamma = m_bar.ln()
        + {
            let z = z_beta_tau - l_lipschitz * r_bar / tau;
            if z < -37.0 {
                // ln s(z) = z − ln(1+e^z) ≈ z in the deep left tail.
                z
            } else {
                sigmoid(z).ln()
            }
        };
    let alpha_tau = (k_big.ln() - ln_gamma) / geo.u;
    let _ = gamma_tau;
    Ok((beta_tau, alpha_tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Bounds;
    use std::sync::Arc;

    fn spec_with_bounds(g_min: f64, g_max: f64) -> ObjectiveSpec {
        ObjectiveSpec::new(
            2,
            Arc::new(|x: &[f64]| x[0] * x[0]),
            Arc::new(|x: &[f64]| x[1]),
        )
        .with_bounds(Bounds::new(0.0, 10.0, g_min, g_max).unwrap())
    }

    fn params(alpha: f64, beta: f64, lambda: f64, sigma: f64) -> AlgorithmParams {
        AlgorithmParams::new(alpha, beta, 0.1, lambda, sigma, 0.01, 10, 10).unwrap()
    }

    #[test]
    fn closed_form_constants() {
        // α→0 limit via a tiny α: c_m → β^{−1/4}, b_g → β.
        let spec = spec_with_bounds(0.0, 1.0);
        let p = AlgorithmParams::new(1e-300, 0.5, 0.1, 1.0, 1.0, 0.01, 10, 10).unwrap();
        let tc = theory_constants(&p, &spec, 1.0, DEFAULT_B4D, 1.0).unwrap();
        assert!((tc.c_m.value - 1.189_207_115_002_721).abs() < 1e-12);
        assert!((tc.b_g.value - 0.5).abs() < 1e-12);

        // Direct substitution: λ=1, σ=1, d=2.
        let p = params(2.0, 0.5, 1.0, 1.0);
        let tc = theory_constants(&p, &spec, 1.0, DEFAULT_B4D, 1.0).unwrap();
        assert_eq!(tc.a_lyap, 0.0);
        assert!((tc.b_lyap - 3.0 * std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(tc.c_d, 1.0);

        // Product form: β=0.05, α=30, G range [0, 0.1].
        let spec = spec_with_bounds(0.0, 0.1);
        let p = params(30.0, 0.05, 1.0, 1.0);
        let tc = theory_constants(&p, &spec, 1.0, DEFAULT_B4D, 1.0).unwrap();
        let expected = 0.05f64.powf(-0.25) * 3.0f64.exp();
        assert!((tc.c_m.value - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn constants_overflow_to_logs() {
        let spec = spec_with_bounds(0.0, 22.35);
        let p = params(30.0, 0.05, 1.0, 1.0);
        let tc = theory_constants(&p, &spec, 6.0, DEFAULT_B4D, 1e4).unwrap();
        // C_m = 0.05^{-1/4} e^{670.5} is representable; C_m⁴ is not, so K_bd
        // and C_bd saturate while their logs stay meaningful.
        assert!(!tc.c_m.overflowed);
        assert!(tc.k_bd.overflowed);
        assert!(tc.k_bd.ln.is_finite());
        assert!(tc.c_bd.overflowed);
        let expected_ln_k = 216.0f64.ln()
            + 4.0 * tc.c_m.ln
            + (1.0f64.powi(4) * 216.0 + 36.0 * 4.0 * 6.0).ln();
        assert!((tc.k_bd.ln - expected_ln_k).abs() < 1e-9 * expected_ln_k.abs());
    }

    #[test]
    fn missing_bounds_is_config_error() {
        let spec = ObjectiveSpec::new(
            1,
            Arc::new(|x: &[f64]| x[0]),
            Arc::new(|x: &[f64]| x[0]),
        );
        let p = params(1.0, 0.5, 1.0, 1.0);
        assert!(matches!(
            theory_constants(&p, &spec, 1.0, DEFAULT_B4D, 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn admissible_c_examples() {
        // d=2, c=0.9: d(1−c)² = 0.02 ≤ c(2c−1) = 0.72.
        let c = admissible_c(2).unwrap();
        assert!(c > 0.5 && c < 1.0);
        assert!(2.0 * (1.0 - c) * (1.0 - c) <= c * (2.0 * c - 1.0));
        assert!(c <= 0.9);
        // Smallest on the grid: the previous grid point must violate.
        let prev = c - 0.5 / 10_000.0;
        if prev > 0.5 {
            assert!(2.0 * (1.0 - prev) * (1.0 - prev) > prev * (2.0 * prev - 1.0));
        }
        for d in 1..=64 {
            assert!(admissible_c(d).is_ok());
        }
    }

    #[test]
    fn bump_properties() {
        // Maximal at the center, zero on the boundary.
        assert_eq!(bump_value(0.0, 1.0), 1.0);
        assert_eq!(bump_value(1.0, 1.0), 0.0);
        assert_eq!(bump_value(4.0, 1.0), 0.0);
        assert!(bump_value(0.25, 1.0) > 0.0);

        let e = Ensemble::new(vec![0.0, 0.0, 0.3, 0.0, 2.0, 0.0], 2).unwrap();
        let m = bump_mass(&e, &[0.0, 0.0], 1.0);
        assert!(m > 0.0);
        // The bump never exceeds the indicator, so bump mass ≤ ball mass.
        assert!(m <= e.mass_in_ball(&[0.0, 0.0], 1.0));
    }

    #[test]
    fn mass_bound_trivially_holds_with_huge_p() {
        let times = [0.0, 1.0, 2.0];
        let measured = [0.5, 0.1, 0.0];
        let traj = MassTrajectory {
            times: &times,
            measured_mass: &measured,
            initial_bump_mass: 0.3,
            n_particles: 100,
        };
        let p = params(30.0, 0.05, 1.0, 1.0);
        let rep = mass_bound_check(&traj, &[0.0, 0.0], 0.5, &p, 2, 1e300).unwrap();
        // p saturates; the bound is the bump mass at t = 0 and zero after.
        assert!(rep.p.overflowed || rep.p.value > 1e100);
        assert_eq!(rep.lower_bound[0], 0.3);
        assert_eq!(rep.lower_bound[1], 0.0);
        assert!(rep.held);
    }

    #[test]
    fn mass_bound_detects_violation_at_t0() {
        let times = [0.0, 1.0];
        let measured = [0.1, 0.1];
        let traj = MassTrajectory {
            times: &times,
            measured_mass: &measured,
            initial_bump_mass: 0.3,
            n_particles: 10,
        };
        let p = params(1.0, 0.5, 1.0, 1.0);
        let rep = mass_bound_check(&traj, &[0.0, 0.0], 0.5, &p, 2, 1.0).unwrap();
        assert!(!rep.held);
        assert_eq!(rep.first_violation, Some(0));
    }

    #[test]
    fn mass_bound_finite_constants_decay() {
        // Small excursion bound and short times keep p·t in range so the
        // exponential factor is strictly decreasing rather than flushed to 0.
        let times = [0.0, 0.005, 0.01];
        let measured = [0.9, 0.8, 0.7];
        let traj = MassTrajectory {
            times: &times,
            measured_mass: &measured,
            initial_bump_mass: 0.4,
            n_particles: 50,
        };
        let p = params(1.0, 0.5, 0.1, 1.0);
        let rep = mass_bound_check(&traj, &[0.0, 0.0], 1.0, &p, 1, 0.1).unwrap();
        assert!(!rep.k1.overflowed && !rep.k2.overflowed);
        assert!((rep.p.value - 2.0 * rep.k1.value.max(rep.k2.value)).abs() < 1e-9 * rep.p.value);
        // Strictly decreasing lower bound with finite p.
        assert!(rep.lower_bound[0] > rep.lower_bound[1]);
        assert!(rep.lower_bound[1] > rep.lower_bound[2]);
        assert!(rep.lower_bound[2] > 0.0);
        assert!(rep.held);
    }

    #[test]
    fn decay_fit_flat_series_is_zero() {
        let p = params(1.0, 0.5, 1.0, 0.5);
        let mut metrics = RunMetrics {
            mass_radii: vec![],
            steps: (0..10).collect(),
            times: (0..10).map(|k| k as f64 * 0.1).collect(),
            l_at_consensus: vec![0.0; 10],
            g_at_consensus: vec![0.0; 10],
            dist_to_theta_star: vec![0.0; 10],
            spread: vec![0.0; 10],
            v_hat: vec![2.0; 10],
            fourth_moment: vec![1.0; 10],
            mass_in_ball: vec![],
            initial_bump_mass: vec![],
            final_consensus: vec![],
        };
        let fit = decay_rate_fit(&metrics, 0..10, &p, 2, 0.5).unwrap();
        assert_eq!(fit.fitted_rate, 0.0);
        assert!((fit.target_rate - 0.75).abs() < 1e-12);
        assert!(fit.informative);

        // λ=1, σ=1, d=2 → a = 0: non-informative.
        let p2 = params(1.0, 0.5, 1.0, 1.0);
        let fit = decay_rate_fit(&metrics, 0..10, &p2, 2, 0.5).unwrap();
        assert!(!fit.informative);
        assert_eq!(fit.target_rate, 0.0);

        // Exact exponential: recover the rate.
        metrics.v_hat = metrics.times.iter().map(|&t| (-(1.3) * t).exp()).collect();
        let fit = decay_rate_fit(&metrics, 0..10, &p, 2, 0.5).unwrap();
        assert!((fit.fitted_rate - 1.3).abs() < 1e-9);

        // Nonpositive v̂ in the window is a domain error.
        metrics.v_hat[3] = 0.0;
        assert!(decay_rate_fit(&metrics, 0..10, &p, 2, 0.5).is_err());
    }

    #[test]
    fn cutoff_monitor_basic() {
        let c_bd = Overflowable::from_value(8.0);
        let rep = cutoff_monitor(&[0.0, 0.0, 0.0], None, 1.0, &c_bd).unwrap();
        assert!(rep.omega_m_held);
        // M = ∞ is a vacuous cutoff.
        let rep = cutoff_monitor(&[5.0, 9.0], None, f64::INFINITY, &c_bd).unwrap();
        assert!(rep.omega_m_held);
        assert_eq!(rep.markov_bound, 0.0);
        // Markov bound clips to 1 and pairs with the reference by max.
        let rep = cutoff_monitor(&[1.0, 2.0], Some(&[3.0, 0.5]), 2.5, &c_bd).unwrap();
        assert_eq!(rep.x_series, vec![3.0, 2.0]);
        assert!(!rep.omega_m_held);
        assert_eq!(rep.markov_bound, 1.0);
    }

    #[test]
    fn schedule_calculator_behaves_in_the_sharp_limit() {
        let geo = crate::bench::circle_geometry();
        let (beta1, alpha1) = soft_parameter_schedule(1e-2, 0.3, 8.0, 0.001, 0.35, &geo).unwrap();
        let (beta2, alpha2) = soft_parameter_schedule(1e-4, 0.3, 8.0, 0.001, 0.35, &geo).unwrap();
        assert!(beta1 > 0.0 && beta1 < 1.0);
        assert!(beta2 > 0.0 && beta2 < 1.0);
        // β_τ → m̄/2 and α_τ grows as τ ↓ 0.
        assert!((beta2 - 0.15).abs() < (beta1 - 0.15).abs() + 1e-15);
        assert!(alpha2 > alpha1);
        assert!(alpha2.is_finite());
    }
}
