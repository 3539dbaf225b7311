//! Soft and hard consensus points.
//!
//! The soft consensus point of an ensemble is
//!
//! ```text
//! m = A/B,   A = (1/N) Σᵢ θᵢ e^{−αGᵢ} ηᵢ,   B = (1/N) Σᵢ e^{−αGᵢ} ηᵢ,
//! ```
//!
//! with η the soft-quantile selection weights. Weights are evaluated in the
//! log domain relative to the empirical minimum of `G`: `m` is invariant under
//! `G → G + c`, and the exponentials stay in range even at `α = 30` with
//! objective ranges of order 10. Weighted sums accumulate in ascending
//! particle-index order with compensated summation, so results are bitwise
//! reproducible for any thread count.

use rayon::prelude::*;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::numeric::{self, NeumaierSum};
use crate::params::AlgorithmParams;
use crate::quantile::{self, QuantileSolution};

/// One consensus evaluation with its bound witnesses.
#[derive(Debug, Clone)]
pub struct ConsensusReport {
    /// Quantile level used for selection (soft quantile, or the hard rank
    /// value in hard mode).
    pub q: f64,
    /// Selection weights η (0/1 indicators in hard mode).
    pub eta: Vec<f64>,
    /// The consensus point.
    pub m: Vec<f64>,
    /// Denominator `B` on the unshifted scale; may underflow to 0 for extreme
    /// `αG`, in which case `log_b` remains exact.
    pub b: f64,
    /// `ln B` on the unshifted scale.
    pub log_b: f64,
    /// `‖A‖₂` on the unshifted scale.
    pub a_norm: f64,
    /// `ln ‖A‖₂` on the unshifted scale.
    pub log_a_norm: f64,
    /// Denominator witness `b_G = β e^{−α g_max}` with the empirical maximum
    /// of `G`; `B ≥ b_G` up to roundoff for every correct evaluation.
    pub b_g: f64,
    /// `ln b_G`.
    pub log_b_g: f64,
    /// Per-particle log weights `−αGᵢ + ln ηᵢ` on the unshifted scale.
    pub log_weights: Vec<f64>,
    /// Iterations the quantile solve consumed (0 in hard mode).
    pub quantile_iterations: usize,
}

impl ConsensusReport {
    /// Check `B ≥ b_G (1 − 1e−12)` in log space (underflow-safe).
    pub fn denominator_bound_holds(&self) -> bool {
        self.log_b >= self.log_b_g + (-1e-12f64).ln_1p()
    }
}

/// Weight evaluation shared by the soft and hard paths.
///
/// `eta` holds selection weights in `[0,1]`; entries with `eta == 0` are
/// excluded (hard mode). `g_shift` is subtracted from every `G` before
/// exponentiation.
fn weighted_average(
    ensemble: &Ensemble,
    eta: &[f64],
    alpha: f64,
    g_shift: f64,
) -> Result<(Vec<f64>, f64, f64)> {
    let n = ensemble.len();
    let d = ensemble.dim();
    let g = ensemble.g_values();

    // Parallel map into fixed slots, sequential compensated reduce.
    let weights: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            if eta[i] == 0.0 {
                0.0
            } else {
                (-alpha * (g[i] - g_shift)).exp() * eta[i]
            }
        })
        .collect();

    let mut denom = NeumaierSum::new();
    let mut numer: Vec<NeumaierSum> = vec![NeumaierSum::new(); d];
    for (i, &w) in weights.iter().enumerate() {
        denom.add(w);
        let x = ensemble.position(i);
        for (acc, &xj) in numer.iter_mut().zip(x) {
            acc.add(w * xj);
        }
    }
    let b_shifted = denom.value() / n as f64;
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(b_shifted > 0.0) {
        // Unreachable with η > 0 and shifted exponentials (the best particle
        // always has weight ~η); kept as a hard failure rather than a NaN.
        return Err(Error::invariant(
            "consensus weights degenerated to zero".to_string(),
        ));
    }
    let a_shifted: Vec<f64> = numer.iter().map(|acc| acc.value() / n as f64).collect();
    let m = a_shifted.iter().map(|&a| a / b_shifted).collect();
    let a_norm_shifted = numeric::norm2(&a_shifted);
    Ok((m, b_shifted, a_norm_shifted))
}

fn empirical_g_range(ensemble: &Ensemble) -> (f64, f64) {
    let g = ensemble.g_values();
    let g_min = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (g_min, g_max)
}

/// Soft consensus point of a fresh ensemble.
pub fn consensus_point(ensemble: &Ensemble, params: &AlgorithmParams) -> Result<ConsensusReport> {
    if params.tau() <= 0.0 {
        return Err(Error::domain(
            "soft consensus requires tau > 0; use hard_consensus_point",
        ));
    }
    let l = ensemble.l_values();
    let QuantileSolution { q, iterations, .. } =
        quantile::soft_quantile(l, params.beta(), params.tau())?;
    let eta = quantile::eta_weights(q, l, params.tau());
    build_report(ensemble, params.alpha(), params.beta(), q, eta, iterations)
}

/// Hard consensus point: Gibbs average over `{i : Lᵢ ≤ hard β-quantile}`.
pub fn hard_consensus_point(
    ensemble: &Ensemble,
    alpha: f64,
    beta: f64,
) -> Result<ConsensusReport> {
    let l = ensemble.l_values();
    let q = quantile::hard_quantile(l, beta)?;
    let eta: Vec<f64> = l.iter().map(|&li| if li <= q { 1.0 } else { 0.0 }).collect();
    assert!(
        eta.iter().any(|&e| e > 0.0),
        "hard selection is nonempty by construction"
    );
    build_report(ensemble, alpha, beta, q, eta, 0)
}

fn build_report(
    ensemble: &Ensemble,
    alpha: f64,
    beta: f64,
    q: f64,
    eta: Vec<f64>,
    quantile_iterations: usize,
) -> Result<ConsensusReport> {
    let (g_min, g_max) = empirical_g_range(ensemble);
    let (m, b_shifted, a_norm_shifted) = weighted_average(ensemble, &eta, alpha, g_min)?;

    let g = ensemble.g_values();
    let log_weights: Vec<f64> = eta
        .iter()
        .zip(g)
        .map(|(&e, &gi)| -alpha * gi + e.ln())
        .collect();

    let log_b = b_shifted.ln() - alpha * g_min;
    let log_a_norm = a_norm_shifted.ln() - alpha * g_min;
    let log_b_g = beta.ln() - alpha * g_max;
    Ok(ConsensusReport {
        q,
        eta,
        m,
        b: log_b.exp(),
        log_b,
        a_norm: log_a_norm.exp(),
        log_a_norm,
        b_g: log_b_g.exp(),
        log_b_g,
        log_weights,
        quantile_iterations,
    })
}

/// Fourth-moment witness `C_m = β^{−1/4} e^{α(g_max − g_min)}` (ln thereof).
pub fn log_c_m(alpha: f64, beta: f64, g_min: f64, g_max: f64) -> f64 {
    -0.25 * beta.ln() + alpha * (g_max - g_min)
}

/// Both sides of the consensus-moment inequality
/// `‖m‖₂⁴ ≤ C_m⁴ · (1/N) Σ ‖θᵢ‖₂⁴` with `C_m = β^{−1/4} e^{α(g_max−g_min)}`.
///
/// Returns `(lhs, rhs)`; a violation is reported as an invariant error since
/// the inequality is a theorem for correct consensus evaluations.
pub fn consensus_moment_witness(
    ensemble: &Ensemble,
    params: &AlgorithmParams,
    g_min: f64,
    g_max: f64,
) -> Result<(f64, f64)> {
    let report = if params.tau() > 0.0 {
        consensus_point(ensemble, params)?
    } else {
        hard_consensus_point(ensemble, params.alpha(), params.beta())?
    };
    consensus_moment_witness_for(&report, ensemble, params, g_min, g_max)
}

/// Consensus-moment check for an already-computed report.
pub fn consensus_moment_witness_for(
    report: &ConsensusReport,
    ensemble: &Ensemble,
    params: &AlgorithmParams,
    g_min: f64,
    g_max: f64,
) -> Result<(f64, f64)> {
    {
        let g = ensemble.g_values();
        if g.iter().any(|&gi| gi < g_min || gi > g_max) {
            return Err(Error::domain(
                "g_values outside the declared [g_min, g_max] range",
            ));
        }
    }
    let lhs = numeric::norm2(&report.m).powi(4);
    let c_m4 = (4.0 * log_c_m(params.alpha(), params.beta(), g_min, g_max)).exp();
    let rhs = c_m4 * ensemble.fourth_moment();
    if lhs > rhs {
        return Err(Error::invariant(format!(
            "consensus-moment bound violated: {lhs:e} > {rhs:e}"
        )));
    }
    Ok((lhs, rhs))
}
