//! Soft and hard β-quantiles of empirical lower-objective values.
//!
//! The soft β-quantile of values `L₁..L_N` at temperature `τ > 0` is the
//! unique `q` with
//!
//! ```text
//! H(q) = (1/N) Σᵢ s((q − Lᵢ)/τ) = β
//! ```
//!
//! where `s` is the selector. `H` is continuous, strictly increasing, and
//! tends to 0 / 1 at ∓∞, so the root exists and is unique. The solver starts
//! from the guaranteed bracket `[min L + τ·s⁻¹(β), max L + τ·s⁻¹(β)]` and runs
//! safeguarded Newton with bisection fallback.
//!
//! The hard quantile is the `⌈βN⌉`-th smallest value (τ → 0 limit).

use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;
use crate::selector::{Selector, Sigmoid};

/// Absolute residual tolerance on `H(q) − β`.
pub const RESIDUAL_TOL: f64 = 1e-12;

/// Iteration cap for the quantile solver.
pub const MAX_ITERATIONS: usize = 200;

/// Result of a soft-quantile solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileSolution {
    /// The soft quantile `q`.
    pub q: f64,
    /// `|H(q) − β|` at the returned point, measured on the solver's own
    /// shifted evaluation path.
    pub residual: f64,
    /// Newton/bisection iterations consumed.
    pub iterations: usize,
    /// Search bracket `(lo, hi)` containing `q`.
    pub bracket: (f64, f64),
}

/// Selector-slope constants controlling quantile stability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    /// `z_β = s⁻¹(β)`.
    pub z_beta: f64,
    /// Infimum of `s′` over the localization interval
    /// `[z_β − (L_max−L_min)/τ, z_β + (L_max−L_min)/τ]`.
    pub c_s: f64,
    /// `κ = c_s / τ`.
    pub kappa: f64,
}

fn validate_values(l_values: &[f64]) -> Result<()> {
    if l_values.is_empty() {
        return Err(Error::domain("quantile of an empty sample set"));
    }
    if let Some(i) = l_values.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!(
            "non-finite lower-objective value at index {i}"
        )));
    }
    Ok(())
}

/// Solve the soft-quantile equation with the sigmoid selector.
pub fn soft_quantile(l_values: &[f64], beta: f64, tau: f64) -> Result<QuantileSolution> {
    soft_quantile_with(&Sigmoid, l_values, beta, tau)
}

/// Solve the soft-quantile equation with a caller-supplied selector.
pub fn soft_quantile_with(
    selector: &dyn Selector,
    l_values: &[f64],
    beta: f64,
    tau: f64,
) -> Result<QuantileSolution> {
    validate_values(l_values)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::domain(format!("beta out of (0,1): {beta}")));
    }
    if !(tau.is_finite() && tau > 0.0) {
        // τ = 0 callers must use hard_quantile; no hidden mode switching.
        return Err(Error::domain(format!("soft quantile requires tau > 0, got {tau}")));
    }

    let l_min = l_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let l_max = l_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z_beta = selector.inverse(beta);

    // Phase 1: work in coordinates shifted by `l_min`, with the guaranteed
    // bracket from the localization bound applied to the empirical extremes.
    let shifted: Vec<f64> = l_values.iter().map(|&l| l - l_min).collect();
    let lo = tau * z_beta;
    let hi = (l_max - l_min) + tau * z_beta;
    let phase_budget = MAX_ITERATIONS / 2;
    let mut state = solve_in_frame(selector, &shifted, beta, tau, lo, hi, phase_budget);

    if state.residual > RESIDUAL_TOL {
        // Phase 2: the crossing sits so far above `l_min` that one ulp of the
        // offset overshoots the residual tolerance (large value spread with a
        // sharp selector). Re-center the values on the phase-1 estimate: near
        // the crossing the re-centered differences are exact, which restores
        // full resolution around zero.
        let center = state.u;
        let recentred: Vec<f64> = shifted.iter().map(|&m| m - center).collect();
        // Map the collapsed bracket and pad by the selector's active width so
        // the rounding of the far terms cannot expel the root.
        let pad = tau * (45.0 + z_beta.abs());
        let vlo = (state.lo - center) - pad;
        let vhi = (state.hi - center) + pad;
        let rescue = solve_in_frame(selector, &recentred, beta, tau, vlo, vhi, phase_budget);
        state = FrameSolution {
            u: center + rescue.u,
            residual: rescue.residual,
            iterations: state.iterations + rescue.iterations,
            lo: state.lo,
            hi: state.hi,
        };
    }

    if state.residual > RESIDUAL_TOL {
        return Err(Error::Solver { residual: state.residual, iterations: state.iterations });
    }
    Ok(QuantileSolution {
        q: l_min + state.u,
        residual: state.residual,
        iterations: state.iterations,
        bracket: (l_min + tau * z_beta, l_max + tau * z_beta),
    })
}

struct FrameSolution {
    u: f64,
    residual: f64,
    iterations: usize,
    lo: f64,
    hi: f64,
}

/// Safeguarded Newton with bisection fallback on `H(u) − β` for values given
/// in an arbitrary shifted frame. Maintains the bracket invariant and stops at
/// the residual tolerance, the iteration budget, or bracket collapse.
fn solve_in_frame(
    selector: &dyn Selector,
    values: &[f64],
    beta: f64,
    tau: f64,
    mut lo: f64,
    mut hi: f64,
    budget: usize,
) -> FrameSolution {
    let n = values.len() as f64;
    let eval = |u: f64| -> (f64, f64) {
        let mut h = NeumaierSum::new();
        let mut dh = NeumaierSum::new();
        for &m in values {
            let z = (u - m) / tau;
            h.add(selector.eval(z));
            dh.add(selector.derivative(z));
        }
        (h.value() / n - beta, dh.value() / (n * tau))
    };

    let mut u = 0.5 * (lo + hi);
    let mut best = (u, f64::INFINITY);
    let mut iterations = 0;
    while iterations < budget {
        iterations += 1;
        let (f, df) = eval(u);
        if f.abs() < best.1 {
            best = (u, f.abs());
        }
        if f.abs() <= RESIDUAL_TOL {
            break;
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let newton = u - f / df;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == u {
            // The bracket collapsed to adjacent floats; no better point
            // exists in this frame.
            break;
        }
        u = next;
    }
    FrameSolution { u: best.0, residual: best.1, iterations, lo, hi }
}

/// Number of particles selected by the hard rank cut, `⌈βN⌉`.
///
/// `βN` is snapped to the nearest integer when it sits within `1e−9·N` of one,
/// so decimal parameters like `β = 0.05, N = 100` never flip across the
/// ceiling boundary through float rounding.
pub fn selected_count(beta: f64, n: usize) -> usize {
    assert!(beta > 0.0 && beta <= 1.0, "beta out of (0,1]: {beta}");
    let bn = beta * n as f64;
    let nearest = bn.round();
    let k = if (bn - nearest).abs() <= 1e-9 * n as f64 {
        nearest as usize
    } else {
        bn.ceil() as usize
    };
    k.clamp(1, n)
}

/// Hard β-quantile: the `⌈βN⌉`-th smallest value (1-indexed).
///
/// Ties are broken by stable ordering on particle index, which cannot change
/// the returned value but fixes the selected-rank convention exactly.
pub fn hard_quantile(l_values: &[f64], beta: f64) -> Result<f64> {
    validate_values(l_values)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::domain(format!("beta out of (0,1]: {beta}")));
    }
    let k = selected_count(beta, l_values.len());
    let mut sorted: Vec<(f64, usize)> =
        l_values.iter().cloned().zip(0..).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(sorted[k - 1].0)
}

/// Selection weights `ηᵢ = s((q − Lᵢ)/τ)` for a solved quantile.
pub fn eta_weights(q: f64, l_values: &[f64], tau: f64) -> Vec<f64> {
    eta_weights_with(&Sigmoid, q, l_values, tau)
}

/// Selection weights with a caller-supplied selector.
pub fn eta_weights_with(
    selector: &dyn Selector,
    q: f64,
    l_values: &[f64],
    tau: f64,
) -> Vec<f64> {
    debug_assert!(tau > 0.0);
    l_values.iter().map(|&l| selector.eval((q - l) / tau)).collect()
}

/// Quantile stability constants for the sigmoid selector.
///
/// `s′` for the sigmoid is unimodal with its peak at 0, so the infimum over an
/// interval is attained at the endpoint farthest from 0 (or at an endpoint
/// when 0 lies outside the interval): taking the minimum of the two endpoint
/// evaluations covers both cases.
pub fn stability_constants(l_min: f64, l_max: f64, beta: f64, tau: f64) -> StabilityConstants {
    assert!(l_max >= l_min, "l_max must be >= l_min");
    assert!(tau > 0.0);
    let selector = Sigmoid;
    let z_beta = selector.inverse(beta);
    let half_width = (l_max - l_min) / tau;
    let c_s = selector
        .derivative(z_beta - half_width)
        .min(selector.derivative(z_beta + half_width));
    StabilityConstants { z_beta, c_s, kappa: c_s / tau }
}

/// Both sides of the quantile inverse-stability inequality
/// `|q_μ − q_ν| ≤ κ⁻¹ |F_μ(q_ν)|` for two empirical sample sets.
///
/// `κ` is computed from the pooled min/max of the two sets, which contains
/// every point the proof evaluates the selector slope at. Returns
/// `(lhs, rhs)`; the inequality `lhs ≤ rhs·(1 + 1e−8)` holds for correct
/// solves.
pub fn inverse_stability_slack(
    l_mu: &[f64],
    l_nu: &[f64],
    beta: f64,
    tau: f64,
) -> Result<(f64, f64)> {
    validate_values(l_mu)?;
    validate_values(l_nu)?;
    let q_mu = soft_quantile(l_mu, beta, tau)?.q;
    let q_nu = soft_quantile(l_nu, beta, tau)?.q;
    let lhs = (q_mu - q_nu).abs();

    let pooled_min = l_mu
        .iter()
        .chain(l_nu)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let pooled_max = l_mu
        .iter()
        .chain(l_nu)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let kappa = stability_constants(pooled_min, pooled_max, beta, tau).kappa;

    // F_μ(q_ν) = (1/N_μ) Σ s((q_ν − Lᵢ)/τ) − β.
    let mut acc = NeumaierSum::new();
    for &l in l_mu {
        acc.add(Sigmoid.eval((q_nu - l) / tau));
    }
    let f_mu_at_qnu = (acc.value() / l_mu.len() as f64 - beta).abs();
    // 0·∞ means "identical quantile functions under a vacuous slope bound";
    // the inequality degenerates to 0 ≤ 0.
    let rhs = if f_mu_at_qnu == 0.0 { 0.0 } else { f_mu_at_qnu / kappa };
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selector::{logit, sigmoid};

    #[test]
    fn constant_values_symmetric_beta() {
        // z_{0.5} = 0, so q equals the common value.
        let sol = soft_quantile(&[4.2; 7], 0.5, 0.3).unwrap();
        assert!((sol.q - 4.2).abs() <= 1e-12);
        assert!(sol.residual <= RESIDUAL_TOL);
    }

    #[test]
    fn constant_values_closed_form() {
        // q = c + τ·ln(β/(1−β)): for β=0.05, τ=0.1 the offset is
        // 0.1·ln(1/19) = −0.2944438979166440.
        let c = 1.7;
        let sol = soft_quantile(&[c; 12], 0.05, 0.1).unwrap();
        let expected = c + 0.1 * (0.05f64 / 0.95).ln();
        assert!((sol.q - expected).abs() < 1e-13);
        assert!((sol.q - (c - 0.294_443_897_916_644_0)).abs() < 1e-12);
    }

    #[test]
    fn two_point_midpoint_symmetry() {
        let sol = soft_quantile(&[0.0, 1.0], 0.5, 0.25).unwrap();
        assert!((sol.q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn localization_bracket_contains_root() {
        let l = [0.2, 0.9, 0.4, 0.1, 0.7];
        for &(beta, tau) in &[(0.05, 0.3), (0.3, 1e-3), (0.95, 0.05)] {
            let sol = soft_quantile(&l, beta, tau).unwrap();
            let z_beta = logit(beta);
            assert!(sol.q >= 0.1 + tau * z_beta - 1e-12);
            assert!(sol.q <= 0.9 + tau * z_beta + 1e-12);
            assert!(sol.bracket.0 <= sol.q && sol.q <= sol.bracket.1);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(soft_quantile(&[], 0.5, 0.1).is_err());
        assert!(soft_quantile(&[1.0], 0.5, 0.0).is_err());
        assert!(soft_quantile(&[1.0], 0.0, 0.1).is_err());
        assert!(soft_quantile(&[1.0], 1.0, 0.1).is_err());
        assert!(soft_quantile(&[f64::NAN], 0.5, 0.1).is_err());
    }

    #[test]
    fn hard_quantile_examples() {
        assert_eq!(hard_quantile(&[3.0, 1.0, 2.0], 1.0 / 3.0).unwrap(), 1.0);
        assert_eq!(hard_quantile(&[3.0, 1.0, 2.0], 1.0).unwrap(), 3.0);
        assert_eq!(hard_quantile(&[5.0, 5.0, 5.0, 5.0], 0.5).unwrap(), 5.0);
        assert!(hard_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn selected_count_boundary() {
        // β·N on a representable boundary must not flip via rounding.
        assert_eq!(selected_count(0.05, 100), 5);
        assert_eq!(selected_count(0.1, 30), 3);
        assert_eq!(selected_count(0.05, 101), 6);
        assert_eq!(selected_count(1.0, 7), 7);
        assert_eq!(selected_count(1e-9, 3), 1);
    }

    #[test]
    fn eta_weights_constant_measure() {
        let l = [2.0; 9];
        let sol = soft_quantile(&l, 0.05, 0.2).unwrap();
        let eta = eta_weights(sol.q, &l, 0.2);
        for &e in &eta {
            assert!((e - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_weights_two_point() {
        // q = 0.5, τ = 0.25 → η = {s(2), s(−2)}.
        let l = [0.0, 1.0];
        let sol = soft_quantile(&l, 0.5, 0.25).unwrap();
        let eta = eta_weights(sol.q, &l, 0.25);
        assert!((eta[0] - sigmoid(2.0)).abs() < 1e-12);
        assert!((eta[1] - sigmoid(-2.0)).abs() < 1e-12);
        assert!((eta[0] - 0.880_797).abs() < 1e-6);
        assert!((eta[1] - 0.119_203).abs() < 1e-6);
        let mean = (eta[0] + eta[1]) / 2.0;
        assert!((mean - 0.5).abs() <= 1e-10);
    }

    #[test]
    fn eta_weights_single_point_is_beta() {
        let l = [3.3];
        let sol = soft_quantile(&l, 0.37, 0.05).unwrap();
        let eta = eta_weights(sol.q, &l, 0.05);
        assert!((eta[0] - 0.37).abs() <= 1e-10);
    }

    #[test]
    fn stability_constants_examples() {
        // Degenerate interval {z_β} with β = 0.5: c_s = s′(0) = 1/4.
        let s = stability_constants(1.0, 1.0, 0.5, 0.2);
        assert_eq!(s.z_beta, 0.0);
        assert_eq!(s.c_s, 0.25);
        assert!((s.kappa - 1.25).abs() < 1e-15);

        // Interval [−1, 1]: infimum at the endpoints, s′(1) = 0.19661193...
        let s = stability_constants(0.0, 1.0, 0.5, 1.0);
        assert!((s.c_s - 0.196_611_933_241_481_85).abs() < 1e-15);
        assert!((s.kappa - s.c_s).abs() < 1e-18);

        // Asymmetric interval: infimum at the endpoint farthest from 0.
        let s = stability_constants(0.0, 1.0, 0.05, 1.0);
        let z_beta = logit(0.05);
        assert!((s.z_beta - z_beta).abs() < 1e-15);
        assert!((s.z_beta + 2.944_438_979_166_440_3).abs() < 1e-12);
        let expected = crate::selector::sigmoid_derivative(z_beta - 1.0);
        assert_eq!(s.c_s, expected);
    }

    #[test]
    fn inverse_stability_identical_measures() {
        let l = [0.4, 0.2, 0.9];
        let (lhs, rhs) = inverse_stability_slack(&l, &l, 0.5, 0.3).unwrap();
        // Identical measures: identical quantiles, and the right side is the
        // residual of the shared solve (zero up to solver tolerance).
        assert_eq!(lhs, 0.0);
        assert!(rhs <= 1e-10);
        assert!(lhs <= rhs * (1.0 + 1e-8));
    }

    #[test]
    fn inverse_stability_shifted_singletons() {
        // Single points at 0 and 0.1: q_μ = τ·z_β + 0 and q_ν = τ·z_β + 0.1,
        // so lhs = 0.1 exactly.
        let (lhs, rhs) = inverse_stability_slack(&[0.0], &[0.1], 0.5, 1.0).unwrap();
        assert!((lhs - 0.1).abs() < 1e-12);
        assert!(lhs <= rhs * (1.0 + 1e-8));
        let kappa = stability_constants(0.0, 0.1, 0.5, 1.0).kappa;
        let expected_rhs = (sigmoid(0.1) - 0.5) / kappa;
        assert!((rhs - expected_rhs).abs() < 1e-10);
    }

    #[test]
    fn solver_handles_tiny_tau_far_from_origin() {
        // Values far from zero with a sharp selector: the shifted evaluation
        // keeps the residual at tolerance.
        let l: Vec<f64> = (0..200).map(|i| 750.0 + (i as f64) * 1e-2).collect();
        let sol = soft_quantile(&l, 0.05, 1e-4).unwrap();
        assert!(sol.residual <= RESIDUAL_TOL);
        let eta = eta_weights(sol.q, &l, 1e-4);
        let mean = crate::numeric::mean(&eta);
        assert!((mean - 0.05).abs() <= 1e-10);
    }
}
