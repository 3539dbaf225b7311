//! Selector functions: smooth, strictly increasing surrogates for the unit
//! step, used to weight particles by how far their lower-objective value sits
//! below the quantile level.
//!
//! The canonical selector is the sigmoid `s(z) = 1/(1 + e^{−z})`. It is
//! strictly increasing, maps onto `(0,1)`, satisfies `s(z) + s(−z) = 1`, and
//! has a two-sided exponential left tail: `(1/2)e^{−z} ≤ s(−z) ≤ e^{−z}` for
//! `z ≥ 0`. The quantile solver only needs evaluation, the derivative, and the
//! inverse, so alternatives plug in through the [`Selector`] trait.

use crate::error::{Error, Result};

/// A smooth cumulative-shape function `s: ℝ → (0,1)`.
pub trait Selector: Send + Sync {
    /// Evaluate `s(z)`.
    fn eval(&self, z: f64) -> f64;

    /// Evaluate the derivative `s′(z)`.
    fn derivative(&self, z: f64) -> f64;

    /// Evaluate the inverse `s⁻¹(p)` for `p ∈ (0,1)`.
    fn inverse(&self, p: f64) -> f64;
}

/// The sigmoid selector `1/(1 + e^{−z})`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sigmoid;

impl Selector for Sigmoid {
    #[inline]
    fn eval(&self, z: f64) -> f64 {
        sigmoid(z)
    }

    #[inline]
    fn derivative(&self, z: f64) -> f64 {
        sigmoid_derivative(z)
    }

    #[inline]
    fn inverse(&self, p: f64) -> f64 {
        logit(p)
    }
}

/// Numerically stable sigmoid.
///
/// Branches on the sign of `z` so the exponential argument is never positive;
/// no overflow for any finite input. For large `|z|` the result rounds to the
/// nearest representable value (`0.0` or `1.0`).
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let t = z.exp();
        t / (1.0 + t)
    }
}

/// Derivative of the sigmoid, `s′(z) = s(z)(1 − s(z)) = e^{−|z|}/(1+e^{−|z|})²`.
#[inline]
pub fn sigmoid_derivative(z: f64) -> f64 {
    let t = (-z.abs()).exp();
    let d = 1.0 + t;
    t / (d * d)
}

/// Inverse sigmoid, `logit(p) = ln(p/(1−p))`.
#[inline]
pub fn logit(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    p.ln() - (-p).ln_1p()
}

/// Checked selector evaluation: rejects non-finite input.
pub fn sigmoid_selector(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(format!("selector input must be finite, got {z}")));
    }
    Ok(sigmoid(z))
}

/// Clip an objective value from above: `min(value, cap)` when a cap is
/// configured, the identity otherwise.
#[inline]
pub fn clip_objective(value: f64, cap: Option<f64>) -> f64 {
    match cap {
        Some(c) => value.min(c),
        None => value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn sigmoid_at_minus_one() {
        // 1/(1+e) = 0.2689414213699951...
        let v = sigmoid(-1.0);
        assert!((v - 0.268_941_421_369_995_1).abs() < 1e-15);
        // Confirms the left-tail bound s(−z) ≤ e^{−z} with constant 1.
        assert!(v <= (-1.0f64).exp());
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        // The true value at z = 50 lies in (1 − 1e−20, 1); the nearest f64 is
        // exactly 1.0, so saturation (not overflow) is the observable.
        let v = sigmoid(50.0);
        assert!((1.0 - 1e-15..=1.0).contains(&v));
        assert!(sigmoid(1e4).is_finite());
        assert!(sigmoid(-1e4).is_finite());
        assert!(sigmoid(-1e4) >= 0.0);
    }

    #[test]
    fn selector_rejects_non_finite() {
        assert!(sigmoid_selector(f64::NAN).is_err());
        assert!(sigmoid_selector(f64::INFINITY).is_err());
        assert!(sigmoid_selector(3.0).is_ok());
    }

    #[test]
    fn strictly_increasing_and_symmetric_on_grid() {
        // Monotone on the full grid; strictly monotone wherever the values
        // have not saturated to the endpoints of the f64 range of (0,1).
        let n = 10_000;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=n {
            let z = -50.0 + 100.0 * k as f64 / n as f64;
            let s = sigmoid(z);
            assert!(s >= prev, "not nondecreasing at z={z}");
            // Strictness per grid step needs s′·Δz above one ulp of the
            // result, which holds up to z ≈ 30 at this spacing.
            if z <= 30.0 && prev.is_finite() {
                assert!(s > prev, "not strictly increasing at z={z}");
            }
            prev = s;
            assert!((s + sigmoid(-z) - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn exponential_tail_bounds() {
        for zi in 1..=30 {
            let z = zi as f64;
            let s = sigmoid(-z);
            let e = (-z).exp();
            assert!(s <= e, "upper tail bound failed at z={z}");
            assert!(s >= 0.5 * e, "lower tail bound failed at z={z}");
        }
    }

    #[test]
    fn derivative_matches_product_form() {
        // The product form s(1−s) loses precision once s saturates toward 1,
        // so the agreement check stays in the moderate range.
        for &z in &[-5.0, -3.0, -0.5, 0.0, 0.5, 3.0, 5.0] {
            let s = sigmoid(z);
            let d = sigmoid_derivative(z);
            // Both routes round; the product's 1−s carries an absolute error
            // of order eps.
            assert!((d - s * (1.0 - s)).abs() < 5e-16);
        }
        for &z in &[-30.0, 30.0] {
            let d = sigmoid_derivative(z);
            let e = (-z.abs()).exp();
            assert!((d - e).abs() <= 1e-12 * e);
        }
        assert_eq!(sigmoid_derivative(0.0), 0.25);
    }

    #[test]
    fn logit_inverts_sigmoid() {
        for &p in &[1e-12, 0.05, 0.3, 0.5, 0.7, 1.0 - 1e-9] {
            let z = logit(p);
            assert!((sigmoid(z) - p).abs() < 1e-15);
        }
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_objective(3.0, Some(2.0)), 2.0);
        assert_eq!(clip_objective(1.0, Some(2.0)), 1.0);
        assert_eq!(clip_objective(5.7, None), 5.7);
    }
}
