//! Algorithmic parameters for one optimization run.

use crate::error::{Error, Result};

/// The validated parameter tuple `(α, β, τ, λ, σ, Δt, K, N)` together with the
/// derived sharpness `ξ = 1/(τα)`.
///
/// `τ = 0` encodes hard (rank-cut) selection; all soft-selection code paths
/// require `τ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmParams {
    alpha: f64,
    beta: f64,
    tau: f64,
    lambda: f64,
    sigma: f64,
    dt: f64,
    steps: usize,
    n_particles: usize,
    xi: Option<f64>,
}

impl AlgorithmParams {
    /// Build a parameter set from `τ` directly.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: f64,
        beta: f64,
        tau: f64,
        lambda: f64,
        sigma: f64,
        dt: f64,
        steps: usize,
        n_particles: usize,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta.is_finite() && beta > 0.0 && beta < 1.0) {
            return Err(Error::config(format!("beta out of (0,1): {beta}")));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::config(format!("tau must be nonnegative, got {tau}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::config(format!("lambda must be positive, got {lambda}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::config(format!("sigma must be nonnegative, got {sigma}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config(format!("dt must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(Error::config("steps must be positive"));
        }
        if n_particles == 0 {
            return Err(Error::config("n_particles must be positive"));
        }
        let xi = (tau > 0.0).then(|| 1.0 / (tau * alpha));
        Ok(Self { alpha, beta, tau, lambda, sigma, dt, steps, n_particles, xi })
    }

    /// Build a parameter set from the sharpness `ξ`, deriving `τ = 1/(ξα)`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_xi(
        alpha: f64,
        beta: f64,
        xi: f64,
        lambda: f64,
        sigma: f64,
        dt: f64,
        steps: usize,
        n_particles: usize,
    ) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::config(format!("xi must be positive, got {xi}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config(format!("alpha must be positive, got {alpha}")));
        }
        Self::new(alpha, beta, 1.0 / (xi * alpha), lambda, sigma, dt, steps, n_particles)
    }

    /// Return a copy with a different particle count.
    pub fn with_n_particles(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("n_particles must be positive"));
        }
        self.n_particles = n;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    /// Sharpness `ξ = 1/(τα)`; `None` in hard mode (`τ = 0`).
    pub fn xi(&self) -> Option<f64> {
        self.xi
    }

    /// Time horizon `T = KΔt`.
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xi_tau_alpha_identity() {
        let p = AlgorithmParams::from_xi(30.0, 0.05, 1.0e4, 1.0, 1.0, 0.01, 600, 100).unwrap();
        let xi = p.xi().unwrap();
        assert!((xi * p.tau() * p.alpha() - 1.0).abs() <= 1e-12);
        // And the reverse route.
        let q = AlgorithmParams::new(30.0, 0.05, p.tau(), 1.0, 1.0, 0.01, 600, 100).unwrap();
        assert!((q.xi().unwrap() * q.tau() * q.alpha() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn hard_mode_has_no_xi() {
        let p = AlgorithmParams::new(30.0, 0.05, 0.0, 1.0, 1.0, 0.01, 600, 100).unwrap();
        assert!(p.xi().is_none());
        assert_eq!(p.tau(), 0.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(AlgorithmParams::new(0.0, 0.5, 1.0, 1.0, 1.0, 0.1, 10, 10).is_err());
        assert!(AlgorithmParams::new(1.0, 1.5, 1.0, 1.0, 1.0, 0.1, 10, 10).is_err());
        assert!(AlgorithmParams::new(1.0, 0.5, -1.0, 1.0, 1.0, 0.1, 10, 10).is_err());
        assert!(AlgorithmParams::new(1.0, 0.5, 1.0, 0.0, 1.0, 0.1, 10, 10).is_err());
        assert!(AlgorithmParams::new(1.0, 0.5, 1.0, 1.0, -0.5, 0.1, 10, 10).is_err());
        assert!(AlgorithmParams::new(1.0, 0.5, 1.0, 1.0, 1.0, 0.0, 10, 10).is_err());
        assert!(AlgorithmParams::new(1.0, 0.5, 1.0, 1.0, 1.0, 0.1, 0, 10).is_err());
        assert!(AlgorithmParams::new(1.0, 0.5, 1.0, 1.0, 1.0, 0.1, 10, 0).is_err());
    }

    #[test]
    fn horizon_is_product() {
        let p = AlgorithmParams::new(1.0, 0.5, 1.0, 1.0, 1.0, 0.01, 600, 10).unwrap();
        assert_eq!(p.horizon(), 6.0);
    }
}
