//! Particle ensembles: positions plus cached objective values.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric;
use crate::objective::ObjectiveSpec;

/// `N` particles in `ℝ^d` with cached lower/upper objective values.
///
/// Positions are stored row-major (`n × d`). The caches are only meaningful
/// while the ensemble is *fresh*: any position mutation marks them stale until
/// the next [`Ensemble::refresh`]. Accessing stale caches panics — that is
/// always a sequencing bug in the caller, never a data problem.
#[derive(Debug, Clone)]
pub struct Ensemble {
    positions: Vec<f64>,
    dim: usize,
    l_values: Vec<f64>,
    g_values: Vec<f64>,
    step_index: usize,
    fresh: bool,
}

impl Ensemble {
    /// Build an ensemble from row-major positions.
    pub fn new(positions: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("ensemble dimension must be positive"));
        }
        if positions.is_empty() || !positions.len().is_multiple_of(dim) {
            return Err(Error::domain(format!(
                "positions length {} is not a positive multiple of dim {dim}",
                positions.len()
            )));
        }
        if let Some(bad) = positions.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite coordinate at particle {}",
                bad / dim
            )));
        }
        let n = positions.len() / dim;
        Ok(Self {
            positions,
            dim,
            l_values: vec![0.0; n],
            g_values: vec![0.0; n],
            step_index: 0,
            fresh: false,
        })
    }

    /// Build an ensemble with caller-supplied objective caches, marked fresh.
    ///
    /// Intended for regression fixtures and diagnostics over frozen states;
    /// the caller vouches that the caches match the positions.
    pub fn from_parts(
        positions: Vec<f64>,
        dim: usize,
        l_values: Vec<f64>,
        g_values: Vec<f64>,
    ) -> Result<Self> {
        let mut e = Self::new(positions, dim)?;
        if l_values.len() != e.len() || g_values.len() != e.len() {
            return Err(Error::domain("cache lengths must equal the particle count"));
        }
        if l_values.iter().chain(&g_values).any(|v| !v.is_finite()) {
            return Err(Error::domain("cached objective values must be finite"));
        }
        e.l_values = l_values;
        e.g_values = g_values;
        e.fresh = true;
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn set_step_index(&mut self, k: usize) {
        self.step_index = k;
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterate over particle positions.
    pub fn iter_positions(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    /// Raw row-major position buffer.
    pub fn raw_positions(&self) -> &[f64] {
        &self.positions
    }

    /// Overwrite one particle's position; marks caches stale.
    pub fn set_position(&mut self, i: usize, x: &[f64]) {
        assert_eq!(x.len(), self.dim);
        self.positions[i * self.dim..(i + 1) * self.dim].copy_from_slice(x);
        self.fresh = false;
    }

    /// Replace the whole position buffer; marks caches stale.
    pub fn set_raw_positions(&mut self, positions: Vec<f64>) {
        assert_eq!(positions.len(), self.positions.len());
        self.positions = positions;
        self.fresh = false;
    }

    pub fn is_fresh(&self) -> bool {
        self.fresh
    }

    /// Recompute the objective caches.
    ///
    /// Evaluations run in parallel per particle; the results land at fixed
    /// indices, so the outcome is identical for any thread count. A non-finite
    /// objective value is reported as a divergence carrying the offending
    /// particle index.
    pub fn refresh(&mut self, objective: &ObjectiveSpec) -> Result<()> {
        debug_assert_eq!(objective.dim(), self.dim);
        let dim = self.dim;
        let positions = &self.positions;
        let pairs: Vec<(f64, f64)> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let x = &positions[i * dim..(i + 1) * dim];
                (objective.lower_at(x), objective.upper_at(x))
            })
            .collect();
        for (i, &(l, g)) in pairs.iter().enumerate() {
            if !l.is_finite() || !g.is_finite() {
                return Err(Error::Divergence {
                    step: self.step_index,
                    particle: i,
                    message: format!("objective evaluation produced L={l}, G={g}"),
                });
            }
            self.l_values[i] = l;
            self.g_values[i] = g;
        }
        self.fresh = true;
        Ok(())
    }

    /// Cached lower-objective values. Panics if stale.
    pub fn l_values(&self) -> &[f64] {
        assert!(self.fresh, "ensemble caches are stale; call refresh() first");
        &self.l_values
    }

    /// Cached upper-objective values. Panics if stale.
    pub fn g_values(&self) -> &[f64] {
        assert!(self.fresh, "ensemble caches are stale; call refresh() first");
        &self.g_values
    }

    /// Mean of `‖θᵢ‖₂⁴` over the ensemble.
    pub fn fourth_moment(&self) -> f64 {
        let mut acc = numeric::NeumaierSum::new();
        for x in self.iter_positions() {
            let n2: f64 = x.iter().map(|v| v * v).sum();
            acc.add(n2 * n2);
        }
        acc.value() / self.len() as f64
    }

    /// `½ · mean ‖θᵢ − p‖₂²`.
    pub fn half_second_moment_about(&self, p: &[f64]) -> f64 {
        let mut acc = numeric::NeumaierSum::new();
        for x in self.iter_positions() {
            acc.add(numeric::dist2_sq(x, p));
        }
        0.5 * acc.value() / self.len() as f64
    }

    /// Mean over coordinates of the across-particle standard deviation
    /// (population convention, divisor `N`). Zero for a single particle.
    pub fn coordinate_spread(&self) -> f64 {
        let n = self.len();
        let mut acc = numeric::NeumaierSum::new();
        for j in 0..self.dim {
            let coord: Vec<f64> = (0..n).map(|i| self.position(i)[j]).collect();
            acc.add(numeric::population_std(&coord));
        }
        acc.value() / self.dim as f64
    }

    /// Fraction of particles strictly inside the open ball `B_r(center)`.
    pub fn mass_in_ball(&self, center: &[f64], r: f64) -> f64 {
        let count = self
            .iter_positions()
            .filter(|x| numeric::dist2(x, center) < r)
            .count();
        count as f64 / self.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::ObjectiveSpec;
    use std::sync::Arc;

    fn spec() -> ObjectiveSpec {
        ObjectiveSpec::new(
            2,
            Arc::new(|x: &[f64]| x[0] + x[1]),
            Arc::new(|x: &[f64]| x[0] * x[1]),
        )
    }

    #[test]
    fn cache_coherence_after_mutation() {
        let spec = spec();
        let mut e = Ensemble::new(vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        e.refresh(&spec).unwrap();
        assert_eq!(e.l_values(), &[3.0, 7.0]);
        assert_eq!(e.g_values(), &[2.0, 12.0]);

        e.set_position(0, &[5.0, 6.0]);
        assert!(!e.is_fresh());
        e.refresh(&spec).unwrap();
        // Exact match against direct re-evaluation.
        assert_eq!(e.l_values()[0], 11.0);
        assert_eq!(e.g_values()[0], 30.0);
    }

    #[test]
    #[should_panic(expected = "stale")]
    fn stale_cache_access_panics() {
        let mut e = Ensemble::new(vec![1.0, 2.0], 2).unwrap();
        e.set_position(0, &[0.0, 0.0]);
        let _ = e.l_values();
    }

    #[test]
    fn rejects_non_finite_positions() {
        assert!(Ensemble::new(vec![1.0, f64::NAN], 2).is_err());
        assert!(Ensemble::new(vec![], 2).is_err());
        assert!(Ensemble::new(vec![1.0, 2.0, 3.0], 2).is_err());
    }

    #[test]
    fn refresh_reports_divergence_index() {
        let spec = ObjectiveSpec::new(
            1,
            Arc::new(|x: &[f64]| if x[0] > 1.5 { f64::NAN } else { x[0] }),
            Arc::new(|_: &[f64]| 0.0),
        );
        let mut e = Ensemble::new(vec![1.0, 2.0], 1).unwrap();
        match e.refresh(&spec) {
            Err(crate::Error::Divergence { particle, .. }) => assert_eq!(particle, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn moments_and_ball_mass() {
        let e = Ensemble::new(vec![0.0, 0.0, 3.0, 4.0], 2).unwrap();
        // ‖(3,4)‖⁴ = 625
        assert_eq!(e.fourth_moment(), 312.5);
        assert_eq!(e.half_second_moment_about(&[0.0, 0.0]), 6.25);
        assert_eq!(e.mass_in_ball(&[0.0, 0.0], 1.0), 0.5);
        assert_eq!(e.mass_in_ball(&[0.0, 0.0], 5.0 + 1e-12), 1.0);
        // Boundary particle is outside the open ball.
        assert_eq!(e.mass_in_ball(&[0.0, 0.0], 5.0), 0.5);
    }
}
