//! Bi-level objective specifications.
//!
//! An [`ObjectiveSpec`] couples the lower objective `L` (whose minimizers
//! define the feasible set) with the upper objective `G` to be minimized over
//! that set, plus the optional analytic metadata the diagnostics consume:
//! declared bounds, Lipschitz constants, and local geometry constants.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::selector::clip_objective;

/// A scalar objective over `ℝ^d`.
pub type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Declared value bounds for the two objectives.
///
/// When present, evaluations through [`ObjectiveSpec::lower_at`] and
/// [`ObjectiveSpec::upper_at`] are clipped from above at `l_max` / `g_max`, so
/// the declared upper bounds hold by construction for every evaluated point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub l_min: f64,
    pub l_max: f64,
    pub g_min: f64,
    pub g_max: f64,
}

impl Bounds {
    pub fn new(l_min: f64, l_max: f64, g_min: f64, g_max: f64) -> Result<Self> {
        if !(l_min <= l_max && g_min <= g_max) {
            return Err(Error::config("bounds must satisfy min <= max"));
        }
        Ok(Self { l_min, l_max, g_min, g_max })
    }
}

/// Global Lipschitz constants of the two objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lipschitz {
    pub lower: f64,
    pub upper: f64,
}

/// Local geometry constants around the bi-level solution.
///
/// `eta_l`, `nu_l`, `l_inf` quantify the Hölderian error bound of the lower
/// objective (`dist(x, Θ) ≤ η_L^{-1}(L(x) − L_min)^{ν_L}` on the sublevel set
/// `L − L_min ≤ L_∞`); `eta_g`, `nu_g`, `g_inf` quantify inverse continuity of
/// the upper objective near the selected minimizer; the radii `r ≤ r_g ≤ big_r_g`
/// together with the gap `u` and level margin `delta_lev` parameterize the
/// Laplace-principle bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConstants {
    pub eta_l: f64,
    pub nu_l: f64,
    pub l_inf: f64,
    pub eta_g: f64,
    pub nu_g: f64,
    pub g_inf: f64,
    pub r_g: f64,
    pub big_r_g: f64,
    pub r: f64,
    pub u: f64,
    pub delta_lev: f64,
}

impl GeometryConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("eta_l", self.eta_l),
            ("nu_l", self.nu_l),
            ("l_inf", self.l_inf),
            ("eta_g", self.eta_g),
            ("nu_g", self.nu_g),
            ("g_inf", self.g_inf),
            ("r_g", self.r_g),
            ("big_r_g", self.big_r_g),
            ("r", self.r),
            ("u", self.u),
            ("delta_lev", self.delta_lev),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "geometry constant {name} must be strictly positive, got {v}"
                )));
            }
        }
        if !(self.r <= self.r_g && self.r_g <= self.big_r_g) {
            return Err(Error::config("geometry radii must satisfy r <= r_g <= big_r_g"));
        }
        Ok(())
    }
}

/// A bi-level objective pair with optional analytic metadata.
#[derive(Clone)]
pub struct ObjectiveSpec {
    lower: ObjectiveFn,
    upper: ObjectiveFn,
    dim: usize,
    theta_star: Option<Vec<f64>>,
    bounds: Option<Bounds>,
    lipschitz: Option<Lipschitz>,
    geometry: Option<GeometryConstants>,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("dim", &self.dim)
            .field("theta_star", &self.theta_star)
            .field("bounds", &self.bounds)
            .field("lipschitz", &self.lipschitz)
            .field("geometry", &self.geometry)
            .finish_non_exhaustive()
    }
}

impl ObjectiveSpec {
    pub fn new(dim: usize, lower: ObjectiveFn, upper: ObjectiveFn) -> Self {
        assert!(dim > 0, "objective dimension must be positive");
        Self { lower, upper, dim, theta_star: None, bounds: None, lipschitz: None, geometry: None }
    }

    pub fn with_theta_star(mut self, theta_star: Vec<f64>) -> Self {
        assert_eq!(theta_star.len(), self.dim);
        self.theta_star = Some(theta_star);
        self
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn with_lipschitz(mut self, lipschitz: Lipschitz) -> Self {
        self.lipschitz = Some(lipschitz);
        self
    }

    pub fn with_geometry(mut self, geometry: GeometryConstants) -> Result<Self> {
        geometry.validate()?;
        self.geometry = Some(geometry);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta_star(&self) -> Option<&[f64]> {
        self.theta_star.as_deref()
    }

    pub fn bounds(&self) -> Option<&Bounds> {
        self.bounds.as_ref()
    }

    pub fn lipschitz(&self) -> Option<&Lipschitz> {
        self.lipschitz.as_ref()
    }

    pub fn geometry(&self) -> Option<&GeometryConstants> {
        self.geometry.as_ref()
    }

    /// Evaluate the lower objective, clipped at `l_max` when bounds are set.
    #[inline]
    pub fn lower_at(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        clip_objective((self.lower)(x), self.bounds.map(|b| b.l_max))
    }

    /// Evaluate the upper objective, clipped at `g_max` when bounds are set.
    #[inline]
    pub fn upper_at(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        clip_objective((self.upper)(x), self.bounds.map(|b| b.g_max))
    }

    /// Evaluate the lower objective without clipping.
    #[inline]
    pub fn lower_raw(&self, x: &[f64]) -> f64 {
        (self.lower)(x)
    }

    /// Evaluate the upper objective without clipping.
    #[inline]
    pub fn upper_raw(&self, x: &[f64]) -> f64 {
        (self.upper)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_spec() -> ObjectiveSpec {
        ObjectiveSpec::new(
            2,
            Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1]),
            Arc::new(|x: &[f64]| x[0] + 1.0),
        )
    }

    #[test]
    fn clipping_is_opt_in() {
        let spec = quadratic_spec();
        assert_eq!(spec.lower_at(&[3.0, 4.0]), 25.0);
        let spec = spec.with_bounds(Bounds::new(0.0, 10.0, -100.0, 100.0).unwrap());
        assert_eq!(spec.lower_at(&[3.0, 4.0]), 10.0);
        assert_eq!(spec.lower_raw(&[3.0, 4.0]), 25.0);
        assert_eq!(spec.upper_at(&[3.0, 4.0]), 4.0);
    }

    #[test]
    fn geometry_validation() {
        let good = GeometryConstants {
            eta_l: 1.0,
            nu_l: 0.5,
            l_inf: 1.0,
            eta_g: 1.0,
            nu_g: 1.0,
            g_inf: 1.0,
            r_g: 0.5,
            big_r_g: 1.0,
            r: 0.25,
            u: 0.1,
            delta_lev: 0.05,
        };
        assert!(good.validate().is_ok());
        let mut bad = good;
        bad.r = 2.0;
        assert!(bad.validate().is_err());
        let mut nonpos = good;
        nonpos.eta_g = 0.0;
        assert!(nonpos.validate().is_err());
    }
}
