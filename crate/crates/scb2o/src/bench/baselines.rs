//! Single-state gradient-descent baselines for bi-level problems.
//!
//! Both methods act on one point `x ∈ ℝ^d` with analytic gradients:
//!
//! * SBGD-1 alternates a lower-level gradient step (step size `γα`) with an
//!   upper-level gradient step (step size `α`), each followed by a projection.
//! * VPBGD-1 penalizes the lower-level suboptimality gap: it runs `T` inner
//!   descent steps on the lower objective to estimate the value function,
//!   then takes one projected step along `∇G + γ∇L − γ∇V̂`, where `∇V̂` is the
//!   lower-objective gradient at the inner-descent endpoint (a stop-gradient
//!   estimate: when the inner loop reaches the exact minimizer it vanishes).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::objective::ObjectiveFn;

/// Gradient of a scalar objective.
pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Objective pair with analytic gradients.
#[derive(Clone)]
pub struct GradObjective {
    pub lower: ObjectiveFn,
    pub lower_grad: GradFn,
    pub upper: ObjectiveFn,
    pub upper_grad: GradFn,
}

/// Projection onto the feasible set of the baseline iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    /// No projection (the default; the feasible set is all of `ℝ^d`).
    Identity,
    /// Componentwise clamp onto an axis-aligned box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Projection {
    pub fn apply(&self, mut x: Vec<f64>) -> Vec<f64> {
        match self {
            Projection::Identity => x,
            Projection::Box { lo, hi } => {
                for (v, (&l, &h)) in x.iter_mut().zip(lo.iter().zip(hi)) {
                    *v = v.clamp(l, h);
                }
                x
            }
        }
    }
}

/// Step sizes and inner-loop length for the baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    /// Upper-level step size `α` (the lower level uses `γα`).
    pub alpha: f64,
    /// Penalty weight `γ`.
    pub gamma: f64,
    /// Inner descent steps for the value-function estimate.
    pub t_inner: usize,
    pub projection: Projection,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self { alpha: 0.5, gamma: 1.0, t_inner: 10, projection: Projection::Identity }
    }
}

fn axpy(x: &[f64], scale: f64, g: &[f64]) -> Vec<f64> {
    x.iter().zip(g).map(|(&xi, &gi)| xi - scale * gi).collect()
}

/// One SBGD-1 step: `x½ = Π(x − γα∇L(x))`, then `x′ = Π(x½ − α∇G(x½))`.
pub fn sbgd_step(x: &[f64], params: &BaselineParams, obj: &GradObjective) -> Vec<f64> {
    let half = params
        .projection
        .apply(axpy(x, params.gamma * params.alpha, &(obj.lower_grad)(x)));
    params
        .projection
        .apply(axpy(&half, params.alpha, &(obj.upper_grad)(&half)))
}

/// One VPBGD-1 step: inner descent on `L` from `x`, then
/// `x′ = Π(x − α(∇G(x) + γ∇L(x) − γ∇V̂(x)))` with `∇V̂(x) = ∇L(x^{(T)})`.
pub fn vpbgd_step(x: &[f64], params: &BaselineParams, obj: &GradObjective) -> Result<Vec<f64>> {
    if params.t_inner == 0 {
        return Err(Error::config("vpbgd requires at least one inner descent step"));
    }
    let inner_rate = params.gamma * params.alpha;
    let mut inner = x.to_vec();
    for _ in 0..params.t_inner {
        inner = axpy(&inner, inner_rate, &(obj.lower_grad)(&inner));
    }
    let grad_v = (obj.lower_grad)(&inner);
    let g = (obj.upper_grad)(x);
    let l = (obj.lower_grad)(x);
    let step: Vec<f64> = (0..x.len())
        .map(|j| g[j] + params.gamma * (l[j] - grad_v[j]))
        .collect();
    Ok(params.projection.apply(axpy(x, params.alpha, &step)))
}

/// Which baseline to iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Sbgd1,
    Vpbgd1,
}

/// Iterate a baseline from `x0`, collecting the trajectory `x₀, x₁, …, x_K`.
pub fn run_baseline(
    method: BaselineMethod,
    x0: &[f64],
    iterations: usize,
    params: &BaselineParams,
    obj: &GradObjective,
) -> Result<Vec<Vec<f64>>> {
    let mut trajectory = Vec::with_capacity(iterations + 1);
    trajectory.push(x0.to_vec());
    let mut x = x0.to_vec();
    for k in 0..iterations {
        x = match method {
            BaselineMethod::Sbgd1 => sbgd_step(&x, params, obj),
            BaselineMethod::Vpbgd1 => vpbgd_step(&x, params, obj)?,
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step: k,
                particle: 0,
                message: "baseline iterate became non-finite".to_string(),
            });
        }
        trajectory.push(x.clone());
    }
    Ok(trajectory)
}

impl std::fmt::Debug for GradObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GradObjective").finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic() -> GradObjective {
        GradObjective {
            lower: Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum()),
            lower_grad: Arc::new(|x: &[f64]| x.iter().map(|v| 2.0 * v).collect()),
            upper: Arc::new(|_: &[f64]| 0.0),
            upper_grad: Arc::new(|x: &[f64]| vec![0.0; x.len()]),
        }
    }

    #[test]
    fn sbgd_stationary_point_is_fixed() {
        let obj = GradObjective {
            lower: Arc::new(|_: &[f64]| 1.0),
            lower_grad: Arc::new(|x: &[f64]| vec![0.0; x.len()]),
            upper: Arc::new(|_: &[f64]| 2.0),
            upper_grad: Arc::new(|x: &[f64]| vec![0.0; x.len()]),
        };
        let x = vec![0.3, -0.8];
        assert_eq!(sbgd_step(&x, &BaselineParams::default(), &obj), x);
    }

    #[test]
    fn sbgd_quadratic_contraction() {
        // L = ‖x‖², G = 0, γα = 0.25: one step scales by (1 − 2·0.25) = 0.5.
        let params = BaselineParams { alpha: 0.25, gamma: 1.0, ..Default::default() };
        let next = sbgd_step(&[2.0, -4.0], &params, &quadratic());
        assert_eq!(next, vec![1.0, -2.0]);
    }

    #[test]
    fn sbgd_box_projection_clamps() {
        let params = BaselineParams {
            alpha: 10.0,
            gamma: 1.0,
            projection: Projection::Box { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] },
            ..Default::default()
        };
        let next = sbgd_step(&[0.9, -0.9], &params, &quadratic());
        assert!(next.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn vpbgd_zero_lower_gradient_reduces_to_gd_on_upper() {
        let obj = GradObjective {
            lower: Arc::new(|_: &[f64]| 0.0),
            lower_grad: Arc::new(|x: &[f64]| vec![0.0; x.len()]),
            upper: Arc::new(|x: &[f64]| x[0] * x[0]),
            upper_grad: Arc::new(|x: &[f64]| vec![2.0 * x[0], 0.0]),
        };
        let params = BaselineParams { alpha: 0.1, ..Default::default() };
        let next = vpbgd_step(&[1.0, 3.0], &params, &obj).unwrap();
        assert!((next[0] - 0.8).abs() < 1e-15);
        assert_eq!(next[1], 3.0);
    }

    #[test]
    fn vpbgd_rejects_zero_inner_steps() {
        let params = BaselineParams { t_inner: 0, ..Default::default() };
        assert!(vpbgd_step(&[0.0], &params, &quadratic()).is_err());
    }

    #[test]
    fn vpbgd_exact_inner_minimizer_kills_value_term() {
        // L = ‖x‖² with inner rate γα = 0.5: one inner step lands exactly on
        // the minimizer, so ∇V̂ = 0 and the step is the γ-penalized combined
        // gradient step.
        let obj = GradObjective {
            lower: Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum()),
            lower_grad: Arc::new(|x: &[f64]| x.iter().map(|v| 2.0 * v).collect()),
            upper: Arc::new(|x: &[f64]| x[0]),
            upper_grad: Arc::new(|x: &[f64]| {
                let mut g = vec![0.0; x.len()];
                g[0] = 1.0;
                g
            }),
        };
        let params = BaselineParams { alpha: 0.5, gamma: 1.0, t_inner: 1, ..Default::default() };
        let x = vec![2.0, 2.0];
        let next = vpbgd_step(&x, &params, &obj).unwrap();
        // x − α(∇G + γ∇L) = (2,2) − 0.5·((1,0) + (4,4)) = (−0.5, 0).
        assert_eq!(next, vec![-0.5, 0.0]);
    }

    #[test]
    fn trajectory_has_expected_length() {
        let params = BaselineParams { alpha: 0.25, ..Default::default() };
        let traj =
            run_baseline(BaselineMethod::Sbgd1, &[1.0, 1.0], 10, &params, &quadratic()).unwrap();
        assert_eq!(traj.len(), 11);
    }
}
