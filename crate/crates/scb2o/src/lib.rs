//! Soft-quantile consensus-based bi-level optimization.
//!
//! This crate implements an interacting-particle method for bi-level problems
//! of the form "minimize an upper objective `G` over the minimizers of a lower
//! objective `L`". Particles evolve under an Euler–Maruyama discretization of
//! a consensus SDE: each particle drifts toward a *consensus point* — a
//! Gibbs-weighted average of the particles, softly restricted to the fraction
//! `β` with the smallest lower-objective values — and diffuses with isotropic
//! noise proportional to its distance from that consensus point.
//!
//! The soft restriction is what makes the dynamics analyzable: instead of a
//! hard rank cut at the `β`-quantile, a smooth selector `s((q − L(x))/τ)`
//! assigns every particle a weight in `(0,1)`, where `q` solves the
//! soft-quantile equation and `τ` controls sharpness. As `τ → 0` (equivalently
//! as `ξ = 1/(τα) → ∞`) the soft rule recovers the hard rank cut.
//!
//! The crate ships four cooperating layers:
//!
//! * numerical primitives — [`selector`], [`quantile`], [`consensus`];
//! * the particle dynamics and reproducible noise — [`dynamics`];
//! * benchmark objectives and gradient-descent baselines — [`bench`];
//! * certifiable theory diagnostics (moment bounds, mass lower bounds,
//!   Laplace-principle domination, decay-rate fits) — [`diagnostics`].
//!
//! A CLI (`scb2o run|sweep|check|compare|constants`) orchestrates experiment
//! runs with deterministic seeding and CSV/JSON archives; see the [`cli`]
//! module and the book under `book/` for a guided tour.
//!
//! ```
//! use scb2o::params::AlgorithmParams;
//! use scb2o::quantile::soft_quantile;
//!
//! let params = AlgorithmParams::from_xi(30.0, 0.05, 1e4, 1.0, 1.0, 0.01, 600, 100).unwrap();
//! let l = vec![0.3, 0.1, 0.9, 0.4];
//! let sol = soft_quantile(&l, params.beta(), params.tau()).unwrap();
//! assert!(sol.residual <= 1e-12);
//! ```

pub mod bench;
pub mod cli;
pub mod consensus;
pub mod diagnostics;
pub mod dynamics;
pub mod ensemble;
mod error;
pub mod numeric;
pub mod objective;
pub mod params;
pub mod quantile;
pub mod selector;

pub use error::{Error, Result};
