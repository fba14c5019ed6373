//! Interacting Brownian particles on periodic tori.
//!
//! Particles follow the overdamped Langevin dynamics
//! `dXᵢ = −Σⱼ ∇V(Xᵢ − Xⱼ) dt + σ dBᵢ` on the torus `[0, L)^d`. Long runs
//! sample the Gibbs measure, and time averages of the virial sum estimate the
//! pressure law `P(ρ) = σ²ρ − Ψ(ρ)` of the macroscopic equation
//! `∂t ρ = ½ Δ P(ρ)`.
//!
//! - [`torus`]: periodic wrapping and minimal images.
//! - [`potential`]: the pair-potential families.
//! - [`neighbor`], [`dynamics`]: cell lists and the Euler–Maruyama integrator.
//! - [`virial`]: pressure estimates and pressure curves.
//! - [`analysis`]: closed-form predictions and log-log fits.
//! - [`pde`]: the limiting equation in one dimension.
//! - [`experiment`]: JSON-configured experiments and their artifacts.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod neighbor;
pub mod pde;
pub mod potential;
mod quadrature;
pub mod rng;
pub mod torus;
pub mod virial;

pub use error::{Error, Result};
