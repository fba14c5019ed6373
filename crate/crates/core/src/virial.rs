//! Virial estimation of the pressure law.
//!
//! For a configuration `x` on the torus the virial sum is
//! `Ψ(x) = L^{-d} Σ_{i≠j} ψ(x_i − x_j)` with the isotropic kernel
//! `ψ(x) = |x| U'(|x|)/d`; ordered pairs are counted, so every unordered pair
//! contributes twice. Time-averaging `Ψ` along a long stationary run gives
//! `Ψ̂_V(ρ)`, and the pressure estimate is `P̂_V(ρ) = σ²ρ − Ψ̂_V(ρ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{build_initial_lattice, simulate, ParticleState, SimulationConfig};
use crate::error::{Error, Result};
use crate::neighbor::NeighborList;
use crate::potential::{DerivativeKernel, PotentialSpec};
use crate::rng::derive_seed;

/// Number of batches used for the batch-means standard error.
pub const N_BATCHES: usize = 10;

/// Clamp rates above this trigger a warning.
pub const CLAMP_RATE_WARNING: f64 = 1e-4;

/// `L^{-d} Σ_{i≠j} ψ(x_i − x_j)` over ordered pairs.
pub fn virial_sum(
    state: &ParticleState,
    spec: &PotentialSpec,
    neighbors: &NeighborList,
) -> Result<f64> {
    if matches!(spec, PotentialSpec::Zero) {
        return Ok(0.0);
    }
    let torus = state.torus();
    if neighbors.cutoff() + 1e-12 < spec.interaction_cutoff(torus.side()) {
        return Err(Error::Config(format!(
            "neighbor cutoff {} is shorter than the interaction range",
            neighbors.cutoff()
        )));
    }
    let d = state.dimension() as f64;
    let kernel = DerivativeKernel::new(spec);
    let mut sum = 0.0;
    let mut coincident = false;
    neighbors.for_each_pair(state, |_, _, _, r2| {
        if r2 == 0.0 {
            coincident = true;
            return;
        }
        sum += r2 * kernel.over_r(r2);
    });
    if coincident {
        return Err(Error::Domain(
            "virial kernel evaluated at coincident particles".into(),
        ));
    }
    Ok(2.0 * sum / (d * torus.volume()))
}

/// Time-averaged virial estimate at one density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirialEstimate {
    pub rho_eff: f64,
    pub psi_hat: f64,
    /// `noise_sigma² · rho_eff − psi_hat`.
    pub p_hat: f64,
    /// Batch-means standard error of `psi_hat` (and of `p_hat`).
    pub std_error: f64,
    pub n_samples: usize,
    pub clamp_rate: f64,
    pub noise_sigma: f64,
    /// Integrator step actually used.
    pub dt: f64,
    pub seed: u64,
}

impl VirialEstimate {
    fn from_samples(samples: &[f64], rho_eff: f64, noise_sigma: f64) -> Self {
        let n = samples.len();
        let psi_hat = samples.iter().sum::<f64>() / n as f64;
        let std_error = batch_means_error(samples);
        VirialEstimate {
            rho_eff,
            psi_hat,
            p_hat: noise_sigma * noise_sigma * rho_eff - psi_hat,
            std_error,
            n_samples: n,
            clamp_rate: 0.0,
            noise_sigma,
            dt: 0.0,
            seed: 0,
        }
    }
}

/// Standard error of the mean from up to [`N_BATCHES`] contiguous batch means.
pub fn batch_means_error(samples: &[f64]) -> f64 {
    let n_batches = N_BATCHES.min(samples.len());
    if n_batches < 2 {
        return 0.0;
    }
    let size = samples.len() / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| samples[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    (var / n_batches as f64).sqrt()
}

/// Simulates `config` and averages the virial sum over its samples.
pub fn estimate_pressure(config: &SimulationConfig) -> Result<VirialEstimate> {
    let config = config.resolved()?;
    if config.n_samples == 0 {
        return Err(Error::Config("estimate_pressure needs n_samples >= 1".into()));
    }
    let mut samples = Vec::with_capacity(config.n_samples);
    let mut failure = None;
    let outcome = simulate(&config, |s| match virial_sum(s.state, &config.spec, s.neighbors) {
        Ok(v) => samples.push(v),
        Err(e) => {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut est = VirialEstimate::from_samples(
        &samples,
        outcome.final_state.rho_eff(),
        config.noise_sigma,
    );
    est.clamp_rate = outcome.diagnostics.clamp_rate();
    est.dt = outcome.dt;
    est.seed = config.seed;
    log::info!(
        "rho={:.4} p_hat={:.6e} ± {:.2e} (K={}, dt={:.2e})",
        est.rho_eff,
        est.p_hat,
        est.std_error,
        outcome.final_state.n_particles(),
        est.dt
    );
    if est.clamp_rate > CLAMP_RATE_WARNING {
        log::warn!(
            "clamp rate {:.2e} at rho={:.4} exceeds {CLAMP_RATE_WARNING:e}; the virial may be biased",
            est.clamp_rate,
            est.rho_eff
        );
    }
    Ok(est)
}

/// Where a curve came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the resolved base configuration, hex encoded.
    pub config_digest: String,
    pub seed: u64,
    /// Pair-counting convention of `psi_hat`.
    pub pair_convention: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureCurve {
    pub spec: PotentialSpec,
    pub noise_sigma: f64,
    /// Ordered by strictly increasing `rho_eff`.
    pub points: Vec<VirialEstimate>,
    pub provenance: Provenance,
}

impl PressureCurve {
    pub fn rho(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rho_eff).collect()
    }

    pub fn p_hat(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p_hat).collect()
    }
}

/// A density at which the estimator failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub rho: f64,
    pub exit_code: i32,
    pub message: String,
}

/// A curve plus whatever points could not be computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveOutcome {
    pub curve: PressureCurve,
    pub failures: Vec<PointFailure>,
}

impl CurveOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn config_digest(config: &SimulationConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

/// Configurations of the individual points: `L` fixed, `ρ` from the grid and
/// seed `derive_seed(seed, index)`.
pub fn curve_point_configs(
    base: &SimulationConfig,
    rho_grid: &[f64],
) -> Result<Vec<SimulationConfig>> {
    if rho_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("rho grid must be strictly increasing".into()));
    }
    let configs: Vec<SimulationConfig> = rho_grid
        .iter()
        .enumerate()
        .map(|(i, &rho)| {
            let mut c = base.clone();
            c.rho = rho;
            c.seed = derive_seed(base.seed, i as u64);
            c
        })
        .collect();
    let counts: Vec<usize> = configs.iter().map(|c| c.n_particles()).collect();
    if counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "grid densities collapse to the same particle count in this box: {counts:?}"
        )));
    }
    Ok(configs)
}

/// One [`estimate_pressure`] per density. Failed points are reported in
/// `failures`; the curve holds the successful ones.
pub fn pressure_curve(base: &SimulationConfig, rho_grid: &[f64]) -> Result<CurveOutcome> {
    pressure_curve_with(base, rho_grid, false)
}

/// As [`pressure_curve`], optionally evaluating points on the rayon pool.
/// Points are independent, so the result does not depend on `parallel`.
pub fn pressure_curve_with(
    base: &SimulationConfig,
    rho_grid: &[f64],
    parallel: bool,
) -> Result<CurveOutcome> {
    let resolved = base.resolved()?;
    let configs = curve_point_configs(base, rho_grid)?;
    let results: Vec<Result<VirialEstimate>> = if parallel {
        configs.par_iter().map(estimate_pressure).collect()
    } else {
        configs.iter().map(estimate_pressure).collect()
    };
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (rho, r) in rho_grid.iter().zip(results) {
        match r {
            Ok(est) => points.push(est),
            Err(e) => failures.push(PointFailure {
                rho: *rho,
                exit_code: e.exit_code(),
                message: e.to_string(),
            }),
        }
    }
    Ok(CurveOutcome {
        curve: PressureCurve {
            spec: base.spec,
            noise_sigma: base.noise_sigma,
            points,
            provenance: Provenance {
                config_digest: config_digest(&resolved),
                seed: base.seed,
                pair_convention: "ordered pairs (i,j) and (j,i) both counted".into(),
            },
        },
        failures,
    })
}

/// Exact virial sum of the equilibrium lattice at density `rho` in `torus`
/// (no dynamics).
pub fn lattice_virial(
    spec: &PotentialSpec,
    rho: f64,
    torus: &crate::torus::TorusBox,
) -> Result<f64> {
    let mut config = SimulationConfig::new(*spec, *torus, rho);
    config.noise_sigma = 0.0;
    let state = build_initial_lattice(&config)?;
    let cutoff = spec.interaction_cutoff(torus.side());
    if cutoff == 0.0 {
        return Ok(0.0);
    }
    let neighbors = NeighborList::build(&state, cutoff)?;
    virial_sum(&state, spec, &neighbors)
}
