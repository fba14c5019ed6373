//! Overdamped Langevin dynamics of the particle system.
//!
//! Each particle follows `dX_i = −Σ_{j≠i} ∇V(X_i − X_j) dt + σ dB_i` on the
//! torus, integrated by Euler–Maruyama. Positions are kept wrapped at all
//! times; there is no unwrapped trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbor::NeighborList;
use crate::potential::{DerivativeKernel, PotentialSpec};
use crate::rng::NoiseStream;
use crate::torus::{TorusBox, MAX_DIM};

/// Positions of `K` particles, stored row-major as a `K × d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleState {
    positions: Vec<f64>,
    time: f64,
    torus: TorusBox,
}

impl ParticleState {
    /// Wraps `positions` (length `K·d`) into the box.
    pub fn new(torus: TorusBox, mut positions: Vec<f64>) -> Result<Self> {
        let d = torus.dimension();
        if positions.len() % d != 0 {
            return Err(Error::Domain(format!(
                "{} coordinates do not form {d}-dimensional points",
                positions.len()
            )));
        }
        for chunk in positions.chunks_mut(d) {
            torus.wrap_in_place(chunk)?;
        }
        Ok(ParticleState {
            positions,
            time: 0.0,
            torus,
        })
    }

    pub fn torus(&self) -> &TorusBox {
        &self.torus
    }

    pub fn dimension(&self) -> usize {
        self.torus.dimension()
    }

    pub fn n_particles(&self) -> usize {
        self.positions.len() / self.torus.dimension()
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.torus.dimension();
        &self.positions[i * d..(i + 1) * d]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `K / L^d`.
    pub fn rho_eff(&self) -> f64 {
        self.n_particles() as f64 / self.torus.volume()
    }

    /// Rigid shift of every particle, re-wrapped.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        let d = self.dimension();
        if shift.len() != d {
            return Err(Error::Domain("shift has the wrong dimension".into()));
        }
        let mut positions = self.positions.clone();
        for chunk in positions.chunks_mut(d) {
            for (c, s) in chunk.iter_mut().zip(shift) {
                *c += s;
            }
        }
        let mut out = ParticleState::new(self.torus, positions)?;
        out.time = self.time;
        Ok(out)
    }

    /// Swaps the labels of particles `i` and `j`.
    pub fn swap_labels(&mut self, i: usize, j: usize) {
        let d = self.dimension();
        for a in 0..d {
            self.positions.swap(i * d + a, j * d + a);
        }
    }
}

/// How the initial configuration is laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Equal spacing `1/ρ` filling the ring (d = 1).
    RepulsiveLattice,
    /// Contiguous cluster at spacing `r0` when `ρ < 1/r0` (d = 1).
    AdhesionCluster,
    UniformRandom,
    /// Uniform cubic grid with `K^{1/d}` points per axis.
    Grid,
}

/// Parameters of one simulation run. Optional fields are filled in by
/// [`SimulationConfig::resolved`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub spec: PotentialSpec,
    #[serde(rename = "box")]
    pub torus: TorusBox,
    /// Nominal density; the particle count is `⌊ρ L^d⌋`.
    pub rho: f64,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    /// Time step, or the upper bound on it when `stiffness_safety` is set.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// When set, the step is `min(dt, stiffness_safety / κ)` with `κ` a
    /// Gershgorin bound on the Hessian of the equilibrium lattice.
    #[serde(default)]
    pub stiffness_safety: Option<f64>,
    #[serde(default)]
    pub burn_in_steps: Option<u64>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub sample_stride: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    /// Pair distances below this are evaluated here (singularity clamp).
    #[serde(default)]
    pub min_separation: Option<f64>,
    #[serde(default)]
    pub init_mode: Option<InitMode>,
}

fn default_noise_sigma() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    1e-4
}

fn default_n_samples() -> usize {
    1000
}

impl SimulationConfig {
    /// Minimal config: everything else defaulted.
    pub fn new(spec: PotentialSpec, torus: TorusBox, rho: f64) -> Self {
        SimulationConfig {
            spec,
            torus,
            rho,
            noise_sigma: default_noise_sigma(),
            dt: default_dt(),
            stiffness_safety: None,
            burn_in_steps: None,
            n_samples: default_n_samples(),
            sample_stride: None,
            seed: 0,
            min_separation: None,
            init_mode: None,
        }
    }

    pub fn n_particles(&self) -> usize {
        (self.rho * self.torus.volume() + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.torus.validate()?;
        self.spec.validate()?;
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be nonnegative".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if let Some(s) = self.stiffness_safety {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Config("stiffness_safety must be positive".into()));
            }
        }
        if self.sample_stride == Some(0) {
            return Err(Error::Config("sample_stride must be positive".into()));
        }
        if let Some(m) = self.min_separation {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Config("min_separation must be positive".into()));
            }
        }
        let cutoff = self.spec.interaction_cutoff(self.torus.side());
        if cutoff > 0.5 * self.torus.side() * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "interaction cutoff {cutoff} exceeds L/2 = {}; minimal-image convention requires cutoff <= L/2",
                0.5 * self.torus.side()
            )));
        }
        if self.n_particles() == 0 {
            return Err(Error::Config(format!(
                "rho·L^d = {} gives no particles",
                self.rho * self.torus.volume()
            )));
        }
        match (self.init_mode, self.torus.dimension()) {
            (Some(InitMode::RepulsiveLattice | InitMode::AdhesionCluster), d) if d != 1 => {
                return Err(Error::Config(format!(
                    "lattice/cluster initialization is one-dimensional; use grid in d={d}"
                )))
            }
            (Some(InitMode::AdhesionCluster), _)
                if !matches!(self.spec, PotentialSpec::PowerLawAttractiveRepulsive { .. }) =>
            {
                return Err(Error::Config(
                    "adhesion_cluster initialization requires an attractive-repulsive potential".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    /// Default clamp radius: `1e-3·r1` for power laws, `1e-6·width` for Gaussians.
    fn default_min_separation(&self) -> f64 {
        match self.spec {
            PotentialSpec::PowerLawRepulsive { r1, .. } => 1e-3 * r1.unwrap_or(1.0),
            PotentialSpec::PowerLawAttractiveRepulsive { r1, .. } => 1e-3 * r1,
            PotentialSpec::GaussianRepulsive { width } | PotentialSpec::GaussianCubic { width } => {
                1e-6 * width
            }
            PotentialSpec::Zero => 1e-9,
        }
    }

    fn default_init_mode(&self) -> InitMode {
        match (self.torus.dimension(), self.spec) {
            (1, PotentialSpec::PowerLawAttractiveRepulsive { .. }) => InitMode::AdhesionCluster,
            (1, _) => InitMode::RepulsiveLattice,
            _ => InitMode::Grid,
        }
    }

    /// Copy with every optional field filled in.
    ///
    /// Burn-in defaults to `10 L²/σ²` time units and the sample stride to
    /// `L²/(10σ²)`, both converted to steps with the effective time step.
    pub fn resolved(&self) -> Result<SimulationConfig> {
        self.validate()?;
        let mut out = self.clone();
        let dt = self.effective_dt();
        let l2 = self.torus.side().powi(2);
        let s2 = self.noise_sigma * self.noise_sigma;
        let steps = |time: f64| -> u64 {
            if s2 > 0.0 {
                (time / dt * (1.0 - 1e-12)).ceil().max(1.0) as u64
            } else {
                1
            }
        };
        if out.burn_in_steps.is_none() {
            out.burn_in_steps = Some(if s2 > 0.0 { steps(10.0 * l2 / s2) } else { 0 });
        }
        if out.sample_stride.is_none() {
            out.sample_stride = Some(if s2 > 0.0 { steps(l2 / (10.0 * s2)) } else { 1 });
        }
        if out.min_separation.is_none() {
            out.min_separation = Some(self.default_min_separation());
        }
        if out.init_mode.is_none() {
            out.init_mode = Some(self.default_init_mode());
        }
        out.validate()?;
        Ok(out)
    }

    pub fn rho_eff(&self) -> f64 {
        self.n_particles() as f64 / self.torus.volume()
    }

    /// The time step actually used by the integrator.
    pub fn effective_dt(&self) -> f64 {
        match self.stiffness_safety {
            Some(s) => {
                let k = lattice_stiffness(&self.spec, self.rho_eff(), &self.torus);
                if k > 0.0 {
                    self.dt.min(s / k)
                } else {
                    self.dt
                }
            }
            None => self.dt,
        }
    }
}

/// Gershgorin bound on the largest Hessian eigenvalue of the uniform
/// lattice at density `rho`: `2 Σ_n max(|U''(r_n)|, |U'(r_n)|/r_n)` over
/// lattice vectors within the interaction cutoff.
pub fn lattice_stiffness(spec: &PotentialSpec, rho: f64, torus: &TorusBox) -> f64 {
    let d = torus.dimension();
    let spacing = rho.powf(-1.0 / d as f64);
    let cutoff = spec.interaction_cutoff(torus.side());
    let nmax = (cutoff / spacing).floor() as i64;
    let mut total = 0.0;
    let mut visit = |n2: i64| {
        if n2 == 0 {
            return;
        }
        let r = (n2 as f64).sqrt() * spacing;
        if r > cutoff {
            return;
        }
        let radial = spec.second_derivative(r).abs();
        let transverse = if d > 1 {
            spec.derivative_unchecked(r).abs() / r
        } else {
            0.0
        };
        total += radial.max(transverse);
    };
    match d {
        1 => (-nmax..=nmax).for_each(|a| visit(a * a)),
        2 => {
            for a in -nmax..=nmax {
                for b in -nmax..=nmax {
                    visit(a * a + b * b);
                }
            }
        }
        _ => {
            for a in -nmax..=nmax {
                for b in -nmax..=nmax {
                    for c in -nmax..=nmax {
                        visit(a * a + b * b + c * c);
                    }
                }
            }
        }
    }
    2.0 * total
}

/// Builds the initial configuration for `config` (after resolving defaults).
pub fn build_initial_lattice(config: &SimulationConfig) -> Result<ParticleState> {
    let config = config.resolved()?;
    let torus = config.torus;
    let l = torus.side();
    let d = torus.dimension();
    let k = config.n_particles();
    let mode = config.init_mode.expect("resolved");
    let positions = match mode {
        InitMode::RepulsiveLattice => (0..k).map(|i| i as f64 * l / k as f64).collect(),
        InitMode::AdhesionCluster => {
            let PotentialSpec::PowerLawAttractiveRepulsive { r0, .. } = config.spec else {
                unreachable!("validated");
            };
            let rho_eff = k as f64 / l;
            if rho_eff < 1.0 / r0 {
                (0..k).map(|i| i as f64 * r0).collect()
            } else {
                (0..k).map(|i| i as f64 * l / k as f64).collect()
            }
        }
        InitMode::UniformRandom => {
            let mut noise = NoiseStream::new(config.seed);
            noise
                .init_uniforms(k * d)
                .into_iter()
                .map(|u| u * l)
                .collect()
        }
        InitMode::Grid => {
            let per_axis = (k as f64).powf(1.0 / d as f64).round().max(1.0) as usize;
            let k_grid = per_axis.pow(d as u32);
            if k_grid != k {
                log::warn!(
                    "{k} particles do not fill a {d}-dimensional grid; using {k_grid} = {per_axis}^{d}"
                );
            }
            let h = l / per_axis as f64;
            let mut out = Vec::with_capacity(k_grid * d);
            for idx in 0..k_grid {
                let mut rest = idx;
                for _ in 0..d {
                    out.push((rest % per_axis) as f64 * h);
                    rest /= per_axis;
                }
            }
            out
        }
    };
    ParticleState::new(torus, positions)
}

/// Bookkeeping of the force singularity clamp.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForceDiagnostics {
    /// Pair force evaluations within the cutoff.
    pub pair_evaluations: u64,
    /// Evaluations where the distance was raised to `min_separation`.
    pub clamped: u64,
    /// Subset of `clamped` with exactly coincident particles.
    pub coincident: u64,
}

impl ForceDiagnostics {
    pub fn clamp_rate(&self) -> f64 {
        if self.pair_evaluations == 0 {
            0.0
        } else {
            self.clamped as f64 / self.pair_evaluations as f64
        }
    }
}

/// Accumulates `F_i = Σ_{j≠i} −∇V(x_i − x_j)` into `out` (length `K·d`).
///
/// Pairs closer than `min_separation` are evaluated at `min_separation`
/// along the same direction; exactly coincident pairs use a random unit
/// direction drawn from `clamp_noise`.
pub fn accumulate_forces(
    state: &ParticleState,
    spec: &PotentialSpec,
    neighbors: &NeighborList,
    min_separation: f64,
    clamp_noise: &mut NoiseStream,
    diagnostics: &mut ForceDiagnostics,
    out: &mut [f64],
) {
    let d = state.dimension();
    out.iter_mut().for_each(|f| *f = 0.0);
    if matches!(spec, PotentialSpec::Zero) {
        return;
    }
    let min2 = min_separation * min_separation;
    let kernel = DerivativeKernel::new(spec);
    let clamped_scale = -kernel.over_r(min2);
    let mut evaluations = 0u64;
    neighbors.for_each_pair(state, |i, j, disp, r2| {
        evaluations += 1;
        let (scale, dir) = if r2 >= min2 {
            (-kernel.over_r(r2), *disp)
        } else {
            diagnostics.clamped += 1;
            let mut dir = [0.0; MAX_DIM];
            if r2 > 0.0 {
                let r = r2.sqrt();
                for a in 0..d {
                    dir[a] = disp[a] / r * min_separation;
                }
            } else {
                let u = clamp_noise.clamp_direction(diagnostics.coincident, d);
                diagnostics.coincident += 1;
                for a in 0..d {
                    dir[a] = u[a] * min_separation;
                }
            }
            (clamped_scale, dir)
        };
        for a in 0..d {
            let f = scale * dir[a];
            out[i * d + a] += f;
            out[j * d + a] -= f;
        }
    });
    diagnostics.pair_evaluations += evaluations;
}

/// Force matrix for `state`, flattened row-major (`K × d`).
pub fn compute_forces(
    state: &ParticleState,
    spec: &PotentialSpec,
    neighbors: &NeighborList,
    min_separation: f64,
) -> Result<Vec<f64>> {
    if neighbors.cutoff() + 1e-12 < spec.interaction_cutoff(state.torus().side()) {
        return Err(Error::Config(format!(
            "neighbor cutoff {} is shorter than the interaction range {}",
            neighbors.cutoff(),
            spec.interaction_cutoff(state.torus().side())
        )));
    }
    let mut out = vec![0.0; state.positions.len()];
    let mut noise = NoiseStream::new(0);
    let mut diag = ForceDiagnostics::default();
    accumulate_forces(
        state,
        spec,
        neighbors,
        min_separation,
        &mut noise,
        &mut diag,
        &mut out,
    );
    Ok(out)
}

/// One Euler–Maruyama step `x ← wrap(x + F dt + σ √dt ξ)`, where `normals`
/// holds the standard Gaussian increments `ξ` for this step.
pub fn em_step(
    state: &mut ParticleState,
    forces: &[f64],
    normals: &[f64],
    dt: f64,
    noise_sigma: f64,
    step_index: u64,
) -> Result<()> {
    let amp = noise_sigma * dt.sqrt();
    let torus = state.torus;
    for ((x, f), z) in state.positions.iter_mut().zip(forces).zip(normals) {
        let next = *x + f * dt + amp * z;
        if !next.is_finite() {
            return Err(Error::BlowUp {
                step: step_index,
                detail: "non-finite position; the time step is too large for this potential"
                    .into(),
            });
        }
        *x = torus.wrap_coord(next);
    }
    state.time += dt;
    Ok(())
}

/// One observation handed to a [`simulate`] observer.
pub struct Sample<'a> {
    pub index: usize,
    pub step: u64,
    pub state: &'a ParticleState,
    pub neighbors: &'a NeighborList,
}

#[derive(Clone, Debug)]
pub struct SimulationOutcome {
    pub final_state: ParticleState,
    pub diagnostics: ForceDiagnostics,
    pub dt: f64,
    pub steps: u64,
}

/// A running simulation: state plus the buffers reused across steps.
pub struct Simulation {
    config: SimulationConfig,
    state: ParticleState,
    neighbors: NeighborList,
    forces: Vec<f64>,
    normals: Vec<f64>,
    noise: NoiseStream,
    clamp_noise: NoiseStream,
    diagnostics: ForceDiagnostics,
    dt: f64,
    steps: u64,
}

impl Simulation {
    pub fn new(config: &SimulationConfig) -> Result<Self> {
        let config = config.resolved()?;
        let state = build_initial_lattice(&config)?;
        Self::from_state(&config, state)
    }

    /// Starts from an explicit state instead of the configured initializer.
    pub fn from_state(config: &SimulationConfig, state: ParticleState) -> Result<Self> {
        let config = config.resolved()?;
        if state.torus() != &config.torus {
            return Err(Error::Config("state and config boxes differ".into()));
        }
        let cutoff = config.spec.interaction_cutoff(config.torus.side());
        let cutoff = if cutoff > 0.0 {
            cutoff
        } else {
            // zero potential: any valid list will do
            0.5 * config.torus.side()
        };
        let neighbors = NeighborList::build(&state, cutoff)?;
        let dt = config.effective_dt();
        let min_sep = config.min_separation.expect("resolved");
        let bound = config.spec.force_bound(min_sep);
        let spacing = state.rho_eff().powf(-1.0 / state.dimension() as f64);
        if dt * bound >= spacing {
            log::warn!(
                "dt·|U'(min_separation)| = {:.3e} exceeds the typical spacing {spacing:.3e}; \
                 the clamp alone does not guarantee stability",
                dt * bound
            );
        }
        let n = state.positions.len();
        Ok(Simulation {
            noise: NoiseStream::new(config.seed),
            clamp_noise: NoiseStream::new(crate::rng::derive_seed(config.seed, u64::MAX)),
            config,
            state,
            neighbors,
            forces: vec![0.0; n],
            normals: vec![0.0; n],
            diagnostics: ForceDiagnostics::default(),
            dt,
            steps: 0,
        })
    }

    pub fn state(&self) -> &ParticleState {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn diagnostics(&self) -> ForceDiagnostics {
        self.diagnostics
    }

    /// Advances one Euler–Maruyama step.
    pub fn advance(&mut self) -> Result<()> {
        self.neighbors.rebuild(&self.state);
        accumulate_forces(
            &self.state,
            &self.config.spec,
            &self.neighbors,
            self.config.min_separation.expect("resolved"),
            &mut self.clamp_noise,
            &mut self.diagnostics,
            &mut self.forces,
        );
        let sigma = self.config.noise_sigma;
        if sigma > 0.0 {
            self.noise
                .fill_step(self.steps, self.state.dimension(), &mut self.normals);
        }
        em_step(
            &mut self.state,
            &self.forces,
            &self.normals,
            self.dt,
            sigma,
            self.steps,
        )?;
        self.steps += 1;
        Ok(())
    }

    /// Burn-in, then `n_samples` observations every `sample_stride` steps.
    pub fn run<F>(mut self, mut observer: F) -> Result<SimulationOutcome>
    where
        F: FnMut(&Sample<'_>),
    {
        let burn_in = self.config.burn_in_steps.expect("resolved");
        let stride = self.config.sample_stride.expect("resolved");
        for _ in 0..burn_in {
            self.advance()?;
        }
        for index in 0..self.config.n_samples {
            for _ in 0..stride {
                self.advance()?;
            }
            self.neighbors.rebuild(&self.state);
            observer(&Sample {
                index,
                step: self.steps,
                state: &self.state,
                neighbors: &self.neighbors,
            });
        }
        Ok(SimulationOutcome {
            final_state: self.state,
            diagnostics: self.diagnostics,
            dt: self.dt,
            steps: self.steps,
        })
    }
}

/// Runs `config` from its initializer, invoking `observer` on every sample.
/// Deterministic for a fixed seed.
pub fn simulate<F>(config: &SimulationConfig, observer: F) -> Result<SimulationOutcome>
where
    F: FnMut(&Sample<'_>),
{
    Simulation::new(config)?.run(observer)
}

#[derive(Clone, Debug)]
pub struct RelaxOutcome {
    pub state: ParticleState,
    pub converged: bool,
    pub steps: u64,
    pub max_force: f64,
}

/// Noiseless gradient flow `ẋ_i = F_i` with explicit steps of size `step`,
/// until `max_i |F_i| < tol` or `max_steps` is reached.
pub fn relax_deterministic(
    state: &ParticleState,
    spec: &PotentialSpec,
    step: f64,
    tol: f64,
    max_steps: u64,
) -> Result<RelaxOutcome> {
    let mut state = state.clone();
    let d = state.dimension();
    let cutoff = spec.interaction_cutoff(state.torus().side());
    let cutoff = if cutoff > 0.0 { cutoff } else { 0.5 * state.torus().side() };
    let mut neighbors = NeighborList::build(&state, cutoff)?;
    let mut forces = vec![0.0; state.positions.len()];
    let zeros = vec![0.0; state.positions.len()];
    let mut clamp_noise = NoiseStream::new(0);
    let mut diag = ForceDiagnostics::default();
    let min_sep = 1e-9 * cutoff;
    let mut steps = 0;
    loop {
        neighbors.rebuild(&state);
        accumulate_forces(
            &state,
            spec,
            &neighbors,
            min_sep,
            &mut clamp_noise,
            &mut diag,
            &mut forces,
        );
        let max_force = forces
            .chunks(d)
            .map(|f| f.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if max_force < tol || steps >= max_steps {
            return Ok(RelaxOutcome {
                state,
                converged: max_force < tol,
                steps,
                max_force,
            });
        }
        em_step(&mut state, &forces, &zeros, step, 0.0, steps)?;
        steps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rep2() -> PotentialSpec {
        PotentialSpec::PowerLawRepulsive {
            alpha: 2.0,
            r1: Some(1.0),
        }
    }

    fn cfg1(spec: PotentialSpec, l: f64, rho: f64) -> SimulationConfig {
        SimulationConfig::new(spec, TorusBox::new(1, l).unwrap(), rho)
    }

    #[test]
    fn repulsive_lattice_example() {
        let s = build_initial_lattice(&cfg1(rep2(), 5.0, 2.0)).unwrap();
        assert_eq!(s.n_particles(), 10);
        for i in 0..10 {
            assert!((s.position(i)[0] - 0.5 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn adhesion_cluster_example() {
        let spec = PotentialSpec::PowerLawAttractiveRepulsive {
            alpha: 2.0,
            beta: 1.5,
            r0: 1.0,
            r1: 1.5,
        };
        let mut c = cfg1(spec, 10.0, 0.5);
        c.init_mode = Some(InitMode::AdhesionCluster);
        let s = build_initial_lattice(&c).unwrap();
        assert_eq!(s.n_particles(), 5);
        let xs: Vec<f64> = (0..5).map(|i| s.position(i)[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        // dense case falls back to equal spacing
        let s = build_initial_lattice(&cfg1(spec, 10.0, 2.0)).unwrap();
        assert!((s.position(1)[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_example() {
        let c = SimulationConfig::new(rep2(), TorusBox::new(2, 4.0).unwrap(), 1.0);
        let s = build_initial_lattice(&c).unwrap();
        assert_eq!(s.n_particles(), 16);
        let t = s.torus();
        let mut min = f64::INFINITY;
        for i in 0..16 {
            for j in (i + 1)..16 {
                min = min.min(t.distance(s.position(i), s.position(j)).unwrap());
            }
        }
        assert!((min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_rounds_to_feasible_count() {
        let c = SimulationConfig::new(rep2(), TorusBox::new(2, 4.0).unwrap(), 1.2);
        // 19 particles requested, 16 = 4² placed
        assert_eq!(build_initial_lattice(&c).unwrap().n_particles(), 16);
    }

    #[test]
    fn incompatible_init_modes() {
        let mut c = cfg1(rep2(), 10.0, 1.0);
        c.init_mode = Some(InitMode::AdhesionCluster);
        assert!(matches!(build_initial_lattice(&c), Err(Error::Config(_))));
        let mut c = SimulationConfig::new(rep2(), TorusBox::new(2, 4.0).unwrap(), 1.0);
        c.init_mode = Some(InitMode::RepulsiveLattice);
        assert!(matches!(build_initial_lattice(&c), Err(Error::Config(_))));
    }

    #[test]
    fn two_particle_forces() {
        let s = ParticleState::new(TorusBox::new(1, 10.0).unwrap(), vec![1.0, 1.5]).unwrap();
        let nl = NeighborList::build(&s, 1.0).unwrap();
        let f = compute_forces(&s, &rep2(), &nl, 1e-3).unwrap();
        assert!((f[0] + 8.0).abs() < 1e-12 && (f[1] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_forces_vanish() {
        let s = ParticleState::new(TorusBox::new(1, 10.0).unwrap(), vec![1.0, 2.5, 5.0]).unwrap();
        let nl = NeighborList::build(&s, 1.0).unwrap();
        assert_eq!(compute_forces(&s, &rep2(), &nl, 1e-3).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn short_neighbor_cutoff_is_rejected() {
        let s = ParticleState::new(TorusBox::new(1, 10.0).unwrap(), vec![1.0, 1.5]).unwrap();
        let nl = NeighborList::build(&s, 0.5).unwrap();
        assert!(compute_forces(&s, &rep2(), &nl, 1e-3).is_err());
    }

    #[test]
    fn clamp_and_coincidence() {
        let s = ParticleState::new(TorusBox::new(1, 10.0).unwrap(), vec![1.0, 1.0, 1.0005])
            .unwrap();
        let nl = NeighborList::build(&s, 1.0).unwrap();
        let mut out = vec![0.0; 3];
        let mut diag = ForceDiagnostics::default();
        accumulate_forces(
            &s,
            &rep2(),
            &nl,
            1e-3,
            &mut NoiseStream::new(1),
            &mut diag,
            &mut out,
        );
        assert_eq!(diag.pair_evaluations, 3);
        assert_eq!(diag.clamped, 3);
        assert_eq!(diag.coincident, 1);
        assert!(out.iter().all(|f| f.is_finite()));
        assert!(out.iter().sum::<f64>().abs() < 1e-6 * 1e9);
    }

    #[test]
    fn em_step_without_drift_or_noise() {
        let mut s = ParticleState::new(TorusBox::new(1, 10.0).unwrap(), vec![3.0]).unwrap();
        em_step(&mut s, &[0.0], &[1.3], 1e-3, 0.0, 0).unwrap();
        assert_eq!(s.position(0), &[3.0]);
        assert!((s.time() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn em_step_reports_blow_up() {
        let mut s = ParticleState::new(TorusBox::new(1, 10.0).unwrap(), vec![3.0]).unwrap();
        let e = em_step(&mut s, &[f64::INFINITY], &[0.0], 1e-3, 0.0, 17).unwrap_err();
        assert!(matches!(e, Error::BlowUp { step: 17, .. }));
    }

    #[test]
    fn noiseless_repulsion_separates() {
        let mut c = cfg1(rep2(), 10.0, 0.2);
        c.noise_sigma = 0.0;
        c.burn_in_steps = Some(0);
        c.n_samples = 0;
        let s0 = ParticleState::new(c.torus, vec![1.0, 1.4]).unwrap();
        let mut sim = Simulation::from_state(&c, s0).unwrap();
        let mut prev = 0.4;
        for _ in 0..50 {
            sim.advance().unwrap();
            let s = sim.state();
            let gap = s.torus().distance(s.position(0), s.position(1)).unwrap();
            assert!(gap > prev);
            prev = gap;
        }
    }

    #[test]
    fn zero_samples_returns_post_burn_in_state() {
        let mut c = cfg1(rep2(), 10.0, 1.0);
        c.burn_in_steps = Some(25);
        c.n_samples = 0;
        let mut calls = 0;
        let out = simulate(&c, |_| calls += 1).unwrap();
        assert_eq!(calls, 0);
        assert_eq!(out.steps, 25);
        assert!((out.final_state.time() - 25.0 * 1e-4).abs() < 1e-12);
    }

    #[test]
    fn relax_equal_spacing_is_immediate() {
        let s = build_initial_lattice(&cfg1(rep2(), 10.0, 3.0)).unwrap();
        let out = relax_deterministic(&s, &rep2(), 1e-3, 1e-8, 10).unwrap();
        assert!(out.converged);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn relax_pair_to_potential_minimum() {
        let spec = PotentialSpec::PowerLawAttractiveRepulsive {
            alpha: 2.0,
            beta: 1.5,
            r0: 1.0,
            r1: 1.5,
        };
        let s = ParticleState::new(TorusBox::new(1, 10.0).unwrap(), vec![2.0, 3.2]).unwrap();
        let out = relax_deterministic(&s, &spec, 0.1, 1e-8, 100_000).unwrap();
        assert!(out.converged);
        let gap = out.state.torus().distance(out.state.position(0), out.state.position(1)).unwrap();
        assert!((gap - 1.0).abs() < 1e-6, "{gap}");
    }

    #[test]
    fn stiffness_bound_scales_with_density() {
        let t = TorusBox::new(1, 50.0).unwrap();
        let k4 = lattice_stiffness(&rep2(), 4.0, &t);
        let k8 = lattice_stiffness(&rep2(), 8.0, &t);
        // U'' ∝ r^-4 dominates
        assert!(k8 / k4 > 14.0 && k8 / k4 < 18.0, "{}", k8 / k4);
        assert_eq!(lattice_stiffness(&rep2(), 0.5, &t), 0.0);
    }

    #[test]
    fn resolved_fills_defaults() {
        let c = cfg1(rep2(), 10.0, 1.0).resolved().unwrap();
        assert_eq!(c.burn_in_steps, Some(10_000_000));
        assert_eq!(c.sample_stride, Some(100_000));
        assert_eq!(c.min_separation, Some(1e-3));
        assert_eq!(c.init_mode, Some(InitMode::RepulsiveLattice));
        assert_eq!(c.resolved().unwrap(), c);
    }
}
