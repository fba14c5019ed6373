//! JSON-configured experiments and their output files.
//!
//! A config names one experiment kind plus its parameters:
//!
//! ```json
//! {
//!   "seed": 7,
//!   "output_dir": "out/alpha2",
//!   "experiment": {
//!     "kind": "sweep",
//!     "simulation": { "spec": { "family": "power_law_repulsive", "alpha": 2.0, "r1": 1.0 },
//!                     "box": { "dimension": 1, "side": 50.0 }, "rho": 1.0 },
//!     "rho_grid": { "log_spaced": { "min": 4.0, "max": 8.0, "count": 5 } }
//!   }
//! }
//! ```
//!
//! Runs write `curve.csv`, `report.json`, `manifest.json` (and kind-specific
//! extras) under the output directory, guarded by a lock file.

use std::env;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    compare_report, fit_loglog_slope, predicted_exponent, ComparisonReport, Prediction, SlopeFit,
};
use crate::dynamics::{build_initial_lattice, relax_deterministic, ParticleState, SimulationConfig};
use crate::error::{Error, Result};
use crate::pde::{solve_pde, stable_dt, PressureLaw};
use crate::potential::PotentialSpec;
use crate::rng::NoiseStream;
use crate::virial::{config_digest, curve_point_configs, pressure_curve_with, PressureCurve};

/// Environment variable consulted for the seed when neither the command line
/// nor the config sets one.
pub const SEED_ENV: &str = "VIRIALAB_SEED";
pub const LOCK_FILE: &str = ".virialab.lock";
pub const CURVE_FILE: &str = "curve.csv";
pub const PLOT_FILE: &str = "plot.csv";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SNAPSHOT_FILE: &str = "snapshots.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run seed; overrides any seed inside `experiment`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub experiment: Experiment,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Densities of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoGrid {
    Values(Vec<f64>),
    LogSpaced { min: f64, max: f64, count: usize },
    Linear { min: f64, max: f64, count: usize },
}

impl RhoGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let spaced = |min: f64, max: f64, count: usize, log: bool| -> Result<Vec<f64>> {
            if !(min > 0.0 && max > min && count >= 2) {
                return Err(Error::Config(format!(
                    "grid needs 0 < min < max and count >= 2, got min={min}, max={max}, count={count}"
                )));
            }
            Ok((0..count)
                .map(|i| {
                    let f = i as f64 / (count - 1) as f64;
                    if log {
                        (min.ln() + f * (max.ln() - min.ln())).exp()
                    } else {
                        min + f * (max - min)
                    }
                })
                .collect())
        };
        match *self {
            RhoGrid::Values(ref v) => Ok(v.clone()),
            RhoGrid::LogSpaced { min, max, count } => spaced(min, max, count, true),
            RhoGrid::Linear { min, max, count } => spaced(min, max, count, false),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitWindow {
    pub rho_min: f64,
    pub rho_max: f64,
}

impl FitWindow {
    fn bounds(&self) -> (f64, f64) {
        (self.rho_min, self.rho_max)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho_min > 0.0 && self.rho_min < self.rho_max) {
            return Err(Error::Config(format!(
                "fit window needs 0 < rho_min < rho_max, got [{}, {}]",
                self.rho_min, self.rho_max
            )));
        }
        Ok(())
    }
}

/// Initial density of a PDE run on `M` cells, `x_i = i/M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    Constant { value: f64 },
    /// `mean + amplitude·cos(2π mode x)`.
    Cosine { mean: f64, amplitude: f64, mode: u32 },
    /// `background + height·exp(−(x − center)²/(2 width²))`, periodized.
    Bump { background: f64, height: f64, center: f64, width: f64 },
    Values { rho: Vec<f64> },
}

impl InitialProfile {
    pub fn sample(&self, m: usize) -> Result<Vec<f64>> {
        let x = |i: usize| i as f64 / m as f64;
        let v = match *self {
            InitialProfile::Constant { value } => vec![value; m],
            InitialProfile::Cosine {
                mean,
                amplitude,
                mode,
            } => (0..m)
                .map(|i| mean + amplitude * (std::f64::consts::TAU * mode as f64 * x(i)).cos())
                .collect(),
            InitialProfile::Bump {
                background,
                height,
                center,
                width,
            } => (0..m)
                .map(|i| {
                    let mut dx = x(i) - center;
                    dx -= dx.round();
                    background + height * (-dx * dx / (2.0 * width * width)).exp()
                })
                .collect(),
            InitialProfile::Values { ref rho } => {
                if rho.len() != m {
                    return Err(Error::Config(format!(
                        "initial profile has {} values but grid_size is {m}",
                        rho.len()
                    )));
                }
                rho.clone()
            }
        };
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Pressure curve over a density grid, with optional slope fits.
    Sweep {
        simulation: SimulationConfig,
        rho_grid: RhoGrid,
        #[serde(default)]
        fit_windows: Vec<FitWindow>,
    },
    /// Pressure curve compared with a closed-form law up to a constant.
    ClaimCompare {
        simulation: SimulationConfig,
        rho_grid: RhoGrid,
        prediction: Prediction,
        #[serde(default)]
        window: Option<FitWindow>,
    },
    /// Slope fits over several windows against the predicted exponent.
    ExponentTable {
        simulation: SimulationConfig,
        rho_grid: RhoGrid,
        fit_windows: Vec<FitWindow>,
    },
    /// `∫V` of a potential.
    Cv { spec: PotentialSpec, dimension: usize },
    /// Noiseless relaxation of a randomly perturbed initial lattice.
    Relax {
        simulation: SimulationConfig,
        /// Perturbation amplitude as a fraction of the mean spacing.
        perturbation: f64,
        step: f64,
        tol: f64,
        max_steps: u64,
    },
    /// The limit equation with an analytic or tabulated pressure law.
    Pde {
        #[serde(default)]
        law: Option<PressureLaw>,
        /// A curve CSV to tabulate the law from, instead of `law`.
        #[serde(default)]
        curve_csv: Option<PathBuf>,
        initial: InitialProfile,
        grid_size: usize,
        t_end: f64,
        /// Defaults to the stable step for the law and initial data.
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default = "default_snapshot_stride")]
        snapshot_stride: u64,
    },
}

fn default_snapshot_stride() -> u64 {
    1000
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Sweep { .. } => "sweep",
            Experiment::ClaimCompare { .. } => "claim-compare",
            Experiment::ExponentTable { .. } => "exponent-table",
            Experiment::Cv { .. } => "cv",
            Experiment::Relax { .. } => "relax",
            Experiment::Pde { .. } => "pde",
        }
    }
}

/// Command-line overrides, highest precedence.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

/// Parses, validates and resolves a config file with no overrides.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_config_with(path, &Overrides::default())
}

pub fn load_config_with(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    config.resolve(base, overrides)
}

fn env_seed() -> Result<Option<u64>> {
    match env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

impl ExperimentConfig {
    /// Applies overrides and defaults and validates every sub-config.
    /// Relative `curve_csv` paths are taken relative to `base_dir`.
    pub fn resolve(mut self, base_dir: &Path, overrides: &Overrides) -> Result<Self> {
        let seed = match overrides.seed.or(self.seed) {
            Some(s) => s,
            None => env_seed()?.unwrap_or(0),
        };
        self.seed = Some(seed);
        if let Some(dir) = &overrides.output_dir {
            self.output_dir = dir.clone();
        }
        match &mut self.experiment {
            Experiment::Sweep {
                simulation,
                rho_grid,
                fit_windows,
            }
            | Experiment::ExponentTable {
                simulation,
                rho_grid,
                fit_windows,
            } => {
                *simulation = resolve_simulation(simulation, seed, Some(rho_grid))?;
                fit_windows.iter().try_for_each(FitWindow::validate)?;
            }
            Experiment::ClaimCompare {
                simulation,
                rho_grid,
                prediction,
                window,
            } => {
                *simulation = resolve_simulation(simulation, seed, Some(rho_grid))?;
                prediction.validate()?;
                if let Some(w) = window {
                    w.validate()?;
                }
            }
            Experiment::Cv { spec, dimension } => {
                spec.validate()?;
                if !(1..=crate::torus::MAX_DIM).contains(dimension) {
                    return Err(Error::Config(format!("dimension {dimension} not supported")));
                }
            }
            Experiment::Relax {
                simulation,
                perturbation,
                step,
                tol,
                ..
            } => {
                *simulation = resolve_simulation(simulation, seed, None)?;
                if !(*perturbation >= 0.0 && *perturbation < 0.5) {
                    return Err(Error::Config(
                        "perturbation must lie in [0, 0.5) of the spacing".into(),
                    ));
                }
                if !(*step > 0.0 && *tol > 0.0) {
                    return Err(Error::Config("relax step and tol must be positive".into()));
                }
            }
            Experiment::Pde {
                law,
                curve_csv,
                initial,
                grid_size,
                t_end,
                dt,
                snapshot_stride,
            } => {
                if let Some(csv) = curve_csv {
                    if csv.is_relative() {
                        *csv = base_dir.join(&*csv);
                    }
                }
                let resolved_law = match (&*law, &*curve_csv) {
                    (Some(l), None) => l.clone(),
                    (None, Some(csv)) => PressureLaw::from_curve_csv(csv)?,
                    _ => {
                        return Err(Error::Config(
                            "pde experiment needs exactly one of law and curve_csv".into(),
                        ))
                    }
                };
                resolved_law.validate()?;
                if *grid_size < 3 {
                    return Err(Error::Config("grid_size must be at least 3".into()));
                }
                if *snapshot_stride == 0 {
                    return Err(Error::Config("snapshot_stride must be positive".into()));
                }
                if !(t_end.is_finite() && *t_end >= 0.0) {
                    return Err(Error::Config("t_end must be nonnegative".into()));
                }
                let rho0 = initial.sample(*grid_size)?;
                if rho0.iter().any(|r| !(*r >= 0.0)) {
                    return Err(Error::Config("initial density must be nonnegative".into()));
                }
                let dx = 1.0 / *grid_size as f64;
                let limit = stable_dt(&resolved_law, &rho0, dx);
                match *dt {
                    None => {
                        if !limit.is_finite() {
                            return Err(Error::Config(
                                "law has zero slope on the initial range; set dt explicitly".into(),
                            ));
                        }
                        *dt = Some(limit);
                    }
                    Some(v) if v > limit => {
                        return Err(Error::Config(format!(
                            "dt = {v} exceeds the explicit stability limit {limit:.3e}"
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn resolve_simulation(
    sim: &SimulationConfig,
    seed: u64,
    grid: Option<&RhoGrid>,
) -> Result<SimulationConfig> {
    let mut sim = sim.clone();
    sim.seed = seed;
    if let Some(grid) = grid {
        for c in curve_point_configs(&sim, &grid.values()?)? {
            c.validate()?;
        }
    }
    sim.resolved()
}

/// Outcome of [`run_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub exit_code: i32,
    pub error: Option<String>,
    pub artifacts: Vec<PathBuf>,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.exit_code == 0
    }
}

struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock(path)),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is locked by another run (remove {} if it is stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// What a kind produced before the manifest is written.
#[derive(Default)]
struct KindOutput {
    files: Vec<&'static str>,
    result: Value,
    warnings: Vec<String>,
    /// Set when some points failed but partial results were written.
    partial: Option<Error>,
}

/// Runs `config` (already resolved by [`load_config`]) and writes its
/// artifacts. `threads == 0` evaluates sweep points sequentially; otherwise
/// a pool of that many threads is used. Outputs other than timing do not
/// depend on `threads`.
///
/// Errors are returned only when the output directory cannot be used;
/// failures of the experiment itself are reported through the summary and
/// the manifest.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<RunSummary> {
    let dir = &config.output_dir;
    let _lock = DirLock::acquire(dir)?;
    let start = Instant::now();
    let outcome = run_kind(config, threads);
    let wall = start.elapsed().as_secs_f64();

    let (mut out, error) = match outcome {
        Ok(mut out) => {
            let err = out.partial.take();
            (out, err)
        }
        Err(e) => (KindOutput::default(), Some(e)),
    };
    let mut exit_code = error.as_ref().map_or(0, Error::exit_code);
    let mut artifacts: Vec<PathBuf> = out.files.iter().map(|f| dir.join(f)).collect();
    artifacts.push(dir.join(MANIFEST_FILE));

    let manifest = json!({
        "tool": "virialab",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": config.experiment.kind(),
        "seed": config.seed(),
        "threads": threads,
        "config": config,
        "config_digest": experiment_digest(config),
        "wall_time_s": wall,
        "exit_code": exit_code,
        "error": error.as_ref().map(|e| e.to_string()),
        "artifacts": out.files.iter().chain(std::iter::once(&MANIFEST_FILE)).collect::<Vec<_>>(),
        "warnings": std::mem::take(&mut out.warnings),
        "result": out.result,
    });
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;

    let missing: Vec<_> = artifacts
        .iter()
        .filter(|p| fs::metadata(p).map_or(true, |m| m.len() == 0))
        .collect();
    if exit_code == 0 && !missing.is_empty() {
        exit_code = Error::Io(std::io::Error::other("")).exit_code();
        return Ok(RunSummary {
            exit_code,
            error: Some(format!("artifacts missing or empty: {missing:?}")),
            artifacts,
        });
    }
    Ok(RunSummary {
        exit_code,
        error: error.map(|e| e.to_string()),
        artifacts,
    })
}

fn experiment_digest(config: &ExperimentConfig) -> String {
    use sha2::{Digest, Sha256};
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn run_kind(config: &ExperimentConfig, threads: usize) -> Result<KindOutput> {
    let dir = &config.output_dir;
    log::info!(
        "running {} (seed {}) into {}",
        config.experiment.kind(),
        config.seed(),
        dir.display()
    );
    match &config.experiment {
        Experiment::Sweep {
            simulation,
            rho_grid,
            fit_windows,
        } => {
            let (curve, mut out) = run_curve(simulation, rho_grid, threads, dir)?;
            let fits: Vec<Value> = fit_windows
                .iter()
                .map(|w| fit_entry(&curve, w, &mut out.warnings))
                .collect();
            emit_plot_data(&plot_rows(&curve, None)?, &dir.join(PLOT_FILE))
                .map(|w| out.warnings.extend(w))?;
            write_json(&dir.join(REPORT_FILE), &json!({ "curve": &curve, "fits": fits }))?;
            out.files.extend([PLOT_FILE, REPORT_FILE]);
            out.result = json!({ "fits": fits });
            Ok(out)
        }
        Experiment::ExponentTable {
            simulation,
            rho_grid,
            fit_windows,
        } => {
            let (curve, mut out) = run_curve(simulation, rho_grid, threads, dir)?;
            let predicted = match simulation.spec {
                PotentialSpec::PowerLawRepulsive { alpha, r1 } => Some(predicted_exponent(
                    alpha,
                    simulation.torus.dimension(),
                    r1.is_some(),
                )),
                _ => None,
            };
            let rows: Vec<Value> = fit_windows
                .iter()
                .map(|w| fit_entry(&curve, w, &mut out.warnings))
                .collect();
            emit_plot_data(&plot_rows(&curve, None)?, &dir.join(PLOT_FILE))
                .map(|w| out.warnings.extend(w))?;
            let report = json!({
                "curve": &curve,
                "predicted_high_density": predicted,
                "rows": rows,
            });
            write_json(&dir.join(REPORT_FILE), &report)?;
            out.files.extend([PLOT_FILE, REPORT_FILE]);
            out.result = json!({ "rows": rows, "predicted_high_density": predicted });
            Ok(out)
        }
        Experiment::ClaimCompare {
            simulation,
            rho_grid,
            prediction,
            window,
        } => {
            let (curve, mut out) = run_curve(simulation, rho_grid, threads, dir)?;
            let report = compare_report(&curve, prediction, window.map(|w| w.bounds()));
            match report {
                Ok(report) => {
                    if !report.excluded.is_empty() {
                        out.warnings.push(format!(
                            "densities {:?} excluded from the comparison",
                            report.excluded
                        ));
                    }
                    emit_plot_data(&plot_rows(&curve, Some(&report))?, &dir.join(PLOT_FILE))
                        .map(|w| out.warnings.extend(w))?;
                    write_json(&dir.join(REPORT_FILE), &report)?;
                    out.files.extend([PLOT_FILE, REPORT_FILE]);
                    out.result = json!({
                        "constant": report.constant,
                        "max_relative_deviation": report.max_relative_deviation,
                        "max_relative_deviation_unscaled": report.max_relative_deviation_unscaled,
                    });
                }
                Err(e) => {
                    out.partial.get_or_insert(e);
                }
            }
            Ok(out)
        }
        Experiment::Cv { spec, dimension } => {
            let c_v = spec.c_v(*dimension)?;
            let report = json!({ "spec": spec, "dimension": dimension, "c_v": c_v });
            write_json(&dir.join(REPORT_FILE), &report)?;
            Ok(KindOutput {
                files: vec![REPORT_FILE],
                result: json!({ "c_v": c_v }),
                ..KindOutput::default()
            })
        }
        Experiment::Relax {
            simulation,
            perturbation,
            step,
            tol,
            max_steps,
        } => {
            let lattice = build_initial_lattice(simulation)?;
            let perturbed = perturb(&lattice, *perturbation, simulation.seed)?;
            let relaxed = relax_deterministic(&perturbed, &simulation.spec, *step, *tol, *max_steps)?;
            let variance = spacing_variance(&relaxed.state);
            let result = json!({
                "converged": relaxed.converged,
                "steps": relaxed.steps,
                "max_force": relaxed.max_force,
                "spacing_variance": variance,
                "n_particles": relaxed.state.n_particles(),
            });
            let report = json!({
                "result": &result,
                "positions": relaxed.state.positions(),
            });
            write_json(&dir.join(REPORT_FILE), &report)?;
            let mut warnings = Vec::new();
            if !relaxed.converged {
                warnings.push(format!(
                    "relaxation did not converge in {} steps (max force {:e})",
                    relaxed.steps, relaxed.max_force
                ));
            }
            Ok(KindOutput {
                files: vec![REPORT_FILE],
                result,
                warnings,
                partial: None,
            })
        }
        Experiment::Pde {
            law,
            curve_csv,
            initial,
            grid_size,
            t_end,
            dt,
            snapshot_stride,
        } => {
            let law = match (law, curve_csv) {
                (Some(l), _) => l.clone(),
                (None, Some(csv)) => PressureLaw::from_curve_csv(csv)?,
                (None, None) => return Err(Error::Config("pde experiment needs a law".into())),
            };
            let rho0 = initial.sample(*grid_size)?;
            let dx = 1.0 / *grid_size as f64;
            let dt = dt.ok_or_else(|| Error::Config("unresolved pde config".into()))?;
            let sol = solve_pde(&law, &rho0, *t_end, dx, dt, *snapshot_stride)?;
            sol.write_csv(&dir.join(SNAPSHOT_FILE))?;
            let m0 = sol.mass(0);
            let drift = (0..sol.snapshots.len())
                .map(|k| (sol.mass(k) - m0).abs())
                .fold(0.0, f64::max);
            let result = json!({
                "grid_size": sol.grid_size,
                "dx": sol.dx,
                "dt": sol.dt,
                "steps": sol.steps,
                "snapshots": sol.snapshots.len(),
                "initial_mass": m0,
                "max_mass_drift": drift,
                "non_monotone_law": sol.non_monotone_law,
            });
            write_json(&dir.join(REPORT_FILE), &json!({ "law": law, "result": &result }))?;
            let mut warnings = Vec::new();
            if sol.non_monotone_law {
                warnings.push("pressure law is non-monotone on the initial range".into());
            }
            Ok(KindOutput {
                files: vec![SNAPSHOT_FILE, REPORT_FILE],
                result,
                warnings,
                partial: None,
            })
        }
    }
}

/// Runs the sweep and writes `curve.csv`; failed points become `partial`.
fn run_curve(
    simulation: &SimulationConfig,
    grid: &RhoGrid,
    threads: usize,
    dir: &Path,
) -> Result<(PressureCurve, KindOutput)> {
    let rho = grid.values()?;
    let outcome = if threads == 0 {
        pressure_curve_with(simulation, &rho, false)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| pressure_curve_with(simulation, &rho, true))?
    };
    let curve = outcome.curve;
    write_curve_csv(&curve, &dir.join(CURVE_FILE))?;
    let mut out = KindOutput {
        files: vec![CURVE_FILE],
        ..KindOutput::default()
    };
    let configs = curve_point_configs(simulation, &rho)?;
    let points: Vec<Value> = configs
        .iter()
        .map(|c| {
            let est = curve.points.iter().find(|p| p.seed == c.seed);
            json!({
                "rho": c.rho,
                "rho_eff": c.rho_eff(),
                "seed": c.seed,
                "dt": est.map(|e| e.dt),
                "n_samples": est.map(|e| e.n_samples),
                "clamp_rate": est.map(|e| e.clamp_rate),
            })
        })
        .collect();
    for p in &curve.points {
        if p.clamp_rate > crate::virial::CLAMP_RATE_WARNING {
            out.warnings.push(format!(
                "clamp rate {:.2e} at rho_eff={}",
                p.clamp_rate, p.rho_eff
            ));
        }
    }
    out.result = json!({
        "points": points,
        "failures": &outcome.failures,
        "curve_config_digest": config_digest(simulation),
    });
    if let Some(f) = outcome.failures.first() {
        out.partial = Some(point_error(f.exit_code, &f.message));
    }
    Ok((curve, out))
}

fn point_error(code: i32, message: &str) -> Error {
    let detail = format!("sweep point failed: {message}");
    match code {
        2 => Error::Parse(detail),
        4 => Error::Domain(detail),
        5 => Error::Divergent(detail),
        6 => Error::BlowUp { step: 0, detail },
        7 => Error::Instability { step: 0, detail },
        8 => Error::InsufficientData(detail),
        9 => Error::Io(std::io::Error::other(detail)),
        _ => Error::Config(detail),
    }
}

fn fit_entry(curve: &PressureCurve, w: &FitWindow, warnings: &mut Vec<String>) -> Value {
    match fit_loglog_slope(curve, w.bounds()) {
        Ok(fit) => {
            if fit.excluded > 0 {
                warnings.push(format!(
                    "{} nonpositive points excluded from the fit on [{}, {}]",
                    fit.excluded, w.rho_min, w.rho_max
                ));
            }
            json!({ "window": w, "fit": fit })
        }
        Err(e) => {
            warnings.push(format!("fit on [{}, {}]: {e}", w.rho_min, w.rho_max));
            json!({ "window": w, "fit": Option::<SlopeFit>::None, "error": e.to_string() })
        }
    }
}

fn perturb(state: &ParticleState, amplitude: f64, seed: u64) -> Result<ParticleState> {
    let k = state.n_particles();
    let d = state.dimension();
    let spacing = (state.torus().volume() / k as f64).powf(1.0 / d as f64);
    let u = NoiseStream::new(seed).init_uniforms(k * d);
    let shifted: Vec<f64> = state
        .positions()
        .iter()
        .zip(&u)
        .map(|(x, u)| x + amplitude * spacing * (2.0 * u - 1.0))
        .collect();
    ParticleState::new(*state.torus(), shifted)
}

/// Variance of nearest-neighbor gaps around the ring (d = 1 only).
fn spacing_variance(state: &ParticleState) -> Option<f64> {
    if state.dimension() != 1 || state.n_particles() < 2 {
        return None;
    }
    let mut xs = state.positions().to_vec();
    xs.sort_by(f64::total_cmp);
    let l = state.torus().side();
    let k = xs.len();
    let gaps: Vec<f64> = (0..k)
        .map(|i| if i + 1 < k { xs[i + 1] - xs[i] } else { xs[0] + l - xs[k - 1] })
        .collect();
    let mean = gaps.iter().sum::<f64>() / k as f64;
    Some(gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / k as f64)
}

#[derive(Serialize)]
struct CurveRow {
    rho_eff: f64,
    psi_hat: f64,
    p_hat: f64,
    std_error: f64,
    n_samples: usize,
    clamp_rate: f64,
}

pub fn write_curve_csv(curve: &PressureCurve, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if curve.points.is_empty() {
        w.write_record([
            "rho_eff",
            "psi_hat",
            "p_hat",
            "std_error",
            "n_samples",
            "clamp_rate",
        ])?;
    }
    for p in &curve.points {
        w.serialize(CurveRow {
            rho_eff: p.rho_eff,
            psi_hat: p.psi_hat,
            p_hat: p.p_hat,
            std_error: p.std_error,
            n_samples: p.n_samples,
            clamp_rate: p.clamp_rate,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// One row of plot data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlotRow {
    pub rho: f64,
    pub p_hat: f64,
    pub prediction: Option<f64>,
    pub rescaled_prediction: Option<f64>,
}

/// Rows for every curve point; with a report, its law and `c × law`.
pub fn plot_rows(curve: &PressureCurve, report: Option<&ComparisonReport>) -> Result<Vec<PlotRow>> {
    curve
        .points
        .iter()
        .map(|p| {
            let (prediction, rescaled_prediction) = match report {
                Some(r) => {
                    let q = r.prediction.evaluate(curve.noise_sigma, p.rho_eff)?;
                    (Some(q), Some(r.constant * q))
                }
                None => (None, None),
            };
            Ok(PlotRow {
                rho: p.rho_eff,
                p_hat: p.p_hat,
                prediction,
                rescaled_prediction,
            })
        })
        .collect()
}

/// Writes `rho,p_hat,log_rho,log_p,prediction,rescaled_prediction`. Log
/// columns are left empty where undefined; returns a warning per such row.
pub fn emit_plot_data(rows: &[PlotRow], path: &Path) -> Result<Vec<String>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "rho",
        "p_hat",
        "log_rho",
        "log_p",
        "prediction",
        "rescaled_prediction",
    ])?;
    let mut warnings = Vec::new();
    let num = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        let valid = r.rho > 0.0 && r.p_hat > 0.0;
        if !valid {
            warnings.push(format!(
                "p_hat = {} at rho = {} has no logarithm; log columns left empty",
                r.p_hat, r.rho
            ));
        }
        w.write_record([
            r.rho.to_string(),
            r.p_hat.to_string(),
            num(valid.then(|| r.rho.ln())),
            num(valid.then(|| r.p_hat.ln())),
            num(r.prediction),
            num(r.rescaled_prediction),
        ])?;
    }
    w.flush()?;
    Ok(warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = RhoGrid::LogSpaced {
            min: 1.0,
            max: 100.0,
            count: 3,
        };
        let v = g.values().unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12 && (v[2] - 100.0).abs() < 1e-12);
        let g = RhoGrid::Linear {
            min: 1.0,
            max: 2.0,
            count: 3,
        };
        assert_eq!(g.values().unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(RhoGrid::Linear {
            min: 2.0,
            max: 1.0,
            count: 3
        }
        .values()
        .is_err());
    }

    #[test]
    fn profiles() {
        let p = InitialProfile::Cosine {
            mean: 1.0,
            amplitude: 0.1,
            mode: 1,
        }
        .sample(4)
        .unwrap();
        assert!((p[0] - 1.1).abs() < 1e-15 && (p[2] - 0.9).abs() < 1e-15);
        let b = InitialProfile::Bump {
            background: 0.0,
            height: 1.0,
            center: 0.0,
            width: 0.1,
        }
        .sample(10)
        .unwrap();
        assert!((b[1] - b[9]).abs() < 1e-15);
        assert!(InitialProfile::Values { rho: vec![1.0] }.sample(3).is_err());
    }

    #[test]
    fn gaps_of_uniform_ring() {
        let s = ParticleState::new(
            crate::torus::TorusBox::new(1, 4.0).unwrap(),
            vec![3.0, 0.0, 1.0, 2.0],
        )
        .unwrap();
        assert_eq!(spacing_variance(&s), Some(0.0));
    }
}
