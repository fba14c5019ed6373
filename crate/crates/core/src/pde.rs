//! Explicit finite differences for `∂t ρ = ½ ∂xx P(ρ)` on the unit circle.
//!
//! The update is in conservative form,
//! `ρᵢ ← ρᵢ + dt/(2dx²) (P(ρᵢ₊₁) − 2P(ρᵢ) + P(ρᵢ₋₁))`, with periodic
//! neighbors, so the discrete mass `Σρᵢ dx` is conserved up to roundoff.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{claim1_pressure, claim2_pressure, meanfield_pressure};
use crate::error::{Error, Result};

/// Densities below this count as negative.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;
/// Fraction of the linear stability limit allowed for `dt`.
pub const STABILITY_SAFETY: f64 = 0.9;
/// Headroom applied to the finite-difference estimate of `max |P'|`.
pub const SLOPE_HEADROOM: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum PressureLaw {
    Claim1 {
        alpha: f64,
        r1: f64,
        noise_sigma: f64,
    },
    Claim2 {
        alpha: f64,
        beta: f64,
        r0: f64,
        r1: f64,
        noise_sigma: f64,
    },
    Meanfield {
        c_v: f64,
        noise_sigma: f64,
    },
    /// Piecewise-linear through `(rho[k], p[k])`, extended linearly with the
    /// end slopes.
    Tabulated { rho: Vec<f64>, p: Vec<f64> },
}

#[derive(Deserialize)]
struct CurveCsvRow {
    rho_eff: f64,
    p_hat: f64,
}

impl PressureLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            PressureLaw::Tabulated { rho, p } => {
                if rho.len() != p.len() || rho.len() < 2 {
                    return Err(Error::Config(
                        "tabulated law needs at least two (rho, p) nodes of equal length".into(),
                    ));
                }
                if rho.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Config(
                        "tabulated law densities must be strictly increasing".into(),
                    ));
                }
                if rho.iter().chain(p).any(|v| !v.is_finite()) {
                    return Err(Error::Config("tabulated law has non-finite nodes".into()));
                }
            }
            PressureLaw::Claim2 {
                alpha,
                beta,
                r0,
                r1,
                ..
            } => {
                claim2_pressure(*alpha, *beta, *r0, *r1, 0.0, 1.0)?;
            }
            PressureLaw::Claim1 { alpha, r1, .. } => {
                if !(*alpha > 0.0 && *r1 > 0.0) {
                    return Err(Error::Config("claim1 law needs alpha > 0, r1 > 0".into()));
                }
            }
            PressureLaw::Meanfield { c_v, noise_sigma } => {
                if !(c_v.is_finite() && noise_sigma.is_finite()) {
                    return Err(Error::Config("meanfield law needs finite parameters".into()));
                }
            }
        }
        Ok(())
    }

    /// Reads a tabulated law from a curve CSV (`rho_eff` and `p_hat` columns).
    pub fn from_curve_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut rho = Vec::new();
        let mut p = Vec::new();
        for row in reader.deserialize() {
            let row: CurveCsvRow = row?;
            rho.push(row.rho_eff);
            p.push(row.p_hat);
        }
        let law = PressureLaw::Tabulated { rho, p };
        law.validate()?;
        Ok(law)
    }

    pub fn eval(&self, rho: f64) -> f64 {
        match self {
            PressureLaw::Claim1 {
                alpha,
                r1,
                noise_sigma,
            } => claim1_pressure(*alpha, *r1, *noise_sigma, rho),
            PressureLaw::Claim2 {
                alpha,
                beta,
                r0,
                r1,
                noise_sigma,
            } => claim2_pressure(*alpha, *beta, *r0, *r1, *noise_sigma, rho)
                .map(|v| v.pressure)
                .unwrap_or(f64::NAN),
            PressureLaw::Meanfield { c_v, noise_sigma } => {
                meanfield_pressure(*c_v, *noise_sigma, rho)
            }
            PressureLaw::Tabulated { rho: xs, p } => {
                let n = xs.len();
                let k = xs.partition_point(|&x| x <= rho).clamp(1, n - 1);
                let (x0, x1, y0, y1) = (xs[k - 1], xs[k], p[k - 1], p[k]);
                y0 + (y1 - y0) * (rho - x0) / (x1 - x0)
            }
        }
    }

    /// Central-difference `P'` sampled over `[lo, hi]`: (max |P'|, min P').
    fn slope_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        let n = 256;
        let mut max_abs: f64 = 0.0;
        let mut min: f64 = f64::INFINITY;
        for k in 0..=n {
            let r = lo + (hi - lo) * k as f64 / n as f64;
            let h = 1e-6 * r.abs().max(1.0);
            let a = (r - h).max(0.0);
            let b = r + h;
            let s = (self.eval(b) - self.eval(a)) / (b - a);
            max_abs = max_abs.max(s.abs());
            min = min.min(s);
        }
        (max_abs, min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub rho: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeSolution {
    pub grid_size: usize,
    pub dx: f64,
    pub dt: f64,
    pub steps: u64,
    pub snapshots: Vec<Snapshot>,
    /// `P'` was negative somewhere on the initial density range.
    pub non_monotone_law: bool,
}

impl PdeSolution {
    pub fn mass(&self, snapshot: usize) -> f64 {
        self.snapshots[snapshot].rho.iter().sum::<f64>() * self.dx
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("initial snapshot is always present")
    }

    /// Writes `t,x,rho` rows for every snapshot.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "x", "rho"])?;
        for s in &self.snapshots {
            for (i, r) in s.rho.iter().enumerate() {
                w.serialize((s.t, i as f64 * self.dx, r))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest stable step for `law` on densities spanning `rho0`.
pub fn stable_dt(law: &PressureLaw, rho0: &[f64], dx: f64) -> f64 {
    let (lo, hi) = density_range(rho0);
    let (max_slope, _) = law.slope_range(lo, hi);
    if max_slope == 0.0 {
        return f64::INFINITY;
    }
    STABILITY_SAFETY * dx * dx / (SLOPE_HEADROOM * max_slope)
}

fn density_range(rho0: &[f64]) -> (f64, f64) {
    let lo = rho0.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rho0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Integrates from `rho0` (cell values at `x_i = i·dx`, `dx = 1/M`) up to
/// `t_end`, keeping every `snapshot_stride`-th step plus the first and last.
pub fn solve_pde(
    law: &PressureLaw,
    rho0: &[f64],
    t_end: f64,
    dx: f64,
    dt: f64,
    snapshot_stride: u64,
) -> Result<PdeSolution> {
    law.validate()?;
    let m = rho0.len();
    if m < 3 {
        return Err(Error::Config("the PDE grid needs at least 3 cells".into()));
    }
    if ((dx * m as f64) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "dx must equal 1/M = {}, got {dx}",
            1.0 / m as f64
        )));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::Config(format!("t_end must be nonnegative, got {t_end}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if snapshot_stride == 0 {
        return Err(Error::Config("snapshot_stride must be positive".into()));
    }
    if rho0.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::Domain("initial density must be finite and nonnegative".into()));
    }
    let limit = stable_dt(law, rho0, dx);
    if dt > limit {
        return Err(Error::Config(format!(
            "dt = {dt} exceeds the explicit stability limit {limit:.3e}"
        )));
    }
    let (lo, hi) = density_range(rho0);
    let non_monotone_law = law.slope_range(lo, hi).1 < 0.0;
    if non_monotone_law {
        log::warn!("pressure law decreases on the initial density range; the PDE may be ill-posed");
    }

    let n_steps = (t_end / dt * (1.0 - 1e-12)).ceil() as u64;
    let mut rho = rho0.to_vec();
    let mut pressure = vec![0.0; m];
    let mut snapshots = vec![Snapshot { t: 0.0, rho: rho.clone() }];
    let mut t = 0.0;
    for step in 1..=n_steps {
        let h = if step == n_steps { t_end - t } else { dt };
        let coef = h / (2.0 * dx * dx);
        for (p, r) in pressure.iter_mut().zip(&rho) {
            *p = law.eval(*r);
        }
        for i in 0..m {
            let left = pressure[(i + m - 1) % m];
            let right = pressure[(i + 1) % m];
            rho[i] += coef * (right - 2.0 * pressure[i] + left);
        }
        t = if step == n_steps { t_end } else { step as f64 * dt };
        if let Some((i, r)) = rho
            .iter()
            .enumerate()
            .find(|(_, r)| !(**r >= -NEGATIVITY_TOLERANCE))
        {
            return Err(Error::Instability {
                step,
                detail: format!("density {r:e} at cell {i}, t = {t}"),
            });
        }
        if step % snapshot_stride == 0 || step == n_steps {
            snapshots.push(Snapshot { t, rho: rho.clone() });
        }
    }
    Ok(PdeSolution {
        grid_size: m,
        dx,
        dt,
        steps: n_steps,
        snapshots,
        non_monotone_law,
    })
}
