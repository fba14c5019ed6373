//! Closed-form pressure predictions, exponent rules and log-log fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::virial::PressureCurve;

/// Pressure of the one-dimensional power-law repulsion `r^{-α}/α` truncated
/// at `r1`, from the lattice-sum approximation.
///
/// `σ²ρ` below `ρ = 1/r1`; above it
/// `σ²ρ + α/(α−1) ρ^{1+α} − ρ²/(r1^{α−1}(α−1))`, or
/// `σ²ρ + ρ²(ln ρ + ln r1 + 1)` when `α = 1`.
pub fn claim1_pressure(alpha: f64, r1: f64, noise_sigma: f64, rho: f64) -> f64 {
    let s2 = noise_sigma * noise_sigma;
    if rho < 1.0 / r1 {
        return s2 * rho;
    }
    s2 * rho + claim1_interaction(alpha, r1, rho)
}

/// The interaction part of [`claim1_pressure`] above the contact density.
pub fn claim1_interaction(alpha: f64, r1: f64, rho: f64) -> f64 {
    if alpha == 1.0 {
        rho * rho * (rho.ln() + r1.ln() + 1.0)
    } else {
        alpha / (alpha - 1.0) * rho.powf(1.0 + alpha)
            - rho * rho / (r1.powf(alpha - 1.0) * (alpha - 1.0))
    }
}

/// Value of the attractive-repulsive prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim2Value {
    pub pressure: f64,
    /// Set on the low-density branch, where an `O(ρ)` correction of unknown
    /// form is missing from `pressure`.
    pub unidentified_linear_correction: bool,
}

/// Pressure of the attractive-repulsive power law `r0^α/(α r^α) − r0^β/(β r^β)`
/// truncated at `r1`, for `α > β > 1`.
pub fn claim2_pressure(
    alpha: f64,
    beta: f64,
    r0: f64,
    r1: f64,
    noise_sigma: f64,
    rho: f64,
) -> Result<Claim2Value> {
    if !(beta > 1.0 && alpha > beta) {
        return Err(Error::Unsupported(format!(
            "attractive-repulsive prediction needs α > β > 1, got α={alpha}, β={beta}"
        )));
    }
    if !(r0 > 0.0 && r1 > r0) {
        return Err(Error::Domain(format!(
            "need R₁ > R₀ > 0, got r0={r0}, r1={r1}"
        )));
    }
    let s2 = noise_sigma * noise_sigma;
    if rho < 1.0 / r0 {
        return Ok(Claim2Value {
            pressure: s2 * rho,
            unidentified_linear_correction: true,
        });
    }
    let quad = 1.0 / (r1.powf(alpha - 1.0) * (alpha - 1.0))
        - 1.0 / (r1.powf(beta - 1.0) * (beta - 1.0));
    let pressure = s2 * rho + alpha / (alpha - 1.0) * rho.powf(1.0 + alpha)
        - beta / (beta - 1.0) * rho.powf(1.0 + beta)
        - quad * rho * rho;
    Ok(Claim2Value {
        pressure,
        unidentified_linear_correction: false,
    })
}

/// `σ²ρ + C_V ρ²`.
pub fn meanfield_pressure(c_v: f64, noise_sigma: f64, rho: f64) -> f64 {
    noise_sigma * noise_sigma * rho + c_v * rho * rho
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPrediction {
    pub exponent: f64,
    /// The growth carries an extra logarithmic factor.
    pub log_correction: bool,
    pub caveat: Option<String>,
}

/// High-density growth exponent of the pressure for an `r^{-α}` repulsion
/// in dimension `d`: `1 + α/d` for `α > d`, `2` for `α < d`, `2` with a log
/// factor at `α = d`.
pub fn predicted_exponent(alpha: f64, dimension: usize, compact_support: bool) -> ExponentPrediction {
    let d = dimension as f64;
    let (exponent, log_correction) = if alpha > d {
        (1.0 + alpha / d, false)
    } else if alpha < d {
        (2.0, false)
    } else {
        (2.0, true)
    };
    let caveat = (compact_support && alpha < d).then(|| {
        "weak repulsion truncated at r1: measured exponents at moderate density fall below 2".into()
    });
    ExponentPrediction {
        exponent,
        log_correction,
        caveat,
    }
}

/// Least-squares line through `(ln ρ, ln p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub exponent: f64,
    pub log_prefactor: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    /// OLS standard error of the exponent (0 with three exact points or fewer dof).
    pub exponent_std_error: f64,
    /// Points in the window dropped because `p ≤ 0`.
    pub excluded: usize,
}

/// Fits the log-log slope of `(rho, p)` over `rho ∈ [window.0, window.1]`.
pub fn fit_loglog(rho: &[f64], p: &[f64], window: (f64, f64)) -> Result<SlopeFit> {
    if rho.len() != p.len() {
        return Err(Error::Domain("rho and p lengths differ".into()));
    }
    if !(window.0 < window.1) {
        return Err(Error::Domain(format!(
            "fit window must satisfy rho_min < rho_max, got {window:?}"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    for (&r, &v) in rho.iter().zip(p) {
        if r < window.0 || r > window.1 {
            continue;
        }
        if v > 0.0 && r > 0.0 {
            xs.push(r.ln());
            ys.push(v.ln());
        } else {
            excluded += 1;
        }
    }
    if excluded > 0 {
        log::warn!("{excluded} nonpositive points excluded from the log-log fit");
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "{n} usable points in window {window:?}; at least 3 are needed"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "all fit points share one density".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let exponent_std_error = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        exponent: slope,
        log_prefactor: intercept,
        r_squared,
        window,
        n_points: n,
        exponent_std_error,
        excluded,
    })
}

/// [`fit_loglog`] over a curve's `(rho_eff, p_hat)`.
pub fn fit_loglog_slope(curve: &PressureCurve, window: (f64, f64)) -> Result<SlopeFit> {
    fit_loglog(&curve.rho(), &curve.p_hat(), window)
}

/// A theoretical pressure law to compare a curve against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum Prediction {
    Claim1 { alpha: f64, r1: f64 },
    Claim2 { alpha: f64, beta: f64, r0: f64, r1: f64 },
    Meanfield { c_v: f64 },
}

impl Prediction {
    pub fn name(&self) -> &'static str {
        match self {
            Prediction::Claim1 { .. } => "claim1",
            Prediction::Claim2 { .. } => "claim2",
            Prediction::Meanfield { .. } => "meanfield",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Prediction::Claim1 { alpha, r1 } => {
                if !(alpha > 0.0 && r1 > 0.0) {
                    return Err(Error::Domain(format!(
                        "claim1 needs alpha > 0 and r1 > 0, got alpha={alpha}, r1={r1}"
                    )));
                }
            }
            Prediction::Claim2 { alpha, beta, r0, r1 } => {
                claim2_pressure(alpha, beta, r0, r1, 0.0, 1.0)?;
            }
            Prediction::Meanfield { c_v } => {
                if !c_v.is_finite() {
                    return Err(Error::Domain("c_v must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// The predicted pressure at `rho` with noise amplitude `noise_sigma`.
    pub fn evaluate(&self, noise_sigma: f64, rho: f64) -> Result<f64> {
        Ok(match *self {
            Prediction::Claim1 { alpha, r1 } => claim1_pressure(alpha, r1, noise_sigma, rho),
            Prediction::Claim2 { alpha, beta, r0, r1 } => {
                claim2_pressure(alpha, beta, r0, r1, noise_sigma, rho)?.pressure
            }
            Prediction::Meanfield { c_v } => meanfield_pressure(c_v, noise_sigma, rho),
        })
    }
}

/// Result of fitting `p̂ ≈ c · prediction`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub prediction: Prediction,
    pub noise_sigma: f64,
    pub window: Option<(f64, f64)>,
    /// `exp(mean(ln p̂ − ln prediction))`.
    pub constant: f64,
    /// `max |p̂ − c·pred| / (c·pred)` over the used points.
    pub max_relative_deviation: f64,
    /// The same with `c = 1`.
    pub max_relative_deviation_unscaled: f64,
    pub rho: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub predicted: Vec<f64>,
    /// Points in the window skipped because `p̂` or the prediction is not positive.
    pub excluded: Vec<f64>,
    pub curve_digest: String,
}

impl ComparisonReport {
    pub fn rescaled_prediction(&self) -> Vec<f64> {
        self.predicted.iter().map(|p| self.constant * p).collect()
    }
}

/// Compares `(rho, p)` points with `prediction`; see [`ComparisonReport`].
pub fn compare_points(
    rho: &[f64],
    p: &[f64],
    noise_sigma: f64,
    prediction: &Prediction,
    window: Option<(f64, f64)>,
) -> Result<ComparisonReport> {
    prediction.validate()?;
    if rho.is_empty() {
        return Err(Error::InsufficientData("empty curve".into()));
    }
    let mut used_rho = Vec::new();
    let mut used_p = Vec::new();
    let mut used_pred = Vec::new();
    let mut excluded = Vec::new();
    for (&r, &v) in rho.iter().zip(p) {
        if let Some((lo, hi)) = window {
            if r < lo || r > hi {
                continue;
            }
        }
        let pred = prediction.evaluate(noise_sigma, r)?;
        if pred > 0.0 && v > 0.0 {
            used_rho.push(r);
            used_p.push(v);
            used_pred.push(pred);
        } else {
            excluded.push(r);
        }
    }
    if !excluded.is_empty() {
        log::warn!(
            "{} points excluded from the comparison (nonpositive value or prediction)",
            excluded.len()
        );
    }
    if used_p.is_empty() {
        return Err(Error::InsufficientData(
            "no point with positive estimate and prediction".into(),
        ));
    }
    let log_c = used_p
        .iter()
        .zip(&used_pred)
        .map(|(v, q)| v.ln() - q.ln())
        .sum::<f64>()
        / used_p.len() as f64;
    let constant = log_c.exp();
    let dev = |c: f64| {
        used_p
            .iter()
            .zip(&used_pred)
            .map(|(v, q)| ((v - c * q) / (c * q)).abs())
            .fold(0.0, f64::max)
    };
    Ok(ComparisonReport {
        prediction: *prediction,
        noise_sigma,
        window,
        constant,
        max_relative_deviation: dev(constant),
        max_relative_deviation_unscaled: dev(1.0),
        rho: used_rho,
        p_hat: used_p,
        predicted: used_pred,
        excluded,
        curve_digest: String::new(),
    })
}

/// [`compare_points`] over a curve, recording the curve's config digest.
pub fn compare_report(
    curve: &PressureCurve,
    prediction: &Prediction,
    window: Option<(f64, f64)>,
) -> Result<ComparisonReport> {
    let mut report = compare_points(
        &curve.rho(),
        &curve.p_hat(),
        curve.noise_sigma,
        prediction,
        window,
    )?;
    report.curve_digest = curve.provenance.config_digest.clone();
    Ok(report)
}
