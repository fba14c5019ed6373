//! Radial pair potentials `V(x) = U(|x|)`.
//!
//! Four families are supported:
//!
//! * power-law repulsion `U(r) = 1/(α r^α) − C` on `(0, r1]`, zero beyond
//!   (or untruncated when `r1` is omitted);
//! * power-law attraction–repulsion
//!   `U(r) = r0^α/(α r^α) − r0^β/(β r^β) + C` on `(0, r1]`, zero beyond;
//! * Gaussian repulsion `U(r) = exp(−r²/(2w²))`;
//! * Gaussian-cubic `U(r) = (1 − r³) exp(−r²/(2w²))`.
//!
//! The truncation constant `C` is never stored: it is derived so that the
//! bracket vanishes at `r1`. At `r = r1` both value and derivative take the
//! inside branch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::torus::{norm, MAX_DIM};

/// Gaussian families are evaluated in simulations only up to this many widths.
pub const GAUSSIAN_CUTOFF_WIDTHS: f64 = 7.0;

const QUAD_REL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// No interaction.
    Zero,
    /// `r1: None` means no cutoff.
    PowerLawRepulsive {
        alpha: f64,
        #[serde(default)]
        r1: Option<f64>,
    },
    PowerLawAttractiveRepulsive {
        alpha: f64,
        beta: f64,
        r0: f64,
        r1: f64,
    },
    GaussianRepulsive {
        width: f64,
    },
    GaussianCubic {
        width: f64,
    },
}

/// `r^{-p}` with fast paths for integer and half-integer exponents.
#[inline]
fn inv_pow(r: f64, p: f64) -> f64 {
    let twice = 2.0 * p;
    if twice == twice.trunc() && twice <= 24.0 {
        let n = twice as u32;
        let whole = int_pow(r, n / 2).recip();
        if n % 2 == 0 {
            whole
        } else {
            whole / r.sqrt()
        }
    } else {
        (-p * r.ln()).exp()
    }
}

/// `r^n`; avoids the `powi` libcall in the force loop.
#[inline(always)]
fn int_pow(r: f64, n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => r,
        2 => r * r,
        3 => r * r * r,
        4 => {
            let s = r * r;
            s * s
        }
        _ => {
            let (mut acc, mut base, mut n) = (1.0, r, n);
            while n > 0 {
                if n & 1 == 1 {
                    acc *= base;
                }
                base *= base;
                n >>= 1;
            }
            acc
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl PotentialSpec {
    /// Checks the parameter invariants of each family.
    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialSpec::Zero => Ok(()),
            PotentialSpec::PowerLawRepulsive { alpha, r1 } => {
                positive("alpha", alpha)?;
                if let Some(r1) = r1 {
                    positive("r1", r1)?;
                }
                Ok(())
            }
            PotentialSpec::PowerLawAttractiveRepulsive { alpha, beta, r0, r1 } => {
                positive("alpha", alpha)?;
                positive("beta", beta)?;
                positive("r0", r0)?;
                positive("r1", r1)?;
                if alpha <= beta {
                    return Err(Error::Config(format!(
                        "attractive-repulsive potential requires α > β (alpha={alpha}, beta={beta})"
                    )));
                }
                if r1 <= r0 {
                    return Err(Error::Config(format!(
                        "attractive-repulsive potential requires R₁ > R₀ (r0={r0}, r1={r1})"
                    )));
                }
                Ok(())
            }
            PotentialSpec::GaussianRepulsive { width } | PotentialSpec::GaussianCubic { width } => {
                positive("width", width)
            }
        }
    }

    /// Radius beyond which `U` vanishes identically; `None` for unbounded support.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            PotentialSpec::Zero => Some(0.0),
            PotentialSpec::PowerLawRepulsive { r1, .. } => r1,
            PotentialSpec::PowerLawAttractiveRepulsive { r1, .. } => Some(r1),
            PotentialSpec::GaussianRepulsive { .. } | PotentialSpec::GaussianCubic { .. } => None,
        }
    }

    /// Pair cutoff used by the simulation in a box of side `side`: the support
    /// radius, the Gaussian numerical cutoff, or `L/2` for the untruncated power law.
    pub fn interaction_cutoff(&self, side: f64) -> f64 {
        match *self {
            PotentialSpec::GaussianRepulsive { width } | PotentialSpec::GaussianCubic { width } => {
                GAUSSIAN_CUTOFF_WIDTHS * width
            }
            _ => self.support_radius().unwrap_or(0.5 * side),
        }
    }

    /// Whether the potential has compact support.
    pub fn is_truncated(&self) -> bool {
        matches!(
            self,
            PotentialSpec::Zero
                | PotentialSpec::PowerLawRepulsive { r1: Some(_), .. }
                | PotentialSpec::PowerLawAttractiveRepulsive { .. }
        )
    }

    /// The constant `C` that makes a truncated power law continuous at `r1`.
    pub fn continuity_constant(&self) -> Result<f64> {
        match *self {
            PotentialSpec::PowerLawRepulsive { alpha, r1: Some(r1) } => {
                Ok(1.0 / (alpha * r1.powf(alpha)))
            }
            PotentialSpec::PowerLawRepulsive { r1: None, .. } => Err(Error::NotApplicable(
                "power-law repulsion without cutoff has no continuity constant".into(),
            )),
            PotentialSpec::PowerLawAttractiveRepulsive { alpha, beta, r0, r1 } => Ok(-(r0
                .powf(alpha)
                / (alpha * r1.powf(alpha))
                - r0.powf(beta) / (beta * r1.powf(beta)))),
            PotentialSpec::Zero => Err(Error::NotApplicable(
                "zero potential has no continuity constant".into(),
            )),
            PotentialSpec::GaussianRepulsive { .. } | PotentialSpec::GaussianCubic { .. } => {
                Err(Error::NotApplicable(
                    "Gaussian potentials are not truncated".into(),
                ))
            }
        }
    }

    fn check_r(r: f64) -> Result<()> {
        if r.is_finite() && r > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "pair potential is evaluated only at r > 0, got {r}"
            )))
        }
    }

    /// `U(r)`.
    pub fn value(&self, r: f64) -> Result<f64> {
        Self::check_r(r)?;
        Ok(self.value_unchecked(r))
    }

    pub(crate) fn value_unchecked(&self, r: f64) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::PowerLawRepulsive { alpha, r1 } => match r1 {
                Some(r1) if beyond(r, r1) => 0.0,
                Some(r1) => inv_pow(r, alpha) / alpha - 1.0 / (alpha * r1.powf(alpha)),
                None => inv_pow(r, alpha) / alpha,
            },
            PotentialSpec::PowerLawAttractiveRepulsive { alpha, beta, r0, r1 } => {
                if beyond(r, r1) {
                    0.0
                } else {
                    let c = -(r0.powf(alpha) / (alpha * r1.powf(alpha))
                        - r0.powf(beta) / (beta * r1.powf(beta)));
                    r0.powf(alpha) * inv_pow(r, alpha) / alpha
                        - r0.powf(beta) * inv_pow(r, beta) / beta
                        + c
                }
            }
            PotentialSpec::GaussianRepulsive { width } => (-r * r / (2.0 * width * width)).exp(),
            PotentialSpec::GaussianCubic { width } => {
                (1.0 - r * r * r) * (-r * r / (2.0 * width * width)).exp()
            }
        }
    }

    /// `U'(r)`.
    pub fn radial_derivative(&self, r: f64) -> Result<f64> {
        Self::check_r(r)?;
        Ok(self.derivative_unchecked(r))
    }

    #[inline]
    pub(crate) fn derivative_unchecked(&self, r: f64) -> f64 {
        match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::PowerLawRepulsive { alpha, r1 } => match r1 {
                Some(r1) if beyond(r, r1) => 0.0,
                _ => -inv_pow(r, alpha + 1.0),
            },
            PotentialSpec::PowerLawAttractiveRepulsive { alpha, beta, r0, r1 } => {
                if beyond(r, r1) {
                    0.0
                } else {
                    -r0.powf(alpha) * inv_pow(r, alpha + 1.0)
                        + r0.powf(beta) * inv_pow(r, beta + 1.0)
                }
            }
            PotentialSpec::GaussianRepulsive { width } => {
                let s2 = width * width;
                -(r / s2) * (-r * r / (2.0 * s2)).exp()
            }
            PotentialSpec::GaussianCubic { width } => {
                let s2 = width * width;
                let g = (-r * r / (2.0 * s2)).exp();
                (-3.0 * r * r - (1.0 - r * r * r) * r / s2) * g
            }
        }
    }

    /// `-∇V(x) = -U'(|x|) x/|x|`: the force exerted on a particle at
    /// displacement `x` from its partner.
    pub fn force(&self, displacement: &[f64]) -> Result<Vec<f64>> {
        let r = nonzero_norm(displacement)?;
        let s = -self.derivative_unchecked(r) / r;
        Ok(displacement.iter().map(|c| s * c).collect())
    }

    /// Isotropic virial kernel `(1/d) |x| U'(|x|)`, the trace average of
    /// `x_β ∂_α V(x)`.
    pub fn virial_kernel(&self, displacement: &[f64]) -> Result<f64> {
        let r = nonzero_norm(displacement)?;
        Ok(r * self.derivative_unchecked(r) / displacement.len() as f64)
    }

    /// `∫_{ℝ^d} V(x) dx`, by radial quadrature.
    pub fn c_v(&self, dimension: usize) -> Result<f64> {
        if !(1..=MAX_DIM).contains(&dimension) {
            return Err(Error::Domain(format!("dimension {dimension} not supported")));
        }
        self.validate()?;
        let d = dimension as f64;
        let sphere = match dimension {
            1 => 2.0,
            2 => 2.0 * std::f64::consts::PI,
            _ => 4.0 * std::f64::consts::PI,
        };
        let radial = |r: f64| {
            if r <= 0.0 {
                0.0
            } else {
                self.value_unchecked(r) * r.powi(dimension as i32 - 1)
            }
        };
        let integral = match *self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::PowerLawRepulsive { alpha, r1 } => {
                let Some(r1) = r1 else {
                    let why = if alpha <= d {
                        format!("decay exponent alpha={alpha} <= d={dimension} at infinity")
                    } else {
                        format!("singularity exponent alpha={alpha} >= d={dimension} at the origin")
                    };
                    return Err(Error::Divergent(why));
                };
                if alpha >= d {
                    return Err(Error::Divergent(format!(
                        "singularity exponent alpha={alpha} >= d={dimension} at the origin"
                    )));
                }
                quadrature::integrate_from_zero(radial, r1, QUAD_REL_TOL)?
            }
            PotentialSpec::PowerLawAttractiveRepulsive { alpha, r1, .. } => {
                if alpha >= d {
                    return Err(Error::Divergent(format!(
                        "singularity exponent alpha={alpha} >= d={dimension} at the origin"
                    )));
                }
                quadrature::integrate_from_zero(radial, r1, QUAD_REL_TOL)?
            }
            PotentialSpec::GaussianRepulsive { width } | PotentialSpec::GaussianCubic { width } => {
                // integrand is below 1e-150 beyond 27 widths
                let upper = 27.0 * width;
                let n = 27;
                let mut total = 0.0;
                for k in 0..n {
                    let a = upper * k as f64 / n as f64;
                    let b = upper * (k + 1) as f64 / n as f64;
                    total += quadrature::integrate(radial, a, b, QUAD_REL_TOL * 0.1)?;
                }
                total
            }
        };
        Ok(sphere * integral)
    }

    /// Magnitude of the force at the clamp radius; used for stability warnings.
    pub fn force_bound(&self, min_separation: f64) -> f64 {
        self.derivative_unchecked(min_separation).abs()
    }

    /// `U''(r)` by finite differences, one-sided at the truncation radius.
    pub fn second_derivative(&self, r: f64) -> f64 {
        let h = 1e-6 * r.max(1e-3);
        let (a, b) = match self.support_radius() {
            Some(s) if s > 0.0 && r + h > s => (r - 2.0 * h, r),
            _ => (r - h, r + h),
        };
        (self.derivative_unchecked(b) - self.derivative_unchecked(a)) / (b - a)
    }
}

/// `coef · (r²)^{-e}` with the exponent classified once.
#[derive(Clone, Copy, Debug)]
struct PowerTerm {
    coef: f64,
    /// `4e` when it is a small integer.
    quarters: Option<u32>,
    e: f64,
}

impl PowerTerm {
    /// The term `coef · r^{-q}` as a function of `r²`.
    fn new(coef: f64, q: f64) -> Self {
        let e = 0.5 * q;
        let four = 4.0 * e;
        let quarters =
            (four == four.trunc() && (0.0..=64.0).contains(&four)).then_some(four as u32);
        PowerTerm { coef, quarters, e }
    }

    #[inline(always)]
    fn eval(&self, r2: f64) -> f64 {
        match self.quarters {
            Some(m) => {
                let whole = int_pow(r2, m / 4);
                let frac = match m % 4 {
                    0 => 1.0,
                    2 => r2.sqrt(),
                    1 => r2.sqrt().sqrt(),
                    _ => {
                        let s = r2.sqrt();
                        s * s.sqrt()
                    }
                };
                self.coef / (whole * frac)
            }
            None => self.coef * (-self.e * r2.ln()).exp(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum KernelForm {
    Zero,
    /// Sum of up to two power terms; the second has `coef = 0` when unused.
    Power([PowerTerm; 2]),
    Gaussian { inv_s2: f64 },
    GaussianCubic { inv_s2: f64 },
}

/// `U'(r)/r` as a function of `r²`, with parameters pre-digested for the
/// pair loops. Most families need no square root.
#[derive(Clone, Copy, Debug)]
pub(crate) struct DerivativeKernel {
    form: KernelForm,
    /// Squared truncation radius including the roundoff slack.
    reach2: f64,
}

impl DerivativeKernel {
    pub(crate) fn new(spec: &PotentialSpec) -> Self {
        let reach2 = |r1: f64| (r1 * (1.0 + TRUNCATION_SLACK)).powi(2);
        match *spec {
            PotentialSpec::Zero => DerivativeKernel {
                form: KernelForm::Zero,
                reach2: 0.0,
            },
            PotentialSpec::PowerLawRepulsive { alpha, r1 } => DerivativeKernel {
                form: KernelForm::Power([
                    PowerTerm::new(-1.0, alpha + 2.0),
                    PowerTerm::new(0.0, 0.0),
                ]),
                reach2: r1.map_or(f64::INFINITY, reach2),
            },
            PotentialSpec::PowerLawAttractiveRepulsive { alpha, beta, r0, r1 } => {
                DerivativeKernel {
                    form: KernelForm::Power([
                        PowerTerm::new(-r0.powf(alpha), alpha + 2.0),
                        PowerTerm::new(r0.powf(beta), beta + 2.0),
                    ]),
                    reach2: reach2(r1),
                }
            }
            PotentialSpec::GaussianRepulsive { width } => DerivativeKernel {
                form: KernelForm::Gaussian {
                    inv_s2: 1.0 / (width * width),
                },
                reach2: f64::INFINITY,
            },
            PotentialSpec::GaussianCubic { width } => DerivativeKernel {
                form: KernelForm::GaussianCubic {
                    inv_s2: 1.0 / (width * width),
                },
                reach2: f64::INFINITY,
            },
        }
    }

    /// `U'(r)/r` at `r = √r2`.
    #[inline(always)]
    pub(crate) fn over_r(&self, r2: f64) -> f64 {
        if r2 > self.reach2 {
            return 0.0;
        }
        match self.form {
            KernelForm::Zero => 0.0,
            KernelForm::Power([a, b]) => {
                if b.coef == 0.0 {
                    a.eval(r2)
                } else {
                    a.eval(r2) + b.eval(r2)
                }
            }
            KernelForm::Gaussian { inv_s2 } => -inv_s2 * (-0.5 * r2 * inv_s2).exp(),
            KernelForm::GaussianCubic { inv_s2 } => {
                let r = r2.sqrt();
                let g = (-0.5 * r2 * inv_s2).exp();
                (-3.0 * r - (1.0 - r2 * r) * inv_s2) * g
            }
        }
    }
}

/// Relative slack on truncation radii: distances that equal `r1` up to
/// roundoff count as inside, so lattice pairs at exactly `r1` are treated
/// consistently.
pub(crate) const TRUNCATION_SLACK: f64 = 1e-12;

#[inline]
fn beyond(r: f64, r1: f64) -> bool {
    r > r1 * (1.0 + TRUNCATION_SLACK)
}

fn nonzero_norm(displacement: &[f64]) -> Result<f64> {
    let r = norm(displacement);
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!(
            "pair displacement must be nonzero and finite, got |x| = {r}"
        )));
    }
    Ok(r)
}
