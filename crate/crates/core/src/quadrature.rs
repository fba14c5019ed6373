//! Adaptive Gauss–Kronrod (7/15-point) integration.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod rule on `[a, b]`; returns (estimate, error estimate).
fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        // odd Kronrod abscissae are the Gauss nodes
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integrates `f` over the finite interval `[a, b]` to the requested relative
/// tolerance (with a small absolute floor), bisecting the worst interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("integration bounds must be finite".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let abs_floor = 1e-300;
    let mut parts = vec![(a, b, kronrod15(&f, a, b))];
    for _ in 0..5000 {
        let total: f64 = parts.iter().map(|p| p.2 .0).sum();
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if !total.is_finite() {
            return Err(Error::Divergent("integrand is not finite".into()));
        }
        if err <= (rel_tol * total.abs()).max(abs_floor) {
            return Ok(total);
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("non-empty");
        let (lo, hi, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, kronrod15(&f, lo, mid)));
        parts.push((mid, hi, kronrod15(&f, mid, hi)));
    }
    Err(Error::Divergent(
        "adaptive quadrature did not reach tolerance".into(),
    ))
}

/// Integrates over `(0, b]` for integrands with an integrable power-type
/// singularity at zero, using dyadic pieces `[b 2^{-k-1}, b 2^{-k}]` and a
/// geometric-tail extrapolation for the remainder near zero.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: F, b: f64, rel_tol: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let mut hi = b;
    for _ in 0..400 {
        let lo = 0.5 * hi;
        let piece = integrate(&f, lo, hi, rel_tol * 0.1)?;
        total += piece;
        if let Some(p) = prev {
            let ratio = if p != 0.0 { piece / p } else { 0.0 };
            if ratio >= 1.0 {
                // pieces not shrinking: divergent unless everything is zero
                if piece != 0.0 && p.abs() > 0.0 && hi < b * 1e-6 {
                    return Err(Error::Divergent(
                        "integrand is not integrable at zero".into(),
                    ));
                }
            } else if ratio >= 0.0 {
                let tail = piece * ratio / (1.0 - ratio);
                if tail.abs() <= 0.01 * rel_tol * total.abs().max(1e-300) {
                    return Ok(total + tail);
                }
            }
        }
        prev = Some(piece);
        hi = lo;
        if piece == 0.0 && total == 0.0 && hi < b * 1e-12 {
            return Ok(0.0);
        }
    }
    Err(Error::Divergent(
        "integral near zero did not converge".into(),
    ))
}
