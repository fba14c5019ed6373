//! Periodic-domain arithmetic on the cubic torus `[0, L)^d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest spatial dimension the simulation kernels handle.
pub const MAX_DIM: usize = 3;

/// Cubic periodic box of side `side` in `dimension` dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusBox {
    dimension: usize,
    side: f64,
}

impl TorusBox {
    pub fn new(dimension: usize, side: f64) -> Result<Self> {
        let b = TorusBox { dimension, side };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.dimension) {
            return Err(Error::Config(format!(
                "box dimension must be 1, 2 or 3, got {}",
                self.dimension
            )));
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(Error::Config(format!(
                "box side must be positive and finite, got {}",
                self.side
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    #[inline]
    pub fn side(&self) -> f64 {
        self.side
    }

    /// `L^d`.
    pub fn volume(&self) -> f64 {
        self.side.powi(self.dimension as i32)
    }

    /// Reduces one coordinate into `[0, L)`.
    #[inline]
    pub fn wrap_coord(&self, c: f64) -> f64 {
        let l = self.side;
        if (0.0..l).contains(&c) {
            return c;
        }
        self.wrap_coord_far(c)
    }

    #[cold]
    #[inline(never)]
    fn wrap_coord_far(&self, c: f64) -> f64 {
        let l = self.side;
        let w = c - l * (c / l).floor();
        // floor() can leave w == L for tiny negative c
        if w >= l {
            w - l
        } else {
            w
        }
    }

    /// Reduces one displacement component into `[-L/2, L/2)`.
    #[inline]
    pub fn image_coord(&self, dx: f64) -> f64 {
        let l = self.side;
        let h = 0.5 * l;
        // differences of wrapped coordinates lie in (-L, L)
        if dx.abs() < l {
            if dx >= h {
                dx - l
            } else if dx < -h {
                dx + l
            } else {
                dx
            }
        } else {
            self.image_coord_far(dx)
        }
    }

    #[cold]
    #[inline(never)]
    fn image_coord_far(&self, dx: f64) -> f64 {
        let l = self.side;
        let mut r = dx - l * (dx / l + 0.5).floor();
        if r >= 0.5 * l {
            r -= l;
        } else if r < -0.5 * l {
            r += l;
        }
        r
    }

    /// Canonical representative of `position` in `[0, L)^d`.
    pub fn wrap(&self, position: &[f64]) -> Result<Vec<f64>> {
        let mut out = position.to_vec();
        self.wrap_in_place(&mut out)?;
        Ok(out)
    }

    pub fn wrap_in_place(&self, position: &mut [f64]) -> Result<()> {
        self.check_len(position)?;
        for c in position.iter_mut() {
            if !c.is_finite() {
                return Err(Error::Domain(format!("non-finite coordinate {c}")));
            }
            *c = self.wrap_coord(*c);
        }
        Ok(())
    }

    /// Shortest periodic representative of `x - y`, each component in `[-L/2, L/2)`.
    pub fn minimal_image(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        self.check_len(y)?;
        x.iter()
            .zip(y)
            .map(|(a, b)| {
                if a.is_finite() && b.is_finite() {
                    Ok(self.image_coord(a - b))
                } else {
                    Err(Error::Domain("non-finite coordinate".into()))
                }
            })
            .collect()
    }

    /// Torus distance between two points.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(norm(&self.minimal_image(x, y)?))
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dimension {
            return Err(Error::Domain(format!(
                "vector of length {} in a {}-dimensional box",
                v.len(),
                self.dimension
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}
