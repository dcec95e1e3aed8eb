use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A polar pixel grid on the disc of radius `r_max`.
///
/// Pixel `(i, j)` covers radius bin `i` and angle bin `j`; it is stored at
/// index `j * n_r + i`, so a rotation by one angle bin is a block shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    n_r: usize,
    n_theta: usize,
    r_max: f64,
}

impl PolarGrid {
    pub fn new(n_r: usize, n_theta: usize, r_max: f64) -> Result<Self> {
        if n_r == 0 || n_theta == 0 {
            return Err(Error::Config("grid needs at least one radial and one angular bin".into()));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::Config(format!("r_max must be positive, got {r_max}")));
        }
        Ok(Self { n_r, n_theta, r_max })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn n_pixels(&self) -> usize {
        self.n_r * self.n_theta
    }
    pub fn dr(&self) -> f64 {
        self.r_max / self.n_r as f64
    }
    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn index(&self, radius: usize, angle: usize) -> usize {
        angle * self.n_r + radius
    }

    /// `(radius bin, angle bin)` of a flat index.
    pub fn bins(&self, index: usize) -> (usize, usize) {
        (index % self.n_r, index / self.n_r)
    }

    /// Polar coordinates of a pixel center.
    pub fn center(&self, radius: usize, angle: usize) -> (f64, f64) {
        ((radius as f64 + 0.5) * self.dr(), (angle as f64 + 0.5) * self.dtheta())
    }

    /// The pixel containing the cartesian point, or `None` outside the disc.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let r = x.hypot(y);
        if r >= self.r_max {
            return None;
        }
        let i = ((r / self.dr()) as usize).min(self.n_r - 1);
        let mut th = y.atan2(x);
        if th < 0.0 {
            th += 2.0 * PI;
        }
        let j = ((th / self.dtheta()) as usize).min(self.n_theta - 1);
        Some(self.index(i, j))
    }
}
