use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform, symmetric position grid `x_j = x_min + j·dx`, `j = 0..n_points`,
/// with the momentum grid of the discrete Fourier transform as its dual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    n_points: usize,
    x_max: f64,
}

impl QuadratureGrid {
    pub fn new(n_points: usize, x_max: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::param("n_points", format!("must be a power of two ≥ 8, got {n_points}")));
        }
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::param("x_max", format!("must be positive, got {x_max}")));
        }
        Ok(QuadratureGrid { n_points, x_max })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn x_min(&self) -> f64 {
        -self.x_max
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_max / self.n_points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min() + j as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    pub fn dp(&self) -> f64 {
        2.0 * PI / (self.n_points as f64 * self.dx())
    }

    /// Largest representable momentum, `π/dx`.
    pub fn p_max(&self) -> f64 {
        PI / self.dx()
    }

    /// Momentum of FFT bin `k` (standard wrap-around order).
    pub fn p(&self, k: usize) -> f64 {
        let n = self.n_points as isize;
        let k = k as isize;
        let signed = if k < n / 2 { k } else { k - n };
        signed as f64 * self.dp()
    }

    /// Momenta in FFT bin order.
    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.p(k)).collect()
    }

    /// Same interval sampled `factor` times more densely.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        QuadratureGrid::new(self.n_points * factor, self.x_max)
    }
}
