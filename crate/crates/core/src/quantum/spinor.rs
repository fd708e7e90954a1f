use std::f64::consts::PI;

use super::grid::QuadratureGrid;
use super::spectral::{refine_samples, Spectral};
use crate::error::{Error, Result};
use crate::model::{Minimum, ModelParams};
use crate::C64;

/// Qubit–field wavefunction `ψ_s(x_j)` on a position grid; `s = 0` is the
/// excited qubit level, `s = 1` the ground level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorState {
    pub grid: QuadratureGrid,
    /// Component 0 followed by component 1, each `n_points` long.
    pub amplitudes: Vec<C64>,
    pub t: f64,
}

/// First and second quadrature moments plus inversion of a normalized state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_x2: f64,
    pub mean_p: f64,
    pub mean_p2: f64,
    pub sigma_z: f64,
}

impl Moments {
    pub fn var_x(&self) -> f64 {
        self.mean_x2 - self.mean_x * self.mean_x
    }

    pub fn var_p(&self) -> f64 {
        self.mean_p2 - self.mean_p * self.mean_p
    }

    /// `√(Var x · Var p)`.
    pub fn width(&self) -> f64 {
        (self.var_x().max(0.0) * self.var_p().max(0.0)).sqrt()
    }

    /// `⟨a†a⟩ = (⟨x²⟩ + ⟨p²⟩ − 1)/2`.
    pub fn mean_n(&self) -> f64 {
        0.5 * (self.mean_x2 + self.mean_p2 - 1.0)
    }
}

impl SpinorState {
    pub fn zeros(grid: QuadratureGrid) -> Self {
        SpinorState { grid, amplitudes: vec![C64::default(); 2 * grid.n_points()], t: 0.0 }
    }

    /// `ψ_s(x) = f(x)·q_s`, normalized.
    pub fn product(grid: QuadratureGrid, field: impl Fn(f64) -> C64, qubit: [C64; 2]) -> Result<Self> {
        let mut s = SpinorState::zeros(grid);
        let n = grid.n_points();
        for j in 0..n {
            let f = field(grid.x(j));
            s.amplitudes[j] = f * qubit[0];
            s.amplitudes[n + j] = f * qubit[1];
        }
        s.normalize()?;
        Ok(s)
    }

    /// Coherent state centred at `(x0, p0)` times a qubit state.
    pub fn coherent(grid: QuadratureGrid, x0: f64, p0: f64, qubit: [C64; 2]) -> Result<Self> {
        let tail = (-(grid.x_max() - x0.abs()).powi(2) / 2.0).exp();
        if x0.abs() >= grid.x_max() || tail > 1e-12 {
            return Err(Error::GridTooNarrow(format!(
                "Gaussian at x0 = {x0} has tail {tail:e} at the boundary ±{}",
                grid.x_max()
            )));
        }
        let c = PI.powf(-0.25);
        SpinorState::product(
            grid,
            |x| C64::from_polar(c * (-(x - x0).powi(2) / 2.0).exp(), p0 * x),
            qubit,
        )
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    pub fn component(&self, s: usize) -> &[C64] {
        let n = self.n_points();
        &self.amplitudes[s * n..(s + 1) * n]
    }

    pub fn component_mut(&mut self, s: usize) -> &mut [C64] {
        let n = self.n_points();
        &mut self.amplitudes[s * n..(s + 1) * n]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::NonFinite { t: self.t, context: format!("state norm {n}") });
        }
        let s = n.sqrt().recip();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    /// `⟨a|b⟩` on the shared grid.
    pub fn inner(&self, other: &SpinorState) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum::<C64>() * self.grid.dx()
    }

    pub fn fidelity(&self, other: &SpinorState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Position density `Σ_s |ψ_s(x_j)|²`.
    pub fn position_density(&self) -> Vec<f64> {
        let (a, b) = (self.component(0), self.component(1));
        a.iter().zip(b).map(|(u, v)| u.norm_sqr() + v.norm_sqr()).collect()
    }

    /// `⟨σ_z⟩ = ‖ψ_e‖² − ‖ψ_g‖²` relative to the total norm.
    pub fn sigma_z(&self) -> f64 {
        let e: f64 = self.component(0).iter().map(|a| a.norm_sqr()).sum();
        let g: f64 = self.component(1).iter().map(|a| a.norm_sqr()).sum();
        (e - g) / (e + g)
    }

    /// `⟨x⟩`, `⟨x²⟩` relative to the total norm.
    pub fn position_moments(&self) -> (f64, f64) {
        let mut w = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (j, d) in self.position_density().into_iter().enumerate() {
            let x = self.grid.x(j);
            w += d;
            m1 += d * x;
            m2 += d * x * x;
        }
        (m1 / w, m2 / w)
    }

    /// Momentum-space amplitudes of both components in FFT order, scaled so
    /// that `Σ_k |φ_s(p_k)|² dp = ‖ψ_s‖²`.
    pub fn momentum_amplitudes(&self, spectral: &mut Spectral) -> Vec<C64> {
        let n = self.n_points();
        assert_eq!(spectral.len(), n, "spectral length mismatch");
        let mut out = self.amplitudes.clone();
        let scale = self.grid.dx() / (2.0 * PI).sqrt();
        for s in 0..2 {
            let chunk = &mut out[s * n..(s + 1) * n];
            spectral.forward(chunk);
            for (k, v) in chunk.iter_mut().enumerate() {
                // phase from the grid origin at x_min
                *v *= C64::from_polar(scale, -self.grid.p(k) * self.grid.x_min());
            }
        }
        out
    }

    pub fn moments(&self, spectral: &mut Spectral) -> Moments {
        let (mean_x, mean_x2) = self.position_moments();
        let phi = self.momentum_amplitudes(spectral);
        let n = self.n_points();
        let mut w = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for k in 0..n {
            let d = phi[k].norm_sqr() + phi[n + k].norm_sqr();
            let p = self.grid.p(k);
            w += d;
            m1 += d * p;
            m2 += d * p * p;
        }
        Moments { mean_x, mean_x2, mean_p: m1 / w, mean_p2: m2 / w, sigma_z: self.sigma_z() }
    }

    /// `(⟨n⟩, ⟨n²⟩)` with `n = (p² + x² − 1)/2`, applied spectrally.
    pub fn photon_number_moments(&self, spectral: &mut Spectral) -> (f64, f64) {
        let n = self.n_points();
        assert_eq!(spectral.len(), n, "spectral length mismatch");
        let mut kin = self.amplitudes.clone();
        for s in 0..2 {
            let chunk = &mut kin[s * n..(s + 1) * n];
            spectral.forward(chunk);
            for (k, v) in chunk.iter_mut().enumerate() {
                let p = self.grid.p(k);
                *v *= p * p / n as f64;
            }
            spectral.inverse(chunk);
        }
        let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for s in 0..2 {
            for j in 0..n {
                let i = s * n + j;
                let x = self.grid.x(j);
                let a = self.amplitudes[i];
                let na = 0.5 * (kin[i] + a * (x * x - 1.0));
                w += a.norm_sqr();
                m1 += (a.conj() * na).re;
                m2 += na.norm_sqr();
            }
        }
        (m1 / w, m2 / w)
    }

    /// Largest boundary amplitude relative to the peak amplitude.
    pub fn boundary_ratio(&self) -> f64 {
        let n = self.n_points();
        let peak = self.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let edge = [0, n - 1, n, 2 * n - 1]
            .iter()
            .map(|&i| self.amplitudes[i].norm())
            .fold(0.0, f64::max);
        edge / peak
    }

    pub fn check_boundary(&self, tolerance: f64) -> Result<()> {
        let ratio = self.boundary_ratio();
        if ratio < tolerance {
            Ok(())
        } else {
            Err(Error::BoundaryLeak { t: self.t, ratio })
        }
    }

    /// Spectrally interpolated copy on a grid `factor` times denser.
    pub fn refined(&self, factor: usize) -> Result<SpinorState> {
        if factor == 1 {
            return Ok(self.clone());
        }
        let grid = self.grid.refined(factor)?;
        let mut amplitudes = refine_samples(self.component(0), factor);
        amplitudes.extend(refine_samples(self.component(1), factor));
        Ok(SpinorState { grid, amplitudes, t: self.t })
    }
}

/// Coherent state at the chosen minimum `±x_ss` with the qubit on the lower
/// adiabatic branch at that position.
pub fn build_initial_state(params: &ModelParams, grid: QuadratureGrid, minimum: Minimum) -> Result<SpinorState> {
    params.validate()?;
    let x0 = minimum.sign() * params.bifurcated_position().unwrap_or(0.0);
    let [a, b] = params.lower_adiabatic_qubit_state(x0);
    SpinorState::coherent(grid, x0, 0.0, [C64::new(a, 0.0), C64::new(b, 0.0)])
}
