use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::C64;

/// Forward/inverse FFT pair of fixed length with its own scratch space.
/// Transforms are unnormalized, as in `rustfft`.
#[derive(Clone)]
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("len", &self.len()).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Spectral { forward, inverse, scratch: vec![C64::default(); scratch_len] }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&mut self, data: &mut [C64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    pub fn inverse(&mut self, data: &mut [C64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }
}

/// Band-limited interpolation of periodic samples onto a grid `factor` times
/// denser covering the same interval (zero padding in Fourier space).
pub fn refine_samples(values: &[C64], factor: usize) -> Vec<C64> {
    let n = values.len();
    if factor == 1 {
        return values.to_vec();
    }
    let m = n * factor;
    let mut spec = values.to_vec();
    Spectral::new(n).forward(&mut spec);
    let mut padded = vec![C64::default(); m];
    let half = n / 2;
    padded[..half].copy_from_slice(&spec[..half]);
    // split the Nyquist bin symmetrically
    padded[half] = spec[half] * 0.5;
    padded[m - half] = spec[half] * 0.5;
    padded[m - half + 1..].copy_from_slice(&spec[half + 1..]);
    Spectral::new(m).inverse(&mut padded);
    let scale = 1.0 / n as f64;
    padded.iter_mut().for_each(|v| *v *= scale);
    padded
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut s = Spectral::new(16);
        let orig: Vec<C64> = (0..16).map(|j| C64::new(j as f64, -(j as f64).sin())).collect();
        let mut d = orig.clone();
        s.forward(&mut d);
        s.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a / 16.0 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn refinement_interpolates_band_limited_signal() {
        let n = 32;
        let f = |x: f64| C64::new((3.0 * x).cos(), (5.0 * x).sin());
        let two_pi = 2.0 * std::f64::consts::PI;
        let coarse: Vec<C64> = (0..n).map(|j| f(two_pi * j as f64 / n as f64)).collect();
        let fine = refine_samples(&coarse, 4);
        for (j, v) in fine.iter().enumerate() {
            assert!((v - f(two_pi * j as f64 / (4 * n) as f64)).norm() < 1e-12);
        }
    }
}
