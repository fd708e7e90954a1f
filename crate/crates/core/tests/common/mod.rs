//! Reference computations for the integration tests, written independently
//! of the library routines they check.

#![allow(dead_code)]

use std::f64::consts::PI;

use rabi_chaos::quantum::SpinorState;
use rabi_chaos::C64;

/// Non-zero mean-field equilibrium of the undriven model on the lower branch.
pub fn bifurcation_position(g: f64, omega_q: f64) -> Option<f64> {
    let r = 2.0 - omega_q * omega_q / (8.0 * g.powi(4));
    (r > 0.0).then(|| g * r.sqrt())
}

/// Husimi function from coherent-state overlaps,
/// `Q(X, P) = (1/2π) Σ_s |⟨X, P|ψ_s⟩|²`, evaluated on `xs × ps` (row-major
/// in `x`). Only grid points within eight units of `X` contribute.
pub fn husimi_direct(state: &SpinorState, xs: &[f64], ps: &[f64]) -> Vec<f64> {
    let grid = &state.grid;
    let n = grid.n_points();
    let dx = grid.dx();
    let norm = PI.powf(-0.25);
    let mut out = vec![0.0; xs.len() * ps.len()];
    for (i, &cx) in xs.iter().enumerate() {
        let lo = ((cx - 8.0 - grid.x_min()) / dx).floor().max(0.0) as usize;
        let hi = (((cx + 8.0 - grid.x_min()) / dx).ceil() as usize).min(n - 1);
        let mut weighted: [Vec<(f64, C64)>; 2] = [Vec::new(), Vec::new()];
        for s in 0..2 {
            for j in lo..=hi {
                let y = grid.x(j);
                let env = norm * (-(y - cx) * (y - cx) / 2.0).exp();
                weighted[s].push((y, state.amplitudes[s * n + j] * env));
            }
        }
        for (k, &cp) in ps.iter().enumerate() {
            let mut q = 0.0;
            for w in &weighted {
                let amp: C64 = w.iter().map(|&(y, a)| a * C64::from_polar(1.0, -cp * y)).sum();
                q += (amp * dx).norm_sqr();
            }
            out[i * ps.len() + k] = q / (2.0 * PI);
        }
    }
    out
}

/// Uniform axis with the given step covering `[lo, hi]`.
pub fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}
