use std::f64::consts::SQRT_2;

use rand::Rng;

use super::grid::QuadratureGrid;
use super::spectral::Spectral;
use super::spinor::SpinorState;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::C64;

/// Position-diagonal jump operator `L(x_j)`; the measurement channel is
/// `√(2κ)·L`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    values: Vec<f64>,
}

impl JumpChannel {
    /// `L = x̂`.
    pub fn position(grid: &QuadratureGrid) -> Self {
        JumpChannel { values: grid.positions() }
    }

    pub fn from_fn(grid: &QuadratureGrid, f: impl Fn(f64) -> f64) -> Self {
        JumpChannel { values: grid.positions().into_iter().map(f).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `⟨L²⟩` of a (not necessarily normalized) state.
    pub fn expectation_sqr(&self, state: &SpinorState) -> f64 {
        let n = state.n_points();
        let (mut w, mut m) = (0.0, 0.0);
        for (j, l) in self.values.iter().enumerate() {
            let d = state.amplitudes[j].norm_sqr() + state.amplitudes[n + j].norm_sqr();
            w += d;
            m += d * l * l;
        }
        m / w
    }
}

/// Strang split-operator propagator for the spinor, with optional
/// non-Hermitian decay and jumps for the measurement channel.
#[derive(Debug, Clone)]
pub struct SplitOperator {
    params: ModelParams,
    grid: QuadratureGrid,
    dt: f64,
    /// `exp(−i dt/2 [(Ω/2)σ_z + √2 g x σ_x])` per grid point as (00, 01=10, 11).
    qubit_half: Vec<[C64; 3]>,
    /// `exp(−i dt/2 · x²/2)`.
    harmonic_half: Vec<C64>,
    /// `exp(−i dt p²/2) / N` in FFT order.
    kinetic: Vec<C64>,
    channel: JumpChannel,
    /// `exp(−κ L² dt)`.
    decay: Vec<f64>,
    spectral: Spectral,
}

impl SplitOperator {
    pub fn new(params: &ModelParams, grid: QuadratureGrid, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let tau = 0.5 * dt;
        let a = 0.5 * params.qubit_frequency;
        let qubit_half = grid
            .positions()
            .into_iter()
            .map(|x| {
                let b = SQRT_2 * params.g * x;
                let r = (a * a + b * b).sqrt();
                let (s, c) = (tau * r).sin_cos();
                let (na, nb) = if r > 0.0 { (a / r, b / r) } else { (0.0, 0.0) };
                [C64::new(c, -s * na), C64::new(0.0, -s * nb), C64::new(c, s * na)]
            })
            .collect();
        let harmonic_half = grid.positions().iter().map(|x| C64::from_polar(1.0, -tau * 0.5 * x * x)).collect();
        let inv_n = 1.0 / grid.n_points() as f64;
        let kinetic = grid.momenta().iter().map(|p| C64::from_polar(inv_n, -dt * 0.5 * p * p)).collect();
        let channel = JumpChannel::position(&grid);
        let mut op = SplitOperator {
            params: *params,
            grid,
            dt,
            qubit_half,
            harmonic_half,
            kinetic,
            decay: Vec::new(),
            channel,
            spectral: Spectral::new(grid.n_points()),
        };
        op.set_channel(op.channel.clone())?;
        Ok(op)
    }

    /// Replace the measurement channel (default `L = x̂`).
    pub fn set_channel(&mut self, channel: JumpChannel) -> Result<()> {
        if channel.values.len() != self.grid.n_points() {
            return Err(Error::Mismatch("jump channel length differs from grid".into()));
        }
        let k = self.params.kappa * self.dt;
        self.decay = channel.values.iter().map(|l| (-k * l * l).exp()).collect();
        self.channel = channel;
        Ok(())
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn channel(&self) -> &JumpChannel {
        &self.channel
    }

    pub fn spectral(&mut self) -> &mut Spectral {
        &mut self.spectral
    }

    fn position_half(&self, state: &mut SpinorState, t_mid: f64) {
        let n = self.grid.n_points();
        let tau = 0.5 * self.dt;
        let f = self.params.position_drive(t_mid);
        let mut phase = C64::from_polar(1.0, -tau * f * self.grid.x_min());
        let w = C64::from_polar(1.0, -tau * f * self.grid.dx());
        let (e, g) = state.amplitudes.split_at_mut(n);
        for j in 0..n {
            let [u00, u01, u11] = self.qubit_half[j];
            let scalar = self.harmonic_half[j] * phase;
            let (a, b) = (e[j], g[j]);
            e[j] = scalar * (u00 * a + u01 * b);
            g[j] = scalar * (u01 * a + u11 * b);
            phase *= w;
        }
    }

    fn kinetic_full(&mut self, state: &mut SpinorState, t_mid: f64) {
        let n = self.grid.n_points();
        let a = self.params.vector_potential(t_mid);
        let z = C64::from_polar(1.0, -self.dt * a * self.grid.dp());
        let global = C64::from_polar(1.0, -self.dt * 0.5 * a * a);
        for s in 0..2 {
            let chunk = state.component_mut(s);
            self.spectral.forward(chunk);
            let mut shift = global;
            for k in 0..n / 2 {
                chunk[k] *= self.kinetic[k] * shift;
                shift *= z;
            }
            let mut shift = global * C64::from_polar(1.0, self.dt * a * self.grid.dp() * (n / 2) as f64);
            for k in n / 2..n {
                chunk[k] *= self.kinetic[k] * shift;
                shift *= z;
            }
            self.spectral.inverse(chunk);
        }
    }

    /// One Strang step of the unitary dynamics, in place.
    pub fn split_step(&mut self, state: &mut SpinorState) -> Result<()> {
        if state.grid != self.grid {
            return Err(Error::Mismatch("state grid differs from propagator grid".into()));
        }
        let t = state.t;
        self.position_half(state, t + 0.25 * self.dt);
        self.kinetic_full(state, t + 0.5 * self.dt);
        self.position_half(state, t + 0.75 * self.dt);
        state.t = t + self.dt;
        let norm = state.norm_sqr();
        if !norm.is_finite() {
            return Err(Error::NonFinite { t: state.t, context: "split-operator step".into() });
        }
        Ok(())
    }

    /// Unitary step followed by the decay factor `exp(−κ L² dt)`. The state
    /// is left unnormalized; returns the squared-norm loss.
    pub fn no_jump_step(&mut self, state: &mut SpinorState) -> Result<f64> {
        let before = state.norm_sqr();
        self.split_step(state)?;
        if self.params.kappa == 0.0 {
            return Ok(0.0);
        }
        let n = self.grid.n_points();
        for (j, d) in self.decay.iter().enumerate() {
            state.amplitudes[j] *= *d;
            state.amplitudes[n + j] *= *d;
        }
        Ok(before - state.norm_sqr())
    }

    /// Jump probability `2κ dt ⟨L²⟩` for the current state.
    pub fn jump_probability(&self, state: &SpinorState) -> f64 {
        2.0 * self.params.kappa * self.dt * self.channel.expectation_sqr(state)
    }

    /// Decide between a jump (`ψ ← Lψ/‖Lψ‖`) and no jump (renormalize) given
    /// a uniform draw in `[0, 1)`. Returns whether a jump occurred.
    pub fn maybe_jump(&self, state: &mut SpinorState, draw: f64) -> Result<bool> {
        let dp = self.jump_probability(state);
        if dp >= 0.1 {
            return Err(Error::JumpProbabilityTooLarge { probability: dp, kappa: self.params.kappa, dt: self.dt });
        }
        let jumped = draw < dp;
        if jumped {
            let n = self.grid.n_points();
            for (j, l) in self.channel.values.iter().enumerate() {
                state.amplitudes[j] *= *l;
                state.amplitudes[n + j] *= *l;
            }
        }
        state.normalize()?;
        Ok(jumped)
    }

    /// Full stochastic step; returns whether a jump occurred.
    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut SpinorState, rng: &mut R) -> Result<bool> {
        if self.params.kappa == 0.0 {
            self.split_step(state)?;
            return Ok(false);
        }
        self.no_jump_step(state)?;
        let draw: f64 = rng.random();
        self.maybe_jump(state, draw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Minimum;
    use crate::quantum::spinor::build_initial_state;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn free_rotation_returns_after_one_period() {
        let p = ModelParams::reference().with_eta0(0.0).with_g(0.0);
        let grid = QuadratureGrid::new(256, 12.0).unwrap();
        let s0 = SpinorState::coherent(grid, 2.0, 0.0, [C64::default(), one()]).unwrap();
        let dt = 2.0 * PI / 2000.0;
        let mut op = SplitOperator::new(&p, grid, dt).unwrap();
        let mut s = s0.clone();
        for _ in 0..2000 {
            op.split_step(&mut s).unwrap();
        }
        assert!(s.fidelity(&s0) > 1.0 - 1e-8);
    }

    #[test]
    fn unitary_step_preserves_norm() {
        let p = ModelParams::reference();
        let grid = QuadratureGrid::new(256, 16.0).unwrap();
        let mut s = build_initial_state(&p, grid, Minimum::Right).unwrap();
        let mut op = SplitOperator::new(&p, grid, 1e-2).unwrap();
        for _ in 0..100 {
            let before = s.norm_sqr();
            op.split_step(&mut s).unwrap();
            assert!((s.norm_sqr() - before).abs() < 1e-12);
        }
    }

    #[test]
    fn no_jump_without_kappa_matches_split_step() {
        let p = ModelParams::reference();
        let grid = QuadratureGrid::new(128, 14.0).unwrap();
        let s0 = build_initial_state(&p, grid, Minimum::Right).unwrap();
        let mut op = SplitOperator::new(&p, grid, 1e-2).unwrap();
        let (mut a, mut b) = (s0.clone(), s0);
        op.split_step(&mut a).unwrap();
        let loss = op.no_jump_step(&mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn norm_loss_matches_first_order_rate() {
        let kappa = 0.05;
        let p = ModelParams::reference().with_kappa(kappa);
        let grid = QuadratureGrid::new(256, 16.0).unwrap();
        let dt = 1e-4;
        let s0 = build_initial_state(&p, grid, Minimum::Right).unwrap();
        let mut op = SplitOperator::new(&p, grid, dt).unwrap();
        let mut s = s0.clone();
        let x2 = op.channel().expectation_sqr(&s0);
        let loss = op.no_jump_step(&mut s).unwrap();
        let expected = 2.0 * kappa * dt * x2;
        assert!((loss - expected).abs() < 10.0 * expected * expected + 1e-3 * expected);
        assert!(op.decay.iter().all(|d| *d <= 1.0 && *d > 0.0));
    }

    #[test]
    fn jump_on_vacuum_gives_first_excited_profile() {
        let p = ModelParams::reference().with_kappa(0.05);
        let grid = QuadratureGrid::new(256, 12.0).unwrap();
        let mut s = SpinorState::coherent(grid, 0.0, 0.0, [C64::default(), one()]).unwrap();
        let op = SplitOperator::new(&p, grid, 1e-3).unwrap();
        assert!(op.maybe_jump(&mut s, 0.0).unwrap());
        let m = s.moments(&mut Spectral::new(256));
        assert_abs_diff_eq!(m.mean_x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean_n(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn jump_shifts_displaced_gaussian() {
        let kappa = 0.02;
        let dt = 1e-3;
        let p = ModelParams::reference().with_kappa(kappa);
        let grid = QuadratureGrid::new(512, 16.0).unwrap();
        let x0 = 1.7;
        let mut s = SpinorState::coherent(grid, x0, 0.0, [one(), C64::default()]).unwrap();
        let op = SplitOperator::new(&p, grid, dt).unwrap();
        assert_abs_diff_eq!(op.jump_probability(&s), 2.0 * kappa * dt * (x0 * x0 + 0.5), epsilon = 1e-12);
        assert!(op.maybe_jump(&mut s, 0.0).unwrap());
        let (mx, _) = s.position_moments();
        assert_abs_diff_eq!(mx, x0 * (x0 * x0 + 1.5) / (x0 * x0 + 0.5), epsilon = 1e-10);
    }

    #[test]
    fn oversized_jump_probability_is_rejected() {
        let p = ModelParams::reference().with_kappa(5.0);
        let grid = QuadratureGrid::new(256, 16.0).unwrap();
        let mut s = build_initial_state(&p, grid, Minimum::Right).unwrap();
        let op = SplitOperator::new(&p, grid, 0.01).unwrap();
        assert!(matches!(op.maybe_jump(&mut s, 0.5), Err(Error::JumpProbabilityTooLarge { .. })));
    }
}
