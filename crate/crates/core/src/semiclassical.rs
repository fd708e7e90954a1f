//! Mean-field dynamics: the field quadratures are c-numbers while the qubit
//! stays a pure two-level state, described by its Bloch components.
//!
//! The equations are integrated in Bloch form `(u, v, Z)` with
//! `u = √(1−Z²) cos Δφ`, `v = √(1−Z²) sin Δφ`, which is regular at the poles
//! `|Z| = 1`. The inversion/relative-phase form is kept in
//! [`polar_derivative`] as a cross-check away from the poles.

use std::f64::consts::SQRT_2;
use std::io::Write;

use nalgebra::{Matrix5, Vector5};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{FixedPoint, Minimum, ModelParams};
use crate::ode::{DormandPrince, Tolerance};
use crate::rng::substream;

/// Phase-space point of one trajectory plus the qubit Bloch components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SemiclassicalState {
    pub x: f64,
    pub p: f64,
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl SemiclassicalState {
    pub fn new(x: f64, p: f64, u: f64, v: f64, z: f64) -> Self {
        SemiclassicalState { x, p, u, v, z }
    }

    /// Build from inversion `Z` and relative phase `Δφ`.
    pub fn from_polar(x: f64, p: f64, z: f64, dphi: f64) -> Self {
        let r = (1.0 - z * z).max(0.0).sqrt();
        SemiclassicalState { x, p, u: r * dphi.cos(), v: r * dphi.sin(), z }
    }

    pub fn bloch_norm_sqr(&self) -> f64 {
        self.u * self.u + self.v * self.v + self.z * self.z
    }

    /// Δφ = atan2(v, u); meaningless at the poles.
    pub fn relative_phase(&self) -> f64 {
        self.v.atan2(self.u)
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.x, self.p, self.u, self.v, self.z]
    }

    pub fn from_slice(a: &[f64]) -> Self {
        SemiclassicalState { x: a[0], p: a[1], u: a[2], v: a[3], z: a[4] }
    }

    fn distance(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Time derivative of the mean-field equations; κ does not enter.
pub fn eom_derivative(params: &ModelParams, s: &SemiclassicalState, t: f64) -> SemiclassicalState {
    let half_omega = 0.5 * params.qubit_frequency;
    let sg = SQRT_2 * params.g;
    SemiclassicalState {
        x: s.p + params.vector_potential(t),
        p: -s.x - sg * s.u - params.position_drive(t),
        u: -half_omega * s.v,
        v: half_omega * s.u - sg * s.x * s.z,
        z: sg * s.x * s.v,
    }
}

/// Inversion/relative-phase form; `y = [x, p, Z, Δφ]`. Singular at `|Z| = 1`.
pub fn polar_derivative(params: &ModelParams, y: [f64; 4], t: f64) -> [f64; 4] {
    let [x, p, z, dphi] = y;
    let sg = SQRT_2 * params.g;
    let r = (1.0 - z * z).sqrt();
    [
        p + params.vector_potential(t),
        -x - sg * r * dphi.cos() - params.position_drive(t),
        sg * x * r * dphi.sin(),
        0.5 * params.qubit_frequency - sg * x * dphi.cos() * z / r,
    ]
}

/// Mean-field energy (conserved when η₀ = 0).
pub fn semiclassical_energy(params: &ModelParams, s: &SemiclassicalState, t: f64) -> f64 {
    0.5 * (s.p * s.p + s.x * s.x)
        + s.p * params.vector_potential(t)
        + s.x * params.position_drive(t)
        + SQRT_2 * params.g * s.x * s.u
        + 0.5 * params.qubit_frequency * s.z
}

fn rhs(params: &ModelParams) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    move |t, y, dy| {
        let d = eom_derivative(params, &SemiclassicalState::from_slice(y), t);
        dy.copy_from_slice(&d.to_array());
    }
}

fn renormalize_bloch(y: &mut [f64]) -> bool {
    let n = y[2] * y[2] + y[3] * y[3] + y[4] * y[4];
    if (n - 1.0).abs() > 1e-12 {
        let s = n.sqrt().recip();
        y[2] *= s;
        y[3] *= s;
        y[4] *= s;
        true
    } else {
        false
    }
}

/// Reusable integrator for single trajectories.
#[derive(Debug, Clone)]
pub struct SemiclassicalSolver {
    params: ModelParams,
    solver: DormandPrince<f64>,
}

impl SemiclassicalSolver {
    pub fn new(params: ModelParams, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::param("tol", format!("must be positive, got {tol}")));
        }
        Ok(SemiclassicalSolver { params, solver: DormandPrince::new(5, Tolerance::uniform(tol)) })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Advance `s` in place from `t0` to `t1`.
    pub fn advance(&mut self, s: &mut SemiclassicalState, t0: f64, t1: f64) -> Result<()> {
        let mut y = s.to_array();
        let f = rhs(&self.params);
        self.solver.integrate(&f, t0, &mut y, t1, |_, y| renormalize_bloch(y))?;
        *s = SemiclassicalState::from_slice(&y);
        Ok(())
    }

    /// Every accepted step between `t0` and `t1`, starting with `(t0, s0)`.
    pub fn trajectory(&mut self, s0: SemiclassicalState, t0: f64, t1: f64) -> Result<Vec<(f64, SemiclassicalState)>> {
        let mut y = s0.to_array();
        let mut out = vec![(t0, s0)];
        let f = rhs(&self.params);
        self.solver.reset();
        self.solver.integrate(&f, t0, &mut y, t1, |t, y| {
            let modified = renormalize_bloch(y);
            out.push((t, SemiclassicalState::from_slice(y)));
            modified
        })?;
        Ok(out)
    }

    /// States at the requested (increasing) times, starting from `(t0, s0)`.
    pub fn sample(&mut self, s0: SemiclassicalState, t0: f64, times: &[f64]) -> Result<Vec<SemiclassicalState>> {
        let mut s = s0;
        let mut t = t0;
        self.solver.reset();
        times
            .iter()
            .map(|&ti| {
                if ti > t {
                    self.advance(&mut s, t, ti)?;
                    t = ti;
                }
                Ok(s)
            })
            .collect()
    }
}

/// Adaptive integration of one trajectory, returning every accepted step.
pub fn integrate(
    params: &ModelParams,
    s0: SemiclassicalState,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<Vec<(f64, SemiclassicalState)>> {
    SemiclassicalSolver::new(*params, tol)?.trajectory(s0, t0, t1)
}

/// Truncated-Wigner ensemble sharing a common time.
#[derive(Debug, Clone)]
pub struct TwaEnsemble {
    pub states: Vec<SemiclassicalState>,
    pub rng_seed: u64,
    pub t: f64,
}

/// Sample `n` trajectories from the coherent state centred on the chosen
/// minimum, `x ~ N(±x_ss, 1/2)`, `p ~ N(0, 1/2)`, qubit at `Δφ = π`, `Z = 0`
/// (mirrored for the left well).
pub fn sample_initial_ensemble(params: &ModelParams, n: usize, seed: u64, minimum: Minimum) -> Result<TwaEnsemble> {
    if n == 0 {
        return Err(Error::param("n", "ensemble size must be at least 1"));
    }
    let sign = minimum.sign();
    let centre = sign * params.bifurcated_position().unwrap_or(0.0);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
    let states = (0..n)
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let x = centre + normal.sample(&mut rng);
            let p = normal.sample(&mut rng);
            SemiclassicalState { x, p, u: -sign, v: 0.0, z: 0.0 }
        })
        .collect();
    Ok(TwaEnsemble { states, rng_seed: seed, t: 0.0 })
}

impl TwaEnsemble {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Evolve every member to `t1` in parallel.
    pub fn evolve_to(&mut self, params: &ModelParams, t1: f64, tol: f64) -> Result<()> {
        if t1 <= self.t {
            return Ok(());
        }
        let t0 = self.t;
        let template = SemiclassicalSolver::new(*params, tol)?;
        self.states
            .par_iter_mut()
            .try_for_each_init(
                || template.clone(),
                |solver, s| {
                    solver.solver.reset();
                    solver.advance(s, t0, t1)
                },
            )?;
        self.t = t1;
        Ok(())
    }

    /// Visit the ensemble at each of `times` (increasing).
    pub fn evolve_through<F>(&mut self, params: &ModelParams, times: &[f64], tol: f64, mut visit: F) -> Result<()>
    where
        F: FnMut(f64, &[SemiclassicalState]) -> Result<()>,
    {
        for &t in times {
            self.evolve_to(params, t, tol)?;
            visit(t, &self.states)?;
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.states.iter().map(|s| [s.x, s.p]).collect()
    }

    /// CSV rows `t,traj,x,p,u,v,Z` (no header).
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, s) in self.states.iter().enumerate() {
            writeln!(w, "{},{},{},{},{},{},{}", self.t, i, s.x, s.p, s.u, s.v, s.z)?;
        }
        Ok(())
    }
}

pub const SNAPSHOT_CSV_HEADER: &str = "t,traj,x,p,u,v,Z";

/// Field points of every trajectory after `k` drive periods.
#[derive(Debug, Clone)]
pub struct StroboscopicSnapshot {
    pub k: usize,
    pub t: f64,
    pub ensemble: TwaEnsemble,
}

/// Stroboscopic map at `t = k T`, `k = 1..=k_periods`. `T` is the drive
/// period unless `period` overrides it.
pub fn stroboscopic_map(
    params: &ModelParams,
    initial: &TwaEnsemble,
    k_periods: usize,
    period: Option<f64>,
    tol: f64,
) -> Result<Vec<StroboscopicSnapshot>> {
    let period = match period {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::param("period", format!("must be positive, got {t}"))),
        None => params.drive_period().ok_or(Error::Incommensurate)?,
    };
    let mut ens = initial.clone();
    let mut out = Vec::with_capacity(k_periods);
    for k in 1..=k_periods {
        let t = initial.t + k as f64 * period;
        ens.evolve_to(params, t, tol)?;
        out.push(StroboscopicSnapshot { k, t, ensemble: ens.clone() });
    }
    Ok(out)
}

/// √(Var x · Var p) over the ensemble (population variances).
pub fn classical_width(states: &[SemiclassicalState]) -> Result<f64> {
    if states.len() < 2 {
        return Err(Error::Empty("classical width needs at least two trajectories"));
    }
    let n = states.len() as f64;
    let (mx, mp) = states.iter().fold((0.0, 0.0), |(a, b), s| (a + s.x, b + s.p));
    let (mx, mp) = (mx / n, mp / n);
    let (vx, vp) = states
        .iter()
        .fold((0.0, 0.0), |(a, b), s| (a + (s.x - mx).powi(2), b + (s.p - mp).powi(2)));
    Ok((vx / n * vp / n).sqrt())
}

/// Largest Lyapunov exponent by the two-trajectory (Benettin) method: the
/// companion starts 1e-8 away in `x` and is pulled back to that distance after
/// every `renorm_interval`.
pub fn lyapunov_exponent(
    params: &ModelParams,
    s0: SemiclassicalState,
    t_total: f64,
    renorm_interval: f64,
    tol: f64,
) -> Result<f64> {
    if !(renorm_interval > 0.0 && t_total > renorm_interval) {
        return Err(Error::param("renorm_interval", "need 0 < renorm_interval < t_total"));
    }
    const D0: f64 = 1e-8;
    let mut base = SemiclassicalSolver::new(*params, tol)?;
    let mut companion = SemiclassicalSolver::new(*params, tol)?;
    let mut a = s0;
    let mut b = SemiclassicalState { x: s0.x + D0, ..s0 };
    let n_intervals = (t_total / renorm_interval).round() as usize;
    let mut log_sum = 0.0;
    let mut t = 0.0;
    for _ in 0..n_intervals {
        let t1 = t + renorm_interval;
        base.advance(&mut a, t, t1)?;
        companion.advance(&mut b, t, t1)?;
        let d = a.distance(&b);
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Numerical(format!("separation collapsed to {d} at t = {t1}")));
        }
        log_sum += (d / D0).ln();
        let scale = D0 / d;
        let pa = a.to_array();
        let pb = b.to_array();
        let mut rescaled = [0.0; 5];
        for i in 0..5 {
            rescaled[i] = pa[i] + (pb[i] - pa[i]) * scale;
        }
        b = SemiclassicalState::from_slice(&rescaled);
        t = t1;
    }
    Ok(log_sum / t)
}

/// Numerically locate fixed points of the undriven flow on the lower adiabatic
/// branch by Newton iteration from a spread of seeds.
///
/// Stability is read off the linearization: a point is stable when no
/// eigenvalue of the Jacobian has positive real part.
pub fn locate_fixed_points(params: &ModelParams) -> Vec<FixedPoint> {
    let p = params.with_eta0(0.0);
    let half = 0.5 * p.qubit_frequency;
    let sg = SQRT_2 * p.g;
    let residual = |y: &Vector5<f64>| {
        let s = SemiclassicalState::new(y[0], y[1], y[2], y[3], y[4]);
        let d = eom_derivative(&p, &s, 0.0);
        Vector5::new(d.x, d.p, d.u, d.v, s.bloch_norm_sqr() - 1.0)
    };
    let jacobian = |y: &Vector5<f64>| {
        let (x, u, v, z) = (y[0], y[2], y[3], y[4]);
        #[rustfmt::skip]
        let j = Matrix5::new(
            0.0, 1.0, 0.0, 0.0, 0.0,
            -1.0, 0.0, -sg, 0.0, 0.0,
            0.0, 0.0, 0.0, -half, 0.0,
            -sg * z, 0.0, half, 0.0, -sg * x,
            0.0, 0.0, 2.0 * u, 2.0 * v, 2.0 * z,
        );
        j
    };
    let flow_jacobian = |y: &Vector5<f64>| {
        let (x, v, z) = (y[0], y[3], y[4]);
        #[rustfmt::skip]
        let j = Matrix5::new(
            0.0, 1.0, 0.0, 0.0, 0.0,
            -1.0, 0.0, -sg, 0.0, 0.0,
            0.0, 0.0, 0.0, -half, 0.0,
            -sg * z, 0.0, half, 0.0, -sg * x,
            sg * v, 0.0, 0.0, sg * x, 0.0,
        );
        j
    };

    let mut found: Vec<FixedPoint> = Vec::new();
    for ix in -24..=24 {
        for &z0 in &[-0.999f64, -0.9, -0.6, -0.3, 0.0] {
            let x0 = 0.25 * ix as f64;
            let u0 = (-(x0 * sg) / (2.0 * p.g * p.g).max(1e-3)).clamp(-1.0, 1.0) * (1.0 - z0 * z0).sqrt();
            let mut y = Vector5::new(x0, 0.0, u0, 0.0, z0);
            let mut converged = false;
            for _ in 0..100 {
                let f = residual(&y);
                if f.norm() < 1e-15 {
                    converged = true;
                    break;
                }
                let Some(step) = jacobian(&y).lu().solve(&f) else { break };
                y -= step;
                if !y.iter().all(|c| c.is_finite()) || y[0].abs() > 1e3 {
                    break;
                }
                if step.norm() < 1e-15 {
                    converged = residual(&y).norm() < 1e-12;
                    break;
                }
            }
            if !converged {
                continue;
            }
            // keep the lower-branch solution: qubit energy equals −√(Ω²/4 + 2g²x²)
            let qubit_energy = half * y[4] + sg * y[0] * y[2];
            if (qubit_energy + p.adiabatic_half_gap(y[0])).abs() > 1e-8 {
                continue;
            }
            if found.iter().any(|f| (f.x - y[0]).abs() < 1e-8) {
                continue;
            }
            let eig = flow_jacobian(&y).complex_eigenvalues();
            let stable = eig.iter().all(|l| l.re < 1e-7);
            let x = if y[0].abs() < 1e-13 { 0.0 } else { y[0] };
            found.push(FixedPoint { x, stable });
        }
    }
    found.sort_by(|a, b| a.x.total_cmp(&b.x));
    found
}
