use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::QuadratureGrid;
use super::spectral::Spectral;
use super::spinor::{build_initial_state, SpinorState};
use super::split::SplitOperator;
use crate::error::{Error, Result};
use crate::model::{Minimum, ModelParams};
use crate::rng::substream;

/// Detection times of one stochastic trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub trajectory_id: u64,
    pub seed: u64,
    pub times: Vec<f64>,
}

/// Numerics shared by every trajectory of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub grid: QuadratureGrid,
    pub dt: f64,
    pub minimum: Minimum,
    /// Increasing sample times, each an integer multiple of `dt`.
    pub sample_times: Vec<f64>,
    /// Maximum edge/peak amplitude ratio tolerated at sample times.
    pub boundary_tolerance: f64,
}

impl TrajectoryConfig {
    pub fn new(grid: QuadratureGrid, dt: f64, sample_times: Vec<f64>) -> Self {
        TrajectoryConfig { grid, dt, minimum: Minimum::Right, sample_times, boundary_tolerance: 1e-6 }
    }

    /// Step indices of the sample times.
    pub fn sample_steps(&self) -> Result<Vec<usize>> {
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {}", self.dt)));
        }
        let mut last: Option<usize> = None;
        self.sample_times
            .iter()
            .map(|&t| {
                let k = t / self.dt;
                let r = k.round();
                if t < 0.0 || (k - r).abs() > 1e-6 * r.max(1.0) {
                    return Err(Error::param("sample_times", format!("t = {t} is not a multiple of dt = {}", self.dt)));
                }
                let k = r as usize;
                if last.is_some_and(|l| k <= l) {
                    return Err(Error::param("sample_times", "must be strictly increasing"));
                }
                last = Some(k);
                Ok(k)
            })
            .collect()
    }
}

/// Propagate `initial` with quantum jumps, calling `visit(i, state, spectral)`
/// at the `i`-th sample step. Deterministic in `(seed, trajectory_id)`.
pub fn run_trajectory_with<F>(
    op: &mut SplitOperator,
    initial: &SpinorState,
    sample_steps: &[usize],
    boundary_tolerance: f64,
    seed: u64,
    trajectory_id: u64,
    mut visit: F,
) -> Result<JumpRecord>
where
    F: FnMut(usize, &SpinorState, &mut Spectral) -> Result<()>,
{
    let mut rng = substream(seed, trajectory_id);
    let mut state = initial.clone();
    let t0 = state.t;
    let mut record = JumpRecord { trajectory_id, seed, times: Vec::new() };
    let mut step = 0usize;
    for (i, &target) in sample_steps.iter().enumerate() {
        while step < target {
            if op.step(&mut state, &mut rng)? {
                record.times.push(state.t);
            }
            step += 1;
            // keep time on the lattice instead of accumulating rounding
            state.t = t0 + step as f64 * op.dt();
        }
        state.check_boundary(boundary_tolerance)?;
        visit(i, &state, op.spectral())?;
    }
    Ok(record)
}

/// Single trajectory from the configured initial state; returns the states
/// at the sample times and the jump record.
pub fn run_trajectory(
    params: &ModelParams,
    config: &TrajectoryConfig,
    seed: u64,
    trajectory_id: u64,
) -> Result<(Vec<SpinorState>, JumpRecord)> {
    let steps = config.sample_steps()?;
    let initial = build_initial_state(params, config.grid, config.minimum)?;
    let mut op = SplitOperator::new(params, config.grid, config.dt)?;
    let mut states = Vec::with_capacity(steps.len());
    let record = run_trajectory_with(&mut op, &initial, &steps, config.boundary_tolerance, seed, trajectory_id, |_, s, _| {
        states.push(s.clone());
        Ok(())
    })?;
    Ok((states, record))
}

/// Run `n` trajectories in parallel, folding each sample into per-worker
/// accumulators of type `A` that are merged at the end. Jump records are
/// returned in trajectory order.
pub fn run_ensemble<A, I, V, M>(
    params: &ModelParams,
    config: &TrajectoryConfig,
    n: usize,
    seed: u64,
    init: I,
    visit: V,
    merge: M,
) -> Result<(A, Vec<JumpRecord>)>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    V: Fn(&mut A, usize, &SpinorState, &mut Spectral) -> Result<()> + Sync + Send,
    M: Fn(A, A) -> Result<A> + Sync + Send,
{
    if n == 0 {
        return Err(Error::param("n", "ensemble needs at least one trajectory"));
    }
    let steps = config.sample_steps()?;
    let initial = build_initial_state(params, config.grid, config.minimum)?;
    let template = SplitOperator::new(params, config.grid, config.dt)?;
    let (acc, mut records) = (0..n as u64)
        .into_par_iter()
        .try_fold(
            || (template.clone(), init(), Vec::new()),
            |(mut op, mut acc, mut records), id| {
                let rec = run_trajectory_with(
                    &mut op,
                    &initial,
                    &steps,
                    config.boundary_tolerance,
                    seed,
                    id,
                    |i, s, sp| visit(&mut acc, i, s, sp),
                )?;
                records.push(rec);
                Ok::<_, Error>((op, acc, records))
            },
        )
        .map(|r| r.map(|(_, acc, records)| (acc, records)))
        .try_reduce_with(|(a, mut ra), (b, rb)| {
            ra.extend(rb);
            Ok((merge(a, b)?, ra))
        })
        .expect("at least one trajectory")?;
    records.sort_by_key(|r| r.trajectory_id);
    Ok((acc, records))
}
