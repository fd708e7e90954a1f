//! Persistence of trajectory snapshots (JSON) and jump records (CSV).

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::grid::QuadratureGrid;
use super::spinor::SpinorState;
use super::trajectory::JumpRecord;
use crate::error::{Error, Result};
use crate::C64;

const FORMAT: &str = "rabi-chaos-spinor";

#[derive(Serialize, Deserialize)]
struct GridMeta {
    n_points: usize,
    x_min: f64,
    x_max: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    format: String,
    version: u32,
    grid: GridMeta,
    t: f64,
    /// Two arrays of interleaved `re, im` pairs.
    components: [Vec<f64>; 2],
}

pub fn write_snapshot<W: Write>(w: W, state: &SpinorState) -> Result<()> {
    let interleave = |c: &[C64]| c.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>();
    let snap = Snapshot {
        format: FORMAT.into(),
        version: 1,
        grid: GridMeta { n_points: state.grid.n_points(), x_min: state.grid.x_min(), x_max: state.grid.x_max() },
        t: state.t,
        components: [interleave(state.component(0)), interleave(state.component(1))],
    };
    serde_json::to_writer(w, &snap)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(r: R) -> Result<SpinorState> {
    let snap: Snapshot = serde_json::from_reader(r)?;
    if snap.format != FORMAT || snap.version != 1 {
        return Err(Error::Mismatch(format!("unsupported snapshot format {} v{}", snap.format, snap.version)));
    }
    if (snap.grid.x_min + snap.grid.x_max).abs() > 1e-12 * snap.grid.x_max.abs() {
        return Err(Error::Mismatch("snapshot grid is not symmetric".into()));
    }
    let grid = QuadratureGrid::new(snap.grid.n_points, snap.grid.x_max)?;
    let mut amplitudes = Vec::with_capacity(2 * grid.n_points());
    for c in &snap.components {
        if c.len() != 2 * grid.n_points() {
            return Err(Error::Mismatch("snapshot component length does not match grid".into()));
        }
        amplitudes.extend(c.chunks_exact(2).map(|p| C64::new(p[0], p[1])));
    }
    Ok(SpinorState { grid, amplitudes, t: snap.t })
}

pub const JUMP_CSV_HEADER: &str = "traj,jump_time";

pub fn write_jumps<W: Write>(mut w: W, records: &[JumpRecord]) -> std::io::Result<()> {
    writeln!(w, "{JUMP_CSV_HEADER}")?;
    for r in records {
        for t in &r.times {
            writeln!(w, "{},{}", r.trajectory_id, t)?;
        }
    }
    Ok(())
}

/// `(trajectory, time)` pairs from a jump CSV.
pub fn read_jumps<R: BufRead>(r: R) -> Result<Vec<(u64, f64)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != JUMP_CSV_HEADER {
                return Err(Error::Mismatch(format!("unexpected jump CSV header `{line}`")));
            }
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| Error::Mismatch(format!("malformed line `{line}`")))?;
        let id = a.trim().parse().map_err(|_| Error::Mismatch(format!("bad trajectory id `{a}`")))?;
        let t = b.trim().parse().map_err(|_| Error::Mismatch(format!("bad jump time `{b}`")))?;
        out.push((id, t));
    }
    Ok(out)
}
