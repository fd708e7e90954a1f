use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rabi_chaos::observables::{
    nonselective_width, write_time_series, BipartiteDensityMatrix, EnsembleAccumulator, FockProjector, TimeSeriesRow,
};
use rabi_chaos::phasespace::{
    histogram, histogram_entropy, husimi_from_wigner, linspace, negative_fraction, wigner, DistributionSource,
    FieldKernel, PhaseSpaceDistribution,
};
use rabi_chaos::quantum::io::{read_snapshot, write_jumps, write_snapshot};
use rabi_chaos::quantum::{
    build_initial_state, direct_lindblad_oracle, run_ensemble, run_trajectory, OracleOptions, TrajectoryConfig,
};
use rabi_chaos::semiclassical::{classical_width, sample_initial_ensemble, SemiclassicalState, SNAPSHOT_CSV_HEADER};
use rabi_chaos::ModelParams;
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::Outputs;

/// Bytes allowed for per-sample density accumulators of one worker.
const DENSITY_BUDGET: f64 = 1.5e9;

fn time_tag(t: f64) -> String {
    format!("{t:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
}

fn kappa_dir(cfg: &RunConfig, kappa: f64) -> String {
    if cfg.kappas().len() > 1 {
        format!("kappa_{}/", time_tag(kappa))
    } else {
        String::new()
    }
}

fn write_distribution(out: &mut Outputs, name: &str, d: &PhaseSpaceDistribution) -> Result<()> {
    let mut f = out.file(name)?;
    serde_json::to_writer(&mut f, &d.to_json())?;
    f.flush()?;
    Ok(())
}

/// Wigner and Husimi files for a field kernel; returns `N_−`.
fn write_phase_space(out: &mut Outputs, prefix: &str, kernel: &FieldKernel, t: f64, source: DistributionSource) -> Result<f64> {
    let w = wigner(kernel, t, source)?;
    let q = husimi_from_wigner(&w)?;
    let tag = time_tag(t);
    write_distribution(out, &format!("{prefix}wigner_t{tag}.json"), &w)?;
    write_distribution(out, &format!("{prefix}husimi_t{tag}.json"), &q)?;
    Ok(negative_fraction(&w)?.0)
}

fn wigner_negativity(rho: &BipartiteDensityMatrix, cfg: &RunConfig) -> Result<f64> {
    let kernel = FieldKernel::from_density(rho, cfg.grid().refined(2)?)?;
    Ok(negative_fraction(&wigner(&kernel, rho.t, DistributionSource::EnsembleAverage)?)?.0)
}

fn is_listed(times: &[f64], t: f64, dt: f64) -> bool {
    times.iter().any(|&s| (s - t).abs() < 0.5 * dt)
}

pub fn twa(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let params = cfg.effective_params(cfg.params.kappa);
    let mut ens = sample_initial_ensemble(&params, cfg.n_trajectories, cfg.seed, cfg.minimum)?;
    let samples = cfg.sample_times();
    let period = params.drive_period();
    let mut strobe: Vec<(usize, f64)> = Vec::new();
    if let Some(p) = period {
        let mut k = 1;
        while k as f64 * p <= cfg.t_final * (1.0 + 1e-12) {
            strobe.push((k, k as f64 * p));
            k += 1;
        }
    }
    let mut all: Vec<f64> = samples.iter().copied().chain(strobe.iter().map(|s| s.1)).collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut snaps = out.file("twa_snapshots.csv")?;
    writeln!(snaps, "{SNAPSHOT_CSV_HEADER}")?;
    let mut strobo = out.file("stroboscopic.csv")?;
    writeln!(strobo, "k,{SNAPSHOT_CSV_HEADER}")?;
    let mut series = out.file("twa_series.csv")?;
    writeln!(series, "t,mean_x,mean_p,var_x,var_p,Delta_xp,mean_Z")?;
    let mut entropies = Vec::new();
    for &t in &all {
        if t > ens.t {
            ens.evolve_to(&params, t, cfg.tolerance)?;
        }
        if samples.iter().any(|&s| (s - t).abs() < 1e-12) {
            ens.write_csv_rows(&mut snaps)?;
            let n = ens.len() as f64;
            let mean = |f: &dyn Fn(&SemiclassicalState) -> f64| ens.states.iter().map(f).sum::<f64>() / n;
            let (mx, mp, mz) = (mean(&|s| s.x), mean(&|s| s.p), mean(&|s| s.z));
            let (vx, vp) = (mean(&|s| (s.x - mx).powi(2)), mean(&|s| (s.p - mp).powi(2)));
            writeln!(series, "{t},{mx},{mp},{vx},{vp},{},{mz}", classical_width(&ens.states)?)?;
        }
        if let Some(&(k, _)) = strobe.iter().find(|s| (s.1 - t).abs() < 1e-12) {
            for (i, s) in ens.states.iter().enumerate() {
                writeln!(strobo, "{k},{t},{i},{},{},{},{},{}", s.x, s.p, s.u, s.v, s.z)?;
            }
            let axis = || linspace(-15.0, 15.0, 121);
            let h = histogram(&ens.positions(), axis(), axis(), t)?;
            entropies.push(json!({ "k": k, "t": t, "entropy": histogram_entropy(&h) }));
            write_distribution(out, &format!("twa_histogram_T{k}.json"), &h)?;
        }
    }
    snaps.flush()?;
    strobo.flush()?;
    series.flush()?;
    let mut f = out.file("twa_summary.json")?;
    serde_json::to_writer_pretty(
        &mut f,
        &json!({ "period": period, "n_trajectories": cfg.n_trajectories, "histogram_entropy": entropies }),
    )?;
    f.flush()?;
    Ok(())
}

pub fn trajectories(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    for kappa in cfg.kappas() {
        trajectories_at(cfg, out, kappa).with_context(|| format!("κ = {kappa}"))?;
    }
    Ok(())
}

fn trajectories_at(cfg: &RunConfig, out: &mut Outputs, kappa: f64) -> Result<()> {
    let params = cfg.effective_params(kappa);
    let grid = cfg.grid();
    let prefix = kappa_dir(cfg, kappa);
    let times = cfg.sample_times();
    let config = TrajectoryConfig::new(grid, cfg.dt, times.clone());
    let (projector, density_at) = if cfg.density {
        let at: Vec<usize> = (0..times.len()).collect();
        let dim = 2.0 * (cfg.fock_cutoff as f64 + 1.0);
        let bytes = at.len() as f64 * dim * dim * 16.0;
        if bytes > DENSITY_BUDGET {
            bail!(
                "density accumulation at {} sample times with cutoff {} needs {:.1} GB; raise `sample_interval`, lower `fock_cutoff`, or set `density` to false",
                at.len(),
                cfg.fock_cutoff,
                bytes / 1e9
            );
        }
        (Some(Arc::new(FockProjector::new(grid, cfg.fock_cutoff)?)), at)
    } else {
        (None, Vec::new())
    };
    let (acc, jumps) = run_ensemble(
        &params,
        &config,
        cfg.n_trajectories,
        cfg.seed,
        || EnsembleAccumulator::new(times.clone(), projector.clone(), &density_at),
        |a, i, s, sp| a.add(i, s, sp),
        |a, b| a.merge(b),
    )?;
    let snaps = acc.finish()?;
    let mut rows = Vec::with_capacity(snaps.len());
    for s in &snaps {
        let n_minus = match &s.density {
            Some(rho) if is_listed(&cfg.distribution_times, s.t, cfg.dt) => {
                let kernel = FieldKernel::from_density(rho, grid.refined(2)?)?;
                Some(write_phase_space(out, &prefix, &kernel, s.t, DistributionSource::EnsembleAverage)?)
            }
            Some(rho) => Some(wigner_negativity(rho, cfg)?),
            None => None,
        };
        rows.push(TimeSeriesRow::from_snapshot(s, n_minus));
    }
    let mut f = out.file(&format!("{prefix}time_series.csv"))?;
    write_time_series(&mut f, &rows)?;
    f.flush()?;
    let mut f = out.file(&format!("{prefix}jumps.csv"))?;
    write_jumps(&mut f, &jumps)?;
    f.flush()?;

    // trajectory 0 again, for its final wavefunction
    let last = *times.last().expect("non-empty sample times");
    let (states, _) = run_trajectory(&params, &TrajectoryConfig::new(grid, cfg.dt, vec![last]), cfg.seed, 0)?;
    let mut f = out.file(&format!("{prefix}trajectory0_final.json"))?;
    write_snapshot(&mut f, states.last().expect("one sample"))?;
    f.flush()?;
    Ok(())
}

pub fn oracle(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    for kappa in cfg.kappas() {
        oracle_at(cfg, out, kappa).with_context(|| format!("κ = {kappa}"))?;
    }
    Ok(())
}

fn oracle_at(cfg: &RunConfig, out: &mut Outputs, kappa: f64) -> Result<()> {
    let params: ModelParams = cfg.effective_params(kappa);
    let grid = cfg.grid();
    let prefix = kappa_dir(cfg, kappa);
    let psi0 = build_initial_state(&params, grid, cfg.minimum)?;
    let rho0 = BipartiteDensityMatrix::pure(&FockProjector::new(grid, cfg.fock_cutoff)?.project(&psi0)?);
    let times = cfg.sample_times();
    let states = direct_lindblad_oracle(&params, cfg.fock_cutoff, &rho0, &times, OracleOptions::default())?;
    let mut rows = Vec::with_capacity(states.len());
    for rho in &states {
        let m = rho.moments();
        let ps = rho.photon_statistics();
        let n_minus = if is_listed(&cfg.distribution_times, rho.t, cfg.dt) {
            let kernel = FieldKernel::from_density(rho, grid.refined(2)?)?;
            write_phase_space(out, &prefix, &kernel, rho.t, DistributionSource::EnsembleAverage)?
        } else {
            f64::NAN
        };
        rows.push(TimeSeriesRow {
            t: rho.t,
            mean_x: m.mean_x,
            mean_p: m.mean_p,
            var_x: m.var_x(),
            var_p: m.var_p(),
            delta_xp: nonselective_width(&m)?,
            selective_delta_xp: f64::NAN,
            mean_n: ps.mean_n,
            delta_n: ps.delta_n,
            sigma_z: m.sigma_z,
            negativity: rho.negativity(),
            purity: rho.purity(),
            n_minus,
        });
    }
    let mut f = out.file(&format!("{prefix}oracle_series.csv"))?;
    write_time_series(&mut f, &rows)?;
    f.flush()?;
    Ok(())
}

/// Phase-space analysis of stored wavefunctions (`.json` snapshots, averaged
/// when several are given) or of TWA snapshot tables (`.csv`).
pub fn analyze(inputs: &[PathBuf], out: &mut Outputs) -> Result<()> {
    if inputs.is_empty() {
        bail!("`analyze` needs at least one --input file");
    }
    let (csv, json_inputs): (Vec<&PathBuf>, Vec<&PathBuf>) =
        inputs.iter().partition(|p| p.extension().is_some_and(|e| e == "csv"));
    let mut summary = serde_json::Map::new();
    if !json_inputs.is_empty() {
        let states = json_inputs
            .iter()
            .map(|p| {
                let f = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
                read_snapshot(std::io::BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
            })
            .collect::<Result<Vec<_>>>()?;
        let t = states[0].t;
        let (kernel, source) = if states.len() == 1 {
            (FieldKernel::from_spinor(&states[0])?, DistributionSource::SingleTrajectory)
        } else {
            (FieldKernel::from_spinors(&states)?, DistributionSource::EnsembleAverage)
        };
        let w = wigner(&kernel, t, source)?;
        let q = husimi_from_wigner(&w)?;
        let (n_minus, n_plus) = negative_fraction(&w)?;
        write_distribution(out, "wigner.json", &w)?;
        write_distribution(out, "husimi.json", &q)?;
        let mut f = out.file("wigner.csv")?;
        w.resample_default().write_csv(&mut f)?;
        f.flush()?;
        let mut f = out.file("husimi.csv")?;
        q.resample_default().write_csv(&mut f)?;
        f.flush()?;
        summary.insert(
            "wavefunctions".into(),
            json!({
                "n_states": states.len(),
                "t": t,
                "wigner_integral": w.integral(),
                "N_minus": n_minus,
                "N_plus": n_plus,
                "husimi_integral": q.integral(),
            }),
        );
    }
    let mut tables = Vec::new();
    for path in csv {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != SNAPSHOT_CSV_HEADER {
            bail!("{}: expected header `{SNAPSHOT_CSV_HEADER}`, found `{header}`", path.display());
        }
        let mut by_time: Vec<(f64, Vec<[f64; 2]>)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            let parse = |k: usize| -> Result<f64> {
                cols.get(k)
                    .and_then(|v| v.parse().ok())
                    .with_context(|| format!("{}: line {}: bad column {k}", path.display(), i + 2))
            };
            let (t, x, p) = (parse(0)?, parse(2)?, parse(3)?);
            match by_time.last_mut() {
                Some((tt, pts)) if *tt == t => pts.push([x, p]),
                _ => by_time.push((t, vec![[x, p]])),
            }
        }
        for (t, pts) in by_time {
            let axis = || linspace(-15.0, 15.0, 121);
            let h = histogram(&pts, axis(), axis(), t)?;
            let name = format!("histogram_t{}.json", time_tag(t));
            write_distribution(out, &name, &h)?;
            tables.push(json!({ "source": path.display().to_string(), "t": t, "n": pts.len(), "entropy": histogram_entropy(&h), "file": name }));
        }
    }
    if !tables.is_empty() {
        summary.insert("histograms".into(), serde_json::Value::Array(tables));
    }
    let mut f = out.file("analysis.json")?;
    serde_json::to_writer_pretty(&mut f, &serde_json::Value::Object(summary))?;
    f.flush()?;
    Ok(())
}

pub fn load_distribution(path: &Path) -> Result<PhaseSpaceDistribution> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    PhaseSpaceDistribution::from_json(&v).with_context(|| format!("decoding {}", path.display()))
}
