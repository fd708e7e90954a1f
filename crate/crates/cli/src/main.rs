//! `rabi-chaos`: run truncated-Wigner ensembles, quantum-trajectory ensembles
//! and the master-equation oracle, analyze stored wavefunctions and render
//! phase-space heatmaps.

mod config;
mod manifest;
mod render;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Mode, RunConfig};
use manifest::Outputs;

#[derive(Parser)]
#[command(name = "rabi-chaos", version, about = "Open-system chaos in the driven Rabi model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset (`paper-fig3`); a --config file takes precedence.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config `output_dir`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single decoherence rate, replacing any sweep.
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    trajectories: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Truncated-Wigner ensemble of the mean-field equations.
    Twa(Common),
    /// Quantum-jump trajectory ensemble.
    Trajectories(Common),
    /// Direct master-equation integration in the Fock basis.
    Oracle(Common),
    /// Wigner/Husimi analysis of wavefunction snapshots or TWA histograms.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Snapshot `.json` files (averaged if several) and/or TWA `.csv` tables.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
    },
    /// SVG heatmap of a stored distribution.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 151)]
        resolution: usize,
        /// Half-width of the plotted square.
        #[arg(long, default_value_t = 15.0)]
        extent: f64,
    },
}

fn resolve(common: &Common, mode: Mode) -> Result<RunConfig> {
    let mut cfg = match (&common.config, &common.profile) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::profile(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(m) = cfg.mode {
        if m != mode {
            bail!("configuration mode {m:?} does not match the {mode:?} subcommand");
        }
    }
    cfg.mode = Some(mode);
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(k) = common.kappa {
        cfg.params.kappa = k;
        cfg.kappa_sweep.clear();
    }
    if let Some(n) = common.trajectories {
        cfg.n_trajectories = n;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn execute(name: &str, common: &Common, mode: Mode, body: impl FnOnce(&RunConfig, &mut Outputs) -> Result<()>) -> Result<()> {
    let cfg = resolve(common, mode)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Outputs::create(&dir)?;
    // resolved configuration, loadable with --config to re-run
    let written = out.file("config.json").and_then(|mut f| {
        use std::io::Write;
        f.write_all(cfg.to_json().as_bytes())?;
        f.flush()?;
        Ok(())
    });
    match written.and_then(|()| body(&cfg, &mut out)) {
        Ok(()) => out.finish(name, &cfg, None),
        Err(e) => {
            out.finish(name, &cfg, Some(&e)).ok();
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Twa(c) => execute("twa", c, Mode::Twa, run::twa),
        Command::Trajectories(c) => execute("trajectories", c, Mode::Trajectories, run::trajectories),
        Command::Oracle(c) => execute("oracle", c, Mode::MasterOracle, run::oracle),
        Command::Analyze { common, inputs } => execute("analyze", common, Mode::Analyze, |_, out| run::analyze(inputs, out)),
        Command::Render { input, output, resolution, extent } => (|| {
            let d = run::load_distribution(input)?;
            let style = render::HeatmapStyle { resolution: *resolution, extent: *extent };
            std::fs::write(output, render::render_heatmap(&d, &style)).with_context(|| format!("writing {}", output.display()))
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
