use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rabi_chaos::quantum::QuadratureGrid;
use rabi_chaos::{Minimum, ModelParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Twa,
    Trajectories,
    MasterOracle,
    Analyze,
}

/// `constant` pins the pump envelope at η(t) = η₀.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    #[default]
    Modulated,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_points: usize,
    pub x_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_points: 512, x_max: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: ModelParams,
    pub mode: Option<Mode>,
    pub n_trajectories: usize,
    pub t_final: f64,
    pub dt: f64,
    pub sample_interval: f64,
    pub grid: GridSpec,
    pub fock_cutoff: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub drive: DriveMode,
    pub minimum: Minimum,
    /// Relative/absolute tolerance of the adaptive integrators.
    pub tolerance: f64,
    /// Decoherence rates to run in turn; empty means `params.kappa` alone.
    pub kappa_sweep: Vec<f64>,
    /// Times at which ensemble Wigner and Husimi functions are written.
    pub distribution_times: Vec<f64>,
    /// Accumulate the qubit–field density matrix at every sample time
    /// (negativity, purity, Wigner negativity columns).
    pub density: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::reference(),
            mode: None,
            n_trajectories: 100,
            t_final: 50.0,
            dt: 0.005,
            sample_interval: 1.0,
            grid: GridSpec::default(),
            fock_cutoff: 300,
            seed: 0,
            output_dir: None,
            drive: DriveMode::Modulated,
            minimum: Minimum::Right,
            tolerance: 1e-9,
            kappa_sweep: Vec::new(),
            distribution_times: Vec::new(),
            density: true,
        }
    }
}

pub const PROFILES: &[&str] = &["paper-fig3"];

impl RunConfig {
    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "paper-fig3" => Ok(RunConfig {
                params: ModelParams::reference(),
                mode: Some(Mode::Trajectories),
                t_final: 200.0,
                sample_interval: 5.0,
                kappa_sweep: vec![0.0, 0.005, 0.01, 0.05],
                distribution_times: vec![200.0],
                ..RunConfig::default()
            }),
            other => bail!("unknown profile `{other}` (available: {})", PROFILES.join(", ")),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Parse and validate; serde diagnostics carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let positive = [
            ("t_final", self.t_final),
            ("dt", self.dt),
            ("sample_interval", self.sample_interval),
            ("grid.x_max", self.grid.x_max),
            ("tolerance", self.tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("`{name}` must be positive and finite, got {v}");
            }
        }
        if self.n_trajectories == 0 {
            bail!("`n_trajectories` must be at least 1");
        }
        if self.fock_cutoff == 0 {
            bail!("`fock_cutoff` must be at least 1");
        }
        QuadratureGrid::new(self.grid.n_points, self.grid.x_max).context("`grid`")?;
        if self.sample_interval > self.t_final {
            bail!("`sample_interval` ({}) exceeds `t_final` ({})", self.sample_interval, self.t_final);
        }
        for &k in &self.kappa_sweep {
            if !(k >= 0.0 && k.is_finite()) {
                bail!("`kappa_sweep` entries must be non-negative, got {k}");
            }
        }
        for &t in &self.distribution_times {
            if !(0.0..=self.t_final).contains(&t) {
                bail!("`distribution_times` entry {t} outside [0, t_final]");
            }
        }
        Ok(())
    }

    /// Parameters actually simulated, with the drive mode and a κ applied.
    pub fn effective_params(&self, kappa: f64) -> ModelParams {
        let mut p = self.params.with_kappa(kappa);
        if self.drive == DriveMode::Constant {
            p.omega_c = 0.0;
        }
        p
    }

    pub fn kappas(&self) -> Vec<f64> {
        if self.kappa_sweep.is_empty() {
            vec![self.params.kappa]
        } else {
            self.kappa_sweep.clone()
        }
    }

    pub fn grid(&self) -> QuadratureGrid {
        QuadratureGrid::new(self.grid.n_points, self.grid.x_max).expect("validated grid")
    }

    /// `0, Δ, 2Δ, …` up to `t_final`, each rounded to a multiple of `dt`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.t_final / self.sample_interval + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|k| self.snap(k as f64 * self.sample_interval)).collect();
        for &t in &self.distribution_times {
            times.push(self.snap(t));
        }
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() < 0.5 * self.dt);
        times
    }

    pub fn snap(&self, t: f64) -> f64 {
        (t / self.dt).round() * self.dt
    }
}
