//! Fock-basis representation of trajectory states and the ensemble density
//! matrix, with entanglement, purity and photon-number diagnostics.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quantum::{Moments, QuadratureGrid, Spectral, SpinorState};
use crate::C64;

/// Orthonormal Hermite functions `φ_0..φ_{n_max}` sampled at `xs`, row `n`
/// holding `φ_n`.
pub fn hermite_functions(n_max: usize, xs: &[f64]) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; xs.len()]; n_max + 1];
    let c0 = std::f64::consts::PI.powf(-0.25);
    for (j, &x) in xs.iter().enumerate() {
        let mut prev = c0 * (-0.5 * x * x).exp();
        rows[0][j] = prev;
        if n_max == 0 {
            continue;
        }
        let mut cur = std::f64::consts::SQRT_2 * x * prev;
        rows[1][j] = cur;
        for n in 1..n_max {
            let nf = n as f64;
            let next = (2.0 / (nf + 1.0)).sqrt() * x * cur - (nf / (nf + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
            rows[n + 1][j] = cur;
        }
    }
    rows
}

/// Fock amplitudes `c_{s,n}` of one trajectory state, stored at index
/// `s·(n_max+1) + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockProjection {
    pub n_max: usize,
    pub coefficients: Vec<C64>,
    /// Weight outside the retained basis before renormalization.
    pub leakage: f64,
    pub t: f64,
}

impl FockProjection {
    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    pub fn amplitude(&self, s: usize, n: usize) -> C64 {
        self.coefficients[s * (self.n_max + 1) + n]
    }
}

/// Precomputed Hermite basis for projecting states of one grid.
#[derive(Debug, Clone)]
pub struct FockProjector {
    n_max: usize,
    grid: QuadratureGrid,
    refine: usize,
    basis: Vec<Vec<f64>>,
    pub leakage_tolerance: f64,
}

impl FockProjector {
    /// The basis is sampled on the state grid refined by the smallest power
    /// of two for which `dx·√(2 n_max + 1) < 1`.
    pub fn new(grid: QuadratureGrid, n_max: usize) -> Result<Self> {
        let mut refine = 1;
        while grid.dx() / refine as f64 * ((2 * n_max + 1) as f64).sqrt() >= 1.0 {
            refine *= 2;
        }
        let fine = grid.refined(refine)?;
        let basis = hermite_functions(n_max, &fine.positions());
        Ok(FockProjector { n_max, grid, refine, basis, leakage_tolerance: 1e-6 })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn project(&self, state: &SpinorState) -> Result<FockProjection> {
        if state.grid != self.grid {
            return Err(Error::Mismatch("state grid differs from projector grid".into()));
        }
        let fine = state.refined(self.refine)?;
        let dx = fine.grid.dx();
        let norm = fine.norm_sqr();
        let m = self.n_max + 1;
        let mut coefficients = vec![C64::default(); 2 * m];
        for s in 0..2 {
            let psi = fine.component(s);
            for (n, phi) in self.basis.iter().enumerate() {
                let c: C64 = phi.iter().zip(psi).map(|(f, a)| a * *f).sum();
                coefficients[s * m + n] = c * dx;
            }
        }
        let kept: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        let leakage = (1.0 - kept / norm).max(0.0);
        if leakage > self.leakage_tolerance {
            return Err(Error::FockLeakage { n_max: self.n_max, leakage, tolerance: self.leakage_tolerance });
        }
        let scale = kept.sqrt().recip();
        coefficients.iter_mut().for_each(|c| *c *= scale);
        Ok(FockProjection { n_max: self.n_max, coefficients, leakage, t: state.t })
    }
}

/// Project one state with a freshly built basis.
pub fn project_to_fock(state: &SpinorState, n_max: usize) -> Result<FockProjection> {
    FockProjector::new(state.grid, n_max)?.project(state)
}

/// Photon-number moments of the field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonStatistics {
    pub mean_n: f64,
    pub delta_n: f64,
}

impl PhotonStatistics {
    /// `Δ_n / ⟨n⟩`; undefined when `⟨n⟩ < 1e-6`.
    pub fn scaled(&self) -> Result<f64> {
        if self.mean_n < 1e-6 {
            return Err(Error::Numerical(format!("scaled variance undefined for mean photon number {}", self.mean_n)));
        }
        Ok(self.delta_n / self.mean_n)
    }
}

/// Qubit ⊗ Fock density matrix, basis index `s·(n_max+1) + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteDensityMatrix {
    pub n_max: usize,
    pub entries: DMatrix<C64>,
    pub t: f64,
    pub n_trajectories: usize,
}

impl BipartiteDensityMatrix {
    pub fn from_entries(n_max: usize, entries: DMatrix<C64>, t: f64) -> Result<Self> {
        let d = 2 * (n_max + 1);
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::Mismatch(format!("expected {d}×{d} matrix, got {}×{}", entries.nrows(), entries.ncols())));
        }
        Ok(BipartiteDensityMatrix { n_max, entries, t, n_trajectories: 1 })
    }

    pub fn pure(p: &FockProjection) -> Self {
        let v = DVector::from_column_slice(&p.coefficients);
        BipartiteDensityMatrix { n_max: p.n_max, entries: &v * v.adjoint(), t: p.t, n_trajectories: 1 }
    }

    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    fn idx(&self, s: usize, n: usize) -> usize {
        s * (self.n_max + 1) + n
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Largest `|ρ − ρ†|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Hermitian to 1e-12, unit trace to 1e-9, eigenvalues ≥ −1e-8.
    pub fn check_invariants(&self) -> Result<()> {
        let h = self.hermiticity_error();
        if h > 1e-12 {
            return Err(Error::Numerical(format!("density matrix not Hermitian (deviation {h:e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > 1e-9 {
            return Err(Error::Numerical(format!("density matrix trace {tr}")));
        }
        let m = self.min_eigenvalue();
        if m < -1e-8 {
            return Err(Error::Numerical(format!("density matrix eigenvalue {m:e} below −1e-8")));
        }
        Ok(())
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Partial transpose over the qubit index.
    pub fn partial_transpose(&self) -> DMatrix<C64> {
        let m = self.n_max + 1;
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| {
            let (s, n) = (i / m, i % m);
            let (sp, np) = (j / m, j % m);
            self.entries[(sp * m + n, s * m + np)]
        })
    }

    /// Sum of the negative eigenvalues of the partial transpose (≤ 0).
    pub fn negativity(&self) -> f64 {
        hermitian_eigenvalues(&self.partial_transpose()).into_iter().filter(|l| *l < 0.0).sum()
    }

    pub fn sigma_z(&self) -> f64 {
        let m = self.n_max + 1;
        (0..m).map(|n| self.entries[(n, n)].re - self.entries[(m + n, m + n)].re).sum::<f64>() / self.trace().re
    }

    /// Field state with the qubit traced out.
    pub fn reduced_field(&self) -> DMatrix<C64> {
        let m = self.n_max + 1;
        DMatrix::from_fn(m, m, |n, k| self.entries[(n, k)] + self.entries[(m + n, m + k)])
    }

    pub fn photon_statistics(&self) -> PhotonStatistics {
        let rf = self.reduced_field();
        let (mut m1, mut m2) = (0.0, 0.0);
        for n in 0..=self.n_max {
            let w = rf[(n, n)].re;
            m1 += n as f64 * w;
            m2 += (n * n) as f64 * w;
        }
        PhotonStatistics { mean_n: m1, delta_n: (m2 - m1 * m1).max(0.0).sqrt() }
    }

    /// Quadrature moments from the ladder-operator expansion.
    pub fn moments(&self) -> Moments {
        let rf = self.reduced_field();
        let m = self.n_max + 1;
        let mut a = C64::default();
        let mut a2 = C64::default();
        let mut n_mean = 0.0;
        for n in 0..m {
            n_mean += n as f64 * rf[(n, n)].re;
            if n + 1 < m {
                a += rf[(n + 1, n)] * ((n + 1) as f64).sqrt();
            }
            if n + 2 < m {
                a2 += rf[(n + 2, n)] * (((n + 1) * (n + 2)) as f64).sqrt();
            }
        }
        let s2 = std::f64::consts::SQRT_2;
        Moments {
            mean_x: s2 * a.re,
            mean_x2: a2.re + n_mean + 0.5,
            mean_p: s2 * a.im,
            mean_p2: -a2.re + n_mean + 0.5,
            sigma_z: self.sigma_z(),
        }
    }

    /// Element `ρ[(s,n),(s',n')]`.
    pub fn element(&self, s: usize, n: usize, sp: usize, np: usize) -> C64 {
        self.entries[(self.idx(s, n), self.idx(sp, np))]
    }
}

fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    sym.symmetric_eigenvalues().iter().copied().collect()
}

/// Running sum of `|c⟩⟨c|` over trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityAccumulator {
    n_max: usize,
    sum: DMatrix<C64>,
    count: usize,
    t: Option<f64>,
}

impl DensityAccumulator {
    pub fn new(n_max: usize) -> Self {
        let d = 2 * (n_max + 1);
        DensityAccumulator { n_max, sum: DMatrix::zeros(d, d), count: 0, t: None }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add(&mut self, p: &FockProjection) -> Result<()> {
        if p.n_max != self.n_max {
            return Err(Error::Mismatch(format!("cutoff {} vs {}", p.n_max, self.n_max)));
        }
        self.check_time(p.t)?;
        let v = DVector::from_column_slice(&p.coefficients);
        self.sum.gerc(C64::new(1.0, 0.0), &v, &v, C64::new(1.0, 0.0));
        self.count += 1;
        Ok(())
    }

    fn check_time(&mut self, t: f64) -> Result<()> {
        match self.t {
            Some(t0) if (t0 - t).abs() > 1e-9 * t0.abs().max(1.0) => {
                Err(Error::Mismatch(format!("projection at t = {t} mixed with t = {t0}")))
            }
            Some(_) => Ok(()),
            None => {
                self.t = Some(t);
                Ok(())
            }
        }
    }

    pub fn merge(mut self, other: DensityAccumulator) -> Result<Self> {
        if other.n_max != self.n_max {
            return Err(Error::Mismatch(format!("cutoff {} vs {}", other.n_max, self.n_max)));
        }
        if let Some(t) = other.t {
            self.check_time(t)?;
        }
        self.sum += other.sum;
        self.count += other.count;
        Ok(self)
    }

    pub fn finish(&self) -> Result<BipartiteDensityMatrix> {
        if self.count == 0 {
            return Err(Error::Empty("no projections accumulated"));
        }
        let mut entries = &self.sum / C64::new(self.count as f64, 0.0);
        // restore exact Hermiticity lost to rounding
        entries = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        Ok(BipartiteDensityMatrix { n_max: self.n_max, entries, t: self.t.unwrap_or(0.0), n_trajectories: self.count })
    }
}

/// `ρ = (1/N) Σ_i |c_i⟩⟨c_i|`.
pub fn accumulate_density(projections: &[FockProjection]) -> Result<BipartiteDensityMatrix> {
    let first = projections.first().ok_or(Error::Empty("no projections"))?;
    let mut acc = DensityAccumulator::new(first.n_max);
    for p in projections {
        acc.add(p)?;
    }
    acc.finish()
}

pub fn negativity(rho: &BipartiteDensityMatrix) -> f64 {
    rho.negativity()
}

pub fn purity(rho: &BipartiteDensityMatrix) -> f64 {
    rho.purity()
}

pub fn photon_statistics(rho: &BipartiteDensityMatrix) -> PhotonStatistics {
    rho.photon_statistics()
}

/// Ensemble-averaged (non-selective) width from averaged moments.
pub fn nonselective_width(m: &Moments) -> Result<f64> {
    let (vx, vp) = (m.var_x(), m.var_p());
    if vx < -1e-10 || vp < -1e-10 {
        return Err(Error::Numerical(format!("negative variance (x: {vx:e}, p: {vp:e})")));
    }
    Ok((vx.max(0.0) * vp.max(0.0)).sqrt())
}

/// Mean of single-trajectory widths.
pub fn selective_width(widths: &[f64]) -> Result<f64> {
    if widths.is_empty() {
        return Err(Error::Empty("selective width needs at least one trajectory"));
    }
    Ok(widths.iter().sum::<f64>() / widths.len() as f64)
}

/// `Tr ρ²` of `ρ = (1/N) Σ |ψ_i⟩⟨ψ_i|` from grid overlaps. States are used
/// as given (not renormalized), so norm drift shows up in the result.
pub fn ensemble_purity(states: &[SpinorState]) -> Result<f64> {
    let n = states.len();
    if n == 0 {
        return Err(Error::Empty("purity of an empty ensemble"));
    }
    let mut sum = 0.0;
    for i in 0..n {
        if states[i].grid != states[0].grid {
            return Err(Error::Mismatch("ensemble members live on different grids".into()));
        }
        sum += states[i].norm_sqr().powi(2);
        for j in 0..i {
            sum += 2.0 * states[i].inner(&states[j]).norm_sqr();
        }
    }
    Ok(sum / (n * n) as f64)
}

/// Normalized Shannon entropy of the power spectrum of a uniformly sampled
/// signal (mean removed), in `[0, 1]`. Periodic signals give small values,
/// broadband ones values near 1.
pub fn spectral_entropy(signal: &[f64]) -> Result<f64> {
    let n = signal.len();
    if n < 4 {
        return Err(Error::Empty("spectral entropy needs at least four samples"));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<C64> = signal.iter().map(|v| C64::new(v - mean, 0.0)).collect();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[1..=n / 2].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("constant signal has no spectrum".into()));
    }
    let h: f64 = power.iter().filter(|&&q| q > 0.0).map(|q| -(q / total) * (q / total).ln()).sum();
    Ok(h / (power.len() as f64).ln())
}

/// Per-sample-time ensemble statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleAccumulator {
    pub count: usize,
    pub sum: Moments,
    /// Sums of per-trajectory `⟨x⟩`, `⟨x²⟩`, `⟨σ_z⟩` squared, for standard errors.
    pub sum_sq_mean_x: f64,
    pub sum_sq_mean_x2: f64,
    pub sum_sq_sigma_z: f64,
    pub sum_width: f64,
    /// Sums of per-trajectory `⟨n⟩` and `⟨n²⟩`.
    pub sum_n: f64,
    pub sum_n2: f64,
    pub density: Option<DensityAccumulator>,
}

impl SampleAccumulator {
    fn new(density_cutoff: Option<usize>) -> Self {
        SampleAccumulator {
            count: 0,
            sum: Moments::default(),
            sum_sq_mean_x: 0.0,
            sum_sq_mean_x2: 0.0,
            sum_sq_sigma_z: 0.0,
            sum_width: 0.0,
            sum_n: 0.0,
            sum_n2: 0.0,
            density: density_cutoff.map(DensityAccumulator::new),
        }
    }

    fn add_moments(&mut self, m: &Moments, (n1, n2): (f64, f64)) {
        self.sum_n += n1;
        self.sum_n2 += n2;
        self.count += 1;
        self.sum.mean_x += m.mean_x;
        self.sum.mean_x2 += m.mean_x2;
        self.sum.mean_p += m.mean_p;
        self.sum.mean_p2 += m.mean_p2;
        self.sum.sigma_z += m.sigma_z;
        self.sum_sq_mean_x += m.mean_x * m.mean_x;
        self.sum_sq_mean_x2 += m.mean_x2 * m.mean_x2;
        self.sum_sq_sigma_z += m.sigma_z * m.sigma_z;
        self.sum_width += m.width();
    }

    fn merge(mut self, o: SampleAccumulator) -> Result<Self> {
        self.count += o.count;
        self.sum.mean_x += o.sum.mean_x;
        self.sum.mean_x2 += o.sum.mean_x2;
        self.sum.mean_p += o.sum.mean_p;
        self.sum.mean_p2 += o.sum.mean_p2;
        self.sum.sigma_z += o.sum.sigma_z;
        self.sum_sq_mean_x += o.sum_sq_mean_x;
        self.sum_sq_mean_x2 += o.sum_sq_mean_x2;
        self.sum_sq_sigma_z += o.sum_sq_sigma_z;
        self.sum_width += o.sum_width;
        self.sum_n += o.sum_n;
        self.sum_n2 += o.sum_n2;
        self.density = match (self.density, o.density) {
            (Some(a), Some(b)) => Some(a.merge(b)?),
            (None, None) => None,
            _ => return Err(Error::Mismatch("density tracking differs between accumulators".into())),
        };
        Ok(self)
    }
}

/// Reduced statistics of the ensemble at one sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSnapshot {
    pub t: f64,
    pub n_trajectories: usize,
    /// Trajectory-averaged moments, i.e. moments of the ensemble state.
    pub moments: Moments,
    /// Monte-Carlo standard errors of `⟨x⟩`, `⟨x²⟩`, `⟨σ_z⟩`.
    pub stderr_x: f64,
    pub stderr_x2: f64,
    pub stderr_sigma_z: f64,
    pub delta_xp: f64,
    pub selective_delta_xp: f64,
    /// Photon statistics of the ensemble state.
    pub photon: PhotonStatistics,
    pub density: Option<BipartiteDensityMatrix>,
}

/// Accumulates trajectory samples at fixed times; associative merge.
#[derive(Debug, Clone)]
pub struct EnsembleAccumulator {
    pub times: Vec<f64>,
    pub samples: Vec<SampleAccumulator>,
    projector: Option<Arc<FockProjector>>,
    /// Sample indices at which the density matrix is accumulated.
    density_mask: Vec<bool>,
}

impl EnsembleAccumulator {
    /// `density_at` selects the sample indices that also build `ρ` with the
    /// given projector.
    pub fn new(times: Vec<f64>, projector: Option<Arc<FockProjector>>, density_at: &[usize]) -> Self {
        let mut density_mask = vec![false; times.len()];
        if projector.is_some() {
            for &i in density_at {
                if i < density_mask.len() {
                    density_mask[i] = true;
                }
            }
        }
        let n_max = projector.as_ref().map(|p| p.n_max());
        let samples = density_mask.iter().map(|&d| SampleAccumulator::new(if d { n_max } else { None })).collect();
        EnsembleAccumulator { times, samples, projector, density_mask }
    }

    pub fn add(&mut self, index: usize, state: &SpinorState, spectral: &mut Spectral) -> Result<()> {
        let m = state.moments(spectral);
        let nm = state.photon_number_moments(spectral);
        let sample = &mut self.samples[index];
        sample.add_moments(&m, nm);
        if self.density_mask[index] {
            let proj = self.projector.as_ref().expect("projector present").project(state)?;
            sample.density.as_mut().expect("density tracked").add(&proj)?;
        }
        Ok(())
    }

    pub fn merge(self, other: EnsembleAccumulator) -> Result<Self> {
        if self.times != other.times {
            return Err(Error::Mismatch("sample times differ".into()));
        }
        let samples = self
            .samples
            .into_iter()
            .zip(other.samples)
            .map(|(a, b)| a.merge(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsembleAccumulator { samples, ..self })
    }

    pub fn finish(&self) -> Result<Vec<EnsembleSnapshot>> {
        self.times
            .iter()
            .zip(&self.samples)
            .map(|(&t, s)| {
                if s.count == 0 {
                    return Err(Error::Empty("no trajectories accumulated"));
                }
                let n = s.count as f64;
                let moments = Moments {
                    mean_x: s.sum.mean_x / n,
                    mean_x2: s.sum.mean_x2 / n,
                    mean_p: s.sum.mean_p / n,
                    mean_p2: s.sum.mean_p2 / n,
                    sigma_z: s.sum.sigma_z / n,
                };
                let stderr = |sum_sq: f64, mean: f64| {
                    if s.count < 2 {
                        0.0
                    } else {
                        ((sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt()
                    }
                };
                Ok(EnsembleSnapshot {
                    t,
                    n_trajectories: s.count,
                    moments,
                    stderr_x: stderr(s.sum_sq_mean_x, moments.mean_x),
                    stderr_x2: stderr(s.sum_sq_mean_x2, moments.mean_x2),
                    stderr_sigma_z: stderr(s.sum_sq_sigma_z, moments.sigma_z),
                    delta_xp: nonselective_width(&moments)?,
                    selective_delta_xp: s.sum_width / n,
                    photon: {
                        let (n1, n2) = (s.sum_n / n, s.sum_n2 / n);
                        PhotonStatistics { mean_n: n1, delta_n: (n2 - n1 * n1).max(0.0).sqrt() }
                    },
                    density: s.density.as_ref().map(|d| d.finish()).transpose()?,
                })
            })
            .collect()
    }
}

pub const TIME_SERIES_HEADER: &str = "t,mean_x,mean_p,var_x,var_p,Delta_xp,delta_xp,mean_n,Delta_n,sigma_z,E_N,purity,N_minus";

/// One row of the exported time series; quantities that were not computed
/// are written as `NaN`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub delta_xp: f64,
    pub selective_delta_xp: f64,
    pub mean_n: f64,
    pub delta_n: f64,
    pub sigma_z: f64,
    pub negativity: f64,
    pub purity: f64,
    pub n_minus: f64,
}

impl TimeSeriesRow {
    /// Row from an ensemble snapshot; density-derived columns come from `ρ`
    /// when it was accumulated.
    pub fn from_snapshot(s: &EnsembleSnapshot, n_minus: Option<f64>) -> Self {
        let m = &s.moments;
        let (mean_n, delta_n, e_n, pur) = match &s.density {
            Some(rho) => {
                let ps = rho.photon_statistics();
                (ps.mean_n, ps.delta_n, rho.negativity(), rho.purity())
            }
            None => (s.photon.mean_n, s.photon.delta_n, f64::NAN, f64::NAN),
        };
        TimeSeriesRow {
            t: s.t,
            mean_x: m.mean_x,
            mean_p: m.mean_p,
            var_x: m.var_x(),
            var_p: m.var_p(),
            delta_xp: s.delta_xp,
            selective_delta_xp: s.selective_delta_xp,
            mean_n,
            delta_n,
            sigma_z: m.sigma_z,
            negativity: e_n,
            purity: pur,
            n_minus: n_minus.unwrap_or(f64::NAN),
        }
    }
}

pub fn write_time_series<W: Write>(mut w: W, rows: &[TimeSeriesRow]) -> std::io::Result<()> {
    writeln!(w, "{TIME_SERIES_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.mean_x,
            r.mean_p,
            r.var_x,
            r.var_p,
            r.delta_xp,
            r.selective_delta_xp,
            r.mean_n,
            r.delta_n,
            r.sigma_z,
            r.negativity,
            r.purity,
            r.n_minus
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Minimum, ModelParams};
    use crate::quantum::build_initial_state;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    fn grid() -> QuadratureGrid {
        QuadratureGrid::new(512, 18.0).unwrap()
    }

    fn fock(n_max: usize, entries: &[(usize, usize, C64)]) -> FockProjection {
        let mut coefficients = vec![C64::default(); 2 * (n_max + 1)];
        for &(s, n, c) in entries {
            coefficients[s * (n_max + 1) + n] = c;
        }
        FockProjection { n_max, coefficients, leakage: 0.0, t: 0.0 }
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let g = QuadratureGrid::new(1024, 20.0).unwrap();
        let rows = hermite_functions(40, &g.positions());
        for a in [0, 1, 7, 40] {
            for b in [0, 1, 7, 40] {
                let ip: f64 = rows[a].iter().zip(&rows[b]).map(|(u, v)| u * v).sum::<f64>() * g.dx();
                assert_abs_diff_eq!(ip, if a == b { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn vacuum_projects_onto_ground_level() {
        let s = SpinorState::coherent(grid(), 0.0, 0.0, [C64::default(), one()]).unwrap();
        let p = project_to_fock(&s, 20).unwrap();
        assert_abs_diff_eq!(p.amplitude(1, 0).norm(), 1.0, epsilon = 1e-10);
        for (i, c) in p.coefficients.iter().enumerate() {
            if i != 21 {
                assert!(c.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn coherent_state_is_poissonian() {
        let x0 = 2.4;
        let s = SpinorState::coherent(grid(), x0, 0.0, [one(), C64::default()]).unwrap();
        let p = project_to_fock(&s, 60).unwrap();
        let alpha2 = x0 * x0 / 2.0;
        let mut poisson = (-alpha2).exp();
        for n in 0..30 {
            assert_abs_diff_eq!(p.amplitude(0, n).norm_sqr(), poisson, epsilon = 1e-10);
            poisson *= alpha2 / (n + 1) as f64;
        }
        let rho = BipartiteDensityMatrix::pure(&p);
        let ps = rho.photon_statistics();
        assert_abs_diff_eq!(ps.mean_n, alpha2, epsilon = 1e-9);
        assert_abs_diff_eq!(ps.delta_n, alpha2.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn initial_state_leakage_is_tiny() {
        let params = ModelParams::reference();
        let s = build_initial_state(&params, grid(), Minimum::Right).unwrap();
        let p = project_to_fock(&s, 60).unwrap();
        assert!(p.leakage < 1e-10);
        let rho = BipartiteDensityMatrix::pure(&p);
        rho.check_invariants().unwrap();
        assert_abs_diff_eq!(rho.negativity(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(rho.sigma_z(), s.sigma_z(), epsilon = 1e-8);
        let m = s.moments(&mut Spectral::new(512));
        let mf = rho.moments();
        assert_abs_diff_eq!(m.mean_x, mf.mean_x, epsilon = 1e-6);
        assert_abs_diff_eq!(m.mean_x2, mf.mean_x2, epsilon = 1e-6);
        assert_abs_diff_eq!(m.mean_p2, mf.mean_p2, epsilon = 1e-6);
        assert_abs_diff_eq!(m.mean_n(), rho.photon_statistics().mean_n, epsilon = 1e-6);
    }

    #[test]
    fn truncated_basis_reports_leakage() {
        let s = SpinorState::coherent(grid(), 6.0, 0.0, [one(), C64::default()]).unwrap();
        assert!(matches!(project_to_fock(&s, 5), Err(Error::FockLeakage { .. })));
    }

    #[test]
    fn bell_state_negativity_is_minus_half() {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        // qubit level 0 with one photon plus level 1 with two photons
        let p = fock(3, &[(0, 1, h), (1, 2, h)]);
        let rho = BipartiteDensityMatrix::pure(&p);
        assert_abs_diff_eq!(rho.negativity(), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mixture_purity() {
        let a = fock(2, &[(0, 0, one())]);
        let b = fock(2, &[(1, 2, one())]);
        let rho = accumulate_density(&[a.clone(), b]).unwrap();
        assert_abs_diff_eq!(rho.purity(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(accumulate_density(&[a]).unwrap().purity(), 1.0, epsilon = 1e-15);
        let d = 6.0;
        let mixed = BipartiteDensityMatrix::from_entries(2, DMatrix::identity(6, 6) / C64::new(d, 0.0), 0.0).unwrap();
        assert_abs_diff_eq!(mixed.purity(), 1.0 / d, epsilon = 1e-15);
        mixed.check_invariants().unwrap();
    }

    #[test]
    fn mixed_cutoffs_rejected() {
        let a = fock(2, &[(0, 0, one())]);
        let b = fock(3, &[(0, 0, one())]);
        assert!(accumulate_density(&[a.clone(), b]).is_err());
        let mut c = a.clone();
        c.t = 1.0;
        assert!(accumulate_density(&[a, c]).is_err());
    }

    #[test]
    fn fock_state_has_no_number_spread() {
        let rho = BipartiteDensityMatrix::pure(&fock(5, &[(1, 3, one())]));
        let ps = rho.photon_statistics();
        assert_eq!(ps.mean_n, 3.0);
        assert_eq!(ps.delta_n, 0.0);
        assert_abs_diff_eq!(ps.scaled().unwrap(), 0.0);
        let vac = BipartiteDensityMatrix::pure(&fock(5, &[(1, 0, one())]));
        assert!(vac.photon_statistics().scaled().is_err());
        assert_eq!(vac.sigma_z(), -1.0);
    }

    #[test]
    fn two_coherent_mixture_width() {
        let x0 = 1.3;
        let mut sp = Spectral::new(512);
        let a = SpinorState::coherent(grid(), x0, 0.0, [one(), C64::default()]).unwrap().moments(&mut sp);
        let b = SpinorState::coherent(grid(), -x0, 0.0, [one(), C64::default()]).unwrap().moments(&mut sp);
        let avg = Moments {
            mean_x: 0.5 * (a.mean_x + b.mean_x),
            mean_x2: 0.5 * (a.mean_x2 + b.mean_x2),
            mean_p: 0.5 * (a.mean_p + b.mean_p),
            mean_p2: 0.5 * (a.mean_p2 + b.mean_p2),
            sigma_z: 1.0,
        };
        assert_abs_diff_eq!(nonselective_width(&avg).unwrap(), ((0.5 + x0 * x0) / 2.0).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(selective_width(&[a.width(), b.width()]).unwrap(), 0.5, epsilon = 1e-9);
        assert!(selective_width(&[]).is_err());
    }

    fn random_state(seed: &[f64], n_max: usize) -> FockProjection {
        let m = 2 * (n_max + 1);
        let mut c: Vec<C64> = (0..m).map(|i| C64::new(seed[i % seed.len()] + i as f64 * 0.1, seed[(i + 3) % seed.len()])).collect();
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        c.iter_mut().for_each(|z| *z /= norm);
        FockProjection { n_max, coefficients: c, leakage: 0.0, t: 0.0 }
    }

    fn local_qubit_rotation(theta: f64, phi: f64, n_max: usize) -> DMatrix<C64> {
        let (s, c) = theta.sin_cos();
        let e = C64::from_polar(1.0, phi);
        let u = [[C64::new(c, 0.0), -e.conj() * s], [e * s, C64::new(c, 0.0)]];
        let m = n_max + 1;
        DMatrix::from_fn(2 * m, 2 * m, |i, j| if i % m == j % m { u[i / m][j / m] } else { C64::default() })
    }

    #[test]
    fn ensemble_purity_of_orthogonal_and_identical_states() {
        let g = QuadratureGrid::new(128, 10.0).unwrap();
        let one = C64::new(1.0, 0.0);
        let e = SpinorState::coherent(g, 0.0, 0.0, [one, C64::default()]).unwrap();
        let gr = SpinorState::coherent(g, 0.0, 0.0, [C64::default(), one]).unwrap();
        assert!((ensemble_purity(&[e.clone(), e.clone(), e.clone()]).unwrap() - 1.0).abs() < 1e-12);
        assert!((ensemble_purity(&[e, gr]).unwrap() - 0.5).abs() < 1e-12);
        assert!(ensemble_purity(&[]).is_err());
    }

    #[test]
    fn spectral_entropy_orders_tone_below_noise() {
        let tone: Vec<f64> = (0..1024).map(|k| (0.3 * k as f64).sin()).collect();
        let mut rng = crate::rng::substream(3, 0);
        let noise: Vec<f64> = (0..1024).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let (a, b) = (spectral_entropy(&tone).unwrap(), spectral_entropy(&noise).unwrap());
        assert!(a < 0.5 && b > 0.85, "{a} {b}");
        // single exact bin
        let pure: Vec<f64> = (0..64).map(|k| (2.0 * std::f64::consts::PI * 4.0 * k as f64 / 64.0).cos()).collect();
        assert!(spectral_entropy(&pure).unwrap() < 1e-12);
        assert!(spectral_entropy(&[1.0; 16]).is_err());
    }

    proptest! {
        #[test]
        fn product_states_have_zero_negativity(a in -1.0f64..1.0, b in -1.0f64..1.0, c in 0.0f64..6.0) {
            let n_max = 4;
            let qubit = [C64::new(a, b), C64::new(1.0, a * b)];
            let field: Vec<C64> = (0..=n_max).map(|n| C64::from_polar((-(n as f64 - c).powi(2)).exp(), n as f64 * a)).collect();
            let mut coefficients = Vec::new();
            for q in qubit {
                for f in &field {
                    coefficients.push(q * f);
                }
            }
            let norm = coefficients.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            coefficients.iter_mut().for_each(|z| *z /= norm);
            let rho = BipartiteDensityMatrix::pure(&FockProjection { n_max, coefficients, leakage: 0.0, t: 0.0 });
            prop_assert!(rho.negativity().abs() < 1e-10);
        }

        #[test]
        fn negativity_invariant_under_local_rotation(seed in prop::collection::vec(-1.0f64..1.0, 6), theta in 0.0f64..3.0, phi in 0.0f64..6.0) {
            let n_max = 3;
            let a = random_state(&seed, n_max);
            let b = random_state(&seed[1..], n_max);
            let rho = accumulate_density(&[a, b]).unwrap();
            let u = local_qubit_rotation(theta, phi, n_max);
            let rotated = BipartiteDensityMatrix::from_entries(n_max, &u * &rho.entries * u.adjoint(), 0.0).unwrap();
            prop_assert!((rho.negativity() - rotated.negativity()).abs() < 1e-9);
            prop_assert!(rho.purity() <= 1.0 + 1e-12);
            prop_assert!(rho.negativity() >= -0.5 - 1e-12);
        }
    }
}
