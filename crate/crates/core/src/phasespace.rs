//! Wigner and Husimi quasi-probability distributions of the field, their
//! negative volume, marginals and simple comparison metrics.
//!
//! The Wigner function is evaluated from the position kernel with the
//! relative coordinate sampled on the grid itself,
//! `W(x, p) = (1/π) ∫ dy ρ(x − y, x + y) e^{2ipy}`, so the momentum axis has
//! spacing `π/(L·dx)` and extent `±π/(2dx)`. Kernels built from states are
//! therefore refined by two first, which also removes the parity aliasing of
//! this discretization for band-limited states.

use std::io::Write;

use nalgebra::DMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{hermite_functions, BipartiteDensityMatrix};
use crate::quantum::{QuadratureGrid, Spectral, SpinorState};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Wigner,
    Husimi,
    /// Normalized 2D histogram of semiclassical samples.
    Histogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionSource {
    SingleTrajectory,
    EnsembleAverage,
    Semiclassical,
}

/// Field position kernel `ρ(x_i, x_j) = Σ_c w_c v_c(x_i) v_c(x_j)*` on a grid.
#[derive(Debug, Clone)]
pub struct FieldKernel {
    pub grid: QuadratureGrid,
    pub vectors: Vec<Vec<C64>>,
    pub weights: Vec<f64>,
}

impl FieldKernel {
    /// Kernel of one trajectory with the qubit traced out, refined by two.
    pub fn from_spinor(state: &SpinorState) -> Result<Self> {
        Self::from_spinors(std::slice::from_ref(state))
    }

    /// Trajectory-averaged kernel, refined by two.
    pub fn from_spinors(states: &[SpinorState]) -> Result<Self> {
        let first = states.first().ok_or(Error::Empty("no states for kernel"))?;
        let w = 1.0 / states.len() as f64;
        let mut vectors = Vec::with_capacity(2 * states.len());
        let mut grid = first.grid;
        for s in states {
            if s.grid != first.grid {
                return Err(Error::Mismatch("states on different grids".into()));
            }
            let mut r = s.refined(2)?;
            r.normalize()?;
            grid = r.grid;
            let n = r.n_points();
            let (a, b) = r.amplitudes.split_at(n);
            vectors.push(a.to_vec());
            vectors.push(b.to_vec());
        }
        let weights = vec![w; vectors.len()];
        Ok(FieldKernel { grid, vectors, weights })
    }

    /// Kernel of a Fock-basis field density matrix sampled on `grid`.
    pub fn from_fock(rho_f: &DMatrix<C64>, grid: QuadratureGrid) -> Result<Self> {
        let m = rho_f.nrows();
        if m == 0 || rho_f.ncols() != m {
            return Err(Error::Mismatch("field density matrix must be square and non-empty".into()));
        }
        let herm = (rho_f - rho_f.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::Numerical(format!("field density matrix not Hermitian (deviation {herm:e})")));
        }
        let basis = hermite_functions(m - 1, &grid.positions());
        let eig = rho_f.clone().symmetric_eigen();
        let mut vectors = Vec::new();
        let mut weights = Vec::new();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda < -1e-8 {
                return Err(Error::Numerical(format!("field density matrix eigenvalue {lambda:e}")));
            }
            if lambda < 1e-14 {
                continue;
            }
            let col = eig.eigenvectors.column(k);
            let mut v = vec![C64::default(); grid.n_points()];
            for (n, phi) in basis.iter().enumerate() {
                let c = col[n];
                for (vj, f) in v.iter_mut().zip(phi) {
                    *vj += c * *f;
                }
            }
            vectors.push(v);
            weights.push(lambda);
        }
        Ok(FieldKernel { grid, vectors, weights })
    }

    /// Reduced field of a bipartite density matrix, sampled on `grid`.
    pub fn from_density(rho: &BipartiteDensityMatrix, grid: QuadratureGrid) -> Result<Self> {
        Self::from_fock(&rho.reduced_field(), grid)
    }

    pub fn value(&self, i: usize, j: usize) -> C64 {
        self.vectors.iter().zip(&self.weights).map(|(v, w)| v[i] * v[j].conj() * *w).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.grid.n_points()).map(|i| self.value(i, i).re).sum::<f64>() * self.grid.dx()
    }

    /// `ρ(x, x)` on the kernel grid.
    pub fn position_marginal(&self) -> Marginal {
        let density = (0..self.grid.n_points()).map(|i| self.value(i, i).re).collect();
        Marginal::new(self.grid.positions(), density)
    }

    /// Momentum density from the Fourier-transformed kernel, sampled
    /// `oversample` times more finely than the grid's own momentum spacing.
    pub fn momentum_marginal(&self, oversample: usize) -> Marginal {
        let n = self.grid.n_points();
        let len = n * oversample.max(1);
        let mut spectral = Spectral::new(len);
        let mut density = vec![0.0; len];
        for (v, w) in self.vectors.iter().zip(&self.weights) {
            let mut buf = vec![C64::default(); len];
            buf[..n].copy_from_slice(v);
            spectral.forward(&mut buf);
            for (d, b) in density.iter_mut().zip(&buf) {
                *d += w * b.norm_sqr();
            }
        }
        let dp = 2.0 * std::f64::consts::PI / (len as f64 * self.grid.dx());
        let half = len / 2;
        let axis: Vec<f64> = (0..len).map(|i| (i as f64 - half as f64) * dp).collect();
        let sorted: Vec<f64> = (0..len).map(|i| density[(i + len - half) % len]).collect();
        Marginal::new(axis, sorted)
    }
}

/// One-dimensional probability density on a uniform axis, normalized to
/// unit integral.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub axis: Vec<f64>,
    pub density: Vec<f64>,
}

impl Marginal {
    pub fn new(axis: Vec<f64>, mut density: Vec<f64>) -> Self {
        let step = axis_step(&axis);
        let total: f64 = density.iter().sum::<f64>() * step;
        if total > 0.0 {
            density.iter_mut().for_each(|d| *d /= total);
        }
        Marginal { axis, density }
    }

    pub fn step(&self) -> f64 {
        axis_step(&self.axis)
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.step()
    }

    /// Linear interpolation, zero outside the axis.
    pub fn at(&self, x: f64) -> f64 {
        interpolate(&self.axis, &self.density, x)
    }

    /// `∫ |P − Q| dx` evaluated on this marginal's axis.
    pub fn l1_distance(&self, other: &Marginal) -> f64 {
        self.axis.iter().zip(&self.density).map(|(&x, &d)| (d - other.at(x)).abs()).sum::<f64>() * self.step()
    }

    /// `Σ |P_{i+1} − P_i|`, a measure of fine structure.
    pub fn total_variation(&self) -> f64 {
        self.density.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

fn axis_step(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        1.0
    } else {
        (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
    }
}

fn interpolate(axis: &[f64], values: &[f64], x: f64) -> f64 {
    let n = axis.len();
    if n < 2 || x < axis[0] || x > axis[n - 1] {
        return 0.0;
    }
    let h = axis_step(axis);
    let u = (x - axis[0]) / h;
    let i = (u.floor() as usize).min(n - 2);
    let f = u - i as f64;
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// Uniform axis of `n` points spanning `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Real-valued distribution on a uniform `(x, p)` grid; `values[[i, j]]` is
/// the value at `(x_axis[i], p_axis[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceDistribution {
    pub kind: DistributionKind,
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: Array2<f64>,
    pub t: f64,
    pub source: DistributionSource,
}

impl PhaseSpaceDistribution {
    pub fn dx(&self) -> f64 {
        axis_step(&self.x_axis)
    }

    pub fn dp(&self) -> f64 {
        axis_step(&self.p_axis)
    }

    pub fn integral(&self) -> f64 {
        self.values.sum() * self.dx() * self.dp()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Position and momentum marginals.
    pub fn marginals(&self) -> (Marginal, Marginal) {
        let px = self.values.rows().into_iter().map(|r| r.sum() * self.dp()).collect();
        let pp = self.values.columns().into_iter().map(|c| c.sum() * self.dx()).collect();
        (Marginal::new(self.x_axis.clone(), px), Marginal::new(self.p_axis.clone(), pp))
    }

    /// Bilinear interpolation, zero outside the sampled region.
    pub fn value_at(&self, x: f64, p: f64) -> f64 {
        let (nx, np) = self.values.dim();
        let (x0, p0) = (self.x_axis[0], self.p_axis[0]);
        let (hx, hp) = (self.dx(), self.dp());
        let u = (x - x0) / hx;
        let v = (p - p0) / hp;
        if u < 0.0 || v < 0.0 || u > (nx - 1) as f64 || v > (np - 1) as f64 {
            return 0.0;
        }
        let i = (u.floor() as usize).min(nx - 2);
        let j = (v.floor() as usize).min(np - 2);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let w = &self.values;
        w[[i, j]] * (1.0 - fu) * (1.0 - fv)
            + w[[i + 1, j]] * fu * (1.0 - fv)
            + w[[i, j + 1]] * (1.0 - fu) * fv
            + w[[i + 1, j + 1]] * fu * fv
    }

    /// Copy on new axes by bilinear interpolation.
    pub fn resample(&self, x_axis: Vec<f64>, p_axis: Vec<f64>) -> Self {
        let values = Array2::from_shape_fn((x_axis.len(), p_axis.len()), |(i, j)| self.value_at(x_axis[i], p_axis[j]));
        PhaseSpaceDistribution { x_axis, p_axis, values, ..self.clone() }
    }

    /// Export framing: `x, p ∈ [−15, 15]`, 301 × 301 samples.
    pub fn resample_default(&self) -> Self {
        self.resample(linspace(-15.0, 15.0, 301), linspace(-15.0, 15.0, 301))
    }

    /// Sum of absolute differences between neighbouring samples inside the
    /// unit-area square centred on the maximum.
    pub fn local_total_variation(&self) -> f64 {
        let (imax, jmax) = argmax(&self.values);
        let hx = (0.5 / self.dx()).round() as isize;
        let hp = (0.5 / self.dp()).round() as isize;
        let (nx, np) = self.values.dim();
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        let (i0, i1) = (clamp(imax as isize - hx, nx), clamp(imax as isize + hx, nx));
        let (j0, j1) = (clamp(jmax as isize - hp, np), clamp(jmax as isize + hp, np));
        let mut tv = 0.0;
        for i in i0..=i1 {
            for j in j0..=j1 {
                if i < i1 {
                    tv += (self.values[[i + 1, j]] - self.values[[i, j]]).abs();
                }
                if j < j1 {
                    tv += (self.values[[i, j + 1]] - self.values[[i, j]]).abs();
                }
            }
        }
        tv
    }

    /// `x,p,value` rows with header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,p,value")?;
        for (i, x) in self.x_axis.iter().enumerate() {
            for (j, p) in self.p_axis.iter().enumerate() {
                writeln!(w, "{x},{p},{}", self.values[[i, j]])?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "source": self.source,
            "t": self.t,
            "x_axis": self.x_axis,
            "p_axis": self.p_axis,
            "values": self.values.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            kind: DistributionKind,
            source: DistributionSource,
            t: f64,
            x_axis: Vec<f64>,
            p_axis: Vec<f64>,
            values: Vec<Vec<f64>>,
        }
        let raw: Raw = serde_json::from_value(v.clone())?;
        let (nx, np) = (raw.x_axis.len(), raw.p_axis.len());
        if raw.values.len() != nx || raw.values.iter().any(|r| r.len() != np) {
            return Err(Error::Mismatch("distribution values do not match axes".into()));
        }
        let flat: Vec<f64> = raw.values.into_iter().flatten().collect();
        let values = Array2::from_shape_vec((nx, np), flat).map_err(|e| Error::Mismatch(e.to_string()))?;
        Ok(PhaseSpaceDistribution { kind: raw.kind, x_axis: raw.x_axis, p_axis: raw.p_axis, values, t: raw.t, source: raw.source })
    }

    fn same_axes(&self, other: &Self) -> bool {
        self.x_axis == other.x_axis && self.p_axis == other.p_axis
    }
}

fn argmax(a: &Array2<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    let mut v = f64::NEG_INFINITY;
    for ((i, j), &x) in a.indexed_iter() {
        if x > v {
            v = x;
            best = (i, j);
        }
    }
    best
}

/// Wigner function of a field kernel. The relative coordinate is
/// zero-padded so that the momentum spacing is at most 1/16.
pub fn wigner(kernel: &FieldKernel, t: f64, source: DistributionSource) -> Result<PhaseSpaceDistribution> {
    let grid = kernel.grid;
    let l = grid.n_points();
    let dx = grid.dx();
    let mut len = l;
    while std::f64::consts::PI / (len as f64 * dx) > 1.0 / 16.0 {
        len *= 2;
    }
    let half = (l / 2) as isize;
    let out_half = (len / 2) as isize;
    let mut spectral = Spectral::new(len);
    let mut values = Array2::<f64>::zeros((l, len));
    let mut buf = vec![C64::default(); len];
    let mut worst_imag: f64 = 0.0;
    let scale = dx / std::f64::consts::PI;
    for j in 0..l {
        buf.iter_mut().for_each(|b| *b = C64::default());
        let reach = (j.min(l - 1 - j) as isize).min(half - 1);
        for m in -reach..=reach {
            let a = (j as isize - m) as usize;
            let b = (j as isize + m) as usize;
            let mut acc = C64::default();
            for (v, w) in kernel.vectors.iter().zip(&kernel.weights) {
                acc += v[a] * v[b].conj() * *w;
            }
            buf[m.rem_euclid(len as isize) as usize] = acc;
        }
        spectral.inverse(&mut buf);
        for (col, lidx) in (-out_half..out_half).enumerate() {
            let z = buf[lidx.rem_euclid(len as isize) as usize] * scale;
            worst_imag = worst_imag.max(z.im.abs());
            values[[j, col]] = z.re;
        }
    }
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst_imag > 1e-10 * peak.max(1.0) {
        return Err(Error::Numerical(format!("Wigner function has imaginary residue {worst_imag:e}; kernel not Hermitian")));
    }
    let dp = std::f64::consts::PI / (len as f64 * dx);
    let p_axis = (-out_half..out_half).map(|k| k as f64 * dp).collect();
    Ok(PhaseSpaceDistribution {
        kind: DistributionKind::Wigner,
        x_axis: grid.positions(),
        p_axis,
        values,
        t,
        source,
    })
}

fn gaussian_taps(step: f64) -> Vec<f64> {
    let reach = (6.0 / step).ceil() as isize;
    let c = step / std::f64::consts::PI.sqrt();
    (-reach..=reach).map(|k| c * (-(k as f64 * step).powi(2)).exp()).collect()
}

fn convolve_axis(values: &Array2<f64>, taps: &[f64], axis: usize) -> Array2<f64> {
    let (nx, np) = values.dim();
    let reach = (taps.len() / 2) as isize;
    let mut out = Array2::<f64>::zeros((nx, np));
    let n = if axis == 0 { nx } else { np } as isize;
    for i in 0..nx {
        for j in 0..np {
            let centre = if axis == 0 { i } else { j } as isize;
            let lo = (-reach).max(-centre);
            let hi = reach.min(n - 1 - centre);
            let mut acc = 0.0;
            for k in lo..=hi {
                let idx = (centre + k) as usize;
                let v = if axis == 0 { values[[idx, j]] } else { values[[i, idx]] };
                acc += taps[(k + reach) as usize] * v;
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Husimi function as the Gaussian smoothing of a Wigner function,
/// `Q(x̃, p̃) = (1/π) ∬ dx dp e^{−(x−x̃)² − (p−p̃)²} W(x, p)`.
pub fn husimi_from_wigner(w: &PhaseSpaceDistribution) -> Result<PhaseSpaceDistribution> {
    if w.kind != DistributionKind::Wigner {
        return Err(Error::Mismatch(format!("expected a Wigner distribution, got {:?}", w.kind)));
    }
    let (dx, dp) = (w.dx(), w.dp());
    if dx > 1.0 / 6.0 || dp > 1.0 / 6.0 {
        return Err(Error::GridTooNarrow(format!(
            "Gaussian kernel needs ≥ 6 points per unit; spacing is dx = {dx:.4}, dp = {dp:.4}"
        )));
    }
    let along_p = convolve_axis(&w.values, &gaussian_taps(dp), 1);
    let mut values = convolve_axis(&along_p, &gaussian_taps(dx), 0);
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-8 * peak.max(1e-300) {
        return Err(Error::Numerical(format!("Husimi function negative beyond residue level ({min:e})")));
    }
    values.mapv_inplace(|v| v.max(0.0));
    Ok(PhaseSpaceDistribution { kind: DistributionKind::Husimi, values, ..w.clone() })
}

/// `(N_−, N_+)`: integrals of the negative and positive parts.
pub fn negative_fraction(w: &PhaseSpaceDistribution) -> Result<(f64, f64)> {
    if w.kind != DistributionKind::Wigner {
        return Err(Error::Mismatch(format!("expected a Wigner distribution, got {:?}", w.kind)));
    }
    let cell = w.dx() * w.dp();
    let (mut neg, mut pos) = (0.0, 0.0);
    for &v in w.values.iter() {
        if v < 0.0 {
            neg += v;
        } else {
            pos += v;
        }
    }
    Ok((neg * cell, pos * cell))
}

/// Pointwise average of distributions sharing kind and axes.
pub fn time_averaged_distribution(series: &[PhaseSpaceDistribution]) -> Result<PhaseSpaceDistribution> {
    let first = series.first().ok_or(Error::Empty("time average over an empty window"))?;
    let mut sum = Array2::<f64>::zeros(first.values.dim());
    let mut t = 0.0;
    for d in series {
        if !d.same_axes(first) || d.kind != first.kind {
            return Err(Error::Mismatch("distributions in a time average must share kind and axes".into()));
        }
        sum += &d.values;
        t += d.t;
    }
    let n = series.len() as f64;
    Ok(PhaseSpaceDistribution { values: sum / n, t: t / n, ..first.clone() })
}

/// Normalized 2D histogram of `(x, p)` samples; bins are centred on the
/// axis points, samples outside are dropped.
pub fn histogram(points: &[[f64; 2]], x_axis: Vec<f64>, p_axis: Vec<f64>, t: f64) -> Result<PhaseSpaceDistribution> {
    if points.is_empty() {
        return Err(Error::Empty("histogram of no samples"));
    }
    let (hx, hp) = (axis_step(&x_axis), axis_step(&p_axis));
    let (nx, np) = (x_axis.len(), p_axis.len());
    let mut counts = Array2::<f64>::zeros((nx, np));
    for &[x, p] in points {
        let i = ((x - x_axis[0]) / hx).round();
        let j = ((p - p_axis[0]) / hp).round();
        if i >= 0.0 && j >= 0.0 && (i as usize) < nx && (j as usize) < np {
            counts[[i as usize, j as usize]] += 1.0;
        }
    }
    let inside = counts.sum();
    if inside == 0.0 {
        return Err(Error::Empty("no samples inside the histogram window"));
    }
    counts /= inside * hx * hp;
    Ok(PhaseSpaceDistribution {
        kind: DistributionKind::Histogram,
        x_axis,
        p_axis,
        values: counts,
        t,
        source: DistributionSource::Semiclassical,
    })
}

/// Shannon entropy `−Σ P_i ln P_i` of the bin probabilities.
pub fn histogram_entropy(h: &PhaseSpaceDistribution) -> f64 {
    let cell = h.dx() * h.dp();
    let total: f64 = h.values.iter().filter(|v| **v > 0.0).sum::<f64>() * cell;
    -h.values
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| {
            let p = v * cell / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Jaccard overlap `|A ∩ B| / |A ∪ B|` of the sets where each distribution
/// reaches `level` times its own maximum. Axes must match.
pub fn jaccard_overlap(a: &PhaseSpaceDistribution, b: &PhaseSpaceDistribution, level: f64) -> Result<f64> {
    if !a.same_axes(b) {
        return Err(Error::Mismatch("Jaccard overlap needs identical axes".into()));
    }
    let (ta, tb) = (level * a.max_value(), level * b.max_value());
    let (mut inter, mut union) = (0usize, 0usize);
    for (va, vb) in a.values.iter().zip(b.values.iter()) {
        let (ia, ib) = (*va >= ta, *vb >= tb);
        inter += (ia && ib) as usize;
        union += (ia || ib) as usize;
    }
    if union == 0 {
        return Err(Error::Empty("both level sets are empty"));
    }
    Ok(inter as f64 / union as f64)
}
