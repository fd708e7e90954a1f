//! Direct integration of the measurement master equation in the truncated
//! qubit ⊗ Fock basis.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::observables::BipartiteDensityMatrix;
use crate::ode::{DormandPrince, Tolerance};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Absolute and relative tolerance of the adaptive integrator.
    pub tol: f64,
    /// Maximum population allowed in the top `leakage_levels` Fock levels.
    pub leakage_tolerance: f64,
    pub leakage_levels: usize,
    /// Drop the Hamiltonian and keep only the measurement dissipator.
    pub suppress_hamiltonian: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { tol: 1e-10, leakage_tolerance: 1e-4, leakage_levels: 5, suppress_hamiltonian: false }
    }
}

/// Row-wise sparse complex matrix.
#[derive(Debug, Clone)]
struct Sparse {
    rows: Vec<Vec<(usize, C64)>>,
}

impl Sparse {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] != C64::default()).map(|j| (j, m[(i, j)])).collect())
            .collect();
        Sparse { rows }
    }

    /// `out += c · O ρ` for row-major `ρ`.
    fn left(&self, c: C64, rho: &[C64], out: &mut [C64], d: usize) {
        for (i, row) in self.rows.iter().enumerate() {
            let dst = &mut out[i * d..(i + 1) * d];
            for &(k, v) in row {
                let f = c * v;
                for (o, r) in dst.iter_mut().zip(&rho[k * d..(k + 1) * d]) {
                    *o += f * r;
                }
            }
        }
    }

    /// `out += c · ρ O` for row-major `ρ`.
    fn right(&self, c: C64, rho: &[C64], out: &mut [C64], d: usize) {
        for i in 0..d {
            let src = &rho[i * d..(i + 1) * d];
            let dst = &mut out[i * d..(i + 1) * d];
            for (k, row) in self.rows.iter().enumerate() {
                let r = src[k] * c;
                if r == C64::default() {
                    continue;
                }
                for &(j, v) in row {
                    dst[j] += r * v;
                }
            }
        }
    }
}

struct Operators {
    h0: Sparse,
    x: Sparse,
    p: Sparse,
    x2: Sparse,
}

/// Field operators embedded as `1_qubit ⊗ O`; index `s·(n_max+1) + n`.
fn build_operators(params: &ModelParams, n_max: usize) -> Operators {
    let m = n_max + 1;
    let d = 2 * m;
    let mut a = DMatrix::<C64>::zeros(m, m);
    for n in 1..m {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let xf = (&a + &ad) / C64::new(SQRT_2, 0.0);
    let pf = (&ad - &a) * C64::new(0.0, 1.0 / SQRT_2);
    let embed = |f: &DMatrix<C64>| {
        let mut out = DMatrix::<C64>::zeros(d, d);
        for s in 0..2 {
            out.view_mut((s * m, s * m), (m, m)).copy_from(f);
        }
        out
    };
    let x = embed(&xf);
    let p = embed(&pf);
    // X·X in the truncated space keeps the dissipator exactly trace preserving
    let x2 = &x * &x;
    let mut h0 = DMatrix::<C64>::zeros(d, d);
    let half = 0.5 * params.qubit_frequency;
    for s in 0..2 {
        let sz = if s == 0 { 1.0 } else { -1.0 };
        for n in 0..m {
            h0[(s * m + n, s * m + n)] = C64::new(n as f64 + 0.5 + sz * half, 0.0);
        }
    }
    let coupling = xf * C64::new(SQRT_2 * params.g, 0.0);
    h0.view_mut((0, m), (m, m)).copy_from(&coupling);
    h0.view_mut((m, 0), (m, m)).copy_from(&coupling);
    Operators { h0: Sparse::from_dense(&h0), x: Sparse::from_dense(&x), p: Sparse::from_dense(&p), x2: Sparse::from_dense(&x2) }
}

/// Integrate `dρ/dt = −i[H, ρ] + κ(2xρx − x²ρ − ρx²)` from `rho0` (at
/// `rho0.t`) and return `ρ` at each of `sample_times`.
///
/// `H = p²/2 + x²/2 + A(t) p + (Ω/2)σ_z + (√2 g σ_x + √2 η(t) cos ω_d t) x`
/// with `A(t) = √2 η(t) sin ω_d t`, the same operator the split-operator
/// propagator uses.
pub fn direct_lindblad_oracle(
    params: &ModelParams,
    n_max: usize,
    rho0: &BipartiteDensityMatrix,
    sample_times: &[f64],
    options: OracleOptions,
) -> Result<Vec<BipartiteDensityMatrix>> {
    params.validate()?;
    if rho0.n_max != n_max {
        return Err(Error::Mismatch(format!("initial state cutoff {} differs from {n_max}", rho0.n_max)));
    }
    let m = n_max + 1;
    let d = 2 * m;
    let ops = build_operators(params, n_max);
    let kappa = params.kappa;
    let mut scratch = vec![C64::default(); d * d];
    let mut rhs = |t: f64, rho: &[C64], out: &mut [C64]| {
        out.iter_mut().for_each(|v| *v = C64::default());
        if !options.suppress_hamiltonian {
            let mi = C64::new(0.0, -1.0);
            let pi = C64::new(0.0, 1.0);
            ops.h0.left(mi, rho, out, d);
            ops.h0.right(pi, rho, out, d);
            let a = params.vector_potential(t);
            let f = params.position_drive(t);
            ops.p.left(mi * a, rho, out, d);
            ops.p.right(pi * a, rho, out, d);
            ops.x.left(mi * f, rho, out, d);
            ops.x.right(pi * f, rho, out, d);
        }
        if kappa > 0.0 {
            let k = C64::new(-kappa, 0.0);
            ops.x2.left(k, rho, out, d);
            ops.x2.right(k, rho, out, d);
            scratch.iter_mut().for_each(|v| *v = C64::default());
            ops.x.left(C64::new(1.0, 0.0), rho, &mut scratch, d);
            ops.x.right(C64::new(2.0 * kappa, 0.0), &scratch, out, d);
        }
    };
    let top = m.saturating_sub(options.leakage_levels);
    let leakage = |rho: &[C64]| -> f64 {
        (0..2).flat_map(|s| (top..m).map(move |n| s * m + n)).map(|i| rho[i * d + i].re).sum()
    };

    // row-major copy of ρ
    let mut y: Vec<C64> = (0..d * d).map(|k| rho0.entries[(k / d, k % d)]).collect();
    let mut solver = DormandPrince::<C64>::new(d * d, Tolerance::uniform(options.tol));
    let mut t = rho0.t;
    let mut out = Vec::with_capacity(sample_times.len());
    let mut leak_failure: Option<(f64, f64)> = None;
    for &ts in sample_times {
        if ts < t {
            return Err(Error::param("sample_times", "must be increasing and not before the initial time"));
        }
        if ts > t {
            solver.integrate(&mut rhs, t, &mut y, ts, |ti, rho| {
                let l = leakage(rho);
                if l > options.leakage_tolerance && leak_failure.is_none() {
                    leak_failure = Some((ti, l));
                }
                false
            })?;
            t = ts;
        }
        if let Some((_, l)) = leak_failure {
            return Err(Error::FockLeakage { n_max, leakage: l, tolerance: options.leakage_tolerance });
        }
        let entries = DMatrix::from_fn(d, d, |i, j| y[i * d + j]);
        let herm = (&entries - entries.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tr = entries.trace();
        if herm > 1e-9 || (tr - 1.0).norm() > 1e-9 {
            return Err(Error::Numerical(format!(
                "oracle lost Hermiticity ({herm:e}) or trace ({tr}) at t = {t}"
            )));
        }
        let entries = (&entries + entries.adjoint()) * C64::new(0.5, 0.0);
        let rho = BipartiteDensityMatrix { n_max, entries, t, n_trajectories: 0 };
        let min_eig = rho.min_eigenvalue();
        if min_eig < -1e-8 {
            return Err(Error::Numerical(format!("oracle state lost positivity (eigenvalue {min_eig:e}) at t = {t}")));
        }
        out.push(rho);
    }
    Ok(out)
}
