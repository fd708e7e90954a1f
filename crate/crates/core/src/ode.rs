//! Adaptive Dormand–Prince 5(4) integrator with embedded error control.
//!
//! The solver owns its stage buffers so repeated integrations (one per
//! ensemble member, one per renormalization interval) do not allocate.

use std::ops::{Add, Mul};

use crate::error::{Error, Result};
use crate::C64;

/// Scalars the integrator can advance.
pub trait OdeScalar: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(self) -> f64;
}

impl OdeScalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for C64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th-order minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    pub fn uniform(tol: f64) -> Self {
        Tolerance { rtol: tol, atol: tol }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Workspace for Dormand–Prince integration of a system of fixed dimension.
#[derive(Debug, Clone)]
pub struct DormandPrince<T: OdeScalar = f64> {
    tol: Tolerance,
    k: [Vec<T>; 7],
    stage: Vec<T>,
    y_new: Vec<T>,
    /// Step size carried between calls; `None` picks a starting guess.
    h: Option<f64>,
    pub max_step: f64,
    pub stats: Stats,
}

impl<T: OdeScalar> DormandPrince<T> {
    pub fn new(dim: usize, tol: Tolerance) -> Self {
        DormandPrince {
            tol,
            k: std::array::from_fn(|_| vec![T::default(); dim]),
            stage: vec![T::default(); dim],
            y_new: vec![T::default(); dim],
            h: None,
            max_step: f64::INFINITY,
            stats: Stats::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.stage.len()
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    /// Forget the carried step size (use when restarting on a new trajectory).
    pub fn reset(&mut self) {
        self.h = None;
    }

    /// Advance `y` from `t0` to `t1` (`t1 > t0`).
    ///
    /// `after_step(t, y)` runs after every accepted step and returns `true`
    /// if it modified `y`.
    pub fn integrate<F, P>(&mut self, mut rhs: F, t0: f64, y: &mut [T], t1: f64, mut after_step: P) -> Result<()>
    where
        F: FnMut(f64, &[T], &mut [T]),
        P: FnMut(f64, &mut [T]) -> bool,
    {
        assert_eq!(y.len(), self.dim(), "state dimension mismatch");
        if !(t1 > t0) {
            return Err(Error::param("t1", format!("integration end {t1} must exceed start {t0}")));
        }
        let span = t1 - t0;
        let mut t = t0;
        let mut h = self.h.unwrap_or(span.min(1e-3)).min(self.max_step).min(span);
        rhs(t, y, &mut self.k[0]);
        self.stats.evaluations += 1;
        loop {
            let remaining = t1 - t;
            if remaining <= 1e-14 * t1.abs().max(1.0) {
                break;
            }
            let last = h >= remaining;
            let h_try = if last { remaining } else { h };
            if h_try < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h: h_try });
            }
            let err = self.attempt(&mut rhs, t, y, h_try);
            if !err.is_finite() {
                h *= 0.1;
                self.stats.rejected += 1;
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::NonFinite { t, context: "derivative evaluation".into() });
                }
                continue;
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h_try };
                y.copy_from_slice(&self.y_new);
                self.stats.accepted += 1;
                if after_step(t, y) {
                    rhs(t, y, &mut self.k[0]);
                    self.stats.evaluations += 1;
                } else {
                    // first-same-as-last
                    self.k.swap(0, 6);
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || factor < 1.0 {
                    h = (h_try * factor).min(self.max_step);
                }
            } else {
                self.stats.rejected += 1;
                h = h_try * (0.9 * err.powf(-0.2)).max(0.1);
            }
        }
        self.h = Some(h);
        Ok(())
    }

    /// One trial step; fills `y_new` and `k[6]`, returns the scaled error norm.
    fn attempt<F>(&mut self, rhs: &mut F, t: f64, y: &[T], h: f64) -> f64
    where
        F: FnMut(f64, &[T], &mut [T]),
    {
        let n = y.len();
        macro_rules! stage {
            ($dst:expr, $tc:expr, $($a:expr => $ki:expr),+) => {{
                for i in 0..n {
                    let mut acc = y[i];
                    $( acc = acc + self.k[$ki][i] * (h * $a); )+
                    self.stage[i] = acc;
                }
                let (stage, k) = (&self.stage, &mut self.k[$dst]);
                rhs(t + $tc * h, stage, k);
            }};
        }
        stage!(1, C2, A21 => 0);
        stage!(2, C3, A31 => 0, A32 => 1);
        stage!(3, C4, A41 => 0, A42 => 1, A43 => 2);
        stage!(4, C5, A51 => 0, A52 => 1, A53 => 2, A54 => 3);
        stage!(5, 1.0, A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4);
        for i in 0..n {
            let k = &self.k;
            self.y_new[i] = y[i] + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * h;
        }
        {
            let (y_new, k6) = (&self.y_new, &mut self.k[6]);
            rhs(t + h, y_new, k6);
        }
        self.stats.evaluations += 6;
        let mut sum = 0.0;
        for i in 0..n {
            let k = &self.k;
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
            let scale = self.tol.atol + self.tol.rtol * y[i].magnitude().max(self.y_new[i].magnitude());
            let r = e.magnitude() / scale;
            sum += r * r;
        }
        (sum / n as f64).sqrt()
    }
}
