//! Physical parameters and closed-form model quantities.
//!
//! The driven Hamiltonian in quadrature form is
//!
//! ```text
//! H = (p + A(t))²/2 + x²/2 + (Ω/2)σ_z + (√2 g σ_x + √2 η(t) cos(ω_d t)) x
//! η(t) = η₀ cos(ω_c t),   A(t) = √2 η(t) sin(ω_d t)
//! ```
//!
//! with the c-number `-A(t)²/2` dropped (it only contributes a global phase).

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// All physical constants of the model.
///
/// Serialized field names are fixed (`omega`, `Omega`, `g`, `eta0`,
/// `omega_c`, `omega_d`, `kappa`); unknown keys are rejected and values are
/// validated on deserialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawParams")]
pub struct ModelParams {
    /// Mode frequency; always 1 (it sets the energy scale).
    pub omega: f64,
    /// Qubit transition frequency Ω.
    #[serde(rename = "Omega")]
    pub qubit_frequency: f64,
    /// Qubit-field coupling.
    pub g: f64,
    /// Peak pump amplitude η₀.
    pub eta0: f64,
    /// Amplitude-modulation angular frequency.
    pub omega_c: f64,
    /// Drive carrier angular frequency.
    pub omega_d: f64,
    /// Quadrature-measurement (decoherence) rate.
    pub kappa: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    omega: f64,
    #[serde(rename = "Omega")]
    qubit_frequency: f64,
    g: f64,
    eta0: f64,
    omega_c: f64,
    omega_d: f64,
    kappa: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        let p = ModelParams {
            omega: r.omega,
            qubit_frequency: r.qubit_frequency,
            g: r.g,
            eta0: r.eta0,
            omega_c: r.omega_c,
            omega_d: r.omega_d,
            kappa: r.kappa,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Which branch of the adiabatic potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdiabaticBranch {
    Lower,
    Upper,
}

/// Which well of the double-well potential an initial state occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Minimum {
    Left,
    #[default]
    Right,
}

impl Minimum {
    pub fn sign(self) -> f64 {
        match self {
            Minimum::Left => -1.0,
            Minimum::Right => 1.0,
        }
    }
}

/// A fixed point of the undriven mean-field dynamics on the lower branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub x: f64,
    pub stable: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl ModelParams {
    /// Ω = ω_d = 1, ω_c = g = 1.5, η₀ = 3, no decoherence.
    pub fn reference() -> Self {
        ModelParams {
            omega: 1.0,
            qubit_frequency: 1.0,
            g: 1.5,
            eta0: 3.0,
            omega_c: 1.5,
            omega_d: 1.0,
            kappa: 0.0,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_eta0(mut self, eta0: f64) -> Self {
        self.eta0 = eta0;
        self
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega", self.omega),
            ("Omega", self.qubit_frequency),
            ("g", self.g),
            ("eta0", self.eta0),
            ("omega_c", self.omega_c),
            ("omega_d", self.omega_d),
            ("kappa", self.kappa),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::param(name, format!("must be finite, got {v}")));
            }
        }
        if self.omega != 1.0 {
            return Err(Error::param("omega", format!("the mode frequency is the unit of energy and must be 1, got {}", self.omega)));
        }
        if self.kappa < 0.0 {
            return Err(Error::param("kappa", format!("must be non-negative, got {}", self.kappa)));
        }
        Ok(())
    }

    /// η(t) = η₀ cos(ω_c t).
    pub fn drive_amplitude(&self, t: f64) -> f64 {
        self.eta0 * (self.omega_c * t).cos()
    }

    /// Momentum shift A(t) = √2 η(t) sin(ω_d t) of the kinetic term.
    pub fn vector_potential(&self, t: f64) -> f64 {
        SQRT_2 * self.drive_amplitude(t) * (self.omega_d * t).sin()
    }

    /// Coefficient √2 η(t) cos(ω_d t) of the drive term linear in x.
    pub fn position_drive(&self, t: f64) -> f64 {
        SQRT_2 * self.drive_amplitude(t) * (self.omega_d * t).cos()
    }

    /// Half the adiabatic gap, √(Ω²/4 + 2g²x²).
    pub fn adiabatic_half_gap(&self, x: f64) -> f64 {
        let a = 0.5 * self.qubit_frequency;
        (a * a + 2.0 * self.g * self.g * x * x).sqrt()
    }

    /// V±(x, t) = x²/2 + √2 η(t) cos(ω_d t) x ± √(Ω²/4 + 2g²x²).
    pub fn adiabatic_potential(&self, branch: AdiabaticBranch, x: f64, t: f64) -> f64 {
        let base = 0.5 * x * x + self.position_drive(t) * x;
        let gap = self.adiabatic_half_gap(x);
        match branch {
            AdiabaticBranch::Lower => base - gap,
            AdiabaticBranch::Upper => base + gap,
        }
    }

    /// Positive symmetric-broken fixed point g√(2 − Ω²/(8g⁴)), or `None`
    /// at or below the pitchfork threshold g² = Ω/4.
    pub fn bifurcated_position(&self) -> Option<f64> {
        let g2 = self.g * self.g;
        let omega = self.qubit_frequency.abs();
        if g2 <= omega / 4.0 {
            return None;
        }
        Some(self.g.abs() * (2.0 - omega * omega / (8.0 * g2 * g2)).sqrt())
    }

    /// Fixed points of the undriven (η₀ = 0) mean-field flow with the qubit on
    /// the lower adiabatic branch, sorted by position.
    pub fn fixed_points(&self) -> Vec<FixedPoint> {
        match self.bifurcated_position() {
            None => vec![FixedPoint { x: 0.0, stable: true }],
            Some(xs) => vec![
                FixedPoint { x: -xs, stable: true },
                FixedPoint { x: 0.0, stable: false },
                FixedPoint { x: xs, stable: true },
            ],
        }
    }

    /// Real, normalized eigenvector `[c_e, c_g]` of
    /// `[[Ω/2, √2 g x], [√2 g x, −Ω/2]]` for the eigenvalue
    /// `−√(Ω²/4 + 2g²x²)`; the first non-zero component is positive.
    pub fn lower_adiabatic_qubit_state(&self, x: f64) -> [f64; 2] {
        let a = 0.5 * self.qubit_frequency;
        let b = SQRT_2 * self.g * x;
        let r = (a * a + b * b).sqrt();
        if r == 0.0 {
            return [0.0, 1.0];
        }
        // Both forms solve the eigen-equation; pick the one without cancellation.
        let (v0, v1) = if a >= 0.0 { (-b, a + r) } else { (a - r, b) };
        let n = v0.hypot(v1);
        let (mut v0, mut v1) = (v0 / n, v1 / n);
        let lead = if v0 != 0.0 { v0 } else { v1 };
        if lead < 0.0 {
            v0 = -v0;
            v1 = -v1;
        }
        [v0, v1]
    }

    /// Period of the Hamiltonian from the commensurability of the drive
    /// frequencies ω_c ± ω_d, if they are commensurate.
    pub fn drive_period(&self) -> Option<f64> {
        let freqs = [self.omega_c + self.omega_d, (self.omega_c - self.omega_d).abs()];
        let mut acc: Option<(u64, u64)> = None;
        for f in freqs.into_iter().map(f64::abs).filter(|f| *f > 1e-12) {
            let (p, q) = rationalize(f, 64)?;
            acc = Some(match acc {
                None => (p, q),
                Some((p0, q0)) => {
                    let num = gcd(p0 * q, p * q0);
                    let den = q0 * q;
                    let k = gcd(num, den);
                    (num / k, den / k)
                }
            });
        }
        let (p, q) = acc?;
        Some(2.0 * PI * q as f64 / p as f64)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn rationalize(f: f64, max_den: u64) -> Option<(u64, u64)> {
    (1..=max_den).find_map(|q| {
        let fq = f * q as f64;
        let p = fq.round();
        ((fq - p).abs() < 1e-9 * fq.max(1.0) && p >= 1.0).then_some((p as u64, q))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn drive_amplitude_values() {
        let p = ModelParams::reference();
        assert_abs_diff_eq!(p.drive_amplitude(0.0), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.drive_amplitude(PI / 3.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.drive_amplitude(2.0 * PI / 3.0), -3.0, epsilon = 1e-14);
    }

    #[test]
    fn vector_potential_values() {
        let p = ModelParams::reference();
        assert_eq!(p.vector_potential(0.0), 0.0);
        // √2·3·cos(3π/4)·sin(π/2) = −3
        assert_abs_diff_eq!(p.vector_potential(PI / 2.0), -3.0, epsilon = 1e-13);
        let undriven = p.with_eta0(0.0);
        for t in [0.3, 1.7, 12.0] {
            assert_eq!(undriven.vector_potential(t), 0.0);
        }
    }

    #[test]
    fn adiabatic_potential_values() {
        let p = ModelParams::reference();
        assert_abs_diff_eq!(p.adiabatic_potential(AdiabaticBranch::Lower, 0.0, 1.3), -0.5, epsilon = 1e-15);
        let u = p.with_eta0(0.0);
        let v = u.adiabatic_potential(AdiabaticBranch::Lower, 1.0, 0.0);
        assert_abs_diff_eq!(v, 0.5 - (0.25f64 + 4.5).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(v, -1.67945, epsilon = 1e-5);
    }

    fn count_local_minima(p: &ModelParams) -> usize {
        let xs: Vec<f64> = (0..4001).map(|i| -10.0 + i as f64 * 0.005).collect();
        let v: Vec<f64> = xs.iter().map(|&x| p.adiabatic_potential(AdiabaticBranch::Lower, x, 0.0)).collect();
        (1..v.len() - 1).filter(|&i| v[i] < v[i - 1] && v[i] < v[i + 1]).count()
    }

    #[test]
    fn double_well_above_threshold() {
        let base = ModelParams::reference().with_eta0(0.0);
        assert_eq!(count_local_minima(&base), 2);
        assert_eq!(count_local_minima(&base.with_g(0.6)), 2);
        assert_eq!(count_local_minima(&base.with_g(0.4)), 1);
    }

    #[test]
    fn fixed_point_values() {
        let p = ModelParams::reference();
        let below = p.with_g(0.4).fixed_points();
        assert_eq!(below, vec![FixedPoint { x: 0.0, stable: true }]);
        let fp = p.fixed_points();
        assert_eq!(fp.len(), 3);
        assert_abs_diff_eq!(fp[2].x, 2.10819, epsilon = 1e-5);
        assert_abs_diff_eq!(fp[0].x, -fp[2].x);
        assert!(!fp[1].stable && fp[0].stable && fp[2].stable);
        // degenerate threshold g² = Ω/4
        assert_eq!(p.with_g(0.5).fixed_points(), vec![FixedPoint { x: 0.0, stable: true }]);
    }

    #[test]
    fn fixed_points_are_extrema_of_lower_potential() {
        let p = ModelParams::reference().with_eta0(0.0);
        let xs = p.bifurcated_position().unwrap();
        let h = 1e-5;
        let dv = (p.adiabatic_potential(AdiabaticBranch::Lower, xs + h, 0.0)
            - p.adiabatic_potential(AdiabaticBranch::Lower, xs - h, 0.0))
            / (2.0 * h);
        assert!(dv.abs() < 1e-8);
    }

    fn eigen_residual(p: &ModelParams, x: f64, v: [f64; 2]) -> f64 {
        let a = 0.5 * p.qubit_frequency;
        let b = SQRT_2 * p.g * x;
        let lam = -p.adiabatic_half_gap(x);
        let r0 = a * v[0] + b * v[1] - lam * v[0];
        let r1 = b * v[0] - a * v[1] - lam * v[1];
        r0.hypot(r1)
    }

    #[test]
    fn lower_qubit_state_limits() {
        let p = ModelParams::reference();
        assert_eq!(p.lower_adiabatic_qubit_state(0.0), [0.0, 1.0]);
        let far = p.lower_adiabatic_qubit_state(1e8);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(far[0], s, epsilon = 1e-8);
        assert_abs_diff_eq!(far[1], -s, epsilon = 1e-8);
    }

    #[test]
    fn lower_qubit_state_at_fixed_point_matches_2x2_solve() {
        let p = ModelParams::reference();
        let xs = p.bifurcated_position().unwrap();
        let v = p.lower_adiabatic_qubit_state(xs);
        // independent oracle: nalgebra symmetric eigensolve
        let b = SQRT_2 * p.g * xs;
        let m = nalgebra::Matrix2::new(0.5, b, b, -0.5);
        let eig = m.symmetric_eigen();
        let i = if eig.eigenvalues[0] < eig.eigenvalues[1] { 0 } else { 1 };
        let mut e = [eig.eigenvectors[(0, i)], eig.eigenvectors[(1, i)]];
        if e[0] < 0.0 {
            e = [-e[0], -e[1]];
        }
        assert_abs_diff_eq!(v[0], e[0], epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], e[1], epsilon = 1e-12);
    }

    #[test]
    fn stroboscopic_period_from_commensurability() {
        assert_abs_diff_eq!(ModelParams::reference().drive_period().unwrap(), 4.0 * PI, epsilon = 1e-12);
        let mut constant = ModelParams::reference();
        constant.omega_c = 0.0;
        assert_abs_diff_eq!(constant.drive_period().unwrap(), 2.0 * PI, epsilon = 1e-12);
        let mut odd = ModelParams::reference();
        odd.omega_c = std::f64::consts::E;
        assert!(odd.drive_period().is_none());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = ModelParams::reference().with_kappa(0.05);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"Omega\":1.0"));
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let unknown = s.replace("\"kappa\"", "\"kapa\"");
        assert!(serde_json::from_str::<ModelParams>(&unknown).is_err());
        let negative = s.replace("0.05", "-0.05");
        assert!(serde_json::from_str::<ModelParams>(&negative).is_err());
        let bad_omega = s.replacen("\"omega\":1.0", "\"omega\":2.0", 1);
        assert!(serde_json::from_str::<ModelParams>(&bad_omega).is_err());
    }

    proptest! {
        #[test]
        fn adiabatic_gap_never_closes(x in -50.0f64..50.0, t in 0.0f64..100.0, g in -3.0f64..3.0, om in 0.01f64..5.0) {
            let mut p = ModelParams::reference().with_g(g);
            p.qubit_frequency = om;
            let gap = p.adiabatic_potential(AdiabaticBranch::Upper, x, t) - p.adiabatic_potential(AdiabaticBranch::Lower, x, t);
            prop_assert!((gap - 2.0 * p.adiabatic_half_gap(x)).abs() <= 1e-9 * gap.abs().max(1.0));
            prop_assert!(gap >= om * (1.0 - 1e-12));
        }

        #[test]
        fn lower_qubit_state_is_normalized_eigenvector(x in -30.0f64..30.0, g in -3.0f64..3.0, om in -3.0f64..3.0) {
            let mut p = ModelParams::reference().with_g(g);
            p.qubit_frequency = om;
            let v = p.lower_adiabatic_qubit_state(x);
            prop_assert!(((v[0] * v[0] + v[1] * v[1]) - 1.0).abs() < 1e-14);
            prop_assert!(eigen_residual(&p, x, v) < 1e-12 * p.adiabatic_half_gap(x).max(1.0));
        }
    }
}
