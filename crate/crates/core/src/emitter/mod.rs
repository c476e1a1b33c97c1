//! The doubly driven three-level emitter in the doubly-rotating frame.
//!
//! Levels are indexed `|1>, |2>, |3>` (array slots 0, 1, 2). `{|1>, |2>}` is
//! the protected qubit and `|3>` the auxiliary level. The noise shifts level
//! `|2>` by `-delta(t)` and level `|3>` by `+s delta(t)`; the two drives at
//! detunings `+-Delta` on the `2 <-> 3` transition combine to
//! `sqrt(2) Omega cos(Delta t)`.

mod bessel;

use std::f64::consts::{PI, SQRT_2};

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseTrace;

pub use bessel::{bessel_j0, J0_FIRST_ZERO};

/// Weak transverse probe on the `1 <-> 2` transition (rotating-wave form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Probe amplitude `g`.
    pub g: f64,
    /// Probe detuning `omega_p - omega_2`.
    pub delta_omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterConfig {
    /// Sensitivity of level 3 relative to level 2.
    pub s: f64,
    /// Drive detuning `Delta`.
    pub delta_drive: f64,
    /// Drive amplitude `Omega`.
    pub omega_drive: f64,
    /// Energy relaxation rate of the qubit.
    pub gamma: f64,
    pub protection_on: bool,
    pub probe: Option<ProbeConfig>,
}

impl EmitterConfig {
    /// Undriven emitter: only the noise acts.
    pub fn unprotected(s: f64) -> Self {
        EmitterConfig { s, delta_drive: 0.0, omega_drive: 0.0, gamma: 0.0, protection_on: false, probe: None }
    }

    /// Protection drives at detuning `delta_drive` with the amplitude fixed
    /// by the Bessel protection condition.
    pub fn protected(s: f64, delta_drive: f64) -> Result<Self> {
        let ratio = protection_ratio(s)?;
        let cfg = EmitterConfig {
            s,
            delta_drive,
            omega_drive: ratio * delta_drive,
            gamma: 0.0,
            protection_on: true,
            probe: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_probe(mut self, probe: ProbeConfig) -> Self {
        self.probe = Some(probe);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s.is_finite() && self.s >= 1.0) {
            return Err(Error::invalid(format!("sensitivity s must be >= 1, got {}", self.s)));
        }
        if self.protection_on && !(self.delta_drive.is_finite() && self.delta_drive > 0.0) {
            return Err(Error::invalid(format!(
                "drive detuning must be > 0 when protection is on, got {}",
                self.delta_drive
            )));
        }
        if !(self.omega_drive.is_finite() && self.omega_drive >= 0.0) {
            return Err(Error::invalid(format!("drive amplitude must be >= 0, got {}", self.omega_drive)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid(format!("decay rate must be >= 0, got {}", self.gamma)));
        }
        if let Some(p) = self.probe {
            if !(p.g.is_finite() && p.g >= 0.0 && p.delta_omega.is_finite()) {
                return Err(Error::invalid("probe amplitude must be >= 0 and detuning finite"));
            }
        }
        Ok(())
    }

    /// Period of the protection drive, if it is on.
    pub fn drive_period(&self) -> Option<f64> {
        (self.protection_on && self.delta_drive > 0.0).then(|| 2.0 * PI / self.delta_drive)
    }
}

/// Smallest positive `r = Omega/Delta` with `J0(2 sqrt(2) r) = (s-1)/(s+1)`.
///
/// The right-hand side lies in `[0, 1)`, so exactly one root exists in
/// `(0, j01 / (2 sqrt 2)]`; it is found by bisection.
pub fn protection_ratio(s: f64) -> Result<f64> {
    if !(s.is_finite() && s >= 1.0) {
        return Err(Error::invalid(format!("sensitivity s must be >= 1, got {s}")));
    }
    let target = (s - 1.0) / (s + 1.0);
    let f = |r: f64| bessel_j0(2.0 * SQRT_2 * r) - target;
    let mut lo = 0.0f64; // f(lo) > 0
    let mut hi = J0_FIRST_ZERO / (2.0 * SQRT_2); // f(hi) <= 0
    if f(hi) >= 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Return whichever bracket end has the smaller residual.
    Ok(if f(lo).abs() < f(hi).abs() { lo } else { hi })
}

/// Linearised ac-Stark shift of level 2: `(Omega/Delta)^2 s delta`.
pub fn stark_shift_linear(omega: f64, delta: f64, s: f64, dv: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("drive detuning must be > 0, got {delta}")));
    }
    let r = omega / delta;
    Ok(r * r * s * dv)
}

/// Two-drive ac-Stark shift before linearisation:
/// `-Omega^2 / (2 (Delta + s delta)) + Omega^2 / (2 (Delta - s delta))`.
pub fn stark_shift_exact(omega: f64, delta: f64, s: f64, dv: f64) -> Result<f64> {
    let x = s * dv;
    let denom = delta * delta - x * x;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Singularity(format!("|s delta| = Delta = {delta}")));
    }
    Ok(omega * omega * x / denom)
}

/// One row of the protection-condition table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtectionRow {
    pub s: f64,
    /// `(s - 1)/(s + 1)`.
    pub rhs: f64,
    /// Root `Omega/Delta`.
    pub ratio: f64,
    /// Large-`s` asymptote `1/sqrt(s + 1)`.
    pub asymptote: f64,
    /// `|J0(2 sqrt 2 ratio) - rhs|`.
    pub residual: f64,
}

/// Tabulates `protection_ratio` against its large-`s` asymptote.
pub fn protection_table(s_values: &[f64]) -> Result<Vec<ProtectionRow>> {
    s_values
        .iter()
        .map(|&s| {
            let ratio = protection_ratio(s)?;
            let rhs = (s - 1.0) / (s + 1.0);
            Ok(ProtectionRow {
                s,
                rhs,
                ratio,
                asymptote: 1.0 / (s + 1.0).sqrt(),
                residual: (bessel_j0(2.0 * SQRT_2 * ratio) - rhs).abs(),
            })
        })
        .collect()
}

/// Pauli axis of a square gate pulse acting on the qubit subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseAxis {
    X,
    Y,
}

/// Square pulse `rabi * A` on `{|1>, |2>}` active for `t` in `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquarePulse {
    pub axis: PulseAxis,
    pub rabi: f64,
    pub start: f64,
    pub end: f64,
}

impl SquarePulse {
    /// Coefficient of `|1><2|` contributed by this pulse (Hermitian
    /// conjugate implied).
    pub fn coupling(&self) -> Complex64 {
        match self.axis {
            PulseAxis::X => Complex64::new(self.rabi, 0.0),
            PulseAxis::Y => Complex64::new(0.0, -self.rabi),
        }
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// An evaluated 3x3 Hamiltonian with the sparsity of this model: diagonal
/// level shifts, a complex `1 <-> 2` coupling and a real `2 <-> 3` coupling.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Hamiltonian3 {
    pub diag: [f64; 3],
    /// Coefficient of `|1><2|`; `|2><1|` carries the conjugate.
    pub c12: Complex64,
    /// Coefficient of `|2><3|` and `|3><2|`.
    pub c23: f64,
}

impl Hamiltonian3 {
    #[inline]
    pub fn apply(&self, psi: &[Complex64; 3]) -> [Complex64; 3] {
        [
            psi[0] * self.diag[0] + self.c12 * psi[1],
            self.c12.conj() * psi[0] + psi[1] * self.diag[1] + psi[2] * self.c23,
            psi[1] * self.c23 + psi[2] * self.diag[2],
        ]
    }

    /// `H * rho` exploiting the sparsity of `H`.
    #[inline]
    pub fn left_mul(&self, rho: &Matrix3<Complex64>) -> Matrix3<Complex64> {
        let c21 = self.c12.conj();
        let mut out = Matrix3::zeros();
        for j in 0..3 {
            out[(0, j)] = rho[(0, j)] * self.diag[0] + self.c12 * rho[(1, j)];
            out[(1, j)] = c21 * rho[(0, j)] + rho[(1, j)] * self.diag[1] + rho[(2, j)] * self.c23;
            out[(2, j)] = rho[(1, j)] * self.c23 + rho[(2, j)] * self.diag[2];
        }
        out
    }

    pub fn to_matrix(&self) -> Matrix3<Complex64> {
        let c = |x: f64| Complex64::new(x, 0.0);
        Matrix3::new(
            c(self.diag[0]),
            self.c12,
            Complex64::new(0.0, 0.0),
            self.c12.conj(),
            c(self.diag[1]),
            c(self.c23),
            Complex64::new(0.0, 0.0),
            c(self.c23),
            c(self.diag[2]),
        )
    }
}

/// Everything needed to evaluate `H(t)` for one noise realisation.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianSpec<'a> {
    pub emitter: &'a EmitterConfig,
    pub noise: &'a NoiseTrace,
    pub pulses: &'a [SquarePulse],
}

impl<'a> HamiltonianSpec<'a> {
    pub fn new(emitter: &'a EmitterConfig, noise: &'a NoiseTrace) -> Self {
        HamiltonianSpec { emitter, noise, pulses: &[] }
    }

    pub fn with_pulses(mut self, pulses: &'a [SquarePulse]) -> Self {
        self.pulses = pulses;
        self
    }

    /// `H(t)` with the sample-and-hold noise value at `t`.
    pub fn hamiltonian_at(&self, t: f64) -> Result<Matrix3<Complex64>> {
        let delta = self.noise.value_at(t)?;
        Ok(self.evaluate(t, delta, self.pulse_coupling(t)).to_matrix())
    }

    /// Shortest oscillation period present: protection drive and its Rabi
    /// cycle (`pi / (sqrt 2 omega)`), gate Rabi cycles (`pi / rabi`) and probe
    /// rotation (`2 pi / |delta_omega|`).
    pub fn fast_period(&self) -> Option<f64> {
        let mut periods = Vec::with_capacity(self.pulses.len() + 3);
        if let Some(p) = self.emitter.drive_period() {
            periods.push(p);
            if self.emitter.omega_drive > 0.0 {
                periods.push(PI / (SQRT_2 * self.emitter.omega_drive));
            }
        }
        periods.extend(self.pulses.iter().filter(|p| p.rabi > 0.0).map(|p| PI / p.rabi));
        if let Some(p) = self.emitter.probe {
            if p.g != 0.0 && p.delta_omega != 0.0 {
                periods.push(2.0 * PI / p.delta_omega.abs());
            }
        }
        periods.into_iter().reduce(f64::min)
    }

    /// Sum of the `|1><2|` couplings of the pulses active at `t`.
    pub fn pulse_coupling(&self, t: f64) -> Complex64 {
        self.pulses.iter().filter(|p| p.is_active(t)).map(SquarePulse::coupling).sum()
    }

    /// `H` at time `t` given the noise value and static pulse coupling of the
    /// current integration piece.
    #[inline]
    pub fn evaluate(&self, t: f64, delta: f64, pulse: Complex64) -> Hamiltonian3 {
        let e = self.emitter;
        let mut h = Hamiltonian3 { diag: [0.0, -delta, e.s * delta], c12: pulse, c23: 0.0 };
        if e.protection_on {
            h.c23 = SQRT_2 * e.omega_drive * (e.delta_drive * t).cos();
        }
        if let Some(p) = e.probe {
            if p.g != 0.0 {
                h.c12 += Complex64::from_polar(0.5 * p.g, -p.delta_omega * t);
            }
        }
        h
    }
}
