//! Square-pulse single-qubit gates under telegraph noise, simulated state
//! tomography and linear-inversion process tomography in the Pauli basis.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::emitter::{EmitterConfig, HamiltonianSpec, PulseAxis, SquarePulse};
use crate::error::{Error, Result};
use crate::experiments::make_trace;
use crate::experiments::NoiseModel;
use crate::linalg::{pauli, pauli_components, project_psd2, project_psd4, trace2, Mat2, Mat4};
use crate::noise::{NoiseTrace, RTNParams};
use crate::parallel::{derive_seed, ordered_map};
use crate::propagator::{evolve_pure, PureState, StepControl};

pub type ChiMatrix = Mat4;

/// How a rotation angle maps to a pulse duration for `H = rabi * A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseConvention {
    /// `duration = theta / (2 rabi)`, so the noise-free pulse is exactly
    /// `exp(-i theta A / 2)`.
    #[default]
    GateExact,
    /// `duration = theta / rabi` (pulse area equal to the angle).
    AreaEqualsAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub axis: PulseAxis,
    pub angle: f64,
}

/// A gate as a time-ordered list of square rotation pulses played back to
/// back from `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub rotations: Vec<Rotation>,
    pub rabi: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub convention: PulseConvention,
}

impl GateSpec {
    pub fn x_pi(rabi: f64) -> Self {
        GateSpec {
            rotations: vec![Rotation { axis: PulseAxis::X, angle: PI }],
            rabi,
            start: 0.0,
            convention: PulseConvention::GateExact,
        }
    }

    /// `R_X(pi) R_Y(pi/2)`: the Y pulse is played first.
    pub fn hadamard(rabi: f64) -> Self {
        GateSpec {
            rotations: vec![
                Rotation { axis: PulseAxis::Y, angle: PI / 2.0 },
                Rotation { axis: PulseAxis::X, angle: PI },
            ],
            rabi,
            start: 0.0,
            convention: PulseConvention::GateExact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotations.is_empty() {
            return Err(Error::invalid("gate needs at least one rotation"));
        }
        if !(self.rabi.is_finite() && self.rabi > 0.0) {
            return Err(Error::invalid(format!("gate rabi must be > 0, got {}", self.rabi)));
        }
        if !(self.start.is_finite() && self.start >= 0.0) {
            return Err(Error::invalid("gate start must be >= 0"));
        }
        for r in &self.rotations {
            if !(r.angle > 0.0 && r.angle <= 2.0 * PI) {
                return Err(Error::invalid(format!("rotation angle {} outside (0, 2 pi]", r.angle)));
            }
        }
        Ok(())
    }

    fn duration_of(&self, angle: f64) -> f64 {
        match self.convention {
            PulseConvention::GateExact => angle / (2.0 * self.rabi),
            PulseConvention::AreaEqualsAngle => angle / self.rabi,
        }
    }

    pub fn pulses(&self) -> Vec<SquarePulse> {
        let mut t = self.start;
        self.rotations
            .iter()
            .map(|r| {
                let end = t + self.duration_of(r.angle);
                let p = SquarePulse { axis: r.axis, rabi: self.rabi, start: t, end };
                t = end;
                p
            })
            .collect()
    }

    /// Time at which the last pulse ends.
    pub fn end_time(&self) -> f64 {
        self.start + self.rotations.iter().map(|r| self.duration_of(r.angle)).sum::<f64>()
    }

    /// Target unitary `R_n(theta_n) ... R_1(theta_1)` on the qubit.
    pub fn ideal_unitary(&self) -> Mat2 {
        self.rotations.iter().fold(Mat2::identity(), |u, r| rotation(r.axis, r.angle) * u)
    }
}

/// `R_A(theta) = exp(-i theta A / 2)`.
pub fn rotation(axis: PulseAxis, theta: f64) -> Mat2 {
    let a = match axis {
        PulseAxis::X => pauli(1),
        PulseAxis::Y => pauli(2),
    };
    let (s, c) = (0.5 * theta).sin_cos();
    pauli(0) * Complex64::new(c, 0.0) - a * Complex64::new(0.0, s)
}

/// Gate-pulse part of `H(t)` as a 3x3 matrix: `rabi * A` on `{|1>, |2>}`
/// for the pulse active at `t`, zero otherwise.
pub fn gate_pulse_hamiltonian(spec: &GateSpec, t: f64) -> Matrix3<Complex64> {
    let c: Complex64 = spec.pulses().iter().filter(|p| p.is_active(t)).map(SquarePulse::coupling).sum();
    let mut m = Matrix3::zeros();
    m[(0, 1)] = c;
    m[(1, 0)] = c.conj();
    m
}

/// Which column of the process comparison to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Pulses only.
    Ideal,
    /// Pulses under telegraph noise.
    Noisy,
    /// Pulses under telegraph noise with the correction drives on.
    Protected,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Ideal, Scenario::Noisy, Scenario::Protected];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Ideal => "ideal",
            Scenario::Noisy => "noisy",
            Scenario::Protected => "protected",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    pub gate: GateSpec,
    pub rtn: RTNParams,
    pub s: f64,
    /// Detuning of the correction drives in the protected scenario.
    pub delta_drive: f64,
    /// Measurements per input state, split evenly over X, Y and Z.
    pub shots: usize,
    /// Use exact expectation values instead of sampled shots.
    pub exact: bool,
    /// Noise realisations averaged per scenario.
    pub n_traces: usize,
    pub master_seed: u64,
    pub noise_dt: Option<f64>,
    pub step: StepControl,
}

/// Default gate Rabi frequency in units of `1/tau`.
pub const DEFAULT_GATE_RABI: f64 = 3.0;

impl TomographyConfig {
    pub fn new(gate: GateSpec) -> Self {
        TomographyConfig {
            gate,
            rtn: RTNParams { xi: 8.0, chi: 1.0 },
            s: 80.0,
            delta_drive: 4000.0,
            shots: 10_000,
            exact: false,
            n_traces: 100,
            master_seed: 0,
            noise_dt: None,
            step: StepControl::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gate.validate()?;
        self.rtn.validate()?;
        if !self.exact && self.shots < 3 {
            return Err(Error::invalid("need at least 3 shots per input state"));
        }
        if self.n_traces == 0 {
            return Err(Error::invalid("n_traces must be >= 1"));
        }
        if !(self.s >= 1.0) {
            return Err(Error::invalid("s must be >= 1"));
        }
        if !(self.delta_drive > 0.0) {
            return Err(Error::invalid("delta_drive must be > 0"));
        }
        self.step.validate()
    }

    fn emitter(&self, scenario: Scenario) -> Result<EmitterConfig> {
        match scenario {
            Scenario::Protected => EmitterConfig::protected(self.s, self.delta_drive),
            _ => Ok(EmitterConfig::unprotected(self.s)),
        }
    }
}

/// The four tomography inputs `|1>, |2>, (|1> + |2>)/sqrt 2, (|1> + i|2>)/sqrt 2`.
pub fn input_states() -> [[Complex64; 2]; 4] {
    let o = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let ri = Complex64::new(0.0, FRAC_1_SQRT_2);
    [[o, z], [z, o], [r, r], [r, ri]]
}

pub fn input_densities() -> [Mat2; 4] {
    input_states().map(crate::linalg::projector)
}

/// Trace-averaged qubit outputs for the four inputs. Each output is the
/// `{|1>, |2>}` block of the final state averaged over noise traces and
/// divided by its trace (level-3 leakage is discarded). Noisy and protected
/// runs share the same telegraph traces.
pub fn simulate_process(cfg: &TomographyConfig, scenario: Scenario) -> Result<[Mat2; 4]> {
    cfg.validate()?;
    let pulses = cfg.gate.pulses();
    let end = cfg.gate.end_time();
    let emitter = cfg.emitter(scenario)?;
    let model = NoiseModel::Rtn(cfg.rtn);
    let dt = cfg.noise_dt.unwrap_or_else(|| model.default_dt(end));
    let n_traces = if scenario == Scenario::Ideal { 1 } else { cfg.n_traces };
    let inputs = input_states();
    let per_trace = ordered_map(n_traces, |i| -> Result<[Mat2; 4]> {
        let trace = match scenario {
            Scenario::Ideal => {
                let n = (end / dt).ceil().max(1.0) as usize;
                NoiseTrace::constant(0.0, end / n as f64, n)?
            }
            _ => make_trace(&model, dt, end, derive_seed(cfg.master_seed, 3, i as u64))?,
        };
        let spec = HamiltonianSpec::new(&emitter, &trace).with_pulses(&pulses);
        let mut out = [Mat2::zeros(); 4];
        for (k, psi) in inputs.iter().enumerate() {
            let start = PureState::new([psi[0], psi[1], Complex64::new(0.0, 0.0)]);
            let ev = evolve_pure(start, &spec, 0.0, end, &cfg.step, &[])?;
            let a = ev.state.amplitudes;
            out[k] = crate::linalg::projector([a[0], a[1]]);
        }
        Ok(out)
    });
    let mut sum = [Mat2::zeros(); 4];
    for res in per_trace {
        let res = res?;
        for k in 0..4 {
            sum[k] += res[k];
        }
    }
    Ok(sum.map(|m| {
        let tr = trace2(&m).re;
        m.unscale(tr)
    }))
}

/// Reconstructs a qubit state from `shots / 3` simulated projective
/// measurements of each of X, Y and Z, by linear inversion followed by
/// projection onto the physical states. `exact` skips the sampling.
pub fn state_tomography(rho: &Mat2, shots: usize, exact: bool, seed: u64) -> Result<Mat2> {
    if exact {
        return Ok(project_psd2(rho));
    }
    if shots < 3 {
        return Err(Error::invalid("state tomography needs at least 3 shots"));
    }
    let per_axis = (shots / 3) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = pauli_components(rho);
    let mut est = Mat2::identity().scale(0.5);
    for (k, comp) in comps.iter().enumerate().skip(1) {
        let p = (0.5 * (1.0 + comp.re)).clamp(0.0, 1.0);
        let bin = Binomial::new(per_axis, p).map_err(|e| Error::Numerical(e.to_string()))?;
        let ups = bin.sample(&mut rng) as f64;
        let mean = 2.0 * ups / per_axis as f64 - 1.0;
        est += pauli(k).scale(0.5 * mean);
    }
    Ok(project_psd2(&est))
}

/// Linear-inversion process matrix plus its physical projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiReconstruction {
    /// Trace-normalised, Hermitian-symmetrised solution.
    pub raw: ChiMatrix,
    /// Nearest positive-semidefinite unit-trace matrix.
    pub projected: ChiMatrix,
}

/// Solves `E(rho) = sum_mn chi_mn P_m rho P_n` from four input/output pairs.
/// The inputs must span the qubit operator space.
pub fn chi_from_io(inputs: &[Mat2; 4], outputs: &[Mat2; 4]) -> Result<ChiReconstruction> {
    // Pauli transfer matrix R with R r_in = r_out, r_k = Tr(P_k rho).
    let mut rin = Mat4::zeros();
    let mut rout = Mat4::zeros();
    for j in 0..4 {
        let ci = pauli_components(&inputs[j]);
        let co = pauli_components(&outputs[j]);
        for k in 0..4 {
            rin[(k, j)] = ci[k];
            rout[(k, j)] = co[k];
        }
    }
    let det = rin.determinant().norm();
    if !(det > 1e-10) {
        return Err(Error::invalid("tomography inputs do not span the operator space"));
    }
    let rin_inv = rin.try_inverse().ok_or_else(|| Error::invalid("singular input matrix"))?;
    let ptm = rout * rin_inv;
    let b = chi_system();
    let rhs = DVector::from_iterator(16, (0..16).map(|row| ptm[(row / 4, row % 4)]));
    let sol = b.lu().solve(&rhs).ok_or_else(|| Error::Numerical("process system is singular".into()))?;
    let mut chi = Mat4::from_fn(|m, n| sol[4 * m + n]);
    chi = crate::linalg::hermitian_part4(&chi);
    let tr: Complex64 = (0..4).map(|k| chi[(k, k)]).sum();
    if !(tr.re.abs() > 1e-12) {
        return Err(Error::Numerical("process matrix has zero trace".into()));
    }
    let raw = chi.unscale(tr.re);
    Ok(ChiReconstruction { projected: project_psd4(&raw), raw })
}

/// `B[(i, j), (m, n)] = Tr(P_i P_m P_j P_n) / 2`.
fn chi_system() -> DMatrix<Complex64> {
    let p: Vec<Mat2> = (0..4).map(pauli).collect();
    DMatrix::from_fn(16, 16, |row, col| {
        let (i, j) = (row / 4, row % 4);
        let (m, n) = (col / 4, col % 4);
        trace2(&(p[i] * p[m] * p[j] * p[n])) * 0.5
    })
}

/// `chi_mn = c_m conj(c_n)` with `U = sum_m c_m P_m`.
pub fn chi_of_unitary(u: &Mat2) -> ChiMatrix {
    let c = pauli_components(u).map(|z| z * 0.5);
    Mat4::from_fn(|m, n| c[m] * c[n].conj())
}

/// `sum_mn chi_mn P_m rho P_n`.
pub fn apply_chi(chi: &ChiMatrix, rho: &Mat2) -> Mat2 {
    let mut out = Mat2::zeros();
    for m in 0..4 {
        let left = pauli(m) * rho;
        for n in 0..4 {
            out += left * pauli(n) * chi[(m, n)];
        }
    }
    out
}

/// `Re Tr(chi_ideal chi)` clipped to `[0, 1]`; both must have unit trace.
pub fn process_fidelity(chi: &ChiMatrix, chi_ideal: &ChiMatrix) -> Result<f64> {
    for (name, m) in [("chi", chi), ("chi_ideal", chi_ideal)] {
        let tr: Complex64 = (0..4).map(|k| m[(k, k)]).sum();
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-6 {
            return Err(Error::invalid(format!("{name} is not trace-normalised (trace {tr})")));
        }
    }
    Ok((chi_ideal * chi).trace().re.clamp(0.0, 1.0))
}

/// One column of the comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub outputs: [Mat2; 4],
    pub chi: ChiReconstruction,
    /// Fidelity of the projected chi to the target gate.
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QptResult {
    /// Process matrix of the target unitary.
    pub chi_target: ChiMatrix,
    pub ideal: ScenarioResult,
    pub noisy: ScenarioResult,
    pub protected: ScenarioResult,
}

/// Runs one scenario: simulation, per-input state tomography (seeded per
/// scenario and input) and process reconstruction.
pub fn run_scenario(cfg: &TomographyConfig, scenario: Scenario) -> Result<ScenarioResult> {
    let truth = simulate_process(cfg, scenario)?;
    let mut outputs = [Mat2::zeros(); 4];
    for k in 0..4 {
        let seed = derive_seed(cfg.master_seed, 4 + scenario.index(), k as u64);
        outputs[k] = state_tomography(&truth[k], cfg.shots, cfg.exact, seed)?;
    }
    let chi = chi_from_io(&input_densities(), &outputs)?;
    let target = chi_of_unitary(&cfg.gate.ideal_unitary());
    let fidelity = process_fidelity(&chi.projected, &target)?;
    Ok(ScenarioResult { scenario, outputs, chi, fidelity })
}

/// Ideal, noisy and protected process matrices for the configured gate.
pub fn qpt_experiment(cfg: &TomographyConfig) -> Result<QptResult> {
    cfg.validate()?;
    Ok(QptResult {
        chi_target: chi_of_unitary(&cfg.gate.ideal_unitary()),
        ideal: run_scenario(cfg, Scenario::Ideal)?,
        noisy: run_scenario(cfg, Scenario::Noisy)?,
        protected: run_scenario(cfg, Scenario::Protected)?,
    })
}
