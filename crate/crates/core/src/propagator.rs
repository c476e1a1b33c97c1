//! Fixed-step RK4 integration of the Schrodinger equation (pure states) and
//! of the GKSL master equation (density matrices) for one noise realisation.
//!
//! The time axis is cut into pieces at every point where `H(t)` may jump
//! (noise grid points, pulse edges) and at every requested sample time.
//! Each piece is split into equal RK4 steps no longer than
//! `fast period / steps_per_drive_period` and `max_step`, where the fast
//! period also accounts for the level splitting on that piece. No step ever
//! straddles a noise-grid boundary, so the noise is constant inside a step.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::emitter::{Hamiltonian3, HamiltonianSpec};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A time-dependent Hamiltonian that is smooth between breakpoints.
pub trait PiecewiseHamiltonian {
    /// Data that is constant on one smooth piece.
    type Piece: Copy;

    /// Interval on which `H` is defined.
    fn span(&self) -> (f64, f64);

    /// Period of the fastest coherent drive, used to size the steps.
    fn fast_period(&self) -> Option<f64>;

    /// Appends the points strictly inside `(t0, t1)` where `H` may jump.
    fn breakpoints(&self, t0: f64, t1: f64, out: &mut Vec<f64>);

    /// Constant data of the smooth piece `[a, b]` (no breakpoint inside).
    fn piece(&self, a: f64, b: f64) -> Self::Piece;

    /// Fastest period on one piece beyond [`fast_period`](Self::fast_period),
    /// e.g. from the level splitting.
    fn piece_period(&self, _piece: &Self::Piece) -> Option<f64> {
        None
    }

    fn eval(&self, piece: &Self::Piece, t: f64) -> Hamiltonian3;
}

impl PiecewiseHamiltonian for HamiltonianSpec<'_> {
    type Piece = (f64, Complex64);

    fn span(&self) -> (f64, f64) {
        (0.0, self.noise.horizon())
    }

    fn fast_period(&self) -> Option<f64> {
        HamiltonianSpec::fast_period(self)
    }

    fn breakpoints(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        let dt = self.noise.dt();
        let first = (t0 / dt).floor() as i64 + 1;
        let mut k = first.max(1);
        loop {
            let t = k as f64 * dt;
            if t >= t1 {
                break;
            }
            if t > t0 {
                out.push(t);
            }
            k += 1;
        }
        for p in self.pulses {
            for edge in [p.start, p.end] {
                if edge > t0 && edge < t1 {
                    out.push(edge);
                }
            }
        }
    }

    fn piece(&self, a: f64, b: f64) -> Self::Piece {
        let mid = 0.5 * (a + b);
        let k = self.noise.cell_index(mid).unwrap_or(self.noise.n_steps() - 1);
        (self.noise.values()[k], self.pulse_coupling(mid))
    }

    /// `2 pi` over the spread of the diagonal: `(s + 1)|delta|` when level 3
    /// is driven, `|delta|` otherwise.
    fn piece_period(&self, piece: &Self::Piece) -> Option<f64> {
        let spread = if self.emitter.protection_on { (self.emitter.s + 1.0) * piece.0.abs() } else { piece.0.abs() };
        (spread > 0.0).then(|| 2.0 * PI / spread)
    }

    #[inline]
    fn eval(&self, piece: &Self::Piece, t: f64) -> Hamiltonian3 {
        self.evaluate(t, piece.0, piece.1)
    }
}

/// Step-size control for the fixed-step integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// RK4 steps per shortest oscillation period of `H` (protection drive,
    /// drive Rabi cycle, gate Rabi cycle, probe rotation); must be >= 8.
    pub steps_per_drive_period: usize,
    /// Upper bound on the step length.
    pub max_step: f64,
    /// Relative error target used by convergence checks.
    pub tolerance: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { steps_per_drive_period: 120, max_step: f64::INFINITY, tolerance: 1e-6 }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_drive_period < 8 {
            return Err(Error::invalid(format!(
                "steps_per_drive_period must be >= 8, got {}",
                self.steps_per_drive_period
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::invalid("max_step must be > 0"));
        }
        Ok(())
    }

    /// Step for a piece whose fastest periods are `global` and `local`.
    fn piece_step(&self, global: Option<f64>, local: Option<f64>) -> f64 {
        let period = match (global, local) {
            (Some(g), Some(l)) => Some(g.min(l)),
            (g, l) => g.or(l),
        };
        self.target_step(period)
    }

    fn target_step(&self, period: Option<f64>) -> f64 {
        let mut h = self.max_step;
        if let Some(p) = period {
            h = h.min(p / self.steps_per_drive_period as f64);
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState {
    pub amplitudes: [Complex64; 3],
}

impl PureState {
    pub fn new(amplitudes: [Complex64; 3]) -> Self {
        PureState { amplitudes }
    }

    /// Basis state `|level>` with `level` in 1..=3.
    pub fn basis(level: usize) -> Self {
        let mut a = [Complex64::new(0.0, 0.0); 3];
        a[level - 1] = Complex64::new(1.0, 0.0);
        PureState { amplitudes: a }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn populations(&self) -> [f64; 3] {
        self.amplitudes.map(|z| z.norm_sqr())
    }

    /// Coherence `rho_12 = psi_1 conj(psi_2)`.
    pub fn coherence_12(&self) -> Complex64 {
        self.amplitudes[0] * self.amplitudes[1].conj()
    }

    pub fn to_density(&self) -> DensityMatrix {
        let a = &self.amplitudes;
        DensityMatrix(Matrix3::from_fn(|i, j| a[i] * a[j].conj()))
    }
}

/// A 3x3 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub Matrix3<Complex64>);

impl DensityMatrix {
    pub fn basis(level: usize) -> Self {
        PureState::basis(level).to_density()
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn population(&self, level: usize) -> f64 {
        self.0[(level - 1, level - 1)].re
    }

    /// Largest entry of `rho - rho^dagger`.
    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Result of a pure-state evolution.
#[derive(Debug, Clone)]
pub struct PureEvolution {
    pub state: PureState,
    /// States at the requested sample times, in order.
    pub samples: Vec<PureState>,
    /// Largest `| |psi|^2 - |psi(t0)|^2 |` seen at piece boundaries.
    pub max_norm_drift: f64,
    pub steps: usize,
    /// Every RK4 step stayed inside a single noise cell.
    pub noise_aligned: bool,
}

/// Result of a density-matrix evolution.
#[derive(Debug, Clone)]
pub struct LindbladEvolution {
    pub state: DensityMatrix,
    pub samples: Vec<DensityMatrix>,
    pub max_trace_drift: f64,
    /// Smallest eigenvalue over the sample times and the final state.
    pub min_eigenvalue: f64,
    pub steps: usize,
    pub noise_aligned: bool,
}

/// Integration pieces `[a, b]` covering `[t0, t1]`, cut at breakpoints and
/// sample times. Also returns, for each piece end, the index of the sample
/// it completes (if any).
fn pieces<H: PiecewiseHamiltonian>(
    ham: &H,
    t0: f64,
    t1: f64,
    sample_times: &[f64],
) -> Result<(Vec<f64>, Vec<Option<usize>>)> {
    let (lo, hi) = ham.span();
    let slack = 1e-12 * hi.abs().max(1.0);
    if t1 < t0 {
        return Err(Error::invalid(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    if t0 < lo - slack || t1 > hi + slack {
        let bad = if t0 < lo - slack { t0 } else { t1 };
        return Err(Error::OutOfRange { t: bad, start: lo, end: hi });
    }
    for w in sample_times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::invalid("sample times must be non-decreasing"));
        }
    }
    if let (Some(&first), Some(&last)) = (sample_times.first(), sample_times.last()) {
        if first < t0 - slack || last > t1 + slack {
            let bad = if first < t0 - slack { first } else { last };
            return Err(Error::OutOfRange { t: bad, start: t0, end: t1 });
        }
    }

    let mut cuts = Vec::new();
    ham.breakpoints(t0, t1, &mut cuts);
    cuts.extend(sample_times.iter().copied().filter(|&t| t > t0 && t < t1));
    cuts.push(t0);
    cuts.push(t1);
    cuts.sort_by(|a, b| a.total_cmp(b));
    let merge = 1e-12 * (t1 - t0).abs().max(1e-300);
    let mut points: Vec<f64> = Vec::with_capacity(cuts.len());
    for c in cuts {
        match points.last() {
            Some(&p) if c - p <= merge => {}
            _ => points.push(c),
        }
    }
    if let Some(last) = points.last_mut() {
        *last = t1;
    }

    // Map each sample time onto the piece boundary closest to it.
    let mut completes = vec![None; points.len()];
    let mut sample_at = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        let idx = match points.binary_search_by(|p| p.total_cmp(&ts)) {
            Ok(i) => i,
            Err(i) => {
                if i == 0 {
                    0
                } else if i == points.len() || (ts - points[i - 1]) <= (points[i] - ts) {
                    i - 1
                } else {
                    i
                }
            }
        };
        sample_at.push(idx);
    }
    // Several samples may map to one point; record them as a run.
    for (k, &idx) in sample_at.iter().enumerate() {
        if completes[idx].is_none() {
            completes[idx] = Some(k);
        }
    }
    Ok((points, completes))
}

fn n_steps_for(len: f64, target: f64, refine: usize) -> usize {
    let base = if target.is_finite() { (len / target).ceil().max(1.0) as usize } else { 1 };
    base * refine.max(1)
}

#[inline]
fn axpy(a: &[Complex64; 3], h: f64, k: &[Complex64; 3]) -> [Complex64; 3] {
    [a[0] + k[0] * h, a[1] + k[1] * h, a[2] + k[2] * h]
}

#[inline]
fn deriv(h: &Hamiltonian3, psi: &[Complex64; 3]) -> [Complex64; 3] {
    let v = h.apply(psi);
    [-I * v[0], -I * v[1], -I * v[2]]
}

/// Integrates `i psi' = H(t) psi` from `t0` to `t1` with classical RK4,
/// optionally recording the state at `sample_times` (sorted, inside
/// `[t0, t1]`). The state is never renormalised; the norm drift is reported.
pub fn evolve_pure<H: PiecewiseHamiltonian>(
    state: PureState,
    ham: &H,
    t0: f64,
    t1: f64,
    ctl: &StepControl,
    sample_times: &[f64],
) -> Result<PureEvolution> {
    evolve_pure_refined(state, ham, t0, t1, ctl, sample_times, 1)
}

fn evolve_pure_refined<H: PiecewiseHamiltonian>(
    state: PureState,
    ham: &H,
    t0: f64,
    t1: f64,
    ctl: &StepControl,
    sample_times: &[f64],
    refine: usize,
) -> Result<PureEvolution> {
    ctl.validate()?;
    let (points, completes) = pieces(ham, t0, t1, sample_times)?;
    let global = ham.fast_period();
    let norm0 = state.norm_sqr();
    let mut psi = state.amplitudes;
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut max_drift: f64 = 0.0;
    let mut steps = 0usize;

    let record = |idx: usize, psi: &[Complex64; 3], samples: &mut Vec<PureState>| {
        if let Some(first) = completes[idx] {
            while samples.len() < sample_times.len() && samples.len() >= first {
                // all samples mapped to this point share the state
                let k = samples.len();
                let mapped_here = k == first
                    || (k > first && sample_times[k] - sample_times[first] <= 1e-12 * sample_times[k].abs().max(1.0));
                if !mapped_here {
                    break;
                }
                samples.push(PureState::new(*psi));
            }
        }
    };
    record(0, &psi, &mut samples);

    for w in 0..points.len().saturating_sub(1) {
        let (a, b) = (points[w], points[w + 1]);
        let piece = ham.piece(a, b);
        let n = n_steps_for(b - a, ctl.piece_step(global, ham.piece_period(&piece)), refine);
        let h = (b - a) / n as f64;
        let mut h_start = ham.eval(&piece, a);
        for j in 0..n {
            let t = a + j as f64 * h;
            let t_end = if j + 1 == n { b } else { a + (j + 1) as f64 * h };
            let h_mid = ham.eval(&piece, t + 0.5 * h);
            let h_end = ham.eval(&piece, t_end);
            let k1 = deriv(&h_start, &psi);
            let k2 = deriv(&h_mid, &axpy(&psi, 0.5 * h, &k1));
            let k3 = deriv(&h_mid, &axpy(&psi, 0.5 * h, &k2));
            let k4 = deriv(&h_end, &axpy(&psi, h, &k3));
            let c = h / 6.0;
            for i in 0..3 {
                psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * c;
            }
            h_start = h_end;
        }
        steps += n;
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        max_drift = max_drift.max((norm - norm0).abs());
        if !norm.is_finite() {
            return Err(Error::Numerical("state norm became non-finite".into()));
        }
        record(w + 1, &psi, &mut samples);
    }

    Ok(PureEvolution { state: PureState::new(psi), samples, max_norm_drift: max_drift, steps, noise_aligned: true })
}

/// GKSL right-hand side with the qubit relaxation `(gamma/2) D[|1><2|]`,
/// `D[O] rho = 2 O rho O^+ - O^+ O rho - rho O^+ O`.
#[inline]
fn lindblad_rhs(h: &Hamiltonian3, gamma: f64, rho: &Matrix3<Complex64>) -> Matrix3<Complex64> {
    let hr = h.left_mul(rho);
    // -i [H, rho] = -i (H rho - (H rho)^+) for Hermitian rho
    let mut out = Matrix3::from_fn(|i, j| -I * (hr[(i, j)] - hr[(j, i)].conj()));
    if gamma != 0.0 {
        let g = 0.5 * gamma;
        out[(0, 0)] += rho[(1, 1)] * (2.0 * g);
        // -(E22 rho + rho E22): row 2 and column 2 of rho, (2,2) counted twice
        for j in 0..3 {
            out[(1, j)] -= rho[(1, j)] * g;
            out[(j, 1)] -= rho[(j, 1)] * g;
        }
    }
    out
}

/// Integrates `rho' = -i[H(t), rho] + (gamma/2) D[|1><2|] rho` with RK4.
/// The Hermitian part is kept after every step.
pub fn evolve_lindblad<H: PiecewiseHamiltonian>(
    rho: DensityMatrix,
    ham: &H,
    gamma: f64,
    t0: f64,
    t1: f64,
    ctl: &StepControl,
    sample_times: &[f64],
) -> Result<LindbladEvolution> {
    ctl.validate()?;
    if !(gamma >= 0.0) {
        return Err(Error::invalid("decay rate must be >= 0"));
    }
    let (points, completes) = pieces(ham, t0, t1, sample_times)?;
    let global = ham.fast_period();
    let tr0 = rho.trace().re;
    let mut r = rho.0;
    let mut samples: Vec<DensityMatrix> = Vec::with_capacity(sample_times.len());
    let mut max_drift: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut steps = 0usize;

    let push_samples = |idx: usize, r: &Matrix3<Complex64>, samples: &mut Vec<DensityMatrix>| {
        if let Some(first) = completes[idx] {
            while samples.len() < sample_times.len() && samples.len() >= first {
                let k = samples.len();
                let same =
                    k == first || sample_times[k] - sample_times[first] <= 1e-12 * sample_times[k].abs().max(1.0);
                if !same {
                    break;
                }
                samples.push(DensityMatrix(*r));
            }
        }
    };
    push_samples(0, &r, &mut samples);

    for w in 0..points.len().saturating_sub(1) {
        let (a, b) = (points[w], points[w + 1]);
        let piece = ham.piece(a, b);
        let n = n_steps_for(b - a, ctl.piece_step(global, ham.piece_period(&piece)), 1);
        let h = (b - a) / n as f64;
        let mut h_start = ham.eval(&piece, a);
        for j in 0..n {
            let t = a + j as f64 * h;
            let t_end = if j + 1 == n { b } else { a + (j + 1) as f64 * h };
            let h_mid = ham.eval(&piece, t + 0.5 * h);
            let h_end = ham.eval(&piece, t_end);
            let k1 = lindblad_rhs(&h_start, gamma, &r);
            let k2 = lindblad_rhs(&h_mid, gamma, &(r + k1 * Complex64::new(0.5 * h, 0.0)));
            let k3 = lindblad_rhs(&h_mid, gamma, &(r + k2 * Complex64::new(0.5 * h, 0.0)));
            let k4 = lindblad_rhs(&h_end, gamma, &(r + k3 * Complex64::new(h, 0.0)));
            r += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(h / 6.0, 0.0);
            r = (r + r.adjoint()) * Complex64::new(0.5, 0.0);
            h_start = h_end;
        }
        steps += n;
        let tr = r.trace().re;
        if !tr.is_finite() {
            return Err(Error::Numerical("density matrix became non-finite".into()));
        }
        max_drift = max_drift.max((tr - tr0).abs());
        let before = samples.len();
        push_samples(w + 1, &r, &mut samples);
        if samples.len() > before {
            min_eig = min_eig.min(DensityMatrix(r).min_eigenvalue());
        }
    }
    let state = DensityMatrix(r);
    min_eig = min_eig.min(state.min_eigenvalue());

    Ok(LindbladEvolution {
        state,
        samples,
        max_trace_drift: max_drift,
        min_eigenvalue: min_eig,
        steps,
        noise_aligned: true,
    })
}

/// Step-halving study: the Ramsey observable `(1 + 2 Re rho_12)/2` at `t1`
/// for steps `h`, `h/2`, `h/4`, and the convergence order measured on the
/// full state vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub value_h: f64,
    pub value_half: f64,
    pub value_quarter: f64,
    /// `log2(|psi_h - psi_h/2| / |psi_h/2 - psi_h/4|)`; NaN when both
    /// differences vanish.
    pub order: f64,
}

impl ConvergenceReport {
    pub fn halving_change(&self) -> f64 {
        (self.value_h - self.value_half).abs()
    }
}

/// Runs the evolution from the start of the span to `t1` at the step implied
/// by `ctl`, at half and at a quarter of it, and estimates the order.
pub fn convergence_probe<H: PiecewiseHamiltonian>(
    ham: &H,
    state: PureState,
    t1: f64,
    ctl: &StepControl,
) -> Result<ConvergenceReport> {
    let (t0, _) = ham.span();
    let run = |refine: usize| evolve_pure_refined(state, ham, t0, t1, ctl, &[], refine).map(|e| e.state);
    let obs = |s: &PureState| 0.5 * (1.0 + 2.0 * s.coherence_12().re);
    let dist = |a: &PureState, b: &PureState| {
        a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    };
    let s1 = run(1)?;
    let s2 = run(2)?;
    let s4 = run(4)?;
    let d1 = dist(&s1, &s2);
    let d2 = dist(&s2, &s4);
    let order = if d1 == 0.0 && d2 == 0.0 { f64::NAN } else { (d1 / d2).log2() };
    Ok(ConvergenceReport { value_h: obs(&s1), value_half: obs(&s2), value_quarter: obs(&s4), order })
}
