use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::emitter::{EmitterConfig, HamiltonianSpec};
use crate::error::{Error, Result};
use crate::noise::{generate_ou_trace, generate_rtn_trace, NoiseTrace, OUParams, RTNParams};
use crate::parallel::{derive_seed, ordered_fold, ordered_map, DEFAULT_BLOCK};
use crate::propagator::{evolve_pure, PureState, StepControl};

use super::fit::{fit_t2, ripple_amplitude};

/// Noise driving the qubit frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseModel {
    Ou(OUParams),
    Rtn(RTNParams),
    Static { delta: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Ou(p) => p.validate(),
            NoiseModel::Rtn(p) => p.validate(),
            NoiseModel::Static { delta } if delta.is_finite() => Ok(()),
            NoiseModel::Static { .. } => Err(Error::invalid("static detuning must be finite")),
        }
    }

    pub fn default_dt(&self, horizon: f64) -> f64 {
        match self {
            NoiseModel::Ou(p) => p.default_dt(horizon),
            NoiseModel::Rtn(p) => p.default_dt(horizon),
            NoiseModel::Static { .. } => horizon / 2000.0,
        }
    }
}

/// Generates one trace covering at least `horizon` on a grid of spacing
/// close to `dt` (adjusted so the grid ends exactly at `horizon`).
pub fn make_trace(model: &NoiseModel, dt: f64, horizon: f64, seed: u64) -> Result<NoiseTrace> {
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon must be > 0"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("noise grid spacing must be > 0"));
    }
    let n_steps = (horizon / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = horizon / n_steps as f64;
    match model {
        NoiseModel::Ou(p) => generate_ou_trace(*p, dt, n_steps, seed),
        NoiseModel::Rtn(p) => generate_rtn_trace(*p, dt, n_steps, seed),
        NoiseModel::Static { delta } => NoiseTrace::constant(*delta, dt, n_steps),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyConfig {
    pub emitter: EmitterConfig,
    pub noise: NoiseModel,
    pub horizon: f64,
    pub n_trajectories: usize,
    pub n_sample_times: usize,
    pub master_seed: u64,
    /// Noise grid spacing; `None` selects the model default.
    pub noise_dt: Option<f64>,
    pub step: StepControl,
}

impl RamseyConfig {
    /// Horizon 33.3, 10^4 trajectories, 400 sample times.
    pub fn new(emitter: EmitterConfig, noise: NoiseModel) -> Self {
        RamseyConfig {
            emitter,
            noise,
            horizon: 33.3,
            n_trajectories: 10_000,
            n_sample_times: 400,
            master_seed: 0,
            noise_dt: None,
            step: StepControl::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        self.noise.validate()?;
        self.step.validate()?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be > 0"));
        }
        if self.n_trajectories == 0 {
            return Err(Error::invalid("n_trajectories must be >= 1"));
        }
        if self.n_sample_times < 2 {
            return Err(Error::invalid("n_sample_times must be >= 2"));
        }
        if let Some(dt) = self.noise_dt {
            if !(dt > 0.0) {
                return Err(Error::invalid("noise_dt must be > 0"));
            }
        }
        Ok(())
    }

    pub fn resolved_noise_dt(&self) -> f64 {
        self.noise_dt.unwrap_or_else(|| self.noise.default_dt(self.horizon))
    }

    /// Seed of the noise trace used by trajectory `index`.
    pub fn trajectory_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, 0, index as u64)
    }
}

/// `n` uniformly spaced times from 0 to `horizon` inclusive.
pub fn sample_times(horizon: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![horizon];
    }
    (0..n).map(|k| horizon * k as f64 / (n - 1) as f64).collect()
}

/// Trajectory-averaged Ramsey signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSignal {
    pub times: Vec<f64>,
    /// 1 = full coherence, 0.5 = none.
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Amplitude of the fast oscillation about the fitted decay; NaN when
    /// no valid fit exists.
    pub ripple_amplitude: f64,
}

impl EnsembleSignal {
    /// Signal with the given samples and no ripple estimate.
    pub fn new(times: Vec<f64>, mean: Vec<f64>, std_error: Vec<f64>) -> Result<Self> {
        if times.len() != mean.len() || times.len() != std_error.len() {
            return Err(Error::invalid("times, mean and std_error differ in length"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sample times must be strictly increasing"));
        }
        Ok(EnsembleSignal { times, mean, std_error, ripple_amplitude: f64::NAN })
    }

    /// Mean and standard error over the selected rows of `rows`, one row per
    /// trajectory. Indices may repeat (bootstrap resampling). The ripple is
    /// filled in when the fit is valid.
    pub fn from_trajectories(times: Vec<f64>, rows: &[Vec<f64>], indices: &[usize]) -> Result<Self> {
        let n_t = times.len();
        let mut sum = vec![0.0; n_t];
        let mut sum_sq = vec![0.0; n_t];
        for &i in indices {
            let row = rows.get(i).ok_or_else(|| Error::invalid(format!("trajectory index {i} out of range")))?;
            if row.len() != n_t {
                return Err(Error::invalid("trajectory length differs from the sample grid"));
            }
            for (k, v) in row.iter().enumerate() {
                sum[k] += v;
                sum_sq[k] += v * v;
            }
        }
        let (mean, std_error) = moments_to_stats(&sum, &sum_sq, indices.len());
        let mut signal = EnsembleSignal::new(times, mean, std_error)?;
        signal.fill_ripple();
        Ok(signal)
    }

    fn fill_ripple(&mut self) {
        if let Ok(fit) = fit_t2(self) {
            if fit.valid {
                self.ripple_amplitude = ripple_amplitude(self, &fit);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// One Ramsey run: `|1>`, an ideal pi/2 rotation to `(|1> + |2>)/sqrt 2`,
/// free evolution under noise (and drives), and the readout
/// `(1 + 2 Re rho_12)/2` at each sample time. Level-3 population is not
/// projected out.
pub fn ramsey_trajectory(
    noise: &NoiseTrace,
    emitter: &EmitterConfig,
    sample_times: &[f64],
    ctl: &StepControl,
) -> Result<Vec<f64>> {
    let end = sample_times.last().copied().unwrap_or(0.0);
    let spec = HamiltonianSpec::new(emitter, noise);
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let start = PureState::new([r, r, Complex64::new(0.0, 0.0)]);
    let ev = evolve_pure(start, &spec, 0.0, end, ctl, sample_times)?;
    Ok(ev.samples.iter().map(|s| 0.5 * (1.0 + 2.0 * s.coherence_12().re)).collect())
}

struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    error: Option<Error>,
}

/// Averages `ramsey_trajectory` over `n_trajectories` independent noise
/// traces. Trajectory `i` uses the seed `derive_seed(master_seed, 0, i)`;
/// results are summed strictly in trajectory order.
pub fn ramsey_ensemble(cfg: &RamseyConfig) -> Result<EnsembleSignal> {
    cfg.validate()?;
    let times = sample_times(cfg.horizon, cfg.n_sample_times);
    let dt = cfg.resolved_noise_dt();
    let n_t = times.len();
    let acc = Moments { sum: vec![0.0; n_t], sum_sq: vec![0.0; n_t], error: None };
    let acc = ordered_fold(
        cfg.n_trajectories,
        DEFAULT_BLOCK,
        acc,
        |i| {
            let trace = make_trace(&cfg.noise, dt, cfg.horizon, cfg.trajectory_seed(i))?;
            ramsey_trajectory(&trace, &cfg.emitter, &times, &cfg.step)
        },
        |acc, _, res| match res {
            Ok(sig) => {
                for (k, v) in sig.into_iter().enumerate() {
                    acc.sum[k] += v;
                    acc.sum_sq[k] += v * v;
                }
            }
            Err(e) => {
                if acc.error.is_none() {
                    acc.error = Some(e);
                }
            }
        },
    );
    if let Some(e) = acc.error {
        return Err(e);
    }
    let (mean, std_error) = moments_to_stats(&acc.sum, &acc.sum_sq, cfg.n_trajectories);
    let mut signal = EnsembleSignal::new(times, mean, std_error)?;
    signal.fill_ripple();
    Ok(signal)
}

/// Every trajectory's readout, in trajectory order. Same seeds as
/// `ramsey_ensemble`, so averaging all rows reproduces its mean.
pub fn ramsey_trajectories(cfg: &RamseyConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let times = sample_times(cfg.horizon, cfg.n_sample_times);
    let dt = cfg.resolved_noise_dt();
    ordered_map(cfg.n_trajectories, |i| {
        let trace = make_trace(&cfg.noise, dt, cfg.horizon, cfg.trajectory_seed(i))?;
        ramsey_trajectory(&trace, &cfg.emitter, &times, &cfg.step)
    })
    .into_iter()
    .collect()
}

fn moments_to_stats(sum: &[f64], sum_sq: &[f64], count: usize) -> (Vec<f64>, Vec<f64>) {
    let n = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| {
            if count < 2 {
                0.0
            } else {
                let var = ((sq - n * m * m) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            }
        })
        .collect();
    (mean, std_error)
}
