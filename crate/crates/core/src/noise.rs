//! Classical dephasing noise: Ornstein-Uhlenbeck (OU) and random telegraph
//! noise (RTN) sampled on a uniform grid, plus ensemble statistics used to
//! validate the generators.
//!
//! Both processes start from their stationary distribution. Each trace is
//! generated from its own ChaCha stream keyed by a 64-bit seed, so a trace
//! is a pure function of `(params, dt, n_steps, seed)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// OU noise with correlation function `b^2 exp(-|t|/tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OUParams {
    /// Noise strength (rms of the stationary distribution).
    pub b: f64,
    /// Correlation time.
    pub tau: f64,
}

impl OUParams {
    pub fn new(b: f64, tau: f64) -> Result<Self> {
        let p = OUParams { b, tau };
        p.validate()?;
        Ok(p)
    }

    /// `b = 0` is accepted as the degenerate noiseless process.
    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b >= 0.0) {
            return Err(Error::invalid(format!("OU strength b must be >= 0, got {}", self.b)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid(format!("OU correlation time must be > 0, got {}", self.tau)));
        }
        Ok(())
    }

    /// Default grid spacing: `min(tau/200, horizon/2000)`.
    pub fn default_dt(&self, horizon: f64) -> f64 {
        (self.tau / 200.0).min(horizon / 2000.0)
    }

    /// Stationary autocorrelation at `lag`.
    pub fn correlation(&self, lag: f64) -> f64 {
        self.b * self.b * (-lag.abs() / self.tau).exp()
    }
}

/// Symmetric RTN switching between `+xi` and `-xi` at rate `chi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RTNParams {
    pub xi: f64,
    pub chi: f64,
}

impl RTNParams {
    pub fn new(xi: f64, chi: f64) -> Result<Self> {
        let p = RTNParams { xi, chi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(Error::invalid(format!("RTN amplitude xi must be > 0, got {}", self.xi)));
        }
        if !(self.chi.is_finite() && self.chi >= 0.0) {
            return Err(Error::invalid(format!("RTN jump rate chi must be >= 0, got {}", self.chi)));
        }
        Ok(())
    }

    /// Default grid spacing: `min(1/(50 chi), horizon/2000)`.
    pub fn default_dt(&self, horizon: f64) -> f64 {
        if self.chi > 0.0 {
            (1.0 / (50.0 * self.chi)).min(horizon / 2000.0)
        } else {
            horizon / 2000.0
        }
    }

    /// Stationary autocorrelation `xi^2 exp(-2 chi |lag|)`.
    pub fn correlation(&self, lag: f64) -> f64 {
        self.xi * self.xi * (-2.0 * self.chi * lag.abs()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Ou,
    Rtn,
    Static,
}

/// A sampled noise path `delta(t_k)`, `t_k = k dt`, `k = 0..=n_steps`.
///
/// Between grid points the value is held constant (sample-and-hold), so the
/// trace covers `[0, n_steps * dt]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    dt: f64,
    values: Vec<f64>,
    seed: u64,
    kind: NoiseKind,
    jumps: Option<u64>,
}

impl NoiseTrace {
    fn check_grid(dt: f64, n_steps: usize) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("grid spacing must be > 0, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::invalid("n_steps must be >= 1"));
        }
        Ok(())
    }

    /// Builds a trace from explicit values. Intended for tests and imports.
    pub fn from_values(dt: f64, values: Vec<f64>, kind: NoiseKind, seed: u64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("a trace needs at least two grid points"));
        }
        Self::check_grid(dt, values.len() - 1)?;
        Ok(NoiseTrace { dt, values, seed, kind, jumps: None })
    }

    /// Constant trace, the static-inhomogeneity limit.
    pub fn constant(delta: f64, dt: f64, n_steps: usize) -> Result<Self> {
        Self::check_grid(dt, n_steps)?;
        if !delta.is_finite() {
            return Err(Error::invalid("static detuning must be finite"));
        }
        Ok(NoiseTrace { dt, values: vec![delta; n_steps + 1], seed: 0, kind: NoiseKind::Static, jumps: Some(0) })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    /// Number of intervals on the grid.
    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps() as f64 * self.dt
    }

    /// Exact number of RTN switching events inside the horizon, counted at
    /// generation time (jumps closer than `dt` are not lost).
    pub fn jumps(&self) -> Option<u64> {
        self.jumps
    }

    /// Index of the grid cell containing `t`; the final grid point maps to
    /// the last cell.
    pub fn cell_index(&self, t: f64) -> Result<usize> {
        let end = self.horizon();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange { t, start: 0.0, end });
        }
        let k = (t / self.dt).floor() as usize;
        Ok(k.min(self.n_steps() - 1))
    }

    /// Sample-and-hold value at time `t`.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let end = self.horizon();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange { t, start: 0.0, end });
        }
        let k = ((t / self.dt).floor() as usize).min(self.n_steps());
        Ok(self.values[k])
    }

    /// Writes the trace as CSV with header `t,delta`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,delta")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", crate::cli::output::fmt_f64(k as f64 * self.dt), crate::cli::output::fmt_f64(*v))?;
        }
        Ok(())
    }
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exact OU update on a uniform grid:
/// `delta_{k+1} = mu delta_k + b sqrt(1 - mu^2) n_k`, `mu = exp(-dt/tau)`,
/// with `delta_0 ~ N(0, b^2)`.
pub fn generate_ou_trace(params: OUParams, dt: f64, n_steps: usize, seed: u64) -> Result<NoiseTrace> {
    params.validate()?;
    NoiseTrace::check_grid(dt, n_steps)?;
    let mut rng = rng_from_seed(seed);
    let mu = (-dt / params.tau).exp();
    let kick = params.b * (1.0 - mu * mu).sqrt();
    let mut values = Vec::with_capacity(n_steps + 1);
    let first: f64 = StandardNormal.sample(&mut rng);
    let mut current = params.b * first;
    values.push(current);
    for _ in 0..n_steps {
        let n: f64 = StandardNormal.sample(&mut rng);
        current = mu * current + kick * n;
        values.push(current);
    }
    Ok(NoiseTrace { dt, values, seed, kind: NoiseKind::Ou, jumps: None })
}

/// Event-driven RTN: a uniformly random initial sign, exponential waiting
/// times at rate `chi`, then sampled onto the grid (the value at `t_k` is the
/// state just after the last jump at or before `t_k`).
pub fn generate_rtn_trace(params: RTNParams, dt: f64, n_steps: usize, seed: u64) -> Result<NoiseTrace> {
    params.validate()?;
    NoiseTrace::check_grid(dt, n_steps)?;
    let mut rng = rng_from_seed(seed);
    let horizon = n_steps as f64 * dt;
    let mut sign = if rng.random::<bool>() { 1.0 } else { -1.0 };

    let mut jump_times = Vec::new();
    if params.chi > 0.0 {
        let wait = Exp::new(params.chi).map_err(|e| Error::invalid(e.to_string()))?;
        let mut t = 0.0;
        loop {
            t += wait.sample(&mut rng);
            if t > horizon {
                break;
            }
            jump_times.push(t);
        }
    }

    let mut values = Vec::with_capacity(n_steps + 1);
    let mut next = 0;
    for k in 0..=n_steps {
        let tk = k as f64 * dt;
        while next < jump_times.len() && jump_times[next] <= tk {
            sign = -sign;
            next += 1;
        }
        values.push(sign * params.xi);
    }
    Ok(NoiseTrace { dt, values, seed, kind: NoiseKind::Rtn, jumps: Some(jump_times.len() as u64) })
}

/// Ensemble estimate of the autocorrelation at one lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub lag: f64,
    pub estimate: f64,
    pub std_error: f64,
}

fn lag_cells(lag: f64, dt: f64, len: usize) -> Result<usize> {
    let m_f = lag / dt;
    let m = m_f.round();
    if lag < 0.0 || (m_f - m).abs() > 1e-6 * m.max(1.0) {
        return Err(Error::invalid(format!("lag {lag} is not a non-negative multiple of dt = {dt}")));
    }
    let m = m as usize;
    if m >= len {
        return Err(Error::invalid(format!("lag {lag} exceeds the trace length")));
    }
    Ok(m)
}

/// Time-averaged `delta(t + lag) delta(t)` of one trace, one value per lag.
pub fn trace_autocorrelation(trace: &NoiseTrace, lags: &[f64]) -> Result<Vec<f64>> {
    let v = &trace.values;
    lags.iter()
        .map(|&lag| {
            let m = lag_cells(lag, trace.dt, v.len())?;
            let pairs = v.len() - m;
            Ok(v[..pairs].iter().zip(&v[m..]).map(|(a, b)| a * b).sum::<f64>() / pairs as f64)
        })
        .collect()
}

/// Combines per-trace estimates (rows of [`trace_autocorrelation`]) into
/// means with standard errors from their spread across traces.
pub fn combine_autocorrelation(lags: &[f64], per_trace: &[Vec<f64>]) -> Vec<CorrelationEstimate> {
    lags.iter()
        .enumerate()
        .map(|(k, &lag)| {
            let col: Vec<f64> = per_trace.iter().map(|row| row[k]).collect();
            let (estimate, std_error) = mean_and_std_error(&col);
            CorrelationEstimate { lag, estimate, std_error }
        })
        .collect()
}

/// Estimates `<delta(t + lag) delta(t)>` by averaging over all valid start
/// points of each trace and then over traces. The standard error is taken
/// from the spread of the per-trace estimates, which are independent.
pub fn estimate_autocorrelation(traces: &[NoiseTrace], lags: &[f64]) -> Result<Vec<CorrelationEstimate>> {
    let first = traces.first().ok_or_else(|| Error::invalid("no traces supplied"))?;
    let dt = first.dt;
    let len = first.values.len();
    if traces.iter().any(|t| t.dt != dt || t.values.len() != len) {
        return Err(Error::invalid("traces do not share the same grid"));
    }
    let snapped: Vec<f64> =
        lags.iter().map(|&lag| lag_cells(lag, dt, len).map(|m| m as f64 * dt)).collect::<Result<_>>()?;
    let per_trace = traces.iter().map(|tr| trace_autocorrelation(tr, lags)).collect::<Result<Vec<_>>>()?;
    Ok(combine_autocorrelation(&snapped, &per_trace))
}

/// Fits `C(lag) = C0 exp(-rate lag)` by least squares on `ln C` and returns
/// the rate. Points with non-positive estimates are skipped.
pub fn fitted_decay_rate(estimates: &[CorrelationEstimate]) -> Result<f64> {
    let pts: Vec<(f64, f64)> =
        estimates.iter().filter(|e| e.estimate > 0.0).map(|e| (e.lag, e.estimate.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::FitFailed("need two positive correlation estimates".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitFailed("all lags coincide".into()));
    }
    Ok(-sxy / sxx)
}

/// Sample mean and standard error of the mean. A single sample has zero
/// standard error.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
