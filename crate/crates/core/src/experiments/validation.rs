use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{
    combine_autocorrelation, generate_ou_trace, generate_rtn_trace, mean_and_std_error, trace_autocorrelation,
    CorrelationEstimate, OUParams, RTNParams,
};
use crate::parallel::{derive_seed, ordered_map};

/// Statistical check of the noise generators against their closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseValidationConfig {
    pub ou: OUParams,
    pub rtn: RTNParams,
    pub n_traces: usize,
    pub ou_horizon: f64,
    pub rtn_horizon: f64,
    /// Lags in units of `tau`; each must be a multiple of the grid spacing.
    pub lags: Vec<f64>,
    pub master_seed: u64,
}

impl Default for NoiseValidationConfig {
    fn default() -> Self {
        NoiseValidationConfig {
            ou: OUParams { b: 19.0, tau: 1.0 },
            rtn: RTNParams { xi: 8.0, chi: 1.0 },
            n_traces: 10_000,
            ou_horizon: 5.0,
            rtn_horizon: 33.3,
            lags: vec![0.0, 0.25, 0.5, 1.0],
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCheck {
    pub estimate: CorrelationEstimate,
    pub expected: f64,
}

impl CorrelationCheck {
    /// `|estimate - expected|` in standard errors (0 for an exact match).
    pub fn z_score(&self) -> f64 {
        let diff = (self.estimate.estimate - self.expected).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.estimate.std_error
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseValidation {
    pub ou: Vec<CorrelationCheck>,
    pub rtn: Vec<CorrelationCheck>,
    /// Mean number of telegraph switches per trace, with its standard error.
    pub rtn_jumps: (f64, f64),
    /// `chi * rtn_horizon`.
    pub rtn_jumps_expected: f64,
}

/// Generates `n_traces` OU and RTN traces (seed streams 10 and 11) and
/// compares autocorrelations and jump counts with their expectations.
pub fn validate_noise(cfg: &NoiseValidationConfig) -> Result<NoiseValidation> {
    cfg.ou.validate()?;
    cfg.rtn.validate()?;
    if cfg.n_traces < 2 {
        return Err(Error::invalid("noise validation needs at least 2 traces"));
    }
    if !(cfg.ou_horizon > 0.0 && cfg.rtn_horizon > 0.0) {
        return Err(Error::invalid("validation horizons must be > 0"));
    }
    let ou_dt = cfg.ou.default_dt(cfg.ou_horizon);
    let ou_steps = (cfg.ou_horizon / ou_dt).round() as usize;
    let ou_rows = ordered_map(cfg.n_traces, |i| {
        let tr = generate_ou_trace(cfg.ou, ou_dt, ou_steps, derive_seed(cfg.master_seed, 10, i as u64))?;
        trace_autocorrelation(&tr, &cfg.lags)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let rtn_dt = cfg.rtn.default_dt(cfg.rtn_horizon);
    let rtn_steps = (cfg.rtn_horizon / rtn_dt).round() as usize;
    let rtn_dt = cfg.rtn_horizon / rtn_steps as f64;
    let rtn_lags: Vec<f64> = cfg.lags.iter().map(|l| (l / rtn_dt).round() * rtn_dt).collect();
    let rtn_rows = ordered_map(cfg.n_traces, |i| {
        let tr = generate_rtn_trace(cfg.rtn, rtn_dt, rtn_steps, derive_seed(cfg.master_seed, 11, i as u64))?;
        let mut row = trace_autocorrelation(&tr, &rtn_lags)?;
        row.push(tr.jumps().unwrap_or(0) as f64);
        Ok(row)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let ou = combine_autocorrelation(&cfg.lags, &ou_rows)
        .into_iter()
        .map(|e| CorrelationCheck { expected: cfg.ou.correlation(e.lag), estimate: e })
        .collect();
    let rtn = combine_autocorrelation(&rtn_lags, &rtn_rows)
        .into_iter()
        .map(|e| CorrelationCheck { expected: cfg.rtn.correlation(e.lag), estimate: e })
        .collect();
    let jumps: Vec<f64> = rtn_rows.iter().map(|r| r[cfg.lags.len()]).collect();
    Ok(NoiseValidation {
        ou,
        rtn,
        rtn_jumps: mean_and_std_error(&jumps),
        rtn_jumps_expected: cfg.rtn.chi * cfg.rtn_horizon,
    })
}
