use serde::Serialize;

use crate::emitter::EmitterConfig;
use crate::error::{Error, Result};

use super::fit::{coherence_gain, fit_t2, GainReference};
use super::ramsey::{ramsey_ensemble, NoiseModel, RamseyConfig};

/// One `(s, Delta)` point of a coherence-gain sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainRow {
    pub s: f64,
    pub delta: f64,
    pub omega: f64,
    pub t2: f64,
    pub gain: f64,
    pub ripple: f64,
    /// Median per-sample standard error of the ensemble signal.
    pub stderr: f64,
    /// Set when the ensemble or the fit failed; numeric fields are NaN then.
    pub error: Option<String>,
}

impl GainRow {
    fn failed(s: f64, delta: f64, omega: f64, err: &Error) -> Self {
        GainRow {
            s,
            delta,
            omega,
            t2: f64::NAN,
            gain: f64::NAN,
            ripple: f64::NAN,
            stderr: f64::NAN,
            error: Some(err.to_string()),
        }
    }
}

/// Runs a protected Ramsey ensemble and T2 fit for every `(s, Delta)` pair,
/// s-major. Every row reuses the base master seed, so rows see the same
/// noise realisations. The base noise must be OU (the gain reference is
/// the slow-bath `sqrt 2 / b`). Per-row failures are recorded in the row.
pub fn gain_sweep(s_values: &[f64], delta_values: &[f64], base: &RamseyConfig) -> Result<Vec<GainRow>> {
    let ou = match base.noise {
        NoiseModel::Ou(p) => p,
        _ => return Err(Error::invalid("gain sweep needs OU noise")),
    };
    let mut rows = Vec::with_capacity(s_values.len() * delta_values.len());
    for &s in s_values {
        for &delta in delta_values {
            let emitter = match EmitterConfig::protected(s, delta) {
                Ok(e) => e.with_gamma(base.emitter.gamma),
                Err(e) => {
                    rows.push(GainRow::failed(s, delta, f64::NAN, &e));
                    continue;
                }
            };
            let omega = emitter.omega_drive;
            let cfg = RamseyConfig { emitter, ..base.clone() };
            rows.push(match sweep_point(&cfg, ou.b, ou.tau) {
                Ok((t2, gain, ripple, stderr)) => GainRow { s, delta, omega, t2, gain, ripple, stderr, error: None },
                Err(e) => GainRow::failed(s, delta, omega, &e),
            });
        }
    }
    Ok(rows)
}

fn sweep_point(cfg: &RamseyConfig, b: f64, tau: f64) -> Result<(f64, f64, f64, f64)> {
    let signal = ramsey_ensemble(cfg)?;
    let fit = fit_t2(&signal)?;
    let gain = coherence_gain(&fit, b, tau, GainReference::SlowBath)?;
    let mut se = signal.std_error.clone();
    se.sort_by(f64::total_cmp);
    let stderr = se.get(se.len() / 2).copied().unwrap_or(f64::NAN);
    Ok((fit.t2, gain, signal.ripple_amplitude, stderr))
}
