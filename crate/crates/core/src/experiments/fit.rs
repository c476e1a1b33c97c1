//! Coherence-time extraction from Ramsey signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ramsey::EnsembleSignal;

/// Points at or below this level carry no slope information for the
/// log-linearised fit (the decoherence floor is 0.5).
const FIT_FLOOR: f64 = 0.52;
/// A signal that never drops below this level is reported as not decayed.
const DECAY_THRESHOLD: f64 = 0.95;
const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Linearized,
    Nonlinear,
    None,
}

/// Fit of `(A exp(-t/T2) + 1)/2` to a Ramsey signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct T2Fit {
    /// Decay time; `+inf` when the signal did not decay.
    pub t2: f64,
    /// Contrast `A` (1 for the nonlinear fallback).
    pub amplitude: f64,
    /// RMS of `mean - fitted curve` over all samples.
    pub fit_residual_rms: f64,
    pub valid: bool,
    pub method: FitMethod,
}

impl T2Fit {
    /// Fitted signal at time `t`.
    pub fn curve(&self, t: f64) -> f64 {
        if self.t2.is_infinite() {
            return 0.5 * (1.0 + self.amplitude);
        }
        0.5 * (1.0 + self.amplitude * (-t / self.t2).exp())
    }
}

/// Raw Gaussian-bath free induction decay
/// `exp[-b^2 tau^2 (exp(-t/tau) + t/tau - 1)]`.
pub fn analytic_fid_raw(b: f64, tau: f64, t: f64) -> f64 {
    let x = t / tau;
    // exp(-x) - 1 + x without cancellation for small x
    let g = (-x).exp_m1() + x;
    (-(b * tau).powi(2) * g).exp()
}

/// The same decay in Ramsey units, `(1 + raw)/2`.
pub fn analytic_fid(b: f64, tau: f64, t: f64) -> f64 {
    0.5 * (1.0 + analytic_fid_raw(b, tau, t))
}

fn weighted_line(ts: &[f64], ys: &[f64], ws: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = ws.iter().sum();
    if !(sw > 0.0) {
        return None;
    }
    let mt = ts.iter().zip(ws).map(|(t, w)| t * w).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((t, y), w) in ts.iter().zip(ys).zip(ws) {
        sxx += w * (t - mt) * (t - mt);
        sxy += w * (t - mt) * (y - my);
    }
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mt, slope))
}

fn residual_rms(signal: &EnsembleSignal, fit: &T2Fit) -> f64 {
    let n = signal.len() as f64;
    (signal.times.iter().zip(&signal.mean).map(|(t, m)| (m - fit.curve(*t)).powi(2)).sum::<f64>() / n).sqrt()
}

/// Fits `(A exp(-t/T2) + 1)/2` to the signal.
///
/// Primary route: weighted least squares of `ln(2 mean - 1) = ln A - t/T2`
/// over the samples above 0.52. A first pass with uniform signal-space
/// weights estimates the model-misfit variance (fast ripple, non-exponential
/// shape); the second pass weights each point by
/// `(2m - 1)^2 / (4 (stderr^2 + misfit^2))`.
///
/// With fewer than ten qualifying samples, `T2` of `(exp(-t/T2) + 1)/2` is
/// found by a bounded one-dimensional minimisation of the residual.
pub fn fit_t2(signal: &EnsembleSignal) -> Result<T2Fit> {
    if signal.len() < MIN_POINTS {
        return Err(Error::invalid(format!("need at least {MIN_POINTS} samples, got {}", signal.len())));
    }
    let min = signal.mean.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= DECAY_THRESHOLD {
        let mut fit =
            T2Fit { t2: f64::INFINITY, amplitude: 1.0, fit_residual_rms: 0.0, valid: false, method: FitMethod::None };
        fit.fit_residual_rms = residual_rms(signal, &fit);
        return Ok(fit);
    }
    let idx: Vec<usize> = (0..signal.len()).filter(|&i| signal.mean[i] > FIT_FLOOR).collect();
    if idx.is_empty() {
        return Err(Error::FitFailed("no sample lies above the 0.52 floor".into()));
    }
    if idx.len() >= MIN_POINTS {
        if let Some(fit) = linearized(signal, &idx) {
            return Ok(fit);
        }
    }
    nonlinear(signal)
}

fn linearized(signal: &EnsembleSignal, idx: &[usize]) -> Option<T2Fit> {
    let ts: Vec<f64> = idx.iter().map(|&i| signal.times[i]).collect();
    let ms: Vec<f64> = idx.iter().map(|&i| signal.mean[i]).collect();
    let ys: Vec<f64> = ms.iter().map(|m| (2.0 * m - 1.0).ln()).collect();

    let w1: Vec<f64> = ms.iter().map(|m| (2.0 * m - 1.0).powi(2)).collect();
    let (c1, s1) = weighted_line(&ts, &ys, &w1)?;
    let curve = |c: f64, s: f64, t: f64| 0.5 * (1.0 + (c + s * t).exp());
    let dof = (ts.len() as f64 - 2.0).max(1.0);
    let misfit = ts.iter().zip(&ms).map(|(t, m)| (m - curve(c1, s1, *t)).powi(2)).sum::<f64>() / dof;

    let (c, s) = {
        let w2: Vec<f64> = idx
            .iter()
            .zip(&ms)
            .map(|(&i, m)| {
                let var = signal.std_error[i].powi(2) + misfit;
                if var > 0.0 {
                    (2.0 * m - 1.0).powi(2) / (4.0 * var)
                } else {
                    0.0
                }
            })
            .collect();
        if w2.iter().all(|w| *w > 0.0 && w.is_finite()) {
            weighted_line(&ts, &ys, &w2).unwrap_or((c1, s1))
        } else {
            (c1, s1)
        }
    };
    if !(s < 0.0) {
        return None;
    }
    let mut fit =
        T2Fit { t2: -1.0 / s, amplitude: c.exp(), fit_residual_rms: 0.0, valid: true, method: FitMethod::Linearized };
    fit.fit_residual_rms = residual_rms(signal, &fit);
    Some(fit)
}

fn nonlinear(signal: &EnsembleSignal) -> Result<T2Fit> {
    let t_max = signal.times.iter().copied().fold(0.0, f64::max);
    let t_min = signal.times.iter().copied().filter(|t| *t > 0.0).fold(f64::INFINITY, f64::min);
    if !(t_max > 0.0 && t_min.is_finite()) {
        return Err(Error::FitFailed("signal has no positive sample times".into()));
    }
    let cost = |log_t2: f64| {
        let t2 = log_t2.exp();
        signal.times.iter().zip(&signal.mean).map(|(t, m)| (m - 0.5 * (1.0 + (-t / t2).exp())).powi(2)).sum::<f64>()
    };
    let (lo, hi) = ((t_min / 100.0).ln(), (t_max * 100.0).ln());
    // coarse scan, then golden-section refinement around the best cell
    let n_scan = 400;
    let step = (hi - lo) / n_scan as f64;
    let best = (0..=n_scan).map(|k| lo + k as f64 * step).min_by(|a, b| cost(*a).total_cmp(&cost(*b))).unwrap_or(lo);
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = cost(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = cost(x2);
        }
    }
    let t2 = (0.5 * (a + b)).exp();
    let mut fit = T2Fit { t2, amplitude: 1.0, fit_residual_rms: 0.0, valid: true, method: FitMethod::Nonlinear };
    fit.fit_residual_rms = residual_rms(signal, &fit);
    Ok(fit)
}

/// Reference decay time for the coherence gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainReference {
    /// `sqrt(2)/b`.
    SlowBath,
    /// `1/(b^2 tau)`.
    FastBath,
}

/// `T2 / T2*` with `T2*` from the chosen bath limit.
pub fn coherence_gain(fit: &T2Fit, b: f64, tau: f64, reference: GainReference) -> Result<f64> {
    if !fit.valid || !(fit.t2 > 0.0) || !fit.t2.is_finite() {
        return Err(Error::invalid("coherence gain needs a valid finite T2 fit"));
    }
    if !(b > 0.0 && tau > 0.0) {
        return Err(Error::invalid("b and tau must be > 0"));
    }
    let t2_star = match reference {
        GainReference::SlowBath => std::f64::consts::SQRT_2 / b,
        GainReference::FastBath => 1.0 / (b * b * tau),
    };
    Ok(fit.t2 / t2_star)
}

/// `sqrt(2) * RMS(mean - fitted curve)`: the amplitude of a sinusoid with
/// the same RMS as the residual.
pub fn ripple_amplitude(signal: &EnsembleSignal, fit: &T2Fit) -> f64 {
    std::f64::consts::SQRT_2 * residual_rms(signal, fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(t2: f64, horizon: f64, n: usize, extra: impl Fn(f64) -> f64) -> EnsembleSignal {
        let times: Vec<f64> = (0..n).map(|k| horizon * k as f64 / (n - 1) as f64).collect();
        let mean = times.iter().map(|&t| 0.5 * (1.0 + (-t / t2).exp()) + extra(t)).collect();
        EnsembleSignal::new(times, mean, vec![0.0; n]).unwrap()
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let sig = synthetic(5.0, 20.0, 400, |_| 0.0);
        let fit = fit_t2(&sig).unwrap();
        assert!(fit.valid);
        assert_eq!(fit.method, FitMethod::Linearized);
        assert!((fit.t2 - 5.0).abs() < 0.05);
        assert!(fit.fit_residual_rms < 1e-12);
    }

    #[test]
    fn constant_signal_is_not_decayed() {
        let times: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let sig = EnsembleSignal::new(times, vec![1.0; 50], vec![0.0; 50]).unwrap();
        let fit = fit_t2(&sig).unwrap();
        assert!(!fit.valid);
        assert!(fit.t2.is_infinite());
    }

    #[test]
    fn floor_signal_fails() {
        let times: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let sig = EnsembleSignal::new(times, vec![0.5; 50], vec![0.0; 50]).unwrap();
        assert!(matches!(fit_t2(&sig), Err(Error::FitFailed(_))));
    }

    #[test]
    fn too_few_points_is_invalid_argument() {
        let sig = synthetic(5.0, 20.0, 5, |_| 0.0);
        assert!(matches!(fit_t2(&sig), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fast_decay_uses_nonlinear_fallback() {
        // only a handful of samples above the floor
        let sig = synthetic(0.5, 30.0, 100, |_| 0.0);
        let fit = fit_t2(&sig).unwrap();
        assert_eq!(fit.method, FitMethod::Nonlinear);
        assert!((fit.t2 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn ripple_of_exact_curve_is_zero_and_of_sinusoid_is_its_amplitude() {
        let sig = synthetic(5.0, 20.0, 400, |_| 0.0);
        let fit = fit_t2(&sig).unwrap();
        assert!(ripple_amplitude(&sig, &fit) < 1e-12);

        let clean = synthetic(5.0, 20.0, 4000, |_| 0.0);
        let wobbly = synthetic(5.0, 20.0, 4000, |t| 0.1 * (7.3 * t).cos());
        let fit = fit_t2(&clean).unwrap();
        let r = ripple_amplitude(&wobbly, &fit);
        assert!((r - 0.1).abs() < 0.005, "ripple {r}");
    }

    #[test]
    fn analytic_fid_limits() {
        let (b, tau) = (19.0, 1.0);
        assert_eq!(analytic_fid_raw(b, tau, 0.0), 1.0);
        assert_eq!(analytic_fid(b, tau, 0.0), 1.0);
        let t = 1e-3;
        let gauss = (-(b * t).powi(2) / 2.0).exp();
        assert!((analytic_fid_raw(b, tau, t) - gauss).abs() < 1e-6);
        let t = std::f64::consts::SQRT_2 / b;
        let raw = analytic_fid_raw(b, tau, t);
        assert!((raw - 0.376_949_47).abs() < 1e-8, "raw {raw}");
    }

    #[test]
    fn gain_references() {
        let b = 19.0;
        let fit = T2Fit {
            t2: std::f64::consts::SQRT_2 / b,
            amplitude: 1.0,
            fit_residual_rms: 0.0,
            valid: true,
            method: FitMethod::Linearized,
        };
        assert!((coherence_gain(&fit, b, 1.0, GainReference::SlowBath).unwrap() - 1.0).abs() < 1e-15);
        let fit17 = T2Fit { t2: 17.3, ..fit };
        let g = coherence_gain(&fit17, b, 1.0, GainReference::SlowBath).unwrap();
        assert!((g - 232.4).abs() < 0.1, "gain {g}");
        let fast = T2Fit { t2: 1.0 / (b * b * 0.01), ..fit };
        assert!((coherence_gain(&fast, b, 0.01, GainReference::FastBath).unwrap() - 1.0).abs() < 1e-12);
        let invalid = T2Fit { valid: false, ..fit };
        assert!(coherence_gain(&invalid, b, 1.0, GainReference::SlowBath).is_err());
    }
}
