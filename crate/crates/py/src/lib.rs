use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use starkshield::cli::{parse_config_str, run, Experiment, Overrides};
use starkshield::emitter::{self, EmitterConfig};
use starkshield::experiments::{self, EnsembleSignal, NoiseModel, RamseyConfig};
use starkshield::noise::{self, OUParams, RTNParams};
use starkshield::tomography::{self, GateSpec, ScenarioResult, TomographyConfig};
use starkshield::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidArgument(_) | Error::OutOfRange { .. } | Error::Config(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Drive ratio `Omega/Delta` that cancels the first-order Stark shift.
#[pyfunction]
fn protection_ratio(s: f64) -> PyResult<f64> {
    emitter::protection_ratio(s).map_err(to_py)
}

#[pyfunction]
fn bessel_j0(x: f64) -> f64 {
    emitter::bessel_j0(x)
}

/// Linear-response Stark shift of the 1-2 transition.
#[pyfunction]
fn stark_shift_linear(omega: f64, delta: f64, s: f64, dv: f64) -> PyResult<f64> {
    emitter::stark_shift_linear(omega, delta, s, dv).map_err(to_py)
}

/// Stark shift from the exact Floquet quasi-energies.
#[pyfunction]
fn stark_shift_exact(omega: f64, delta: f64, s: f64, dv: f64) -> PyResult<f64> {
    emitter::stark_shift_exact(omega, delta, s, dv).map_err(to_py)
}

/// `(s, rhs, ratio, asymptote, residual)`.
type ProtectionRow = (f64, f64, f64, f64, f64);

#[pyfunction]
fn protection_table(s_values: Vec<f64>) -> PyResult<Vec<ProtectionRow>> {
    let rows = emitter::protection_table(&s_values).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.s, r.rhs, r.ratio, r.asymptote, r.residual)).collect())
}

#[pyfunction]
#[pyo3(signature = (b, tau, dt, n_steps, seed=0))]
fn ou_trace(b: f64, tau: f64, dt: f64, n_steps: usize, seed: u64) -> PyResult<Vec<f64>> {
    let params = OUParams::new(b, tau).map_err(to_py)?;
    let trace = noise::generate_ou_trace(params, dt, n_steps, seed).map_err(to_py)?;
    Ok(trace.values().to_vec())
}

#[pyfunction]
#[pyo3(signature = (xi, chi, dt, n_steps, seed=0))]
fn rtn_trace(xi: f64, chi: f64, dt: f64, n_steps: usize, seed: u64) -> PyResult<Vec<f64>> {
    let params = RTNParams::new(xi, chi).map_err(to_py)?;
    let trace = noise::generate_rtn_trace(params, dt, n_steps, seed).map_err(to_py)?;
    Ok(trace.values().to_vec())
}

/// Ensemble-averaged free induction decay of an undriven emitter in OU noise.
#[pyfunction]
fn analytic_fid(b: f64, tau: f64, t: f64) -> f64 {
    experiments::analytic_fid(b, tau, t)
}

/// Fits `0.5 + 0.5 A exp(-t/T2)`; returns `(t2, amplitude, valid)`.
#[pyfunction]
fn fit_t2(times: Vec<f64>, mean: Vec<f64>, std_error: Vec<f64>) -> PyResult<(f64, f64, bool)> {
    let signal = EnsembleSignal::new(times, mean, std_error).map_err(to_py)?;
    let fit = experiments::fit_t2(&signal).map_err(to_py)?;
    Ok((fit.t2, fit.amplitude, fit.valid))
}

/// Ramsey ensemble in OU noise. `delta_drive=None` leaves the emitter
/// undriven. Returns a dict with the sampled signal and its T2 fit.
#[pyfunction]
#[pyo3(signature = (s, b, tau, delta_drive=None, n_trajectories=200, horizon=33.3, n_sample_times=400, seed=0))]
#[allow(clippy::too_many_arguments)]
fn ramsey<'py>(
    py: Python<'py>,
    s: f64,
    b: f64,
    tau: f64,
    delta_drive: Option<f64>,
    n_trajectories: usize,
    horizon: f64,
    n_sample_times: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let emitter = match delta_drive {
        Some(d) => EmitterConfig::protected(s, d).map_err(to_py)?,
        None => EmitterConfig::unprotected(s),
    };
    let noise = NoiseModel::Ou(OUParams::new(b, tau).map_err(to_py)?);
    let mut cfg = RamseyConfig::new(emitter, noise);
    cfg.n_trajectories = n_trajectories;
    cfg.horizon = horizon;
    cfg.n_sample_times = n_sample_times;
    cfg.master_seed = seed;
    let signal = py.detach(|| experiments::ramsey_ensemble(&cfg)).map_err(to_py)?;
    let fit = experiments::fit_t2(&signal).ok();
    let out = PyDict::new(py);
    out.set_item("times", &signal.times)?;
    out.set_item("mean", &signal.mean)?;
    out.set_item("std_error", &signal.std_error)?;
    out.set_item("ripple", signal.ripple_amplitude)?;
    out.set_item("t2", fit.as_ref().map(|f| f.t2))?;
    out.set_item("amplitude", fit.as_ref().map(|f| f.amplitude))?;
    Ok(out)
}

fn chi_rows(r: &ScenarioResult) -> Vec<Vec<(f64, f64)>> {
    (0..4).map(|i| (0..4).map(|j| (r.chi.projected[(i, j)].re, r.chi.projected[(i, j)].im)).collect()).collect()
}

/// Process tomography of `"x_pi"` or `"hadamard"` under telegraph noise.
/// Returns `{scenario: {"fidelity": F, "chi": [[(re, im)]]}}` for the
/// ideal, noisy and protected runs.
#[pyfunction]
#[pyo3(signature = (gate="x_pi", rabi=tomography::DEFAULT_GATE_RABI, exact=true, n_traces=100, seed=0))]
fn qpt<'py>(
    py: Python<'py>,
    gate: &str,
    rabi: f64,
    exact: bool,
    n_traces: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = match gate {
        "x_pi" => GateSpec::x_pi(rabi),
        "hadamard" => GateSpec::hadamard(rabi),
        other => return Err(PyValueError::new_err(format!("unknown gate {other:?}"))),
    };
    let mut cfg = TomographyConfig::new(spec);
    cfg.exact = exact;
    cfg.n_traces = n_traces;
    cfg.master_seed = seed;
    let result = py.detach(|| tomography::qpt_experiment(&cfg)).map_err(to_py)?;
    let out = PyDict::new(py);
    for r in [&result.ideal, &result.noisy, &result.protected] {
        let entry = PyDict::new(py);
        entry.set_item("fidelity", r.fidelity)?;
        entry.set_item("chi", chi_rows(r))?;
        out.set_item(r.scenario.name(), entry)?;
    }
    Ok(out)
}

/// Runs a named experiment from TOML text into `out`; returns the manifest as JSON.
#[pyfunction]
#[pyo3(signature = (experiment, config="", out=None, seed=None, threads=None))]
fn run_experiment(
    py: Python<'_>,
    experiment: &str,
    config: &str,
    out: Option<std::path::PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> PyResult<String> {
    let exp = Experiment::parse(experiment).map_err(to_py)?;
    let overrides = Overrides { sets: Vec::new(), out, seed, threads };
    let cfg = parse_config_str(exp, config, &overrides).map_err(to_py)?;
    let manifest = py.detach(|| run(&cfg)).map_err(to_py)?;
    serde_json::to_string(&manifest).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "starkshield")]
fn starkshield_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(protection_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j0, m)?)?;
    m.add_function(wrap_pyfunction!(stark_shift_linear, m)?)?;
    m.add_function(wrap_pyfunction!(stark_shift_exact, m)?)?;
    m.add_function(wrap_pyfunction!(protection_table, m)?)?;
    m.add_function(wrap_pyfunction!(ou_trace, m)?)?;
    m.add_function(wrap_pyfunction!(rtn_trace, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_fid, m)?)?;
    m.add_function(wrap_pyfunction!(fit_t2, m)?)?;
    m.add_function(wrap_pyfunction!(ramsey, m)?)?;
    m.add_function(wrap_pyfunction!(qpt, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("DEFAULT_GATE_RABI", tomography::DEFAULT_GATE_RABI)?;
    Ok(())
}
