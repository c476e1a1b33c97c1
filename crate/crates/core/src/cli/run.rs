//! Experiment dispatch and result files.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::emitter::protection_table;
use crate::error::{Error, Result};
use crate::experiments::{
    coherence_gain, fit_t2, gain_sweep, probe_response_map, ramsey_ensemble, refocus_threshold, validate_noise,
    CorrelationCheck, GainReference, NoiseModel,
};
use crate::linalg::min_eigenvalue4;
use crate::parallel::with_threads;
use crate::tomography::{qpt_experiment, ChiMatrix, ScenarioResult};

use super::config::{Experiment, RunConfig};
use super::output::{fmt_f64, write_atomic, write_csv};

pub const MANIFEST: &str = "manifest.json";
pub const PARTIAL_MARKER: &str = "PARTIAL_RESULTS";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub master_seed: u64,
    pub threads: usize,
    /// Resolved configuration.
    pub config: Value,
    pub duration_seconds: f64,
    pub summary: Value,
    pub files: Vec<String>,
}

/// Process exit status for an error: 2 for configuration problems, 3 for
/// failures during the computation.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        _ => 3,
    }
}

/// Runs the configured experiment into `cfg.out`. On failure a
/// `PARTIAL_RESULTS` marker lists the error and any files already written;
/// the manifest is only written after success.
pub fn run(cfg: &RunConfig) -> Result<RunManifest> {
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;
    for stale in [MANIFEST, PARTIAL_MARKER] {
        let p = out.join(stale);
        if p.exists() {
            std::fs::remove_file(&p)?;
        }
    }
    let start = Instant::now();
    let mut files = Vec::new();
    let result = with_threads(cfg.threads, || dispatch(cfg, &out, &mut files));
    match result {
        Ok(summary) => {
            let manifest = RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                experiment: cfg.experiment.name().into(),
                master_seed: cfg.master_seed,
                threads: cfg.threads,
                config: serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?,
                duration_seconds: start.elapsed().as_secs_f64(),
                summary,
                files,
            };
            let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Numerical(e.to_string()))?;
            write_atomic(&out.join(MANIFEST), text.as_bytes())?;
            Ok(manifest)
        }
        Err(e) => {
            let mut note = format!("experiment: {}\nerror: {e}\n", cfg.experiment.name());
            for f in &files {
                note.push_str(&format!("written: {f}\n"));
            }
            std::fs::write(out.join(PARTIAL_MARKER), note)?;
            Err(e)
        }
    }
}

fn dispatch(cfg: &RunConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    if cfg.experiment == Experiment::Qpt {
        return run_qpt(cfg, out, files);
    }
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        write_csv(&out.join(name), header, &rows)?;
        files.push(name.to_string());
        Ok(())
    };
    match cfg.experiment {
        Experiment::NoiseValidate => run_noise_validate(cfg, &mut emit),
        Experiment::Ramsey => run_ramsey(cfg, &mut emit),
        Experiment::GainSweep => run_gain_sweep(cfg, &mut emit),
        Experiment::Spectroscopy => run_spectroscopy(cfg, &mut emit),
        Experiment::Qpt => unreachable!("handled above"),
        Experiment::ProtectionTable => run_protection_table(cfg, &mut emit),
    }
}

type Emit<'a> = dyn FnMut(&str, &[&str], Vec<Vec<String>>) -> Result<()> + 'a;

fn f(x: f64) -> String {
    fmt_f64(x)
}

fn correlation_rows(checks: &[CorrelationCheck]) -> Vec<Vec<String>> {
    checks
        .iter()
        .map(|c| vec![f(c.estimate.lag), f(c.estimate.estimate), f(c.expected), f(c.estimate.std_error)])
        .collect()
}

fn run_noise_validate(cfg: &RunConfig, emit: &mut Emit) -> Result<Value> {
    let v = validate_noise(&cfg.noise_validation()?)?;
    let header = ["lag", "estimate", "expected", "stderr"];
    emit("ou_autocorrelation.csv", &header, correlation_rows(&v.ou))?;
    emit("rtn_autocorrelation.csv", &header, correlation_rows(&v.rtn))?;
    let (m, se) = v.rtn_jumps;
    emit("rtn_jumps.csv", &["mean", "stderr", "expected"], vec![vec![f(m), f(se), f(v.rtn_jumps_expected)]])?;
    let max_z = |c: &[CorrelationCheck]| c.iter().map(CorrelationCheck::z_score).fold(0.0, f64::max);
    Ok(json!({
        "ou_max_z": max_z(&v.ou),
        "rtn_max_z": max_z(&v.rtn),
        "rtn_jumps_mean": m,
        "rtn_jumps_stderr": se,
        "rtn_jumps_expected": v.rtn_jumps_expected,
    }))
}

fn run_ramsey(cfg: &RunConfig, emit: &mut Emit) -> Result<Value> {
    let rc = cfg.ramsey_config()?;
    let signal = ramsey_ensemble(&rc)?;
    let fit = fit_t2(&signal).ok();
    let rows = signal
        .times
        .iter()
        .zip(&signal.mean)
        .zip(&signal.std_error)
        .map(|((t, m), se)| vec![f(*t), f(*m), f(*se), f(fit.as_ref().map_or(f64::NAN, |x| x.curve(*t)))])
        .collect();
    emit("ramsey_signal.csv", &["t", "mean", "stderr", "fit"], rows)?;
    let gain = match (&fit, rc.noise) {
        (Some(fit), NoiseModel::Ou(p)) => coherence_gain(fit, p.b, p.tau, GainReference::SlowBath).ok(),
        _ => None,
    };
    Ok(json!({
        "t2": fit.as_ref().map(|x| x.t2),
        "amplitude": fit.as_ref().map(|x| x.amplitude),
        "fit_valid": fit.as_ref().map(|x| x.valid),
        "ripple": signal.ripple_amplitude,
        "gain": gain,
        "omega": rc.emitter.omega_drive,
    }))
}

fn run_gain_sweep(cfg: &RunConfig, emit: &mut Emit) -> Result<Value> {
    let (base, s_values, delta_values) = cfg.gain_sweep_config()?;
    let rows = gain_sweep(&s_values, &delta_values, &base)?;
    let csv = rows
        .iter()
        .map(|r| vec![f(r.s), f(r.delta), f(r.omega), f(r.t2), f(r.gain), f(r.ripple), f(r.stderr)])
        .collect();
    emit("gain_table.csv", &["s", "delta", "omega", "t2", "gain", "ripple", "stderr"], csv)?;
    let failures: Vec<Value> =
        rows.iter().filter_map(|r| r.error.as_ref().map(|e| json!({"s": r.s, "delta": r.delta, "error": e}))).collect();
    let best = rows.iter().filter(|r| r.gain.is_finite()).map(|r| r.gain).fold(f64::NAN, f64::max);
    Ok(json!({ "rows": rows.len(), "max_gain": best, "failed_rows": failures }))
}

fn run_spectroscopy(cfg: &RunConfig, emit: &mut Emit) -> Result<Value> {
    let sc = cfg.spectroscopy_config()?;
    let map = probe_response_map(&sc)?;
    let mut rows = Vec::with_capacity(map.excitation.len());
    for (ci, chi) in map.chis.iter().enumerate() {
        for (di, dw) in map.delta_omegas.iter().enumerate() {
            let (e, se) = map.at(ci, di);
            rows.push(vec![f(*dw), f(*chi), f(e), f(se)]);
        }
    }
    emit("spectroscopy_map.csv", &["delta_omega", "chi", "excitation", "stderr"], rows)?;
    let peaks: Vec<Value> = (0..map.chis.len())
        .map(|ci| json!({"chi": map.chis[ci], "peak_delta_omega": map.delta_omegas[map.argmax(ci)]}))
        .collect();
    Ok(json!({
        "correction": sc.correction,
        "peaks": peaks,
        "refocus_threshold": refocus_threshold(&map),
    }))
}

fn chi_rows(chi: &ChiMatrix) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            rows.push(vec![i.to_string(), j.to_string(), f(chi[(i, j)].re), f(chi[(i, j)].im)]);
        }
    }
    rows
}

fn run_qpt(cfg: &RunConfig, out: &Path, files: &mut Vec<String>) -> Result<Value> {
    let mut gates = serde_json::Map::new();
    for (name, tc) in cfg.qpt_configs()? {
        let q = qpt_experiment(&tc)?;
        let mut entry = serde_json::Map::new();
        for r in [&q.ideal, &q.noisy, &q.protected] {
            let file = format!("chi_{}_{}.csv", name.name(), r.scenario.name());
            write_csv(&out.join(&file), &["i", "j", "re", "im"], &chi_rows(&r.chi.projected))?;
            files.push(file);
            entry.insert(r.scenario.name().into(), scenario_summary(r));
        }
        gates.insert(name.name().into(), Value::Object(entry));
    }
    let summary = json!({ "gates": gates });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Numerical(e.to_string()))?;
    let file = "qpt_summary.json";
    std::fs::write(out.join(file), text)?;
    files.push(file.into());
    Ok(summary)
}

fn scenario_summary(r: &ScenarioResult) -> Value {
    json!({
        "fidelity": r.fidelity,
        "raw_min_eigenvalue": min_eigenvalue4(&r.chi.raw),
    })
}

fn run_protection_table(cfg: &RunConfig, emit: &mut Emit) -> Result<Value> {
    let rows = protection_table(&cfg.protection_s_values())?;
    let csv = rows.iter().map(|r| vec![f(r.s), f(r.rhs), f(r.ratio), f(r.asymptote), f(r.residual)]).collect();
    emit("protection_table.csv", &["s", "rhs", "ratio", "asymptote", "residual"], csv)?;
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(json!({ "rows": rows.len(), "max_residual": worst }))
}
