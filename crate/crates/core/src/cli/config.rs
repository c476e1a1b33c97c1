//! Run configuration: TOML file plus `--set key=value` overrides.
//!
//! Every section states its time unit (`tau` for bath-correlation-time
//! experiments, `gamma` for the spectroscopy map, where times are in `1/gamma`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::emitter::{protection_ratio, EmitterConfig};
use crate::error::{Error, Result};
use crate::experiments::{NoiseModel, NoiseValidationConfig, RamseyConfig, SpectroscopyConfig};
use crate::noise::{OUParams, RTNParams};
use crate::propagator::StepControl;
use crate::tomography::{GateSpec, PulseConvention, TomographyConfig, DEFAULT_GATE_RABI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    NoiseValidate,
    Ramsey,
    GainSweep,
    Spectroscopy,
    Qpt,
    ProtectionTable,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::NoiseValidate,
        Experiment::Ramsey,
        Experiment::GainSweep,
        Experiment::Spectroscopy,
        Experiment::Qpt,
        Experiment::ProtectionTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::NoiseValidate => "noise-validate",
            Experiment::Ramsey => "ramsey",
            Experiment::GainSweep => "gain-sweep",
            Experiment::Spectroscopy => "spectroscopy",
            Experiment::Qpt => "qpt",
            Experiment::ProtectionTable => "protection-table",
        }
    }

    /// Key of the TOML section holding this experiment's parameters.
    pub fn section(self) -> &'static str {
        match self {
            Experiment::NoiseValidate => "noise_validate",
            Experiment::Ramsey => "ramsey",
            Experiment::GainSweep => "gain_sweep",
            Experiment::Spectroscopy => "spectroscopy",
            Experiment::Qpt => "qpt",
            Experiment::ProtectionTable => "protection_table",
        }
    }

    /// Unit every time-like value of the section is expressed in.
    pub fn time_unit(self) -> &'static str {
        match self {
            Experiment::Spectroscopy => "gamma",
            Experiment::ProtectionTable => "none",
            _ => "tau",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{name}`")))
    }
}

fn default_steps() -> usize {
    StepControl::default().steps_per_drive_period
}
fn default_max_step() -> f64 {
    f64::INFINITY
}
fn default_tau_unit() -> String {
    "tau".into()
}
fn default_gamma_unit() -> String {
    "gamma".into()
}
fn default_none_unit() -> String {
    "none".into()
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseValidateSection {
    #[serde(default = "default_tau_unit")]
    pub units: String,
    #[serde(default = "d_b")]
    pub b: f64,
    #[serde(default = "d_one")]
    pub tau: f64,
    #[serde(default = "d_xi_qpt")]
    pub xi: f64,
    #[serde(default = "d_one")]
    pub chi: f64,
    #[serde(default = "d_n_traces")]
    pub n_traces: usize,
    #[serde(default = "d_ou_horizon")]
    pub ou_horizon: f64,
    #[serde(default = "d_horizon")]
    pub rtn_horizon: f64,
    #[serde(default = "d_lags")]
    pub lags: Vec<f64>,
}

fn d_b() -> f64 {
    19.0
}
fn d_one() -> f64 {
    1.0
}
fn d_xi_qpt() -> f64 {
    8.0
}
fn d_n_traces() -> usize {
    10_000
}
fn d_ou_horizon() -> f64 {
    5.0
}
fn d_horizon() -> f64 {
    33.3
}
fn d_lags() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 1.0]
}
fn d_n_samples() -> usize {
    400
}

impl Default for NoiseValidateSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

/// Ramsey ensemble. `delta_drive` absent means no correction drives;
/// `omega` defaults to `protection_ratio(s) * delta_drive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseySection {
    #[serde(default = "default_tau_unit")]
    pub units: String,
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_drive: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    pub noise: NoiseModel,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_n_traces")]
    pub n_trajectories: usize,
    #[serde(default = "d_n_samples")]
    pub n_sample_times: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dt: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps_per_drive_period: usize,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSweepSection {
    #[serde(default = "default_tau_unit")]
    pub units: String,
    pub s_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    pub b: f64,
    #[serde(default = "d_one")]
    pub tau: f64,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_n_traces")]
    pub n_trajectories: usize,
    #[serde(default = "d_n_samples")]
    pub n_sample_times: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dt: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps_per_drive_period: usize,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectroscopySection {
    #[serde(default = "default_gamma_unit")]
    pub units: String,
    #[serde(default = "d_one")]
    pub gamma: f64,
    #[serde(default = "d_xi_spec")]
    pub xi: f64,
    #[serde(default = "d_g")]
    pub g: f64,
    #[serde(default = "d_s_spec")]
    pub s: f64,
    #[serde(default = "d_delta_omegas")]
    pub delta_omegas: Vec<f64>,
    #[serde(default = "d_chis")]
    pub chis: Vec<f64>,
    #[serde(default = "d_evolve")]
    pub evolve_time: f64,
    #[serde(default = "d_spec_traj")]
    pub n_trajectories: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dt: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps_per_drive_period: usize,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
}

fn d_xi_spec() -> f64 {
    4.0
}
fn d_g() -> f64 {
    0.1
}
fn d_s_spec() -> f64 {
    40.0
}
fn d_delta_omegas() -> Vec<f64> {
    SpectroscopyConfig::default().delta_omegas
}
fn d_chis() -> Vec<f64> {
    SpectroscopyConfig::default().chis
}
fn d_evolve() -> f64 {
    15.0
}
fn d_spec_traj() -> usize {
    100
}

impl Default for SpectroscopySection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateName {
    XPi,
    Hadamard,
}

impl GateName {
    pub fn name(self) -> &'static str {
        match self {
            GateName::XPi => "x_pi",
            GateName::Hadamard => "hadamard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QptSection {
    #[serde(default = "default_tau_unit")]
    pub units: String,
    #[serde(default = "d_gates")]
    pub gates: Vec<GateName>,
    #[serde(default = "d_rabi")]
    pub rabi: f64,
    #[serde(default)]
    pub convention: PulseConvention,
    #[serde(default = "d_xi_qpt")]
    pub xi: f64,
    #[serde(default = "d_one")]
    pub chi: f64,
    #[serde(default = "d_s_qpt")]
    pub s: f64,
    #[serde(default = "d_delta_qpt")]
    pub delta_drive: f64,
    #[serde(default = "d_shots")]
    pub shots: usize,
    #[serde(default)]
    pub exact: bool,
    #[serde(default = "d_qpt_traces")]
    pub n_traces: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dt: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps_per_drive_period: usize,
    #[serde(default = "default_max_step")]
    pub max_step: f64,
}

fn d_gates() -> Vec<GateName> {
    vec![GateName::XPi, GateName::Hadamard]
}
fn d_rabi() -> f64 {
    DEFAULT_GATE_RABI
}
fn d_s_qpt() -> f64 {
    80.0
}
fn d_delta_qpt() -> f64 {
    4000.0
}
fn d_shots() -> usize {
    10_000
}
fn d_qpt_traces() -> usize {
    100
}

impl Default for QptSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectionTableSection {
    #[serde(default = "default_none_unit")]
    pub units: String,
    #[serde(default = "d_s_values")]
    pub s_values: Vec<f64>,
}

fn d_s_values() -> Vec<f64> {
    vec![1.0, 2.0, 10.0, 20.0, 40.0, 80.0, 1e3, 1e6]
}

impl Default for ProtectionTableSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

/// A fully resolved run: one experiment and its section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; 0 picks the machine default.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_validate: Option<NoiseValidateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramsey: Option<RamseySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_sweep: Option<GainSweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectroscopy: Option<SpectroscopySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qpt: Option<QptSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protection_table: Option<ProtectionTableSection>,
}

/// Command-line pieces merged into the file configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sets: Vec<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Reads `path` (if any), applies overrides, and resolves defaults.
pub fn parse_config(experiment: Experiment, path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let text = match path {
        Some(p) => {
            std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?
        }
        None => String::new(),
    };
    parse_config_str(experiment, &text, overrides)
}

pub fn parse_config_str(experiment: Experiment, text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
    match table.get("experiment") {
        Some(toml::Value::String(s)) if s != experiment.name() => {
            return Err(Error::Config(format!(
                "config is for experiment `{s}` but `{}` was requested",
                experiment.name()
            )));
        }
        Some(toml::Value::String(_)) | None => {}
        Some(_) => return Err(Error::Config("`experiment` must be a string".into())),
    }
    table.insert("experiment".into(), toml::Value::String(experiment.name().into()));
    for set in &overrides.sets {
        apply_set(&mut table, set)?;
    }
    if let Some(out) = &overrides.out {
        table.insert("out".into(), toml::Value::String(out.display().to_string()));
    }
    if let Some(seed) = overrides.seed {
        let v =
            i64::try_from(seed).map_err(|_| Error::Config(format!("seed {seed} exceeds the TOML integer range")))?;
        table.insert("master_seed".into(), toml::Value::Integer(v));
    }
    if let Some(threads) = overrides.threads {
        table.insert("threads".into(), toml::Value::Integer(threads as i64));
    }
    for other in Experiment::ALL {
        if other != experiment && table.contains_key(other.section()) {
            return Err(Error::Config(format!(
                "section [{}] does not apply to experiment `{}`",
                other.section(),
                experiment.name()
            )));
        }
    }
    if !table.contains_key(experiment.section()) {
        table.insert(experiment.section().into(), toml::Value::Table(toml::Table::new()));
    }
    let cfg: RunConfig =
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    cfg.resolve()
}

/// Applies one `a.b.c=value` override. The value is read as a TOML value
/// and falls back to a plain string.
fn apply_set(table: &mut toml::Table, set: &str) -> Result<()> {
    let (key, raw) = set.split_once('=').ok_or_else(|| Error::Config(format!("override `{set}` is not key=value")))?;
    let key = key.trim();
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn check_unit(experiment: Experiment, units: &str) -> Result<()> {
    if units != experiment.time_unit() {
        return Err(Error::Config(format!(
            "[{}] values are in units of `{}`, got units = \"{units}\"",
            experiment.section(),
            experiment.time_unit()
        )));
    }
    Ok(())
}

fn step(steps: usize, max_step: f64) -> StepControl {
    StepControl { steps_per_drive_period: steps, max_step, ..StepControl::default() }
}

impl RunConfig {
    /// Checks units and fills derived values (`omega`).
    fn resolve(mut self) -> Result<Self> {
        let e = self.experiment;
        let unit = match e {
            Experiment::NoiseValidate => self.noise_validate.get_or_insert_with(Default::default).units.clone(),
            Experiment::Ramsey => {
                let r = self.ramsey.as_mut().ok_or_else(|| Error::Config("missing [ramsey]".into()))?;
                if let (Some(d), None) = (r.delta_drive, r.omega) {
                    r.omega = Some(protection_ratio(r.s).map_err(|e| Error::Config(e.to_string()))? * d);
                }
                r.units.clone()
            }
            Experiment::GainSweep => {
                self.gain_sweep.as_ref().ok_or_else(|| Error::Config("missing [gain_sweep]".into()))?.units.clone()
            }
            Experiment::Spectroscopy => self.spectroscopy.get_or_insert_with(Default::default).units.clone(),
            Experiment::Qpt => self.qpt.get_or_insert_with(Default::default).units.clone(),
            Experiment::ProtectionTable => self.protection_table.get_or_insert_with(Default::default).units.clone(),
        };
        check_unit(e, &unit)?;
        Ok(self)
    }

    /// TOML text that parses back to this configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn noise_validation(&self) -> Result<NoiseValidationConfig> {
        let c = self.noise_validate.clone().unwrap_or_default();
        Ok(NoiseValidationConfig {
            ou: OUParams::new(c.b, c.tau)?,
            rtn: RTNParams::new(c.xi, c.chi)?,
            n_traces: c.n_traces,
            ou_horizon: c.ou_horizon,
            rtn_horizon: c.rtn_horizon,
            lags: c.lags,
            master_seed: self.master_seed,
        })
    }

    pub fn ramsey_config(&self) -> Result<RamseyConfig> {
        let r = self.ramsey.as_ref().ok_or_else(|| Error::Config("missing [ramsey]".into()))?;
        let emitter = match r.delta_drive {
            Some(d) => EmitterConfig { omega_drive: r.omega.unwrap_or(f64::NAN), ..EmitterConfig::protected(r.s, d)? },
            None => EmitterConfig::unprotected(r.s),
        };
        let mut cfg = RamseyConfig::new(emitter, r.noise);
        cfg.horizon = r.horizon;
        cfg.n_trajectories = r.n_trajectories;
        cfg.n_sample_times = r.n_sample_times;
        cfg.master_seed = self.master_seed;
        cfg.noise_dt = r.noise_dt;
        cfg.step = step(r.steps_per_drive_period, r.max_step);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Base Ramsey configuration and the `(s, Delta)` grid of a gain sweep.
    pub fn gain_sweep_config(&self) -> Result<(RamseyConfig, Vec<f64>, Vec<f64>)> {
        let g = self.gain_sweep.as_ref().ok_or_else(|| Error::Config("missing [gain_sweep]".into()))?;
        let noise = NoiseModel::Ou(OUParams::new(g.b, g.tau)?);
        let mut cfg = RamseyConfig::new(EmitterConfig::unprotected(1.0), noise);
        cfg.horizon = g.horizon;
        cfg.n_trajectories = g.n_trajectories;
        cfg.n_sample_times = g.n_sample_times;
        cfg.master_seed = self.master_seed;
        cfg.noise_dt = g.noise_dt;
        cfg.step = step(g.steps_per_drive_period, g.max_step);
        cfg.validate()?;
        if g.s_values.is_empty() || g.delta_values.is_empty() {
            return Err(Error::Config("gain sweep needs non-empty s_values and delta_values".into()));
        }
        Ok((cfg, g.s_values.clone(), g.delta_values.clone()))
    }

    pub fn spectroscopy_config(&self) -> Result<SpectroscopyConfig> {
        let c = self.spectroscopy.clone().unwrap_or_default();
        let cfg = SpectroscopyConfig {
            gamma: c.gamma,
            xi: c.xi,
            g: c.g,
            s: c.s,
            delta_omegas: c.delta_omegas,
            chis: c.chis,
            evolve_time: c.evolve_time,
            n_trajectories: c.n_trajectories,
            master_seed: self.master_seed,
            correction: c.correction,
            noise_dt: c.noise_dt,
            step: step(c.steps_per_drive_period, c.max_step),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// One tomography configuration per requested gate.
    pub fn qpt_configs(&self) -> Result<Vec<(GateName, TomographyConfig)>> {
        let q = self.qpt.clone().unwrap_or_default();
        if q.gates.is_empty() {
            return Err(Error::Config("[qpt] gates must not be empty".into()));
        }
        q.gates
            .iter()
            .map(|&name| {
                let mut gate = match name {
                    GateName::XPi => GateSpec::x_pi(q.rabi),
                    GateName::Hadamard => GateSpec::hadamard(q.rabi),
                };
                gate.convention = q.convention;
                let mut cfg = TomographyConfig::new(gate);
                cfg.rtn = RTNParams::new(q.xi, q.chi)?;
                cfg.s = q.s;
                cfg.delta_drive = q.delta_drive;
                cfg.shots = q.shots;
                cfg.exact = q.exact;
                cfg.n_traces = q.n_traces;
                cfg.master_seed = self.master_seed;
                cfg.noise_dt = q.noise_dt;
                cfg.step = step(q.steps_per_drive_period, q.max_step);
                cfg.validate()?;
                Ok((name, cfg))
            })
            .collect()
    }

    pub fn protection_s_values(&self) -> Vec<f64> {
        self.protection_table.clone().unwrap_or_default().s_values
    }
}
