use serde::{Deserialize, Serialize};

use crate::emitter::{EmitterConfig, HamiltonianSpec, ProbeConfig};
use crate::error::{Error, Result};
use crate::noise::{mean_and_std_error, RTNParams};
use crate::parallel::{derive_seed, ordered_map};
use crate::propagator::{evolve_lindblad, DensityMatrix, StepControl};

use super::ramsey::{make_trace, NoiseModel};

/// Weak-probe response of a decaying emitter under telegraph noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectroscopyConfig {
    pub gamma: f64,
    /// Telegraph amplitude.
    pub xi: f64,
    /// Probe Rabi amplitude.
    pub g: f64,
    pub s: f64,
    pub delta_omegas: Vec<f64>,
    pub chis: Vec<f64>,
    pub evolve_time: f64,
    pub n_trajectories: usize,
    pub master_seed: u64,
    /// Detuning of the correction drives; `None` runs without correction.
    pub correction: Option<f64>,
    pub noise_dt: Option<f64>,
    pub step: StepControl,
}

impl Default for SpectroscopyConfig {
    fn default() -> Self {
        SpectroscopyConfig {
            gamma: 1.0,
            xi: 4.0,
            g: 0.1,
            s: 40.0,
            delta_omegas: (0..=16).map(|k| -8.0 + k as f64).collect(),
            chis: vec![0.4, 1.0, 2.0, 4.0, 10.0, 20.0, 40.0],
            evolve_time: 15.0,
            n_trajectories: 100,
            master_seed: 0,
            correction: None,
            noise_dt: None,
            step: StepControl::default(),
        }
    }
}

impl SpectroscopyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("gamma must be > 0"));
        }
        if !(self.g > 0.0) {
            return Err(Error::invalid("probe amplitude g must be > 0"));
        }
        if !(self.evolve_time > 0.0) {
            return Err(Error::invalid("evolve_time must be > 0"));
        }
        if self.n_trajectories == 0 {
            return Err(Error::invalid("n_trajectories must be >= 1"));
        }
        if self.delta_omegas.is_empty() || self.chis.is_empty() {
            return Err(Error::invalid("delta_omega and chi grids must be non-empty"));
        }
        if self.delta_omegas.windows(2).any(|w| w[1] <= w[0]) || self.chis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grids must be strictly increasing"));
        }
        for &chi in &self.chis {
            RTNParams::new(self.xi, chi)?;
        }
        if let Some(d) = self.correction {
            if !(d > 0.0) {
                return Err(Error::invalid("correction detuning must be > 0"));
            }
        }
        self.step.validate()
    }

    /// Emitter for one probe detuning.
    pub fn emitter(&self, delta_omega: f64) -> Result<EmitterConfig> {
        let base = match self.correction {
            Some(d) => EmitterConfig::protected(self.s, d)?,
            None => EmitterConfig::unprotected(self.s),
        };
        let em = base.with_gamma(self.gamma).with_probe(ProbeConfig { g: self.g, delta_omega });
        em.validate()?;
        Ok(em)
    }
}

/// Excitation `Tr(|2><2| rho(T))` on the `chi x delta_omega` grid, stored
/// chi-major: entry `(c, d)` sits at `c * delta_omegas.len() + d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseMap {
    pub delta_omegas: Vec<f64>,
    pub chis: Vec<f64>,
    pub excitation: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl ResponseMap {
    pub fn at(&self, chi_index: usize, delta_index: usize) -> (f64, f64) {
        let k = chi_index * self.delta_omegas.len() + delta_index;
        (self.excitation[k], self.std_error[k])
    }

    /// Index of the largest excitation in one chi row (first one on ties).
    pub fn argmax(&self, chi_index: usize) -> usize {
        let n = self.delta_omegas.len();
        let row = &self.excitation[chi_index * n..(chi_index + 1) * n];
        let mut best = 0;
        for (k, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = k;
            }
        }
        best
    }

    /// Grid index closest to `delta_omega`.
    pub fn nearest_index(&self, delta_omega: f64) -> usize {
        let mut best = 0;
        for (k, v) in self.delta_omegas.iter().enumerate() {
            if (v - delta_omega).abs() < (self.delta_omegas[best] - delta_omega).abs() {
                best = k;
            }
        }
        best
    }

    /// Whether the row maximum lies within `cells` grid cells of `delta_omega`.
    pub fn peak_near(&self, chi_index: usize, delta_omega: f64, cells: usize) -> bool {
        self.argmax(chi_index).abs_diff(self.nearest_index(delta_omega)) <= cells
    }
}

/// Runs the map. Each chi row draws its telegraph traces from stream
/// `1 + chi_index`; the same traces are reused for every probe detuning of
/// that row. Trajectories start in `|1><1|`.
pub fn probe_response_map(cfg: &SpectroscopyConfig) -> Result<ResponseMap> {
    cfg.validate()?;
    let n_d = cfg.delta_omegas.len();
    let mut excitation = Vec::with_capacity(cfg.chis.len() * n_d);
    let mut std_error = Vec::with_capacity(cfg.chis.len() * n_d);
    for (ci, &chi) in cfg.chis.iter().enumerate() {
        let model = NoiseModel::Rtn(RTNParams::new(cfg.xi, chi)?);
        let dt = cfg.noise_dt.unwrap_or_else(|| model.default_dt(cfg.evolve_time));
        let traces = ordered_map(cfg.n_trajectories, |i| {
            make_trace(&model, dt, cfg.evolve_time, derive_seed(cfg.master_seed, 1 + ci as u64, i as u64))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        for &dw in &cfg.delta_omegas {
            let em = cfg.emitter(dw)?;
            let pops = ordered_map(traces.len(), |i| {
                let spec = HamiltonianSpec::new(&em, &traces[i]);
                evolve_lindblad(DensityMatrix::basis(1), &spec, cfg.gamma, 0.0, cfg.evolve_time, &cfg.step, &[])
                    .map(|ev| ev.state.population(2))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let (m, se) = mean_and_std_error(&pops);
            excitation.push(m);
            std_error.push(se);
        }
    }
    Ok(ResponseMap { delta_omegas: cfg.delta_omegas.clone(), chis: cfg.chis.clone(), excitation, std_error })
}

/// Largest chi of the grid such that every row up to and including it peaks
/// within one cell of `delta_omega = 0`. `None` when the first row already
/// misses.
pub fn refocus_threshold(map: &ResponseMap) -> Option<f64> {
    let mut last = None;
    for (ci, &chi) in map.chis.iter().enumerate() {
        if !map.peak_near(ci, 0.0, 1) {
            break;
        }
        last = Some(chi);
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SpectroscopyConfig {
        SpectroscopyConfig {
            delta_omegas: vec![-4.0, 0.0, 4.0],
            chis: vec![0.4],
            evolve_time: 3.0,
            n_trajectories: 4,
            ..SpectroscopyConfig::default()
        }
    }

    fn map_from(rows: &[&[f64]]) -> ResponseMap {
        let n = rows[0].len();
        ResponseMap {
            delta_omegas: (0..n).map(|k| k as f64 - (n / 2) as f64).collect(),
            chis: (0..rows.len()).map(|k| (k + 1) as f64).collect(),
            excitation: rows.iter().flat_map(|r| r.iter().copied()).collect(),
            std_error: vec![0.0; rows.len() * n],
        }
    }

    #[test]
    fn zero_probe_is_rejected() {
        let cfg = SpectroscopyConfig { g: 0.0, ..tiny() };
        assert!(probe_response_map(&cfg).is_err());
    }

    #[test]
    fn excitation_is_a_small_probability() {
        let map = probe_response_map(&tiny()).unwrap();
        for v in &map.excitation {
            assert!(*v >= 0.0 && *v < 0.05, "{v}");
        }
    }

    #[test]
    fn static_resonance_is_found() {
        // chi = 0 leaves the telegraph frozen at +-xi; the probe is resonant at +-xi.
        let cfg = SpectroscopyConfig {
            delta_omegas: vec![-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0],
            chis: vec![0.0],
            evolve_time: 8.0,
            n_trajectories: 1,
            ..SpectroscopyConfig::default()
        };
        let map = probe_response_map(&cfg).unwrap();
        let peak = map.delta_omegas[map.argmax(0)];
        assert_eq!(peak.abs(), 4.0);
    }

    #[test]
    fn threshold_stops_at_first_miss() {
        let map = map_from(&[
            &[0.0, 1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0, 0.0],
        ]);
        assert_eq!(refocus_threshold(&map), Some(2.0));
        let none = map_from(&[&[0.0, 0.0, 0.0, 0.0, 1.0]]);
        assert_eq!(refocus_threshold(&none), None);
    }

    #[test]
    fn nearest_index_and_argmax() {
        let map = map_from(&[&[0.1, 0.3, 0.2]]);
        assert_eq!(map.nearest_index(0.2), 1);
        assert_eq!(map.argmax(0), 1);
        assert!(map.peak_near(0, 1.0, 1));
        assert!(!map.peak_near(0, 1.0, 0));
    }
}
