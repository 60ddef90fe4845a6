//! Run configuration: TOML file sections, command-line overrides, defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use scma_core::analysis::{DistanceModel, Truncation};
use scma_core::geometry::CellGeometry;
use scma_core::optimizer::GaConfig;
use scma_core::simulator::{Detector, PositionMode, SimConfig};
use scma_core::SystemDims;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub k: Option<usize>,
    pub j: Option<usize>,
    pub m: Option<usize>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub c1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub snr_grid: Option<Vec<f64>>,
    pub exact_bep: Option<bool>,
    pub truncation: Option<usize>,
    /// `mean-ratio` or `order-statistic`.
    pub distance: Option<String>,
    pub intervals: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub design_snr_db: Option<f64>,
    pub delta_max: Option<f64>,
    pub rho_min: Option<f64>,
    pub elitism: Option<usize>,
    pub crossover_rate: Option<f64>,
    pub mutation_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub snr_grid: Option<Vec<f64>>,
    pub max_symbols: Option<u64>,
    pub target_errors: Option<u64>,
    /// `mpa` or `ml`.
    pub detector: Option<String>,
    pub iterations: Option<usize>,
    /// Fixed distance ratios; redrawn every codeword when absent.
    pub fixed_distances: Option<Vec<f64>>,
    pub batch_size: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Every section of a configuration file. After [`Config::resolve`] all
/// fields are populated, and the serialised form replays the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub system: SystemSection,
    pub channel: ChannelSection,
    pub analysis: AnalysisSection,
    pub design: DesignSection,
    pub simulation: SimulationSection,
    pub run: RunSection,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Fills unset fields with defaults.
    pub fn resolve(mut self) -> Self {
        let ga = GaConfig::default();
        let sim = SimConfig::default();
        let geom = CellGeometry::default();
        let s = &mut self.system;
        s.k.get_or_insert(4);
        s.j.get_or_insert(6);
        s.m.get_or_insert(4);
        s.n.get_or_insert(2);
        let c = &mut self.channel;
        c.kappa.get_or_insert(10.0);
        c.alpha.get_or_insert(geom.alpha);
        c.c1.get_or_insert(geom.c1);
        let a = &mut self.analysis;
        a.snr_grid.get_or_insert_with(|| sim.snr_grid_db.clone());
        a.exact_bep.get_or_insert(false);
        a.truncation.get_or_insert(3);
        a.distance.get_or_insert_with(|| "mean-ratio".into());
        a.intervals.get_or_insert(32);
        let d = &mut self.design;
        d.population.get_or_insert(ga.population);
        d.generations.get_or_insert(ga.generations);
        d.design_snr_db.get_or_insert(ga.design_snr_db);
        d.delta_max.get_or_insert(4.0);
        d.rho_min.get_or_insert(0.05);
        d.elitism.get_or_insert(ga.elitism);
        d.crossover_rate.get_or_insert(ga.crossover_rate);
        d.mutation_rate.get_or_insert(ga.mutation_rate);
        let m = &mut self.simulation;
        m.snr_grid.get_or_insert_with(|| sim.snr_grid_db.clone());
        m.max_symbols.get_or_insert(sim.max_symbols);
        m.target_errors.get_or_insert(sim.target_errors);
        m.detector.get_or_insert_with(|| "mpa".into());
        m.iterations.get_or_insert(sim.iterations);
        m.batch_size.get_or_insert(sim.batch_size);
        self.run.seed.get_or_insert(1);
        self
    }

    pub fn dims(&self) -> Result<SystemDims, ConfigError> {
        let s = &self.system;
        SystemDims::new(
            s.k.unwrap_or_default(),
            s.j.unwrap_or_default(),
            s.m.unwrap_or_default(),
            s.n.unwrap_or_default(),
        )
        .map_err(|e| ConfigError(format!("[system] {e}")))
    }

    pub fn geometry(&self) -> Result<CellGeometry, ConfigError> {
        CellGeometry::new(
            self.channel.c1.unwrap_or(1.0),
            self.channel.alpha.unwrap_or(3.0),
        )
        .map_err(|e| ConfigError(format!("[channel] {e}")))
    }

    pub fn kappa(&self) -> Result<f64, ConfigError> {
        let k = self.channel.kappa.unwrap_or(10.0);
        if k >= 0.0 && k.is_finite() {
            Ok(k)
        } else {
            Err(ConfigError(format!(
                "[channel] kappa={k} must be a finite value >= 0"
            )))
        }
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(1)
    }

    pub fn truncation(&self) -> Result<Truncation, ConfigError> {
        if self.analysis.exact_bep == Some(true) {
            return Ok(Truncation::Exact);
        }
        match self.analysis.truncation.unwrap_or(3) {
            0 => Err(ConfigError("[analysis] truncation must be >= 1".into())),
            e => Ok(Truncation::MaxUsersInError(e)),
        }
    }

    pub fn distance_model(&self) -> Result<DistanceModel, ConfigError> {
        match self.analysis.distance.as_deref().unwrap_or("mean-ratio") {
            "mean-ratio" => Ok(DistanceModel::MeanRatio),
            "order-statistic" => Ok(DistanceModel::OrderStatistic {
                intervals: self.analysis.intervals.unwrap_or(32),
            }),
            other => Err(ConfigError(format!(
                "[analysis] distance must be mean-ratio or order-statistic, got {other}"
            ))),
        }
    }

    pub fn analysis_grid(&self) -> Result<Vec<f64>, ConfigError> {
        check_grid(
            "analysis",
            self.analysis.snr_grid.clone().unwrap_or_default(),
        )
    }

    pub fn ga_config(&self) -> Result<GaConfig, ConfigError> {
        let d = &self.design;
        let defaults = GaConfig::default();
        let cfg = GaConfig {
            population: d.population.unwrap_or(defaults.population),
            generations: d.generations.unwrap_or(defaults.generations),
            design_snr_db: d.design_snr_db.unwrap_or(defaults.design_snr_db),
            kappa: self.kappa()?,
            geometry: self.geometry()?,
            // The design metric always uses the truncated bound.
            truncation: match self.analysis.truncation.unwrap_or(3) {
                0 => return Err(ConfigError("[analysis] truncation must be >= 1".into())),
                e => Truncation::MaxUsersInError(e),
            },
            elitism: d.elitism.unwrap_or(defaults.elitism),
            crossover_rate: d.crossover_rate.unwrap_or(defaults.crossover_rate),
            mutation_rate: d.mutation_rate.unwrap_or(defaults.mutation_rate),
            seed: self.seed(),
            ..defaults
        };
        cfg.validate()
            .map_err(|e| ConfigError(format!("[design] {e}")))?;
        Ok(cfg)
    }

    pub fn sim_config(&self, j: usize) -> Result<SimConfig, ConfigError> {
        let m = &self.simulation;
        let defaults = SimConfig::default();
        let detector = match m.detector.as_deref().unwrap_or("mpa") {
            "mpa" => Detector::Mpa,
            "ml" => Detector::Ml,
            other => {
                return Err(ConfigError(format!(
                    "[simulation] detector must be mpa or ml, got {other}"
                )))
            }
        };
        let cfg = SimConfig {
            kappa: self.kappa()?,
            geometry: self.geometry()?,
            snr_grid_db: check_grid("simulation", m.snr_grid.clone().unwrap_or_default())?,
            max_symbols: m.max_symbols.unwrap_or(defaults.max_symbols),
            target_errors: m.target_errors.unwrap_or(defaults.target_errors),
            detector,
            iterations: m.iterations.unwrap_or(defaults.iterations),
            seed: self.seed(),
            positions: match &m.fixed_distances {
                Some(d) => PositionMode::Fixed(d.clone()),
                None => PositionMode::PerTrial,
            },
            batch_size: m.batch_size.unwrap_or(defaults.batch_size),
            ..defaults
        };
        cfg.validate(j)
            .map_err(|e| ConfigError(format!("[simulation] {e}")))?;
        Ok(cfg)
    }
}

fn check_grid(section: &str, grid: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
    if grid.is_empty()
        || grid.iter().any(|x| !x.is_finite())
        || grid.windows(2).any(|w| w[1] < w[0])
    {
        return Err(ConfigError(format!(
            "[{section}] snr_grid must be a non-empty ascending list"
        )));
    }
    Ok(grid)
}

/// Parses `a,b,c` or `start:step:stop` (inclusive).
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid number '{s}' in SNR grid"))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(format!("invalid SNR range '{text}'"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| start + i as f64 * step).collect()
        }
        [_] => text.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("invalid SNR grid '{text}'")),
    };
    if grid.is_empty() {
        return Err("empty SNR grid".into());
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_snr_grid("0:2:6").unwrap(), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(parse_snr_grid("1, 3,7").unwrap(), vec![1.0, 3.0, 7.0]);
        assert_eq!(parse_snr_grid("0:0.5:1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_snr_grid("0:0:5").is_err());
        assert!(parse_snr_grid("a,b").is_err());
        assert!(parse_snr_grid("1:2").is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = Config::default().resolve();
        let text = cfg.to_toml();
        assert_eq!(Config::from_toml(&text).unwrap(), cfg);
        assert_eq!(cfg.dims().unwrap(), SystemDims::new(4, 6, 4, 2).unwrap());
    }

    #[test]
    fn file_values_survive_resolution() {
        let cfg = Config::from_toml("[system]\nk = 5\nj = 10\n[channel]\nkappa = 3.5\n")
            .unwrap()
            .resolve();
        assert_eq!(cfg.system.k, Some(5));
        assert_eq!(cfg.system.n, Some(2));
        assert_eq!(cfg.kappa().unwrap(), 3.5);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(Config::from_toml("[system]\nq = 1\n").is_err());
        assert!(Config::from_toml("[nonsense]\n").is_err());
        let bad = Config::from_toml("[simulation]\ndetector = \"sphere\"\n")
            .unwrap()
            .resolve();
        assert!(bad.sim_config(6).is_err());
        let bad = Config::from_toml("[analysis]\ntruncation = 0\n")
            .unwrap()
            .resolve();
        assert!(bad.truncation().is_err());
    }

    #[test]
    fn exact_flag_overrides_truncation() {
        let mut cfg = Config::default().resolve();
        assert_eq!(cfg.truncation().unwrap(), Truncation::MaxUsersInError(3));
        cfg.analysis.exact_bep = Some(true);
        assert_eq!(cfg.truncation().unwrap(), Truncation::Exact);
    }
}
