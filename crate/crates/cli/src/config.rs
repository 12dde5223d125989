//! Experiment configuration (TOML). Every report echoes the resolved config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use resonances_core::geometry::{Mat2, TableConfig};

/// A number, or the keyword `"auto"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Choice {
    Value(f64),
    Keyword(String),
}

impl Choice {
    pub fn auto() -> Self {
        Choice::Keyword("auto".into())
    }

    /// `None` for `"auto"`; any other keyword is a config error.
    pub fn value(&self) -> anyhow::Result<Option<f64>> {
        match self {
            Choice::Value(v) => Ok(Some(*v)),
            Choice::Keyword(k) if k == "auto" => Ok(None),
            Choice::Keyword(k) => Err(anyhow::Error::new(ConfigError(format!("expected a number or \"auto\", got {k:?}")))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaConfig {
    pub gk_samples: usize,
    pub gk_lags: usize,
    pub clt_orbits: usize,
    pub clt_steps: usize,
}

impl Default for SigmaConfig {
    fn default() -> Self {
        SigmaConfig {
            gk_samples: 400_000,
            gk_lags: 30,
            clt_orbits: 20_000,
            clt_steps: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    pub steps: usize,
    /// `[obstacle, phi, theta]`; a Liouville sample when absent.
    pub start: Option<(usize, f64, f64)>,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig { steps: 1_000, start: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    /// Twists `t · direction`, `t` evenly spaced on `[0, radius]`.
    pub direction: [f64; 2],
    pub radius: f64,
    pub points: usize,
    /// When set, an `n × n` grid over the whole torus instead of a line.
    pub grid: Option<usize>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            direction: [1.0, 0.0],
            radius: 0.5,
            points: 11,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Table config file; the inline `[table]` section is used when absent.
    pub table_file: Option<PathBuf>,
    pub table: TableConfig,
    pub seed: u64,
    pub n_phi: usize,
    pub n_s: usize,
    pub samples_per_cell: u32,
    pub tol: f64,
    pub rho_cut: f64,
    pub how_many: usize,
    pub delta: Choice,
    pub delta0: Choice,
    /// Grid side for the automatic `δ` probe.
    pub delta_grid: usize,
    pub imag_tol: f64,
    pub lattice: Mat2,
    pub family: u8,
    pub n_list: Vec<i64>,
    pub bins: usize,
    pub out: PathBuf,
    pub sigma: SigmaConfig,
    pub orbit: OrbitConfig,
    pub curve: CurveConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            table_file: None,
            table: TableConfig::reference(),
            seed: 42,
            n_phi: 128,
            n_s: 128,
            samples_per_cell: 200,
            tol: 1e-10,
            rho_cut: 0.5,
            how_many: 4,
            delta: Choice::auto(),
            delta0: Choice::auto(),
            delta_grid: 16,
            imag_tol: resonances_core::spectra::REAL_AXIS_TOL,
            lattice: [[1, 0], [0, 1]],
            family: 1,
            n_list: vec![16, 32, 64, 128, 256],
            bins: 8,
            out: PathBuf::from("out"),
            sigma: SigmaConfig::default(),
            orbit: OrbitConfig::default(),
            curve: CurveConfig::default(),
        }
    }
}

/// Marks errors that should exit with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        if let Some(file) = cfg.table_file.clone() {
            let file = if file.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(file)
            } else {
                file
            };
            let text = std::fs::read_to_string(&file).map_err(|e| config_error(format!("{}: {e}", file.display())))?;
            cfg.table = TableConfig::from_toml(&text).map_err(|e| config_error(format!("{}: {e}", file.display())))?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> anyhow::Result<()> {
        if self.n_phi == 0 || self.n_s == 0 || self.samples_per_cell == 0 {
            return Err(config_error("partition dims and samples_per_cell must be positive"));
        }
        if !(self.rho_cut > 0.0 && self.rho_cut < 1.0) {
            return Err(config_error("rho_cut must lie in (0, 1)"));
        }
        if !(self.tol > 0.0) || self.how_many == 0 || self.bins == 0 {
            return Err(config_error("tol, how_many and bins must be positive"));
        }
        if !matches!(self.family, 1 | 2) {
            return Err(config_error(format!("family must be 1 or 2, got {}", self.family)));
        }
        if self.n_list.iter().any(|&n| n < 1) {
            return Err(config_error("n_list entries must be positive"));
        }
        self.delta.value()?;
        self.delta0.value()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn choice_parses_numbers_and_auto() {
        let c: ExperimentConfig = toml::from_str("delta = 0.04\ndelta0 = \"auto\"").unwrap();
        assert_eq!(c.delta.value().unwrap(), Some(0.04));
        assert_eq!(c.delta0.value().unwrap(), None);
        let bad: ExperimentConfig = toml::from_str("delta = \"wide\"").unwrap();
        assert!(bad.check().is_err());
        assert!(toml::from_str::<ExperimentConfig>("no_such_key = 1").is_err());
    }
}
