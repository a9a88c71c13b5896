//! Benchmark configuration files (TOML) and their validation.

use crate::methods::Method;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// The TOML parser reports line/column spans in its message.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn default_n() -> usize {
    2000
}
fn default_dim() -> usize {
    3
}
fn default_sigma() -> f64 {
    0.1
}
fn default_rates() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8]
}
fn default_trials_linreg() -> usize {
    30
}
fn default_tau() -> f64 {
    5.0
}
fn default_seed() -> u64 {
    7
}
fn default_radius_min() -> f64 {
    2.0
}
fn default_radius_max() -> f64 {
    6.0
}

/// Monte-Carlo linear regression benchmark settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinRegConfig {
    /// Number of measurements per trial.
    #[serde(default = "default_n")]
    pub n_measurements: usize,
    /// State dimension.
    #[serde(default = "default_dim")]
    pub state_dim: usize,
    /// Measurement dimension (chi-square degrees of freedom).
    #[serde(default = "default_dim")]
    pub meas_dim: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_rates")]
    pub outlier_rates: Vec<f64>,
    #[serde(default = "default_trials_linreg")]
    pub trials: usize,
    /// Truncation bound of the adaptive fits.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Outlier offsets are drawn with Mahalanobis magnitude uniform in
    /// [min, max] times the chi-square threshold radius.
    #[serde(default = "default_radius_min")]
    pub outlier_radius_min: f64,
    #[serde(default = "default_radius_max")]
    pub outlier_radius_max: f64,
}

impl Default for LinRegConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults are complete")
    }
}

impl LinRegConfig {
    pub fn methods(&self) -> Result<Vec<Method>, String> {
        parse_methods(&self.methods, Method::linreg_default)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_measurements == 0 || self.trials == 0 {
            return Err("n_measurements and trials must be positive".into());
        }
        if self.state_dim == 0 || self.meas_dim == 0 {
            return Err("dimensions must be positive".into());
        }
        if !(self.sigma > 0.0) {
            return Err(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.tau > 0.0) {
            return Err(format!("tau must be positive, got {}", self.tau));
        }
        for &rate in &self.outlier_rates {
            if !(0.0..1.0).contains(&rate) {
                return Err(format!("outlier rate {rate} outside [0, 1)"));
            }
            if rate > 0.0 && (rate * self.n_measurements as f64) < 1.0 {
                return Err(format!(
                    "rate {rate} yields no outliers at N = {}",
                    self.n_measurements
                ));
            }
        }
        if !(self.outlier_radius_min >= 1.0 && self.outlier_radius_max >= self.outlier_radius_min)
        {
            return Err("outlier radius multipliers must satisfy 1 <= min <= max".into());
        }
        self.methods().map(|_| ())
    }
}

fn default_overlap() -> f64 {
    0.7
}
fn default_difficulties() -> Vec<String> {
    vec!["easy".into(), "medium".into(), "hard".into()]
}
fn default_trials_icp() -> usize {
    20
}
fn default_voxel() -> f64 {
    0.1
}
fn default_normals_k() -> usize {
    15
}
fn default_max_iterations() -> usize {
    50
}
fn default_sigma_point() -> f64 {
    0.03
}
fn default_noise_sigma() -> f64 {
    0.01
}

/// Point-cloud alignment benchmark settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcpBenchConfig {
    /// Paths to fixed/moving clouds (`.xyz` or `.ply`); when absent, a
    /// synthetic scene pair is generated per trial.
    #[serde(default)]
    pub cloud_fixed: Option<PathBuf>,
    #[serde(default)]
    pub cloud_moving: Option<PathBuf>,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    #[serde(default = "default_difficulties")]
    pub difficulties: Vec<String>,
    #[serde(default = "default_trials_icp")]
    pub trials: usize,
    #[serde(default)]
    pub methods: Option<Vec<String>>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_voxel")]
    pub voxel_size: f64,
    #[serde(default = "default_normals_k")]
    pub normals_k: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Covariance scale of the point measurements.
    #[serde(default = "default_sigma_point")]
    pub sigma_point: f64,
    /// Noise injected by the synthetic scene generator.
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
}

impl Default for IcpBenchConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults are complete")
    }
}

impl IcpBenchConfig {
    pub fn methods(&self) -> Result<Vec<Method>, String> {
        parse_methods(&self.methods, Method::icp_default)
    }

    pub fn difficulty_presets(
        &self,
    ) -> Result<Vec<adaptive_gnc::geometry::DifficultyPreset>, String> {
        use adaptive_gnc::geometry::DifficultyPreset;
        self.difficulties
            .iter()
            .map(|d| match d.as_str() {
                "easy" => Ok(DifficultyPreset::Easy),
                "medium" => Ok(DifficultyPreset::Medium),
                "hard" => Ok(DifficultyPreset::Hard),
                other => Err(format!("unknown difficulty {other:?}")),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.trials == 0 {
            return Err("trials must be positive".into());
        }
        if !(self.overlap > 0.0 && self.overlap <= 1.0) {
            return Err(format!("overlap {} outside (0, 1]", self.overlap));
        }
        if !(self.voxel_size > 0.0) || self.normals_k < 3 {
            return Err("voxel_size must be positive and normals_k >= 3".into());
        }
        if self.cloud_fixed.is_some() != self.cloud_moving.is_some() {
            return Err("cloud_fixed and cloud_moving must be given together".into());
        }
        self.difficulty_presets()?;
        self.methods().map(|_| ())
    }
}

fn parse_methods(
    raw: &Option<Vec<String>>,
    default: fn() -> Vec<Method>,
) -> Result<Vec<Method>, String> {
    match raw {
        None => Ok(default()),
        Some(names) => {
            if names.is_empty() {
                return Err("methods list is empty".into());
            }
            names
                .iter()
                .map(|n| Method::parse(n).ok_or_else(|| format!("unknown method {n:?}")))
                .collect()
        }
    }
}

/// Parse a method override list from a comma-separated CLI flag.
pub fn parse_methods_flag(flag: &str) -> Result<Vec<Method>, String> {
    flag.split(',')
        .map(|n| {
            let n = n.trim();
            Method::parse(n).ok_or_else(|| format!("unknown method {n:?}"))
        })
        .collect()
}

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_linreg_config(path: &Path) -> Result<LinRegConfig, ConfigError> {
    let cfg: LinRegConfig = load_toml(path)?;
    cfg.validate().map_err(|message| ConfigError::Invalid {
        path: path.display().to_string(),
        message,
    })?;
    Ok(cfg)
}

pub fn load_icp_config(path: &Path) -> Result<IcpBenchConfig, ConfigError> {
    let cfg: IcpBenchConfig = load_toml(path)?;
    cfg.validate().map_err(|message| ConfigError::Invalid {
        path: path.display().to_string(),
        message,
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        LinRegConfig::default().validate().unwrap();
        IcpBenchConfig::default().validate().unwrap();
    }

    #[test]
    fn linreg_default_methods_are_eight() {
        assert_eq!(LinRegConfig::default().methods().unwrap().len(), 8);
    }

    #[test]
    fn rejects_bad_rates() {
        let cfg = LinRegConfig {
            outlier_rates: vec![1.0],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = LinRegConfig {
            outlier_rates: vec![0.0001],
            n_measurements: 100,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_unknown_methods_and_difficulties() {
        let cfg = LinRegConfig {
            methods: Some(vec!["huber".into()]),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = IcpBenchConfig {
            difficulties: vec!["impossible".into()],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_parse_error_carries_location() {
        let dir = std::env::temp_dir().join("agnc_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.toml");
        std::fs::write(&path, "trials = \"many\"\n").unwrap();
        match load_linreg_config(&path) {
            Err(ConfigError::Parse { message, .. }) => {
                assert!(message.contains("line 1"), "message: {message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn methods_flag_parses_comma_list() {
        let ms = parse_methods_flag("welsch, gnc-amb").unwrap();
        assert_eq!(ms, vec![Method::Welsch, Method::GncAmb]);
        assert!(parse_methods_flag("nope").is_err());
    }
}
