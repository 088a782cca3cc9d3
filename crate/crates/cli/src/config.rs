//! TOML run configuration.

use std::path::{Path, PathBuf};

use otto_core::moments::{Closure, Variant};
use otto_core::thermo::SweepAxis;
use otto_core::{CouplingKind, DriveSchedule, EngineParams, SolverOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

/// Which solver produces a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Master,
    Moments,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
    /// Sample spacing of `simulate` in units of `1/omega_b`; `None` means
    /// 64 samples per drive period.
    pub sample_every: Option<f64>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), formats: vec![Format::Csv, Format::Json, Format::Svg], sample_every: None }
    }
}

impl Outputs {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub t_final: f64,
    pub method: Method,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { t_final: 20.0 * std::f64::consts::PI, method: Method::Master }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerSection {
    pub times: Vec<f64>,
    pub points: usize,
    /// Half width of the square grid; `None` sizes it from the state.
    pub half_width: Option<f64>,
}

impl Default for WignerSection {
    fn default() -> Self {
        Self { times: vec![0.0, 30.0, 300.0, 3000.0], points: 101, half_width: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleSection {
    pub method: Method,
    pub closure: Closure,
    pub variant: Variant,
}

impl Default for CycleSection {
    fn default() -> Self {
        Self { method: Method::Master, closure: Closure::MeanField, variant: Variant::Rederived }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub couplings: Vec<CouplingKind>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: SweepAxis::NbarH,
            values: vec![0.1, 0.2, 0.3, 0.45],
            couplings: vec![CouplingKind::Quadratic, CouplingKind::Linear],
        }
    }
}

/// Logarithmic load grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    pub load_min: f64,
    pub load_max: f64,
    pub load_points: usize,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { load_min: 1e-3, load_max: 1e2, load_points: 25 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub engine: EngineParams,
    /// Defaults to a symmetric square wave of period `2 pi / omega_b`.
    pub schedule: Option<DriveSchedule>,
    pub solver: SolverOptions,
    pub outputs: Outputs,
    pub simulate: SimulateSection,
    pub wigner: WignerSection,
    pub cycle: CycleSection,
    pub sweep: SweepSection,
    pub compare: CompareSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn schedule(&self) -> DriveSchedule {
        self.schedule.unwrap_or_else(|| self.engine.schedule())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let prefixed = |section: &str, e: otto_core::Error| match e {
            otto_core::Error::InvalidParameter { name, reason } => {
                ConfigError::Invalid { key: format!("{section}.{name}"), reason }
            }
            other => ConfigError::Invalid { key: section.to_string(), reason: other.to_string() },
        };
        self.engine.validate().map_err(|e| prefixed("engine", e))?;
        self.schedule().validate().map_err(|e| prefixed("schedule", e))?;
        self.solver.validate().map_err(|e| prefixed("solver", e))?;
        let invalid = |key: &str, reason: String| Err(ConfigError::Invalid { key: key.into(), reason });
        if let Some(dt) = self.outputs.sample_every {
            if !(dt.is_finite() && dt > 0.0) {
                return invalid("outputs.sample_every", format!("must be > 0, got {dt}"));
            }
        }
        if !(self.simulate.t_final.is_finite() && self.simulate.t_final >= 0.0) {
            return invalid("simulate.t_final", format!("must be finite and >= 0, got {}", self.simulate.t_final));
        }
        if let Some(t) = self.wigner.times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return invalid("wigner.times", format!("times must be finite and >= 0, got {t}"));
        }
        if self.wigner.points < 2 {
            return invalid("wigner.points", format!("must be at least 2, got {}", self.wigner.points));
        }
        if let Some(w) = self.wigner.half_width {
            if !(w.is_finite() && w > 0.0) {
                return invalid("wigner.half_width", format!("must be > 0, got {w}"));
            }
        }
        if let Some(v) = self.sweep.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return invalid("sweep.values", format!("values must be finite and >= 0, got {v}"));
        }
        let c = &self.compare;
        if !(c.load_min > 0.0 && c.load_max > c.load_min && c.load_max.is_finite()) {
            return invalid("compare.load_min", format!("need 0 < load_min < load_max, got {} and {}", c.load_min, c.load_max));
        }
        if c.load_points < 2 {
            return invalid("compare.load_points", format!("must be at least 2, got {}", c.load_points));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, first 16 hex digits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(json.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
