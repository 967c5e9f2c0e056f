//! Run configuration and the run manifest.
//!
//! Configuration is a TOML file with nested sections; every field is
//! optional and falls back to the documented default. Unknown keys are
//! rejected. Command-line flags override file values, which override
//! defaults. The fully resolved configuration (defaults applied,
//! overrides folded in) is echoed into `manifest.json` next to a run's
//! outputs, and that manifest alone reproduces the run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{GeneratorConfig, ShiftConfig};
use crate::error::{Error, Result};
use crate::model::NetworkSpec;
use crate::train::{Method, TrainConfig};

fn default_n_source() -> usize {
    3000
}

fn default_n_target() -> usize {
    1500
}

fn default_signal_length() -> usize {
    1024
}

fn default_shift() -> ShiftConfig {
    ShiftConfig::with_intensity(0.6)
}

/// Dataset-generation section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub n_source: usize,
    pub n_target: usize,
    pub signal_length: usize,
    pub shift: ShiftConfig,
    pub generator: GeneratorConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_source: default_n_source(),
            n_target: default_n_target(),
            signal_length: default_signal_length(),
            shift: default_shift(),
            generator: GeneratorConfig::default(),
        }
    }
}

/// Study sizes for the evaluation commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Seeds in a robustness study.
    pub n_seeds: usize,
    /// Repeated runs per method in the ablation matrix.
    pub ablation_runs: usize,
    /// Methods the ablation covers.
    pub methods: Vec<Method>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { n_seeds: 20, ablation_runs: 5, methods: Method::ALL.to_vec() }
    }
}

/// Plot rendering options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub width: u32,
    pub height: u32,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { width: 900, height: 540 }
    }
}

/// The whole run configuration. `seed` is the single root seed; every
/// random stream (generation, initialization, shuffling, augmentation)
/// derives from it through the documented label-path rule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub model: NetworkSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub report: ReportConfig,
}

impl RunConfig {
    /// Parse a TOML configuration file; unknown keys are validation
    /// errors.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.data.shift.validate()?;
        self.data.generator.validate()?;
        if self.eval.n_seeds < 2 {
            return Err(Error::Validation("eval.n_seeds must be at least 2".into()));
        }
        if self.eval.ablation_runs == 0 {
            return Err(Error::Validation("eval.ablation_runs must be positive".into()));
        }
        Ok(())
    }

    /// The train section with the root seed folded in; the per-run seed
    /// always derives from the manifest's root seed.
    pub fn resolved_train(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }
}

/// Everything needed to reproduce a run: the resolved configuration, the
/// command that produced the outputs, and the code version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("manifest: {e}")))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_config() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.train.epochs, 500);
        assert_eq!(cfg.train.batch_size, 128);
        assert_eq!(cfg.train.lr_main, 5e-5);
        assert_eq!(cfg.train.lr_discriminator, 1e-5);
        assert_eq!(cfg.train.weight_decay, 1e-4);
        assert_eq!(cfg.train.psi, 1.0);
        assert_eq!(cfg.train.temperature, 2.5);
        assert_eq!(cfg.train.tau, 0.99);
        assert_eq!(cfg.data.signal_length, 1024);
        assert_eq!(cfg.model, NetworkSpec::default());
    }

    #[test]
    fn nested_overrides_apply() {
        let cfg = RunConfig::from_toml(
            r#"
seed = 7

[train]
epochs = 25
method = "dann_mcc"

[data]
n_source = 100
n_target = 50
signal_length = 64

[data.shift]
shift_intensity = 0.3
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.epochs, 25);
        assert_eq!(cfg.train.method, Method::DannMcc);
        assert_eq!(cfg.data.shift.shift_intensity, 0.3);
        assert_eq!(cfg.resolved_train().seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("[train]\nlearning_rate = 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = RunConfig::from_toml("typo_section = 3\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn unknown_method_is_rejected() {
        let err = RunConfig::from_toml("[train]\nmethod = \"supersonic\"\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { seed: 11, ..Default::default() };
        let manifest = Manifest::new("train", &cfg);
        let path = dir.path().join("manifest.json");
        manifest.write(&path).unwrap();
        let back = Manifest::read(&path).unwrap();
        assert_eq!(manifest, back);
        assert_eq!(back.config.seed, 11);
    }
}
