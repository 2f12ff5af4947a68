//! The `difftd` configuration file.
//!
//! ```toml
//! schema_version = 1
//!
//! [[experiment]]
//! env = { kind = "grid", width = 10, height = 10, reward = "painful" }
//! algorithm = "diff_q"
//! alphas = [0.5, 1.0]
//! etas = [0.001, 0.01]
//! gamma = 0.9
//!
//! [export]
//! stride = 100
//! svg = true
//! ```
//!
//! Unknown keys are errors everywhere.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use difftd::checks::{VerifyOptions, SPECTRAL_ETAS};
use difftd::experiments::{EnvSpec, ExperimentConfig, ExportOptions};
use difftd::linear::FeatureMode;
use serde::Deserialize;
use toml::Spanned;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: Spanned<u32>,
    #[serde(default)]
    pub experiment: Vec<Spanned<ExperimentConfig>>,
    #[serde(default)]
    pub export: ExportSection,
    pub oracle: Option<Spanned<OracleConfig>>,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportSection {
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_svg")]
    pub svg: bool,
}

fn default_stride() -> usize {
    100
}

fn default_svg() -> bool {
    true
}

impl Default for ExportSection {
    fn default() -> Self {
        Self { stride: default_stride(), svg: default_svg() }
    }
}

impl ExportSection {
    pub fn options(&self) -> ExportOptions {
        ExportOptions { stride: self.stride, svg: self.svg }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub seed: Option<u64>,
    pub random_mdps: Option<usize>,
    pub transitions: Option<usize>,
    pub episodes: Option<usize>,
}

impl VerifySection {
    pub fn options(&self, seed: Option<u64>) -> VerifyOptions {
        let d = VerifyOptions::default();
        VerifyOptions {
            seed: seed.or(self.seed).unwrap_or(d.seed),
            random_mdps: self.random_mdps.unwrap_or(d.random_mdps),
            transitions: self.transitions.unwrap_or(d.transitions),
            episodes: self.episodes.unwrap_or(d.episodes),
        }
    }
}

/// An explicit Markov chain.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub p: Vec<Vec<f64>>,
    pub r: Vec<f64>,
}

/// `[oracle]`: exactly one of `env`, `mdp_file` or `chain`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub env: Option<EnvSpec>,
    pub mdp_file: Option<PathBuf>,
    pub chain: Option<ChainSection>,
    /// Deterministic action per state; uniform when absent.
    pub policy: Option<Vec<usize>>,
    pub gamma: f64,
    /// Raw feature rows, one per state. Bias only when absent.
    pub features: Option<Vec<Vec<f64>>>,
    pub mode: Option<FeatureMode>,
    #[serde(default = "default_etas")]
    pub etas: Vec<f64>,
}

fn default_etas() -> Vec<f64> {
    SPECTRAL_ETAS.to_vec()
}

/// A configuration problem, with the file position it refers to.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{line}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

/// A parsed and validated configuration file.
#[derive(Debug)]
pub struct Config {
    pub path: PathBuf,
    pub text: String,
    pub file: ConfigFile,
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            message: e.to_string(),
        })?;
        Self::parse(path, text)
    }

    pub fn parse(path: &Path, text: String) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(&text).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: e.span().map(|s| line_of(&text, s)),
            message: e.message().trim_end().to_string(),
        })?;
        let config = Self { path: path.to_path_buf(), text, file };
        config.validate()?;
        Ok(config)
    }

    fn error(&self, span: Range<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError { path: self.path.clone(), line: Some(line_of(&self.text, span)), message: message.into() }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let version = &self.file.schema_version;
        if *version.get_ref() != SCHEMA_VERSION {
            return Err(self.error(
                version.span(),
                format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", version.get_ref()),
            ));
        }
        for (i, exp) in self.file.experiment.iter().enumerate() {
            exp.get_ref()
                .validate()
                .map_err(|e| self.error(exp.span(), format!("experiment #{}: {e}", i + 1)))?;
        }
        if self.file.export.stride == 0 {
            return Err(ConfigError { path: self.path.clone(), line: None, message: "export.stride must be at least 1".into() });
        }
        if let Some(oracle) = &self.file.oracle {
            let o = oracle.get_ref();
            let sources = [o.env.is_some(), o.mdp_file.is_some(), o.chain.is_some()].iter().filter(|&&x| x).count();
            if sources != 1 {
                return Err(self.error(oracle.span(), "oracle needs exactly one of env, mdp_file or chain"));
            }
            if o.etas.iter().any(|&e| !(e > 0.0)) {
                return Err(self.error(oracle.span(), "oracle etas must be positive"));
            }
        }
        Ok(())
    }

    /// Experiments with `--seed` applied as the base seed.
    pub fn experiments(&self, seed: Option<u64>) -> Vec<ExperimentConfig> {
        self.file
            .experiment
            .iter()
            .map(|e| {
                let mut e = e.get_ref().clone();
                if let Some(s) = seed {
                    e.base_seed = s;
                }
                e
            })
            .collect()
    }

    pub fn experiment_line(&self, index: usize) -> usize {
        line_of(&self.text, self.file.experiment[index].span())
    }
}
