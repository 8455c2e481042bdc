//! Experiment configuration: one JSON file, plus the named paper-parity
//! presets `g1-paper`, `g2-paper`, `g3-paper`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use estune_core::hecore::HeParams;
use estune_core::pid::{initial_theta, Theta};
use estune_core::plant::{benchmark_plant, PlantConfig, PlantId, TransferFunction};
use estune_core::seeker::SeekerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RunBackend {
    #[default]
    Plaintext,
    Reference,
    Rlwe,
}

impl std::str::FromStr for RunBackend {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plaintext" => Ok(Self::Plaintext),
            "reference" => Ok(Self::Reference),
            "rlwe" => Ok(Self::Rlwe),
            other => bail!("unknown backend '{other}' (plaintext|reference|rlwe)"),
        }
    }
}

impl std::fmt::Display for RunBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Plaintext => write!(f, "plaintext"),
            Self::Reference => write!(f, "reference"),
            Self::Rlwe => write!(f, "rlwe"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HePreset {
    #[default]
    Paper,
    Test,
}

impl HePreset {
    pub fn params(self) -> HeParams {
        match self {
            HePreset::Paper => HeParams::paper(),
            HePreset::Test => HeParams::rlwe_test(),
        }
    }
}

impl std::str::FromStr for HePreset {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "test" => Ok(Self::Test),
            other => bail!("unknown HE preset '{other}' (paper|test)"),
        }
    }
}

/// Either one of the benchmark plants or a custom rational model with an
/// optional delay (replaced by a third-order Pade approximant).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlantSpec {
    Named(PlantId),
    Custom(PlantConfig),
}

fn default_r_hat() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    0.01
}
fn default_k_max() -> usize {
    50
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSpec,
    pub dt: f64,
    pub ts_estimate: f64,
    #[serde(default = "default_r_hat")]
    pub r_hat: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Measurement-noise standard deviation in percent of `y_inf`.
    #[serde(default)]
    pub noise_pct: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub backend: RunBackend,
    #[serde(default)]
    pub he_preset: HePreset,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    /// Starting parameters; defaults to the plant's fixture. Required for
    /// custom plants.
    #[serde(default)]
    pub theta0: Option<Theta>,
    #[serde(default = "default_true")]
    pub noise_in_feedback: bool,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let id: PlantId = match name {
            "g1-paper" => PlantId::G1,
            "g2-paper" => PlantId::G2,
            "g3-paper" => PlantId::G3,
            other => bail!("unknown preset '{other}' (g1-paper|g2-paper|g3-paper)"),
        };
        let s = SeekerConfig::paper_preset(id);
        Ok(Self {
            plant: PlantSpec::Named(id),
            dt: s.dt,
            ts_estimate: s.ts_estimate,
            r_hat: s.r_hat,
            alpha: s.alpha,
            gamma: s.gamma,
            k_max: s.k_max,
            noise_pct: 0.0,
            seeds: default_seeds(),
            backend: RunBackend::Plaintext,
            he_preset: HePreset::Paper,
            out_dir: default_out(),
            theta0: None,
            noise_in_feedback: true,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&raw)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.seeker_config(0).validate()?;
        if self.noise_pct < 0.0 {
            bail!("noise_pct must be >= 0");
        }
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        self.plant_tf()?;
        self.theta0()?;
        Ok(())
    }

    pub fn plant_tf(&self) -> Result<TransferFunction> {
        match &self.plant {
            PlantSpec::Named(id) => Ok(benchmark_plant(*id)),
            PlantSpec::Custom(cfg) => Ok(cfg.to_transfer_function()?),
        }
    }

    pub fn theta0(&self) -> Result<Theta> {
        if let Some(t) = self.theta0 {
            t.validate()?;
            return Ok(t);
        }
        match &self.plant {
            PlantSpec::Named(id) => Ok(initial_theta(*id)),
            PlantSpec::Custom(_) => bail!("custom plants need an explicit theta0"),
        }
    }

    pub fn plant_label(&self) -> String {
        match &self.plant {
            PlantSpec::Named(id) => id.to_string(),
            PlantSpec::Custom(_) => "custom".into(),
        }
    }

    pub fn seeker_config(&self, seed: u64) -> SeekerConfig {
        SeekerConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            k_max: self.k_max,
            dt: self.dt,
            ts_estimate: self.ts_estimate,
            r_hat: self.r_hat,
            noise_std: self.noise_pct / 100.0,
            noise_in_feedback: self.noise_in_feedback,
            seed,
        }
    }
}
