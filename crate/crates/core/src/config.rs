//! One bundle for every knob in the pipeline, with the two built-in
//! profiles: `paper` (the reference hyper-parameters at 128x128) and
//! `tiny` (CI-scale at 32x32). Configs round-trip through TOML.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blur::DegradationConfig;
use crate::dataset::augment::AugmentConfig;
use crate::dataset::manifest::derive_seed;
use crate::dataset::schema::LabelSchema;
use crate::error::{Error, Result};
use crate::losses::{FeatureExtractor, FeatureExtractorConfig, LossWeights, StructuralWeightMode};
use crate::networks::NetworkConfig;
use crate::training::{OptimConfig, StageSchedule, Trainer};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub profile: String,
    pub image_size: usize,
    pub seed: u64,
    pub kernel_sizes: Vec<usize>,
    pub degradation: DegradationConfig,
    pub network: NetworkConfig,
    pub extractor: FeatureExtractorConfig,
    pub schema: LabelSchema,
    pub weights: LossWeights,
    pub optim: OptimConfig,
    pub structural_mode: StructuralWeightMode,
    pub augment: Option<AugmentConfig>,
    pub schedule: StageSchedule,
}

impl RunConfig {
    /// Reference configuration: every documented value at full size.
    pub fn paper() -> RunConfig {
        RunConfig {
            profile: "paper".into(),
            image_size: 128,
            seed: 0,
            kernel_sizes: crate::blur::DEFAULT_KERNEL_SIZES.to_vec(),
            degradation: DegradationConfig::default(),
            network: NetworkConfig::default(),
            extractor: FeatureExtractorConfig::default(),
            schema: LabelSchema::default(),
            weights: LossWeights::default(),
            optim: OptimConfig::default(),
            structural_mode: StructuralWeightMode::Adaptive,
            augment: Some(AugmentConfig::default()),
            schedule: StageSchedule::reference(),
        }
    }

    /// CI-scale configuration: 32x32 images, narrow networks, learning
    /// rates and a structural weight sized for very short runs (the
    /// reference structural weight assumes full-scale pixel counts; at
    /// 32x32 it would drown the per-element content gradient).
    pub fn tiny() -> RunConfig {
        RunConfig {
            profile: "tiny".into(),
            image_size: 32,
            seed: 0,
            kernel_sizes: vec![13, 15],
            degradation: DegradationConfig::default(),
            network: NetworkConfig::tiny(),
            extractor: FeatureExtractorConfig::tiny(),
            schema: LabelSchema::default(),
            weights: LossWeights {
                lambda_structural: 0.05,
                ..Default::default()
            },
            optim: OptimConfig {
                batch_size: 4,
                lr_parsing: 1e-3,
                lr_deblur: 3e-3,
                optimizer: "adam".into(),
                seed: 0,
            },
            structural_mode: StructuralWeightMode::Adaptive,
            augment: None,
            schedule: StageSchedule::reference(),
        }
    }

    pub fn profile(name: &str) -> Result<RunConfig> {
        match name {
            "paper" => Ok(RunConfig::paper()),
            "tiny" => Ok(RunConfig::tiny()),
            other => Err(Error::Config(format!(
                "unknown profile {other:?} (expected \"paper\" or \"tiny\")"
            ))),
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text =
            toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.degradation.validate()?;
        self.network.validate()?;
        self.extractor.validate()?;
        self.schema.validate()?;
        self.weights.validate()?;
        self.optim.validate()?;
        if self.image_size % self.network.parsing.stride_factor() != 0 {
            return Err(Error::Config(format!(
                "image size {} not divisible by parsing stride {}",
                self.image_size,
                self.network.parsing.stride_factor()
            )));
        }
        if self.image_size != self.network.discriminator.input_size {
            return Err(Error::Config(format!(
                "image size {} vs discriminator input {}",
                self.image_size, self.network.discriminator.input_size
            )));
        }
        for &s in &self.kernel_sizes {
            if s % 2 == 0 || s < 3 {
                return Err(Error::Config(format!("kernel size {s} must be odd >= 3")));
            }
        }
        Ok(())
    }

    /// Apply a global seed to every seeded sub-config.
    pub fn with_seed(mut self, seed: u64) -> RunConfig {
        self.seed = seed;
        self.optim.seed = seed;
        self.degradation.rng_seed = derive_seed(seed, 11);
        if let Some(a) = &mut self.augment {
            a.rng_seed = derive_seed(seed, 12);
        }
        self
    }

    pub fn build_trainer(&self, run_dir: PathBuf) -> Result<Trainer> {
        self.validate()?;
        let extractor =
            FeatureExtractor::new(self.extractor.clone(), derive_seed(self.seed, 100))?;
        Trainer::new(
            self.network.clone(),
            extractor,
            self.schema.clone(),
            self.weights.clone(),
            self.optim.clone(),
            self.structural_mode,
            self.augment.clone(),
            run_dir,
        )
    }
}
