//! Training configuration: defaults, the flat key=value config file
//! format, CLI overrides and the architecture fingerprint embedded in
//! checkpoints.
//!
//! Precedence is built-in defaults < config file < explicit overrides.
//! Unknown keys are rejected, never ignored.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discriminator::{DiscNorm, DiscriminatorSpec, ScoreActivation};
use crate::error::{Error, Result};
use crate::generator::{GeneratorVariant, ModelSpec};
use crate::losses::{AdversarialVariant, ContentNorm, LossWeights};
use crate::vgg::FeatureTaps;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        // GAN-standard constants, held fixed across all epochs
        Self { lr: 2e-4, beta1: 0.5, beta2: 0.999 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelSpec,
    pub disc_base_filters: usize,
    pub disc_norm: DiscNorm,
    pub weights: LossWeights,
    pub taps: FeatureTaps,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Checkpoint every this many iterations; 0 = only at the end.
    pub checkpoint_every: usize,
    pub output_dir: PathBuf,
    /// (width, height), both divisible by 32.
    pub target_size: (usize, usize),
    pub vgg_weights: Option<PathBuf>,
    /// Hard stop after this many iterations; 0 = run all epochs.
    pub max_iters: usize,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            disc_base_filters: 32,
            disc_norm: DiscNorm::Instance,
            weights: LossWeights::default(),
            taps: FeatureTaps::default(),
            epochs: 10,
            batch_size: 1,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            checkpoint_every: 0,
            output_dir: PathBuf::from("runs/default"),
            target_size: (320, 256),
            vgg_weights: None,
            max_iters: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.weights.validate()?;
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.optimizer.lr)));
        }
        let (w, h) = self.target_size;
        if w % 32 != 0 || h % 32 != 0 {
            return Err(Error::Config(format!("target size {w}x{h} must be divisible by 32")));
        }
        Ok(())
    }

    /// The discriminator spec implied by this config.
    pub fn disc_spec(&self) -> DiscriminatorSpec {
        DiscriminatorSpec {
            base_filters: self.disc_base_filters,
            conditional: self.weights.conditional,
            condition_channels: self.model.in_channels,
            image_channels: self.model.out_channels,
            score_activation: match self.weights.adversarial_variant {
                AdversarialVariant::Standard => ScoreActivation::Sigmoid,
                AdversarialVariant::LeastSquares => ScoreActivation::Linear,
            },
            norm: self.disc_norm,
        }
    }

    /// Hash over everything that determines network shapes. Loss weights,
    /// optimizer constants and schedule knobs are deliberately excluded so
    /// a resume may override them.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Arch<'a> {
            model: &'a ModelSpec,
            disc: DiscriminatorSpec,
            taps: &'a FeatureTaps,
            target_size: (usize, usize),
        }
        let arch = Arch {
            model: &self.model,
            disc: self.disc_spec(),
            taps: &self.taps,
            target_size: self.target_size,
        };
        let json = serde_json::to_string(&arch).expect("arch serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_usize = |v: &str| {
            v.parse::<usize>().map_err(|_| Error::Config(format!("{key}: bad integer {v:?}")))
        };
        let parse_f64 =
            |v: &str| v.parse::<f64>().map_err(|_| Error::Config(format!("{key}: bad number {v:?}")));
        let parse_bool = |v: &str| match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(Error::Config(format!("{key}: bad boolean {v:?}"))),
        };
        match key {
            "variant" => self.model.variant = value.parse::<GeneratorVariant>()?,
            "base_filters" => self.model.base_filters = parse_usize(value)?,
            "local_blocks_m" => self.model.local_blocks_m = parse_usize(value)?,
            "global_blocks_n" => self.model.global_blocks_n = parse_usize(value)?,
            "in_channels" => self.model.in_channels = parse_usize(value)?,
            "out_channels" => self.model.out_channels = parse_usize(value)?,
            "disc_base_filters" => self.disc_base_filters = parse_usize(value)?,
            "disc_norm" => {
                self.disc_norm = match value {
                    "instance" => DiscNorm::Instance,
                    "none" => DiscNorm::None,
                    _ => return Err(Error::Config(format!("disc_norm: unknown value {value:?}"))),
                }
            }
            "conditional" => self.weights.conditional = parse_bool(value)?,
            "adversarial_variant" => self.weights.adversarial_variant = value.parse()?,
            "content_norm" => self.weights.content_norm = value.parse()?,
            "lambda_adv" => self.weights.lambda_adv = parse_f64(value)?,
            "lambda_perceptual" => self.weights.lambda_perceptual = parse_f64(value)?,
            "lambda_tv" => self.weights.lambda_tv = parse_f64(value)?,
            "perceptual_taps" => {
                self.taps.layer_indices = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::Config(format!("perceptual_taps: bad index {s:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            "epochs" => self.epochs = parse_usize(value)?,
            "batch_size" => self.batch_size = parse_usize(value)?,
            "lr" => self.optimizer.lr = parse_f64(value)?,
            "beta1" => self.optimizer.beta1 = parse_f64(value)?,
            "beta2" => self.optimizer.beta2 = parse_f64(value)?,
            "seed" => {
                self.seed =
                    value.parse::<u64>().map_err(|_| Error::Config(format!("seed: bad integer {value:?}")))?
            }
            "checkpoint_every" => self.checkpoint_every = parse_usize(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "target_width" => self.target_size.0 = parse_usize(value)?,
            "target_height" => self.target_size.1 = parse_usize(value)?,
            "vgg_weights" => {
                self.vgg_weights = if value.is_empty() { None } else { Some(PathBuf::from(value)) }
            }
            "max_iters" => self.max_iters = parse_usize(value)?,
            "shuffle" => self.shuffle = parse_bool(value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parse a flat `key = value` config file (# comments, blank lines ok).
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<()> {
        for (k, v) in overrides {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Echo the effective settings as sorted key=value lines.
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let variant = match self.model.variant {
            GeneratorVariant::CoarseToFine => "coarse_to_fine",
            GeneratorVariant::Unet => "unet",
            GeneratorVariant::Resnet => "resnet",
        };
        m.insert("variant".into(), variant.into());
        m.insert("base_filters".into(), self.model.base_filters.to_string());
        m.insert("local_blocks_m".into(), self.model.local_blocks_m.to_string());
        m.insert("global_blocks_n".into(), self.model.global_blocks_n.to_string());
        m.insert("in_channels".into(), self.model.in_channels.to_string());
        m.insert("out_channels".into(), self.model.out_channels.to_string());
        m.insert("disc_base_filters".into(), self.disc_base_filters.to_string());
        m.insert(
            "disc_norm".into(),
            match self.disc_norm {
                DiscNorm::Instance => "instance".into(),
                DiscNorm::None => "none".into(),
            },
        );
        m.insert("conditional".into(), self.weights.conditional.to_string());
        m.insert(
            "adversarial_variant".into(),
            match self.weights.adversarial_variant {
                AdversarialVariant::Standard => "standard".into(),
                AdversarialVariant::LeastSquares => "least_squares".into(),
            },
        );
        m.insert(
            "content_norm".into(),
            match self.weights.content_norm {
                ContentNorm::L1 => "l1".into(),
                ContentNorm::L2 => "l2".into(),
            },
        );
        m.insert("lambda_adv".into(), self.weights.lambda_adv.to_string());
        m.insert("lambda_perceptual".into(), self.weights.lambda_perceptual.to_string());
        m.insert("lambda_tv".into(), self.weights.lambda_tv.to_string());
        m.insert(
            "perceptual_taps".into(),
            self.taps.layer_indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","),
        );
        m.insert("epochs".into(), self.epochs.to_string());
        m.insert("batch_size".into(), self.batch_size.to_string());
        m.insert("lr".into(), self.optimizer.lr.to_string());
        m.insert("beta1".into(), self.optimizer.beta1.to_string());
        m.insert("beta2".into(), self.optimizer.beta2.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("checkpoint_every".into(), self.checkpoint_every.to_string());
        m.insert("output_dir".into(), self.output_dir.display().to_string());
        m.insert("target_width".into(), self.target_size.0.to_string());
        m.insert("target_height".into(), self.target_size.1.to_string());
        m.insert(
            "vgg_weights".into(),
            self.vgg_weights.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        m.insert("max_iters".into(), self.max_iters.to_string());
        m.insert("shuffle".into(), self.shuffle.to_string());
        m
    }
}
