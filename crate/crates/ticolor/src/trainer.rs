//! Training loop: Adam optimizer, alternating discriminator/generator
//! updates, JSONL iteration logs, checkpoint/resume, and the ablation
//! runner.
//!
//! The optimizer is implemented here rather than taken from a framework
//! so its first/second-moment state can be serialized into checkpoints,
//! making an interrupted run resume bit-for-bit.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use candle_core::{DType, Device, Tensor, Var};
use candle_nn::{VarBuilder, VarMap};

use crate::checkpoint::{
    load_checkpoint, restore_varmap, save_checkpoint, LoadedCheckpoint, DISC_PREFIX, GEN_PREFIX,
};
use crate::config::{OptimizerConfig, TrainConfig};
use crate::dataset::{BatchIter, DatasetManifest, ManifestEntry};
use crate::discriminator::{build_discriminator, Discriminator};
use crate::error::{Error, Result};
use crate::generator::{build_generator, Generator, GeneratorVariant};
use crate::losses::{
    adversarial_loss_d, adversarial_loss_g, content_loss, perceptual_loss, scalar, total_loss,
    tv_loss, AdversarialVariant, LossBreakdown,
};
use crate::metrics::{metrics_for_pair, ImageMetrics, MetricReport};
use crate::metrics::Raster;
use crate::nn::init_gaussian;
use crate::types::{Split, TensorImage};
use crate::vgg::FeatureExtractor;

const ADAM_EPS: f64 = 1e-8;

/// Adam with state held per named parameter, in sorted-name order so
/// serialization and restore are order-independent.
pub struct Adam {
    cfg: OptimizerConfig,
    t: usize,
    slots: Vec<Slot>,
}

struct Slot {
    name: String,
    var: Var,
    m: Tensor,
    v: Tensor,
}

impl Adam {
    pub fn new(varmap: &VarMap, cfg: OptimizerConfig) -> Result<Self> {
        let data = varmap.data().lock().unwrap();
        let mut names: Vec<String> = data.keys().cloned().collect();
        names.sort();
        let mut slots = Vec::with_capacity(names.len());
        for name in names {
            let var = data[&name].clone();
            let zeros = Tensor::zeros(var.shape(), var.dtype(), var.device())?;
            slots.push(Slot { name, var, m: zeros.clone(), v: zeros });
        }
        Ok(Self { cfg, t: 0, slots })
    }

    /// One update. Parameters without a gradient in `grads` are skipped.
    pub fn step(&mut self, grads: &candle_core::backprop::GradStore) -> Result<()> {
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bias1 = 1.0 - b1.powi(self.t as i32);
        let bias2 = 1.0 - b2.powi(self.t as i32);
        for slot in &mut self.slots {
            let Some(g) = grads.get(slot.var.as_tensor()) else { continue };
            // detach: otherwise m/v would keep every iteration's whole
            // autograd graph (and its activations) alive
            let g = g.detach();
            slot.m = ((&slot.m * b1)? + (&g * (1.0 - b1))?)?.detach();
            slot.v = ((&slot.v * b2)? + (g.sqr()? * (1.0 - b2))?)?.detach();
            let m_hat = (&slot.m / bias1)?;
            let v_hat = (&slot.v / bias2)?;
            let update = ((m_hat * self.cfg.lr)? / (v_hat.sqrt()? + ADAM_EPS)?)?;
            slot.var.set(&(slot.var.as_tensor() - update)?)?;
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        self.t
    }

    /// Optimizer state as named tensors for checkpointing.
    pub fn state_tensors(&self, prefix: &str, device: &Device) -> Result<Vec<(String, Tensor)>> {
        let mut out = Vec::with_capacity(self.slots.len() * 2 + 1);
        out.push((format!("{prefix}t"), Tensor::from_vec(vec![self.t as u32], 1, device)?));
        for slot in &self.slots {
            out.push((format!("{prefix}m.{}", slot.name), slot.m.clone()));
            out.push((format!("{prefix}v.{}", slot.name), slot.v.clone()));
        }
        Ok(out)
    }

    pub fn restore(&mut self, ckpt: &LoadedCheckpoint, prefix: &str, path: &Path) -> Result<()> {
        let missing = |key: &str| Error::CheckpointCorrupt {
            path: path.to_path_buf(),
            reason: format!("missing {key}"),
        };
        let t_key = format!("{prefix}t");
        let t = ckpt
            .tensors
            .get(&t_key)
            .ok_or_else(|| missing(&t_key))?
            .flatten_all()?
            .to_vec1::<u32>()?;
        self.t = *t.first().ok_or_else(|| missing(&t_key))? as usize;
        for slot in &mut self.slots {
            let mk = format!("{prefix}m.{}", slot.name);
            let vk = format!("{prefix}v.{}", slot.name);
            slot.m = ckpt.tensors.get(&mk).ok_or_else(|| missing(&mk))?.clone();
            slot.v = ckpt.tensors.get(&vk).ok_or_else(|| missing(&vk))?.clone();
        }
        Ok(())
    }
}

/// One line of the JSONL run log.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct LogRecord {
    pub iteration: usize,
    pub epoch: usize,
    pub content: f64,
    pub adversarial: f64,
    pub perceptual: f64,
    pub tv: f64,
    pub total: f64,
    pub d_loss: f64,
    pub wall_ms: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub final_checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub iterations: usize,
    pub last: LossBreakdown,
}

pub struct Trainer {
    pub config: TrainConfig,
    device: Device,
    dtype: DType,
    gen_map: VarMap,
    gen: Generator,
    disc_map: VarMap,
    disc: Discriminator,
    adam_g: Adam,
    adam_d: Adam,
    extractor: Option<FeatureExtractor>,
    /// Epoch to start (or continue) from, 0-based.
    start_epoch: usize,
    /// Global iteration counter across epochs.
    iteration: usize,
}

fn build_networks(
    config: &TrainConfig,
    device: &Device,
    dtype: DType,
) -> Result<(VarMap, Generator, VarMap, Discriminator)> {
    let gen_map = VarMap::new();
    let gen = build_generator(&config.model, VarBuilder::from_varmap(&gen_map, dtype, device))?;
    let disc_map = VarMap::new();
    let disc =
        build_discriminator(&config.disc_spec(), VarBuilder::from_varmap(&disc_map, dtype, device))?;
    Ok((gen_map, gen, disc_map, disc))
}

impl Trainer {
    pub fn new(config: TrainConfig, device: &Device) -> Result<Self> {
        config.validate()?;
        let dtype = DType::F32;
        let (gen_map, gen, disc_map, disc) = build_networks(&config, device, dtype)?;
        init_gaussian(&gen_map, config.seed, 0.02)?;
        init_gaussian(&disc_map, config.seed.wrapping_add(1), 0.02)?;
        let adam_g = Adam::new(&gen_map, config.optimizer.clone())?;
        let adam_d = Adam::new(&disc_map, config.optimizer.clone())?;
        let extractor = if config.weights.lambda_perceptual != 0.0 {
            Some(FeatureExtractor::new(config.vgg_weights.as_deref(), dtype, device)?)
        } else {
            None
        };
        Ok(Self {
            config,
            device: device.clone(),
            dtype,
            gen_map,
            gen,
            disc_map,
            disc,
            adam_g,
            adam_d,
            extractor,
            start_epoch: 0,
            iteration: 0,
        })
    }

    /// Rebuild a trainer from a checkpoint and continue where it stopped.
    ///
    /// `overrides` may change loss weights and schedule knobs; any change
    /// to the network architecture is refused. Resuming assumes the same
    /// dataset and batch size as the original run.
    pub fn resume(path: &Path, overrides: &[(String, String)], device: &Device) -> Result<Self> {
        let ckpt = load_checkpoint(path, device)?;
        let mut config = ckpt.config.clone();
        config.apply_overrides(overrides)?;
        config.validate()?;
        if config.fingerprint() != ckpt.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: ckpt.fingerprint.clone(),
                found: config.fingerprint(),
            });
        }
        let dtype = DType::F32;
        let (gen_map, gen, disc_map, disc) = build_networks(&config, device, dtype)?;
        restore_varmap(&ckpt, GEN_PREFIX, &gen_map, path)?;
        restore_varmap(&ckpt, DISC_PREFIX, &disc_map, path)?;
        let mut adam_g = Adam::new(&gen_map, config.optimizer.clone())?;
        let mut adam_d = Adam::new(&disc_map, config.optimizer.clone())?;
        adam_g.restore(&ckpt, "adam_g.", path)?;
        adam_d.restore(&ckpt, "adam_d.", path)?;
        let extractor = if config.weights.lambda_perceptual != 0.0 {
            Some(FeatureExtractor::new(config.vgg_weights.as_deref(), dtype, device)?)
        } else {
            None
        };
        Ok(Self {
            config,
            device: device.clone(),
            dtype,
            gen_map,
            gen,
            disc_map,
            disc,
            adam_g,
            adam_d,
            extractor,
            start_epoch: ckpt.epoch,
            iteration: ckpt.iteration,
        })
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn checkpoint_path(&self, epoch: usize, tag: &str) -> PathBuf {
        self.config
            .output_dir
            .join(format!("{tag}_e{}_i{}.safetensors", epoch + 1, self.iteration))
    }

    fn save(&self, path: &Path, epoch: usize) -> Result<()> {
        let mut extra = self.adam_g.state_tensors("adam_g.", &self.device)?;
        extra.extend(self.adam_d.state_tensors("adam_d.", &self.device)?);
        save_checkpoint(
            path,
            &self.gen_map,
            &self.disc_map,
            &extra,
            epoch,
            self.iteration,
            &self.config,
            &self.device,
        )
    }

    /// One alternating update on a batch. Returns the generator loss
    /// breakdown and the discriminator loss (0 when adversarial training
    /// is disabled).
    fn train_step(&mut self, thermal: &Tensor, rgb: &Tensor) -> Result<(LossBreakdown, f64)> {
        let w = self.config.weights.clone();
        let cond = w.conditional.then_some(thermal);
        let fake = self.gen.forward(thermal)?;

        // discriminator first, on a detached fake so only its own
        // parameters move
        let mut d_loss_val = 0.0;
        if w.lambda_adv != 0.0 {
            let logits_real = self.disc.logits(rgb, cond)?;
            let logits_fake = self.disc.logits(&fake.detach(), cond)?;
            let d_loss = adversarial_loss_d(&logits_real, &logits_fake, w.adversarial_variant)?;
            d_loss_val = scalar(&d_loss)?;
            let grads = d_loss.backward()?;
            self.adam_d.step(&grads)?;
        }

        let zero = || Tensor::zeros((), self.dtype, &self.device).map_err(Error::from);
        let content = content_loss(&fake, rgb, w.content_norm)?;
        let adversarial = if w.lambda_adv != 0.0 {
            adversarial_loss_g(&self.disc.logits(&fake, cond)?, w.adversarial_variant)?
        } else {
            zero()?
        };
        let perceptual = match (&self.extractor, w.lambda_perceptual != 0.0) {
            (Some(ex), true) => perceptual_loss(ex, &fake, rgb, &self.config.taps)?,
            _ => zero()?,
        };
        let tv = if w.lambda_tv != 0.0 { tv_loss(&fake)? } else { zero()? };
        let (total, breakdown) = total_loss(&content, &adversarial, &perceptual, &tv, &w)?;
        let grads = total.backward()?;
        self.adam_g.step(&grads)?;
        Ok((breakdown, d_loss_val))
    }

    pub fn train(&mut self, manifest: &DatasetManifest) -> Result<TrainOutcome> {
        let n_train = manifest.split_entries(Split::Train).len();
        if n_train == 0 {
            return Err(Error::EmptyDataset(manifest.root.clone()));
        }
        let per_epoch = n_train.div_ceil(self.config.batch_size);
        std::fs::create_dir_all(&self.config.output_dir)?;
        let log_path = self.config.output_dir.join("train_log.jsonl");
        let mut log = std::io::BufWriter::new(
            std::fs::OpenOptions::new().create(true).append(true).open(&log_path)?,
        );

        let mut last = LossBreakdown { content: 0.0, adversarial: 0.0, perceptual: 0.0, tv: 0.0, total: 0.0 };
        let mut epoch = self.start_epoch;
        'epochs: while epoch < self.config.epochs {
            let batches = BatchIter::new(
                manifest,
                Split::Train,
                self.config.batch_size,
                self.config.shuffle,
                self.config.seed,
                epoch,
            );
            // when resuming mid-epoch, skip batches the old run already saw
            let done_in_epoch = self.iteration.saturating_sub(epoch * per_epoch);
            for batch in batches.skip(done_in_epoch) {
                let batch = batch?;
                let started = Instant::now();
                let thermal_refs: Vec<&TensorImage> = batch.thermal.iter().collect();
                let rgb_refs: Vec<&TensorImage> = batch.rgb.iter().collect();
                let thermal = TensorImage::to_batch(&thermal_refs, self.dtype, &self.device)?;
                let rgb = TensorImage::to_batch(&rgb_refs, self.dtype, &self.device)?;
                let (breakdown, d_loss) = self.train_step(&thermal, &rgb)?;
                self.iteration += 1;
                let wall_ms = started.elapsed().as_secs_f64() * 1e3;
                if !breakdown.is_finite() || !d_loss.is_finite() {
                    // dump state next to the log before bailing out
                    let dump = self.checkpoint_path(epoch, "abort");
                    self.save(&dump, epoch)?;
                    return Err(Error::NonFiniteLoss {
                        epoch: epoch + 1,
                        iteration: self.iteration,
                        detail: format!(
                            "content={} adversarial={} perceptual={} tv={} d={} (state dumped to {})",
                            breakdown.content,
                            breakdown.adversarial,
                            breakdown.perceptual,
                            breakdown.tv,
                            d_loss,
                            dump.display()
                        ),
                    });
                }
                let record = LogRecord {
                    iteration: self.iteration,
                    epoch: epoch + 1,
                    content: breakdown.content,
                    adversarial: breakdown.adversarial,
                    perceptual: breakdown.perceptual,
                    tv: breakdown.tv,
                    total: breakdown.total,
                    d_loss,
                    wall_ms,
                };
                serde_json::to_writer(&mut log, &record).map_err(|e| Error::Config(e.to_string()))?;
                log.write_all(b"\n")?;
                log.flush()?;
                last = breakdown;
                if self.config.checkpoint_every > 0
                    && self.iteration % self.config.checkpoint_every == 0
                {
                    let path = self.checkpoint_path(epoch, "ckpt");
                    self.save(&path, epoch)?;
                }
                if self.config.max_iters > 0 && self.iteration >= self.config.max_iters {
                    break 'epochs;
                }
            }
            epoch += 1;
        }
        let final_epoch = epoch.min(self.config.epochs.saturating_sub(1));
        let final_path = self.checkpoint_path(final_epoch, "ckpt");
        self.save(&final_path, final_epoch)?;
        Ok(TrainOutcome {
            final_checkpoint: final_path,
            log_path,
            iterations: self.iteration,
            last,
        })
    }

    /// Colorize the held-out pairs and score them against ground truth.
    pub fn evaluate(&self, entries: &[&ManifestEntry], target: (usize, usize)) -> Result<MetricReport> {
        let mut per_image: Vec<ImageMetrics> = Vec::with_capacity(entries.len());
        for entry in entries {
            let (thermal, rgb) = crate::dataset::load_pair(entry, target)?;
            let input = thermal.to_tensor(self.dtype, &self.device)?.unsqueeze(0)?;
            let fake = self.gen.forward(&input)?.squeeze(0)?;
            let pred = Raster::from_tensor_image(&TensorImage::from_tensor(&fake)?);
            let truth = Raster::from_tensor_image(&rgb);
            per_image.push(metrics_for_pair(&entry.id, &pred, &truth)?);
        }
        Ok(MetricReport::from_per_image(per_image))
    }
}

/// Convenience wrapper: build a trainer, run it, return the outcome.
pub fn train(config: TrainConfig, manifest: &DatasetManifest, device: &Device) -> Result<TrainOutcome> {
    Trainer::new(config, device)?.train(manifest)
}

/// The canonical ablation matrix: each entry flips exactly one switch
/// off the full model.
pub const CANONICAL_VARIANTS: [&str; 8] = [
    "full",
    "no_adv",
    "no_perceptual",
    "no_tv",
    "unconditioned",
    "least_squares",
    "gen_unet",
    "gen_resnet",
];

/// Derive one ablation config from the base. The output directory moves
/// into a per-variant subdirectory; everything else, including the seed,
/// is shared.
pub fn apply_variant(base: &TrainConfig, name: &str) -> Result<TrainConfig> {
    let mut c = base.clone();
    match name {
        "full" => {}
        "no_adv" => c.weights.lambda_adv = 0.0,
        "no_perceptual" => c.weights.lambda_perceptual = 0.0,
        "no_tv" => c.weights.lambda_tv = 0.0,
        "unconditioned" => c.weights.conditional = false,
        "least_squares" => c.weights.adversarial_variant = AdversarialVariant::LeastSquares,
        "gen_unet" => c.model.variant = GeneratorVariant::Unet,
        "gen_resnet" => c.model.variant = GeneratorVariant::Resnet,
        other => return Err(Error::Config(format!("unknown ablation variant {other:?}"))),
    }
    c.output_dir = base.output_dir.join(name);
    Ok(c)
}

#[derive(Debug)]
pub struct AblationResult {
    pub name: String,
    pub config: TrainConfig,
    pub checkpoint: PathBuf,
    pub report: MetricReport,
}

/// Entries every ablation variant is scored on: the first `limit`
/// held-out pairs in id order, falling back to training pairs when the
/// manifest has no test split.
pub fn evaluation_entries(manifest: &DatasetManifest, limit: usize) -> Vec<&ManifestEntry> {
    let mut entries = manifest.split_entries(Split::Test);
    if entries.is_empty() {
        entries = manifest.split_entries(Split::Train);
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    entries.truncate(limit);
    entries
}

/// Train every requested variant from the same seed and score each on
/// the shared evaluation subset.
pub fn run_ablation(
    base: &TrainConfig,
    names: &[String],
    manifest: &DatasetManifest,
    device: &Device,
    eval_limit: usize,
) -> Result<Vec<AblationResult>> {
    // fail fast on unknown variants before any training starts
    let configs = names
        .iter()
        .map(|n| Ok((n.clone(), apply_variant(base, n)?)))
        .collect::<Result<Vec<_>>>()?;
    let entries = evaluation_entries(manifest, eval_limit);
    if entries.is_empty() {
        return Err(Error::EmptyDataset(manifest.root.clone()));
    }
    let mut results = Vec::with_capacity(configs.len());
    for (name, config) in configs {
        let mut trainer = Trainer::new(config.clone(), device)?;
        let outcome = trainer.train(manifest)?;
        let report = trainer.evaluate(&entries, manifest.target_size)?;
        let report_path = config.output_dir.join("metrics.json");
        report.save_json(&report_path)?;
        results.push(AblationResult {
            name,
            config,
            checkpoint: outcome.final_checkpoint,
            report,
        });
    }
    Ok(results)
}
