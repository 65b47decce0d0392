//! Conditional 70x70 patch discriminator.
//!
//! Five 4x4 convolutions: three at stride 2, one at stride 1, and a
//! single-channel output layer at stride 1. That schedule's receptive
//! field per output score is exactly 70x70 input pixels; the constructor
//! recomputes it from the declared layers and refuses anything else.

use candle_core::Tensor;
use candle_nn::{ops::leaky_relu, Conv2d, VarBuilder};

use crate::error::{Error, Result};
use crate::nn::{conv2d, conv_forward, instance_norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreActivation {
    /// Conceptually sigmoid; the network emits logits and losses use the
    /// fused stable formulation.
    Sigmoid,
    /// Raw linear scores for the least-squares variant.
    Linear,
}

/// Whether inner layers apply instance normalization. `None` keeps the
/// network strictly local, which the receptive-field tests rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscNorm {
    Instance,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DiscriminatorSpec {
    pub base_filters: usize,
    pub conditional: bool,
    pub condition_channels: usize,
    pub image_channels: usize,
    pub score_activation: ScoreActivation,
    pub norm: DiscNorm,
}

impl Default for DiscriminatorSpec {
    fn default() -> Self {
        Self {
            base_filters: 32,
            conditional: true,
            condition_channels: 1,
            image_channels: 3,
            score_activation: ScoreActivation::Sigmoid,
            norm: DiscNorm::Instance,
        }
    }
}

/// (kernel, stride) pairs of the fixed layer schedule.
pub const LAYER_SCHEDULE: [(usize, usize); 5] = [(4, 2), (4, 2), (4, 2), (4, 1), (4, 1)];

/// Receptive field of one output score, by the standard recurrence
/// r <- r + (k - 1) * jump over the declared schedule.
pub fn receptive_field(schedule: &[(usize, usize)]) -> usize {
    let mut r = 1usize;
    let mut jump = 1usize;
    for &(k, s) in schedule {
        r += (k - 1) * jump;
        jump *= s;
    }
    r
}

/// Per-layer convolution output size with padding 1.
pub fn conv_out(size: usize, kernel: usize, stride: usize) -> usize {
    (size + 2 - kernel) / stride + 1
}

/// Spatial size of the score grid for an input of the given size.
pub fn score_grid_size(mut h: usize, mut w: usize) -> (usize, usize) {
    for (k, s) in LAYER_SCHEDULE {
        h = conv_out(h, k, s);
        w = conv_out(w, k, s);
    }
    (h, w)
}

impl DiscriminatorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.base_filters < 1 {
            return Err(Error::InvalidSpec("base_filters must be >= 1".into()));
        }
        if self.image_channels < 1 {
            return Err(Error::InvalidSpec("image_channels must be >= 1".into()));
        }
        if self.conditional && self.condition_channels < 1 {
            return Err(Error::InvalidSpec("conditional discriminator needs condition channels".into()));
        }
        let rf = receptive_field(&LAYER_SCHEDULE);
        if rf != 70 {
            return Err(Error::InvalidSpec(format!("layer schedule receptive field {rf} != 70")));
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        self.image_channels + if self.conditional { self.condition_channels } else { 0 }
    }
}

#[derive(Debug)]
pub struct Discriminator {
    layers: Vec<Conv2d>,
    spec: DiscriminatorSpec,
}

pub fn build_discriminator(spec: &DiscriminatorSpec, vb: VarBuilder) -> Result<Discriminator> {
    spec.validate()?;
    let b = spec.base_filters;
    let channels = [spec.input_channels(), b, 2 * b, 4 * b, 8 * b, 1];
    let mut layers = Vec::new();
    for (i, &(k, s)) in LAYER_SCHEDULE.iter().enumerate() {
        layers.push(conv2d(vb.pp(format!("layer{i}")), channels[i], channels[i + 1], k, s, 1)?);
    }
    Ok(Discriminator { layers, spec: spec.clone() })
}

impl Discriminator {
    pub fn spec(&self) -> &DiscriminatorSpec {
        &self.spec
    }

    /// Raw score-grid logits for a candidate image (and its condition when
    /// the discriminator is conditional).
    pub fn logits(&self, candidate: &Tensor, condition: Option<&Tensor>) -> Result<Tensor> {
        let (_, c, h, w) = candidate.dims4()?;
        if c != self.spec.image_channels {
            return Err(Error::ShapeError(format!(
                "candidate has {c} channels, expected {}",
                self.spec.image_channels
            )));
        }
        let input = if self.spec.conditional {
            let cond = condition.ok_or(Error::ConditionMissing)?;
            let (_, cc, ch, cw) = cond.dims4()?;
            if (ch, cw) != (h, w) {
                return Err(Error::ShapeError(format!("condition {ch}x{cw} vs candidate {h}x{w}")));
            }
            if cc != self.spec.condition_channels {
                return Err(Error::ShapeError(format!(
                    "condition has {cc} channels, expected {}",
                    self.spec.condition_channels
                )));
            }
            Tensor::cat(&[candidate, cond], 1)?
        } else {
            candidate.clone()
        };
        let last = self.layers.len() - 1;
        let mut y = input;
        for (i, layer) in self.layers.iter().enumerate() {
            y = conv_forward(layer, &y)?;
            if i < last {
                if i > 0 && self.spec.norm == DiscNorm::Instance {
                    y = instance_norm(&y, 1e-5)?;
                }
                y = leaky_relu(&y, 0.2)?;
            }
        }
        Ok(y)
    }

    /// Activated scores: sigmoid probabilities for the standard variant,
    /// raw linear values for least squares.
    pub fn score(&self, candidate: &Tensor, condition: Option<&Tensor>) -> Result<Tensor> {
        let logits = self.logits(candidate, condition)?;
        match self.spec.score_activation {
            ScoreActivation::Sigmoid => Ok(candle_nn::ops::sigmoid(&logits)?),
            ScoreActivation::Linear => Ok(logits),
        }
    }
}
