//! Generator architectures: the two-stage coarse-to-fine network plus the
//! UNet and ResNet alternatives used for architecture comparisons.
//!
//! Layer schedule of the coarse-to-fine variant (base filters `b`, input
//! channels `ic`, output channels `oc`, `n` global and `m` local residual
//! blocks; all convolutions carry a bias, normalization is non-affine
//! instance norm, padding is reflection for the 7x7 and residual convs):
//!
//! ```text
//! global stage (half resolution, first conv 2b):
//!   c7s1-2b, d4b (3x3 s2), d8b (3x3 s2), n x R8b,
//!   u4b (3x3 convT s2), u2b (3x3 convT s2)          -> feature map (2b)
//!   head: c7s1-oc, tanh                              -> standalone output
//! local enhancer (full resolution, first conv b):
//!   c7s1-b, d2b (3x3 s2), + global features, m x R2b,
//!   ub (3x3 convT s2), c7s1-oc, tanh
//! ```
//!
//! The analytic parameter count is the sum of k*k*in*out + out over those
//! layers; `coarse_to_fine_param_count` evaluates it and tests check it
//! against the built variable map.

use candle_core::{Tensor};
use candle_nn::{Conv2d, ConvTranspose2d, Module, VarBuilder};

use crate::error::{Error, Result};
use crate::nn::{conv2d, conv_forward, conv_transpose2d, instance_norm, reflection_pad, ResidualBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorVariant {
    CoarseToFine,
    Unet,
    Resnet,
}

impl std::str::FromStr for GeneratorVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse_to_fine" => Ok(Self::CoarseToFine),
            "unet" => Ok(Self::Unet),
            "resnet" => Ok(Self::Resnet),
            other => Err(Error::Config(format!("unknown generator variant {other:?}"))),
        }
    }
}

/// Generator architecture parameters.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelSpec {
    pub variant: GeneratorVariant,
    pub base_filters: usize,
    pub local_blocks_m: usize,
    pub global_blocks_n: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            variant: GeneratorVariant::CoarseToFine,
            base_filters: 32,
            local_blocks_m: 3,
            global_blocks_n: 9,
            in_channels: 1,
            out_channels: 3,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.base_filters < 1 {
            return Err(Error::InvalidSpec("base_filters must be >= 1".into()));
        }
        if self.global_blocks_n < 1 {
            return Err(Error::InvalidSpec("global_blocks_n must be >= 1".into()));
        }
        if self.in_channels < 1 || self.out_channels < 1 {
            return Err(Error::InvalidSpec("channel counts must be >= 1".into()));
        }
        Ok(())
    }
}

fn check_input(x: &Tensor, in_channels: usize) -> Result<(usize, usize, usize, usize)> {
    let (b, c, h, w) = x.dims4()?;
    if c != in_channels {
        return Err(Error::ShapeError(format!("expected {in_channels} input channels, got {c}")));
    }
    if h % 32 != 0 || w % 32 != 0 {
        return Err(Error::ShapeError(format!("spatial dims {h}x{w} must be divisible by 32")));
    }
    Ok((b, c, h, w))
}

fn conv_in_relu(conv: &Conv2d, x: &Tensor) -> Result<Tensor> {
    Ok(instance_norm(&conv_forward(conv, x)?, 1e-5)?.relu()?)
}

fn convt_in_relu(conv: &ConvTranspose2d, x: &Tensor) -> Result<Tensor> {
    Ok(instance_norm(&conv.forward(x)?, 1e-5)?.relu()?)
}

/// The half-resolution stage of the coarse-to-fine generator.
#[derive(Debug)]
pub struct GlobalStage {
    front: Conv2d,
    down1: Conv2d,
    down2: Conv2d,
    blocks: Vec<ResidualBlock>,
    up1: ConvTranspose2d,
    up2: ConvTranspose2d,
    head: Conv2d,
    in_channels: usize,
}

impl GlobalStage {
    fn new(vb: VarBuilder, spec: &ModelSpec) -> Result<Self> {
        let b = spec.base_filters;
        let blocks = (0..spec.global_blocks_n)
            .map(|i| ResidualBlock::new(vb.pp(format!("block{i}")), 8 * b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            front: conv2d(vb.pp("front"), spec.in_channels, 2 * b, 7, 1, 0)?,
            down1: conv2d(vb.pp("down1"), 2 * b, 4 * b, 3, 2, 1)?,
            down2: conv2d(vb.pp("down2"), 4 * b, 8 * b, 3, 2, 1)?,
            blocks,
            up1: conv_transpose2d(vb.pp("up1"), 8 * b, 4 * b, 3, 2, 1, 1)?,
            up2: conv_transpose2d(vb.pp("up2"), 4 * b, 2 * b, 3, 2, 1, 1)?,
            head: conv2d(vb.pp("head"), 2 * b, spec.out_channels, 7, 1, 0)?,
            in_channels: spec.in_channels,
        })
    }

    /// Feature map before the output head (2b channels, input resolution).
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = conv_in_relu(&self.front, &reflection_pad(x, 3)?)?;
        y = conv_in_relu(&self.down1, &y)?;
        y = conv_in_relu(&self.down2, &y)?;
        for block in &self.blocks {
            y = block.forward(&y)?;
        }
        y = convt_in_relu(&self.up1, &y)?;
        convt_in_relu(&self.up2, &y)
    }

    /// Standalone forward pass: a 3-channel image at the input's
    /// resolution. Requires dims divisible by 16 (its own two-step ladder
    /// plus the 7x7 pads).
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, _, _) = x.dims4()?;
        if c != self.in_channels {
            return Err(Error::ShapeError(format!("expected {} channels, got {c}", self.in_channels)));
        }
        let features = self.features(x)?;
        Ok(conv_forward(&self.head, &reflection_pad(&features, 3)?)?.tanh()?)
    }
}

/// Two-stage coarse-to-fine generator.
#[derive(Debug)]
pub struct CoarseToFineGenerator {
    pub global: GlobalStage,
    front: Conv2d,
    down: Conv2d,
    blocks: Vec<ResidualBlock>,
    up: ConvTranspose2d,
    head: Conv2d,
    in_channels: usize,
}

impl CoarseToFineGenerator {
    fn new(vb: VarBuilder, spec: &ModelSpec) -> Result<Self> {
        let b = spec.base_filters;
        let blocks = (0..spec.local_blocks_m)
            .map(|i| ResidualBlock::new(vb.pp(format!("local.block{i}")), 2 * b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            global: GlobalStage::new(vb.pp("global"), spec)?,
            front: conv2d(vb.pp("local.front"), spec.in_channels, b, 7, 1, 0)?,
            down: conv2d(vb.pp("local.down"), b, 2 * b, 3, 2, 1)?,
            blocks,
            up: conv_transpose2d(vb.pp("local.up"), 2 * b, b, 3, 2, 1, 1)?,
            head: conv2d(vb.pp("local.head"), b, spec.out_channels, 7, 1, 0)?,
            in_channels: spec.in_channels,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        check_input(x, self.in_channels)?;
        // the global stage sees a 2x downsampled copy
        let x_half = x.avg_pool2d(2)?;
        let global_features = self.global.features(&x_half)?;
        let mut y = conv_in_relu(&self.front, &reflection_pad(x, 3)?)?;
        y = conv_in_relu(&self.down, &y)?;
        y = (y + global_features)?;
        for block in &self.blocks {
            y = block.forward(&y)?;
        }
        y = convt_in_relu(&self.up, &y)?;
        Ok(conv_forward(&self.head, &reflection_pad(&y, 3)?)?.tanh()?)
    }
}

/// Single-stage Johnson-style residual generator.
#[derive(Debug)]
pub struct ResnetGenerator {
    front: Conv2d,
    down1: Conv2d,
    down2: Conv2d,
    blocks: Vec<ResidualBlock>,
    up1: ConvTranspose2d,
    up2: ConvTranspose2d,
    head: Conv2d,
    in_channels: usize,
}

impl ResnetGenerator {
    fn new(vb: VarBuilder, spec: &ModelSpec) -> Result<Self> {
        let b = spec.base_filters;
        let blocks = (0..spec.global_blocks_n)
            .map(|i| ResidualBlock::new(vb.pp(format!("block{i}")), 4 * b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            front: conv2d(vb.pp("front"), spec.in_channels, b, 7, 1, 0)?,
            down1: conv2d(vb.pp("down1"), b, 2 * b, 3, 2, 1)?,
            down2: conv2d(vb.pp("down2"), 2 * b, 4 * b, 3, 2, 1)?,
            blocks,
            up1: conv_transpose2d(vb.pp("up1"), 4 * b, 2 * b, 3, 2, 1, 1)?,
            up2: conv_transpose2d(vb.pp("up2"), 2 * b, b, 3, 2, 1, 1)?,
            head: conv2d(vb.pp("head"), b, spec.out_channels, 7, 1, 0)?,
            in_channels: spec.in_channels,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        check_input(x, self.in_channels)?;
        let mut y = conv_in_relu(&self.front, &reflection_pad(x, 3)?)?;
        y = conv_in_relu(&self.down1, &y)?;
        y = conv_in_relu(&self.down2, &y)?;
        for block in &self.blocks {
            y = block.forward(&y)?;
        }
        y = convt_in_relu(&self.up1, &y)?;
        y = convt_in_relu(&self.up2, &y)?;
        Ok(conv_forward(&self.head, &reflection_pad(&y, 3)?)?.tanh()?)
    }
}

/// Five-level encoder-decoder with skip connections. Five halvings is what
/// the divisible-by-32 input contract supports.
#[derive(Debug)]
pub struct UnetGenerator {
    down: Vec<Conv2d>,
    up: Vec<ConvTranspose2d>,
    in_channels: usize,
}

impl UnetGenerator {
    fn new(vb: VarBuilder, spec: &ModelSpec) -> Result<Self> {
        let b = spec.base_filters;
        let enc = [spec.in_channels, b, 2 * b, 4 * b, 8 * b, 8 * b];
        let mut down = Vec::new();
        for i in 0..5 {
            down.push(conv2d(vb.pp(format!("down{i}")), enc[i], enc[i + 1], 4, 2, 1)?);
        }
        // decoder inputs carry the skip concatenation
        let dec_in = [8 * b, 16 * b, 8 * b, 4 * b, 2 * b];
        let dec_out = [8 * b, 4 * b, 2 * b, b, spec.out_channels];
        let mut up = Vec::new();
        for i in 0..5 {
            up.push(conv_transpose2d(vb.pp(format!("up{i}")), dec_in[i], dec_out[i], 4, 2, 1, 0)?);
        }
        Ok(Self { down, up, in_channels: spec.in_channels })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        check_input(x, self.in_channels)?;
        let mut skips = Vec::new();
        let mut y = x.clone();
        for (i, conv) in self.down.iter().enumerate() {
            y = conv_forward(conv, &y)?;
            if i > 0 {
                y = instance_norm(&y, 1e-5)?;
            }
            y = candle_nn::ops::leaky_relu(&y, 0.2)?;
            skips.push(y.clone());
        }
        for (i, conv) in self.up.iter().enumerate() {
            y = conv.forward(&y)?;
            if i + 1 < self.up.len() {
                y = instance_norm(&y, 1e-5)?.relu()?;
                // skip from the mirrored encoder level
                let skip = &skips[self.down.len() - 2 - i];
                y = Tensor::cat(&[&y, skip], 1)?;
            }
        }
        Ok(y.tanh()?)
    }
}

#[derive(Debug)]
pub enum Generator {
    CoarseToFine(CoarseToFineGenerator),
    Unet(UnetGenerator),
    Resnet(ResnetGenerator),
}

/// Build a generator under the given variable builder. Weights come out
/// zero-filled; callers seed them with [`crate::nn::init_gaussian`] or a
/// checkpoint load.
pub fn build_generator(spec: &ModelSpec, vb: VarBuilder) -> Result<Generator> {
    spec.validate()?;
    Ok(match spec.variant {
        GeneratorVariant::CoarseToFine => Generator::CoarseToFine(CoarseToFineGenerator::new(vb, spec)?),
        GeneratorVariant::Unet => Generator::Unet(UnetGenerator::new(vb, spec)?),
        GeneratorVariant::Resnet => Generator::Resnet(ResnetGenerator::new(vb, spec)?),
    })
}

impl Generator {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Generator::CoarseToFine(g) => g.forward(x),
            Generator::Unet(g) => g.forward(x),
            Generator::Resnet(g) => g.forward(x),
        }
    }
}

fn conv_params(k: usize, in_c: usize, out_c: usize) -> usize {
    k * k * in_c * out_c + out_c
}

/// Closed-form parameter count of the coarse-to-fine layer schedule above.
pub fn coarse_to_fine_param_count(spec: &ModelSpec) -> usize {
    let (b, ic, oc) = (spec.base_filters, spec.in_channels, spec.out_channels);
    let global = conv_params(7, ic, 2 * b)
        + conv_params(3, 2 * b, 4 * b)
        + conv_params(3, 4 * b, 8 * b)
        + spec.global_blocks_n * ResidualBlock::param_count(8 * b)
        + conv_params(3, 8 * b, 4 * b)
        + conv_params(3, 4 * b, 2 * b)
        + conv_params(7, 2 * b, oc);
    let local = conv_params(7, ic, b)
        + conv_params(3, b, 2 * b)
        + spec.local_blocks_m * ResidualBlock::param_count(2 * b)
        + conv_params(3, 2 * b, b)
        + conv_params(7, b, oc);
    global + local
}
