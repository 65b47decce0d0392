//! Shared network building blocks: reflection padding, instance
//! normalization, convolution constructors and residual blocks.

use candle_core::{Tensor, Var, D};
use candle_nn::{Conv2d, Conv2dConfig, ConvTranspose2d, ConvTranspose2dConfig, Init, Module, VarBuilder, VarMap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Reflection-pad the two spatial dims of a NCHW tensor by `pad` on every
/// side.
pub fn reflection_pad(x: &Tensor, pad: usize) -> Result<Tensor> {
    if pad == 0 {
        return Ok(x.clone());
    }
    let (_, _, h, w) = x.dims4()?;
    assert!(pad < w && pad < h, "reflection pad {pad} too large for {h}x{w}");
    let left = x.narrow(3, 1, pad)?.contiguous()?.flip(&[3])?;
    let right = x.narrow(3, w - 1 - pad, pad)?.contiguous()?.flip(&[3])?;
    let x = Tensor::cat(&[&left, x, &right], 3)?;
    let top = x.narrow(2, 1, pad)?.contiguous()?.flip(&[2])?;
    let bottom = x.narrow(2, h - 1 - pad, pad)?.contiguous()?.flip(&[2])?;
    Ok(Tensor::cat(&[&top, &x, &bottom], 2)?)
}

/// Non-affine instance normalization over the spatial dims of NCHW.
pub fn instance_norm(x: &Tensor, eps: f64) -> Result<Tensor> {
    let mean = x.mean_keepdim(D::Minus1)?.mean_keepdim(D::Minus2)?;
    let centered = x.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(D::Minus1)?.mean_keepdim(D::Minus2)?;
    Ok(centered.broadcast_div(&(var + eps)?.sqrt()?)?)
}

pub fn conv2d(
    vb: VarBuilder,
    in_c: usize,
    out_c: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<Conv2d> {
    let ws = vb.get_with_hints((out_c, in_c, kernel, kernel), "weight", Init::Const(0.0))?;
    let bs = vb.get_with_hints(out_c, "bias", Init::Const(0.0))?;
    let cfg = Conv2dConfig { padding, stride, ..Default::default() };
    Ok(Conv2d::new(ws, Some(bs), cfg))
}

/// Forward through a convolution, dodging a backend fault: the CPU conv2d
/// kernel returns wrong values whenever the input is square with spatial
/// side equal to the channel count. Appending `stride` zero columns breaks
/// the degenerate shape without touching the retained output columns (the
/// extras only extend the right-hand zero padding), and keeps the width
/// the backward pass reconstructs equal to the widened width.
pub fn conv_forward(conv: &Conv2d, x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    if c != h || h != w {
        return Ok(conv.forward(x)?);
    }
    let cfg = conv.config();
    let k = conv.weight().dims4()?.3;
    let ow = (w + 2 * cfg.padding - cfg.dilation * (k - 1) - 1) / cfg.stride + 1;
    let zeros = Tensor::zeros((b, c, h, cfg.stride), x.dtype(), x.device())?;
    let wide = Tensor::cat(&[x, &zeros], 3)?;
    Ok(conv.forward(&wide)?.narrow(3, 0, ow)?)
}

pub fn conv_transpose2d(
    vb: VarBuilder,
    in_c: usize,
    out_c: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<ConvTranspose2d> {
    let ws = vb.get_with_hints((in_c, out_c, kernel, kernel), "weight", Init::Const(0.0))?;
    let bs = vb.get_with_hints(out_c, "bias", Init::Const(0.0))?;
    let cfg = ConvTranspose2dConfig { padding, output_padding, stride, ..Default::default() };
    Ok(ConvTranspose2d::new(ws, Some(bs), cfg))
}

/// Reinitialize every weight in the map from a seeded Gaussian(0, std);
/// biases get zero. Names are visited in sorted order so the result is a
/// pure function of the seed.
pub fn init_gaussian(varmap: &VarMap, seed: u64, std: f64) -> Result<()> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = varmap.data().lock().unwrap();
    let mut names: Vec<&String> = data.keys().collect();
    names.sort();
    for name in names {
        let var: &Var = &data[name];
        let t = var.as_tensor();
        let n = t.elem_count();
        let values: Vec<f64> = if name.ends_with(".bias") {
            vec![0.0; n]
        } else {
            // Box-Muller; two uniforms per normal keeps the stream simple
            (0..n)
                .map(|_| {
                    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                    let u2: f64 = rng.gen();
                    std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect()
        };
        let new = Tensor::from_vec(values, t.shape(), t.device())?.to_dtype(t.dtype())?;
        var.set(&new)?;
    }
    Ok(())
}

/// Total number of scalar parameters in a var map.
pub fn param_count(varmap: &VarMap) -> usize {
    varmap.all_vars().iter().map(|v| v.as_tensor().elem_count()).sum()
}

/// Johnson-style residual block: two reflection-padded 3x3 convolutions
/// with instance norm, added to the input.
#[derive(Debug)]
pub struct ResidualBlock {
    conv1: Conv2d,
    conv2: Conv2d,
}

impl ResidualBlock {
    pub fn new(vb: VarBuilder, channels: usize) -> Result<Self> {
        Ok(Self {
            conv1: conv2d(vb.pp("conv1"), channels, channels, 3, 1, 0)?,
            conv2: conv2d(vb.pp("conv2"), channels, channels, 3, 1, 0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = instance_norm(&conv_forward(&self.conv1, &reflection_pad(x, 1)?)?, 1e-5)?.relu()?;
        let y = instance_norm(&conv_forward(&self.conv2, &reflection_pad(&y, 1)?)?, 1e-5)?;
        Ok((x + y)?)
    }

    /// Parameters of one block at `c` channels: two 3x3 c->c convs.
    pub fn param_count(channels: usize) -> usize {
        2 * (9 * channels * channels + channels)
    }
}
