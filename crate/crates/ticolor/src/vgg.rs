//! Frozen VGG-16 feature extractor for the perceptual loss.
//!
//! The feature stack mirrors the standard 16-layer topology; activation
//! indices follow the usual `features` numbering, so the default taps
//! [3, 8, 15, 22] are relu1_2, relu2_2, relu3_3 and relu4_3.
//!
//! Weights load from a safetensors file with `features.{i}.weight` /
//! `features.{i}.bias` keys (the torchvision naming). Without a weights
//! file the extractor uses a seeded Gaussian fallback: still a frozen,
//! deterministic multi-scale feature network, good enough for tests and
//! smoke training, clearly marked in the run log.

use std::path::Path;

use candle_core::{DType, Device, Tensor};
use candle_nn::{Conv2d, Conv2dConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Which activation indices the perceptual loss taps.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FeatureTaps {
    pub layer_indices: Vec<usize>,
}

impl Default for FeatureTaps {
    fn default() -> Self {
        Self { layer_indices: vec![3, 8, 15, 22] }
    }
}

/// Entries of the feature stack up to relu4_3.
#[derive(Debug, Clone, Copy)]
enum LayerKind {
    /// (in, out) 3x3 stride-1 pad-1 convolution
    Conv(usize, usize),
    Relu,
    MaxPool,
}

/// Indices 0..=22 of the 16-layer feature stack.
const TOPOLOGY: [LayerKind; 23] = [
    LayerKind::Conv(3, 64),
    LayerKind::Relu,
    LayerKind::Conv(64, 64),
    LayerKind::Relu, // 3: relu1_2
    LayerKind::MaxPool,
    LayerKind::Conv(64, 128),
    LayerKind::Relu,
    LayerKind::Conv(128, 128),
    LayerKind::Relu, // 8: relu2_2
    LayerKind::MaxPool,
    LayerKind::Conv(128, 256),
    LayerKind::Relu,
    LayerKind::Conv(256, 256),
    LayerKind::Relu,
    LayerKind::Conv(256, 256),
    LayerKind::Relu, // 15: relu3_3
    LayerKind::MaxPool,
    LayerKind::Conv(256, 512),
    LayerKind::Relu,
    LayerKind::Conv(512, 512),
    LayerKind::Relu,
    LayerKind::Conv(512, 512),
    LayerKind::Relu, // 22: relu4_3
];

/// ImageNet channel statistics used to standardize extractor input.
const MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const STD: [f64; 3] = [0.229, 0.224, 0.225];

enum Layer {
    Conv(Conv2d),
    Relu,
    MaxPool,
}

/// Frozen feature network; weights are plain tensors, never trainable.
pub struct FeatureExtractor {
    layers: Vec<Layer>,
    device: Device,
    dtype: DType,
    /// true when loaded from a pretrained weights file
    pub pretrained: bool,
}

fn seeded_conv_weights(
    in_c: usize,
    out_c: usize,
    rng: &mut ChaCha8Rng,
    dtype: DType,
    device: &Device,
) -> Result<(Tensor, Tensor)> {
    let fan_in = (in_c * 9) as f64;
    let std = (2.0 / fan_in).sqrt();
    let n = out_c * in_c * 9;
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    let w = Tensor::from_vec(values, (out_c, in_c, 3, 3), device)?.to_dtype(dtype)?;
    let b = Tensor::zeros(out_c, dtype, device)?;
    Ok((w, b))
}

/// 2x2 stride-2 max pooling via reshape + max reductions. The builtin
/// `max_pool2d` backward scales gradients by 1/(kernel area) in the
/// current backend, so the loss must avoid it; `max(dim)` routes the
/// full gradient to the argmax. Odd trailing rows/columns are dropped,
/// matching floor pooling.
fn pool2(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    let x = x.narrow(2, 0, h - h % 2)?.narrow(3, 0, w - w % 2)?;
    let y = x.reshape((b, c, h / 2, 2, w / 2, 2))?.max(5)?.max(3)?;
    Ok(y)
}

impl FeatureExtractor {
    /// Build with weights from `weights_path`, or the seeded fallback when
    /// `None`.
    pub fn new(weights_path: Option<&Path>, dtype: DType, device: &Device) -> Result<Self> {
        let loaded = match weights_path {
            Some(p) => Some(candle_core::safetensors::load(p, device).map_err(|e| {
                Error::CheckpointCorrupt { path: p.to_path_buf(), reason: e.to_string() }
            })?),
            None => None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x56_47_47_31_36);
        let mut layers = Vec::new();
        for (i, kind) in TOPOLOGY.iter().enumerate() {
            layers.push(match *kind {
                LayerKind::Relu => Layer::Relu,
                LayerKind::MaxPool => Layer::MaxPool,
                LayerKind::Conv(in_c, out_c) => {
                    let (w, b) = match &loaded {
                        Some(map) => {
                            let get = |suffix: &str| {
                                map.get(&format!("features.{i}.{suffix}")).cloned().ok_or_else(|| {
                                    Error::Config(format!("weights file missing features.{i}.{suffix}"))
                                })
                            };
                            let w = get("weight")?.to_dtype(dtype)?;
                            let b = get("bias")?.to_dtype(dtype)?;
                            if w.dims() != [out_c, in_c, 3, 3] {
                                return Err(Error::ShapeError(format!(
                                    "features.{i}.weight has shape {:?}, expected {:?}",
                                    w.dims(),
                                    [out_c, in_c, 3, 3]
                                )));
                            }
                            (w, b)
                        }
                        None => seeded_conv_weights(in_c, out_c, &mut rng, dtype, device)?,
                    };
                    let cfg = Conv2dConfig { padding: 1, stride: 1, ..Default::default() };
                    Layer::Conv(Conv2d::new(w, Some(b), cfg))
                }
            });
        }
        Ok(Self { layers, device: device.clone(), dtype, pretrained: loaded.is_some() })
    }

    /// Map [-1, 1] network output to the extractor's input statistics.
    pub fn preprocess(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, _, _) = x.dims4()?;
        if c != 3 {
            return Err(Error::ShapeError(format!("perceptual input must be 3-channel, got {c}")));
        }
        let x01 = ((x + 1.0)? / 2.0)?;
        let mean = Tensor::from_slice(&MEAN, (1, 3, 1, 1), &self.device)?.to_dtype(self.dtype)?;
        let std = Tensor::from_slice(&STD, (1, 3, 1, 1), &self.device)?.to_dtype(self.dtype)?;
        Ok(x01.broadcast_sub(&mean)?.broadcast_div(&std)?)
    }

    /// Feature maps at the requested activation indices, in input order.
    pub fn features(&self, x: &Tensor, taps: &FeatureTaps) -> Result<Vec<Tensor>> {
        let mut out = Vec::new();
        if taps.layer_indices.is_empty() {
            return Ok(out);
        }
        let max_tap = *taps.layer_indices.iter().max().unwrap();
        if max_tap >= self.layers.len() {
            return Err(Error::Config(format!(
                "tap index {max_tap} beyond feature stack depth {}",
                self.layers.len()
            )));
        }
        let mut y = self.preprocess(x)?;
        for (i, layer) in self.layers.iter().enumerate() {
            y = match layer {
                Layer::Conv(c) => crate::nn::conv_forward(c, &y)?,
                Layer::Relu => y.relu()?,
                Layer::MaxPool => pool2(&y)?,
            };
            if taps.layer_indices.contains(&i) {
                out.push(y.clone());
            }
            if i == max_tap {
                break;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tap_shapes_follow_pooling_ladder() {
        let dev = Device::Cpu;
        let ex = FeatureExtractor::new(None, DType::F32, &dev).unwrap();
        let x = Tensor::rand(-1f32, 1.0, (1, 3, 32, 32), &dev).unwrap();
        let feats = ex.features(&x, &FeatureTaps::default()).unwrap();
        assert_eq!(feats.len(), 4);
        assert_eq!(feats[0].dims(), &[1, 64, 32, 32]);
        assert_eq!(feats[1].dims(), &[1, 128, 16, 16]);
        assert_eq!(feats[2].dims(), &[1, 256, 8, 8]);
        assert_eq!(feats[3].dims(), &[1, 512, 4, 4]);
    }

    #[test]
    fn fallback_weights_are_deterministic() {
        let dev = Device::Cpu;
        let x = Tensor::rand(-1f32, 1.0, (1, 3, 16, 16), &dev).unwrap();
        let taps = FeatureTaps { layer_indices: vec![3] };
        let run = || {
            let ex = FeatureExtractor::new(None, DType::F32, &dev).unwrap();
            ex.features(&x, &taps).unwrap()[0].flatten_all().unwrap().to_vec1::<f32>().unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn empty_taps_give_no_features() {
        let dev = Device::Cpu;
        let ex = FeatureExtractor::new(None, DType::F32, &dev).unwrap();
        let x = Tensor::rand(-1f32, 1.0, (1, 3, 8, 8), &dev).unwrap();
        let feats = ex.features(&x, &FeatureTaps { layer_indices: vec![] }).unwrap();
        assert!(feats.is_empty());
    }

    #[test]
    fn preprocess_maps_range() {
        let dev = Device::Cpu;
        let ex = FeatureExtractor::new(None, DType::F64, &dev).unwrap();
        let x = Tensor::ones((1, 3, 2, 2), DType::F64, &dev).unwrap();
        let y = ex.preprocess(&x).unwrap();
        let v = y.narrow(1, 0, 1).unwrap().flatten_all().unwrap().to_vec1::<f64>().unwrap();
        assert!((v[0] - (1.0 - MEAN[0]) / STD[0]).abs() < 1e-12);
    }
}
