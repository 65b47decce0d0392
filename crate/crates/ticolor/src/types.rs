use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which dataset split an image pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Capture time tag carried through from the dataset layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeOfDay {
    Day,
    Night,
    Unknown,
}

impl std::str::FromStr for TimeOfDay {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "day" => Ok(TimeOfDay::Day),
            "night" => Ok(TimeOfDay::Night),
            "unknown" => Ok(TimeOfDay::Unknown),
            other => Err(Error::Config(format!("unknown time_of_day {other:?}"))),
        }
    }
}

impl std::fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeOfDay::Day => write!(f, "day"),
            TimeOfDay::Night => write!(f, "night"),
            TimeOfDay::Unknown => write!(f, "unknown"),
        }
    }
}

/// Dense C×H×W float image with values normalized to [-1, 1].
///
/// This is the common currency between the dataset, the models and the
/// losses. Data is channel-major: `data[c * h * w + y * w + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorImage {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

/// 8-bit value -> [-1, 1].
pub fn normalize_u8(v: u8) -> f32 {
    v as f32 / 127.5 - 1.0
}

/// [-1, 1] -> 8-bit, clamping against numeric drift.
pub fn denormalize_to_u8(v: f32) -> u8 {
    let v = v.clamp(-1.0, 1.0);
    ((v + 1.0) * 127.5).round() as u8
}

impl TensorImage {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeError(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[c * self.height * self.width + y * self.width + x]
    }

    /// Convert to an unbatched C×H×W candle tensor.
    pub fn to_tensor(&self, dtype: DType, device: &Device) -> Result<Tensor> {
        let t = Tensor::from_slice(&self.data, (self.channels, self.height, self.width), device)?;
        Ok(t.to_dtype(dtype)?)
    }

    /// Read back from a C×H×W tensor of any float dtype.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (c, h, w) = t.dims3()?;
        let data = t.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()?;
        Self::new(c, h, w, data)
    }

    /// Stack images into a B×C×H×W batch tensor.
    pub fn to_batch(images: &[&TensorImage], dtype: DType, device: &Device) -> Result<Tensor> {
        let tensors = images
            .iter()
            .map(|im| im.to_tensor(dtype, device))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tensor::stack(&tensors, 0)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_endpoints() {
        assert_eq!(normalize_u8(0), -1.0);
        assert_eq!(normalize_u8(255), 1.0);
        assert_eq!(denormalize_to_u8(-1.0), 0);
        assert_eq!(denormalize_to_u8(1.0), 255);
    }

    #[test]
    fn normalize_round_trips_all_256_values() {
        for v in 0u8..=255 {
            assert_eq!(denormalize_to_u8(normalize_u8(v)), v, "value {v}");
        }
    }

    #[test]
    fn denormalize_clamps_out_of_range() {
        assert_eq!(denormalize_to_u8(-1.5), 0);
        assert_eq!(denormalize_to_u8(1.5), 255);
    }

    #[test]
    fn tensor_round_trip() {
        let im = TensorImage::new(2, 3, 4, (0..24).map(|i| i as f32 / 24.0).collect()).unwrap();
        let t = im.to_tensor(DType::F32, &Device::Cpu).unwrap();
        assert_eq!(t.dims(), &[2, 3, 4]);
        let back = TensorImage::from_tensor(&t).unwrap();
        assert_eq!(back, im);
    }
}
