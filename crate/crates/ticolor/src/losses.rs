//! The four training loss terms and their weighted combination, plus the
//! discriminator objective and the least-squares variant.
//!
//! Adversarial terms always consume score-grid *logits* and use the fused
//! stable softplus formulation; an explicit log of a sigmoid never
//! appears. For the standard variant, mean softplus(-logit) equals the
//! mean of -log(sigmoid(logit)) exactly.

use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::vgg::{FeatureExtractor, FeatureTaps};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialVariant {
    Standard,
    LeastSquares,
}

impl std::str::FromStr for AdversarialVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "least_squares" => Ok(Self::LeastSquares),
            other => Err(Error::Config(format!("unknown adversarial variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentNorm {
    L1,
    L2,
}

impl std::str::FromStr for ContentNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            other => Err(Error::Config(format!("unknown content norm {other:?}"))),
        }
    }
}

/// The lambda coefficients of the full objective plus variant switches.
/// A lambda of zero removes that term entirely.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub lambda_adv: f64,
    pub lambda_perceptual: f64,
    pub lambda_tv: f64,
    pub adversarial_variant: AdversarialVariant,
    pub conditional: bool,
    pub content_norm: ContentNorm,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_adv: 0.03,
            lambda_perceptual: 1.0,
            lambda_tv: 1.0,
            adversarial_variant: AdversarialVariant::Standard,
            conditional: true,
            content_norm: ContentNorm::L1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_adv", self.lambda_adv),
            ("lambda_perceptual", self.lambda_perceptual),
            ("lambda_tv", self.lambda_tv),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::ShapeError(format!("loss inputs differ: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// Pixel-space content loss: mean absolute (or squared) difference over
/// all pixels, channels and batch items.
pub fn content_loss(generated: &Tensor, target: &Tensor, norm: ContentNorm) -> Result<Tensor> {
    check_same_shape(generated, target)?;
    let diff = (generated - target)?;
    Ok(match norm {
        ContentNorm::L1 => diff.abs()?.mean_all()?,
        ContentNorm::L2 => diff.sqr()?.mean_all()?,
    })
}

/// softplus(x) = max(x, 0) + ln(1 + exp(-|x|))
fn softplus(x: &Tensor) -> Result<Tensor> {
    Ok((x.relu()? + (x.abs()?.neg()?.exp()? + 1.0)?.log()?)?)
}

/// Generator-side adversarial loss over fake score-grid logits.
pub fn adversarial_loss_g(logits_fake: &Tensor, variant: AdversarialVariant) -> Result<Tensor> {
    Ok(match variant {
        // mean of -log D(G(x), x)
        AdversarialVariant::Standard => softplus(&logits_fake.neg()?)?.mean_all()?,
        // mean of (score - 1)^2
        AdversarialVariant::LeastSquares => (logits_fake - 1.0)?.sqr()?.mean_all()?,
    })
}

/// Discriminator objective: real toward 1, fake toward 0.
pub fn adversarial_loss_d(
    logits_real: &Tensor,
    logits_fake: &Tensor,
    variant: AdversarialVariant,
) -> Result<Tensor> {
    Ok(match variant {
        AdversarialVariant::Standard => {
            let real = softplus(&logits_real.neg()?)?.mean_all()?;
            let fake = softplus(logits_fake)?.mean_all()?;
            (real + fake)?
        }
        AdversarialVariant::LeastSquares => {
            let real = (logits_real - 1.0)?.sqr()?.mean_all()?;
            let fake = logits_fake.sqr()?.mean_all()?;
            (real + fake)?
        }
    })
}

/// Perceptual loss: per tapped layer, the mean absolute feature
/// difference (normalized by C_k * H_k * W_k), summed over layers and
/// averaged over the batch.
pub fn perceptual_loss(
    extractor: &FeatureExtractor,
    generated: &Tensor,
    target: &Tensor,
    taps: &FeatureTaps,
) -> Result<Tensor> {
    check_same_shape(generated, target)?;
    let fg = extractor.features(generated, taps)?;
    // target features carry no gradient
    let ft = extractor.features(&target.detach(), taps)?;
    let mut total: Option<Tensor> = None;
    for (a, b) in fg.iter().zip(&ft) {
        let layer = (a - b)?.abs()?.mean_all()?;
        total = Some(match total {
            None => layer,
            Some(t) => (t + layer)?,
        });
    }
    match total {
        Some(t) => Ok(t),
        None => Ok(Tensor::zeros((), generated.dtype(), generated.device())?),
    }
}

/// Total variation loss: sum over channels and valid positions of
/// |forward horizontal difference| + |forward vertical difference|,
/// normalized by W*H and averaged over the batch.
pub fn tv_loss(generated: &Tensor) -> Result<Tensor> {
    let (batch, _, h, w) = generated.dims4()?;
    let scale = 1.0 / (w * h * batch) as f64;
    let mut total: Option<Tensor> = None;
    if w > 1 {
        let dx = (generated.narrow(3, 1, w - 1)? - generated.narrow(3, 0, w - 1)?)?;
        total = Some(dx.abs()?.sum_all()?);
    }
    if h > 1 {
        let dy = (generated.narrow(2, 1, h - 1)? - generated.narrow(2, 0, h - 1)?)?;
        let s = dy.abs()?.sum_all()?;
        total = Some(match total {
            None => s,
            Some(t) => (t + s)?,
        });
    }
    match total {
        Some(t) => Ok((t * scale)?),
        None => Ok(Tensor::zeros((), generated.dtype(), generated.device())?),
    }
}

/// Scalar per-term values of one combined loss evaluation.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub content: f64,
    pub adversarial: f64,
    pub perceptual: f64,
    pub tv: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.content, self.adversarial, self.perceptual, self.tv, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
}

/// Weighted combination:
/// content + lambda_perceptual * perceptual + lambda_adv * adversarial
/// + lambda_tv * tv.
pub fn total_loss(
    content: &Tensor,
    adversarial: &Tensor,
    perceptual: &Tensor,
    tv: &Tensor,
    weights: &LossWeights,
) -> Result<(Tensor, LossBreakdown)> {
    weights.validate()?;
    let mut total = content.clone();
    if weights.lambda_perceptual != 0.0 {
        total = (total + (perceptual * weights.lambda_perceptual)?)?;
    }
    if weights.lambda_adv != 0.0 {
        total = (total + (adversarial * weights.lambda_adv)?)?;
    }
    if weights.lambda_tv != 0.0 {
        total = (total + (tv * weights.lambda_tv)?)?;
    }
    let breakdown = LossBreakdown {
        content: scalar(content)?,
        adversarial: scalar(adversarial)?,
        perceptual: scalar(perceptual)?,
        tv: scalar(tv)?,
        total: scalar(&total)?,
    };
    Ok((total, breakdown))
}
