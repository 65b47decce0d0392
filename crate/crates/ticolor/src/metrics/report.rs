//! Per-image and aggregate metric reports over prediction/reference
//! directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

use super::{msssim, nqm, psnr, ssim, NqmParams, Raster, SsimParams};

/// A metric value that may be +infinity (serialized as the string "inf").
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Db(pub f64);

impl Serialize for Db {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Db {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Db(v)),
            Raw::Str(s) if s == "inf" => Ok(Db(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad metric value {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub id: String,
    pub psnr: Db,
    pub nqm: Db,
    pub ssim: f64,
    pub mssim: f64,
}

/// Column means; infinite PSNR/NQM entries are excluded and counted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub count: usize,
    pub psnr: f64,
    pub psnr_excluded: usize,
    pub nqm: f64,
    pub nqm_excluded: usize,
    pub ssim: f64,
    pub mssim: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_image: Vec<ImageMetrics>,
    pub aggregate: MetricAggregate,
}

/// Directory evaluation result: the report plus per-file failures.
#[derive(Debug)]
pub struct EvalOutcome {
    pub report: MetricReport,
    pub errors: Vec<(PathBuf, String)>,
}

fn finite_mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut excluded = 0usize;
    for v in values {
        if v.is_finite() {
            sum += v;
            n += 1;
        } else {
            excluded += 1;
        }
    }
    (if n > 0 { sum / n as f64 } else { 0.0 }, excluded)
}

impl MetricReport {
    pub fn from_per_image(mut per_image: Vec<ImageMetrics>) -> Self {
        per_image.sort_by(|a, b| a.id.cmp(&b.id));
        let (psnr, psnr_excluded) = finite_mean(per_image.iter().map(|m| m.psnr.0));
        let (nqm, nqm_excluded) = finite_mean(per_image.iter().map(|m| m.nqm.0));
        let (ssim, _) = finite_mean(per_image.iter().map(|m| m.ssim));
        let (mssim, _) = finite_mean(per_image.iter().map(|m| m.mssim));
        let aggregate = MetricAggregate {
            count: per_image.len(),
            psnr,
            psnr_excluded,
            nqm,
            nqm_excluded,
            ssim,
            mssim,
        };
        Self { per_image, aggregate }
    }

    /// Aligned plain-text table: one aggregate row per method label.
    pub fn text_table(&self, label: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<12}{:>8}{:>8}{:>8}{:>8}\n", "Method", "PSNR", "NQM", "SSIM", "MSSIM"));
        out.push_str(&format!(
            "{:<12}{:>8.2}{:>8.2}{:>8.2}{:>8.2}\n",
            label, self.aggregate.psnr, self.aggregate.nqm, self.aggregate.ssim, self.aggregate.mssim
        ));
        out
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self).map_err(|e| Error::Config(format!("report write: {e}")))?;
        Ok(())
    }
}

// serde derives on EvalOutcome are intentionally absent; errors carry paths
// that callers log, not persist.
impl Serialize for EvalOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("EvalOutcome", 2)?;
        st.serialize_field("report", &self.report)?;
        let errs: Vec<(String, &String)> =
            self.errors.iter().map(|(p, e)| (p.display().to_string(), e)).collect();
        st.serialize_field("errors", &errs)?;
        st.end()
    }
}

/// Compute all four metrics for one prediction/reference pair.
pub fn metrics_for_pair(id: &str, pred: &Raster, reference: &Raster) -> Result<ImageMetrics> {
    Ok(ImageMetrics {
        id: id.to_string(),
        psnr: Db(psnr(pred, reference, 255.0)?),
        nqm: Db(nqm(pred, reference, &NqmParams::default())?),
        ssim: ssim(pred, reference, &SsimParams::default())?,
        mssim: msssim(pred, reference, &SsimParams::default())?,
    })
}

fn list_images(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_file() {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
                if ["png", "jpg", "jpeg", "bmp"].contains(&ext.as_str()) {
                    out.insert(name.to_string(), path);
                }
            }
        }
    }
    Ok(out)
}

/// Evaluate every matching filename across two directories.
///
/// Files missing a counterpart or failing any metric are reported in
/// `errors`; the report covers the pairs that succeeded.
pub fn evaluate_directory(pred_dir: &Path, ref_dir: &Path) -> Result<EvalOutcome> {
    let preds = list_images(pred_dir)?;
    let refs = list_images(ref_dir)?;
    if preds.is_empty() {
        return Err(Error::EmptyDataset(pred_dir.to_path_buf()));
    }

    let mut errors: Vec<(PathBuf, String)> = Vec::new();
    let mut pairs: Vec<(String, PathBuf, PathBuf)> = Vec::new();
    for (name, pred_path) in &preds {
        match refs.get(name) {
            Some(ref_path) => pairs.push((name.clone(), pred_path.clone(), ref_path.clone())),
            None => errors.push((pred_path.clone(), Error::MissingCounterpart(pred_path.clone()).to_string())),
        }
    }
    for (name, ref_path) in &refs {
        if !preds.contains_key(name) {
            errors.push((ref_path.clone(), Error::MissingCounterpart(ref_path.clone()).to_string()));
        }
    }

    let results: Vec<std::result::Result<ImageMetrics, (PathBuf, String)>> = pairs
        .par_iter()
        .map(|(name, pred_path, ref_path)| {
            let load = |p: &Path| {
                image::open(p)
                    .map(|img| Raster::from_image(&img))
                    .map_err(|e| (p.to_path_buf(), e.to_string()))
            };
            let pred = load(pred_path)?;
            let reference = load(ref_path)?;
            metrics_for_pair(name, &pred, &reference).map_err(|e| (pred_path.clone(), e.to_string()))
        })
        .collect();

    let mut per_image = Vec::new();
    for r in results {
        match r {
            Ok(m) => per_image.push(m),
            Err(e) => errors.push(e),
        }
    }
    errors.sort();
    Ok(EvalOutcome { report: MetricReport::from_per_image(per_image), errors })
}
