//! Thermal/RGB pair ingestion: manifest building, decoding, resizing,
//! normalization and deterministic batch iteration.

use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::DynamicImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::types::{normalize_u8, Split, TensorImage, TimeOfDay};

/// How thermal files are matched to RGB files.
///
/// The default mirrors the KAIST multispectral layout: `lwir/` and
/// `visible/` sibling directories whose frames share a file stem. Split and
/// time-of-day are read from path components when present (`train`/`test`,
/// `day`/`night`); KAIST set numbers map set00-set05 to train/day-ish
/// defaults and set06-set11 to test.
#[derive(Debug, Clone)]
pub struct PairingRule {
    pub thermal_dir: String,
    pub rgb_dir: String,
    pub default_split: Split,
}

impl Default for PairingRule {
    fn default() -> Self {
        Self { thermal_dir: "lwir".into(), rgb_dir: "visible".into(), default_split: Split::Train }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub thermal_path: PathBuf,
    pub rgb_path: PathBuf,
    pub split: Split,
    pub time_of_day: TimeOfDay,
}

/// The list of paired images a training or evaluation run operates on.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// (width, height); both must be divisible by 32.
    pub target_size: (usize, usize),
}

/// Result of scanning a directory tree: the manifest plus every file that
/// could not be paired.
#[derive(Debug)]
pub struct ManifestBuild {
    pub manifest: DatasetManifest,
    pub orphans: Vec<PathBuf>,
}

const IMAGE_EXTS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn classify_path(path: &Path, default_split: Split) -> (Split, TimeOfDay) {
    let mut split = default_split;
    let mut tod = TimeOfDay::Unknown;
    for comp in path.components() {
        let c = comp.as_os_str().to_string_lossy().to_ascii_lowercase();
        match c.as_str() {
            "train" => split = Split::Train,
            "test" => split = Split::Test,
            "day" => tod = TimeOfDay::Day,
            "night" => tod = TimeOfDay::Night,
            _ => {
                // KAIST set convention: set00-05 train, set06-11 test.
                if let Some(num) = c.strip_prefix("set").and_then(|n| n.parse::<u32>().ok()) {
                    split = if num <= 5 { Split::Train } else { Split::Test };
                }
            }
        }
    }
    (split, tod)
}

/// Scan `root` for thermal/RGB pairs under the given pairing rule.
///
/// Unmatched files come back in `orphans`; a stem with more than one
/// candidate partner is an error rather than a silent pick.
pub fn build_manifest(root: &Path, rule: &PairingRule) -> Result<ManifestBuild> {
    if !root.exists() {
        return Err(Error::Config(format!("data root {} does not exist", root.display())));
    }
    // stem key -> candidate rgb paths, keyed by the thermal dir's parent so
    // sibling visible/lwir directories pair up.
    let mut rgb_by_key: BTreeMap<(PathBuf, String), Vec<PathBuf>> = BTreeMap::new();
    let mut thermal_files: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Config(format!("walk error: {e}")))?;
        let path = entry.path();
        if !entry.file_type().is_file() || !is_image(path) {
            continue;
        }
        let dir_name = path
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_default();
        let stem = path.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
        if dir_name == rule.thermal_dir {
            thermal_files.push(path.to_path_buf());
        } else if dir_name == rule.rgb_dir {
            let scope = path
                .parent()
                .and_then(|p| p.parent())
                .map(|p| p.to_path_buf())
                .unwrap_or_default();
            rgb_by_key.entry((scope, stem)).or_default().push(path.to_path_buf());
        }
    }

    let mut entries = Vec::new();
    let mut orphans = Vec::new();
    for thermal in thermal_files {
        let stem = thermal.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
        let scope = thermal
            .parent()
            .and_then(|p| p.parent())
            .map(|p| p.to_path_buf())
            .unwrap_or_default();
        match rgb_by_key.remove(&(scope.clone(), stem.clone())) {
            None => orphans.push(thermal),
            Some(candidates) if candidates.len() > 1 => {
                return Err(Error::PairingAmbiguity { stem, candidates });
            }
            Some(mut candidates) => {
                let rgb = candidates.pop().expect("len checked");
                let rel = thermal.strip_prefix(root).unwrap_or(&thermal);
                let id = rel.with_extension("").to_string_lossy().replace(std::path::MAIN_SEPARATOR, "/");
                let (split, time_of_day) = classify_path(rel, rule.default_split);
                entries.push(ManifestEntry { id, thermal_path: thermal, rgb_path: rgb, split, time_of_day });
            }
        }
    }
    // everything left in rgb_by_key had no thermal partner
    orphans.extend(rgb_by_key.into_values().flatten());
    orphans.sort();

    if entries.is_empty() {
        return Err(Error::EmptyDataset(root.to_path_buf()));
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let manifest = DatasetManifest { root: root.to_path_buf(), entries, target_size: (320, 256) };
    Ok(ManifestBuild { manifest, orphans })
}

impl DatasetManifest {
    pub fn split_entries(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    /// Persist as tab-separated lines: id, thermal, rgb, split, time_of_day.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for e in &self.entries {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                e.id,
                e.thermal_path.display(),
                e.rgb_path.display(),
                e.split,
                e.time_of_day
            )?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 5 {
                return Err(Error::Config(format!(
                    "{}:{}: expected 5 tab-separated fields, got {}",
                    path.display(),
                    lineno + 1,
                    fields.len()
                )));
            }
            entries.push(ManifestEntry {
                id: fields[0].to_string(),
                thermal_path: PathBuf::from(fields[1]),
                rgb_path: PathBuf::from(fields[2]),
                split: fields[3].parse()?,
                time_of_day: fields[4].parse()?,
            });
        }
        if entries.is_empty() {
            return Err(Error::EmptyDataset(path.to_path_buf()));
        }
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(Self { root, entries, target_size: (320, 256) })
    }

    /// Check that every referenced file exists and ids are unique.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(&e.id) {
                return Err(Error::Config(format!("duplicate id {}", e.id)));
            }
            for p in [&e.thermal_path, &e.rgb_path] {
                if !p.exists() {
                    return Err(Error::Config(format!("missing file {}", p.display())));
                }
            }
        }
        Ok(())
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| Error::DecodeError { path: path.to_path_buf(), reason: e.to_string() })
}

/// Load a thermal image as a normalized 1-channel tensor.
///
/// Grayscale stored as 3 identical channels is collapsed to one; genuinely
/// colored input is a `ChannelMismatch`.
pub fn load_thermal(path: &Path, target: (usize, usize)) -> Result<TensorImage> {
    let img = decode_thermal(path)?;
    let (w, h) = target;
    let resized = image::imageops::resize(&img, w as u32, h as u32, FilterType::Triangle);
    let data = resized.pixels().map(|p| normalize_u8(p[0])).collect();
    TensorImage::new(1, h, w, data)
}

/// Load a thermal image at its stored size, without resizing.
pub fn load_thermal_native(path: &Path) -> Result<TensorImage> {
    let img = decode_thermal(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| normalize_u8(p[0])).collect();
    TensorImage::new(1, h, w, data)
}

fn decode_thermal(path: &Path) -> Result<image::GrayImage> {
    let img = decode(path)?;
    let img = match &img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_) => img.to_luma8(),
        DynamicImage::ImageRgb8(rgb) => {
            if rgb.pixels().any(|p| p[0] != p[1] || p[1] != p[2]) {
                return Err(Error::ChannelMismatch { path: path.to_path_buf(), expected: 1, got: 3 });
            }
            img.to_luma8()
        }
        _ => {
            return Err(Error::ChannelMismatch {
                path: path.to_path_buf(),
                expected: 1,
                got: img.color().channel_count() as usize,
            })
        }
    };
    Ok(img)
}

/// Load an RGB image as a normalized 3-channel tensor.
pub fn load_rgb(path: &Path, target: (usize, usize)) -> Result<TensorImage> {
    let img = decode(path)?;
    match img {
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageLuma8(_) => {}
        _ => {
            return Err(Error::ChannelMismatch {
                path: path.to_path_buf(),
                expected: 3,
                got: img.color().channel_count() as usize,
            })
        }
    }
    let rgb = img.to_rgb8();
    let (w, h) = target;
    let resized = image::imageops::resize(&rgb, w as u32, h as u32, FilterType::Triangle);
    let mut data = vec![0.0f32; 3 * h * w];
    for (x, y, p) in resized.enumerate_pixels() {
        let idx = y as usize * w + x as usize;
        for c in 0..3 {
            data[c * h * w + idx] = normalize_u8(p[c]);
        }
    }
    TensorImage::new(3, h, w, data)
}

/// Decode, resize and normalize one manifest entry.
pub fn load_pair(entry: &ManifestEntry, target: (usize, usize)) -> Result<(TensorImage, TensorImage)> {
    let (w, h) = target;
    if w % 32 != 0 || h % 32 != 0 {
        return Err(Error::ShapeError(format!("target size {w}x{h} must be divisible by 32")));
    }
    Ok((load_thermal(&entry.thermal_path, target)?, load_rgb(&entry.rgb_path, target)?))
}

/// One batch of loaded pairs.
#[derive(Debug)]
pub struct Batch {
    pub ids: Vec<String>,
    pub thermal: Vec<TensorImage>,
    pub rgb: Vec<TensorImage>,
}

/// Deterministic visitation order for one epoch.
///
/// The order is a pure function of `(seed, epoch)`; two runs with the same
/// seed visit entries identically.
pub fn epoch_order(n: usize, shuffle: bool, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        let mixed = seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(mixed);
        order.shuffle(&mut rng);
    }
    order
}

/// Iterate one epoch of batches over a split.
pub struct BatchIter<'a> {
    entries: Vec<&'a ManifestEntry>,
    target: (usize, usize),
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl<'a> BatchIter<'a> {
    pub fn new(
        manifest: &'a DatasetManifest,
        split: Split,
        batch_size: usize,
        shuffle: bool,
        seed: u64,
        epoch: usize,
    ) -> Self {
        assert!(batch_size >= 1, "batch_size must be >= 1");
        let entries = manifest.split_entries(split);
        let order = epoch_order(entries.len(), shuffle, seed, epoch);
        Self { entries, target: manifest.target_size, order, batch_size, cursor: 0 }
    }
}

impl Iterator for BatchIter<'_> {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let mut batch = Batch { ids: Vec::new(), thermal: Vec::new(), rgb: Vec::new() };
        for &idx in &self.order[self.cursor..end] {
            let entry = self.entries[idx];
            match load_pair(entry, self.target) {
                Ok((t, rgb)) => {
                    batch.ids.push(entry.id.clone());
                    batch.thermal.push(t);
                    batch.rgb.push(rgb);
                }
                Err(e) => {
                    self.cursor = self.order.len();
                    return Some(Err(e));
                }
            }
        }
        self.cursor = end;
        Some(Ok(batch))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, RgbImage};

    fn write_pair(root: &Path, set: &str, stem: &str, w: u32, h: u32) {
        let lwir = root.join(set).join("lwir");
        let vis = root.join(set).join("visible");
        std::fs::create_dir_all(&lwir).unwrap();
        std::fs::create_dir_all(&vis).unwrap();
        let mut g = GrayImage::new(w, h);
        for (x, y, p) in g.enumerate_pixels_mut() {
            p[0] = ((x + y) % 256) as u8;
        }
        g.save(lwir.join(format!("{stem}.png"))).unwrap();
        let mut c = RgbImage::new(w, h);
        for (x, y, p) in c.enumerate_pixels_mut() {
            *p = image::Rgb([(x % 256) as u8, (y % 256) as u8, 128]);
        }
        c.save(vis.join(format!("{stem}.png"))).unwrap();
    }

    fn tiny_dataset(n: usize) -> (tempfile::TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..n {
            write_pair(dir.path(), "set00/V000", &format!("I{i:05}"), 64, 64);
        }
        let mut m = build_manifest(dir.path(), &PairingRule::default()).unwrap().manifest;
        m.target_size = (32, 32);
        (dir, m)
    }

    #[test]
    fn four_pairs_plus_orphan() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..4 {
            write_pair(dir.path(), "set00/V000", &format!("I{i:05}"), 16, 16);
        }
        // orphan thermal with no visible partner
        let orphan = dir.path().join("set00/V000/lwir/I99999.png");
        GrayImage::new(16, 16).save(&orphan).unwrap();
        let built = build_manifest(dir.path(), &PairingRule::default()).unwrap();
        assert_eq!(built.manifest.entries.len(), 4);
        assert_eq!(built.orphans, vec![orphan]);
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        match build_manifest(dir.path(), &PairingRule::default()) {
            Err(Error::EmptyDataset(_)) => {}
            other => panic!("expected EmptyDataset, got {other:?}"),
        }
    }

    #[test]
    fn ambiguous_stem_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_pair(dir.path(), "set00/V000", "I00000", 16, 16);
        let vis = dir.path().join("set00/V000/visible");
        GrayImage::new(16, 16).save(vis.join("I00000.jpg")).unwrap();
        match build_manifest(dir.path(), &PairingRule::default()) {
            Err(Error::PairingAmbiguity { stem, candidates }) => {
                assert_eq!(stem, "I00000");
                assert_eq!(candidates.len(), 2);
            }
            other => panic!("expected PairingAmbiguity, got {other:?}"),
        }
    }

    #[test]
    fn kaist_set_numbers_assign_splits() {
        let dir = tempfile::tempdir().unwrap();
        write_pair(dir.path(), "set00/V000", "I00000", 16, 16);
        write_pair(dir.path(), "set06/V000", "I00000", 16, 16);
        let m = build_manifest(dir.path(), &PairingRule::default()).unwrap().manifest;
        assert_eq!(m.split_entries(Split::Train).len(), 1);
        assert_eq!(m.split_entries(Split::Test).len(), 1);
    }

    #[test]
    fn load_pair_resizes_and_shapes() {
        let dir = tempfile::tempdir().unwrap();
        write_pair(dir.path(), "set00/V000", "I00000", 640, 512);
        let m = build_manifest(dir.path(), &PairingRule::default()).unwrap().manifest;
        let (t, rgb) = load_pair(&m.entries[0], (320, 256)).unwrap();
        assert_eq!((t.channels, t.height, t.width), (1, 256, 320));
        assert_eq!((rgb.channels, rgb.height, rgb.width), (3, 256, 320));
        for v in t.data.iter().chain(rgb.data.iter()) {
            assert!((-1.0..=1.0).contains(v));
        }
    }

    #[test]
    fn constant_images_hit_normalization_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let lwir = dir.path().join("lwir");
        std::fs::create_dir_all(&lwir).unwrap();
        let zero = lwir.join("z.png");
        GrayImage::from_pixel(32, 32, image::Luma([0])).save(&zero).unwrap();
        let full = lwir.join("f.png");
        GrayImage::from_pixel(32, 32, image::Luma([255])).save(&full).unwrap();
        let t = load_thermal(&zero, (32, 32)).unwrap();
        assert!(t.data.iter().all(|&v| v == -1.0));
        let t = load_thermal(&full, (32, 32)).unwrap();
        assert!(t.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rgba_input_is_channel_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        image::RgbaImage::new(8, 8).save(&p).unwrap();
        match load_rgb(&p, (32, 32)) {
            Err(Error::ChannelMismatch { got: 4, .. }) => {}
            other => panic!("expected ChannelMismatch, got {other:?}"),
        }
    }

    #[test]
    fn three_channel_grayscale_collapses() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        RgbImage::from_pixel(8, 8, image::Rgb([7, 7, 7])).save(&p).unwrap();
        let t = load_thermal(&p, (32, 32)).unwrap();
        assert_eq!(t.channels, 1);
        let q = dir.path().join("c.png");
        RgbImage::from_pixel(8, 8, image::Rgb([7, 8, 7])).save(&q).unwrap();
        assert!(load_thermal(&q, (32, 32)).is_err());
    }

    #[test]
    fn batch_sizes_cover_epoch() {
        let (_dir, m) = tiny_dataset(5);
        let sizes: Vec<usize> = BatchIter::new(&m, Split::Train, 2, false, 0, 0)
            .map(|b| b.unwrap().ids.len())
            .collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        let n_batches = BatchIter::new(&m, Split::Train, 1, false, 0, 0).count();
        assert_eq!(n_batches, 5);
    }

    #[test]
    fn shuffle_is_deterministic_in_seed_and_epoch() {
        let a = epoch_order(100, true, 42, 3);
        let b = epoch_order(100, true, 42, 3);
        assert_eq!(a, b);
        assert_ne!(a, epoch_order(100, true, 42, 4));
        assert_ne!(a, epoch_order(100, true, 43, 3));
    }

    #[test]
    fn epoch_covers_every_id_exactly_once() {
        let (_dir, m) = tiny_dataset(7);
        let mut seen: Vec<String> = BatchIter::new(&m, Split::Train, 3, true, 9, 0)
            .flat_map(|b| b.unwrap().ids)
            .collect();
        seen.sort();
        let mut want: Vec<String> = m.entries.iter().map(|e| e.id.clone()).collect();
        want.sort();
        assert_eq!(seen, want);
    }

    #[test]
    fn manifest_tsv_round_trip() {
        let (_dir, m) = tiny_dataset(3);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("manifest.tsv");
        m.save(&path).unwrap();
        let loaded = DatasetManifest::load(&path).unwrap();
        assert_eq!(loaded.entries, m.entries);
    }
}
