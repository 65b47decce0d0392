//! Shared helpers for the integration suites: tiny synthetic datasets
//! written to disk in the expected lwir/visible sibling layout.

pub mod oracles;

use std::path::Path;

use image::{GrayImage, RgbImage};
use ticolor::config::TrainConfig;
use ticolor::dataset::{build_manifest, DatasetManifest, PairingRule};
use ticolor::generator::{GeneratorVariant, ModelSpec};

/// A thermal frame with smooth structure that varies per index.
pub fn thermal_pixel(index: usize, x: u32, y: u32) -> u8 {
    let fx = x as f64 * 0.37 + index as f64 * 1.3;
    let fy = y as f64 * 0.29;
    (128.0 + 90.0 * (fx.sin() * fy.cos())).clamp(0.0, 255.0) as u8
}

/// The color each thermal value maps to: a fixed, learnable palette.
pub fn rgb_for(v: u8) -> [u8; 3] {
    [v, 255 - v, v / 2 + 64]
}

pub fn write_pair(root: &Path, set: &str, stem: &str, index: usize, w: u32, h: u32) {
    let lwir = root.join(set).join("lwir");
    let visible = root.join(set).join("visible");
    std::fs::create_dir_all(&lwir).unwrap();
    std::fs::create_dir_all(&visible).unwrap();

    let mut thermal = GrayImage::new(w, h);
    let mut rgb = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let v = thermal_pixel(index, x, y);
            thermal.put_pixel(x, y, image::Luma([v]));
            rgb.put_pixel(x, y, image::Rgb(rgb_for(v)));
        }
    }
    thermal.save(lwir.join(format!("{stem}.png"))).unwrap();
    rgb.save(visible.join(format!("{stem}.png"))).unwrap();
}

/// `n_train` pairs in set00 (train) and `n_test` in set06 (test).
pub fn synthetic_dataset(
    root: &Path,
    n_train: usize,
    n_test: usize,
    size: (u32, u32),
) -> DatasetManifest {
    let (w, h) = size;
    for i in 0..n_train {
        write_pair(root, "set00", &format!("I{i:05}"), i, w, h);
    }
    for i in 0..n_test {
        write_pair(root, "set06", &format!("I{i:05}"), n_train + i, w, h);
    }
    let mut manifest = build_manifest(root, &PairingRule::default()).unwrap().manifest;
    manifest.target_size = (w as usize, h as usize);
    manifest
}

/// Small, fast config for smoke-level training runs.
pub fn tiny_config(output_dir: &Path, target: (usize, usize)) -> TrainConfig {
    let mut c = TrainConfig::default();
    c.model = ModelSpec {
        variant: GeneratorVariant::CoarseToFine,
        base_filters: 4,
        local_blocks_m: 1,
        global_blocks_n: 1,
        in_channels: 1,
        out_channels: 3,
    };
    c.disc_base_filters = 4;
    c.epochs = 1;
    c.seed = 7;
    c.output_dir = output_dir.to_path_buf();
    c.target_size = target;
    c
}
