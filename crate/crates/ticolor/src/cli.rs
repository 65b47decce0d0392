//! Command-line interface: train / colorize / evaluate / ablate.
//!
//! Setting precedence, lowest to highest: built-in defaults, the
//! `--config` file, then individual flags. Every training config key is
//! exposed as a flag (underscores become dashes, e.g. `lambda_adv` is
//! `--lambda-adv`). Unknown flags are rejected.
//!
//! Exit codes:
//!
//! | code | meaning                                             |
//! |------|-----------------------------------------------------|
//! | 0    | success                                             |
//! | 1    | usage or configuration error                        |
//! | 2    | I/O, decode, or missing-file error                  |
//! | 3    | dataset or input-shape error                        |
//! | 4    | checkpoint corrupt or incompatible                  |
//! | 5    | numeric failure during training                     |
//!
//! The `TICOLOR_DEVICE` environment variable selects the compute device
//! (string-valued; only `cpu` is available in this build).

use std::path::{Path, PathBuf};

use candle_core::Device;
use clap::{Arg, ArgMatches, Command};

use crate::config::TrainConfig;
use crate::dataset::{build_manifest, DatasetManifest, PairingRule};
use crate::error::{Error, Result};
use crate::infer::{colorize_image, load_generator, save_rgb_png};
use crate::metrics::evaluate_directory;
use crate::trainer::{run_ablation, Trainer, CANONICAL_VARIANTS};

pub const ENV_DEVICE: &str = "TICOLOR_DEVICE";

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CHECKPOINT: i32 = 4;
pub const EXIT_NUMERIC: i32 = 5;

/// Every config key exposed as a per-key flag, with its help line.
pub const CONFIG_FLAGS: &[(&str, &str)] = &[
    ("variant", "generator variant: coarse_to_fine, unet, resnet"),
    ("base_filters", "generator base filter count"),
    ("local_blocks_m", "residual blocks in the local stage"),
    ("global_blocks_n", "residual blocks in the global stage"),
    ("in_channels", "generator input channels"),
    ("out_channels", "generator output channels"),
    ("disc_base_filters", "discriminator base filter count"),
    ("disc_norm", "discriminator normalization: instance, none"),
    ("conditional", "discriminator sees the thermal input: true, false"),
    ("adversarial_variant", "adversarial loss: standard, least_squares"),
    ("content_norm", "content loss norm: l1, l2"),
    ("lambda_adv", "adversarial loss weight"),
    ("lambda_perceptual", "perceptual loss weight"),
    ("lambda_tv", "total variation loss weight"),
    ("perceptual_taps", "comma-separated feature layer indices"),
    ("epochs", "number of training epochs"),
    ("batch_size", "images per batch"),
    ("lr", "Adam learning rate"),
    ("beta1", "Adam beta1"),
    ("beta2", "Adam beta2"),
    ("seed", "RNG seed for init and shuffling"),
    ("checkpoint_every", "checkpoint interval in iterations; 0 = end only"),
    ("output_dir", "directory for checkpoints, logs, reports"),
    ("target_width", "training width, divisible by 32"),
    ("target_height", "training height, divisible by 32"),
    ("vgg_weights", "safetensors file with feature-network weights"),
    ("max_iters", "hard iteration cap; 0 = run all epochs"),
    ("shuffle", "shuffle training order each epoch: true, false"),
];

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidSpec(_) => EXIT_USAGE,
        Error::Io(_) | Error::DecodeError { .. } | Error::MissingCounterpart(_) => EXIT_IO,
        Error::EmptyDataset(_)
        | Error::PairingAmbiguity { .. }
        | Error::ChannelMismatch { .. }
        | Error::ShapeError(_)
        | Error::ConditionMissing
        | Error::ImageTooSmall { .. }
        | Error::DegenerateInput(_) => EXIT_DATA,
        Error::CheckpointCorrupt { .. } | Error::FingerprintMismatch { .. } => EXIT_CHECKPOINT,
        Error::NonFiniteLoss { .. } | Error::Candle(_) => EXIT_NUMERIC,
    }
}

fn with_config_flags(mut cmd: Command) -> Command {
    for (key, help) in CONFIG_FLAGS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(key.replace('_', "-"))
                .value_name("VALUE")
                .help(*help),
        );
    }
    cmd
}

pub fn command() -> Command {
    Command::new("ticolor")
        .about("Thermal-infrared to RGB colorization")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_config_flags(
            Command::new("train")
                .about("Train a colorization model")
                .arg(Arg::new("data").long("data").value_name("PATH").required(true).help(
                    "dataset root to scan, or a manifest .tsv file",
                ))
                .arg(Arg::new("config").long("config").value_name("FILE").help(
                    "flat key=value config file",
                ))
                .arg(Arg::new("resume").long("resume").value_name("CKPT").help(
                    "continue from a checkpoint",
                )),
        ))
        .subcommand(
            Command::new("colorize")
                .about("Colorize thermal images with a trained model")
                .arg(
                    Arg::new("checkpoint")
                        .long("checkpoint")
                        .value_name("CKPT")
                        .required(true)
                        .help("training checkpoint to load the generator from"),
                )
                .arg(Arg::new("input").long("input").value_name("PATH").required(true).help(
                    "a thermal image or a directory of them",
                ))
                .arg(
                    Arg::new("output_dir")
                        .long("output-dir")
                        .value_name("DIR")
                        .required(true)
                        .help("where PNG outputs are written"),
                ),
        )
        .subcommand(
            Command::new("evaluate")
                .about("Score predicted images against references")
                .arg(Arg::new("pred").long("pred").value_name("DIR").required(true).help(
                    "directory of predicted images",
                ))
                .arg(Arg::new("ref").long("ref").value_name("DIR").required(true).help(
                    "directory of reference images, matched by filename",
                ))
                .arg(Arg::new("report").long("report").value_name("FILE").help(
                    "also write the full JSON report here",
                )),
        )
        .subcommand(with_config_flags(
            Command::new("ablate")
                .about("Train and score a matrix of loss/architecture variants")
                .arg(Arg::new("data").long("data").value_name("PATH").required(true).help(
                    "dataset root to scan, or a manifest .tsv file",
                ))
                .arg(Arg::new("config").long("config").value_name("FILE").help(
                    "flat key=value config file shared by all variants",
                ))
                .arg(Arg::new("matrix").long("matrix").value_name("FILE").help(
                    "variant names, one per line; defaults to the canonical 8",
                ))
                .arg(Arg::new("eval_limit").long("eval-limit").value_name("N").help(
                    "held-out pairs to score per variant [default: 32]",
                ))
                .arg(Arg::new("samples").long("samples").value_name("N").help(
                    "sample colorizations to save per variant [default: 4]",
                )),
        ))
}

pub fn device_from_env() -> Result<Device> {
    match std::env::var(ENV_DEVICE) {
        Err(_) => Ok(Device::Cpu),
        Ok(v) if v.eq_ignore_ascii_case("cpu") => Ok(Device::Cpu),
        Ok(v) => Err(Error::Config(format!("{ENV_DEVICE}={v:?}: only \"cpu\" is available"))),
    }
}

/// Collect the per-key flag values present on the command line.
fn flag_overrides(matches: &ArgMatches) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (key, _) in CONFIG_FLAGS {
        if let Some(v) = matches.get_one::<String>(key) {
            out.push((key.to_string(), v.clone()));
        }
    }
    out
}

fn build_config(matches: &ArgMatches) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(path) = matches.get_one::<String>("config") {
        let text = std::fs::read_to_string(path)?;
        config.apply_file(&text)?;
    }
    config.apply_overrides(&flag_overrides(matches))?;
    config.validate()?;
    Ok(config)
}

fn load_data(arg: &str) -> Result<DatasetManifest> {
    let path = Path::new(arg);
    if path.is_file() {
        return DatasetManifest::load(path);
    }
    let built = build_manifest(path, &PairingRule::default())?;
    if !built.orphans.is_empty() {
        eprintln!("warning: {} unpaired images skipped", built.orphans.len());
    }
    Ok(built.manifest)
}

fn cmd_train(matches: &ArgMatches, device: &Device) -> Result<()> {
    let mut manifest = load_data(matches.get_one::<String>("data").unwrap())?;
    let mut trainer = match matches.get_one::<String>("resume") {
        Some(ckpt) => {
            // on resume the checkpoint's config is the baseline; the file
            // and flags both act as overrides
            let mut overrides = Vec::new();
            if let Some(path) = matches.get_one::<String>("config") {
                let mut file_cfg = TrainConfig::default();
                file_cfg.apply_file(&std::fs::read_to_string(path)?)?;
                let defaults = TrainConfig::default().to_kv();
                for (k, v) in file_cfg.to_kv() {
                    if defaults.get(&k) != Some(&v) {
                        overrides.push((k, v));
                    }
                }
            }
            overrides.extend(flag_overrides(matches));
            Trainer::resume(Path::new(ckpt), &overrides, device)?
        }
        None => Trainer::new(build_config(matches)?, device)?,
    };
    manifest.target_size = trainer.config.target_size;
    manifest.validate()?;
    println!("training {} pairs, config:", manifest.split_entries(crate::types::Split::Train).len());
    for (k, v) in trainer.config.to_kv() {
        println!("  {k} = {v}");
    }
    let outcome = trainer.train(&manifest)?;
    println!(
        "done after {} iterations; final content loss {:.4}; checkpoint {}",
        outcome.iterations,
        outcome.last.content,
        outcome.final_checkpoint.display()
    );
    Ok(())
}

fn list_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg" | "bmp"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyDataset(path.to_path_buf()));
    }
    Ok(files)
}

fn cmd_colorize(matches: &ArgMatches, device: &Device) -> Result<i32> {
    let ckpt = Path::new(matches.get_one::<String>("checkpoint").unwrap());
    let output_dir = PathBuf::from(matches.get_one::<String>("output_dir").unwrap());
    let (gen, _config) = load_generator(ckpt, device)?;
    let inputs = list_inputs(Path::new(matches.get_one::<String>("input").unwrap()))?;
    let mut failures = 0;
    for input in &inputs {
        let result = crate::dataset::load_thermal_native(input)
            .and_then(|thermal| colorize_image(&gen, &thermal, device))
            .and_then(|rgb| {
                let name = input.file_stem().unwrap_or_default();
                let out = output_dir.join(name).with_extension("png");
                save_rgb_png(&rgb, &out)?;
                println!("{} -> {}", input.display(), out.display());
                Ok(())
            });
        if let Err(e) = result {
            // keep going; one bad file should not sink the batch
            eprintln!("error: {}: {e}", input.display());
            failures += 1;
        }
    }
    println!("colorized {} of {} images", inputs.len() - failures, inputs.len());
    Ok(if failures > 0 { EXIT_IO } else { 0 })
}

fn cmd_evaluate(matches: &ArgMatches) -> Result<i32> {
    let pred = Path::new(matches.get_one::<String>("pred").unwrap());
    let reference = Path::new(matches.get_one::<String>("ref").unwrap());
    let outcome = evaluate_directory(pred, reference)?;
    print!("{}", outcome.report.text_table("predicted"));
    for (path, err) in &outcome.errors {
        eprintln!("error: {}: {err}", path.display());
    }
    if let Some(report) = matches.get_one::<String>("report") {
        outcome.report.save_json(Path::new(report))?;
    }
    Ok(if outcome.errors.is_empty() { 0 } else { EXIT_IO })
}

fn read_matrix(path: Option<&String>) -> Result<Vec<String>> {
    match path {
        None => Ok(CANONICAL_VARIANTS.iter().map(|s| s.to_string()).collect()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let names: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect();
            if names.is_empty() {
                return Err(Error::Config(format!("matrix file {p} lists no variants")));
            }
            Ok(names)
        }
    }
}

fn parse_count(matches: &ArgMatches, key: &str, default: usize) -> Result<usize> {
    match matches.get_one::<String>(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| Error::Config(format!("{key}: bad integer {v:?}"))),
    }
}

fn cmd_ablate(matches: &ArgMatches, device: &Device) -> Result<()> {
    let base = build_config(matches)?;
    let names = read_matrix(matches.get_one::<String>("matrix"))?;
    let eval_limit = parse_count(matches, "eval_limit", 32)?;
    let samples = parse_count(matches, "samples", 4)?;
    let mut manifest = load_data(matches.get_one::<String>("data").unwrap())?;
    manifest.target_size = base.target_size;
    manifest.validate()?;
    let results = run_ablation(&base, &names, &manifest, device, eval_limit)?;

    println!("{:<16}{:>8}{:>8}{:>8}{:>8}", "Variant", "PSNR", "NQM", "SSIM", "MSSIM");
    for r in &results {
        let a = &r.report.aggregate;
        println!("{:<16}{:>8.2}{:>8.2}{:>8.2}{:>8.2}", r.name, a.psnr, a.nqm, a.ssim, a.mssim);
    }

    // a small image grid per variant for side-by-side inspection
    if samples > 0 {
        let entries = crate::trainer::evaluation_entries(&manifest, samples);
        for r in &results {
            let (gen, _) = load_generator(&r.checkpoint, device)?;
            let dir = r.config.output_dir.join("samples");
            for entry in &entries {
                let thermal = crate::dataset::load_thermal(&entry.thermal_path, manifest.target_size)?;
                let rgb = colorize_image(&gen, &thermal, device)?;
                let name = entry.id.replace('/', "_");
                save_rgb_png(&rgb, &dir.join(format!("{name}.png")))?;
            }
        }
    }
    Ok(())
}

/// Run the CLI against explicit arguments; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            // clap handles --help/--version by "erroring" with exit 0
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let device = match device_from_env() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let outcome = match matches.subcommand() {
        Some(("train", m)) => cmd_train(m, &device).map(|_| 0),
        Some(("colorize", m)) => cmd_colorize(m, &device),
        Some(("evaluate", m)) => cmd_evaluate(m),
        Some(("ablate", m)) => cmd_ablate(m, &device).map(|_| 0),
        _ => unreachable!("subcommand required"),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_lists_every_config_flag() {
        // the flag registry and the clap definition must not drift apart
        let cmd = command();
        for sub in ["train", "ablate"] {
            let sub_cmd = cmd.find_subcommand(sub).unwrap();
            let known: Vec<String> =
                sub_cmd.get_arguments().map(|a| a.get_id().to_string()).collect();
            for (key, _) in CONFIG_FLAGS {
                assert!(known.contains(&key.to_string()), "{sub} is missing --{key}");
            }
            // and each flag carries help text for --help output
            for arg in sub_cmd.get_arguments() {
                assert!(arg.get_help().is_some(), "{sub} flag {} lacks help", arg.get_id());
            }
        }
    }

    #[test]
    fn unknown_flags_are_rejected() {
        let res = command().try_get_matches_from(["ticolor", "train", "--data", "x", "--bogus", "1"]);
        assert!(res.is_err());
    }

    #[test]
    fn config_flags_parse_into_overrides() {
        let matches = command()
            .try_get_matches_from(["ticolor", "train", "--data", "x", "--lambda-adv", "0", "--epochs", "2"])
            .unwrap();
        let m = matches.subcommand_matches("train").unwrap();
        let config = build_config(m).unwrap();
        assert_eq!(config.weights.lambda_adv, 0.0);
        assert_eq!(config.epochs, 2);
    }

    #[test]
    fn exit_codes_are_distinct_per_class() {
        use std::path::PathBuf;
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::EmptyDataset(PathBuf::new())), EXIT_DATA);
        assert_eq!(
            exit_code(&Error::CheckpointCorrupt { path: PathBuf::new(), reason: String::new() }),
            EXIT_CHECKPOINT
        );
        assert_eq!(
            exit_code(&Error::NonFiniteLoss { epoch: 1, iteration: 1, detail: String::new() }),
            EXIT_NUMERIC
        );
        assert_eq!(
            exit_code(&Error::DecodeError { path: PathBuf::new(), reason: String::new() }),
            EXIT_IO
        );
    }

    #[test]
    fn device_env_accepts_cpu_only() {
        assert!(device_from_env().is_ok());
    }
}
