//! Subcommand implementations.

use std::fs;
use std::path::Path;

use mgs_core::checkpoint::{read_checkpoint, FORMAT_VERSION};
use mgs_core::eval::{
    auc as auc_score, auc_report, envelope_fps, envelope_splats, points_from_csv, points_to_csv,
    sweep as eval_sweep, OperatingPoint,
};
use mgs_core::image::Image;
use mgs_core::ordering::{importance, OrderingCriterion};
use mgs_core::splat::InitConfig;
use mgs_core::train::{budget_from_ratio, fit as train_fit, BudgetMode, TrainConfig};

use crate::config::RunConfig;
use crate::CliError;

fn load_target(path: &Path) -> Result<Image, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!("target not found: {path:?}")));
    }
    Ok(Image::load_png(path)?)
}

fn load_model(path: &Path) -> Result<mgs_core::SplatModel, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!("checkpoint not found: {path:?}")));
    }
    Ok(read_checkpoint(path)?)
}

fn resolved_init(cfg: &RunConfig, target: &Image) -> InitConfig {
    InitConfig {
        n: cfg.init.n,
        width: target.width(),
        height: target.height(),
        initial_scale: cfg.init.initial_scale,
        background: cfg.init.background,
    }
}

pub fn fit(target: &Path, config: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let image = load_target(target)?;
    fs::create_dir_all(out).map_err(|e| CliError::Input(format!("cannot create {out:?}: {e}")))?;

    let init_cfg = resolved_init(&cfg, &image);
    let mut train_cfg = cfg.train.clone();
    train_cfg.checkpoint_dir = Some(out.to_path_buf());
    // Keep relocation resets consistent with initialization.
    train_cfg.relocation.reset_scale = cfg.init.initial_scale;

    // Echo the fully resolved configuration before the (long) run starts.
    let echo = RunConfig {
        output_dir: Some(out.to_path_buf()),
        init: cfg.init.clone(),
        train: train_cfg.clone(),
        eval: cfg.eval.clone(),
        ablate: cfg.ablate.clone(),
    };
    fs::write(out.join("config.resolved.toml"), echo.to_toml()?)
        .map_err(|e| CliError::Runtime(format!("cannot write config echo: {e}")))?;

    let (model, log) = train_fit(&image, &init_cfg, &train_cfg)?;
    log.write_csv(&out.join("train_log.csv"))?;

    println!(
        "fit: {} splats, {} iterations, final checkpoint {:?}",
        model.len(),
        train_cfg.iterations,
        out.join("final.mgs")
    );
    if let Some(last) = log.records.last() {
        println!(
            "fit: last step prefix_loss {:.6} full_loss {:.6}",
            last.prefix_loss, last.full_loss
        );
    }
    Ok(())
}

pub fn render(
    checkpoint: &Path,
    ratio: Option<f64>,
    k: Option<usize>,
    out: &Path,
    config: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let model = load_model(checkpoint)?;
    let k = match (ratio, k) {
        (Some(r), None) => {
            if !(r > 0.0 && r <= 1.0) {
                return Err(CliError::Usage(format!("--ratio {r} outside (0, 1]")));
            }
            budget_from_ratio(r, model.len())
        }
        (None, Some(k)) => {
            if k > model.len() {
                return Err(CliError::Input(format!(
                    "--k {k} exceeds splat count {}",
                    model.len()
                )));
            }
            k
        }
        _ => {
            return Err(CliError::Usage(
                "exactly one of --ratio or --k is required".into(),
            ))
        }
    };
    let image = mgs_core::render::render(&model, k, &cfg.train.render)?;
    image.save_png(out)?;
    println!("render: prefix {k} of {} -> {out:?}", model.len());
    Ok(())
}

fn parse_ratio_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad ratio {part:?} in --ratios")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    checkpoint: &Path,
    target: &Path,
    ratios: Option<&str>,
    out: &Path,
    report: Option<&Path>,
    repeats: Option<usize>,
    config: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let model = load_model(checkpoint)?;
    let image = load_target(target)?;
    let ratios = match ratios {
        Some(s) => parse_ratio_list(s)?,
        None => cfg.eval.ratios.clone(),
    };
    let repeats = repeats.unwrap_or(cfg.eval.repeats);
    let points = eval_sweep(&model, &image, &ratios, &cfg.train.render, repeats)?;
    fs::write(out, points_to_csv(&points))
        .map_err(|e| CliError::Runtime(format!("cannot write {out:?}: {e}")))?;

    let report_text = auc_report(&points, cfg.eval.clip_fps, cfg.eval.clip_splats)?;
    let report_path = report
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_extension("report.toml"));
    fs::write(&report_path, &report_text)
        .map_err(|e| CliError::Runtime(format!("cannot write {report_path:?}: {e}")))?;
    print!("{report_text}");
    Ok(())
}

struct Variant {
    name: String,
    cfg: TrainConfig,
}

fn build_variants(base: &TrainConfig, section: &crate::config::AblateSection) -> Result<Vec<Variant>, CliError> {
    let mut variants = Vec::new();
    for s in &section.orderings {
        let criterion = OrderingCriterion::parse(s)?;
        variants.push(Variant {
            name: format!("ordering-{}", criterion.label()),
            cfg: TrainConfig {
                ordering: criterion,
                ..base.clone()
            },
        });
    }
    for s in &section.budget_modes {
        let mode = BudgetMode::parse(s)?;
        variants.push(Variant {
            name: format!("budget-{}", mode.label()),
            cfg: TrainConfig {
                budget_mode: mode,
                ..base.clone()
            },
        });
    }
    for &gamma in &section.gammas {
        let mut cfg = base.clone();
        cfg.loss.gamma = gamma;
        variants.push(Variant {
            name: format!("gamma-{gamma}"),
            cfg,
        });
    }
    Ok(variants)
}

pub fn ablate(target: &Path, config: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let image = load_target(target)?;
    let variants = build_variants(&cfg.train, &cfg.ablate)?;
    if variants.is_empty() {
        return Err(CliError::Usage(
            "ablate variant list is empty; configure [ablate] orderings, budget_modes or gammas"
                .into(),
        ));
    }
    fs::create_dir_all(out).map_err(|e| CliError::Input(format!("cannot create {out:?}: {e}")))?;
    let init_cfg = resolved_init(&cfg, &image);

    let mut merged = String::from("variant,status,psnr,ssim,auc_fps,auc_splats\n");
    let mut failures = 0usize;
    for variant in &variants {
        println!("ablate: running {}", variant.name);
        match run_variant(&image, &init_cfg, variant, &cfg, out) {
            Ok((points, auc_fps_v, auc_splats_v)) => {
                let full = points
                    .iter()
                    .find(|p| p.ratio == 1.0)
                    .or(points.first())
                    .expect("sweep returned points");
                merged.push_str(&format!(
                    "{},ok,{},{},{},{}\n",
                    variant.name, full.psnr, full.ssim, auc_fps_v, auc_splats_v
                ));
            }
            Err(e) => {
                eprintln!("ablate: variant {} failed: {e}", variant.name);
                merged.push_str(&format!("{},failed,,,,\n", variant.name));
                failures += 1;
            }
        }
    }
    fs::write(out.join("ablation.csv"), merged)
        .map_err(|e| CliError::Runtime(format!("cannot write merged csv: {e}")))?;
    if failures > 0 {
        return Err(CliError::Partial(failures));
    }
    println!("ablate: {} variants complete -> {:?}", variants.len(), out.join("ablation.csv"));
    Ok(())
}

fn run_variant(
    image: &Image,
    init_cfg: &InitConfig,
    variant: &Variant,
    cfg: &RunConfig,
    out: &Path,
) -> Result<(Vec<OperatingPoint>, f64, f64), CliError> {
    let dir = out.join(&variant.name);
    fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("cannot create {dir:?}: {e}")))?;
    let mut train_cfg = variant.cfg.clone();
    train_cfg.checkpoint_dir = Some(dir.clone());
    train_cfg.relocation.reset_scale = init_cfg.initial_scale;
    let (model, log) = train_fit(image, init_cfg, &train_cfg)?;
    log.write_csv(&dir.join("train_log.csv"))?;
    let points = eval_sweep(
        &model,
        image,
        &cfg.eval.ratios,
        &train_cfg.render,
        cfg.eval.repeats,
    )?;
    fs::write(dir.join("points.csv"), points_to_csv(&points))
        .map_err(|e| CliError::Runtime(format!("cannot write points: {e}")))?;
    let report = auc_report(&points, cfg.eval.clip_fps, cfg.eval.clip_splats)?;
    fs::write(dir.join("report.toml"), &report)
        .map_err(|e| CliError::Runtime(format!("cannot write report: {e}")))?;
    let fps = auc_score(&envelope_fps(&points, cfg.eval.clip_fps)?);
    let splats = auc_score(&envelope_splats(&points, cfg.eval.clip_splats)?);
    Ok((points, fps, splats))
}

pub fn auc(
    points_path: &Path,
    clip_fps: Option<f64>,
    clip_splats: Option<f64>,
    report: Option<&Path>,
) -> Result<(), CliError> {
    if !points_path.exists() {
        return Err(CliError::Input(format!(
            "points csv not found: {points_path:?}"
        )));
    }
    let text = fs::read_to_string(points_path)
        .map_err(|e| CliError::Input(format!("cannot read {points_path:?}: {e}")))?;
    let points = points_from_csv(&text)?;
    if points.is_empty() {
        eprintln!("warning: no data rows in {points_path:?}; reporting zero scores");
    }
    let clip_fps = clip_fps.unwrap_or(mgs_core::eval::DEFAULT_CLIP_FPS);
    let clip_splats = clip_splats.unwrap_or(mgs_core::eval::DEFAULT_CLIP_SPLATS);
    let report_text = auc_report(&points, clip_fps, clip_splats)?;
    print!("{report_text}");
    if let Some(path) = report {
        fs::write(path, &report_text)
            .map_err(|e| CliError::Runtime(format!("cannot write {path:?}: {e}")))?;
    }
    Ok(())
}

pub fn info(checkpoint: &Path) -> Result<(), CliError> {
    let model = load_model(checkpoint)?;
    println!("format_version = {FORMAT_VERSION}");
    println!("splats = {}", model.len());
    println!("canvas = \"{}x{}\"", model.width, model.height);
    println!(
        "background = [{}, {}, {}]",
        model.background[0], model.background[1], model.background[2]
    );
    println!("criterion = \"{}\"", model.criterion.label());
    let scores = importance(&model, model.criterion);
    if let (Some(first), Some(last)) = (scores.first(), scores.last()) {
        println!("top_score = {first}");
        println!("tail_score = {last}");
    }
    let mean_opacity: f64 =
        model.splats.iter().map(|s| s.opacity()).sum::<f64>() / model.len().max(1) as f64;
    println!("mean_opacity = {mean_opacity:.4}");
    Ok(())
}
