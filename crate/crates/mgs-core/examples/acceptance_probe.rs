//! Trains reference-scene variants and prints frontier numbers.
//!
//! Usage: acceptance_probe [iterations] [variant ...]
//! Variants: mgs, full_only, opacity_asc, area_desc, color_energy_desc,
//! fixed_append (default: all).

use mgs_core::eval::{auc, envelope_fps, envelope_splats, sweep, DEFAULT_SWEEP_RATIOS};
use mgs_core::ordering::{Direction, OrderingCriterion, ScoreKind};
use mgs_core::render::RenderSettings;
use mgs_core::scene::{reference_background, reference_image};
use mgs_core::splat::InitConfig;
use mgs_core::train::{fit, BudgetMode, TrainConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let iterations: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5000);
    let requested: Vec<String> = args.collect();

    let target = reference_image(128, 128, 12345);
    let init = InitConfig {
        n: 2000,
        width: 128,
        height: 128,
        background: reference_background(),
        ..InitConfig::default()
    };
    let base = TrainConfig {
        seed: 7,
        iterations,
        ..TrainConfig::default()
    };
    let settings = RenderSettings::default();

    let variants: Vec<(&str, TrainConfig)> = vec![
        ("mgs", base.clone()),
        (
            "full_only",
            TrainConfig {
                budget_mode: BudgetMode::FullOnly,
                ..base.clone()
            },
        ),
        (
            "opacity_asc",
            TrainConfig {
                ordering: OrderingCriterion::new(ScoreKind::Opacity, Direction::Ascending),
                ..base.clone()
            },
        ),
        (
            "area_desc",
            TrainConfig {
                ordering: OrderingCriterion::new(ScoreKind::Area, Direction::Descending),
                ..base.clone()
            },
        ),
        (
            "color_energy_desc",
            TrainConfig {
                ordering: OrderingCriterion::new(ScoreKind::ColorEnergy, Direction::Descending),
                ..base.clone()
            },
        ),
        (
            "fixed_append",
            TrainConfig {
                ordering: OrderingCriterion::new(ScoreKind::FixedAppend, Direction::Descending),
                ..base.clone()
            },
        ),
    ];

    for (name, cfg) in variants {
        if !requested.is_empty() && !requested.iter().any(|r| r == name) {
            continue;
        }
        let t0 = std::time::Instant::now();
        let (model, _log) = fit(&target, &init, &cfg).unwrap();
        let train_s = t0.elapsed().as_secs_f64();
        let points = sweep(&model, &target, &DEFAULT_SWEEP_RATIOS, &settings, 3).unwrap();
        let auc_s = auc(&envelope_splats(&points, 2000.0).unwrap());
        let auc_f = auc(&envelope_fps(&points, 500.0).unwrap());
        let at = |r: f64| points.iter().find(|p| p.ratio == r).unwrap();
        println!(
            "{name}: train {train_s:.0}s | psnr@1.0 {:.2} ssim {:.4} | psnr@0.2 {:.2} | psnr@0.1 {:.2} | psnr@0.05 {:.2} | auc_splats {auc_s:.2} auc_fps {auc_f:.2}",
            at(1.0).psnr,
            at(1.0).ssim,
            at(0.2).psnr,
            at(0.1).psnr,
            at(0.05).psnr,
        );
    }
}
