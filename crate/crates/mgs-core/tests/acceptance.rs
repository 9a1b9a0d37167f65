//! Acceptance suite: one test per release criterion, each printed as its own
//! pass/fail line by the harness.
//!
//! Criteria 6-8 share a fixture of six models trained on the 128x128
//! reference scene (N = 2000, 5000 iterations, shared seed): the default
//! stochastic-budget configuration, a full-set-only baseline, and four
//! alternative importance orderings. Training runs once on first use.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mgs_core::eval::{
    auc, envelope_fps, envelope_splats, normalized_psnr, quality_score, sweep, OperatingPoint,
    DEFAULT_SWEEP_RATIOS,
};
use mgs_core::grad::{backward, fd_gradient, ParamSelector};
use mgs_core::image::Image;
use mgs_core::loss::{recon_loss, LossConfig};
use mgs_core::ordering::{importance, reorder, Direction, OrderingCriterion, ScoreKind};
use mgs_core::render::{render, render_splats, RenderSettings};
use mgs_core::scene::{reference_background, reference_image};
use mgs_core::splat::{init_model, InitConfig, Splat, SplatModel};
use mgs_core::train::{fit, sample_budget, BudgetMode, TrainConfig, Trainer};

// ---------------------------------------------------------------------------
// Criterion 1: gradient correctness against central finite differences.
// ---------------------------------------------------------------------------

/// Cutoffs pushed far away so gradient-check scenes sit on smooth ground.
fn boundary_free_settings() -> RenderSettings {
    RenderSettings {
        tile_size: 16,
        alpha_min: 1e-12,
        alpha_max: 1.0 - 1e-9,
        radius_sigmas: 30.0,
        transmittance_min: 1e-12,
    }
}

fn gradcheck_scene(seed: u64) -> (SplatModel, Image) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 + (rng.random::<f64>() * 7.0) as usize; // 2..=8
    let cfg = InitConfig {
        n,
        width: 32,
        height: 32,
        ..InitConfig::default()
    };
    let mut model = init_model(&cfg, None, &mut rng).unwrap();
    for s in model.splats.iter_mut() {
        s.mu = [
            4.0 + rng.random::<f64>() * 24.0,
            4.0 + rng.random::<f64>() * 24.0,
        ];
        s.log_scale = [
            (1.0 + rng.random::<f64>() * 3.0).ln(),
            (1.0 + rng.random::<f64>() * 3.0).ln(),
        ];
        s.theta = rng.random::<f64>() * std::f64::consts::PI;
        // Opacities bounded away from the alpha clamp.
        s.opacity_raw = rng.random::<f64>() * 4.0 - 2.0;
        s.color_raw = [
            rng.random::<f64>() * 3.0 - 1.5,
            rng.random::<f64>() * 3.0 - 1.5,
            rng.random::<f64>() * 3.0 - 1.5,
        ];
    }
    model.background = [0.15, 0.25, 0.35];
    let target = reference_image(32, 32, seed ^ 0x5eed);
    (model, target)
}

fn gradcheck(seed: u64, lambda: f64) -> usize {
    let settings = boundary_free_settings();
    let loss_cfg = LossConfig {
        lambda,
        ..LossConfig::default()
    };
    let h = 1e-4;
    let tol = 1e-4;
    let (model, target) = gradcheck_scene(seed);
    let k = model.len();
    let rendered = render(&model, k, &settings).unwrap();
    let (_, pixel_grad) = recon_loss(&rendered, &target, &loss_cfg).unwrap();
    let analytic = backward(&model, k, &settings, &pixel_grad).unwrap();
    let loss_fn = move |img: &Image| recon_loss(img, &target, &loss_cfg).unwrap().0;
    let mut checked = 0usize;
    for selector in ParamSelector::all(k) {
        let fd = fd_gradient(&model, k, &settings, &loss_fn, selector, h).unwrap();
        let an = selector.pick(&analytic);
        let err = (an - fd).abs() / fd.abs().max(an.abs()).max(1.0);
        assert!(
            err < tol,
            "scene {seed} lambda {lambda} {selector:?}: analytic {an} vs fd {fd} (err {err})"
        );
        checked += 1;
    }
    checked
}

#[test]
fn criterion_1_gradient_correctness() {
    let start = Instant::now();
    let mut checked = 0usize;
    for seed in 0..20u64 {
        checked += gradcheck(seed, 0.2);
    }
    // The pure loss components hold on their own as well.
    for (seed, lambda) in [(20u64, 0.0), (21, 0.0), (22, 1.0), (23, 1.0)] {
        checked += gradcheck(seed, lambda);
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(checked > 500, "only {checked} partials checked");
    assert!(elapsed < 60.0, "gradient check took {elapsed:.1}s");
}

// ---------------------------------------------------------------------------
// Criterion 2: compositing matches a scalar re-derivation of the per-pixel
// blend, written against the covariance matrix directly.
// ---------------------------------------------------------------------------

fn blend_reference(
    splats: &[Splat],
    width: u32,
    height: u32,
    background: [f32; 3],
    s: &RenderSettings,
) -> Image {
    let mut order: Vec<usize> = (0..splats.len()).collect();
    order.sort_by(|&a, &b| {
        (splats[a].depth, splats[a].id)
            .partial_cmp(&(splats[b].depth, splats[b].id))
            .unwrap()
    });
    let mut img = Image::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let px = x as f64 + 0.5;
            let py = y as f64 + 0.5;
            let mut t = 1.0f64;
            let mut acc = [0.0f64; 3];
            for &i in &order {
                if t < s.transmittance_min {
                    break;
                }
                let sp = &splats[i];
                let cov = sp.covariance().unwrap();
                let (a, b, c) = (cov[0][0], cov[0][1], cov[1][1]);
                let dx = px - sp.mu[0];
                let dy = py - sp.mu[1];
                let lambda_max = 0.5 * ((a + c) + ((a - c).powi(2) + 4.0 * b * b).sqrt());
                let radius = s.radius_sigmas * lambda_max.sqrt();
                if dx * dx + dy * dy > radius * radius {
                    continue;
                }
                // Quadratic form through the explicit 2x2 inverse.
                let det = a * c - b * b;
                let q = (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
                let alpha = (sp.opacity() * (-0.5 * q).exp()).min(s.alpha_max);
                if alpha < s.alpha_min {
                    continue;
                }
                let col = sp.color();
                for ch in 0..3 {
                    acc[ch] += t * alpha * col[ch];
                }
                t *= 1.0 - alpha;
            }
            img.set_pixel(
                x,
                y,
                [
                    acc[0] + t * background[0] as f64,
                    acc[1] + t * background[1] as f64,
                    acc[2] + t * background[2] as f64,
                ],
            );
        }
    }
    img
}

#[test]
fn criterion_2_compositing_correctness() {
    let settings = RenderSettings::default();

    // The coincident-splat example: alphas 0.5/0.5, red in front of green.
    let saturated = |on: bool| if on { 40.0 } else { -40.0 };
    let mk = |id: u64, color: [bool; 3], depth: f64| Splat {
        id,
        mu: [8.5, 8.5],
        log_scale: [1.2f64.ln(), 1.2f64.ln()],
        theta: 0.0,
        opacity_raw: 0.0,
        color_raw: [
            saturated(color[0]),
            saturated(color[1]),
            saturated(color[2]),
        ],
        depth,
    };
    let pair = vec![
        mk(0, [true, false, false], 0.1),
        mk(1, [false, true, false], 0.2),
    ];
    let model = SplatModel {
        splats: pair,
        width: 17,
        height: 17,
        background: [0.0; 3],
        criterion: OrderingCriterion::default(),
    };
    let out = render(&model, 2, &settings).unwrap();
    let center = out.pixel(8, 8);
    assert!((center[0] - 0.5).abs() < 1e-10, "red {}", center[0]);
    assert!((center[1] - 0.25).abs() < 1e-10, "green {}", center[1]);
    assert!(center[2].abs() < 1e-10, "blue {}", center[2]);
    let reference = blend_reference(&model.splats, 17, 17, model.background, &settings);
    assert!(out.max_abs_diff(&reference) < 1e-10);

    // Randomized scenes with up to 4 splats, checked at several prefixes.
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(97).wrapping_add(5));
        let n = 1 + (rng.random::<f64>() * 4.0) as usize;
        let cfg = InitConfig {
            n,
            width: 24,
            height: 24,
            ..InitConfig::default()
        };
        let mut model = init_model(&cfg, None, &mut rng).unwrap();
        for s in model.splats.iter_mut() {
            s.log_scale = [
                (0.8 + rng.random::<f64>() * 4.0).ln(),
                (0.8 + rng.random::<f64>() * 4.0).ln(),
            ];
            s.theta = rng.random::<f64>() * 6.0;
            s.opacity_raw = rng.random::<f64>() * 8.0 - 3.0;
            s.color_raw = [
                rng.random::<f64>() * 6.0 - 3.0,
                rng.random::<f64>() * 6.0 - 3.0,
                rng.random::<f64>() * 6.0 - 3.0,
            ];
        }
        model.background = [0.2, 0.1, 0.4];
        for k in [0, n / 2, n] {
            let fast = render(&model, k, &settings).unwrap();
            let slow = blend_reference(
                model.prefix(k).unwrap(),
                model.width,
                model.height,
                model.background,
                &settings,
            );
            let diff = fast.max_abs_diff(&slow);
            assert!(diff < 1e-10, "scene {seed} k={k}: max diff {diff}");
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 3: frontier scores agree with numeric quadrature of an
// independently evaluated envelope.
// ---------------------------------------------------------------------------

/// Direct evaluation of the throughput envelope from raw points.
fn direct_fps_value(points: &[(f64, f64)], clip: f64, x: f64) -> f64 {
    if x <= 0.0 || x > clip {
        return 0.0;
    }
    points
        .iter()
        .filter(|(fps, _)| fps.min(clip) >= x)
        .map(|&(_, q)| q)
        .fold(0.0, f64::max)
}

/// Direct evaluation of the budget envelope from raw points.
fn direct_splats_value(points: &[(f64, f64)], clip: f64, x: f64) -> f64 {
    if x <= 0.0 || x > clip {
        return 0.0;
    }
    let k0 = points
        .iter()
        .map(|&(k, _)| k.min(clip))
        .fold(f64::INFINITY, f64::min);
    if x < k0 {
        let q0 = points
            .iter()
            .filter(|(k, _)| k.min(clip) == k0)
            .map(|&(_, q)| q)
            .fold(0.0, f64::max);
        return q0 * x / k0;
    }
    points
        .iter()
        .filter(|(k, _)| k.min(clip) <= x)
        .map(|&(_, q)| q)
        .fold(0.0, f64::max)
}

/// Midpoint quadrature with samples split across the intervals between
/// consecutive envelope breakpoints; the evaluated function is linear inside
/// each interval, where the midpoint rule is exact.
fn quadrature(
    value_at: impl Fn(f64) -> f64,
    mut breakpoints: Vec<f64>,
    clip: f64,
    total_samples: usize,
) -> f64 {
    breakpoints.push(0.0);
    breakpoints.push(clip);
    breakpoints.retain(|&x| (0.0..=clip).contains(&x));
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breakpoints.dedup();
    let mut area = 0.0;
    let total_len: f64 = clip;
    for w in breakpoints.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        if x1 <= x0 {
            continue;
        }
        let samples = (((x1 - x0) / total_len * total_samples as f64) as usize).max(64);
        let dx = (x1 - x0) / samples as f64;
        for i in 0..samples {
            area += value_at(x0 + (i as f64 + 0.5) * dx) * dx;
        }
    }
    100.0 * area / clip
}

fn op(k: usize, quality: f64, fps: f64) -> OperatingPoint {
    OperatingPoint {
        ratio: f64::NAN,
        k,
        psnr: f64::NAN,
        ssim: f64::NAN,
        lpips: None,
        quality,
        median_ms: 1e3 / fps,
        fps,
    }
}

#[test]
fn criterion_3_auc_oracle_equivalence() {
    // Closed-form examples.
    let fps_env = envelope_fps(&[op(123, 0.8, 250.0)], 500.0).unwrap();
    assert!((auc(&fps_env) - 40.0).abs() < 1e-9);
    let splat_env = envelope_splats(&[op(100, 0.5, 10.0)], 1000.0).unwrap();
    assert!((auc(&splat_env) - 47.5).abs() < 1e-9);

    let mut rng = ChaCha8Rng::seed_from_u64(31415);
    for case in 0..100 {
        let n = 1 + (rng.random::<f64>() * 14.0) as usize;
        let points: Vec<OperatingPoint> = (0..n)
            .map(|_| {
                op(
                    1 + (rng.random::<f64>() * 4000.0) as usize,
                    rng.random::<f64>(),
                    1.0 + rng.random::<f64>() * 700.0,
                )
            })
            .collect();
        let clip_fps = 500.0;
        let clip_splats = 3000.0;

        let fps_points: Vec<(f64, f64)> = points.iter().map(|p| (p.fps, p.quality)).collect();
        let fps_breaks: Vec<f64> = fps_points.iter().map(|&(f, _)| f.min(clip_fps)).collect();
        let auc_fps_closed = auc(&envelope_fps(&points, clip_fps).unwrap());
        let auc_fps_numeric = quadrature(
            |x| direct_fps_value(&fps_points, clip_fps, x),
            fps_breaks,
            clip_fps,
            1_000_000,
        );
        assert!(
            (auc_fps_closed - auc_fps_numeric).abs() < 1e-6,
            "case {case}: fps {auc_fps_closed} vs {auc_fps_numeric}"
        );

        let splat_points: Vec<(f64, f64)> =
            points.iter().map(|p| (p.k as f64, p.quality)).collect();
        let splat_breaks: Vec<f64> = splat_points
            .iter()
            .map(|&(k, _)| k.min(clip_splats))
            .collect();
        let auc_splats_closed = auc(&envelope_splats(&points, clip_splats).unwrap());
        let auc_splats_numeric = quadrature(
            |x| direct_splats_value(&splat_points, clip_splats, x),
            splat_breaks,
            clip_splats,
            1_000_000,
        );
        assert!(
            (auc_splats_closed - auc_splats_numeric).abs() < 1e-6,
            "case {case}: splats {auc_splats_closed} vs {auc_splats_numeric}"
        );
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: composite quality exactness.
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_quality_score_exactness() {
    assert_eq!(quality_score(32.0, 0.92, Some(0.06)), 1.0);
    assert_eq!(quality_score(14.0, 0.35, Some(0.60)), 0.0);
    assert!((normalized_psnr(28.20) - 0.7889).abs() < 1e-4);
    // The two-term fallback saturates at the same corners.
    assert_eq!(quality_score(32.0, 0.92, None), 1.0);
    assert_eq!(quality_score(14.0, 0.35, None), 0.0);
}

// ---------------------------------------------------------------------------
// Criterion 5: budget sampling law.
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_budget_sampling_law() {
    let n = 1_000_000usize;
    let draws = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(271828);
    let mut ratios: Vec<f64> = (0..draws)
        .map(|_| sample_budget(&mut rng, 0.05, n).unwrap() as f64 / n as f64)
        .collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cdf = |r: f64| ((r - 0.05) / 0.95).clamp(0.0, 1.0);
    let mut ks = 0.0f64;
    for (i, &r) in ratios.iter().enumerate() {
        let f = cdf(r);
        ks = ks.max((f - i as f64 / draws as f64).abs());
        ks = ks.max((f - (i + 1) as f64 / draws as f64).abs());
    }
    assert!(ks < 0.02, "KS distance {ks}");

    // r_min = 1 degenerates to full-set training.
    for _ in 0..1000 {
        assert_eq!(sample_budget(&mut rng, 1.0, 4321).unwrap(), 4321);
    }
}

// ---------------------------------------------------------------------------
// Criteria 6-8: trained-model comparisons on the reference scene.
// ---------------------------------------------------------------------------

const REF_SEED: u64 = 12345;
const TRAIN_SEED: u64 = 7;
const REF_N: usize = 2000;
const REF_ITERS: u64 = 5000;
/// Budget axis clipped to the model capacity at desk scale.
const CLIP_SPLATS: f64 = REF_N as f64;

struct TrainedVariant {
    points: Vec<OperatingPoint>,
    train_seconds: f64,
}

struct Fixture {
    mgs: TrainedVariant,
    full_only: TrainedVariant,
    opacity_asc: TrainedVariant,
    area_desc: TrainedVariant,
    color_energy_desc: TrainedVariant,
    fixed_append: TrainedVariant,
}

fn train_variant(target: &Image, cfg: &TrainConfig) -> TrainedVariant {
    let init = InitConfig {
        n: REF_N,
        width: target.width(),
        height: target.height(),
        background: reference_background(),
        ..InitConfig::default()
    };
    let start = Instant::now();
    let (model, _log) = fit(target, &init, cfg).unwrap();
    let train_seconds = start.elapsed().as_secs_f64();
    let points = sweep(
        &model,
        target,
        &DEFAULT_SWEEP_RATIOS,
        &RenderSettings::default(),
        3,
    )
    .unwrap();
    let _ = model;
    TrainedVariant {
        points,
        train_seconds,
    }
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let target = reference_image(128, 128, REF_SEED);
        let base = TrainConfig {
            iterations: REF_ITERS,
            seed: TRAIN_SEED,
            ..TrainConfig::default()
        };
        let with_ordering = |kind: ScoreKind, direction: Direction| TrainConfig {
            ordering: OrderingCriterion::new(kind, direction),
            ..base.clone()
        };
        Fixture {
            mgs: train_variant(&target, &base),
            full_only: train_variant(
                &target,
                &TrainConfig {
                    budget_mode: BudgetMode::FullOnly,
                    ..base.clone()
                },
            ),
            opacity_asc: train_variant(
                &target,
                &with_ordering(ScoreKind::Opacity, Direction::Ascending),
            ),
            area_desc: train_variant(
                &target,
                &with_ordering(ScoreKind::Area, Direction::Descending),
            ),
            color_energy_desc: train_variant(
                &target,
                &with_ordering(ScoreKind::ColorEnergy, Direction::Descending),
            ),
            fixed_append: train_variant(
                &target,
                &with_ordering(ScoreKind::FixedAppend, Direction::Descending),
            ),
        }
    })
}

fn psnr_at(points: &[OperatingPoint], ratio: f64) -> f64 {
    points
        .iter()
        .find(|p| p.ratio == ratio)
        .unwrap_or_else(|| panic!("no point at ratio {ratio}"))
        .psnr
}

fn auc_splats_of(points: &[OperatingPoint]) -> f64 {
    auc(&envelope_splats(points, CLIP_SPLATS).unwrap())
}

#[test]
fn criterion_6_full_capacity_parity() {
    let fx = fixture();
    let budget = fx.mgs.train_seconds + fx.full_only.train_seconds;
    assert!(
        budget < 20.0 * 60.0,
        "two reference trainings took {budget:.0}s"
    );
    let mgs_full = psnr_at(&fx.mgs.points, 1.0);
    let baseline_full = psnr_at(&fx.full_only.points, 1.0);
    let gap = (mgs_full - baseline_full).abs();
    assert!(
        gap <= 1.0,
        "full-budget psnr gap {gap:.3} dB (budget-trained {mgs_full:.2}, full-only {baseline_full:.2})"
    );
}

#[test]
fn criterion_7_lod_benefit() {
    let fx = fixture();
    let mgs_auc = auc_splats_of(&fx.mgs.points);
    let full_auc = auc_splats_of(&fx.full_only.points);
    assert!(
        mgs_auc > full_auc,
        "auc_splats: budget-trained {mgs_auc:.2} vs full-only {full_auc:.2}"
    );
    let mgs_low = psnr_at(&fx.mgs.points, 0.1);
    let full_low = psnr_at(&fx.full_only.points, 0.1);
    assert!(
        mgs_low >= full_low + 2.0,
        "psnr at 10% budget: {mgs_low:.2} vs {full_low:.2}"
    );
    // Quality is monotone across the extreme budgets of the trained model.
    let q = |ratio: f64| {
        fx.mgs
            .points
            .iter()
            .find(|p| p.ratio == ratio)
            .unwrap()
            .quality
    };
    assert!(q(1.0) >= q(0.01));
}

#[test]
fn criterion_8_ordering_ablation_direction() {
    let fx = fixture();
    let desc = auc_splats_of(&fx.mgs.points);
    let asc = auc_splats_of(&fx.opacity_asc.points);
    assert!(desc > asc, "opacity desc {desc:.2} <= asc {asc:.2}");
    let rivals = [
        ("area_desc", auc_splats_of(&fx.area_desc.points)),
        (
            "color_energy_desc",
            auc_splats_of(&fx.color_energy_desc.points),
        ),
        ("fixed_append", auc_splats_of(&fx.fixed_append.points)),
    ];
    for (name, rival_auc) in rivals {
        assert!(
            desc > rival_auc,
            "opacity desc {desc:.2} <= {name} {rival_auc:.2}"
        );
    }
}

// ---------------------------------------------------------------------------
// Criterion 9: structural invariant bundle at reference scale.
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_invariant_suite() {
    let settings = RenderSettings::default();

    // A mid-sized randomized model for the render invariants.
    let mut rng = ChaCha8Rng::seed_from_u64(999);
    let cfg = InitConfig {
        n: 200,
        width: 64,
        height: 64,
        ..InitConfig::default()
    };
    let mut model = init_model(&cfg, None, &mut rng).unwrap();
    for s in model.splats.iter_mut() {
        s.opacity_raw = rng.random::<f64>() * 6.0 - 2.0;
        s.theta = rng.random::<f64>() * 3.0;
        s.log_scale = [
            (0.7 + rng.random::<f64>() * 3.0).ln(),
            (0.7 + rng.random::<f64>() * 3.0).ln(),
        ];
        s.color_raw = [
            rng.random::<f64>() * 4.0 - 2.0,
            rng.random::<f64>() * 4.0 - 2.0,
            rng.random::<f64>() * 4.0 - 2.0,
        ];
    }
    model.background = [0.3, 0.2, 0.1];

    // Permutation invariance of rendering.
    let base = render(&model, model.len(), &settings).unwrap();
    let mut shuffled = model.clone();
    shuffled.splats.reverse();
    shuffled.splats.swap(3, 140);
    shuffled.splats.swap(77, 11);
    assert_eq!(
        base.data(),
        render(&shuffled, shuffled.len(), &settings).unwrap().data()
    );
    // Prefix logic is inert at full budget.
    let bare = render_splats(
        &model.splats,
        model.width,
        model.height,
        model.background,
        &settings,
    )
    .unwrap();
    assert_eq!(base.data(), bare.data());

    // Reorder: full render unchanged, idempotent, monotone scores.
    let criterion = OrderingCriterion::default();
    reorder(&mut model, criterion).unwrap();
    assert_eq!(
        base.data(),
        render(&model, model.len(), &settings).unwrap().data()
    );
    let once = model.clone();
    let perm = reorder(&mut model, criterion).unwrap();
    assert!(perm.iter().enumerate().all(|(i, &p)| i == p));
    assert_eq!(once, model);
    let scores = importance(&model, criterion);
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    // Prefix nesting.
    for (lo, hi) in [(0usize, 10usize), (10, 50), (49, 200), (120, 121)] {
        let small: Vec<u64> = model.prefix(lo).unwrap().iter().map(|s| s.id).collect();
        let big: Vec<u64> = model.prefix(hi).unwrap().iter().map(|s| s.id).collect();
        assert!(small.iter().all(|id| big.contains(id)));
    }

    // Exactly two renders and two backward passes per training step.
    let target = reference_image(64, 64, 4242);
    let train_cfg = TrainConfig {
        seed: 31,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(model.clone(), target.clone(), train_cfg.clone()).unwrap();
    for _ in 0..10 {
        trainer.step().unwrap();
    }
    assert_eq!(trainer.render_calls, 20);
    assert_eq!(trainer.backward_calls, 20);

    // Checkpoint determinism under a fixed seed.
    let init = InitConfig {
        n: 40,
        width: 64,
        height: 64,
        ..InitConfig::default()
    };
    let quick = TrainConfig {
        iterations: 25,
        seed: 11,
        ..TrainConfig::default()
    };
    let (m1, _) = fit(&target, &init, &quick).unwrap();
    let (m2, _) = fit(&target, &init, &quick).unwrap();
    assert_eq!(
        mgs_core::checkpoint::encode(&m1),
        mgs_core::checkpoint::encode(&m2)
    );
}
