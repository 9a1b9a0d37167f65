//! Tile-based forward rasterization with front-to-back alpha compositing.
//!
//! Per pixel, splats composite in (depth, id) order — never storage order —
//! so rendering is invariant under storage permutations of the same splat
//! set. Tiles are disjoint and merged in fixed index order, which makes the
//! output independent of the rayon worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::splat::{Splat, SplatModel};

/// Rasterizer cutoffs. Defaults follow the usual splatting conventions:
/// 3-sigma bounding radius, alpha floor 1/255, alpha clamp 0.999 and
/// transmittance early-stop at 1e-4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSettings {
    pub tile_size: u32,
    /// Contributions with alpha below this are skipped.
    pub alpha_min: f64,
    /// Alpha values are clamped to at most this.
    pub alpha_max: f64,
    /// Bounding radius in units of the largest covariance singular value.
    pub radius_sigmas: f64,
    /// Per-pixel accumulation stops once transmittance falls below this.
    pub transmittance_min: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            tile_size: 16,
            alpha_min: 1.0 / 255.0,
            alpha_max: 0.999,
            radius_sigmas: 3.0,
            transmittance_min: 1e-4,
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<()> {
        if self.tile_size == 0 {
            return Err(Error::InvalidConfig("tile_size must be >= 1".into()));
        }
        let alpha_window_ok = self.alpha_min > 0.0
            && self.alpha_min < self.alpha_max
            && self.alpha_max < 1.0;
        if !alpha_window_ok {
            return Err(Error::InvalidConfig(
                "required: 0 < alpha_min < alpha_max < 1".into(),
            ));
        }
        if !(self.radius_sigmas.is_finite() && self.radius_sigmas > 0.0) {
            return Err(Error::InvalidConfig("radius_sigmas must be > 0".into()));
        }
        if !(self.transmittance_min.is_finite() && self.transmittance_min > 0.0) {
            return Err(Error::InvalidConfig("transmittance_min must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-splat quantities hoisted out of the pixel loop.
///
/// `cutoff2` is the squared pixel radius actually scanned. It never exceeds
/// the `radius_sigmas` bound and is additionally tightened to the radius
/// beyond which alpha is guaranteed to fall below `alpha_min` (with a small
/// slack in sigma units), so shrinking it never changes the output.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PreparedSplat {
    // mu and cutoff2 lead so the common out-of-radius reject touches only
    // the first cache line.
    pub mu: [f64; 2],
    pub cutoff2: f64,
    pub cos_t: f64,
    pub sin_t: f64,
    /// 1 / s_i^2 for the two principal axes.
    pub inv_s2: [f64; 2],
    /// Quadratic-form bound past which alpha is guaranteed below the floor,
    /// so the exponential can be skipped outright.
    pub q_skip: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    /// Storage index in the model this entry came from.
    pub index: usize,
}

const ALPHA_RADIUS_SLACK: f64 = 0.01;
const Q_SKIP_SLACK: f64 = 1e-9;

/// Derives per-splat render quantities for `splats`, dropping splats that
/// cannot contribute anywhere (opacity below `alpha_min`), and sorts the
/// survivors by (depth, id) — the per-pixel compositing order.
pub(crate) fn prepare_sorted(
    splats: &[Splat],
    settings: &RenderSettings,
) -> Result<Vec<PreparedSplat>> {
    if let Some(s) = splats.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "splat {} has non-finite fields",
            s.id
        )));
    }
    let mut order: Vec<usize> = (0..splats.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        (splats[a].depth, splats[a].id)
            .partial_cmp(&(splats[b].depth, splats[b].id))
            .unwrap()
    });
    let mut prepared = Vec::with_capacity(splats.len());
    for index in order {
        let s = &splats[index];
        let opacity = s.opacity();
        if opacity < settings.alpha_min {
            continue;
        }
        let [s1, s2] = s.scales();
        let (v1, v2) = (s1 * s1, s2 * s2);
        // Largest eigenvalue of the covariance: ((a+c) + sqrt((a-c)^2 + 4b^2))
        // / 2 reduces to max(s1^2, s2^2), rotation leaves eigenvalues alone.
        let lambda_max = v1.max(v2);
        let q_alpha = (2.0 * (opacity / settings.alpha_min).ln()).max(0.0);
        let r_alpha = q_alpha.sqrt() + ALPHA_RADIUS_SLACK;
        let r_units = settings.radius_sigmas.min(r_alpha);
        let cutoff2 = r_units * r_units * lambda_max;
        let (sin_t, cos_t) = s.theta.sin_cos();
        prepared.push(PreparedSplat {
            mu: s.mu,
            cutoff2,
            cos_t,
            sin_t,
            inv_s2: [1.0 / v1, 1.0 / v2],
            q_skip: q_alpha + Q_SKIP_SLACK,
            opacity,
            color: s.color(),
            index,
        });
    }
    Ok(prepared)
}

pub(crate) struct TileGrid {
    pub tile_size: u32,
    pub tiles_x: u32,
    /// Indices into the prepared list, per tile, in prepared (depth, id) order.
    pub lists: Vec<Vec<u32>>,
}

impl TileGrid {
    pub fn tile_rect(&self, tile: usize, width: u32, height: u32) -> (u32, u32, u32, u32) {
        let tx = tile as u32 % self.tiles_x;
        let ty = tile as u32 / self.tiles_x;
        let x0 = tx * self.tile_size;
        let y0 = ty * self.tile_size;
        let x1 = (x0 + self.tile_size).min(width);
        let y1 = (y0 + self.tile_size).min(height);
        (x0, y0, x1, y1)
    }
}

/// Bins prepared splats into the tiles their bounding box overlaps.
pub(crate) fn bin_tiles(
    prepared: &[PreparedSplat],
    width: u32,
    height: u32,
    tile_size: u32,
) -> TileGrid {
    let tiles_x = width.div_ceil(tile_size);
    let tiles_y = height.div_ceil(tile_size);
    let mut lists = vec![Vec::new(); tiles_x as usize * tiles_y as usize];
    for (pi, p) in prepared.iter().enumerate() {
        let r = p.cutoff2.sqrt();
        // Pixel centers sit at integer + 0.5.
        let x0 = (p.mu[0] - r - 0.5).ceil().max(0.0);
        let x1 = (p.mu[0] + r - 0.5).floor().min(width as f64 - 1.0);
        let y0 = (p.mu[1] - r - 0.5).ceil().max(0.0);
        let y1 = (p.mu[1] + r - 0.5).floor().min(height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        let (tx0, tx1) = (x0 as u32 / tile_size, x1 as u32 / tile_size);
        let (ty0, ty1) = (y0 as u32 / tile_size, y1 as u32 / tile_size);
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                lists[(ty * tiles_x + tx) as usize].push(pi as u32);
            }
        }
    }
    TileGrid {
        tile_size,
        tiles_x,
        lists,
    }
}

#[inline]
fn composite_pixel(
    px: f64,
    py: f64,
    candidates: &[PreparedSplat],
    settings: &RenderSettings,
    background: [f64; 3],
) -> [f64; 3] {
    let mut acc = [0.0f64; 3];
    let mut transmittance = 1.0f64;
    for p in candidates {
        if transmittance < settings.transmittance_min {
            break;
        }
        let dx = px - p.mu[0];
        let dy = py - p.mu[1];
        if dx * dx + dy * dy > p.cutoff2 {
            continue;
        }
        let e1 = p.cos_t * dx + p.sin_t * dy;
        let e2 = -p.sin_t * dx + p.cos_t * dy;
        let q = e1 * e1 * p.inv_s2[0] + e2 * e2 * p.inv_s2[1];
        if q > p.q_skip {
            continue;
        }
        let mut alpha = p.opacity * (-0.5 * q).exp();
        if alpha > settings.alpha_max {
            alpha = settings.alpha_max;
        }
        if alpha < settings.alpha_min {
            continue;
        }
        let weight = transmittance * alpha;
        acc[0] += weight * p.color[0];
        acc[1] += weight * p.color[1];
        acc[2] += weight * p.color[2];
        transmittance *= 1.0 - alpha;
    }
    [
        acc[0] + transmittance * background[0],
        acc[1] + transmittance * background[1],
        acc[2] + transmittance * background[2],
    ]
}

/// Rasterizes a bare splat list; `render` delegates here with a prefix slice.
pub fn render_splats(
    splats: &[Splat],
    width: u32,
    height: u32,
    background: [f32; 3],
    settings: &RenderSettings,
) -> Result<Image> {
    settings.validate()?;
    let prepared = prepare_sorted(splats, settings)?;
    let grid = bin_tiles(&prepared, width, height, settings.tile_size);
    let bg = [
        background[0] as f64,
        background[1] as f64,
        background[2] as f64,
    ];
    let tiles: Vec<(usize, Vec<f64>)> = (0..grid.lists.len())
        .into_par_iter()
        .map(|tile| {
            let (x0, y0, x1, y1) = grid.tile_rect(tile, width, height);
            let mut buf = Vec::with_capacity(((x1 - x0) * (y1 - y0)) as usize * 3);
            // Contiguous copy of this tile's candidates, in compositing order.
            let candidates: Vec<PreparedSplat> = grid.lists[tile]
                .iter()
                .map(|&pi| prepared[pi as usize])
                .collect();
            for y in y0..y1 {
                let py = y as f64 + 0.5;
                for x in x0..x1 {
                    let px = x as f64 + 0.5;
                    let rgb = composite_pixel(px, py, &candidates, settings, bg);
                    buf.extend_from_slice(&rgb);
                }
            }
            (tile, buf)
        })
        .collect();
    let mut image = Image::new(width, height);
    for (tile, buf) in tiles {
        let (x0, y0, x1, y1) = grid.tile_rect(tile, width, height);
        let tw = (x1 - x0) as usize;
        for (row, y) in (y0..y1).enumerate() {
            let src = &buf[row * tw * 3..(row + 1) * tw * 3];
            let dst = image.index(x0, y);
            image.data_mut()[dst..dst + tw * 3].copy_from_slice(src);
        }
    }
    Ok(image)
}

/// Renders the budget-`k` prefix of a model.
pub fn render(model: &SplatModel, k: usize, settings: &RenderSettings) -> Result<Image> {
    let prefix = model.prefix(k)?;
    render_splats(prefix, model.width, model.height, model.background, settings)
}

/// Renders with wall-clock timing: one untimed warm-up, then the median
/// elapsed milliseconds over `repeats` runs.
pub fn render_timed(
    model: &SplatModel,
    k: usize,
    settings: &RenderSettings,
    repeats: usize,
) -> Result<(Image, f64)> {
    if repeats == 0 {
        return Err(Error::InvalidInput("repeats must be >= 1".into()));
    }
    let mut image = render(model, k, settings)?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        image = render(model, k, settings)?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if times.len() % 2 == 1 {
        times[times.len() / 2]
    } else {
        0.5 * (times[times.len() / 2 - 1] + times[times.len() / 2])
    };
    Ok((image, median))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splat::{init_model, logit, InitConfig, Splat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Raw color from an effective value; +/-40 saturates the logistic to
    /// exactly 1.0 (resp. ~4e-18) in f64, so tests can use pure colors.
    fn color_raw(c: f64) -> f64 {
        if c >= 1.0 {
            40.0
        } else if c <= 0.0 {
            -40.0
        } else {
            logit(c)
        }
    }

    fn centered_splat(id: u64, mu: [f64; 2], opacity: f64, color: [f64; 3], depth: f64) -> Splat {
        Splat {
            id,
            mu,
            log_scale: [1.5f64.ln(), 1.5f64.ln()],
            theta: 0.0,
            opacity_raw: logit(opacity),
            color_raw: [color_raw(color[0]), color_raw(color[1]), color_raw(color[2])],
            depth,
        }
    }

    fn tiny_model(splats: Vec<Splat>) -> SplatModel {
        SplatModel {
            splats,
            width: 8,
            height: 8,
            background: [0.0; 3],
            criterion: Default::default(),
        }
    }

    #[test]
    fn empty_prefix_is_background() {
        let model = tiny_model(vec![centered_splat(0, [4.0, 4.0], 0.8, [1.0, 0.0, 0.0], 0.5)]);
        let img = render(&model, 0, &RenderSettings::default()).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_splat_at_pixel_center() {
        // d = 0 at the covered pixel center, so the Gaussian factor is 1 and
        // the pixel is exactly opacity * color.
        let model = tiny_model(vec![centered_splat(0, [4.5, 4.5], 0.8, [1.0, 0.0, 0.0], 0.5)]);
        let img = render(&model, 1, &RenderSettings::default()).unwrap();
        let px = img.pixel(4, 4);
        assert!((px[0] - 0.8).abs() < 1e-12);
        assert!(px[1].abs() < 1e-12);
        assert!(px[2].abs() < 1e-12);
    }

    #[test]
    fn two_coincident_splats_composite() {
        // C1*a1 + C2*a2*(1-a1) with a1 = a2 = 0.5: (0.5, 0.25, 0).
        let model = tiny_model(vec![
            centered_splat(0, [4.5, 4.5], 0.5, [1.0, 0.0, 0.0], 0.1),
            centered_splat(1, [4.5, 4.5], 0.5, [0.0, 1.0, 0.0], 0.2),
        ]);
        let img = render(&model, 2, &RenderSettings::default()).unwrap();
        let px = img.pixel(4, 4);
        assert!((px[0] - 0.5).abs() < 1e-10);
        assert!((px[1] - 0.25).abs() < 1e-10);
        assert!(px[2].abs() < 1e-10);
    }

    #[test]
    fn depth_order_beats_storage_order() {
        // Same two splats pushed in reverse storage order: compositing must
        // still run front-to-back by depth.
        let model = tiny_model(vec![
            centered_splat(1, [4.5, 4.5], 0.5, [0.0, 1.0, 0.0], 0.2),
            centered_splat(0, [4.5, 4.5], 0.5, [1.0, 0.0, 0.0], 0.1),
        ]);
        let img = render(&model, 2, &RenderSettings::default()).unwrap();
        let px = img.pixel(4, 4);
        assert!((px[0] - 0.5).abs() < 1e-10);
        assert!((px[1] - 0.25).abs() < 1e-10);
    }

    #[test]
    fn background_composites_through_transmittance() {
        let mut model = tiny_model(vec![centered_splat(
            0,
            [4.5, 4.5],
            0.5,
            [1.0, 0.0, 0.0],
            0.5,
        )]);
        model.background = [0.0, 0.0, 1.0];
        let img = render(&model, 1, &RenderSettings::default()).unwrap();
        let px = img.pixel(4, 4);
        assert!((px[0] - 0.5).abs() < 1e-12);
        assert!((px[2] - 0.5).abs() < 1e-12);
        // A far corner sees pure background.
        let corner = img.pixel(0, 0);
        assert!((corner[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariance_bit_exact() {
        let cfg = InitConfig {
            n: 40,
            width: 32,
            height: 24,
            ..InitConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut model = init_model(&cfg, None, &mut rng).unwrap();
        for s in model.splats.iter_mut() {
            s.opacity_raw = rng.random::<f64>() * 4.0 - 2.0;
            s.theta = rng.random::<f64>() * 3.0;
            s.log_scale = [rng.random::<f64>() + 0.2, rng.random::<f64>() + 0.2];
        }
        let settings = RenderSettings::default();
        let base = render(&model, model.len(), &settings).unwrap();
        let mut shuffled = model.clone();
        shuffled.splats.reverse();
        shuffled.splats.swap(0, 17);
        let out = render(&shuffled, shuffled.len(), &settings).unwrap();
        assert_eq!(base.data(), out.data());
    }

    #[test]
    fn prefix_render_matches_bare_list() {
        let cfg = InitConfig {
            n: 25,
            width: 16,
            height: 16,
            ..InitConfig::default()
        };
        let model = init_model(&cfg, None, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let settings = RenderSettings::default();
        let a = render(&model, model.len(), &settings).unwrap();
        let b = render_splats(
            &model.splats,
            model.width,
            model.height,
            model.background,
            &settings,
        )
        .unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn near_zero_opacity_splat_is_invisible() {
        let base = tiny_model(vec![centered_splat(0, [4.5, 4.5], 0.7, [0.2, 0.9, 0.4], 0.3)]);
        let mut with_ghost = base.clone();
        let mut ghost = centered_splat(1, [3.5, 3.5], 0.5, [1.0, 1.0, 1.0], 0.05);
        ghost.opacity_raw = logit(1e-9);
        with_ghost.splats.push(ghost);
        let settings = RenderSettings::default();
        let a = render(&base, 1, &settings).unwrap();
        let b = render(&with_ghost, 2, &settings).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn channels_stay_in_unit_range() {
        let cfg = InitConfig {
            n: 200,
            width: 48,
            height: 48,
            ..InitConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut model = init_model(&cfg, None, &mut rng).unwrap();
        for s in model.splats.iter_mut() {
            s.opacity_raw = rng.random::<f64>() * 12.0 - 4.0;
            s.color_raw = [
                rng.random::<f64>() * 10.0 - 5.0,
                rng.random::<f64>() * 10.0 - 5.0,
                rng.random::<f64>() * 10.0 - 5.0,
            ];
            s.log_scale = [rng.random::<f64>() * 2.0, rng.random::<f64>() * 2.0];
        }
        model.background = [0.3, 0.9, 1.0];
        let img = render(&model, model.len(), &RenderSettings::default()).unwrap();
        for &v in img.data() {
            assert!((0.0..=1.0).contains(&v), "channel out of range: {v}");
        }
    }

    #[test]
    fn out_of_range_prefix_errors() {
        let model = tiny_model(vec![centered_splat(0, [4.0, 4.0], 0.5, [0.5; 3], 0.5)]);
        assert!(render(&model, 2, &RenderSettings::default()).is_err());
    }

    #[test]
    fn render_timed_reports_median_and_identical_image() {
        let model = tiny_model(vec![centered_splat(0, [4.5, 4.5], 0.8, [1.0, 0.0, 0.0], 0.5)]);
        let settings = RenderSettings::default();
        let (timed, ms) = render_timed(&model, 1, &settings, 3).unwrap();
        let plain = render(&model, 1, &settings).unwrap();
        assert_eq!(timed.data(), plain.data());
        assert!(ms >= 0.0);
        assert!(render_timed(&model, 1, &settings, 0).is_err());
    }

    #[test]
    fn smaller_prefix_renders_faster() {
        // Directional timing check: a tenth of the splats must beat the full
        // set in median wall-clock on any machine.
        let cfg = InitConfig {
            n: 20_000,
            width: 128,
            height: 128,
            ..InitConfig::default()
        };
        let model = init_model(&cfg, None, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let settings = RenderSettings::default();
        let (_, ms_small) = render_timed(&model, 2_000, &settings, 3).unwrap();
        let (_, ms_full) = render_timed(&model, 20_000, &settings, 3).unwrap();
        assert!(
            ms_small < ms_full,
            "k=N/10 median {ms_small}ms vs k=N {ms_full}ms"
        );
    }

    #[test]
    fn output_independent_of_worker_count() {
        let cfg = InitConfig {
            n: 60,
            width: 40,
            height: 40,
            ..InitConfig::default()
        };
        let model = init_model(&cfg, None, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let settings = RenderSettings::default();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| render(&model, model.len(), &settings).unwrap());
        let b = pool4.install(|| render(&model, model.len(), &settings).unwrap());
        assert_eq!(a.data(), b.data());
    }
}
