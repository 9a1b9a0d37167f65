//! Reverse-mode gradients of the rasterizer, plus a finite-difference oracle.
//!
//! `backward` computes dL/d(raw parameters) for L = sum_u <pixel_grad(u),
//! rendered(u)> by re-walking each pixel's front-to-back composite and
//! chaining through alpha = sigma * exp(-q/2), the rotated-frame quadratic
//! form q, and the exp/logistic reparameterizations. Work is parallel over
//! tiles with private accumulators merged in fixed tile order, so results are
//! bit-identical regardless of worker count.
//!
//! Cutoff discontinuities (alpha floor, bounding radius, alpha clamp, early
//! stop) are treated as constants where inactive and zero-gradient where
//! active, matching the forward rasterizer's conventions.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::render::{bin_tiles, prepare_sorted, PreparedSplat, RenderSettings};
use crate::splat::SplatModel;

/// Gradients for one splat's raw parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SplatGrad {
    pub d_mu: [f64; 2],
    pub d_log_scale: [f64; 2],
    pub d_theta: f64,
    pub d_opacity_raw: f64,
    pub d_color_raw: [f64; 3],
}

impl SplatGrad {
    pub const ZERO: SplatGrad = SplatGrad {
        d_mu: [0.0; 2],
        d_log_scale: [0.0; 2],
        d_theta: 0.0,
        d_opacity_raw: 0.0,
        d_color_raw: [0.0; 3],
    };

    pub fn add_assign(&mut self, other: &SplatGrad) {
        self.d_mu[0] += other.d_mu[0];
        self.d_mu[1] += other.d_mu[1];
        self.d_log_scale[0] += other.d_log_scale[0];
        self.d_log_scale[1] += other.d_log_scale[1];
        self.d_theta += other.d_theta;
        self.d_opacity_raw += other.d_opacity_raw;
        self.d_color_raw[0] += other.d_color_raw[0];
        self.d_color_raw[1] += other.d_color_raw[1];
        self.d_color_raw[2] += other.d_color_raw[2];
    }

    pub fn is_finite(&self) -> bool {
        self.d_mu.iter().all(|v| v.is_finite())
            && self.d_log_scale.iter().all(|v| v.is_finite())
            && self.d_theta.is_finite()
            && self.d_opacity_raw.is_finite()
            && self.d_color_raw.iter().all(|v| v.is_finite())
    }
}

/// Per-splat gradients aligned with model storage order. Entries for splats
/// outside the rendered prefix stay exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub entries: Vec<SplatGrad>,
}

impl GradientBuffer {
    pub fn zeros(n: usize) -> Self {
        Self {
            entries: vec![SplatGrad::ZERO; n],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn add_assign(&mut self, other: &GradientBuffer) {
        assert_eq!(self.entries.len(), other.entries.len());
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.add_assign(b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|g| g.is_finite())
    }
}

/// One recorded splat contribution at a pixel, for the reverse scan.
#[derive(Clone, Copy)]
struct Contribution {
    slot: u32,
    alpha: f64,
    gaussian: f64,
    e1: f64,
    e2: f64,
    t_before: f64,
    clamped: bool,
}

#[allow(clippy::too_many_arguments)]
fn accumulate_pixel(
    px: f64,
    py: f64,
    d_out: [f64; 3],
    candidates: &[PreparedSplat],
    settings: &RenderSettings,
    background: [f64; 3],
    scratch: &mut Vec<Contribution>,
    local: &mut [SplatGrad],
) {
    scratch.clear();
    let mut transmittance = 1.0f64;
    for (slot, p) in candidates.iter().enumerate() {
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
        let gaussian = (-0.5 * q).exp();
        let raw_alpha = p.opacity * gaussian;
        let clamped = raw_alpha > settings.alpha_max;
        let alpha = if clamped { settings.alpha_max } else { raw_alpha };
        if alpha < settings.alpha_min {
            continue;
        }
        scratch.push(Contribution {
            slot: slot as u32,
            alpha,
            gaussian,
            e1,
            e2,
            t_before: transmittance,
            clamped,
        });
        transmittance *= 1.0 - alpha;
    }

    // Residual transmittance feeds the background term.
    let mut g_t = d_out[0] * background[0] + d_out[1] * background[1] + d_out[2] * background[2];
    for c in scratch.iter().rev() {
        let p = &candidates[c.slot as usize];
        let grad = &mut local[c.slot as usize];
        let dot_color = d_out[0] * p.color[0] + d_out[1] * p.color[1] + d_out[2] * p.color[2];

        // Color path: out += T * alpha * C, chained through the logistic.
        let w = c.t_before * c.alpha;
        grad.d_color_raw[0] += d_out[0] * w * p.color[0] * (1.0 - p.color[0]);
        grad.d_color_raw[1] += d_out[1] * w * p.color[1] * (1.0 - p.color[1]);
        grad.d_color_raw[2] += d_out[2] * w * p.color[2] * (1.0 - p.color[2]);

        // Alpha receives a direct term and the downstream transmittance term.
        let d_alpha = dot_color * c.t_before - g_t * c.t_before;
        // Gradient w.r.t. the transmittance seen by this contribution.
        g_t = dot_color * c.alpha + g_t * (1.0 - c.alpha);

        if c.clamped {
            continue;
        }
        // alpha = sigma * exp(-q/2)
        let d_sigma = d_alpha * c.gaussian;
        grad.d_opacity_raw += d_sigma * p.opacity * (1.0 - p.opacity);
        let d_q = d_alpha * p.opacity * (-0.5 * c.gaussian);

        // q = e1^2/s1^2 + e2^2/s2^2 in the rotated frame e = R(theta)^T d,
        // where de1/dtheta = e2 and de2/dtheta = -e1.
        let f1 = c.e1 * p.inv_s2[0];
        let f2 = c.e2 * p.inv_s2[1];
        grad.d_theta += d_q * 2.0 * (c.e2 * f1 - c.e1 * f2);
        grad.d_log_scale[0] += d_q * (-2.0 * c.e1 * f1);
        grad.d_log_scale[1] += d_q * (-2.0 * c.e2 * f2);
        grad.d_mu[0] += d_q * -2.0 * (p.cos_t * f1 - p.sin_t * f2);
        grad.d_mu[1] += d_q * -2.0 * (p.sin_t * f1 + p.cos_t * f2);
    }
}

/// Backward pass over the budget-`k` prefix for the linear functional defined
/// by `pixel_grad`.
pub fn backward(
    model: &SplatModel,
    k: usize,
    settings: &RenderSettings,
    pixel_grad: &Image,
) -> Result<GradientBuffer> {
    settings.validate()?;
    if pixel_grad.width() != model.width || pixel_grad.height() != model.height {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} pixel gradient", model.width, model.height),
            actual: format!("{}x{}", pixel_grad.width(), pixel_grad.height()),
        });
    }
    let prefix = model.prefix(k)?;
    let prepared = prepare_sorted(prefix, settings)?;
    let grid = bin_tiles(&prepared, model.width, model.height, settings.tile_size);
    let bg = [
        model.background[0] as f64,
        model.background[1] as f64,
        model.background[2] as f64,
    ];

    let tile_grads: Vec<(Vec<usize>, Vec<SplatGrad>)> = (0..grid.lists.len())
        .into_par_iter()
        .map(|tile| {
            let mut local = vec![SplatGrad::ZERO; grid.lists[tile].len()];
            if grid.lists[tile].is_empty() {
                return (Vec::new(), local);
            }
            // Contiguous copy of this tile's candidates, in compositing order.
            let candidates: Vec<PreparedSplat> = grid.lists[tile]
                .iter()
                .map(|&pi| prepared[pi as usize])
                .collect();
            let (x0, y0, x1, y1) = grid.tile_rect(tile, model.width, model.height);
            let mut scratch = Vec::with_capacity(candidates.len());
            for y in y0..y1 {
                let py = y as f64 + 0.5;
                for x in x0..x1 {
                    let d_out = pixel_grad.pixel(x, y);
                    if d_out == [0.0; 3] {
                        continue;
                    }
                    let px = x as f64 + 0.5;
                    accumulate_pixel(
                        px,
                        py,
                        d_out,
                        &candidates,
                        settings,
                        bg,
                        &mut scratch,
                        &mut local,
                    );
                }
            }
            let indices = candidates.iter().map(|p| p.index).collect();
            (indices, local)
        })
        .collect();

    // Deterministic reduction: tiles merge in index order.
    let mut buffer = GradientBuffer::zeros(model.len());
    for (indices, local) in &tile_grads {
        for (storage_index, grad) in indices.iter().zip(local) {
            buffer.entries[*storage_index].add_assign(grad);
        }
    }
    Ok(buffer)
}

/// Selects one scalar parameter of one splat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSelector {
    Mu { splat: usize, axis: usize },
    LogScale { splat: usize, axis: usize },
    Theta { splat: usize },
    OpacityRaw { splat: usize },
    ColorRaw { splat: usize, channel: usize },
}

impl ParamSelector {
    /// All selectors for the first `n` splats, in a fixed order.
    pub fn all(n: usize) -> Vec<ParamSelector> {
        let mut out = Vec::with_capacity(n * 9);
        for splat in 0..n {
            for axis in 0..2 {
                out.push(ParamSelector::Mu { splat, axis });
            }
            for axis in 0..2 {
                out.push(ParamSelector::LogScale { splat, axis });
            }
            out.push(ParamSelector::Theta { splat });
            out.push(ParamSelector::OpacityRaw { splat });
            for channel in 0..3 {
                out.push(ParamSelector::ColorRaw { splat, channel });
            }
        }
        out
    }

    fn apply(&self, model: &mut SplatModel, delta: f64) {
        match *self {
            ParamSelector::Mu { splat, axis } => model.splats[splat].mu[axis] += delta,
            ParamSelector::LogScale { splat, axis } => {
                model.splats[splat].log_scale[axis] += delta
            }
            ParamSelector::Theta { splat } => model.splats[splat].theta += delta,
            ParamSelector::OpacityRaw { splat } => model.splats[splat].opacity_raw += delta,
            ParamSelector::ColorRaw { splat, channel } => {
                model.splats[splat].color_raw[channel] += delta
            }
        }
    }

    /// Reads the matching entry out of a gradient buffer.
    pub fn pick(&self, buffer: &GradientBuffer) -> f64 {
        match *self {
            ParamSelector::Mu { splat, axis } => buffer.entries[splat].d_mu[axis],
            ParamSelector::LogScale { splat, axis } => buffer.entries[splat].d_log_scale[axis],
            ParamSelector::Theta { splat } => buffer.entries[splat].d_theta,
            ParamSelector::OpacityRaw { splat } => buffer.entries[splat].d_opacity_raw,
            ParamSelector::ColorRaw { splat, channel } => {
                buffer.entries[splat].d_color_raw[channel]
            }
        }
    }
}

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Central finite difference (L(p+h) - L(p-h)) / (2h) of `loss_fn` composed
/// with the renderer, for the selected scalar parameter.
pub fn fd_gradient(
    model: &SplatModel,
    k: usize,
    settings: &RenderSettings,
    loss_fn: &dyn Fn(&Image) -> f64,
    selector: ParamSelector,
    h: f64,
) -> Result<f64> {
    let mut plus = model.clone();
    selector.apply(&mut plus, h);
    let mut minus = model.clone();
    selector.apply(&mut minus, -h);
    let lp = loss_fn(&crate::render::render(&plus, k, settings)?);
    let lm = loss_fn(&crate::render::render(&minus, k, settings)?);
    Ok((lp - lm) / (2.0 * h))
}
