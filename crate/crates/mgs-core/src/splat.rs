//! Gaussian splat primitives and the ordered model container.
//!
//! A [`Splat`] stores unconstrained raw parameters; effective quantities are
//! obtained through fixed transforms (`exp` for scales, logistic for opacity
//! and color), so positivity and range invariants hold structurally. Depth is
//! assigned at initialization and never optimized; it only defines the
//! compositing order.
//!
//! A [`SplatModel`] is an importance-ordered sequence: storage order is the
//! nesting order, and the first `k` entries form the budget-`k` prefix.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::ordering::OrderingCriterion;

/// Logistic sigmoid, maps reals onto (0, 1).
#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverse of [`logistic`]; `p` must lie strictly in (0, 1).
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Colors are clamped into this range before `logit` so initialization from
/// saturated 8-bit pixels stays finite.
pub const COLOR_LOGIT_CLAMP: f64 = 1e-3;

/// One anisotropic 2D Gaussian primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat {
    /// Stable identifier, unique within a model, preserved across reordering.
    pub id: u64,
    /// Center in continuous pixel coordinates.
    pub mu: [f64; 2],
    /// Log of the per-axis standard deviations in pixels.
    pub log_scale: [f64; 2],
    /// Rotation of the principal axes, radians (effective mod pi).
    pub theta: f64,
    /// Raw opacity; effective opacity is `logistic(opacity_raw)`.
    pub opacity_raw: f64,
    /// Raw color; effective RGB is `logistic` per channel.
    pub color_raw: [f64; 3],
    /// Fixed compositing depth, not optimized.
    pub depth: f64,
}

impl Splat {
    /// Effective per-axis standard deviations, always positive.
    #[inline]
    pub fn scales(&self) -> [f64; 2] {
        [self.log_scale[0].exp(), self.log_scale[1].exp()]
    }

    /// Effective opacity in (0, 1).
    #[inline]
    pub fn opacity(&self) -> f64 {
        logistic(self.opacity_raw)
    }

    /// Effective RGB color, each channel in (0, 1).
    #[inline]
    pub fn color(&self) -> [f64; 3] {
        [
            logistic(self.color_raw[0]),
            logistic(self.color_raw[1]),
            logistic(self.color_raw[2]),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.mu.iter().all(|v| v.is_finite())
            && self.log_scale.iter().all(|v| v.is_finite())
            && self.theta.is_finite()
            && self.opacity_raw.is_finite()
            && self.color_raw.iter().all(|v| v.is_finite())
            && self.depth.is_finite()
    }

    /// Covariance `R(theta) diag(s^2) R(theta)^T` as `[[a, b], [b, c]]`.
    ///
    /// Symmetric positive definite for any finite parameters.
    pub fn covariance(&self) -> Result<[[f64; 2]; 2]> {
        if !self.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "splat {} has non-finite fields",
                self.id
            )));
        }
        let [s1, s2] = self.scales();
        let (sin_t, cos_t) = self.theta.sin_cos();
        let (v1, v2) = (s1 * s1, s2 * s2);
        let a = cos_t * cos_t * v1 + sin_t * sin_t * v2;
        let b = cos_t * sin_t * (v1 - v2);
        let c = sin_t * sin_t * v1 + cos_t * cos_t * v2;
        Ok([[a, b], [b, c]])
    }
}

/// An importance-ordered set of splats over a fixed canvas.
///
/// Storage order *is* the nesting order: after a reorder, importance scores
/// are non-increasing along storage, and `prefix(k)` for growing `k` yields
/// nested subsets by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatModel {
    pub splats: Vec<Splat>,
    pub width: u32,
    pub height: u32,
    /// Background color composited through residual transmittance.
    pub background: [f32; 3],
    /// Criterion the current storage order was produced with.
    pub criterion: OrderingCriterion,
}

impl SplatModel {
    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    /// View over the first `k` splats in storage order.
    pub fn prefix(&self, k: usize) -> Result<&[Splat]> {
        if k > self.splats.len() {
            return Err(Error::OutOfRange {
                index: k,
                len: self.splats.len(),
            });
        }
        Ok(&self.splats[..k])
    }

    /// Checks id uniqueness, finiteness and canvas sanity.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidModel("canvas has zero extent".into()));
        }
        let mut ids: Vec<u64> = self.splats.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel("duplicate splat ids".into()));
        }
        if let Some(s) = self.splats.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "splat {} has non-finite fields",
                s.id
            )));
        }
        Ok(())
    }
}

/// Initialization parameters; canvas dimensions come from the target image
/// resolution when fitting from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// Number of splats.
    pub n: usize,
    pub width: u32,
    pub height: u32,
    /// Initial per-axis standard deviation in pixels.
    pub initial_scale: f64,
    pub background: [f32; 3],
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            width: 128,
            height: 128,
            initial_scale: 3.0,
            background: [0.0; 3],
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("canvas dimensions must be >= 1".into()));
        }
        if !(self.initial_scale.is_finite() && self.initial_scale > 0.0) {
            return Err(Error::InvalidConfig("initial_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Builds a fresh model: positions uniform over the canvas, opacity 0.5,
/// color taken from `target` at each center when provided (0.5 gray
/// otherwise), depth uniform in [0, 1).
///
/// Per splat the RNG is consumed in the fixed order `mu.x, mu.y, depth`, so a
/// seeded generator gives bit-identical models.
pub fn init_model(
    cfg: &InitConfig,
    target: Option<&Image>,
    rng: &mut impl Rng,
) -> Result<SplatModel> {
    cfg.validate()?;
    if let Some(t) = target {
        if t.width() != cfg.width || t.height() != cfg.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} target", cfg.width, cfg.height),
                actual: format!("{}x{}", t.width(), t.height()),
            });
        }
    }
    let log_scale = cfg.initial_scale.ln();
    let mut splats = Vec::with_capacity(cfg.n);
    for id in 0..cfg.n as u64 {
        let x = rng.random::<f64>() * cfg.width as f64;
        let y = rng.random::<f64>() * cfg.height as f64;
        let depth = rng.random::<f64>();
        let color_raw = match target {
            Some(t) => {
                let px = (x as u32).min(cfg.width - 1);
                let py = (y as u32).min(cfg.height - 1);
                let rgb = t.pixel(px, py);
                [
                    logit(rgb[0].clamp(COLOR_LOGIT_CLAMP, 1.0 - COLOR_LOGIT_CLAMP)),
                    logit(rgb[1].clamp(COLOR_LOGIT_CLAMP, 1.0 - COLOR_LOGIT_CLAMP)),
                    logit(rgb[2].clamp(COLOR_LOGIT_CLAMP, 1.0 - COLOR_LOGIT_CLAMP)),
                ]
            }
            None => [0.0; 3],
        };
        splats.push(Splat {
            id,
            mu: [x, y],
            log_scale: [log_scale; 2],
            theta: 0.0,
            opacity_raw: 0.0,
            color_raw,
            depth,
        });
    }
    Ok(SplatModel {
        splats,
        width: cfg.width,
        height: cfg.height,
        background: cfg.background,
        criterion: OrderingCriterion::default(),
    })
}
