//! Quality metrics, budget sweeps and quality-budget frontier scores.
//!
//! A sweep renders a model at a grid of prefix ratios and records one
//! operating point (budget, quality, timing) per ratio. Two envelope
//! constructions summarize the frontier: quality versus throughput (a point
//! can always be replicated at any lower speed, so the envelope extends
//! leftward) and quality versus splat count (a point can always be
//! replicated with more splats, so it extends rightward, with a linear ramp
//! from the origin up to the lowest-budget point). The normalized area under
//! each envelope, scaled by 100, is the frontier score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::loss::{ssim as ssim_loss, LossConfig};
use crate::render::{render_timed, RenderSettings};
use crate::splat::SplatModel;
use crate::train::budget_from_ratio;

/// PSNR in dB with peak 1, capped at 100 (identical images).
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.width(), a.height()),
            actual: format!("{}x{}", b.width(), b.height()),
        });
    }
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse <= 0.0 {
        return Ok(100.0);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(100.0))
}

/// Structural similarity with the standard 11x11 / sigma 1.5 window.
pub fn ssim_value(a: &Image, b: &Image) -> Result<f64> {
    Ok(ssim_loss(a, b, &LossConfig::default())?.0)
}

pub const PSNR_RANGE: (f64, f64) = (14.0, 32.0);
pub const SSIM_RANGE: (f64, f64) = (0.35, 0.92);
pub const LPIPS_RANGE: (f64, f64) = (0.06, 0.60);

fn normalize(v: f64, range: (f64, f64)) -> f64 {
    ((v - range.0) / (range.1 - range.0)).clamp(0.0, 1.0)
}

/// PSNR linearly clamped to [0, 1] over the fixed range.
pub fn normalized_psnr(psnr_db: f64) -> f64 {
    normalize(psnr_db, PSNR_RANGE)
}

/// Composite quality in [0, 1]: the mean of clamped PSNR, clamped SSIM and
/// one minus clamped LPIPS. Without an LPIPS value the perceptual term is
/// dropped and the mean runs over the two remaining terms.
pub fn quality_score(psnr_db: f64, ssim: f64, lpips: Option<f64>) -> f64 {
    let p = normalize(psnr_db, PSNR_RANGE);
    let s = normalize(ssim, SSIM_RANGE);
    match lpips {
        Some(l) => (p + s + (1.0 - normalize(l, LPIPS_RANGE))) / 3.0,
        None => (p + s) / 2.0,
    }
}

/// The standard evaluation grid: 100% down to 20% in tens, then 10%, 5%, 1%.
pub const DEFAULT_SWEEP_RATIOS: [f64; 12] = [
    1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01,
];

pub const DEFAULT_CLIP_FPS: f64 = 500.0;
pub const DEFAULT_CLIP_SPLATS: f64 = 5_000_000.0;

/// One measured (budget, quality, timing) sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Fraction of the full splat count; NaN for external points without one.
    pub ratio: f64,
    pub k: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub lpips: Option<f64>,
    pub quality: f64,
    pub median_ms: f64,
    pub fps: f64,
}

/// Renders the model at each ratio and measures quality and timing.
/// Ratios are evaluated in order; output order matches input order.
pub fn sweep(
    model: &SplatModel,
    target: &Image,
    ratios: &[f64],
    settings: &RenderSettings,
    repeats: usize,
) -> Result<Vec<OperatingPoint>> {
    let n = model.len();
    let mut points = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "sweep ratio {ratio} outside (0, 1]"
            )));
        }
        let k = budget_from_ratio(ratio, n);
        let (img, median_ms) = render_timed(model, k, settings, repeats)?;
        let psnr_db = psnr(&img, target)?;
        let ssim = ssim_value(&img, target)?;
        let quality = quality_score(psnr_db, ssim, None);
        let median_ms = median_ms.max(1e-6);
        points.push(OperatingPoint {
            ratio,
            k,
            psnr: psnr_db,
            ssim,
            lpips: None,
            quality,
            median_ms,
            fps: 1e3 / median_ms,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeAxis {
    Fps,
    Splats,
}

/// One linear piece; constant pieces have `q0 == q1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSegment {
    pub x0: f64,
    pub x1: f64,
    pub q0: f64,
    pub q1: f64,
}

/// Piecewise-linear function over (0, clip_max], integrated exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub axis: EnvelopeAxis,
    pub clip_max: f64,
    pub segments: Vec<EnvelopeSegment>,
}

impl Envelope {
    /// Exact area under the envelope (trapezoid per piece).
    pub fn area(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| (s.x1 - s.x0) * 0.5 * (s.q0 + s.q1))
            .sum()
    }

    /// Pointwise evaluation; zero outside (0, clip_max].
    pub fn value_at(&self, x: f64) -> f64 {
        if x <= 0.0 || x > self.clip_max {
            return 0.0;
        }
        for s in &self.segments {
            if x > s.x0 && x <= s.x1 {
                if s.q0 == s.q1 {
                    return s.q0;
                }
                return s.q0 + (s.q1 - s.q0) * (x - s.x0) / (s.x1 - s.x0);
            }
        }
        0.0
    }
}

fn check_point(p: &OperatingPoint) -> Result<()> {
    if !(p.quality.is_finite() && (0.0..=1.0).contains(&p.quality)) {
        return Err(Error::InvalidInput(format!(
            "quality {} outside [0, 1]",
            p.quality
        )));
    }
    Ok(())
}

/// Quality-vs-throughput envelope: each point extends leftward (any slower
/// speed is attainable), values beyond the clip are clipped to it.
pub fn envelope_fps(points: &[OperatingPoint], clip_max: f64) -> Result<Envelope> {
    if points.is_empty() {
        return Err(Error::EmptyEnvelope);
    }
    let mut entries: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for p in points {
        check_point(p)?;
        if !(p.fps.is_finite() && p.fps > 0.0) {
            return Err(Error::InvalidInput(format!("fps {} must be > 0", p.fps)));
        }
        entries.push((p.fps.min(clip_max), p.quality));
    }
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Collapse duplicate x, keeping the best quality.
    let mut xs: Vec<f64> = Vec::new();
    let mut qs: Vec<f64> = Vec::new();
    for (x, q) in entries {
        if xs.last() == Some(&x) {
            let last = qs.len() - 1;
            qs[last] = qs[last].max(q);
        } else {
            xs.push(x);
            qs.push(q);
        }
    }
    // Suffix maximum: best quality at or beyond each throughput.
    let mut suffix = qs.clone();
    for i in (0..suffix.len().saturating_sub(1)).rev() {
        suffix[i] = suffix[i].max(suffix[i + 1]);
    }
    let mut segments = Vec::new();
    let mut prev = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        if x > prev {
            segments.push(EnvelopeSegment {
                x0: prev,
                x1: x,
                q0: suffix[i],
                q1: suffix[i],
            });
            prev = x;
        }
    }
    if prev < clip_max {
        segments.push(EnvelopeSegment {
            x0: prev,
            x1: clip_max,
            q0: 0.0,
            q1: 0.0,
        });
    }
    Ok(Envelope {
        axis: EnvelopeAxis::Fps,
        clip_max,
        segments,
    })
}

/// Quality-vs-budget envelope: each point extends rightward (any larger
/// budget is attainable) and a linear ramp connects the origin to the
/// lowest-budget point.
pub fn envelope_splats(points: &[OperatingPoint], clip_max: f64) -> Result<Envelope> {
    if points.is_empty() {
        return Err(Error::EmptyEnvelope);
    }
    let mut entries: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for p in points {
        check_point(p)?;
        if p.k == 0 {
            return Err(Error::InvalidInput("operating point with k = 0".into()));
        }
        entries.push(((p.k as f64).min(clip_max), p.quality));
    }
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut xs: Vec<f64> = Vec::new();
    let mut qs: Vec<f64> = Vec::new();
    for (x, q) in entries {
        if xs.last() == Some(&x) {
            let last = qs.len() - 1;
            qs[last] = qs[last].max(q);
        } else {
            xs.push(x);
            qs.push(q);
        }
    }
    let mut segments = vec![EnvelopeSegment {
        x0: 0.0,
        x1: xs[0],
        q0: 0.0,
        q1: qs[0],
    }];
    let mut run_max = qs[0];
    let mut prev = xs[0];
    for i in 1..xs.len() {
        segments.push(EnvelopeSegment {
            x0: prev,
            x1: xs[i],
            q0: run_max,
            q1: run_max,
        });
        run_max = run_max.max(qs[i]);
        prev = xs[i];
    }
    if prev < clip_max {
        segments.push(EnvelopeSegment {
            x0: prev,
            x1: clip_max,
            q0: run_max,
            q1: run_max,
        });
    }
    Ok(Envelope {
        axis: EnvelopeAxis::Splats,
        clip_max,
        segments,
    })
}

/// Normalized area under the envelope, scaled by 100: exact piecewise
/// integration divided by `clip_max * 1.0`.
pub fn auc(envelope: &Envelope) -> f64 {
    100.0 * envelope.area() / envelope.clip_max
}

pub const POINTS_CSV_HEADER: &str = "ratio,k,psnr,ssim,lpips,quality,median_ms,fps";

fn fmt_opt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn points_to_csv(points: &[OperatingPoint]) -> String {
    let mut out = String::from(POINTS_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_opt(p.ratio),
            p.k,
            fmt_opt(p.psnr),
            fmt_opt(p.ssim),
            p.lpips.map(|l| format!("{l}")).unwrap_or_default(),
            p.quality,
            fmt_opt(p.median_ms),
            p.fps
        ));
    }
    out
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    line: usize,
    column: usize,
    name: &str,
) -> Result<T> {
    field.trim().parse().map_err(|_| Error::CsvParse {
        line,
        column,
        message: format!("cannot parse {name} from {:?}", field.trim()),
    })
}

fn parse_optional(field: &str, line: usize, column: usize, name: &str) -> Result<f64> {
    if field.trim().is_empty() {
        Ok(f64::NAN)
    } else {
        parse_field(field, line, column, name)
    }
}

/// Parses the operating-point CSV schema. `ratio`, `psnr`, `ssim`, `lpips`
/// and `median_ms` may be empty (external points); `k`, `quality` and `fps`
/// are required.
pub fn points_from_csv(text: &str) -> Result<Vec<OperatingPoint>> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r'),
        None => {
            return Err(Error::CsvParse {
                line: 1,
                column: 1,
                message: "empty file".into(),
            })
        }
    };
    if header != POINTS_CSV_HEADER {
        return Err(Error::CsvParse {
            line: 1,
            column: 1,
            message: format!("expected header {POINTS_CSV_HEADER:?}, got {header:?}"),
        });
    }
    let mut points = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::CsvParse {
                line: line_no,
                column: 1,
                message: format!("expected 8 columns, got {}", fields.len()),
            });
        }
        let lpips_raw = fields[4].trim();
        let lpips = if lpips_raw.is_empty() {
            None
        } else {
            Some(parse_field::<f64>(fields[4], line_no, 5, "lpips")?)
        };
        points.push(OperatingPoint {
            ratio: parse_optional(fields[0], line_no, 1, "ratio")?,
            k: parse_field(fields[1], line_no, 2, "k")?,
            psnr: parse_optional(fields[2], line_no, 3, "psnr")?,
            ssim: parse_optional(fields[3], line_no, 4, "ssim")?,
            lpips,
            quality: parse_field(fields[5], line_no, 6, "quality")?,
            median_ms: parse_optional(fields[6], line_no, 7, "median_ms")?,
            fps: parse_field(fields[7], line_no, 8, "fps")?,
        });
    }
    Ok(points)
}

/// Structured-text frontier report for a point set.
pub fn auc_report(points: &[OperatingPoint], clip_fps: f64, clip_splats: f64) -> Result<String> {
    let (auc_fps_v, auc_splats_v) = if points.is_empty() {
        (0.0, 0.0)
    } else {
        (
            auc(&envelope_fps(points, clip_fps)?),
            auc(&envelope_splats(points, clip_splats)?),
        )
    };
    Ok(format!(
        "points = {}\nclip_fps = {}\nclip_splats = {}\nauc_fps = {}\nauc_splats = {}\n",
        points.len(),
        clip_fps,
        clip_splats,
        auc_fps_v,
        auc_splats_v
    ))
}
