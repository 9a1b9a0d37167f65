//! Reconstruction losses with value and pixel-gradient outputs.
//!
//! The reconstruction loss mixes mean absolute error with structural
//! dissimilarity, `(1 - lambda) * L1 + lambda * (1 - SSIM) / 2`. The
//! two-render objective adds a weighted full-set term on top of the prefix
//! term. All functions are pure; gradients are taken with respect to the
//! first (rendered) image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Structural-dissimilarity mixing weight in [0, 1].
    pub lambda: f64,
    /// Weight of the full-set term in the two-render objective, >= 0.
    pub gamma: f64,
    pub ssim_window: usize,
    pub ssim_sigma: f64,
    pub ssim_k1: f64,
    pub ssim_k2: f64,
    /// Smoothing for the L1 gradient, which uses x / sqrt(x^2 + eps^2).
    pub l1_smooth_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            gamma: 1.0,
            ssim_window: 11,
            ssim_sigma: 1.5,
            ssim_k1: 0.01,
            ssim_k2: 0.03,
            l1_smooth_eps: 1e-8,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig("lambda must lie in [0, 1]".into()));
        }
        let gamma_ok = self.gamma.is_finite() && self.gamma >= 0.0;
        if !gamma_ok {
            return Err(Error::InvalidConfig("gamma must be >= 0".into()));
        }
        if self.ssim_window == 0 {
            return Err(Error::InvalidConfig("ssim_window must be >= 1".into()));
        }
        if !positive(self.ssim_sigma) {
            return Err(Error::InvalidConfig("ssim_sigma must be > 0".into()));
        }
        if !positive(self.l1_smooth_eps) {
            return Err(Error::InvalidConfig("l1_smooth_eps must be > 0".into()));
        }
        Ok(())
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.width(), a.height()),
            actual: format!("{}x{}", b.width(), b.height()),
        });
    }
    Ok(())
}

/// Mean absolute channel difference and its smoothed-sign gradient w.r.t. `a`.
pub fn l1(a: &Image, b: &Image, smooth_eps: f64) -> Result<(f64, Image)> {
    check_dims(a, b)?;
    let n = a.data().len() as f64;
    let mut grad = Image::new(a.width(), a.height());
    let mut sum = 0.0;
    for (g, (&x, &y)) in grad
        .data_mut()
        .iter_mut()
        .zip(a.data().iter().zip(b.data()))
    {
        let d = x - y;
        sum += d.abs();
        *g = d / (d * d + smooth_eps * smooth_eps).sqrt() / n;
    }
    Ok((sum / n, grad))
}

/// Normalized 1D Gaussian tap weights.
fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let half = (window as f64 - 1.0) / 2.0;
    let mut k: Vec<f64> = (0..window)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    for v in &mut k {
        *v /= total;
    }
    k
}

/// Valid correlation along x: output width shrinks by `kernel.len() - 1`.
fn conv_h_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let ow = w - kernel.len() + 1;
    let mut out = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let orow = &mut out[y * ow..(y + 1) * ow];
        for (j, &kv) in kernel.iter().enumerate() {
            for x in 0..ow {
                orow[x] += kv * row[x + j];
            }
        }
    }
    out
}

/// Valid correlation along y: output height shrinks by `kernel.len() - 1`.
fn conv_v_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let oh = h - kernel.len() + 1;
    let mut out = vec![0.0; w * oh];
    for (i, &kv) in kernel.iter().enumerate() {
        for y in 0..oh {
            let srow = &src[(y + i) * w..(y + i) * w + w];
            let orow = &mut out[y * w..(y + 1) * w];
            for x in 0..w {
                orow[x] += kv * srow[x];
            }
        }
    }
    out
}

fn conv2_valid(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    conv_v_valid(&conv_h_valid(src, w, h, kernel), w - kernel.len() + 1, h, kernel)
}

/// Transpose of `conv_v_valid`: scatters window rows back to pixel rows.
fn scatter_v(src: &[f64], w: usize, src_h: usize, kernel: &[f64]) -> Vec<f64> {
    let oh = src_h + kernel.len() - 1;
    let mut out = vec![0.0; w * oh];
    for (i, &kv) in kernel.iter().enumerate() {
        for y in 0..src_h {
            let srow = &src[y * w..(y + 1) * w];
            let orow = &mut out[(y + i) * w..(y + i) * w + w];
            for x in 0..w {
                orow[x] += kv * srow[x];
            }
        }
    }
    out
}

/// Transpose of `conv_h_valid`.
fn scatter_h(src: &[f64], src_w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let ow = src_w + kernel.len() - 1;
    let mut out = vec![0.0; ow * h];
    for y in 0..h {
        let srow = &src[y * src_w..(y + 1) * src_w];
        let orow = &mut out[y * ow..(y + 1) * ow];
        for (j, &kv) in kernel.iter().enumerate() {
            for x in 0..src_w {
                orow[x + j] += kv * srow[x];
            }
        }
    }
    out
}

fn scatter2(src: &[f64], src_w: usize, src_h: usize, kernel: &[f64]) -> Vec<f64> {
    scatter_h(&scatter_v(src, src_w, src_h, kernel), src_w, src_h + kernel.len() - 1, kernel)
}

fn plane(img: &Image, channel: usize) -> Vec<f64> {
    img.data().iter().skip(channel).step_by(3).copied().collect()
}

/// Mean local SSIM over Gaussian windows (valid region only, averaged over
/// channels) and its gradient w.r.t. `a`. Peak signal level is 1.
pub fn ssim(a: &Image, b: &Image, cfg: &LossConfig) -> Result<(f64, Image)> {
    check_dims(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < cfg.ssim_window || h < cfg.ssim_window {
        return Err(Error::InvalidInput(format!(
            "image {w}x{h} smaller than ssim window {}",
            cfg.ssim_window
        )));
    }
    let kernel = gaussian_kernel(cfg.ssim_window, cfg.ssim_sigma);
    let c1 = (cfg.ssim_k1).powi(2);
    let c2 = (cfg.ssim_k2).powi(2);
    let (ww, wh) = (w - cfg.ssim_window + 1, h - cfg.ssim_window + 1);
    let nwin = (ww * wh) as f64;
    let grad_scale = 1.0 / (nwin * 3.0);

    let mut value = 0.0;
    let mut grad = Image::new(a.width(), a.height());
    for ch in 0..3 {
        let x = plane(a, ch);
        let y = plane(b, ch);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u * v).collect();
        let mx = conv2_valid(&x, w, h, &kernel);
        let my = conv2_valid(&y, w, h, &kernel);
        let mxx = conv2_valid(&xx, w, h, &kernel);
        let myy = conv2_valid(&yy, w, h, &kernel);
        let mxy = conv2_valid(&xy, w, h, &kernel);

        // Window maps of dS/d(mx), dS/d(mxx), dS/d(mxy); the raw conv
        // outputs are the independent intermediates for the chain rule.
        let mut d_mx = vec![0.0; mx.len()];
        let mut d_mxx = vec![0.0; mx.len()];
        let mut d_mxy = vec![0.0; mx.len()];
        let mut sum_s = 0.0;
        for i in 0..mx.len() {
            let (mu_x, mu_y) = (mx[i], my[i]);
            let vx = mxx[i] - mu_x * mu_x;
            let vy = myy[i] - mu_y * mu_y;
            let cxy = mxy[i] - mu_x * mu_y;
            let a1 = 2.0 * mu_x * mu_y + c1;
            let a2 = 2.0 * cxy + c2;
            let b1 = mu_x * mu_x + mu_y * mu_y + c1;
            let b2 = vx + vy + c2;
            let d = b1 * b2;
            let s = a1 * a2 / d;
            sum_s += s;
            let ds_da1 = a2 / d;
            let ds_da2 = a1 / d;
            let ds_db1 = -s / b1;
            let ds_db2 = -s / b2;
            let ds_dvx = ds_db2;
            let ds_dcxy = 2.0 * ds_da2;
            d_mx[i] = ds_da1 * 2.0 * mu_y + ds_db1 * 2.0 * mu_x
                + ds_dvx * (-2.0 * mu_x)
                + ds_dcxy * (-mu_y);
            d_mxx[i] = ds_dvx;
            d_mxy[i] = ds_dcxy;
        }
        value += sum_s / nwin;

        let s_mx = scatter2(&d_mx, ww, wh, &kernel);
        let s_mxx = scatter2(&d_mxx, ww, wh, &kernel);
        let s_mxy = scatter2(&d_mxy, ww, wh, &kernel);
        let gdata = grad.data_mut();
        for p in 0..w * h {
            let g = grad_scale * (s_mx[p] + 2.0 * x[p] * s_mxx[p] + y[p] * s_mxy[p]);
            gdata[3 * p + ch] = g;
        }
    }
    Ok((value / 3.0, grad))
}

/// `(1 - lambda) * L1 + lambda * (1 - SSIM) / 2` with pixel gradient
/// w.r.t. `rendered`. The SSIM term is skipped entirely at `lambda == 0`
/// (and L1 at `lambda == 1`), so those endpoints are exact.
pub fn recon_loss(rendered: &Image, target: &Image, cfg: &LossConfig) -> Result<(f64, Image)> {
    cfg.validate()?;
    if cfg.lambda == 0.0 {
        return l1(rendered, target, cfg.l1_smooth_eps);
    }
    let (sv, sg) = ssim(rendered, target, cfg)?;
    let dssim = (1.0 - sv) / 2.0;
    if cfg.lambda == 1.0 {
        let mut grad = sg;
        grad.scale(-0.5);
        return Ok((dssim, grad));
    }
    let (lv, lg) = l1(rendered, target, cfg.l1_smooth_eps)?;
    let value = (1.0 - cfg.lambda) * lv + cfg.lambda * dssim;
    let mut grad = lg;
    let w1 = 1.0 - cfg.lambda;
    let w2 = -0.5 * cfg.lambda;
    for (g, s) in grad.data_mut().iter_mut().zip(sg.data()) {
        *g = w1 * *g + w2 * s;
    }
    Ok((value, grad))
}

/// Result of the two-render objective.
#[derive(Debug, Clone)]
pub struct MgsLoss {
    /// `prefix_loss + gamma * full_loss`.
    pub total: f64,
    pub prefix_loss: f64,
    pub full_loss: f64,
    /// Pixel gradient of `total` w.r.t. the prefix render.
    pub prefix_grad: Image,
    /// Pixel gradient of `total` w.r.t. the full render (already scaled by gamma).
    pub full_grad: Image,
}

/// Two-render objective: reconstruction loss of the prefix render plus
/// `gamma` times the reconstruction loss of the full render.
pub fn mgs_loss(
    prefix_img: &Image,
    full_img: &Image,
    target: &Image,
    cfg: &LossConfig,
) -> Result<MgsLoss> {
    let (prefix_loss, prefix_grad) = recon_loss(prefix_img, target, cfg)?;
    let (full_loss, mut full_grad) = recon_loss(full_img, target, cfg)?;
    full_grad.scale(cfg.gamma);
    Ok(MgsLoss {
        total: prefix_loss + cfg.gamma * full_loss,
        prefix_loss,
        full_loss,
        prefix_grad,
        full_grad,
    })
}
