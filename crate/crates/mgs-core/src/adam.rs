//! Adam with bias correction and per-parameter-group learning rates.
//!
//! Moment buffers are laid out per splat, aligned with model storage order,
//! and must be permuted together with the splats on reorder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{GradientBuffer, SplatGrad};
use crate::splat::SplatModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Learning rate per parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    pub mu: f64,
    pub log_scale: f64,
    pub theta: f64,
    pub opacity_raw: f64,
    pub color_raw: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            mu: 2e-3,
            log_scale: 5e-3,
            theta: 1e-3,
            opacity_raw: 5e-2,
            color_raw: 2.5e-2,
        }
    }
}

impl LearningRates {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mu,
            self.log_scale,
            self.theta,
            self.opacity_raw,
            self.color_raw,
        ];
        if all.iter().any(|lr| !(lr.is_finite() && *lr > 0.0)) {
            return Err(Error::InvalidConfig(
                "all learning rates must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Uniformly scaled copy; `scale(0.0)` freezes every group.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mu: self.mu * factor,
            log_scale: self.log_scale * factor,
            theta: self.theta * factor,
            opacity_raw: self.opacity_raw * factor,
            color_raw: self.color_raw * factor,
        }
    }
}

/// First/second moment estimates per splat plus the shared step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<SplatGrad>,
    pub v: Vec<SplatGrad>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![SplatGrad::ZERO; n],
            v: vec![SplatGrad::ZERO; n],
            t: 0,
        }
    }

    /// Applies a reorder permutation so moments stay aligned with splats.
    pub fn permute(&mut self, perm: &[usize]) {
        crate::ordering::permute(&mut self.m, perm);
        crate::ordering::permute(&mut self.v, perm);
    }

    /// Resets the moments of one splat (used after relocation).
    pub fn zero_entry(&mut self, index: usize) {
        self.m[index] = SplatGrad::ZERO;
        self.v[index] = SplatGrad::ZERO;
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn update_scalar(
    param: &mut f64,
    grad: f64,
    m: &mut f64,
    v: &mut f64,
    lr: f64,
    p: &AdamParams,
    bias1: f64,
    bias2: f64,
) {
    *m = p.beta1 * *m + (1.0 - p.beta1) * grad;
    *v = p.beta2 * *v + (1.0 - p.beta2) * grad * grad;
    let m_hat = *m / bias1;
    let v_hat = *v / bias2;
    *param -= lr * m_hat / (v_hat.sqrt() + p.epsilon);
}

/// One optimizer step over all splats. Depth and id are never touched.
pub fn adam_update(
    model: &mut SplatModel,
    grads: &GradientBuffer,
    state: &mut AdamState,
    lrs: &LearningRates,
    params: &AdamParams,
) -> Result<()> {
    if grads.len() != model.len() || state.m.len() != model.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} gradient/state rows", model.len()),
            actual: format!("{} / {}", grads.len(), state.m.len()),
        });
    }
    if !grads.is_finite() {
        return Err(Error::TrainingDiverged { step: state.t });
    }
    state.t += 1;
    let bias1 = 1.0 - params.beta1.powi(state.t as i32);
    let bias2 = 1.0 - params.beta2.powi(state.t as i32);
    for ((splat, g), (m, v)) in model
        .splats
        .iter_mut()
        .zip(&grads.entries)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for axis in 0..2 {
            update_scalar(
                &mut splat.mu[axis],
                g.d_mu[axis],
                &mut m.d_mu[axis],
                &mut v.d_mu[axis],
                lrs.mu,
                params,
                bias1,
                bias2,
            );
            update_scalar(
                &mut splat.log_scale[axis],
                g.d_log_scale[axis],
                &mut m.d_log_scale[axis],
                &mut v.d_log_scale[axis],
                lrs.log_scale,
                params,
                bias1,
                bias2,
            );
        }
        update_scalar(
            &mut splat.theta,
            g.d_theta,
            &mut m.d_theta,
            &mut v.d_theta,
            lrs.theta,
            params,
            bias1,
            bias2,
        );
        update_scalar(
            &mut splat.opacity_raw,
            g.d_opacity_raw,
            &mut m.d_opacity_raw,
            &mut v.d_opacity_raw,
            lrs.opacity_raw,
            params,
            bias1,
            bias2,
        );
        for ch in 0..3 {
            update_scalar(
                &mut splat.color_raw[ch],
                g.d_color_raw[ch],
                &mut m.d_color_raw[ch],
                &mut v.d_color_raw[ch],
                lrs.color_raw,
                params,
                bias1,
                bias2,
            );
        }
    }
    Ok(())
}
