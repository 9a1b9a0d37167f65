//! Importance scoring and dynamic reordering.
//!
//! Scores are computed on effective (activated) parameters. Sorting a model
//! rearranges storage so that scores run non-increasing (descending
//! direction) or non-decreasing (ascending) along storage order; ties keep
//! their previous relative order, which makes reordering idempotent and
//! deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splat::SplatModel;

/// Per-splat statistic used as the importance score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Effective opacity.
    Opacity,
    /// Covariance ellipse area, `pi * s1 * s2`.
    Area,
    /// Squared norm of the effective RGB color.
    ColorEnergy,
    /// Population variance of the three effective channel values.
    ColorVariance,
    /// Insertion order: lowest id first. Direction is ignored.
    FixedAppend,
    /// Reverse insertion order: highest id first. Direction is ignored.
    FixedPrepend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Descending,
    Ascending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingCriterion {
    pub kind: ScoreKind,
    pub direction: Direction,
}

impl Default for OrderingCriterion {
    fn default() -> Self {
        Self {
            kind: ScoreKind::Opacity,
            direction: Direction::Descending,
        }
    }
}

impl OrderingCriterion {
    pub fn new(kind: ScoreKind, direction: Direction) -> Self {
        Self { kind, direction }
    }

    /// Short label, e.g. `opacity_desc` or `fixed_append`.
    pub fn label(&self) -> String {
        let kind = match self.kind {
            ScoreKind::Opacity => "opacity",
            ScoreKind::Area => "area",
            ScoreKind::ColorEnergy => "color_energy",
            ScoreKind::ColorVariance => "color_variance",
            ScoreKind::FixedAppend => return "fixed_append".into(),
            ScoreKind::FixedPrepend => return "fixed_prepend".into(),
        };
        let dir = match self.direction {
            Direction::Descending => "desc",
            Direction::Ascending => "asc",
        };
        format!("{kind}_{dir}")
    }

    /// Parses labels like `opacity:desc`, `area:asc`, `fixed_append`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind_s, dir_s) = match s.split_once(':') {
            Some((k, d)) => (k.trim(), Some(d.trim())),
            None => (s.trim(), None),
        };
        let kind = match kind_s {
            "opacity" => ScoreKind::Opacity,
            "area" => ScoreKind::Area,
            "color_energy" => ScoreKind::ColorEnergy,
            "color_variance" => ScoreKind::ColorVariance,
            "fixed_append" => ScoreKind::FixedAppend,
            "fixed_prepend" => ScoreKind::FixedPrepend,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown ordering criterion {other:?}"
                )))
            }
        };
        let direction = match dir_s {
            None | Some("desc") | Some("descending") => Direction::Descending,
            Some("asc") | Some("ascending") => Direction::Ascending,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "unknown ordering direction {other:?}"
                )))
            }
        };
        Ok(Self { kind, direction })
    }
}

/// Importance score per splat, aligned with storage order.
///
/// For the fixed insertion kinds the score is the signed id (`-id` for
/// append, `+id` for prepend) so that a descending sort yields the fixed
/// order regardless of the configured direction.
pub fn importance(model: &SplatModel, criterion: OrderingCriterion) -> Vec<f64> {
    model
        .splats
        .iter()
        .map(|s| match criterion.kind {
            ScoreKind::Opacity => s.opacity(),
            ScoreKind::Area => {
                let [s1, s2] = s.scales();
                std::f64::consts::PI * s1 * s2
            }
            ScoreKind::ColorEnergy => {
                let c = s.color();
                c[0] * c[0] + c[1] * c[1] + c[2] * c[2]
            }
            ScoreKind::ColorVariance => {
                let c = s.color();
                let mean = (c[0] + c[1] + c[2]) / 3.0;
                ((c[0] - mean).powi(2) + (c[1] - mean).powi(2) + (c[2] - mean).powi(2)) / 3.0
            }
            ScoreKind::FixedAppend => -(s.id as f64),
            ScoreKind::FixedPrepend => s.id as f64,
        })
        .collect()
}

/// Sorts storage by importance and returns the applied permutation:
/// `perm[new_index] = old_index`. Attached optimizer state must be permuted
/// with the same permutation to stay aligned.
pub fn reorder(model: &mut SplatModel, criterion: OrderingCriterion) -> Result<Vec<usize>> {
    let scores = importance(model, criterion);
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "non-finite importance score for splat {}",
            model.splats[i].id
        )));
    }
    let descending = match criterion.kind {
        ScoreKind::FixedAppend | ScoreKind::FixedPrepend => true,
        _ => criterion.direction == Direction::Descending,
    };
    let mut perm: Vec<usize> = (0..model.splats.len()).collect();
    // Stable sort: ties keep their previous storage order.
    if descending {
        perm.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    } else {
        perm.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    }
    model.splats = perm.iter().map(|&i| model.splats[i]).collect();
    model.criterion = criterion;
    Ok(perm)
}

/// Applies a permutation returned by [`reorder`] to any per-splat buffer.
pub fn permute<T: Copy>(buffer: &mut Vec<T>, perm: &[usize]) {
    debug_assert_eq!(buffer.len(), perm.len());
    *buffer = perm.iter().map(|&i| buffer[i]).collect();
}
