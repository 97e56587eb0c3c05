//! Time and feature masking applied to training inputs.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Masking policy. Widths are upper bounds; each mask draws its width
/// uniformly from `0..=max` and its start uniformly among valid positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub n_time_masks: usize,
    /// Maximum time-mask width in frames. When `time_width_ratio` is set, the
    /// effective bound is `min(max_time_width, ceil(ratio · T))`.
    pub max_time_width: usize,
    pub time_width_ratio: Option<f64>,
    pub n_feat_masks: usize,
    pub max_feat_width: usize,
    pub fill_value: f32,
}

impl Default for AugmentPolicy {
    /// Two time masks up to 20% of the frames and two feature masks up to 2
    /// dimensions (1/8 of a 16-dim input).
    fn default() -> Self {
        AugmentPolicy {
            n_time_masks: 2,
            max_time_width: usize::MAX,
            time_width_ratio: Some(0.2),
            n_feat_masks: 2,
            max_feat_width: 2,
            fill_value: 0.0,
        }
    }
}

impl AugmentPolicy {
    /// A policy that never masks anything.
    pub fn identity() -> Self {
        AugmentPolicy {
            n_time_masks: 0,
            max_time_width: 0,
            time_width_ratio: None,
            n_feat_masks: 0,
            max_feat_width: 0,
            fill_value: 0.0,
        }
    }

    /// Default proportions for a given feature dimension.
    pub fn for_dim(dim: usize) -> Self {
        AugmentPolicy {
            max_feat_width: (dim as f64 / 8.0).round() as usize,
            ..AugmentPolicy::default()
        }
    }

    pub fn is_identity(&self) -> bool {
        (self.n_time_masks == 0 || self.max_time_width == 0) && (self.n_feat_masks == 0 || self.max_feat_width == 0)
    }

    fn time_bound(&self, frames: usize) -> usize {
        let bound = match self.time_width_ratio {
            Some(r) => ((r * frames as f64).ceil() as usize).min(self.max_time_width),
            None => self.max_time_width,
        };
        bound.min(frames)
    }
}

/// Applies the masks in place.
pub fn apply_in_place<R: Rng + ?Sized>(features: &mut Array2<f32>, policy: &AugmentPolicy, rng: &mut R) {
    let (frames, dim) = features.dim();
    let time_bound = policy.time_bound(frames);
    for _ in 0..policy.n_time_masks {
        let width = rng.random_range(0..=time_bound);
        let start = rng.random_range(0..=frames - width);
        features.slice_mut(s![start..start + width, ..]).fill(policy.fill_value);
    }
    let feat_bound = policy.max_feat_width.min(dim);
    for _ in 0..policy.n_feat_masks {
        let width = rng.random_range(0..=feat_bound);
        let start = rng.random_range(0..=dim - width);
        features.slice_mut(s![.., start..start + width]).fill(policy.fill_value);
    }
}

/// Returns a masked copy of `features`; the input is untouched.
pub fn apply<R: Rng + ?Sized>(features: ArrayView2<'_, f32>, policy: &AugmentPolicy, rng: &mut R) -> Array2<f32> {
    let mut out = features.to_owned();
    apply_in_place(&mut out, policy, rng);
    out
}
