//! Per-video motion and illumination statistics and the entropy parameters
//! derived from them.
//!
//! Statistics are computed in three phases: a raw pass per video
//! ([`compute_video_stats`], independent across videos), one dataset-wide
//! normalization ([`normalize_dataset_stats`]), then per-video adaptation of
//! `(q, r)` ([`adapt_params`]).

mod corrupt;
mod flow;
mod frames;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corrupt::{
    brightness_sign, corrupt_frames, motion_blur, motion_blur_kernel, shift_brightness, BlurKernel,
    CorruptionKind, Severity, BRIGHTNESS_LEVELS, MOTION_BLUR_LEVELS,
};
pub use flow::{dense_optical_flow, dense_optical_flow_with, FlowField, FlowParams, MIN_FLOW_SIDE};
pub use frames::{
    list_frame_files, load_all_frames, load_frame, load_sampled_frames, sample_frame_indices,
    save_frame, save_frames, to_grayscale, FrameSequence, GrayFrame,
};

/// Default range of the order parameter: `q ∈ [1, 1 + β₁]`.
pub const DEFAULT_BETA1: f64 = 1.0;
/// Default range of the deformation parameter: `r ∈ [1, 1 + β₂]`.
pub const DEFAULT_BETA2: f64 = 0.1;

/// Population standard deviation of the per-frame mean intensity.
pub fn illumination_variation(frames: &FrameSequence) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptyVideo);
    }
    let means: Vec<f64> = frames.frames().iter().map(GrayFrame::mean).collect();
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    Ok((means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Mean over consecutive frame pairs of the pixel variance of flow magnitude.
pub fn motion_complexity(frames: &FrameSequence) -> Result<f64> {
    motion_complexity_with(frames, &FlowParams::default())
}

pub fn motion_complexity_with(frames: &FrameSequence, params: &FlowParams) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::InsufficientFrames {
            needed: 2,
            got: frames.len(),
        });
    }
    let pairs = frames.frames().windows(2);
    let n = pairs.len() as f64;
    let mut total = 0.0;
    for pair in pairs {
        total += dense_optical_flow_with(&pair[0], &pair[1], params)?.magnitude_variance();
    }
    Ok(total / n)
}

/// Unnormalized statistics of one video.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawVideoStats {
    /// Motion complexity, squared pixels.
    pub phi: f64,
    /// Illumination variation, intensity units.
    pub lambda: f64,
}

pub fn compute_video_stats(frames: &FrameSequence) -> Result<RawVideoStats> {
    Ok(RawVideoStats {
        phi: motion_complexity(frames)?,
        lambda: illumination_variation(frames)?,
    })
}

/// Statistics of one video together with its adapted entropy parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoStatistics {
    pub phi: f64,
    pub lambda: f64,
    pub phi_hat: f64,
    pub lambda_hat: f64,
    pub q: f64,
    pub r: f64,
}

/// Per-sample statistics of a dataset plus the ranges of the normalized
/// statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetStatsIndex {
    samples: BTreeMap<String, VideoStatistics>,
    phi_hat_range: (f64, f64),
    lambda_hat_range: (f64, f64),
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Min–max scaled values; `0.5` everywhere when the spread is zero.
fn min_max(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = range(values.iter().copied());
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.5; values.len()]
    }
}

fn check_betas(beta1: f64, beta2: f64) -> Result<()> {
    if !(beta1.is_finite() && beta1 > 0.0 && beta2.is_finite() && beta2 > 0.0) {
        return Err(Error::InvalidParam(format!(
            "beta1 and beta2 must be positive, got {beta1} and {beta2}"
        )));
    }
    Ok(())
}

/// Normalizes raw statistics over the dataset and adapts `(q, r)` with the
/// default betas.
pub fn normalize_dataset_stats(raw: &[(String, RawVideoStats)]) -> Result<DatasetStatsIndex> {
    normalize_dataset_stats_with(raw, DEFAULT_BETA1, DEFAULT_BETA2)
}

pub fn normalize_dataset_stats_with(
    raw: &[(String, RawVideoStats)],
    beta1: f64,
    beta2: f64,
) -> Result<DatasetStatsIndex> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_betas(beta1, beta2)?;
    if let Some((id, s)) = raw
        .iter()
        .find(|(_, s)| !(s.phi.is_finite() && s.lambda.is_finite() && s.phi >= 0.0 && s.lambda >= 0.0))
    {
        return Err(Error::InvalidInput(format!("sample {id}: invalid raw statistics {s:?}")));
    }
    let phi: Vec<f64> = raw.iter().map(|(_, s)| s.phi).collect();
    let lambda: Vec<f64> = raw.iter().map(|(_, s)| s.lambda).collect();
    let (phi_hat, lambda_hat) = (min_max(&phi), min_max(&lambda));

    let mut samples = BTreeMap::new();
    for (i, (id, s)) in raw.iter().enumerate() {
        let stats = VideoStatistics {
            phi: s.phi,
            lambda: s.lambda,
            phi_hat: phi_hat[i],
            lambda_hat: lambda_hat[i],
            q: f64::NAN,
            r: f64::NAN,
        };
        if samples.insert(id.clone(), stats).is_some() {
            return Err(Error::InvalidInput(format!("duplicate sample id {id}")));
        }
    }
    let index = DatasetStatsIndex {
        samples,
        phi_hat_range: range(phi_hat.iter().copied()),
        lambda_hat_range: range(lambda_hat.iter().copied()),
    };
    index.with_betas(beta1, beta2)
}

impl DatasetStatsIndex {
    /// Rebuilds an index from stored per-sample statistics, keeping their
    /// `q` and `r`.
    pub fn from_samples(samples: BTreeMap<String, VideoStatistics>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let phi_hat_range = range(samples.values().map(|s| s.phi_hat));
        let lambda_hat_range = range(samples.values().map(|s| s.lambda_hat));
        Ok(DatasetStatsIndex {
            samples,
            phi_hat_range,
            lambda_hat_range,
        })
    }

    /// Recomputes every `(q, r)` with new betas.
    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Result<Self> {
        check_betas(beta1, beta2)?;
        let snapshot = self.clone();
        for stats in self.samples.values_mut() {
            let (q, r) = adapt_params(stats.phi_hat, stats.lambda_hat, &snapshot, beta1, beta2)?;
            stats.q = q;
            stats.r = r;
        }
        Ok(self)
    }

    pub fn get(&self, sample_id: &str) -> Option<&VideoStatistics> {
        self.samples.get(sample_id)
    }

    pub fn samples(&self) -> &BTreeMap<String, VideoStatistics> {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn phi_hat_range(&self) -> (f64, f64) {
        self.phi_hat_range
    }

    pub fn lambda_hat_range(&self) -> (f64, f64) {
        self.lambda_hat_range
    }

    /// Writes `{sample_id: {phi, lambda, phi_hat, lambda_hat, q, r}}` as
    /// pretty JSON with sorted keys.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let value = serde_json::to_value(&self.samples).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let mut text = serde_json::to_string_pretty(&value).expect("JSON values always serialize");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let samples = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_samples(samples)
    }
}

/// `q = 1 + β₁ (max φ̂ - φ̂ᵢ)/(max φ̂ - min φ̂)` and
/// `r = 1 + β₂ (λ̂ᵢ - min λ̂)/(max λ̂ - min λ̂)`; a zero spread uses the
/// midpoint fraction 0.5.
pub fn adapt_params(
    phi_hat: f64,
    lambda_hat: f64,
    index: &DatasetStatsIndex,
    beta1: f64,
    beta2: f64,
) -> Result<(f64, f64)> {
    check_betas(beta1, beta2)?;
    let fraction = |num: f64, (lo, hi): (f64, f64)| {
        if hi > lo {
            (num / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    };
    let (phi_lo, phi_hi) = index.phi_hat_range;
    let (lam_lo, lam_hi) = index.lambda_hat_range;
    let q = 1.0 + beta1 * fraction(phi_hi - phi_hat, (phi_lo, phi_hi));
    let r = 1.0 + beta2 * fraction(lambda_hat - lam_lo, (lam_lo, lam_hi));
    Ok((q, r))
}
