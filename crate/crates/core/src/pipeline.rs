//! The three batch stages — statistics, scoring, evaluation — over a
//! manifest or over in-memory samples. Samples are processed in parallel on
//! the current rayon pool; outputs keep manifest order.

use std::path::Path;

use rayon::prelude::*;

use crate::attacks::{
    delta_entropy, entropy_sequence, score, AttackSpec, SampleInputs, ScoreRecord,
};
use crate::dumpio::{extract_full_natural, extract_video_slices, read_dump, Label, LogitDump, SampleManifest};
use crate::entropy::EntropyParams;
use crate::error::{Error, Result};
use crate::evalkit::{evaluate_records, Evaluation};
use crate::videostats::{
    compute_video_stats, list_frame_files, load_frame, normalize_dataset_stats_with,
    sample_frame_indices, DatasetStatsIndex, FrameSequence, RawVideoStats, DEFAULT_BETA1, DEFAULT_BETA2,
};

pub const DEFAULT_FRAMES: usize = 16;

/// `(q, r)` used when no statistics are available: the centre of the
/// default adaptation box.
pub const FALLBACK_Q: f64 = 1.0 + DEFAULT_BETA1 / 2.0;
pub const FALLBACK_R: f64 = 1.0 + DEFAULT_BETA2 / 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatsOptions {
    /// Frames sampled per video.
    pub frames: usize,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            frames: DEFAULT_FRAMES,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
        }
    }
}

/// Loads the uniformly sampled frames of a manifest record.
pub fn load_record_frames(record: &SampleManifest, frames: usize) -> Result<FrameSequence> {
    let dir = record.frames_dir.as_ref().ok_or_else(|| {
        Error::InvalidInput("manifest record has no frames_dir".into())
    })?;
    let files = list_frame_files(dir)?;
    if record.total_frames != 0 && record.total_frames != files.len() {
        return Err(Error::InvalidInput(format!(
            "manifest lists {} frames but {} holds {}",
            record.total_frames,
            dir.display(),
            files.len()
        )));
    }
    let picked = sample_frame_indices(files.len(), frames)?
        .into_iter()
        .map(|i| load_frame(&files[i]))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(picked)
}

/// Raw statistics of every video, then one dataset-wide normalization.
pub fn stats_from_frames(
    videos: &[(String, FrameSequence)],
    opts: &StatsOptions,
) -> Result<DatasetStatsIndex> {
    let raw = videos
        .par_iter()
        .map(|(id, frames)| {
            let stats = compute_video_stats(frames).map_err(|e| e.for_sample(id))?;
            Ok((id.clone(), stats))
        })
        .collect::<Result<Vec<(String, RawVideoStats)>>>()?;
    normalize_dataset_stats_with(&raw, opts.beta1, opts.beta2)
}

pub fn compute_dataset_stats(records: &[SampleManifest], opts: &StatsOptions) -> Result<DatasetStatsIndex> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let raw = records
        .par_iter()
        .map(|r| {
            let stats = load_record_frames(r, opts.frames)
                .and_then(|f| compute_video_stats(&f))
                .map_err(|e| e.for_sample(&r.sample_id))?;
            Ok((r.sample_id.clone(), stats))
        })
        .collect::<Result<Vec<_>>>()?;
    normalize_dataset_stats_with(&raw, opts.beta1, opts.beta2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreOptions {
    pub specs: Vec<AttackSpec>,
    /// Score baselines on every natural-run row rather than the video span.
    pub full_span: bool,
}

/// Entropy parameters of a sample: adapted from the index when given.
pub fn sample_params(sample_id: &str, stats: Option<&DatasetStatsIndex>) -> Result<EntropyParams> {
    let (q, r) = match stats {
        None => (FALLBACK_Q, FALLBACK_R),
        Some(index) => {
            let s = index.get(sample_id).ok_or_else(|| {
                Error::InvalidInput(format!("no statistics for sample {sample_id:?}"))
            })?;
            (s.q, s.r)
        }
    };
    EntropyParams::new(q, r)
}

/// Every requested attack on one dump.
pub fn score_dump(dump: &LogitDump, params: &EntropyParams, opts: &ScoreOptions) -> Result<Vec<f64>> {
    let slices = extract_video_slices(dump)?;
    let s_nat = entropy_sequence(&slices.natural.probs, params)?;
    let s_rev = entropy_sequence(&slices.reversed.probs, params)?;
    let delta = delta_entropy(&s_nat, &s_rev)?;
    let baseline = if opts.full_span {
        extract_full_natural(dump)?
    } else {
        slices.natural
    };
    let inputs = SampleInputs {
        delta: &delta,
        baseline_slices: &baseline.probs,
        baseline_targets: baseline.targets.as_deref(),
    };
    opts.specs.iter().map(|spec| score(spec, &inputs)).collect()
}

fn records_for(sample_id: &str, label: Label, specs: &[AttackSpec], scores: Vec<f64>) -> Vec<ScoreRecord> {
    specs
        .iter()
        .zip(scores)
        .map(|(spec, score)| ScoreRecord {
            sample_id: sample_id.to_string(),
            method: spec.method,
            variant: spec.variant,
            score,
            label,
        })
        .collect()
}

/// Scores in-memory dumps; records are grouped by sample in input order.
pub fn score_dumps(
    dumps: &[(LogitDump, Label)],
    stats: Option<&DatasetStatsIndex>,
    opts: &ScoreOptions,
) -> Result<Vec<ScoreRecord>> {
    let per_sample = dumps
        .par_iter()
        .map(|(dump, label)| {
            let id = &dump.sample_id;
            let scores = sample_params(id, stats)
                .and_then(|p| score_dump(dump, &p, opts))
                .map_err(|e| e.for_sample(id))?;
            Ok(records_for(id, *label, &opts.specs, scores))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_sample.concat())
}

/// Reads and scores every dump of a manifest.
pub fn score_manifest(
    records: &[SampleManifest],
    stats: Option<&DatasetStatsIndex>,
    opts: &ScoreOptions,
) -> Result<Vec<ScoreRecord>> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_sample = records
        .par_iter()
        .map(|r| {
            let id = &r.sample_id;
            let scores = read_dump(&r.dump_dir)
                .and_then(|dump| {
                    if dump.sample_id != *id {
                        return Err(Error::InvalidInput(format!(
                            "dump at {} belongs to sample {:?}",
                            r.dump_dir.display(),
                            dump.sample_id
                        )));
                    }
                    score_dump(&dump, &sample_params(id, stats)?, opts)
                })
                .map_err(|e| e.for_sample(id))?;
            Ok(records_for(id, r.label, &opts.specs, scores))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_sample.concat())
}

pub fn evaluate(records: &[ScoreRecord], fpr_caps: &[f64]) -> Result<Vec<Evaluation>> {
    evaluate_records(records, fpr_caps)
}

/// Statistics, scores and evaluation of a manifest in one call.
pub fn run_manifest(
    manifest: &Path,
    stats_opts: &StatsOptions,
    score_opts: &ScoreOptions,
    fpr_caps: &[f64],
) -> Result<(DatasetStatsIndex, Vec<ScoreRecord>, Vec<Evaluation>)> {
    let records = crate::dumpio::load_manifest(manifest)?;
    let stats = compute_dataset_stats(&records, stats_opts)?;
    let scores = score_manifest(&records, Some(&stats), score_opts)?;
    let evals = evaluate(&scores, fpr_caps)?;
    Ok((stats, scores, evals))
}
