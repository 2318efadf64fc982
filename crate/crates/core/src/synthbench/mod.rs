//! Synthetic videos and logit dumps with a planted membership signal, plus
//! the high-precision oracles the test suites compare against.
//!
//! Members' natural-order rows are sharpened by temperature `1/(1+signal)`
//! and their reversed-order rows flattened by temperature `1+signal`;
//! nonmembers keep temperature one in both runs. Both runs of every sample
//! also differ by independent logit noise (`reversal_noise`), so a zero
//! signal gives member and nonmember dumps the same distribution without
//! making every score identical.

#[cfg(feature = "oracle")]
pub mod oracle;
pub mod texture;

use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dumpio::{write_dump, write_manifest, Label, LogitDump, Matrix, SampleManifest, Span, ValueKind};
use crate::entropy::softmax;
use crate::error::{Error, Result};
use crate::videostats::{save_frames, FrameSequence, GrayFrame};

use texture::Texture;

/// Everything that determines a synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthProfile {
    pub n_samples: usize,
    pub vocab_size: usize,
    /// Video-token rows per run.
    pub span_len: usize,
    /// Member sharpening strength; zero plants nothing.
    pub signal: f64,
    pub seed: u64,
    /// Pixels per frame travelled by the moving patch.
    pub motion_amplitude: f64,
    /// Global brightness change per frame.
    pub brightness_drift: f64,
    /// Relative per-sample jitter of motion and drift, in `[0, 1)`.
    pub stats_spread: f64,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// Standard deviation of per-pixel noise.
    pub pixel_noise: f64,
    /// Text rows before and after the video span.
    pub prefix_len: usize,
    pub suffix_len: usize,
    /// Standard deviation of the base logits.
    pub logit_scale: f64,
    /// Standard deviation of the logit noise separating the two runs.
    pub reversal_noise: f64,
    /// Student-t (3 dof) base logits instead of Gaussian.
    pub heavy_tailed: bool,
}

impl Default for SynthProfile {
    fn default() -> Self {
        SynthProfile {
            n_samples: 200,
            vocab_size: 64,
            span_len: 32,
            signal: 1.0,
            seed: 0,
            motion_amplitude: 2.0,
            brightness_drift: 2.0,
            stats_spread: 0.5,
            frames: 16,
            width: 64,
            height: 64,
            pixel_noise: 1.0,
            prefix_len: 4,
            suffix_len: 8,
            logit_scale: 2.0,
            reversal_noise: 0.3,
            heavy_tailed: false,
        }
    }
}

impl SynthProfile {
    /// The zero-signal counterpart of this profile.
    pub fn null(&self) -> Self {
        SynthProfile {
            signal: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParam(format!("synthetic profile: {what}")));
        if self.n_samples == 0 {
            return bad("n_samples must be positive");
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        if self.span_len == 0 {
            return bad("span_len must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("frame dimensions must be positive");
        }
        if self.frames == 0 {
            return bad("frames must be positive");
        }
        if self.vocab_size > u32::MAX as usize {
            return bad("vocab_size exceeds the token id range");
        }
        for (name, v) in [
            ("signal", self.signal),
            ("motion_amplitude", self.motion_amplitude),
            ("brightness_drift", self.brightness_drift),
            ("pixel_noise", self.pixel_noise),
            ("logit_scale", self.logit_scale),
            ("reversal_noise", self.reversal_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.stats_spread) {
            return bad("stats_spread must lie in [0, 1)");
        }
        Ok(())
    }

    /// Even indices are members.
    pub fn label(&self, index: usize) -> Label {
        if index % 2 == 0 {
            Label::Member
        } else {
            Label::Nonmember
        }
    }

    pub fn sample_id(&self, index: usize) -> String {
        format!("synth-{index:05}")
    }

    fn sample_seed(&self, index: usize, stream: u64) -> u64 {
        splitmix64(splitmix64(self.seed ^ splitmix64(index as u64)) ^ stream)
    }
}

/// One round of the SplitMix64 output function.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const VIDEO_STREAM: u64 = 1;
const DUMP_STREAM: u64 = 2;

/// Brightness offset of frame `t`: the drift ramp centred on the middle
/// frame, rounded to whole intensity levels.
pub fn brightness_offset(drift: f64, t: usize, frames: usize) -> f64 {
    (drift * (t as f64 - (frames as f64 - 1.0) / 2.0)).round()
}

/// A static texture with a textured square patch sliding across it.
pub fn gen_synth_video(profile: &SynthProfile, index: usize) -> Result<FrameSequence> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.sample_seed(index, VIDEO_STREAM));
    let background = Texture::new(rng.gen());
    let patch = Texture::with_range(rng.gen(), 128.0, 80.0);
    let jitter = |rng: &mut ChaCha8Rng| 1.0 + profile.stats_spread * rng.gen_range(-1.0..=1.0);
    let speed = profile.motion_amplitude * jitter(&mut rng);
    let drift = profile.brightness_drift * jitter(&mut rng);
    let heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (w, h, t_count) = (profile.width, profile.height, profile.frames);
    let half = (w.min(h) as f64 / 4.0).max(1.0);
    let (cx0, cy0) = (w as f64 / 2.0, h as f64 / 2.0);

    let frames = (0..t_count)
        .map(|t| {
            let travel = speed * (t as f64 - (t_count as f64 - 1.0) / 2.0);
            let (cx, cy) = (cx0 + travel * heading.cos(), cy0 + travel * heading.sin());
            let offset = brightness_offset(drift, t, t_count);
            GrayFrame::from_fn(w, h, |x, y| {
                let (fx, fy) = (x as f64, y as f64);
                let base = if (fx - cx).abs() < half && (fy - cy).abs() < half {
                    patch.value(fx - cx, fy - cy)
                } else {
                    background.value(fx, fy)
                };
                let noise: f64 = if profile.pixel_noise > 0.0 {
                    profile.pixel_noise * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                (base.round() + offset + noise).round().clamp(0.0, 255.0) as f32
            })
        })
        .collect();
    FrameSequence::new(frames)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64, heavy: bool) -> Vec<f64> {
    if heavy {
        let t = StudentT::new(3.0).expect("valid degrees of freedom");
        (0..n).map(|_| scale * t.sample(rng)).collect()
    } else {
        (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
    }
}

/// Logit dump of sample `index`; see the module docs for the planted signal.
pub fn gen_synth_dump(profile: &SynthProfile, index: usize) -> Result<LogitDump> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.sample_seed(index, DUMP_STREAM));
    let v = profile.vocab_size;
    let len = profile.prefix_len + profile.span_len + profile.suffix_len;
    let base = gaussian_matrix(&mut rng, len * v, profile.logit_scale, profile.heavy_tailed);
    let noise = gaussian_matrix(&mut rng, len * v, profile.reversal_noise, false);

    let gain = 1.0 + profile.signal;
    let member = profile.label(index).is_member();

    // token k+1 is drawn from the natural-run distribution of row k, so a
    // member's text is what the model is confident about
    let mut ids = vec![rng.gen_range(0..v as u32)];
    for row in base.chunks_exact(v).take(len - 1) {
        let logits: Vec<f64> = row.iter().map(|&z| if member { z * gain } else { z }).collect();
        let probs = softmax(&logits)?.into_inner();
        let pick = WeightedIndex::new(&probs).expect("softmax weights are valid");
        ids.push(pick.sample(&mut rng) as u32);
    }
    let (natural, reversed): (Vec<f32>, Vec<f32>) = base
        .iter()
        .zip(&noise)
        .map(|(&z, &n)| {
            if member {
                ((z * gain) as f32, ((z + n) / gain) as f32)
            } else {
                (z as f32, (z + n) as f32)
            }
        })
        .unzip();
    let span = Span::new(profile.prefix_len, profile.prefix_len + profile.span_len);
    let dump = LogitDump {
        sample_id: profile.sample_id(index),
        vocab_size: v,
        natural: Matrix::new(len, v, natural)?,
        reversed: Matrix::new(len, v, reversed)?,
        video_span_natural: span,
        video_span_reversed: span,
        target_token_ids_natural: Some(ids.clone()),
        target_token_ids_reversed: Some(ids),
        value_kind: ValueKind::Logits,
        frame_count: profile.frames,
        truncated_top_m: None,
    };
    dump.validate()?;
    Ok(dump)
}

/// Exchanges the two runs of a dump, as if its frame order had been drawn
/// at random instead of known.
pub fn swap_runs(dump: &LogitDump) -> LogitDump {
    LogitDump {
        natural: dump.reversed.clone(),
        reversed: dump.natural.clone(),
        video_span_natural: dump.video_span_reversed,
        video_span_reversed: dump.video_span_natural,
        target_token_ids_natural: dump.target_token_ids_reversed.clone(),
        target_token_ids_reversed: dump.target_token_ids_natural.clone(),
        ..dump.clone()
    }
}

/// Swaps the runs of each dump with probability one half.
pub fn randomize_frame_order(dumps: &[LogitDump], seed: u64) -> Vec<LogitDump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dumps
        .iter()
        .map(|d| if rng.gen_bool(0.5) { swap_runs(d) } else { d.clone() })
        .collect()
}

/// One generated sample.
#[derive(Clone, Debug)]
pub struct SynthSample {
    pub sample_id: String,
    pub label: Label,
    pub frames: FrameSequence,
    pub dump: LogitDump,
}

/// Generates every sample in memory, in index order.
pub fn gen_synth_samples(profile: &SynthProfile) -> Result<Vec<SynthSample>> {
    profile.validate()?;
    (0..profile.n_samples)
        .into_par_iter()
        .map(|i| {
            Ok(SynthSample {
                sample_id: profile.sample_id(i),
                label: profile.label(i),
                frames: gen_synth_video(profile, i)?,
                dump: gen_synth_dump(profile, i)?,
            })
        })
        .collect()
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Writes `dumps/<id>/`, `frames/<id>/` and `manifest.jsonl` under `out`
/// and returns the manifest path.
pub fn write_synth_dataset(profile: &SynthProfile, out: &Path) -> Result<PathBuf> {
    profile.validate()?;
    let records = (0..profile.n_samples)
        .into_par_iter()
        .map(|i| {
            let id = profile.sample_id(i);
            let dump_dir = PathBuf::from("dumps").join(&id);
            let frames_dir = PathBuf::from("frames").join(&id);
            write_dump(&gen_synth_dump(profile, i)?, &out.join(&dump_dir))?;
            save_frames(&gen_synth_video(profile, i)?, &out.join(&frames_dir))?;
            Ok(SampleManifest {
                sample_id: id,
                label: profile.label(i),
                dump_dir,
                frames_dir: Some(frames_dir),
                total_frames: profile.frames,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = out.join(MANIFEST_FILE);
    write_manifest(&manifest, &records)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::videostats::{compute_video_stats, illumination_variation};

    fn small() -> SynthProfile {
        SynthProfile {
            n_samples: 4,
            frames: 8,
            ..SynthProfile::default()
        }
    }

    #[test]
    fn still_video_has_no_motion_or_drift() {
        let p = SynthProfile {
            motion_amplitude: 0.0,
            brightness_drift: 0.0,
            pixel_noise: 0.0,
            ..small()
        };
        let stats = compute_video_stats(&gen_synth_video(&p, 0).unwrap()).unwrap();
        assert!(stats.phi < 1e-3, "{stats:?}");
        assert_eq!(stats.lambda, 0.0);
    }

    #[test]
    fn drift_gives_the_ramp_standard_deviation() {
        let p = SynthProfile {
            motion_amplitude: 0.0,
            brightness_drift: 10.0,
            stats_spread: 0.0,
            pixel_noise: 0.0,
            ..small()
        };
        let lambda = illumination_variation(&gen_synth_video(&p, 3).unwrap()).unwrap();
        // two-pass population variance of 10·(t - 3.5), t = 0..8
        let ramp: Vec<f64> = (0..8).map(|t| 10.0 * (t as f64 - 3.5)).collect();
        let m = ramp.iter().sum::<f64>() / 8.0;
        let var = ramp.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 8.0;
        assert!((lambda - var.sqrt()).abs() < 1e-9, "{lambda} vs {}", var.sqrt());
    }

    #[test]
    fn seeds_change_pixels_but_not_statistics() {
        let p = SynthProfile {
            stats_spread: 0.0,
            motion_amplitude: 0.0,
            ..small()
        };
        let q = SynthProfile { seed: 99, ..p.clone() };
        let (a, b) = (gen_synth_video(&p, 1).unwrap(), gen_synth_video(&q, 1).unwrap());
        assert_ne!(a, b);
        let (sa, sb) = (compute_video_stats(&a).unwrap(), compute_video_stats(&b).unwrap());
        assert!((sa.lambda - sb.lambda).abs() <= 0.1 * sa.lambda, "{sa:?} {sb:?}");
    }

    #[test]
    fn generation_is_deterministic() {
        let p = small();
        assert_eq!(gen_synth_dump(&p, 2).unwrap(), gen_synth_dump(&p, 2).unwrap());
        assert_eq!(gen_synth_video(&p, 2).unwrap(), gen_synth_video(&p, 2).unwrap());
        assert_ne!(gen_synth_dump(&p, 2).unwrap().natural, gen_synth_dump(&p, 3).unwrap().natural);
    }

    #[test]
    fn null_without_noise_has_identical_runs() {
        let p = SynthProfile {
            reversal_noise: 0.0,
            ..small().null()
        };
        for i in 0..4 {
            let d = gen_synth_dump(&p, i).unwrap();
            assert_eq!(d.natural, d.reversed);
        }
    }

    #[test]
    fn swapping_runs_twice_is_identity() {
        let d = gen_synth_dump(&small(), 0).unwrap();
        assert_eq!(swap_runs(&swap_runs(&d)), d);
        assert_eq!(swap_runs(&d).natural, d.reversed);
    }

    #[test]
    fn dataset_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = SynthProfile { n_samples: 3, ..small() };
        let manifest = write_synth_dataset(&p, dir.path()).unwrap();
        let records = crate::dumpio::load_manifest(&manifest).unwrap();
        assert_eq!(records.len(), 3);
        let dump = crate::dumpio::read_dump(&records[1].dump_dir).unwrap();
        assert_eq!(dump, gen_synth_dump(&p, 1).unwrap());
        let frames = crate::videostats::load_all_frames(records[1].frames_dir.as_ref().unwrap()).unwrap();
        assert_eq!(frames, gen_synth_video(&p, 1).unwrap());
    }

    #[test]
    fn profile_validation() {
        assert!(SynthProfile { width: 0, ..small() }.validate().is_err());
        assert!(SynthProfile { signal: -1.0, ..small() }.validate().is_err());
        assert!(SynthProfile { vocab_size: 1, ..small() }.validate().is_err());
        assert!(gen_synth_video(&SynthProfile { height: 0, ..small() }, 0).is_err());
    }
}
