//! Brightness and motion-blur corruptions at three severity levels.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::frames::{FrameSequence, GrayFrame};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CorruptionKind {
    Brightness,
    MotionBlur,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Marginal,
    Moderate,
    Severe,
}

/// Intensity offsets for marginal, moderate and severe brightness changes.
pub const BRIGHTNESS_LEVELS: [(Severity, u8); 3] = [
    (Severity::Marginal, 20),
    (Severity::Moderate, 60),
    (Severity::Severe, 100),
];

/// Motion-blur `(kernel length, angle in degrees)` per severity.
pub const MOTION_BLUR_LEVELS: [(Severity, (usize, u32)); 3] = [
    (Severity::Marginal, (10, 5)),
    (Severity::Moderate, (15, 5)),
    (Severity::Severe, (20, 10)),
];

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Marginal, Severity::Moderate, Severity::Severe];

    pub fn brightness_offset(self) -> u8 {
        BRIGHTNESS_LEVELS
            .iter()
            .find(|(s, _)| *s == self)
            .map(|&(_, v)| v)
            .expect("every severity has a brightness level")
    }

    pub fn motion_blur(self) -> (usize, u32) {
        MOTION_BLUR_LEVELS
            .iter()
            .find(|(s, _)| *s == self)
            .map(|&(_, v)| v)
            .expect("every severity has a blur level")
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brightness" => Ok(CorruptionKind::Brightness),
            "motion_blur" | "motion-blur" => Ok(CorruptionKind::MotionBlur),
            other => Err(Error::InvalidParam(format!("unknown corruption kind {other:?}"))),
        }
    }
}

impl FromStr for Severity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "marginal" => Ok(Severity::Marginal),
            "moderate" => Ok(Severity::Moderate),
            "severe" => Ok(Severity::Severe),
            other => Err(Error::InvalidParam(format!("unknown corruption level {other:?}"))),
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::MotionBlur => "motion_blur",
        })
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Marginal => "marginal",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        })
    }
}

/// +1 or -1, drawn from the video's seed.
pub fn brightness_sign(seed: u64) -> f32 {
    if ChaCha8Rng::seed_from_u64(seed).gen_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// Adds `offset` to every pixel, clamping to `[0, 255]`.
pub fn shift_brightness(frames: &FrameSequence, offset: f32) -> FrameSequence {
    map_frames(frames, |f| {
        let data = f.pixels().iter().map(|&v| (v + offset).round().clamp(0.0, 255.0)).collect();
        GrayFrame::new(f.width(), f.height(), data).expect("same dimensions")
    })
}

/// A normalized square kernel holding an anti-aliased line segment.
#[derive(Clone, Debug, PartialEq)]
pub struct BlurKernel {
    size: usize,
    weights: Vec<f64>,
}

impl BlurKernel {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Row-major weights, summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.size + col]
    }
}

/// Line of `length` pixels through the kernel centre, tilted `angle_deg`
/// counterclockwise from horizontal as displayed (image y points down).
pub fn motion_blur_kernel(length: usize, angle_deg: f64) -> Result<BlurKernel> {
    if length == 0 || !angle_deg.is_finite() {
        return Err(Error::InvalidParam(format!(
            "motion blur needs a positive length and finite angle, got ({length}, {angle_deg})"
        )));
    }
    let centre = (length as f64 - 1.0) / 2.0;
    let (s, c) = angle_deg.to_radians().sin_cos();
    let mut weights = Vec::with_capacity(length * length);
    for row in 0..length {
        for col in 0..length {
            let (dx, dy) = (col as f64 - centre, row as f64 - centre);
            let along = dx * c - dy * s;
            let across = dx * s + dy * c;
            let w = if along.abs() <= centre + 0.5 {
                (1.0 - across.abs()).max(0.0)
            } else {
                0.0
            };
            weights.push(w);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(BlurKernel {
        size: length,
        weights,
    })
}

fn convolve(frame: &GrayFrame, kernel: &BlurKernel) -> GrayFrame {
    let (w, h) = (frame.width() as isize, frame.height() as isize);
    let offset = (kernel.size as isize - 1) / 2;
    let taps: Vec<(isize, isize, f64)> = (0..kernel.size)
        .flat_map(|r| (0..kernel.size).map(move |c| (r, c)))
        .filter_map(|(r, c)| {
            let wt = kernel.get(r, c);
            (wt > 0.0).then_some((c as isize - offset, r as isize - offset, wt))
        })
        .collect();
    let pixels = frame.pixels();
    GrayFrame::from_fn(frame.width(), frame.height(), |x, y| {
        let acc: f64 = taps
            .iter()
            .map(|&(dx, dy, wt)| {
                let sx = (x as isize + dx).clamp(0, w - 1) as usize;
                let sy = (y as isize + dy).clamp(0, h - 1) as usize;
                wt * f64::from(pixels[sy * w as usize + sx])
            })
            .sum();
        acc.round().clamp(0.0, 255.0) as f32
    })
}

pub fn motion_blur(frames: &FrameSequence, length: usize, angle_deg: f64) -> Result<FrameSequence> {
    let kernel = motion_blur_kernel(length, angle_deg)?;
    Ok(map_frames(frames, |f| convolve(f, &kernel)))
}

fn map_frames(frames: &FrameSequence, f: impl Fn(&GrayFrame) -> GrayFrame) -> FrameSequence {
    FrameSequence::new(frames.frames().iter().map(f).collect()).expect("corruption keeps frame sizes")
}

/// Applies a corruption at the given level. Brightness moves every frame of
/// the video in the same direction, chosen by `seed`.
pub fn corrupt_frames(
    frames: &FrameSequence,
    kind: CorruptionKind,
    level: Severity,
    seed: u64,
) -> Result<FrameSequence> {
    match kind {
        CorruptionKind::Brightness => {
            let offset = brightness_sign(seed) * f32::from(level.brightness_offset());
            Ok(shift_brightness(frames, offset))
        }
        CorruptionKind::MotionBlur => {
            let (length, angle) = level.motion_blur();
            motion_blur(frames, length, f64::from(angle))
        }
    }
}
