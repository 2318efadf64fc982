use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::videostats::GrayFrame;

const COMPONENTS: usize = 12;
const MIN_WAVELENGTH: f64 = 8.0;
const MAX_WAVELENGTH: f64 = 48.0;

/// A smooth, non-periodic-looking intensity field built from a seeded sum of
/// plane waves. Continuous everywhere, so sub-pixel translations and
/// rotations of it are exact.
#[derive(Clone, Debug)]
pub struct Texture {
    mean: f64,
    waves: Vec<Wave>,
}

#[derive(Clone, Debug)]
struct Wave {
    amplitude: f64,
    kx: f64,
    ky: f64,
    phase: f64,
}

impl Texture {
    /// Centred on 128 with a peak deviation of at most 70.
    pub fn new(seed: u64) -> Self {
        Self::with_range(seed, 128.0, 70.0)
    }

    pub fn with_range(seed: u64, mean: f64, max_deviation: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<(f64, f64, f64, f64)> = (0..COMPONENTS)
            .map(|_| {
                let weight = rng.gen_range(0.5..1.5);
                let wavelength = (rng.gen_range(MIN_WAVELENGTH.ln()..MAX_WAVELENGTH.ln())).exp();
                let angle = rng.gen_range(0.0..TAU);
                let phase = rng.gen_range(0.0..TAU);
                (weight, wavelength, angle, phase)
            })
            .collect();
        let total: f64 = raw.iter().map(|w| w.0).sum();
        let waves = raw
            .into_iter()
            .map(|(weight, wavelength, angle, phase)| {
                let k = TAU / wavelength;
                Wave {
                    amplitude: max_deviation * weight / total,
                    kx: k * angle.cos(),
                    ky: k * angle.sin(),
                    phase,
                }
            })
            .collect();
        Texture { mean, waves }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.mean
            + self
                .waves
                .iter()
                .map(|w| w.amplitude * (w.kx * x + w.ky * y + w.phase).sin())
                .sum::<f64>()
    }

    /// The texture translated by `(dx, dy)`: pixel `(x, y)` shows `value(x - dx, y - dy)`.
    pub fn render(&self, width: usize, height: usize, dx: f64, dy: f64) -> GrayFrame {
        GrayFrame::from_fn(width, height, |x, y| self.value(x as f64 - dx, y as f64 - dy) as f32)
    }

    /// The texture rotated by `angle` radians about `(cx, cy)`: the source
    /// point `p` lands on `c + R(p - c)` with `R = [[cos, -sin], [sin, cos]]`
    /// acting on `(x, y)` image coordinates.
    pub fn render_rotated(&self, width: usize, height: usize, angle: f64, cx: f64, cy: f64) -> GrayFrame {
        let (s, c) = angle.sin_cos();
        GrayFrame::from_fn(width, height, |x, y| {
            let (px, py) = (x as f64 - cx, y as f64 - cy);
            // inverse rotation maps the output pixel back into the source
            let sx = c * px + s * py + cx;
            let sy = -s * px + c * py + cy;
            self.value(sx, sy) as f32
        })
    }
}
