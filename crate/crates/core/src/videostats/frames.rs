use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage};

use crate::error::{Error, Result};

/// A single grayscale frame with intensities on the 0–255 scale.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{width}x{height} frame needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite pixel intensity".into()));
        }
        Ok(GrayFrame {
            width,
            height,
            data,
        })
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayFrame {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len() as f64
    }

    /// Rounds and clamps to 8-bit.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_raw(self.width as u32, self.height as u32, self.to_u8())
            .expect("buffer length matches dimensions")
    }
}

/// An ordered run of equally sized grayscale frames.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameSequence {
    frames: Vec<GrayFrame>,
}

impl FrameSequence {
    pub fn new(frames: Vec<GrayFrame>) -> Result<Self> {
        if let Some(first) = frames.first() {
            let (w, h) = (first.width, first.height);
            if let Some(bad) = frames.iter().find(|f| f.width != w || f.height != h) {
                return Err(Error::InvalidInput(format!(
                    "frame size {}x{} differs from {w}x{h}",
                    bad.width, bad.height
                )));
            }
        }
        Ok(FrameSequence { frames })
    }

    pub fn frames(&self) -> &[GrayFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dimensions(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width, f.height))
    }

    /// The frames at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let frames = indices
            .iter()
            .map(|&i| {
                self.frames.get(i).cloned().ok_or_else(|| {
                    Error::InvalidInput(format!("frame index {i} out of range for {}", self.len()))
                })
            })
            .collect::<Result<_>>()?;
        Ok(FrameSequence { frames })
    }

    pub fn into_frames(self) -> Vec<GrayFrame> {
        self.frames
    }
}

/// Uniformly spaced frame indices: `round(i (N-1) / (T-1))` for `i < T`, or
/// every frame when `T ≥ N`.
pub fn sample_frame_indices(total_frames: usize, target: usize) -> Result<Vec<usize>> {
    if total_frames == 0 {
        return Err(Error::EmptyVideo);
    }
    if target == 0 {
        return Err(Error::InvalidParam("frame target must be at least 1".into()));
    }
    if target >= total_frames {
        return Ok((0..total_frames).collect());
    }
    if target == 1 {
        return Ok(vec![0]);
    }
    // exact integer rounding, halves up: floating point misplaces ties like 21·34/28
    let (span, gaps) = (total_frames - 1, target - 1);
    Ok((0..target).map(|i| (2 * i * span + gaps) / (2 * gaps)).collect())
}

/// BT.601 luma of an interleaved 8-bit RGB buffer, rounded to integers.
pub fn to_grayscale(pixels: &[u8], width: usize, height: usize, channels: usize) -> Result<GrayFrame> {
    if channels != 3 {
        return Err(Error::InvalidInput(format!(
            "expected 3 colour channels, got {channels}"
        )));
    }
    if pixels.len() != width * height * 3 {
        return Err(Error::InvalidInput(format!(
            "{width}x{height} RGB frame needs {} bytes, got {}",
            width * height * 3,
            pixels.len()
        )));
    }
    let data = pixels
        .chunks_exact(3)
        .map(|c| {
            let y = 0.299 * f64::from(c[0]) + 0.587 * f64::from(c[1]) + 0.114 * f64::from(c[2]);
            y.round().clamp(0.0, 255.0) as f32
        })
        .collect();
    GrayFrame::new(width, height, data)
}

fn image_to_gray(img: DynamicImage) -> Result<GrayFrame> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => {
            GrayFrame::new(w, h, g.into_raw().into_iter().map(f32::from).collect())
        }
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            let g = img.to_luma8();
            GrayFrame::new(w, h, g.into_raw().into_iter().map(f32::from).collect())
        }
        other => to_grayscale(other.to_rgb8().as_raw(), w, h, 3),
    }
}

/// Reads one PNG or PPM/PGM frame as grayscale.
pub fn load_frame(path: &Path) -> Result<GrayFrame> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    image_to_gray(img)
}

pub fn save_frame(frame: &GrayFrame, path: &Path) -> Result<()> {
    frame.to_image().save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn is_frame_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "ppm" | "pgm" | "pnm")
    )
}

/// Image files of a frame directory in lexicographic order.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_frame_file(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads the `target` uniformly sampled frames of a frame directory.
pub fn load_sampled_frames(dir: &Path, target: usize) -> Result<FrameSequence> {
    let files = list_frame_files(dir)?;
    let indices = sample_frame_indices(files.len(), target)?;
    let frames = indices
        .iter()
        .map(|&i| load_frame(&files[i]))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames)
}

/// Loads every frame of a directory.
pub fn load_all_frames(dir: &Path) -> Result<FrameSequence> {
    let frames = list_frame_files(dir)?
        .iter()
        .map(|p| load_frame(p))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames)
}

/// Writes frames as `frame_00000.png`, `frame_00001.png`, …
pub fn save_frames(frames: &FrameSequence, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in frames.frames().iter().enumerate() {
        save_frame(frame, &dir.join(format!("frame_{i:05}.png")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// numpy-style linspace followed by round-half-away-from-zero, in exact
    /// integer arithmetic.
    /// Nearest integer to `i(n-1)/(t-1)` by exhaustive search, ties to the larger.
    fn linspace_oracle(n: usize, t: usize) -> Vec<usize> {
        (0..t)
            .map(|i| {
                let target = (i * (n - 1)) as i64;
                let gaps = (t - 1) as i64;
                (0..n as i64)
                    .min_by_key(|&k| ((k * gaps - target).abs(), -k))
                    .unwrap() as usize
            })
            .collect()
    }

    #[test]
    fn frame_index_examples() {
        assert_eq!(sample_frame_indices(10, 10).unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(sample_frame_indices(9, 3).unwrap(), vec![0, 4, 8]);
        assert_eq!(sample_frame_indices(30, 8).unwrap(), linspace_oracle(30, 8));
        assert_eq!(sample_frame_indices(5, 1).unwrap(), vec![0]);
        // 21·34/28 = 25.5 exactly
        assert_eq!(sample_frame_indices(35, 29).unwrap()[21], 26);
        assert_eq!(sample_frame_indices(4, 16).unwrap(), vec![0, 1, 2, 3]);
        assert!(matches!(sample_frame_indices(0, 3), Err(Error::EmptyVideo)));
    }

    #[test]
    fn frame_indices_match_oracle_exhaustively() {
        for n in 1..120 {
            for t in 1..40 {
                let got = sample_frame_indices(n, t).unwrap();
                if t >= n {
                    assert_eq!(got, (0..n).collect::<Vec<_>>());
                    continue;
                }
                let want = if t == 1 { vec![0] } else { linspace_oracle(n, t) };
                assert_eq!(got, want, "n={n} t={t}");
                assert_eq!(got[0], 0);
                assert_eq!(*got.last().unwrap(), if t == 1 { 0 } else { n - 1 });
                assert!(got.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn grayscale_examples() {
        let white = to_grayscale(&[255, 255, 255], 1, 1, 3).unwrap();
        assert_eq!(white.pixels(), &[255.0]);
        let black = to_grayscale(&[0, 0, 0], 1, 1, 3).unwrap();
        assert_eq!(black.pixels(), &[0.0]);
        // 0.299*100 + 0.587*150 + 0.114*200 = 140.75
        let mixed = to_grayscale(&[100, 150, 200], 1, 1, 3).unwrap();
        assert_eq!(mixed.pixels(), &[141.0]);
        assert!(matches!(to_grayscale(&[0; 4], 1, 1, 4), Err(Error::InvalidInput(_))));
        assert!(matches!(to_grayscale(&[0; 5], 1, 2, 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sequence_rejects_mixed_sizes() {
        let err = FrameSequence::new(vec![GrayFrame::constant(4, 4, 0.0), GrayFrame::constant(4, 5, 0.0)]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn png_round_trip_and_ordering() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<_> = (0..3)
            .map(|i| GrayFrame::from_fn(5, 4, |x, y| (x * 10 + y + i * 50) as f32))
            .collect();
        let seq = FrameSequence::new(frames).unwrap();
        save_frames(&seq, dir.path()).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        assert_eq!(load_all_frames(dir.path()).unwrap(), seq);
        let sampled = load_sampled_frames(dir.path(), 2).unwrap();
        assert_eq!(sampled.frames(), &[seq.frames()[0].clone(), seq.frames()[2].clone()]);
    }

    #[test]
    fn rgb_ppm_is_converted_with_luma_weights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ppm");
        let img = image::RgbImage::from_raw(1, 1, vec![100, 150, 200]).unwrap();
        img.save(&path).unwrap();
        assert_eq!(load_frame(&path).unwrap().pixels(), &[141.0]);
    }
}
