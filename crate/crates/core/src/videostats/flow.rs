//! Dense optical flow by polynomial expansion.
//!
//! Each pixel neighbourhood is approximated by a quadratic
//! `f(x) ≈ xᵀAx + bᵀx + c`, fitted by Gaussian-weighted least squares. If the
//! second frame is the first one displaced by `d`, the linear coefficients
//! satisfy `b₂ = b₁ - 2Ad`, so `d` follows from a 2×2 solve once the
//! constraints are pooled over a window. A coarse-to-fine pyramid with a few
//! refinement passes per level extends the capture range beyond the
//! expansion radius.

use nalgebra::{SMatrix, SVector};

use super::frames::GrayFrame;
use crate::error::{Error, Result};

/// Smallest frame side accepted by [`dense_optical_flow`].
pub const MIN_FLOW_SIDE: usize = 16;

/// Tapered weights for the outermost pixels, where the expansion sees
/// replicated borders.
const BORDER_TAPER: [f64; 5] = [0.14, 0.14, 0.4472, 0.4472, 0.4472];

/// Pulls the solution toward the prior where the pooled constraints vanish.
const PRIOR_WEIGHT: f64 = 1e-2;

/// Per-pixel displacement from one frame to the next, in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Horizontal components, row-major.
    pub fn u(&self) -> &[f32] {
        &self.u
    }

    /// Vertical components, row-major.
    pub fn v(&self) -> &[f32] {
        &self.v
    }

    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    /// Mean `(u, v)` over all pixels.
    pub fn mean(&self) -> (f64, f64) {
        let n = self.u.len() as f64;
        let su: f64 = self.u.iter().map(|&x| f64::from(x)).sum();
        let sv: f64 = self.v.iter().map(|&x| f64::from(x)).sum();
        (su / n, sv / n)
    }

    /// `sqrt(u² + v²)` per pixel.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(&u, &v)| f64::from(u).hypot(f64::from(v)))
            .collect()
    }

    /// Population variance of the flow magnitude.
    pub fn magnitude_variance(&self) -> f64 {
        let mags = self.magnitudes();
        let n = mags.len() as f64;
        let mean = mags.iter().sum::<f64>() / n;
        mags.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n
    }
}

/// Tuning knobs for [`dense_optical_flow_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    /// Pyramid levels including the full-resolution one.
    pub levels: usize,
    /// Half-width of the polynomial expansion neighbourhood.
    pub poly_radius: usize,
    /// Standard deviation of the expansion's Gaussian applicability.
    pub poly_sigma: f64,
    /// Side of the square window the constraints are pooled over.
    pub window: usize,
    /// Refinement passes per level.
    pub iterations: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            levels: 3,
            poly_radius: 5,
            poly_sigma: 1.5,
            window: 15,
            iterations: 3,
        }
    }
}

#[derive(Clone, Debug)]
struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    fn from_frame(frame: &GrayFrame) -> Self {
        Plane {
            width: frame.width(),
            height: frame.height(),
            data: frame.pixels().iter().map(|&v| f64::from(v)).collect(),
        }
    }

    fn clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Blur with the 5-tap binomial kernel, then keep every other pixel.
    fn downsample(&self) -> Plane {
        const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let (w, h) = (self.width, self.height);
        let mut rows = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                rows[y * w + x] = (0..5)
                    .map(|k| K[k] * self.clamped(x as isize + k as isize - 2, y as isize))
                    .sum();
            }
        }
        let rows = Plane {
            width: w,
            height: h,
            data: rows,
        };
        let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
        let mut data = vec![0.0; nw * nh];
        for y in 0..nh {
            for x in 0..nw {
                data[y * nw + x] = (0..5)
                    .map(|k| K[k] * rows.clamped(2 * x as isize, 2 * y as isize + k as isize - 2))
                    .sum();
            }
        }
        Plane {
            width: nw,
            height: nh,
            data,
        }
    }
}

/// Quadratic coefficients at one pixel: `[b_x, b_y, a_xx, a_yy, a_xy]`,
/// with `f ≈ c + b_x x + b_y y + a_xx x² + a_yy y² + a_xy xy`.
type Poly = [f64; 5];

struct PolyExpansion {
    radius: usize,
    gauss: Vec<f64>,
    inverse: SMatrix<f64, 6, 6>,
}

impl PolyExpansion {
    fn new(radius: usize, sigma: f64) -> Self {
        let n = radius as isize;
        let gauss: Vec<f64> = (-n..=n)
            .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let mut gram = SMatrix::<f64, 6, 6>::zeros();
        for (iy, dy) in (-n..=n).enumerate() {
            for (ix, dx) in (-n..=n).enumerate() {
                let (x, y) = (dx as f64, dy as f64);
                let basis = SVector::<f64, 6>::from([1.0, x, y, x * x, y * y, x * y]);
                gram += basis * basis.transpose() * (gauss[ix] * gauss[iy]);
            }
        }
        let inverse = gram
            .try_inverse()
            .expect("Gram matrix of the quadratic basis is positive definite");
        PolyExpansion {
            radius,
            gauss,
            inverse,
        }
    }

    fn expand(&self, plane: &Plane) -> Vec<Poly> {
        let (w, h) = (plane.width, plane.height);
        let n = self.radius as isize;
        // vertical moments Σ g(k) k^a f(x, y + k) for a = 0, 1, 2
        let mut vert = vec![[0.0f64; 3]; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut m = [0.0; 3];
                for (i, k) in (-n..=n).enumerate() {
                    let g = self.gauss[i] * plane.clamped(x as isize, y as isize + k);
                    let kf = k as f64;
                    m[0] += g;
                    m[1] += g * kf;
                    m[2] += g * kf * kf;
                }
                vert[y * w + x] = m;
            }
        }
        let vert_at = |x: isize, y: usize| vert[y * w + x.clamp(0, w as isize - 1) as usize];
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                // moments in basis order [1, x, y, x², y², xy]
                let mut m = SVector::<f64, 6>::zeros();
                for (i, k) in (-n..=n).enumerate() {
                    let v = vert_at(x as isize + k, y);
                    let g = self.gauss[i];
                    let kf = k as f64;
                    m[0] += g * v[0];
                    m[1] += g * kf * v[0];
                    m[2] += g * v[1];
                    m[3] += g * kf * kf * v[0];
                    m[4] += g * v[2];
                    m[5] += g * kf * v[1];
                }
                let c = self.inverse * m;
                out.push([c[1], c[2], c[3], c[4], c[5]]);
            }
        }
        out
    }
}

fn sample_poly(polys: &[Poly], w: usize, h: usize, x: f64, y: f64) -> Poly {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let mut out = [0.0; 5];
    let corners = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x1, y0, fx * (1.0 - fy)),
        (x0, y1, (1.0 - fx) * fy),
        (x1, y1, fx * fy),
    ];
    for (cx, cy, wt) in corners {
        let p = &polys[cy * w + cx];
        for k in 0..5 {
            out[k] += wt * p[k];
        }
    }
    out
}

fn edge_weight(i: usize, len: usize) -> f64 {
    let d = i.min(len - 1 - i);
    BORDER_TAPER.get(d).copied().unwrap_or(1.0)
}

/// Pooled normal equations `[g11, g12, g22, h1, h2]` per pixel.
fn constraints(r1: &[Poly], r2: &[Poly], w: usize, h: usize, u: &[f64], v: &[f64]) -> Vec<[f64; 5]> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (du, dv) = (u[i], v[i]);
            let (tx, ty) = (x as f64 + du, y as f64 + dv);
            let inside = tx >= 0.0 && ty >= 0.0 && tx <= (w - 1) as f64 && ty <= (h - 1) as f64;
            if !inside {
                out.push([0.0; 5]);
                continue;
            }
            let p1 = &r1[i];
            let p2 = sample_poly(r2, w, h, tx, ty);
            let a11 = 0.5 * (p1[2] + p2[2]);
            let a22 = 0.5 * (p1[3] + p2[3]);
            let a12 = 0.25 * (p1[4] + p2[4]);
            let db1 = -0.5 * (p2[0] - p1[0]) + a11 * du + a12 * dv;
            let db2 = -0.5 * (p2[1] - p1[1]) + a12 * du + a22 * dv;
            let wt = edge_weight(x, w) * edge_weight(y, h);
            out.push([
                wt * (a11 * a11 + a12 * a12),
                wt * (a12 * (a11 + a22)),
                wt * (a12 * a12 + a22 * a22),
                wt * (a11 * db1 + a12 * db2),
                wt * (a12 * db1 + a22 * db2),
            ]);
        }
    }
    out
}

/// Separable box sum over a `window × window` neighbourhood; pixels outside
/// the frame contribute nothing.
fn box_sum(values: &[[f64; 5]], w: usize, h: usize, window: usize) -> Vec<[f64; 5]> {
    let r = (window / 2) as isize;
    let add = |acc: &mut [f64; 5], v: &[f64; 5]| {
        for k in 0..5 {
            acc[k] += v[k];
        }
    };
    let mut rows = vec![[0.0; 5]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 5];
            for xx in (x as isize - r).max(0)..=(x as isize + r).min(w as isize - 1) {
                add(&mut acc, &values[y * w + xx as usize]);
            }
            rows[y * w + x] = acc;
        }
    }
    let mut out = vec![[0.0; 5]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 5];
            for yy in (y as isize - r).max(0)..=(y as isize + r).min(h as isize - 1) {
                add(&mut acc, &rows[yy as usize * w + x]);
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn refine(r1: &[Poly], r2: &[Poly], w: usize, h: usize, u: &mut [f64], v: &mut [f64], window: usize) {
    let pooled = box_sum(&constraints(r1, r2, w, h, u, v), w, h, window);
    for (i, [g11, g12, g22, h1, h2]) in pooled.into_iter().enumerate() {
        let (g11, g22) = (g11 + PRIOR_WEIGHT, g22 + PRIOR_WEIGHT);
        let (h1, h2) = (h1 + PRIOR_WEIGHT * u[i], h2 + PRIOR_WEIGHT * v[i]);
        let det = g11 * g22 - g12 * g12;
        u[i] = (g22 * h1 - g12 * h2) / det;
        v[i] = (g11 * h2 - g12 * h1) / det;
    }
}

fn upsample(u: &[f64], cw: usize, ch: usize, w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let sx = (x as f64 / 2.0).min((cw - 1) as f64);
            let sy = (y as f64 / 2.0).min((ch - 1) as f64);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(cw - 1), (y0 + 1).min(ch - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let val = u[y0 * cw + x0] * (1.0 - fx) * (1.0 - fy)
                + u[y0 * cw + x1] * fx * (1.0 - fy)
                + u[y1 * cw + x0] * (1.0 - fx) * fy
                + u[y1 * cw + x1] * fx * fy;
            out.push(2.0 * val);
        }
    }
    out
}

fn pyramid(frame: &GrayFrame, levels: usize) -> Vec<Plane> {
    let mut planes = vec![Plane::from_frame(frame)];
    while planes.len() < levels {
        let last = planes.last().expect("non-empty pyramid");
        if last.width.div_ceil(2) < MIN_FLOW_SIDE || last.height.div_ceil(2) < MIN_FLOW_SIDE {
            break;
        }
        planes.push(last.downsample());
    }
    planes
}

/// Dense flow from `a` to `b` with the default parameters.
pub fn dense_optical_flow(a: &GrayFrame, b: &GrayFrame) -> Result<FlowField> {
    dense_optical_flow_with(a, b, &FlowParams::default())
}

pub fn dense_optical_flow_with(a: &GrayFrame, b: &GrayFrame, params: &FlowParams) -> Result<FlowField> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::InvalidInput(format!(
            "flow frames differ in size: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if a.width() < MIN_FLOW_SIDE || a.height() < MIN_FLOW_SIDE {
        return Err(Error::InvalidInput(format!(
            "flow needs frames of at least {MIN_FLOW_SIDE}x{MIN_FLOW_SIDE}, got {}x{}",
            a.width(),
            a.height()
        )));
    }
    if params.levels == 0 || params.window == 0 || params.poly_radius == 0 || params.poly_sigma <= 0.0 {
        return Err(Error::InvalidParam(format!("invalid flow parameters {params:?}")));
    }
    let expansion = PolyExpansion::new(params.poly_radius, params.poly_sigma);
    let pa = pyramid(a, params.levels);
    let pb = pyramid(b, params.levels);

    let coarsest = pa.last().expect("non-empty pyramid");
    let (mut cw, mut ch) = (coarsest.width, coarsest.height);
    let mut u = vec![0.0; cw * ch];
    let mut v = vec![0.0; cw * ch];
    for (level, (la, lb)) in pa.iter().zip(&pb).enumerate().rev() {
        let (w, h) = (la.width, la.height);
        if level + 1 < pa.len() {
            u = upsample(&u, cw, ch, w, h);
            v = upsample(&v, cw, ch, w, h);
        }
        let r1 = expansion.expand(la);
        let r2 = expansion.expand(lb);
        for _ in 0..params.iterations {
            refine(&r1, &r2, w, h, &mut u, &mut v, params.window);
        }
        (cw, ch) = (w, h);
    }
    Ok(FlowField {
        width: a.width(),
        height: a.height(),
        u: u.into_iter().map(|x| x as f32).collect(),
        v: v.into_iter().map(|x| x as f32).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthbench::texture::Texture;

    fn shifted_pair(dx: f64, dy: f64, seed: u64) -> (GrayFrame, GrayFrame) {
        let tex = Texture::new(seed);
        (tex.render(64, 64, 0.0, 0.0), tex.render(64, 64, dx, dy))
    }

    #[test]
    fn identical_frames_have_no_flow() {
        let (a, _) = shifted_pair(0.0, 0.0, 3);
        let flow = dense_optical_flow(&a, &a).unwrap();
        let mean_mag = flow.magnitudes().iter().sum::<f64>() / (64.0 * 64.0);
        assert!(mean_mag <= 0.1, "mean |flow| = {mean_mag}");
    }

    #[test]
    fn recovers_rightward_shift() {
        let (a, b) = shifted_pair(4.0, 0.0, 11);
        let (mu, mv) = dense_optical_flow(&a, &b).unwrap().mean();
        assert!((3.5..=4.5).contains(&mu), "mean u = {mu}");
        assert!((-0.5..=0.5).contains(&mv), "mean v = {mv}");
    }

    #[test]
    fn polynomial_expansion_is_exact_on_quadratics() {
        let frame = GrayFrame::from_fn(32, 32, |x, y| {
            let (x, y) = (x as f32, y as f32);
            10.0 + 0.5 * x - 0.25 * y + 0.03 * x * x + 0.02 * y * y - 0.01 * x * y
        });
        let polys = PolyExpansion::new(5, 1.1).expand(&Plane::from_frame(&frame));
        // local expansion at (16, 16): derivatives of the global quadratic
        let p = polys[16 * 32 + 16];
        let (x, y) = (16.0, 16.0);
        let want = [0.5 + 0.06 * x - 0.01 * y, -0.25 + 0.04 * y - 0.01 * x, 0.03, 0.02, -0.01];
        for (got, want) in p.iter().zip(want) {
            assert!((got - want).abs() < 1e-3, "{p:?}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = GrayFrame::constant(32, 32, 0.0);
        let b = GrayFrame::constant(32, 31, 0.0);
        assert!(matches!(dense_optical_flow(&a, &b), Err(Error::InvalidInput(_))));
        let tiny = GrayFrame::constant(8, 8, 0.0);
        assert!(matches!(dense_optical_flow(&tiny, &tiny), Err(Error::InvalidInput(_))));
    }
}
