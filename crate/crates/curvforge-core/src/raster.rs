//! Binary masks, rasterization of grown trees, and the raster toolbox:
//! morphology, thinning, elastic deformation, field-of-view intersection,
//! crops, flips, and rotations.
//!
//! Masks store one byte per pixel with values 0/1 and persist as 8-bit
//! single-channel PNG (foreground 255). Gray images are 8-bit; color PNG
//! inputs are converted with the Rec.601 luma weights 0.299/0.587/0.114.

use std::io::Cursor;
use std::path::Path;

use image::ImageEncoder;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fsio::write_atomic;
use crate::sca::CurveTree;

/// Raster-level failure: geometry misuse or PNG/file I/O.
#[derive(Debug, Error)]
pub enum RasterError {
    #[error("canvas dimensions must be positive, got {width}x{height}")]
    ZeroCanvas { width: usize, height: usize },
    #[error("dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("crop {out_w}x{out_h} exceeds input {width}x{height}")]
    CropTooLarge {
        out_w: usize,
        out_h: usize,
        width: usize,
        height: usize,
    },
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binary image, row-major, one byte per pixel, values 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Mask {
    /// All-background mask. Panics on zero dimensions (rasterize validates
    /// canvas sizes before construction).
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v as u8;
    }

    /// Number of foreground pixels.
    pub fn fg_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Coordinates of every foreground pixel, row-major.
    pub fn fg_pixels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| a == 0 || b != 0)
    }

    /// Foreground/background inversion.
    pub fn complement(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    /// Circular field of view: foreground inside the centered circle of the
    /// given radius (center ((w-1)/2, (h-1)/2), boundary inclusive).
    pub fn fov_circle(width: usize, height: usize, radius: f64) -> Mask {
        let mut m = Mask::new(width, height);
        let cx = (width as f64 - 1.0) / 2.0;
        let cy = (height as f64 - 1.0) / 2.0;
        for y in 0..height {
            for x in 0..width {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= radius * radius {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    /// SHA-256 (hex) of the raw pixel bytes, independent of PNG encoding.
    pub fn sha256_hex(&self) -> String {
        hex::encode(Sha256::digest(&self.data))
    }

    /// Encode as an 8-bit gray PNG (foreground 255) in memory.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>, RasterError> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
        encode_gray_png(&bytes, self.width, self.height)
    }

    /// Write as PNG atomically.
    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let bytes = self.to_png_bytes()?;
        write_atomic(path, &bytes)?;
        Ok(())
    }

    /// Load a PNG as a mask: gray value >= 128 counts as foreground. Color
    /// inputs are reduced to gray first (Rec.601).
    pub fn load_png(path: &Path) -> Result<Mask, RasterError> {
        let gray = GrayImage::load_png(path)?;
        Ok(Mask {
            width: gray.width,
            height: gray.height,
            data: gray.data.iter().map(|&v| (v >= 128) as u8).collect(),
        })
    }
}

/// 8-bit grayscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Encode as an 8-bit gray PNG in memory.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>, RasterError> {
        encode_gray_png(&self.data, self.width, self.height)
    }

    /// Write as PNG atomically.
    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let bytes = self.to_png_bytes()?;
        write_atomic(path, &bytes)?;
        Ok(())
    }

    /// Load a PNG; color inputs are converted to gray with Rec.601 weights
    /// (0.299 R + 0.587 G + 0.114 B, rounded).
    pub fn load_png(path: &Path) -> Result<GrayImage, RasterError> {
        let bytes = std::fs::read(path)?;
        Self::from_png_bytes(&bytes)
    }

    /// Decode PNG bytes; see [`GrayImage::load_png`].
    pub fn from_png_bytes(bytes: &[u8]) -> Result<GrayImage, RasterError> {
        let img = image::load_from_memory(bytes)?;
        let (width, height) = (img.width() as usize, img.height() as usize);
        let data = match img {
            image::DynamicImage::ImageLuma8(g) => g.into_raw(),
            image::DynamicImage::ImageLumaA8(ga) => {
                ga.pixels().map(|p| p.0[0]).collect()
            }
            other => {
                let rgb = other.to_rgb8();
                rgb.pixels()
                    .map(|p| {
                        let [r, g, b] = p.0;
                        (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round() as u8
                    })
                    .collect()
            }
        };
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }
}

fn encode_gray_png(data: &[u8], width: usize, height: usize) -> Result<Vec<u8>, RasterError> {
    let mut out = Cursor::new(Vec::new());
    image::codecs::png::PngEncoder::new(&mut out).write_image(
        data,
        width as u32,
        height as u32,
        image::ExtendedColorType::L8,
    )?;
    Ok(out.into_inner())
}

/// Morphology footprint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructuringElement {
    /// All offsets with dx^2 + dy^2 <= radius^2. Radius 0 is the identity.
    Disk { radius: u32 },
    /// Centered square footprint; `side` must be odd.
    Square { side: u32 },
}

impl StructuringElement {
    /// Offsets of the footprint relative to its center.
    pub fn offsets(&self) -> Vec<(i32, i32)> {
        match *self {
            StructuringElement::Disk { radius } => {
                let r = radius as i32;
                let mut out = Vec::new();
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx * dx + dy * dy <= r * r {
                            out.push((dx, dy));
                        }
                    }
                }
                out
            }
            StructuringElement::Square { side } => {
                assert!(side % 2 == 1, "square structuring element side must be odd");
                let h = (side / 2) as i32;
                let mut out = Vec::new();
                for dy in -h..=h {
                    for dx in -h..=h {
                        out.push((dx, dy));
                    }
                }
                out
            }
        }
    }
}

/// Parameters of the random smooth warp in [`elastic_transform`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticParams {
    /// Peak displacement scale in pixels.
    pub alpha: f64,
    /// Gaussian smoothing std of the displacement field, in pixels.
    pub sigma: f64,
    /// Seed for the displacement field.
    pub seed: u64,
}

impl Default for ElasticParams {
    fn default() -> Self {
        Self {
            alpha: 8.0,
            sigma: 4.0,
            seed: 0,
        }
    }
}

/// Mirror axis for [`flip`]: `Horizontal` mirrors left-right (x),
/// `Vertical` mirrors top-bottom (y).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipAxis {
    Horizontal,
    Vertical,
}

/// Draw a forest of radius-annotated trees onto a binary canvas.
///
/// Every node is stamped as a filled disk of its rounded radius, and every
/// parent-child edge is swept with disks of the child's rounded radius at
/// sub-pixel steps no longer than 0.5 px (endpoints included). Trees are
/// OR-combined; out-of-canvas pixels are clipped.
pub fn rasterize(forest: &[CurveTree], width: usize, height: usize) -> Result<Mask, RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::ZeroCanvas { width, height });
    }
    let mut mask = Mask::new(width, height);
    for tree in forest {
        for node in &tree.nodes {
            assert!(
                node.radius > 0.0,
                "rasterize requires computed radii (found {})",
                node.radius
            );
            let r = node.radius.round();
            stamp_disk(&mut mask, node.pos.x, node.pos.y, r);
            if let Some(pi) = node.parent {
                let p = tree.nodes[pi].pos;
                let c = node.pos;
                let len = p.dist(&c);
                let steps = (len / 0.5).ceil() as usize;
                for s in 0..=steps {
                    let t = if steps == 0 { 0.0 } else { s as f64 / steps as f64 };
                    stamp_disk(
                        &mut mask,
                        p.x + (c.x - p.x) * t,
                        p.y + (c.y - p.y) * t,
                        r,
                    );
                }
            }
        }
    }
    Ok(mask)
}

/// Largest rounded radius any stamp in the forest uses (0 for no nodes).
pub fn max_render_radius(forest: &[CurveTree]) -> u32 {
    forest
        .iter()
        .flat_map(|t| t.nodes.iter())
        .map(|n| n.radius.round() as u32)
        .max()
        .unwrap_or(0)
}

fn stamp_disk(mask: &mut Mask, cx: f64, cy: f64, r: f64) {
    let x0 = ((cx - r).ceil().max(0.0)) as usize;
    let y0 = ((cy - r).ceil().max(0.0)) as usize;
    if cx + r < 0.0 || cy + r < 0.0 {
        return;
    }
    let x1 = ((cx + r).floor()).min(mask.width as f64 - 1.0);
    let y1 = ((cy + r).floor()).min(mask.height as f64 - 1.0);
    if x1 < 0.0 || y1 < 0.0 || x0 as f64 > x1 || y0 as f64 > y1 {
        return;
    }
    let (x1, y1) = (x1 as usize, y1 as usize);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy <= r * r {
                mask.set(x, y, true);
            }
        }
    }
}

/// Binary dilation with the footprint centered on each foreground pixel;
/// growth past the canvas is clipped.
pub fn dilate(m: &Mask, se: &StructuringElement) -> Mask {
    let offsets = se.offsets();
    let mut out = Mask::new(m.width, m.height);
    for y in 0..m.height {
        for x in 0..m.width {
            if !m.get(x, y) {
                continue;
            }
            for &(dx, dy) in &offsets {
                let nx = x as i64 + dx as i64;
                let ny = y as i64 + dy as i64;
                if nx >= 0 && ny >= 0 && (nx as usize) < m.width && (ny as usize) < m.height {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
    }
    out
}

/// Binary erosion: a pixel survives only if the whole footprint around it
/// lies on foreground. Outside the canvas counts as background, so erosion
/// always clears a border ring as wide as the footprint reach.
pub fn erode(m: &Mask, se: &StructuringElement) -> Mask {
    let offsets = se.offsets();
    let mut out = Mask::new(m.width, m.height);
    for y in 0..m.height {
        for x in 0..m.width {
            if !m.get(x, y) {
                continue;
            }
            let survives = offsets.iter().all(|&(dx, dy)| {
                let nx = x as i64 + dx as i64;
                let ny = y as i64 + dy as i64;
                nx >= 0
                    && ny >= 0
                    && (nx as usize) < m.width
                    && (ny as usize) < m.height
                    && m.get(nx as usize, ny as usize)
            });
            if survives {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Iterative two-subpass thinning to a one-pixel-wide skeleton, run to the
/// fixpoint (a full iteration that deletes nothing). The result is a subset
/// of the input. Off-canvas neighbors count as background.
pub fn skeletonize(m: &Mask) -> Mask {
    let mut out = m.clone();
    let w = out.width as i64;
    let h = out.height as i64;
    let at = |data: &[u8], x: i64, y: i64| -> u8 {
        if x < 0 || y < 0 || x >= w || y >= h {
            0
        } else {
            data[(y * w + x) as usize]
        }
    };
    // Neighbor ring N, NE, E, SE, S, SW, W, NW around (x, y).
    let ring = |data: &[u8], x: i64, y: i64| -> [u8; 8] {
        [
            at(data, x, y - 1),
            at(data, x + 1, y - 1),
            at(data, x + 1, y),
            at(data, x + 1, y + 1),
            at(data, x, y + 1),
            at(data, x - 1, y + 1),
            at(data, x - 1, y),
            at(data, x - 1, y - 1),
        ]
    };

    let mut fg: Vec<(i64, i64)> = out
        .fg_pixels()
        .into_iter()
        .map(|(x, y)| (x as i64, y as i64))
        .collect();
    loop {
        let mut deleted_total = 0;
        for subpass in 0..2 {
            let mut to_delete = Vec::new();
            for &(x, y) in &fg {
                let p = ring(&out.data, x, y);
                let b: u32 = p.iter().map(|&v| v as u32).sum();
                if !(2..=6).contains(&b) {
                    continue;
                }
                let a = (0..8).filter(|&i| p[i] == 0 && p[(i + 1) % 8] == 1).count();
                if a != 1 {
                    continue;
                }
                let (n, e, s, wv) = (p[0], p[2], p[4], p[6]);
                let ok = if subpass == 0 {
                    n * e * s == 0 && e * s * wv == 0
                } else {
                    n * e * wv == 0 && n * s * wv == 0
                };
                if ok {
                    to_delete.push((x, y));
                }
            }
            for &(x, y) in &to_delete {
                out.data[(y * w + x) as usize] = 0;
            }
            deleted_total += to_delete.len();
            if !to_delete.is_empty() {
                fg.retain(|&(x, y)| out.data[(y * w + x) as usize] != 0);
            }
        }
        if deleted_total == 0 {
            break;
        }
    }
    out
}

/// Warp a mask by a random smooth displacement field: per-pixel offsets drawn
/// i.i.d. uniform in [-1, 1] (the whole x-field first, then the y-field, both
/// row-major), Gaussian-smoothed with std `sigma` (zero-padded separable
/// blur, kernel radius ceil(3 sigma)), scaled by `alpha`, then applied with
/// nearest-neighbor sampling so the output stays binary. Out-of-canvas
/// samples read as background. `alpha = 0` is the identity.
pub fn elastic_transform(m: &Mask, p: &ElasticParams) -> Mask {
    assert!(p.sigma > 0.0, "elastic sigma must be > 0");
    assert!(p.alpha >= 0.0, "elastic alpha must be >= 0");
    let n = m.width * m.height;
    let mut rng = crate::rng::stream_rng(p.seed, crate::rng::STREAM_POST);
    let mut field_x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut field_y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    field_x = gaussian_blur(&field_x, m.width, m.height, p.sigma);
    field_y = gaussian_blur(&field_y, m.width, m.height, p.sigma);

    let mut out = Mask::new(m.width, m.height);
    for y in 0..m.height {
        for x in 0..m.width {
            let i = y * m.width + x;
            let sx = (x as f64 + p.alpha * field_x[i]).round() as i64;
            let sy = (y as f64 + p.alpha * field_y[i]).round() as i64;
            if sx >= 0 && sy >= 0 && (sx as usize) < m.width && (sy as usize) < m.height {
                out.data[i] = m.data[sy as usize * m.width + sx as usize];
            }
        }
    }
    out
}

/// Separable Gaussian blur with zero padding outside the canvas.
fn gaussian_blur(field: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i as f64 * i as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }

    let mut tmp = vec![0.0; field.len()];
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sx = x + ki as i64 - radius;
                if sx >= 0 && sx < width as i64 {
                    acc += k * field[(y * width as i64 + sx) as usize];
                }
            }
            tmp[(y * width as i64 + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0; field.len()];
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sy = y + ki as i64 - radius;
                if sy >= 0 && sy < height as i64 {
                    acc += k * tmp[(sy * width as i64 + x) as usize];
                }
            }
            out[(y * width as i64 + x) as usize] = acc;
        }
    }
    out
}

/// Element-wise AND with a field-of-view mask of equal dimensions.
pub fn apply_fov(m: &Mask, fov: &Mask) -> Result<Mask, RasterError> {
    if m.width != fov.width || m.height != fov.height {
        return Err(RasterError::DimensionMismatch(
            m.width, m.height, fov.width, fov.height,
        ));
    }
    Ok(Mask {
        width: m.width,
        height: m.height,
        data: m
            .data
            .iter()
            .zip(&fov.data)
            .map(|(&a, &b)| a & b)
            .collect(),
    })
}

/// Cut a window of the given size at an offset drawn uniformly over all
/// valid positions (x offset drawn before y).
pub fn random_crop(
    m: &Mask,
    out_w: usize,
    out_h: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Mask, RasterError> {
    if out_w > m.width || out_h > m.height || out_w == 0 || out_h == 0 {
        return Err(RasterError::CropTooLarge {
            out_w,
            out_h,
            width: m.width,
            height: m.height,
        });
    }
    let x0 = rng.random_range(0..=m.width - out_w);
    let y0 = rng.random_range(0..=m.height - out_h);
    let mut out = Mask::new(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            out.set(x, y, m.get(x0 + x, y0 + y));
        }
    }
    Ok(out)
}

/// Exact mirror along one axis.
pub fn flip(m: &Mask, axis: FlipAxis) -> Mask {
    let mut out = Mask::new(m.width, m.height);
    for y in 0..m.height {
        for x in 0..m.width {
            let (sx, sy) = match axis {
                FlipAxis::Horizontal => (m.width - 1 - x, y),
                FlipAxis::Vertical => (x, m.height - 1 - y),
            };
            out.set(x, y, m.get(sx, sy));
        }
    }
    out
}

/// Exact mirror along one axis.
pub fn flip_gray(img: &GrayImage, axis: FlipAxis) -> GrayImage {
    let mut out = GrayImage::new(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let (sx, sy) = match axis {
                FlipAxis::Horizontal => (img.width - 1 - x, y),
                FlipAxis::Vertical => (x, img.height - 1 - y),
            };
            out.set(x, y, img.get(sx, sy));
        }
    }
    out
}

/// Inverse-mapped source coordinate for a rotation of `degrees`
/// (counterclockwise in x-right/y-down pixel coordinates) about the canvas
/// center ((w-1)/2, (h-1)/2).
fn rotate_source(x: usize, y: usize, width: usize, height: usize, degrees: f64) -> (f64, f64) {
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let dx = x as f64 - cx;
    let dy = y as f64 - cy;
    (cx + cos * dx + sin * dy, cy - sin * dx + cos * dy)
}

/// Rotate a mask about its center with nearest-neighbor sampling (keeps the
/// output binary); uncovered pixels become background. `degrees` must lie in
/// [0, 90].
pub fn rotate_mask(m: &Mask, degrees: f64) -> Mask {
    assert!(
        (0.0..=90.0).contains(&degrees),
        "rotation must be within [0, 90] degrees"
    );
    let mut out = Mask::new(m.width, m.height);
    for y in 0..m.height {
        for x in 0..m.width {
            let (sx, sy) = rotate_source(x, y, m.width, m.height, degrees);
            let (rx, ry) = (sx.round(), sy.round());
            if rx >= 0.0 && ry >= 0.0 && (rx as usize) < m.width && (ry as usize) < m.height {
                out.set(x, y, m.get(rx as usize, ry as usize));
            }
        }
    }
    out
}

/// Rotate a gray image about its center with bilinear sampling; out-of-canvas
/// reads fill with 0. `degrees` must lie in [0, 90].
pub fn rotate_gray(img: &GrayImage, degrees: f64) -> GrayImage {
    assert!(
        (0.0..=90.0).contains(&degrees),
        "rotation must be within [0, 90] degrees"
    );
    let sample = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= img.width as i64 || y >= img.height as i64 {
            0.0
        } else {
            img.data[y as usize * img.width + x as usize] as f64
        }
    };
    let mut out = GrayImage::new(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let (sx, sy) = rotate_source(x, y, img.width, img.height, degrees);
            if sx < -1.0 || sy < -1.0 || sx > img.width as f64 || sy > img.height as f64 {
                continue;
            }
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as i64, y0 as i64);
            let v = (1.0 - fx) * (1.0 - fy) * sample(x0, y0)
                + fx * (1.0 - fy) * sample(x0 + 1, y0)
                + (1.0 - fx) * fy * sample(x0, y0 + 1)
                + fx * fy * sample(x0 + 1, y0 + 1);
            out.set(x, y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}
