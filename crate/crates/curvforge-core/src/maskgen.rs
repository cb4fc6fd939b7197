//! Inpainting-mask generators.
//!
//! Two mask sources for the background-restoration stage: a random cocktail
//! of axis-aligned rectangles and wide polygonal chains (training masks for
//! an inpainter), and dilated skeletons that wipe a drawn curve plus a
//! safety margin around it at synthesis time.
//!
//! Both random generators draw from `stream_rng(seed, STREAM_POST)` in a
//! fixed, documented order, so a seed pins the output exactly.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{dilate, Mask, StructuringElement};
use crate::rng::{stream_rng, STREAM_POST};

/// Parameter failure for the random mask generators.
#[derive(Debug, Error)]
pub enum MaskGenError {
    #[error("invalid mask parameters: {0}")]
    InvalidParams(String),
}

/// Random cocktail of axis-aligned filled rectangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectMaskParams {
    /// Inclusive range for the number of rectangles.
    pub count_range: (u32, u32),
    /// Inclusive pixel range for rectangle widths.
    pub width_range: (u32, u32),
    /// Inclusive pixel range for rectangle heights (independent of width,
    /// so aspect ratios are arbitrary).
    pub height_range: (u32, u32),
    pub seed: u64,
}

impl RectMaskParams {
    /// Defaults for inpainter training: 1 to 4 rectangles with sides from
    /// 16 px up to a third of the short canvas side.
    pub fn defaults(width: usize, height: usize, seed: u64) -> Self {
        let short = width.min(height) as u32;
        let hi = (short / 3).max(16).min(short);
        let lo = 16.min(hi);
        RectMaskParams {
            count_range: (1, 4),
            width_range: (lo, hi),
            height_range: (lo, hi),
            seed,
        }
    }

    /// All ranges non-empty and sizes within the canvas.
    pub fn validate(&self, width: usize, height: usize) -> Result<(), MaskGenError> {
        let ordered = |name: &str, (lo, hi): (u32, u32)| {
            if lo > hi {
                Err(MaskGenError::InvalidParams(format!(
                    "{name} range ({lo}, {hi}) is empty"
                )))
            } else {
                Ok(())
            }
        };
        ordered("count", self.count_range)?;
        ordered("width", self.width_range)?;
        ordered("height", self.height_range)?;
        if self.width_range.1 as usize > width || self.height_range.1 as usize > height {
            return Err(MaskGenError::InvalidParams(format!(
                "rectangle sizes up to {}x{} exceed the {}x{} canvas",
                self.width_range.1, self.height_range.1, width, height
            )));
        }
        Ok(())
    }
}

/// Random cocktail of wide polygonal chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainMaskParams {
    /// Inclusive range for the number of chains.
    pub chain_count_range: (u32, u32),
    /// Inclusive range for vertices per chain (at least 2).
    pub vertices_range: (u32, u32),
    /// Inclusive pixel range for segment lengths.
    pub step_range: (f64, f64),
    /// Standard deviation of the per-segment heading perturbation, radians.
    pub turn_std: f64,
    /// Inclusive pixel range for stroke widths (at least 1).
    pub width_range: (f64, f64),
    pub seed: u64,
}

impl ChainMaskParams {
    /// Defaults for inpainter training: 1 to 3 chains, 4 to 12 vertices,
    /// steps of 16 to 48 px, strokes 8 to 24 px wide, a 0.5 rad wiggle.
    pub fn defaults(seed: u64) -> Self {
        ChainMaskParams {
            chain_count_range: (1, 3),
            vertices_range: (4, 12),
            step_range: (16.0, 48.0),
            turn_std: 0.5,
            width_range: (8.0, 24.0),
            seed,
        }
    }

    /// Ranges non-empty and finite, vertices at least 2, widths at least 1.
    pub fn validate(&self) -> Result<(), MaskGenError> {
        if self.chain_count_range.0 > self.chain_count_range.1 {
            return Err(MaskGenError::InvalidParams(format!(
                "chain count range ({}, {}) is empty",
                self.chain_count_range.0, self.chain_count_range.1
            )));
        }
        if self.vertices_range.0 < 2 || self.vertices_range.0 > self.vertices_range.1 {
            return Err(MaskGenError::InvalidParams(format!(
                "vertex range ({}, {}) must be non-empty with at least 2 vertices",
                self.vertices_range.0, self.vertices_range.1
            )));
        }
        let ordered = |name: &str, (lo, hi): (f64, f64), min: f64| {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= min) {
                Err(MaskGenError::InvalidParams(format!(
                    "{name} range ({lo}, {hi}) must be finite, ordered, and at least {min}"
                )))
            } else {
                Ok(())
            }
        };
        ordered("step", self.step_range, 0.0)?;
        ordered("stroke width", self.width_range, 1.0)?;
        if !(self.turn_std.is_finite() && self.turn_std >= 0.0) {
            return Err(MaskGenError::InvalidParams(format!(
                "turn standard deviation {} must be finite and non-negative",
                self.turn_std
            )));
        }
        Ok(())
    }
}

/// Draw N ~ uniform(count_range) filled rectangles. Per rectangle the draws
/// are width, height, then the top-left corner, uniform over placements
/// that keep the rectangle inside the canvas (so a canvas-sized rectangle
/// always covers everything).
pub fn random_rect_mask(
    width: usize,
    height: usize,
    p: &RectMaskParams,
) -> Result<Mask, MaskGenError> {
    p.validate(width, height)?;
    let mut rng = stream_rng(p.seed, STREAM_POST);
    let mut m = Mask::new(width, height);
    let n = rng.random_range(p.count_range.0..=p.count_range.1);
    for _ in 0..n {
        let rw = rng.random_range(p.width_range.0..=p.width_range.1) as usize;
        let rh = rng.random_range(p.height_range.0..=p.height_range.1) as usize;
        let x0 = rng.random_range(0..=(width - rw) as u32) as usize;
        let y0 = rng.random_range(0..=(height - rh) as u32) as usize;
        for y in y0..(y0 + rh).min(height) {
            for x in x0..(x0 + rw).min(width) {
                m.set(x, y, true);
            }
        }
    }
    Ok(m)
}

/// Draw N ~ uniform(chain_count_range) polygonal chains. Per chain the
/// draws are vertex count, start x, start y, initial heading; then per
/// segment a heading turn ~ Normal(0, turn_std), a length, and a stroke
/// width. Segments are swept with disks; strokes clip at the canvas edge.
pub fn random_chain_mask(
    width: usize,
    height: usize,
    p: &ChainMaskParams,
) -> Result<Mask, MaskGenError> {
    p.validate()?;
    let mut rng = stream_rng(p.seed, STREAM_POST);
    let mut m = Mask::new(width, height);
    let n = rng.random_range(p.chain_count_range.0..=p.chain_count_range.1);
    for _ in 0..n {
        let vertices = rng.random_range(p.vertices_range.0..=p.vertices_range.1);
        let mut x = rng.random_range(0.0..width as f64);
        let mut y = rng.random_range(0.0..height as f64);
        let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
        for _ in 1..vertices {
            let turn: f64 = rng.sample::<f64, _>(StandardNormal) * p.turn_std;
            heading += turn;
            let step = rng.random_range(p.step_range.0..=p.step_range.1);
            let stroke = rng.random_range(p.width_range.0..=p.width_range.1);
            let nx = x + heading.cos() * step;
            let ny = y + heading.sin() * step;
            stroke_segment(&mut m, x, y, nx, ny, stroke / 2.0);
            x = nx;
            y = ny;
        }
    }
    Ok(m)
}

/// Sweep a disk of radius `r` from (ax, ay) to (bx, by) in steps of at most
/// half a pixel, endpoints included.
fn stroke_segment(m: &mut Mask, ax: f64, ay: f64, bx: f64, by: f64, r: f64) {
    let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
    let steps = ((len / 0.5).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        stamp_round(m, ax + t * (bx - ax), ay + t * (by - ay), r);
    }
}

/// Set every pixel whose center lies within `r` of (cx, cy), clipped.
fn stamp_round(m: &mut Mask, cx: f64, cy: f64, r: f64) {
    let x0 = (cx - r).floor().max(0.0) as usize;
    let y0 = (cy - r).floor().max(0.0) as usize;
    let x1 = ((cx + r).ceil().max(0.0) as usize).min(m.width.saturating_sub(1));
    let y1 = ((cy + r).ceil().max(0.0) as usize).min(m.height.saturating_sub(1));
    if (cx + r) < 0.0 || (cy + r) < 0.0 {
        return;
    }
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            if dx * dx + dy * dy <= r * r {
                m.set(x, y, true);
            }
        }
    }
}

/// Grow a skeleton into a foreground-removal mask: every skeleton pixel
/// becomes a disk of the given radius. Radius 0 returns the skeleton
/// unchanged.
pub fn inpaint_mask_from_skeleton(skel: &Mask, dilation_radius: u32) -> Mask {
    dilate(
        skel,
        &StructuringElement::Disk {
            radius: dilation_radius,
        },
    )
}

/// Default skeleton dilation radius: 7 px on canvases up to 576 px,
/// scaled proportionally above that. The radius must exceed the widest
/// curve radius so the dilated skeleton covers the whole foreground.
pub fn default_inpaint_radius(max_canvas_dim: usize) -> u32 {
    if max_canvas_dim <= 576 {
        7
    } else {
        (7.0 * max_canvas_dim as f64 / 576.0).round() as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_rectangles_make_an_empty_mask() {
        let p = RectMaskParams {
            count_range: (0, 0),
            width_range: (5, 10),
            height_range: (5, 10),
            seed: 1,
        };
        assert_eq!(random_rect_mask(64, 64, &p).unwrap().fg_count(), 0);
    }

    #[test]
    fn canvas_sized_rectangle_covers_everything() {
        for seed in 0..20 {
            let p = RectMaskParams {
                count_range: (1, 1),
                width_range: (48, 48),
                height_range: (32, 32),
                seed,
            };
            let m = random_rect_mask(48, 32, &p).unwrap();
            assert_eq!(m.fg_count(), 48 * 32, "seed {seed}");
        }
    }

    #[test]
    fn rectangles_always_fit_the_canvas() {
        for seed in 0..10 {
            let p = RectMaskParams::defaults(100, 80, seed);
            let m = random_rect_mask(100, 80, &p).unwrap();
            assert!(m.fg_count() > 0);
        }
    }

    #[test]
    fn rect_params_validate() {
        let mut p = RectMaskParams::defaults(256, 256, 0);
        assert!(p.validate(256, 256).is_ok());
        p.width_range = (10, 5);
        assert!(p.validate(256, 256).is_err());
        p.width_range = (10, 300);
        assert!(p.validate(256, 256).is_err());
    }

    #[test]
    fn chain_params_validate() {
        let mut p = ChainMaskParams::defaults(0);
        assert!(p.validate().is_ok());
        p.vertices_range = (1, 5);
        assert!(p.validate().is_err());
        p = ChainMaskParams::defaults(0);
        p.width_range = (0.5, 4.0);
        assert!(p.validate().is_err());
        p = ChainMaskParams::defaults(0);
        p.turn_std = -1.0;
        assert!(p.validate().is_err());
        p = ChainMaskParams::defaults(0);
        p.step_range = (20.0, 10.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn zero_chains_make_an_empty_mask() {
        let mut p = ChainMaskParams::defaults(3);
        p.chain_count_range = (0, 0);
        assert_eq!(random_chain_mask(64, 64, &p).unwrap().fg_count(), 0);
    }

    #[test]
    fn straight_stroke_matches_the_capsule() {
        // Width 3 stroke (radius 1.5) along y = 8 from x = 2 to x = 13:
        // exactly the pixels within 1.5 of the segment.
        let mut m = Mask::new(16, 16);
        stroke_segment(&mut m, 2.0, 8.0, 13.0, 8.0, 1.5);
        let mut expected = Mask::new(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                let px = x as f64;
                let py = y as f64;
                let cx = px.clamp(2.0, 13.0);
                let d2 = (px - cx).powi(2) + (py - 8.0).powi(2);
                if d2 <= 1.5 * 1.5 {
                    expected.set(x, y, true);
                }
            }
        }
        assert_eq!(m, expected);
        // A 3-px-wide bar: rows 7, 8, 9.
        let rows: std::collections::BTreeSet<usize> =
            m.fg_pixels().iter().map(|&(_, y)| y).collect();
        assert_eq!(rows.into_iter().collect::<Vec<_>>(), vec![7, 8, 9]);
    }

    #[test]
    fn degenerate_chain_is_a_straight_stroke() {
        let p = ChainMaskParams {
            chain_count_range: (1, 1),
            vertices_range: (2, 2),
            step_range: (30.0, 30.0),
            turn_std: 0.0,
            width_range: (3.0, 3.0),
            seed: 5,
        };
        let m = random_chain_mask(128, 128, &p).unwrap();
        assert!(m.fg_count() > 0);
        // All foreground within 1.5 px of one line: check collinearity by
        // fitting the two extreme points and bounding the residual.
        let pts = m.fg_pixels();
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        let (ax, ay) = (first.0 as f64, first.1 as f64);
        let (bx, by) = (last.0 as f64, last.1 as f64);
        let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
        if len > 1.0 {
            for (x, y) in pts {
                let cross =
                    ((bx - ax) * (y as f64 - ay) - (by - ay) * (x as f64 - ax)).abs() / len;
                assert!(cross <= 3.5, "pixel ({x},{y}) is {cross} off the line");
            }
        }
    }

    #[test]
    fn generators_are_deterministic_in_seed() {
        let rp = RectMaskParams {
            count_range: (1, 3),
            width_range: (20, 80),
            height_range: (20, 80),
            seed: 7,
        };
        let a = random_rect_mask(256, 256, &rp).unwrap();
        let b = random_rect_mask(256, 256, &rp).unwrap();
        assert_eq!(a.sha256_hex(), b.sha256_hex());
        let mut other = rp.clone();
        other.seed = 8;
        assert_ne!(
            a.sha256_hex(),
            random_rect_mask(256, 256, &other).unwrap().sha256_hex()
        );

        let cp = ChainMaskParams {
            chain_count_range: (2, 2),
            vertices_range: (6, 6),
            step_range: (16.0, 48.0),
            turn_std: 0.5,
            width_range: (8.0, 16.0),
            seed: 11,
        };
        let a = random_chain_mask(256, 256, &cp).unwrap();
        let b = random_chain_mask(256, 256, &cp).unwrap();
        assert_eq!(a.sha256_hex(), b.sha256_hex());
    }

    #[test]
    fn frozen_rect_golden() {
        let p = RectMaskParams {
            count_range: (1, 3),
            width_range: (20, 80),
            height_range: (20, 80),
            seed: 7,
        };
        let m = random_rect_mask(256, 256, &p).unwrap();
        let fraction = m.fg_count() as f64 / (256.0 * 256.0);
        assert!(fraction > 0.0 && fraction <= 0.3, "fraction {fraction}");
        assert_eq!(
            m.sha256_hex(),
            "cab51b5c373e3493832feda7cdc363a5049495d8728b582aca5f5a04651cd60e",
            "regenerate with maskgen::tests::frozen_rect_golden"
        );
    }

    #[test]
    fn frozen_chain_golden() {
        let p = ChainMaskParams {
            chain_count_range: (2, 2),
            vertices_range: (6, 6),
            step_range: (16.0, 48.0),
            turn_std: 0.5,
            width_range: (8.0, 16.0),
            seed: 11,
        };
        let m = random_chain_mask(256, 256, &p).unwrap();
        assert!(m.fg_count() > 0);
        assert_eq!(
            m.sha256_hex(),
            "7a0937af4363afd86576ef076a4b11d498f7cc451b8b406a7beea2e6bf09a396",
            "regenerate with maskgen::tests::frozen_chain_golden"
        );
    }

    #[test]
    fn skeleton_dilation_matches_brute_force_disks() {
        // 1-px horizontal line, radius 3: every pixel within 3 of the line.
        let mut skel = Mask::new(24, 16);
        for x in 4..20 {
            skel.set(x, 8, true);
        }
        let got = inpaint_mask_from_skeleton(&skel, 3);
        let line = skel.fg_pixels();
        let mut expected = Mask::new(24, 16);
        for y in 0..16i64 {
            for x in 0..24i64 {
                if line.iter().any(|&(lx, ly)| {
                    (x - lx as i64).pow(2) + (y - ly as i64).pow(2) <= 9
                }) {
                    expected.set(x as usize, y as usize, true);
                }
            }
        }
        assert_eq!(got, expected);
        // 7-px-wide bar through the middle.
        let mid_rows: Vec<usize> = (0..16).filter(|&y| got.get(10, y)).collect();
        assert_eq!(mid_rows, (5..=11).collect::<Vec<_>>());

        // Radius 1 gives a 3-px width, radius 0 is the identity.
        let thin = inpaint_mask_from_skeleton(&skel, 1);
        let thin_rows: Vec<usize> = (0..16).filter(|&y| thin.get(10, y)).collect();
        assert_eq!(thin_rows, vec![7, 8, 9]);
        assert_eq!(inpaint_mask_from_skeleton(&skel, 0), skel);
    }

    #[test]
    fn default_radius_scales_with_canvas() {
        assert_eq!(default_inpaint_radius(400), 7);
        assert_eq!(default_inpaint_radius(576), 7);
        assert_eq!(default_inpaint_radius(900), 11);
        assert_eq!(default_inpaint_radius(1300), 16);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn dilation_covers_and_is_monotone(seed in 0u64..1000, r1 in 0u32..4, extra in 0u32..4) {
            let p = ChainMaskParams {
                chain_count_range: (1, 2),
                vertices_range: (2, 5),
                step_range: (8.0, 24.0),
                turn_std: 0.6,
                width_range: (1.0, 3.0),
                seed,
            };
            let skel = random_chain_mask(64, 64, &p).unwrap();
            let small = inpaint_mask_from_skeleton(&skel, r1);
            let large = inpaint_mask_from_skeleton(&skel, r1 + extra);
            prop_assert!(skel.is_subset_of(&small));
            prop_assert!(small.is_subset_of(&large));
        }
    }
}
