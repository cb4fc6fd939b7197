//! Built-in generation recipes and the growth-to-mask pipeline.
//!
//! A preset bundles one or two growth components with a raster canvas and an
//! ordered post-processing recipe. The four built-ins reproduce the
//! published parameter rows for retinal vessels (fundus and OCTA), corneal
//! nerves, and wide-field fundus vessels; custom presets load from JSON with
//! the same shape and validate identically.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::Digest;
use thiserror::Error;

use crate::geom::{Point2, Region};
use crate::raster::{
    apply_fov, dilate, erode, flip, max_render_radius, random_crop, rasterize,
    FlipAxis, Mask, RasterError, StructuringElement,
};
use crate::rng::{split, stream_rng, STREAM_POST};
use crate::sca::{
    compute_radii, grow, scale_tree, GrowthConfig, GrowthError, ObstacleSpec, RootSpec,
};

/// Preset-level failure: bad recipe, or a growth/raster failure underneath.
#[derive(Debug, Error)]
pub enum PresetError {
    #[error("invalid preset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// One ordered post-processing step applied to the rasterized mask(s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PostOp {
    /// Merge all pending component masks into one (identity for a single
    /// mask). Required before any per-mask op when two components exist.
    Union,
    /// Intersect with a circular field of view centered on the canvas.
    Fov { radius: f64 },
    /// Crop to the given size at an offset drawn from the post rng.
    Crop { width: usize, height: usize },
    /// Flip each axis independently with probability 1/2, horizontal coin
    /// drawn before vertical.
    Flip,
    /// Morphological erosion.
    Erode { kernel: StructuringElement },
    /// Morphological dilation.
    Dilate { kernel: StructuringElement },
}

fn default_raster_scale() -> f64 {
    1.0
}

/// A complete curve-generation recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    /// One of the built-in names, or "custom".
    pub name: String,
    /// One or two growth components; per-item seeds are derived per
    /// component, so the configured `seed` fields are placeholders.
    pub growth: Vec<GrowthConfig>,
    pub canvas_width: usize,
    pub canvas_height: usize,
    /// Factor applied to node positions and radii between growth and
    /// rasterization (growth domains can outsize the canvas).
    #[serde(default = "default_raster_scale")]
    pub raster_scale: f64,
    pub post_ops: Vec<PostOp>,
}

/// The four built-in preset names, in display order.
pub const BUILTIN_NAMES: [&str; 4] = ["octa500", "corn", "drive", "chasedb1"];

/// Look up a built-in preset by name.
pub fn builtin(name: &str) -> Option<Preset> {
    match name {
        "octa500" => Some(octa500()),
        "corn" => Some(corn()),
        "drive" => Some(drive()),
        "chasedb1" => Some(chasedb1()),
        _ => None,
    }
}

fn growth_base(bound: Region, roots: RootSpec, grid: u32, jitter: f64) -> GrowthConfig {
    GrowthConfig {
        bound,
        obstacles: Vec::new(),
        roots,
        attractor_grid: grid,
        jitter,
        attraction_distance: 30.0,
        kill_distance: 5.0,
        segment_length: 5.0,
        max_nodes: 4500,
        murray_exponent: 3.0,
        seed: 0,
    }
}

/// OCTA-style retinal capillaries: two components on a 900x900 domain, the
/// first growing horizontal large vessels from the four side midpoints, the
/// second growing centripetal small vessels around a disk-shaped hole;
/// their union is cropped to the 400x400 target size.
fn octa500() -> Preset {
    let bound = Region::Circle {
        center: Point2::new(450.0, 450.0),
        radius: 450.0,
    };
    let large = GrowthConfig {
        max_nodes: 2600,
        ..growth_base(
            bound.clone(),
            RootSpec::FixedPoints {
                points: vec![
                    Point2::new(450.0, 0.0),
                    Point2::new(900.0, 450.0),
                    Point2::new(450.0, 900.0),
                    Point2::new(0.0, 450.0),
                ],
            },
            130,
            20.0,
        )
    };
    let small = GrowthConfig {
        obstacles: vec![ObstacleSpec::CircleRadiusRange {
            center: Point2::new(650.0, 450.0),
            radius_range: (60.0, 90.0),
        }],
        max_nodes: 2600,
        ..growth_base(
            bound,
            RootSpec::UniformBox {
                x_range: (75.0, 375.0),
                y_range: (75.0, 375.0),
            },
            130,
            20.0,
        )
    };
    Preset {
        name: "octa500".into(),
        growth: vec![large, small],
        canvas_width: 900,
        canvas_height: 900,
        raster_scale: 1.0,
        post_ops: vec![
            PostOp::Union,
            PostOp::Crop {
                width: 400,
                height: 400,
            },
        ],
    }
}

/// Corneal nerve fibers: a single component radiating from the center of a
/// 1300x1300 domain, eroded to thin the strokes, then cropped to 384x384.
fn corn() -> Preset {
    let mut g = growth_base(
        Region::Square {
            origin: Point2::new(0.0, 0.0),
            side: 1300.0,
        },
        RootSpec::UniformBox {
            x_range: (620.0, 680.0),
            y_range: (620.0, 680.0),
        },
        110,
        15.0,
    );
    g.max_nodes = 9000;
    Preset {
        name: "corn".into(),
        growth: vec![g],
        canvas_width: 1300,
        canvas_height: 1300,
        raster_scale: 1.0,
        post_ops: vec![
            PostOp::Erode {
                kernel: StructuringElement::Disk { radius: 1 },
            },
            PostOp::Crop {
                width: 384,
                height: 384,
            },
        ],
    }
}

/// Fundus vessels: one component in an 800-wide circular domain with a
/// concentric optic-disc hole, roots near the disc, scaled 0.72x onto a
/// 576x576 canvas, masked by the field of view, randomly flipped.
fn drive() -> Preset {
    let mut g = growth_base(
        Region::Circle {
            center: Point2::new(400.0, 400.0),
            radius: 400.0,
        },
        RootSpec::UniformBox {
            x_range: (70.0, 130.0),
            y_range: (350.0, 450.0),
        },
        85,
        30.0,
    );
    g.obstacles = vec![ObstacleSpec::CircleRadiusRange {
        center: Point2::new(400.0, 400.0),
        radius_range: (40.0, 60.0),
    }];
    g.max_nodes = 4500;
    Preset {
        name: "drive".into(),
        growth: vec![g],
        canvas_width: 576,
        canvas_height: 576,
        raster_scale: 0.72,
        post_ops: vec![PostOp::Fov { radius: 288.0 }, PostOp::Flip],
    }
}

/// Wide-field fundus vessels: one component on a 960x960 square with longer
/// segments, masked by the field of view, then dilated to thicken.
fn chasedb1() -> Preset {
    let mut g = growth_base(
        Region::Square {
            origin: Point2::new(0.0, 0.0),
            side: 960.0,
        },
        RootSpec::UniformBox {
            x_range: (440.0, 520.0),
            y_range: (440.0, 520.0),
        },
        100,
        12.0,
    );
    g.attraction_distance = 35.0;
    g.kill_distance = 3.0;
    g.segment_length = 10.0;
    g.max_nodes = 4500;
    Preset {
        name: "chasedb1".into(),
        growth: vec![g],
        canvas_width: 960,
        canvas_height: 960,
        raster_scale: 1.0,
        post_ops: vec![
            PostOp::Fov { radius: 480.0 },
            PostOp::Dilate {
                kernel: StructuringElement::Disk { radius: 1 },
            },
        ],
    }
}

impl Preset {
    /// Validity plus advisory warnings (forwarded from the growth configs).
    pub fn validate(&self) -> Result<Vec<String>, PresetError> {
        if self.name.is_empty() {
            return Err(PresetError::Invalid("preset name is empty".into()));
        }
        if self.growth.is_empty() || self.growth.len() > 2 {
            return Err(PresetError::Invalid(format!(
                "{} growth components; expected 1 or 2",
                self.growth.len()
            )));
        }
        if self.canvas_width == 0 || self.canvas_height == 0 {
            return Err(PresetError::Invalid("canvas must be non-empty".into()));
        }
        if !(self.raster_scale.is_finite() && self.raster_scale > 0.0) {
            return Err(PresetError::Invalid(format!(
                "raster scale {} must be finite and positive",
                self.raster_scale
            )));
        }
        let mut warnings = Vec::new();
        for g in &self.growth {
            warnings.extend(g.validate()?);
        }
        for op in &self.post_ops {
            match op {
                PostOp::Fov { radius } => {
                    if !(radius.is_finite() && *radius > 0.0) {
                        return Err(PresetError::Invalid(format!(
                            "field-of-view radius {radius} must be finite and positive"
                        )));
                    }
                }
                PostOp::Crop { width, height } => {
                    if *width == 0
                        || *height == 0
                        || *width > self.canvas_width
                        || *height > self.canvas_height
                    {
                        return Err(PresetError::Invalid(format!(
                            "crop {width}x{height} does not fit the {}x{} canvas",
                            self.canvas_width, self.canvas_height
                        )));
                    }
                }
                PostOp::Erode { kernel } | PostOp::Dilate { kernel } => {
                    if let StructuringElement::Square { side } = kernel {
                        if side % 2 == 0 {
                            return Err(PresetError::Invalid(format!(
                                "square structuring element side {side} must be odd"
                            )));
                        }
                    }
                }
                PostOp::Union | PostOp::Flip => {}
            }
        }
        Ok(warnings)
    }

    /// Output dimensions after the recipe runs: the canvas, unless a crop
    /// shrinks it.
    pub fn output_size(&self) -> (usize, usize) {
        let mut size = (self.canvas_width, self.canvas_height);
        for op in &self.post_ops {
            if let PostOp::Crop { width, height } = op {
                size = (*width, *height);
            }
        }
        size
    }
}

/// SHA-256 (hex) of the preset's canonical JSON form. Identifies the full
/// recipe (growth, canvas, post-ops) in bank manifests.
pub fn preset_hash(preset: &Preset) -> String {
    let json = serde_json::to_string(preset).expect("preset serializes");
    hex::encode(sha2::Sha256::digest(json.as_bytes()))
}

/// One generated curve mask plus the data needed to reproduce and cover it.
#[derive(Clone, Debug)]
pub struct GeneratedMask {
    pub mask: Mask,
    /// The per-item seed every draw derived from.
    pub seed: u64,
    /// Largest disk radius stamped during rasterization; dilating the
    /// mask's skeleton by this + 1 covers the mask.
    pub max_radius: u32,
}

/// Run the full pipeline for one item: grow each component with a seed
/// derived from `item_seed`, assign branch radii, scale, rasterize, then
/// apply the post-processing recipe in order (crop offsets and flip coins
/// come from the item's post-processing rng stream).
pub fn generate_mask(preset: &Preset, item_seed: u64) -> Result<GeneratedMask, PresetError> {
    preset.validate()?;
    let mut masks: Vec<Mask> = Vec::new();
    let mut max_radius = 0u32;
    for (i, base) in preset.growth.iter().enumerate() {
        let mut config = base.clone();
        config.seed = split(item_seed, i as u64);
        let tree = grow(&config)?;
        let tree = compute_radii(tree, config.murray_exponent);
        let tree = scale_tree(tree, preset.raster_scale);
        max_radius = max_radius.max(max_render_radius(std::slice::from_ref(&tree)));
        masks.push(rasterize(
            std::slice::from_ref(&tree),
            preset.canvas_width,
            preset.canvas_height,
        )?);
    }
    let mut rng = stream_rng(item_seed, STREAM_POST);
    for op in &preset.post_ops {
        if let PostOp::Union = op {
            masks = vec![union_masks(masks)];
            continue;
        }
        if masks.len() != 1 {
            return Err(PresetError::Invalid(format!(
                "post-op {op:?} operates on one mask; put union before it"
            )));
        }
        let m = masks.pop().expect("length checked");
        let next = match op {
            PostOp::Union => unreachable!("handled above"),
            PostOp::Fov { radius } => {
                let fov = Mask::fov_circle(m.width, m.height, *radius);
                apply_fov(&m, &fov)?
            }
            PostOp::Crop { width, height } => random_crop(&m, *width, *height, &mut rng)?,
            PostOp::Flip => {
                let mut flipped = m;
                if rng.random::<bool>() {
                    flipped = flip(&flipped, FlipAxis::Horizontal);
                }
                if rng.random::<bool>() {
                    flipped = flip(&flipped, FlipAxis::Vertical);
                }
                flipped
            }
            PostOp::Erode { kernel } => erode(&m, kernel),
            PostOp::Dilate { kernel } => dilate(&m, kernel),
        };
        masks.push(next);
    }
    let mask = union_masks(masks);
    Ok(GeneratedMask {
        mask,
        seed: item_seed,
        max_radius,
    })
}

fn union_masks(masks: Vec<Mask>) -> Mask {
    let mut iter = masks.into_iter();
    let mut acc = iter.next().expect("at least one component mask");
    for m in iter {
        assert_eq!((acc.width, acc.height), (m.width, m.height));
        for (a, b) in acc.data.iter_mut().zip(&m.data) {
            *a |= b;
        }
    }
    acc
}
