//! Curve banks, background banks, and paired-dataset manifests.
//!
//! A bank is a directory holding PNGs plus a `manifest.json` describing
//! every file: `<bank>/manifest.json`, `<bank>/curves/*.png`,
//! `<bank>/backgrounds/*.png`, `<bank>/masks/*.png`. Manifests carry no
//! absolute paths and no timestamps, so identical inputs produce
//! byte-identical banks. Pairing draws (curve, background) combinations
//! with replacement and copies the referenced files into a self-contained
//! output bank. The intensity histogram diagnostic lives here too.

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::Digest;
use thiserror::Error;

use crate::fsio::write_atomic;
use crate::preset::{generate_mask, preset_hash, Preset, PresetError};
use crate::raster::{flip_gray, rotate_gray, FlipAxis, GrayImage, Mask, RasterError};
use crate::rng::{split, stream_rng, STREAM_POST};

/// Manifest format version this build reads and writes.
pub const MANIFEST_VERSION: u32 = 1;
/// Manifest file name inside a bank directory.
pub const MANIFEST_FILE: &str = "manifest.json";

/// Bank-level failure: bad structure, unsupported version, or I/O.
#[derive(Debug, Error)]
pub enum BankError {
    #[error("invalid bank: {0}")]
    Invalid(String),
    #[error("manifest version {0} unsupported (expected {MANIFEST_VERSION})")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Preset(#[from] PresetError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// What a bank file contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankEntryKind {
    Curve,
    Background,
    Fov,
    Skeleton,
    InpaintMask,
}

/// One file in a bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    /// Unique within the manifest.
    pub id: String,
    /// Relative to the bank directory, forward slashes.
    pub path: String,
    pub kind: BankEntryKind,
    /// Seed that produced the file (0 for derived files with no draws).
    pub seed: u64,
    /// Digest of the recipe that produced the file.
    pub config_hash: String,
    /// Preset name the file belongs to.
    pub preset: String,
}

/// One sampled (curve, background) combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub curve_id: String,
    pub background_id: String,
    pub pair_id: String,
}

/// The bank's table of contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub version: u32,
    pub preset: String,
    pub entries: Vec<BankEntry>,
    pub pairs: Vec<PairEntry>,
}

impl BankManifest {
    /// Parse a manifest file and check its version.
    pub fn load(path: &Path) -> Result<Self, BankError> {
        let bytes = std::fs::read(path)?;
        let manifest: BankManifest = serde_json::from_slice(&bytes)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(BankError::Version(manifest.version));
        }
        Ok(manifest)
    }

    /// Write the manifest as pretty JSON (atomically).
    pub fn save(&self, path: &Path) -> Result<(), BankError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)?;
        Ok(())
    }

    /// Structural checks: unique ids, pairs referencing entries of the
    /// right kind, and every listed file present under `root`.
    pub fn validate(&self, root: &Path) -> Result<(), BankError> {
        if self.version != MANIFEST_VERSION {
            return Err(BankError::Version(self.version));
        }
        let mut ids = BTreeSet::new();
        for entry in &self.entries {
            if !ids.insert(entry.id.as_str()) {
                return Err(BankError::Invalid(format!("duplicate id {}", entry.id)));
            }
            if !root.join(&entry.path).is_file() {
                return Err(BankError::Invalid(format!(
                    "entry {} points at missing file {}",
                    entry.id, entry.path
                )));
            }
        }
        let kind_of = |id: &str| {
            self.entries
                .iter()
                .find(|e| e.id == id)
                .map(|e| e.kind)
        };
        let mut pair_ids = BTreeSet::new();
        for pair in &self.pairs {
            if !pair_ids.insert(pair.pair_id.as_str()) {
                return Err(BankError::Invalid(format!(
                    "duplicate pair id {}",
                    pair.pair_id
                )));
            }
            if kind_of(&pair.curve_id) != Some(BankEntryKind::Curve) {
                return Err(BankError::Invalid(format!(
                    "pair {} references {} which is not a curve entry",
                    pair.pair_id, pair.curve_id
                )));
            }
            if kind_of(&pair.background_id) != Some(BankEntryKind::Background) {
                return Err(BankError::Invalid(format!(
                    "pair {} references {} which is not a background entry",
                    pair.pair_id, pair.background_id
                )));
            }
        }
        Ok(())
    }
}

/// Generate `count` curve masks into `<out_dir>/curves/` with per-item
/// seeds `split(master_seed, index)`, and write the manifest. Items build
/// in parallel; the manifest lists them in index order.
pub fn build_curve_bank(
    preset: &Preset,
    count: usize,
    master_seed: u64,
    out_dir: &Path,
) -> Result<BankManifest, BankError> {
    if count == 0 {
        return Err(BankError::Invalid(
            "curve bank needs at least one entry".into(),
        ));
    }
    preset.validate()?;
    let recipe_hash = preset_hash(preset);
    let entries = (0..count)
        .into_par_iter()
        .map(|i| -> Result<BankEntry, BankError> {
            let item_seed = split(master_seed, i as u64);
            let generated = generate_mask(preset, item_seed)?;
            let rel = format!("curves/curve_{i:04}.png");
            generated.mask.save_png(&out_dir.join(&rel))?;
            Ok(BankEntry {
                id: format!("curve_{i:04}"),
                path: rel,
                kind: BankEntryKind::Curve,
                seed: item_seed,
                config_hash: recipe_hash.clone(),
                preset: preset.name.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = BankManifest {
        version: MANIFEST_VERSION,
        preset: preset.name.clone(),
        entries,
        pairs: Vec::new(),
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Emit the closure of the inputs under the requested flips and rotations
/// into `<out_dir>/backgrounds/`. Variants are (identity + each flip) x
/// (each rotation, or just the unrotated image when `rotations` is empty),
/// flip applied before rotation. Entry ids are `<name>_<flip>` plus
/// `_r<degrees>` when rotations are given.
pub fn augment_backgrounds(
    inputs: &[(String, GrayImage)],
    flips: &[FlipAxis],
    rotations: &[f64],
    out_dir: &Path,
) -> Result<BankManifest, BankError> {
    if inputs.is_empty() {
        return Err(BankError::Invalid(
            "background augmentation needs at least one input image".into(),
        ));
    }
    let mut names = BTreeSet::new();
    for (name, _) in inputs {
        if !names.insert(name.as_str()) {
            return Err(BankError::Invalid(format!("duplicate input name {name}")));
        }
    }
    if flips.len() > 2 || (flips.len() == 2 && flips[0] == flips[1]) {
        return Err(BankError::Invalid("flip axes must be distinct".into()));
    }
    for &deg in rotations {
        if !(deg.is_finite() && (0.0..=90.0).contains(&deg)) {
            return Err(BankError::Invalid(format!(
                "rotation {deg} outside [0, 90] degrees"
            )));
        }
    }
    let flip_code = |axis: FlipAxis| match axis {
        FlipAxis::Horizontal => "h",
        FlipAxis::Vertical => "v",
    };
    let mut entries = Vec::new();
    for (name, image) in inputs {
        let mut variants: Vec<(String, GrayImage)> = vec![("id".into(), image.clone())];
        for &axis in flips {
            variants.push((flip_code(axis).into(), flip_gray(image, axis)));
        }
        for (code, flipped) in &variants {
            let rotated: Vec<(Option<f64>, GrayImage)> = if rotations.is_empty() {
                vec![(None, flipped.clone())]
            } else {
                rotations
                    .iter()
                    .map(|&deg| (Some(deg), rotate_gray(flipped, deg)))
                    .collect()
            };
            for (deg, variant) in rotated {
                let id = match deg {
                    None => format!("{name}_{code}"),
                    Some(d) => format!("{name}_{code}_r{d}"),
                };
                let rel = format!("backgrounds/{id}.png");
                variant.save_png(&out_dir.join(&rel))?;
                let descriptor = serde_json::json!({
                    "flip": code,
                    "rotation": deg,
                });
                entries.push(BankEntry {
                    id,
                    path: rel,
                    kind: BankEntryKind::Background,
                    seed: 0,
                    config_hash: hex::encode(sha2::Sha256::digest(
                        descriptor.to_string().as_bytes(),
                    )),
                    preset: "background".into(),
                });
            }
        }
    }
    let manifest = BankManifest {
        version: MANIFEST_VERSION,
        preset: "background".into(),
        entries,
        pairs: Vec::new(),
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Draw `count` (curve, background) pairs uniformly with replacement
/// (curve index before background index per pair), copy every referenced
/// file into `out_dir`, and write a manifest holding the referenced entries
/// plus the pair list.
pub fn assemble_pairs(
    curves: &BankManifest,
    curves_root: &Path,
    backgrounds: &BankManifest,
    backgrounds_root: &Path,
    count: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<BankManifest, BankError> {
    let curve_entries: Vec<&BankEntry> = curves
        .entries
        .iter()
        .filter(|e| e.kind == BankEntryKind::Curve)
        .collect();
    let background_entries: Vec<&BankEntry> = backgrounds
        .entries
        .iter()
        .filter(|e| e.kind == BankEntryKind::Background)
        .collect();
    if curve_entries.is_empty() {
        return Err(BankError::Invalid("curve bank has no curve entries".into()));
    }
    if background_entries.is_empty() {
        return Err(BankError::Invalid(
            "background bank has no background entries".into(),
        ));
    }
    let mut rng = stream_rng(seed, STREAM_POST);
    let mut pairs = Vec::with_capacity(count);
    let mut used_curves = BTreeSet::new();
    let mut used_backgrounds = BTreeSet::new();
    for i in 0..count {
        let ci = rng.random_range(0..curve_entries.len() as u32) as usize;
        let bi = rng.random_range(0..background_entries.len() as u32) as usize;
        used_curves.insert(ci);
        used_backgrounds.insert(bi);
        pairs.push(PairEntry {
            curve_id: curve_entries[ci].id.clone(),
            background_id: background_entries[bi].id.clone(),
            pair_id: format!("pair_{i:04}"),
        });
    }
    let mut entries = Vec::new();
    for &ci in &used_curves {
        let entry = curve_entries[ci];
        copy_atomic(&curves_root.join(&entry.path), &out_dir.join(&entry.path))?;
        entries.push(entry.clone());
    }
    for &bi in &used_backgrounds {
        let entry = background_entries[bi];
        copy_atomic(
            &backgrounds_root.join(&entry.path),
            &out_dir.join(&entry.path),
        )?;
        entries.push(entry.clone());
    }
    let manifest = BankManifest {
        version: MANIFEST_VERSION,
        preset: curves.preset.clone(),
        entries,
        pairs,
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn copy_atomic(from: &Path, to: &Path) -> Result<(), BankError> {
    let bytes = std::fs::read(from)?;
    write_atomic(to, &bytes)?;
    Ok(())
}

/// Overlay a curve on a background for visual QA: curve pixels shift by
/// `intensity_offset`, clamped to [0, 255]; everything else is untouched.
pub fn preview_composite(
    background: &GrayImage,
    curve: &Mask,
    intensity_offset: i32,
) -> Result<GrayImage, BankError> {
    if background.width != curve.width || background.height != curve.height {
        return Err(BankError::Invalid(format!(
            "background {}x{} and curve {}x{} differ",
            background.width, background.height, curve.width, curve.height
        )));
    }
    let mut out = background.clone();
    for (i, &fg) in curve.data.iter().enumerate() {
        if fg != 0 {
            out.data[i] = (background.data[i] as i32 + intensity_offset).clamp(0, 255) as u8;
        }
    }
    Ok(out)
}

/// Intensity counts over 8-bit images.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram256 {
    /// 256 counts, one per intensity value.
    pub bins: Vec<u64>,
    /// Total pixels counted; equals the bin sum.
    pub total: u64,
}

/// Count raw intensities across a set of images.
pub fn histogram(images: &[GrayImage]) -> Histogram256 {
    let mut bins = vec![0u64; 256];
    let mut total = 0u64;
    for image in images {
        for &v in &image.data {
            bins[v as usize] += 1;
            total += 1;
        }
    }
    Histogram256 { bins, total }
}

/// L1 distance between normalized histograms: sum of |a_i/a.total -
/// b_i/b.total|, in [0, 2]. Errors when either histogram is empty.
pub fn histogram_l1(a: &Histogram256, b: &Histogram256) -> Result<f64, BankError> {
    if a.total == 0 || b.total == 0 {
        return Err(BankError::Invalid(
            "histogram distance needs non-empty histograms".into(),
        ));
    }
    Ok(a.bins
        .iter()
        .zip(&b.bins)
        .map(|(&x, &y)| (x as f64 / a.total as f64 - y as f64 / b.total as f64).abs())
        .sum())
}
