//! Segmentation evaluation metrics and loss kernels.
//!
//! Overlap metrics (Dice, sensitivity, specificity), surface distance (exact
//! Euclidean distance transform feeding the average symmetric surface
//! distance), topology (centerline Dice over thinned masks), the composite
//! cross-entropy/soft-Dice segmentation loss with analytic gradients, and the
//! contrastive softmax loss. All functions are pure; batch evaluation builds
//! a report with per-image rows plus population mean/std.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{skeletonize, Mask};

/// Probabilities are clamped into [EPS, 1-EPS] before any log.
const EPS: f64 = 1e-7;
/// Soft-Dice smoothing constant.
const DICE_SMOOTH: f64 = 1.0;
/// Finite stand-in for "no foreground here" in the distance transform;
/// large enough to dominate any squared pixel distance, finite so parabola
/// arithmetic never produces NaN.
const EDT_INF: f64 = 1e20;

/// Metric-level failure: shape misuse or undefined input.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("{0} mask has no foreground")]
    EmptyMask(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Per-pixel foreground probabilities in [0, 1], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ProbMap {
    /// Validated constructor: data length w*h, every value finite in [0, 1].
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, MetricsError> {
        if data.len() != width * height {
            return Err(MetricsError::InvalidInput(format!(
                "probability grid holds {} values for a {}x{} canvas",
                data.len(),
                width,
                height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MetricsError::InvalidInput(format!(
                "probability {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

/// Pixel-level confusion counts. `fn_` is the false-negative count (the
/// trailing underscore dodges the keyword).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// Count agreement between a predicted and a reference mask.
pub fn confusion(pred: &Mask, gt: &Mask) -> Result<ConfusionCounts, MetricsError> {
    check_dims(pred, gt)?;
    let mut c = ConfusionCounts {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        match (p != 0, g != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Dice similarity 2tp/(2tp+fp+fn), by convention 1 when both masks are
/// empty (the prediction is vacuously perfect).
pub fn dsc(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        1.0
    } else {
        2.0 * c.tp as f64 / denom as f64
    }
}

/// Sensitivity tp/(tp+fn); 1 when the reference has no foreground.
pub fn sensitivity(c: &ConfusionCounts) -> f64 {
    let denom = c.tp + c.fn_;
    if denom == 0 {
        1.0
    } else {
        c.tp as f64 / denom as f64
    }
}

/// Specificity tn/(tn+fp); 1 when the reference has no background.
pub fn specificity(c: &ConfusionCounts) -> f64 {
    let denom = c.tn + c.fp;
    if denom == 0 {
        1.0
    } else {
        c.tn as f64 / denom as f64
    }
}

/// Exact Euclidean distance from every pixel to the nearest foreground
/// pixel, row-major. Two-pass parabola-envelope transform over squared
/// distances; square roots are taken once at the end, so results equal the
/// all-pairs minimum bit for bit.
pub fn distance_transform(m: &Mask) -> Result<Vec<f64>, MetricsError> {
    if m.fg_count() == 0 {
        return Err(MetricsError::EmptyMask("distance transform input"));
    }
    let (w, h) = (m.width, m.height);
    let mut grid: Vec<f64> = m
        .data
        .iter()
        .map(|&v| if v != 0 { 0.0 } else { EDT_INF })
        .collect();

    // Columns first, then rows; each 1D pass minimizes (q - p)^2 + f(p).
    let mut col = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = grid[y * w + x];
        }
        let d = dt1d(&col);
        for y in 0..h {
            grid[y * w + x] = d[y];
        }
    }
    let mut row = vec![0.0; w];
    for y in 0..h {
        row.copy_from_slice(&grid[y * w..(y + 1) * w]);
        let d = dt1d(&row);
        for x in 0..w {
            grid[y * w + x] = d[x].sqrt();
        }
    }
    Ok(grid)
}

/// 1D squared-distance transform (lower envelope of parabolas).
fn dt1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let sq = |i: usize| (i * i) as f64;
    let cross = |q: usize, p: usize| (f[q] + sq(q) - f[p] - sq(p)) / (2 * q - 2 * p) as f64;
    for q in 1..n {
        let mut s = cross(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = cross(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        d[q] = (q as f64 - v[k] as f64).powi(2) + f[v[k]];
    }
    d
}

/// Boundary pixels: foreground with at least one 4-neighbor that is
/// background or off-canvas.
pub fn surface(m: &Mask) -> Mask {
    let mut out = Mask::new(m.width, m.height);
    for y in 0..m.height {
        for x in 0..m.width {
            if !m.get(x, y) {
                continue;
            }
            let bg = |dx: i64, dy: i64| {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                nx < 0
                    || ny < 0
                    || nx >= m.width as i64
                    || ny >= m.height as i64
                    || !m.get(nx as usize, ny as usize)
            };
            if bg(1, 0) || bg(-1, 0) || bg(0, 1) || bg(0, -1) {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Average symmetric surface distance: mean over both boundary point sets of
/// the distance to the opposite boundary. Errors on empty masks instead of
/// returning infinity.
pub fn assd(pred: &Mask, gt: &Mask) -> Result<f64, MetricsError> {
    check_dims(pred, gt)?;
    if pred.fg_count() == 0 {
        return Err(MetricsError::EmptyMask("prediction"));
    }
    if gt.fg_count() == 0 {
        return Err(MetricsError::EmptyMask("reference"));
    }
    let sp = surface(pred);
    let sg = surface(gt);
    let dist_to_gt = distance_transform(&sg)?;
    let dist_to_pred = distance_transform(&sp)?;
    // Two separate accumulators added once at the end keep the result
    // bit-identical when the arguments swap.
    let mut from_pred = 0.0;
    let mut from_gt = 0.0;
    let mut count = 0usize;
    for (x, y) in sp.fg_pixels() {
        from_pred += dist_to_gt[y * pred.width + x];
        count += 1;
    }
    for (x, y) in sg.fg_pixels() {
        from_gt += dist_to_pred[y * pred.width + x];
        count += 1;
    }
    Ok((from_pred + from_gt) / count as f64)
}

/// Centerline Dice: harmonic mean of topology precision (prediction skeleton
/// inside the reference) and topology sensitivity (reference skeleton inside
/// the prediction). 0 when either skeleton is empty.
pub fn cldice(pred: &Mask, gt: &Mask) -> Result<f64, MetricsError> {
    check_dims(pred, gt)?;
    let sp = skeletonize(pred);
    let sg = skeletonize(gt);
    let (np, ng) = (sp.fg_count(), sg.fg_count());
    if np == 0 || ng == 0 {
        return Ok(0.0);
    }
    let inside = |skel: &Mask, m: &Mask| {
        skel.data
            .iter()
            .zip(&m.data)
            .filter(|&(&s, &v)| s != 0 && v != 0)
            .count()
    };
    let tprec = inside(&sp, gt) as f64 / np as f64;
    let tsens = inside(&sg, pred) as f64 / ng as f64;
    if tprec + tsens == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * tprec * tsens / (tprec + tsens))
}

fn check_dims(a: &Mask, b: &Mask) -> Result<(), MetricsError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricsError::DimensionMismatch(
            a.width, a.height, b.width, b.height,
        ));
    }
    Ok(())
}

fn check_prob_dims(p: &ProbMap, m: &Mask) -> Result<(), MetricsError> {
    if p.width != m.width || p.height != m.height {
        return Err(MetricsError::DimensionMismatch(
            p.width, p.height, m.width, m.height,
        ));
    }
    Ok(())
}

fn clamped(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Mean binary cross-entropy and its gradient w.r.t. each probability.
/// Probabilities are clamped to [1e-7, 1-1e-7] first; the gradient is the
/// interior derivative at the clamped value.
pub fn ce_loss_grad(probs: &ProbMap, gt: &Mask) -> Result<(f64, Vec<f64>), MetricsError> {
    check_prob_dims(probs, gt)?;
    let n = probs.data.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probs.data.len());
    for (&p, &g) in probs.data.iter().zip(&gt.data) {
        let p = clamped(p);
        let g = g as f64;
        loss -= g * p.ln() + (1.0 - g) * (1.0 - p).ln();
        grad.push(-(g / p - (1.0 - g) / (1.0 - p)) / n);
    }
    Ok((loss / n, grad))
}

/// Soft-Dice loss 1 - (2 sum(p g) + s)/(sum p + sum g + s) with s = 1, and
/// its gradient w.r.t. each (clamped) probability.
pub fn dice_loss_grad(probs: &ProbMap, gt: &Mask) -> Result<(f64, Vec<f64>), MetricsError> {
    check_prob_dims(probs, gt)?;
    let mut inter = 0.0;
    let mut sum_p = 0.0;
    let mut sum_g = 0.0;
    for (&p, &g) in probs.data.iter().zip(&gt.data) {
        let p = clamped(p);
        inter += p * g as f64;
        sum_p += p;
        sum_g += g as f64;
    }
    let a = 2.0 * inter + DICE_SMOOTH;
    let b = sum_p + sum_g + DICE_SMOOTH;
    let loss = 1.0 - a / b;
    let grad = gt
        .data
        .iter()
        .map(|&g| -(2.0 * g as f64 * b - a) / (b * b))
        .collect();
    Ok((loss, grad))
}

/// Equal-weight sum of cross-entropy and soft-Dice: 0.5 ce + 0.5 dice, with
/// the combined gradient.
pub fn seg_loss(probs: &ProbMap, gt: &Mask) -> Result<(f64, Vec<f64>), MetricsError> {
    let (ce, ce_grad) = ce_loss_grad(probs, gt)?;
    let (dice, dice_grad) = dice_loss_grad(probs, gt)?;
    let grad = ce_grad
        .iter()
        .zip(&dice_grad)
        .map(|(a, b)| 0.5 * a + 0.5 * b)
        .collect();
    Ok((0.5 * ce + 0.5 * dice, grad))
}

/// Total objective: segmentation term plus weighted auxiliary term.
pub fn final_loss(seg: f64, psd: f64, lambda_psd: f64) -> f64 {
    seg + lambda_psd * psd
}

/// Contrastive softmax loss over one positive and N negative feature pairs:
/// -log(exp(v.v+/tau) / (exp(v.v+/tau) + sum_n exp(v.v-_n/tau))).
///
/// Computed with max-subtraction, and the shifted exponentials are summed in
/// value order, so permuting the negatives leaves the result identical to
/// the last bit.
pub fn info_nce(
    v: &[f64],
    v_plus: &[f64],
    negatives: &[Vec<f64>],
    tau: f64,
) -> Result<f64, MetricsError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(MetricsError::InvalidInput(format!(
            "temperature {tau} must be finite and > 0"
        )));
    }
    if negatives.is_empty() {
        return Err(MetricsError::InvalidInput(
            "at least one negative feature is required".into(),
        ));
    }
    let dot = |a: &[f64], b: &[f64]| -> Result<f64, MetricsError> {
        if a.len() != b.len() {
            return Err(MetricsError::InvalidInput(format!(
                "feature lengths differ: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
    };
    let pos = dot(v, v_plus)? / tau;
    let mut logits = Vec::with_capacity(negatives.len() + 1);
    logits.push(pos);
    for neg in negatives {
        logits.push(dot(v, neg)? / tau);
    }
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    exps.sort_by(f64::total_cmp);
    let denom: f64 = exps.iter().sum();
    Ok(denom.ln() - (pos - m))
}

/// One evaluated image pair.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ImageEval {
    pub id: String,
    pub dsc: f64,
    pub assd: f64,
    pub se: f64,
    pub sp: f64,
    pub cldice: f64,
}

/// Mean or spread of each metric over a batch.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct MetricSummary {
    pub dsc: f64,
    pub assd: f64,
    pub se: f64,
    pub sp: f64,
    pub cldice: f64,
}

/// Batch evaluation result: per-image rows plus population mean and std.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub images: Vec<ImageEval>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    pub count: usize,
}

impl EvalReport {
    /// Aggregate per-image rows; mean and population std are 0 for an empty
    /// batch (keeps the report JSON-serializable).
    pub fn from_images(images: Vec<ImageEval>) -> EvalReport {
        let count = images.len();
        let agg = |f: &dyn Fn(&ImageEval) -> f64| -> (f64, f64) {
            if count == 0 {
                return (0.0, 0.0);
            }
            let mean = images.iter().map(|i| f(i)).sum::<f64>() / count as f64;
            let var = images
                .iter()
                .map(|i| (f(i) - mean).powi(2))
                .sum::<f64>()
                / count as f64;
            (mean, var.sqrt())
        };
        let (dsc_m, dsc_s) = agg(&|i| i.dsc);
        let (assd_m, assd_s) = agg(&|i| i.assd);
        let (se_m, se_s) = agg(&|i| i.se);
        let (sp_m, sp_s) = agg(&|i| i.sp);
        let (cl_m, cl_s) = agg(&|i| i.cldice);
        EvalReport {
            images,
            mean: MetricSummary {
                dsc: dsc_m,
                assd: assd_m,
                se: se_m,
                sp: sp_m,
                cldice: cl_m,
            },
            std: MetricSummary {
                dsc: dsc_s,
                assd: assd_s,
                se: se_s,
                sp: sp_s,
                cldice: cl_s,
            },
            count,
        }
    }
}

/// All five metrics for one pair.
pub fn evaluate_pair(id: &str, pred: &Mask, gt: &Mask) -> Result<ImageEval, MetricsError> {
    let c = confusion(pred, gt)?;
    Ok(ImageEval {
        id: id.to_string(),
        dsc: dsc(&c),
        assd: assd(pred, gt)?,
        se: sensitivity(&c),
        sp: specificity(&c),
        cldice: cldice(pred, gt)?,
    })
}

/// Evaluate many pairs in parallel (order of the report rows follows the
/// input order).
pub fn evaluate_batch(pairs: &[(String, Mask, Mask)]) -> Result<EvalReport, MetricsError> {
    let images = pairs
        .par_iter()
        .map(|(id, pred, gt)| evaluate_pair(id, pred, gt))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_images(images))
}
