//! Command-line front end for the curve-synthesis toolkit.
//!
//! Every subcommand is deterministic given its flags: all randomness flows
//! from explicit seeds, and no output embeds a timestamp or absolute path.
//! Exit codes: 0 success, 2 invalid configuration or parameters, 3 I/O
//! failure, 4 evaluation pairing mismatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use curvforge_core::bank::{
    assemble_pairs, augment_backgrounds, build_curve_bank, histogram, histogram_l1, BankError,
    BankManifest, MANIFEST_FILE,
};
use curvforge_core::fsio::write_atomic;
use curvforge_core::maskgen::{
    default_inpaint_radius, inpaint_mask_from_skeleton, random_chain_mask, random_rect_mask,
    ChainMaskParams, MaskGenError, RectMaskParams,
};
use curvforge_core::metrics::{evaluate_batch, MetricsError};
use curvforge_core::preset::{builtin, PresetError, BUILTIN_NAMES};
use curvforge_core::raster::{elastic_transform, skeletonize, RasterError};
use curvforge_core::rng::split;
use curvforge_core::sca::GrowthError;
use curvforge_core::{ElasticParams, FlipAxis, GrayImage, Mask, Preset};

#[derive(Parser)]
#[command(
    name = "curvforge",
    version,
    about = "Deterministic synthesis and evaluation of curvilinear-structure masks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a bank of curve masks from a preset or a JSON config.
    Gen(GenArgs),
    /// Skeletonize a mask and jitter the skeleton with an elastic warp.
    NoisySkel(NoisySkelArgs),
    /// Build an inpainting mask: dilated skeleton plus random shapes.
    InpaintMask(InpaintMaskArgs),
    /// Sample (curve, background) pairs into a self-contained bank.
    Assemble(AssembleArgs),
    /// Expand background images under flips and rotations.
    AugmentBg(AugmentBgArgs),
    /// Score predicted masks against references and write a JSON report.
    Eval(EvalArgs),
    /// Intensity-histogram distance between two image directories.
    Hist(HistArgs),
    /// Inspect the built-in presets.
    Preset(PresetArgs),
}

#[derive(Parser)]
#[command(group(ArgGroup::new("recipe").required(true).args(["preset", "config"])))]
struct GenArgs {
    /// Built-in preset name (octa500, corn, drive, chasedb1).
    #[arg(long)]
    preset: Option<String>,
    /// JSON file with the same shape as `preset show` output.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of masks to generate.
    #[arg(long)]
    count: usize,
    /// Master seed; item i derives its own seed from (seed, i).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output bank directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser)]
struct NoisySkelArgs {
    /// Input mask PNG.
    #[arg(long = "in")]
    input: PathBuf,
    /// Elastic displacement strength in pixels.
    #[arg(long, default_value_t = 8.0)]
    alpha: f64,
    /// Gaussian smoothing of the displacement field.
    #[arg(long, default_value_t = 4.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output skeleton PNG.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser)]
struct InpaintMaskArgs {
    /// Input skeleton PNG.
    #[arg(long = "in")]
    input: PathBuf,
    /// Skeleton dilation radius; defaults to 7 px scaled by canvas size.
    #[arg(long)]
    radius: Option<u32>,
    /// Number of random rectangles to add.
    #[arg(long, default_value_t = 0)]
    rects: u32,
    /// Number of random polygonal chains to add.
    #[arg(long, default_value_t = 0)]
    chains: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output mask PNG.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser)]
struct AssembleArgs {
    /// Curve bank directory (holds manifest.json).
    #[arg(long)]
    curves: PathBuf,
    /// Background bank directory (holds manifest.json).
    #[arg(long)]
    backgrounds: PathBuf,
    /// Number of pairs to draw (with replacement).
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output bank directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser)]
struct AugmentBgArgs {
    /// Directory of background PNGs.
    #[arg(long = "in")]
    input: PathBuf,
    /// Rotation angles in degrees, each in [0, 90].
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 30.0, 60.0, 90.0])]
    rotations: Vec<f64>,
    /// Output bank directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Parser)]
struct EvalArgs {
    /// Directory of predicted mask PNGs.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of reference mask PNGs with matching file stems.
    #[arg(long)]
    gt: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Parser)]
struct HistArgs {
    /// First image directory.
    #[arg(long)]
    a: PathBuf,
    /// Second image directory.
    #[arg(long)]
    b: PathBuf,
}

#[derive(Parser)]
struct PresetArgs {
    #[command(subcommand)]
    command: PresetCmd,
}

#[derive(Subcommand)]
enum PresetCmd {
    /// List the built-in preset names.
    List,
    /// Print one built-in preset as JSON (feed back via `gen --config`).
    Show { name: String },
}

/// Failure with its exit code: 2 config, 3 I/O, 4 pairing.
enum CliError {
    Config(String),
    Io(String),
    Pairing(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Pairing(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Pairing(m) => m,
        }
    }
}

fn raster_err(e: RasterError) -> CliError {
    match e {
        RasterError::Io(io) => CliError::Io(io.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

/// Like `raster_err` but names the file involved.
fn raster_err_at(path: &Path) -> impl FnOnce(RasterError) -> CliError + '_ {
    move |e| match raster_err(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn growth_err(e: GrowthError) -> CliError {
    CliError::Config(e.to_string())
}

fn preset_err(e: PresetError) -> CliError {
    match e {
        PresetError::Raster(r) => raster_err(r),
        PresetError::Growth(g) => growth_err(g),
        other => CliError::Config(other.to_string()),
    }
}

fn bank_err(e: BankError) -> CliError {
    match e {
        BankError::Io(io) => CliError::Io(io.to_string()),
        BankError::Raster(r) => raster_err(r),
        BankError::Preset(p) => preset_err(p),
        other => CliError::Config(other.to_string()),
    }
}

fn maskgen_err(e: MaskGenError) -> CliError {
    CliError::Config(e.to_string())
}

fn metrics_err(e: MetricsError) -> CliError {
    CliError::Config(e.to_string())
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes instead of panicking.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Cap rayon's worker count from CURVFORGE_THREADS when set.
fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CURVFORGE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Config(format!("CURVFORGE_THREADS={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::NoisySkel(args) => cmd_noisy_skel(args),
        Command::InpaintMask(args) => cmd_inpaint_mask(args),
        Command::Assemble(args) => cmd_assemble(args),
        Command::AugmentBg(args) => cmd_augment_bg(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Hist(args) => cmd_hist(args),
        Command::Preset(args) => cmd_preset(args),
    }
}

fn load_recipe(args: &GenArgs) -> Result<Preset, CliError> {
    if let Some(name) = &args.preset {
        return builtin(name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown preset {name}; available: {}",
                BUILTIN_NAMES.join(", ")
            ))
        });
    }
    let path = args.config.as_ref().expect("clap requires preset or config");
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let preset = load_recipe(&args)?;
    for warning in preset.validate().map_err(preset_err)? {
        eprintln!("warning: {warning}");
    }
    build_curve_bank(&preset, args.count, args.seed, &args.out).map_err(bank_err)?;
    println!("{}", args.out.join(MANIFEST_FILE).display());
    Ok(())
}

fn cmd_noisy_skel(args: NoisySkelArgs) -> Result<(), CliError> {
    if !(args.alpha.is_finite() && args.alpha >= 0.0) {
        return Err(CliError::Config(format!(
            "alpha {} must be finite and non-negative",
            args.alpha
        )));
    }
    if !(args.sigma.is_finite() && args.sigma >= 0.0) {
        return Err(CliError::Config(format!(
            "sigma {} must be finite and non-negative",
            args.sigma
        )));
    }
    let mask = Mask::load_png(&args.input).map_err(raster_err_at(&args.input))?;
    let skeleton = skeletonize(&mask);
    let jittered = elastic_transform(
        &skeleton,
        &ElasticParams {
            alpha: args.alpha,
            sigma: args.sigma,
            seed: args.seed,
        },
    );
    jittered.save_png(&args.out).map_err(raster_err)?;
    println!("{}", args.out.display());
    Ok(())
}

fn cmd_inpaint_mask(args: InpaintMaskArgs) -> Result<(), CliError> {
    let skeleton = Mask::load_png(&args.input).map_err(raster_err_at(&args.input))?;
    let radius = args
        .radius
        .unwrap_or_else(|| default_inpaint_radius(skeleton.width.max(skeleton.height)));
    let mut mask = inpaint_mask_from_skeleton(&skeleton, radius);
    if args.rects > 0 {
        let mut params = RectMaskParams::defaults(mask.width, mask.height, split(args.seed, 1));
        params.count_range = (args.rects, args.rects);
        let rects =
            random_rect_mask(mask.width, mask.height, &params).map_err(maskgen_err)?;
        or_into(&mut mask, &rects);
    }
    if args.chains > 0 {
        let mut params = ChainMaskParams::defaults(split(args.seed, 2));
        params.chain_count_range = (args.chains, args.chains);
        let chains =
            random_chain_mask(mask.width, mask.height, &params).map_err(maskgen_err)?;
        or_into(&mut mask, &chains);
    }
    mask.save_png(&args.out).map_err(raster_err)?;
    println!("{}", args.out.display());
    Ok(())
}

fn or_into(acc: &mut Mask, other: &Mask) {
    for (a, b) in acc.data.iter_mut().zip(&other.data) {
        *a |= b;
    }
}

fn cmd_assemble(args: AssembleArgs) -> Result<(), CliError> {
    let curves = BankManifest::load(&args.curves.join(MANIFEST_FILE)).map_err(bank_err)?;
    let backgrounds =
        BankManifest::load(&args.backgrounds.join(MANIFEST_FILE)).map_err(bank_err)?;
    assemble_pairs(
        &curves,
        &args.curves,
        &backgrounds,
        &args.backgrounds,
        args.count,
        args.seed,
        &args.out,
    )
    .map_err(bank_err)?;
    println!("{}", args.out.join(MANIFEST_FILE).display());
    Ok(())
}

fn cmd_augment_bg(args: AugmentBgArgs) -> Result<(), CliError> {
    let files = list_pngs(&args.input)?;
    let mut inputs = Vec::with_capacity(files.len());
    for (stem, path) in files {
        inputs.push((stem, GrayImage::load_png(&path).map_err(raster_err_at(&path))?));
    }
    augment_backgrounds(
        &inputs,
        &[FlipAxis::Horizontal, FlipAxis::Vertical],
        &args.rotations,
        &args.out,
    )
    .map_err(bank_err)?;
    println!("{}", args.out.join(MANIFEST_FILE).display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let pred_files = list_pngs(&args.pred)?;
    let gt_files = list_pngs(&args.gt)?;
    let pred_stems: Vec<&str> = pred_files.iter().map(|(s, _)| s.as_str()).collect();
    let gt_stems: Vec<&str> = gt_files.iter().map(|(s, _)| s.as_str()).collect();
    if pred_stems != gt_stems {
        let only_pred: Vec<&str> = pred_stems
            .iter()
            .filter(|s| !gt_stems.contains(s))
            .copied()
            .collect();
        let only_gt: Vec<&str> = gt_stems
            .iter()
            .filter(|s| !pred_stems.contains(s))
            .copied()
            .collect();
        return Err(CliError::Pairing(format!(
            "file stems differ (prediction-only: [{}], reference-only: [{}])",
            only_pred.join(", "),
            only_gt.join(", ")
        )));
    }
    let mut pairs = Vec::with_capacity(pred_files.len());
    for ((stem, pred_path), (_, gt_path)) in pred_files.iter().zip(&gt_files) {
        let pred = Mask::load_png(pred_path).map_err(raster_err_at(pred_path))?;
        let gt = Mask::load_png(gt_path).map_err(raster_err_at(gt_path))?;
        pairs.push((stem.clone(), pred, gt));
    }
    let report = evaluate_batch(&pairs).map_err(metrics_err)?;
    for row in &report.images {
        println!(
            "{} DSC {:.2} ASSD {:.2} SE {:.2} SP {:.2} clDice {:.2}",
            row.id,
            row.dsc * 100.0,
            row.assd,
            row.se * 100.0,
            row.sp * 100.0,
            row.cldice * 100.0
        );
    }
    println!(
        "mean DSC {:.2} ASSD {:.2} SE {:.2} SP {:.2} clDice {:.2} over {} images",
        report.mean.dsc * 100.0,
        report.mean.assd,
        report.mean.se * 100.0,
        report.mean.sp * 100.0,
        report.mean.cldice * 100.0,
        report.count
    );
    let mut bytes = serde_json::to_vec_pretty(&report)
        .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
    bytes.push(b'\n');
    write_atomic(&args.report, &bytes).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

fn cmd_hist(args: HistArgs) -> Result<(), CliError> {
    let load_all = |dir: &Path| -> Result<Vec<GrayImage>, CliError> {
        list_pngs(dir)?
            .into_iter()
            .map(|(_, path)| GrayImage::load_png(&path).map_err(raster_err_at(&path)))
            .collect()
    };
    let a = histogram(&load_all(&args.a)?);
    let b = histogram(&load_all(&args.b)?);
    let distance = histogram_l1(&a, &b).map_err(bank_err)?;
    println!("{distance}");
    Ok(())
}

fn cmd_preset(args: PresetArgs) -> Result<(), CliError> {
    match args.command {
        PresetCmd::List => {
            for name in BUILTIN_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        PresetCmd::Show { name } => {
            let preset = builtin(&name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown preset {name}; available: {}",
                    BUILTIN_NAMES.join(", ")
                ))
            })?;
            let json = serde_json::to_string_pretty(&preset)
                .map_err(|e| CliError::Config(e.to_string()))?;
            println!("{json}");
            Ok(())
        }
    }
}

/// PNG files in a directory as (stem, path), sorted by stem.
fn list_pngs(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Io(e.to_string()))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| {
                CliError::Config(format!("non-UTF-8 file name {}", path.display()))
            })?
            .to_string();
        files.push((stem, path));
    }
    files.sort();
    Ok(files)
}
