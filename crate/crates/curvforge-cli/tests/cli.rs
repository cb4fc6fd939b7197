//! End-to-end tests of the `curvforge` binary: flag parsing, exit codes,
//! output determinism, and the documented file formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_curvforge"));
    cmd.env("CURVFORGE_THREADS", "2");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn curvforge")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        stdout(out),
        stderr(out)
    );
}

/// Small single-component recipe so generation tests stay fast.
fn tiny_preset_json() -> String {
    r#"{
      "name": "tiny",
      "growth": [{
        "bound": {"shape": "square", "origin": {"x": 0.0, "y": 0.0}, "side": 63.0},
        "roots": {"kind": "uniform_box", "x_range": [28.0, 36.0], "y_range": [28.0, 36.0]},
        "attractor_grid": 10,
        "jitter": 3.0,
        "attraction_distance": 12.0,
        "kill_distance": 3.0,
        "segment_length": 3.0,
        "max_nodes": 150,
        "murray_exponent": 3.0
      }],
      "canvas_width": 64,
      "canvas_height": 64,
      "post_ops": []
    }"#
    .to_string()
}

fn write_tiny_preset(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.json");
    std::fs::write(&path, tiny_preset_json()).unwrap();
    path
}

/// Uncompressed 8-bit grayscale PNG, value = f(x, y).
fn write_gray_png(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) {
    let mut img = curvforge_core::GrayImage::new(w as usize, h as usize);
    for y in 0..h {
        for x in 0..w {
            img.set(x as usize, y as usize, f(x, y));
        }
    }
    img.save_png(path).unwrap();
}

#[test]
fn help_exits_zero() {
    for args in [
        vec!["--help"],
        vec!["gen", "--help"],
        vec!["eval", "--help"],
        vec!["preset", "--help"],
    ] {
        let out = run(&args);
        assert_code(&out, 0);
        assert!(stdout(&out).contains("Usage"));
    }
}

#[test]
fn unknown_flag_exits_two() {
    let out = run(&["gen", "--bogus"]);
    assert_code(&out, 2);
}

#[test]
fn gen_requires_recipe_and_rejects_both() {
    let dir = TempDir::new().unwrap();
    let out = run(&["gen", "--count", "1", "--out", dir.path().to_str().unwrap()]);
    assert_code(&out, 2);

    let config = write_tiny_preset(dir.path());
    let out = run(&[
        "gen",
        "--preset",
        "drive",
        "--config",
        config.to_str().unwrap(),
        "--count",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn preset_list_names_all_builtins() {
    let out = run(&["preset", "list"]);
    assert_code(&out, 0);
    let listing = stdout(&out);
    let names: Vec<&str> = listing.lines().collect();
    assert_eq!(names, ["octa500", "corn", "drive", "chasedb1"]);
}

#[test]
fn preset_show_unknown_exits_two() {
    let out = run(&["preset", "show", "nope"]);
    assert_code(&out, 2);
    assert!(stderr(&out).contains("octa500"), "should list alternatives");
}

#[test]
fn preset_show_round_trips_through_gen_config() {
    let dir = TempDir::new().unwrap();
    let show = run(&["preset", "show", "drive"]);
    assert_code(&show, 0);
    let config = dir.path().join("drive.json");
    std::fs::write(&config, show.stdout).unwrap();

    let by_name = dir.path().join("by_name");
    let by_config = dir.path().join("by_config");
    let out = run(&[
        "gen",
        "--preset",
        "drive",
        "--count",
        "1",
        "--seed",
        "3",
        "--out",
        by_name.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let out = run(&[
        "gen",
        "--config",
        config.to_str().unwrap(),
        "--count",
        "1",
        "--seed",
        "3",
        "--out",
        by_config.to_str().unwrap(),
    ]);
    assert_code(&out, 0);

    for rel in ["manifest.json", "curves/curve_0000.png"] {
        let a = std::fs::read(by_name.join(rel)).unwrap();
        let b = std::fs::read(by_config.join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between --preset and --config runs");
    }
}

#[test]
fn gen_is_deterministic_and_prints_manifest_path() {
    let dir = TempDir::new().unwrap();
    let config = write_tiny_preset(dir.path());
    let run_once = |out_dir: &Path| -> Output {
        run(&[
            "gen",
            "--config",
            config.to_str().unwrap(),
            "--count",
            "3",
            "--seed",
            "11",
            "--out",
            out_dir.to_str().unwrap(),
        ])
    };
    let a_dir = dir.path().join("a");
    let b_dir = dir.path().join("b");
    let out = run_once(&a_dir);
    assert_code(&out, 0);
    assert_eq!(
        stdout(&out).trim(),
        a_dir.join("manifest.json").to_str().unwrap()
    );
    assert_code(&run_once(&b_dir), 0);

    for i in 0..3 {
        let rel = format!("curves/curve_{i:04}.png");
        let a = std::fs::read(a_dir.join(&rel)).unwrap();
        let b = std::fs::read(b_dir.join(&rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between identical runs");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["version"], 1);
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 3);
}

#[test]
fn gen_bad_config_json_exits_two_and_missing_exits_three() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = run(&[
        "gen",
        "--config",
        bad.to_str().unwrap(),
        "--count",
        "1",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_code(&out, 2);

    let out = run(&[
        "gen",
        "--config",
        dir.path().join("absent.json").to_str().unwrap(),
        "--count",
        "1",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_code(&out, 3);
}

#[test]
fn noisy_skel_alpha_zero_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let config = write_tiny_preset(dir.path());
    let bank = dir.path().join("bank");
    assert_code(
        &run(&[
            "gen",
            "--config",
            config.to_str().unwrap(),
            "--count",
            "1",
            "--seed",
            "2",
            "--out",
            bank.to_str().unwrap(),
        ]),
        0,
    );
    let mask = bank.join("curves/curve_0000.png");
    let skel1 = dir.path().join("skel1.png");
    let skel2 = dir.path().join("skel2.png");
    // alpha 0 disables the warp, so the output is the plain skeleton.
    assert_code(
        &run(&[
            "noisy-skel",
            "--in",
            mask.to_str().unwrap(),
            "--alpha",
            "0",
            "--out",
            skel1.to_str().unwrap(),
        ]),
        0,
    );
    // A skeleton is a fixed point of skeletonization.
    assert_code(
        &run(&[
            "noisy-skel",
            "--in",
            skel1.to_str().unwrap(),
            "--alpha",
            "0",
            "--out",
            skel2.to_str().unwrap(),
        ]),
        0,
    );
    let a = std::fs::read(&skel1).unwrap();
    let b = std::fs::read(&skel2).unwrap();
    assert_eq!(a, b);
}

#[test]
fn noisy_skel_rejects_bad_inputs() {
    let dir = TempDir::new().unwrap();
    let junk = dir.path().join("junk.png");
    std::fs::write(&junk, b"not a png").unwrap();
    let out_png = dir.path().join("out.png");

    let out = run(&[
        "noisy-skel",
        "--in",
        junk.to_str().unwrap(),
        "--out",
        out_png.to_str().unwrap(),
    ]);
    assert_code(&out, 2);

    let missing = dir.path().join("absent.png");
    let out = run(&[
        "noisy-skel",
        "--in",
        missing.to_str().unwrap(),
        "--out",
        out_png.to_str().unwrap(),
    ]);
    assert_code(&out, 3);
    assert!(stderr(&out).contains("absent.png"), "error names the file");

    let valid = dir.path().join("ok.png");
    write_gray_png(&valid, 8, 8, |_, _| 0);
    let out = run(&[
        "noisy-skel",
        "--in",
        valid.to_str().unwrap(),
        "--alpha",
        "-1",
        "--out",
        out_png.to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn inpaint_mask_radius_zero_without_shapes_is_passthrough() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.png");
    write_gray_png(&input, 32, 32, |x, y| if y == 16 && x >= 4 && x < 28 { 255 } else { 0 });
    let out_png = dir.path().join("out.png");
    assert_code(
        &run(&[
            "inpaint-mask",
            "--in",
            input.to_str().unwrap(),
            "--radius",
            "0",
            "--out",
            out_png.to_str().unwrap(),
        ]),
        0,
    );
    let a = std::fs::read(&input).unwrap();
    let b = std::fs::read(&out_png).unwrap();
    assert_eq!(a, b);
}

#[test]
fn inpaint_mask_grows_with_radius_and_extra_shapes() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.png");
    write_gray_png(&input, 64, 64, |x, y| if y == 32 && x >= 8 && x < 56 { 255 } else { 0 });

    let count = |path: &Path| -> usize {
        curvforge_core::Mask::load_png(path).unwrap().fg_count()
    };
    let dilated = dir.path().join("dilated.png");
    assert_code(
        &run(&[
            "inpaint-mask",
            "--in",
            input.to_str().unwrap(),
            "--radius",
            "3",
            "--out",
            dilated.to_str().unwrap(),
        ]),
        0,
    );
    assert!(count(&dilated) > count(&input));

    let shapes = dir.path().join("shapes.png");
    assert_code(
        &run(&[
            "inpaint-mask",
            "--in",
            input.to_str().unwrap(),
            "--radius",
            "3",
            "--rects",
            "2",
            "--chains",
            "1",
            "--seed",
            "5",
            "--out",
            shapes.to_str().unwrap(),
        ]),
        0,
    );
    assert!(count(&shapes) >= count(&dilated));
    let base = curvforge_core::Mask::load_png(&dilated).unwrap();
    let with_shapes = curvforge_core::Mask::load_png(&shapes).unwrap();
    assert!(base.is_subset_of(&with_shapes), "shapes only add pixels");
}

#[test]
fn augment_bg_emits_full_variant_grid() {
    let dir = TempDir::new().unwrap();
    let bgs = dir.path().join("bgs");
    std::fs::create_dir(&bgs).unwrap();
    write_gray_png(&bgs.join("one.png"), 16, 16, |x, _| (x * 16) as u8);
    let out_dir = dir.path().join("bank");
    // 1 image x (identity + 2 flips) x 4 default rotations.
    assert_code(
        &run(&[
            "augment-bg",
            "--in",
            bgs.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]),
        0,
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 12);

    let explicit = dir.path().join("bank2");
    assert_code(
        &run(&[
            "augment-bg",
            "--in",
            bgs.to_str().unwrap(),
            "--rotations",
            "0,45",
            "--out",
            explicit.to_str().unwrap(),
        ]),
        0,
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(explicit.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["entries"].as_array().unwrap().len(), 6);

    let out = run(&[
        "augment-bg",
        "--in",
        bgs.to_str().unwrap(),
        "--rotations",
        "120",
        "--out",
        dir.path().join("bank3").to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn assemble_pairs_curves_with_backgrounds() {
    let dir = TempDir::new().unwrap();
    let config = write_tiny_preset(dir.path());
    let curves = dir.path().join("curves");
    assert_code(
        &run(&[
            "gen",
            "--config",
            config.to_str().unwrap(),
            "--count",
            "2",
            "--seed",
            "4",
            "--out",
            curves.to_str().unwrap(),
        ]),
        0,
    );
    let bgs = dir.path().join("bgs");
    std::fs::create_dir(&bgs).unwrap();
    write_gray_png(&bgs.join("bg.png"), 64, 64, |x, y| ((x + y) * 2) as u8);
    let bg_bank = dir.path().join("bg_bank");
    assert_code(
        &run(&[
            "augment-bg",
            "--in",
            bgs.to_str().unwrap(),
            "--rotations",
            "0",
            "--out",
            bg_bank.to_str().unwrap(),
        ]),
        0,
    );
    let pairs = dir.path().join("pairs");
    assert_code(
        &run(&[
            "assemble",
            "--curves",
            curves.to_str().unwrap(),
            "--backgrounds",
            bg_bank.to_str().unwrap(),
            "--count",
            "5",
            "--seed",
            "1",
            "--out",
            pairs.to_str().unwrap(),
        ]),
        0,
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(pairs.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pairs"].as_array().unwrap().len(), 5);
    // Every referenced file was copied into the new bank.
    for entry in manifest["entries"].as_array().unwrap() {
        let rel = entry["path"].as_str().unwrap();
        assert!(pairs.join(rel).is_file(), "missing {rel}");
    }

    let out = run(&[
        "assemble",
        "--curves",
        dir.path().join("absent").to_str().unwrap(),
        "--backgrounds",
        bg_bank.to_str().unwrap(),
        "--count",
        "1",
        "--out",
        dir.path().join("p2").to_str().unwrap(),
    ]);
    assert_code(&out, 3);
}

#[test]
fn eval_perfect_prediction_scores_one() {
    let dir = TempDir::new().unwrap();
    let pred = dir.path().join("pred");
    let gt = dir.path().join("gt");
    std::fs::create_dir(&pred).unwrap();
    std::fs::create_dir(&gt).unwrap();
    let draw = |x: u32, y: u32| if x.abs_diff(y) <= 1 { 255 } else { 0 };
    write_gray_png(&pred.join("img1.png"), 32, 32, draw);
    write_gray_png(&gt.join("img1.png"), 32, 32, draw);
    let report = dir.path().join("report.json");
    let out = run(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(stdout(&out).contains("100.00"), "stdout: {}", stdout(&out));

    let parsed: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(parsed["count"], 1);
    assert_eq!(parsed["mean"]["dsc"], 1.0);
    assert_eq!(parsed["mean"]["assd"], 0.0);
    assert_eq!(parsed["images"][0]["id"], "img1");
}

#[test]
fn eval_stem_mismatch_exits_four_and_names_offenders() {
    let dir = TempDir::new().unwrap();
    let pred = dir.path().join("pred");
    let gt = dir.path().join("gt");
    std::fs::create_dir(&pred).unwrap();
    std::fs::create_dir(&gt).unwrap();
    write_gray_png(&pred.join("a.png"), 8, 8, |_, _| 0);
    write_gray_png(&pred.join("extra.png"), 8, 8, |_, _| 0);
    write_gray_png(&gt.join("a.png"), 8, 8, |_, _| 0);
    write_gray_png(&gt.join("orphan.png"), 8, 8, |_, _| 0);
    let out = run(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--report",
        dir.path().join("r.json").to_str().unwrap(),
    ]);
    assert_code(&out, 4);
    let err = stderr(&out);
    assert!(err.contains("extra") && err.contains("orphan"), "stderr: {err}");
}

#[test]
fn hist_distance_zero_for_identical_dirs() {
    let dir = TempDir::new().unwrap();
    let imgs = dir.path().join("imgs");
    std::fs::create_dir(&imgs).unwrap();
    write_gray_png(&imgs.join("a.png"), 16, 16, |x, y| ((x * y) % 256) as u8);
    let out = run(&[
        "hist",
        "--a",
        imgs.to_str().unwrap(),
        "--b",
        imgs.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert_eq!(stdout(&out).trim(), "0");
}

#[test]
fn thread_override_is_validated() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .env("CURVFORGE_THREADS", "zero")
        .args(["preset", "list"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin()
        .env("CURVFORGE_THREADS", "1")
        .args(["preset", "list"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    drop(dir);
}
