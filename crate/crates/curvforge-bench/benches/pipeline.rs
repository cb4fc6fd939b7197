//! Criterion benchmarks for the hot paths of mask synthesis: growth,
//! radius assignment, rasterization, thinning, distance transform, and
//! dilation, each on full-size inputs from the drive recipe.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use curvforge_core::metrics::distance_transform;
use curvforge_core::preset::{builtin, generate_mask};
use curvforge_core::raster::{dilate, max_render_radius, rasterize, skeletonize};
use curvforge_core::sca::{compute_radii, grow, scale_tree, GrowthConfig};
use curvforge_core::{Mask, StructuringElement};

fn drive_growth_config() -> GrowthConfig {
    let mut config = builtin("drive").unwrap().growth[0].clone();
    config.seed = 7;
    config
}

fn drive_mask() -> Mask {
    generate_mask(&builtin("drive").unwrap(), 7).unwrap().mask
}

fn bench_grow(c: &mut Criterion) {
    let config = drive_growth_config();
    c.bench_function("grow_drive_tree", |b| {
        b.iter(|| grow(black_box(&config)).unwrap())
    });
}

fn bench_radii(c: &mut Criterion) {
    let config = drive_growth_config();
    let tree = grow(&config).unwrap();
    c.bench_function("compute_radii_drive_tree", |b| {
        b.iter(|| compute_radii(black_box(tree.clone()), 3.0))
    });
}

fn bench_rasterize(c: &mut Criterion) {
    let preset = builtin("drive").unwrap();
    let config = drive_growth_config();
    let tree = scale_tree(
        compute_radii(grow(&config).unwrap(), 3.0),
        preset.raster_scale,
    );
    let trees = [tree];
    c.bench_function("rasterize_drive_tree_576", |b| {
        b.iter(|| rasterize(black_box(&trees), 576, 576).unwrap())
    });
}

fn bench_skeletonize(c: &mut Criterion) {
    let mask = drive_mask();
    c.bench_function("skeletonize_drive_mask_576", |b| {
        b.iter(|| skeletonize(black_box(&mask)))
    });
}

fn bench_distance_transform(c: &mut Criterion) {
    let mask = drive_mask();
    c.bench_function("distance_transform_drive_mask_576", |b| {
        b.iter(|| distance_transform(black_box(&mask)).unwrap())
    });
}

fn bench_dilate(c: &mut Criterion) {
    let mask = drive_mask();
    let skeleton = skeletonize(&mask);
    let radius = max_render_radius(std::slice::from_ref(&scale_tree(
        compute_radii(grow(&drive_growth_config()).unwrap(), 3.0),
        builtin("drive").unwrap().raster_scale,
    )));
    let se = StructuringElement::Disk { radius: radius + 1 };
    c.bench_function("dilate_drive_skeleton_by_max_radius", |b| {
        b.iter(|| dilate(black_box(&skeleton), black_box(&se)))
    });
}

criterion_group!(
    benches,
    bench_grow,
    bench_radii,
    bench_rasterize,
    bench_skeletonize,
    bench_distance_transform,
    bench_dilate
);
criterion_main!(benches);
