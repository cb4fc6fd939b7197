//! Dev probe: foreground fraction and wall time per built-in preset.

use std::time::Instant;

use curvforge_core::preset::{builtin, generate_mask, BUILTIN_NAMES};

fn main() {
    for name in BUILTIN_NAMES {
        let preset = builtin(name).unwrap();
        for seed in 0..3u64 {
            let t0 = Instant::now();
            let out = generate_mask(&preset, seed).unwrap();
            let dt = t0.elapsed().as_secs_f64();
            let frac =
                out.mask.fg_count() as f64 / (out.mask.width * out.mask.height) as f64;
            println!(
                "{name:9} seed {seed}: {}x{} fg {:.1}% max_r {} in {dt:.2}s",
                out.mask.width,
                out.mask.height,
                100.0 * frac,
                out.max_radius
            );
        }
    }
}
