//! Generate a synthetic map sheet with exact ground truth.
//!
//! ```text
//! cargo run --example synth_map -- 42 out_dir
//! ```

use std::path::PathBuf;

use cascade_tiler::pyramid::{tile_grid, write_world_file};
use cascade_tiler::synthmap::{generate, truth_tile_label, SynthParams};

fn main() -> cascade_tiler::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args
        .next()
        .map_or(42, |s| s.parse().expect("seed must be an integer"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synth".into()));
    std::fs::create_dir_all(&out).map_err(|e| cascade_tiler::Error::Io {
        path: out.clone(),
        source: e,
    })?;

    let (map, truth) = generate(&SynthParams::with_seed(seed))?;
    map.save_png(out.join("map.png"))?;
    truth.truth_mask.save_png(out.join("truth.png"))?;
    truth.write_text(out.join("truth.txt"))?;
    if let Some(geo) = &truth.geo {
        write_world_file(out.join("map.wld"), geo)?;
    }

    let tiles = tile_grid(map.width(), map.height(), 1792, 768);
    let positive = tiles.iter().filter(|t| truth_tile_label(&truth, t)).count();
    println!(
        "seed {seed}: {} buildings, {} of {} sheet tiles hold buildings",
        truth.buildings.len(),
        positive,
        tiles.len()
    );
    for b in truth.buildings.iter().take(5) {
        println!(
            "  {:?} centroid ({:.1}, {:.1})",
            b.rect, b.centroid.0, b.centroid.1
        );
    }
    Ok(())
}
