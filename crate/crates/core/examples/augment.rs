//! The six flip/rotation variants used to enlarge a training set.
//!
//! ```text
//! cargo run --example augment -- tile.png out_dir
//! ```

use std::path::PathBuf;

use cascade_tiler::raster::{augment_set, Raster, AUGMENT_NAMES};
use cascade_tiler::synthmap::{generate, SynthParams};

fn main() -> cascade_tiler::Result<()> {
    let mut args = std::env::args().skip(1);
    let img = match args.next() {
        Some(p) => Raster::load_png(p)?,
        None => {
            let (map, _) = generate(&SynthParams {
                width: 256,
                height: 256,
                building_count_mean: 3.0,
                straddle: None,
                ..SynthParams::with_seed(1)
            })?;
            map
        }
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "augmented".into()));
    std::fs::create_dir_all(&out).map_err(|e| cascade_tiler::Error::Io {
        path: out.clone(),
        source: e,
    })?;

    for (variant, name) in augment_set(&img).iter().zip(AUGMENT_NAMES) {
        let path = out.join(format!("{name}.png"));
        variant.save_png(&path)?;
        println!("{}", path.display());
    }
    Ok(())
}
