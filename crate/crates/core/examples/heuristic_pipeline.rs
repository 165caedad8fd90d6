//! The full pipeline with the built-in hatch-texture backends, on a PNG
//! map or a generated one.
//!
//! ```text
//! cargo run --release --example heuristic_pipeline -- map.png
//! ```

use std::sync::Arc;

use cascade_tiler::backends::{Classifier, HeuristicClassifier, HeuristicSegmenter};
use cascade_tiler::cascade::{run_cascade, CascadeConfig};
use cascade_tiler::costmodel::estimate_params;
use cascade_tiler::eval::{match_detections, DEFAULT_MATCH_RADIUS};
use cascade_tiler::pyramid::{read_world_file, LevelSchedule};
use cascade_tiler::raster::Raster;
use cascade_tiler::stitch::{detect, StitchConfig};
use cascade_tiler::synthmap::{generate, SynthParams};

fn main() -> cascade_tiler::Result<()> {
    let (map, truth) = match std::env::args().nth(1) {
        Some(p) => {
            let wld = std::path::Path::new(&p).with_extension("wld");
            let geo = wld.is_file().then(|| read_world_file(&wld)).transpose()?;
            (Raster::load_png(&p)?.with_geo(geo), None)
        }
        None => {
            let (m, t) = generate(&SynthParams::with_seed(7))?;
            (m, Some(t))
        }
    };

    let schedule = LevelSchedule::table(2);
    let classifiers: Vec<Arc<dyn Classifier>> = schedule
        .classify
        .iter()
        .map(|d| Arc::new(HeuristicClassifier::for_tile(*d)) as Arc<dyn Classifier>)
        .collect();
    let cfg = CascadeConfig::new(
        schedule,
        classifiers,
        Arc::new(HeuristicSegmenter::default()),
    )
    .with_workers(std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out = run_cascade(&map, &cfg)?;
    let dets = detect(
        &out.masks,
        &out.pyramid,
        map.geo.as_ref(),
        &StitchConfig::default(),
    );

    for l in &out.stats.levels {
        println!(
            "level {} ({}): {}/{} pass",
            l.level, l.tile_dims, l.tiles_passed, l.tiles_in
        );
    }
    let est = estimate_params(&out.stats)?;
    println!("measured R = {:.3}, A = {:?}", est.r, est.a);
    for d in dets.iter().take(10) {
        println!(
            "  ({:.1}, {:.1}) px  {:?} world  {} px",
            d.centroid_px.0, d.centroid_px.1, d.centroid_world, d.area_px
        );
    }
    println!("{} detections", dets.len());
    if let Some(truth) = truth {
        let m = match_detections(&dets, &truth.centroids(), DEFAULT_MATCH_RADIUS)?;
        println!("tp {} fp {} fn {}  F1 {:.3}", m.tp, m.fp, m.fn_, m.f1());
    }
    Ok(())
}
