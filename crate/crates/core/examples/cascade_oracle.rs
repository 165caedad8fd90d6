//! The cascade with ground-truth backends, compared with segmenting every
//! tile.

use std::sync::Arc;

use cascade_tiler::backends::{ErrorModel, OracleClassifier, OracleSegmenter};
use cascade_tiler::cascade::{run_cascade, segment_everything, CascadeConfig};
use cascade_tiler::eval::{match_detections, DEFAULT_MATCH_RADIUS};
use cascade_tiler::pyramid::{LevelSchedule, TileDims};
use cascade_tiler::stitch::{detect, StitchConfig};
use cascade_tiler::synthmap::{generate, SynthParams};

fn main() -> cascade_tiler::Result<()> {
    let (map, truth) = generate(&SynthParams::with_seed(3))?;
    let mask = Arc::new(truth.truth_mask.clone());

    let segmenter = Arc::new(OracleSegmenter::new(mask.clone()));
    let (all, grid) = segment_everything(&map, TileDims::new(256, 256), segmenter.as_ref(), 4)?;
    println!("segment everything: {} segmenter calls", all.len());

    for em in [
        ErrorModel::zero(),
        ErrorModel {
            fn_base: 0.05,
            fp_rate: 0.05,
            seed: 9,
            ..ErrorModel::zero()
        },
    ] {
        let cfg = CascadeConfig::new(
            LevelSchedule::table(2),
            vec![Arc::new(OracleClassifier::new(mask.clone(), em))],
            segmenter.clone(),
        )
        .with_workers(4);
        let out = run_cascade(&map, &cfg)?;
        let dets = detect(
            &out.masks,
            &out.pyramid,
            map.geo.as_ref(),
            &StitchConfig::exact(),
        );
        let m = match_detections(&dets, &truth.centroids(), DEFAULT_MATCH_RADIUS)?;
        println!("{em:?}");
        for l in &out.stats.levels {
            println!(
                "  level {} ({}): {}/{} tiles pass",
                l.level, l.tile_dims, l.tiles_passed, l.tiles_in
            );
        }
        println!(
            "  {} segmenter calls, precision {:.3}, recall {:.3}",
            out.stats.segmenter_calls(),
            m.precision(),
            m.recall()
        );
    }
    let base = detect(&all, &grid, map.geo.as_ref(), &StitchConfig::exact());
    println!(
        "baseline finds {} of {} buildings",
        base.len(),
        truth.buildings.len()
    );
    Ok(())
}
