//! Buildings present in one survey and gone from a later one, grouped into
//! settlements.

use cascade_tiler::eval::{change_detect, DEFAULT_CLUSTER_DIST};
use cascade_tiler::stitch::Detection;

fn at(x: f64, y: f64) -> Detection {
    Detection {
        centroid_px: (0.0, 0.0),
        centroid_world: Some((x, y)),
        area_px: 300,
        region_id: 0,
    }
}

fn main() -> cascade_tiler::Result<()> {
    // a cluster of 22 houses and an isolated farm that both epochs share
    let mut early: Vec<Detection> = (0..22)
        .map(|i| {
            at(
                512000.0 + (i % 6) as f64 * 25.0,
                731000.0 + (i / 6) as f64 * 30.0,
            )
        })
        .collect();
    early.push(at(515000.0, 729000.0));
    let late = vec![at(515001.0, 729000.5), at(518000.0, 727000.0)];

    let report = change_detect(&early, &late, 10.0, DEFAULT_CLUSTER_DIST)?;
    print!("{}", report.summary());
    print!("{}", report.to_csv());
    Ok(())
}
