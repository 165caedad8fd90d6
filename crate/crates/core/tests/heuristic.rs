//! The built-in texture backends on synthetic map tiles, checked against a
//! direct pixel-by-pixel evaluation of the hatch predicate.

use cascade_tiler::backends::{
    Classifier, HeuristicClassifier, HeuristicSegmenter, Label, Segmenter,
};
use cascade_tiler::eval::dice;
use cascade_tiler::pyramid::{extract, tile_grid, PixelRect, TileRef};
use cascade_tiler::raster::{BinaryMask, Raster};
use cascade_tiler::synthmap::{generate, GroundTruth, SynthParams};

const MIN_CONFIDENCE: f64 = 0.9;
const MIN_DICE: f64 = 0.85;

/// Straight from the definition: dark, with dark support within two
/// pixels both horizontally and vertically; off-tile pixels are paper.
fn reference_hatch_count(tile: &Raster) -> usize {
    let (w, h) = (tile.width() as i64, tile.height() as i64);
    let dark =
        |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && tile.get(x as u32, y as u32) < 128;
    let mut n = 0;
    for y in 0..h {
        for x in 0..w {
            let horiz = [-2, -1, 1, 2].iter().any(|d| dark(x + d, y));
            let vert = [-2, -1, 1, 2].iter().any(|d| dark(x, y + d));
            if dark(x, y) && horiz && vert {
                n += 1;
            }
        }
    }
    n
}

fn truth_tile(truth: &GroundTruth, tile: &TileRef) -> BinaryMask {
    let mut m = BinaryMask::new(tile.rect.w, tile.rect.h);
    for y in tile.valid.y0..tile.valid.y1() {
        for x in tile.valid.x0..tile.valid.x1() {
            if truth.truth_mask.get(x, y) {
                m.set(x - tile.rect.x0, y - tile.rect.y0, true);
            }
        }
    }
    m
}

fn contains(outer: &PixelRect, inner: &PixelRect) -> bool {
    inner.x0 >= outer.x0
        && inner.y0 >= outer.y0
        && inner.x1() <= outer.x1()
        && inner.y1() <= outer.y1()
}

/// 256×256 tiles of the seed-42 map that wholly contain at least one building.
fn building_tiles() -> (Raster, GroundTruth, Vec<TileRef>) {
    let (map, truth) = generate(&SynthParams::with_seed(42)).unwrap();
    let tiles: Vec<TileRef> = tile_grid(map.width(), map.height(), 256, 256)
        .into_iter()
        .filter(|t| truth.buildings.iter().any(|b| contains(&t.rect, &b.rect)))
        .collect();
    assert!(!tiles.is_empty());
    (map, truth, tiles)
}

#[test]
fn classifier_confident_on_building_tiles() {
    let (map, _, tiles) = building_tiles();
    let c = HeuristicClassifier::default();
    for t in &tiles {
        let r = extract(&map, t, 255).unwrap();
        let response = reference_hatch_count(&r) as f64 / 65536.0;
        let expected = response.powi(4) / (response.powi(4) + c.rho.powi(4));
        let v = c.classify(t, &r, 0.5).unwrap();
        assert!(
            (v.confidence - expected).abs() < 1e-12,
            "{t}: {} vs {expected}",
            v.confidence
        );
        assert_eq!(v.label, Label::Buildings, "{t}");
        assert!(v.confidence >= MIN_CONFIDENCE, "{t}: {}", v.confidence);
    }
}

#[test]
fn classifier_quiet_on_blank_and_lines() {
    let c = HeuristicClassifier::default();
    let mut r = Raster::filled(256, 256, 255).unwrap();
    let t = tile_grid(256, 256, 256, 256)[0];
    let v = c.classify(&t, &r, 0.5).unwrap();
    assert_eq!(v.label, Label::NoBuildings);
    assert!(v.confidence <= 0.1);
    for x in 0..256 {
        r.set(x, 100, 0);
    }
    assert_eq!(reference_hatch_count(&r), 0);
    assert_eq!(c.score(&t, &r).unwrap(), 0.0);
}

#[test]
fn segmenter_dice_on_building_tiles() {
    let (map, truth, tiles) = building_tiles();
    let seg = HeuristicSegmenter::default();
    for t in &tiles {
        let r = extract(&map, t, 255).unwrap();
        let d = dice(&seg.segment(t, &r).unwrap(), &truth_tile(&truth, t)).unwrap();
        assert!(d >= MIN_DICE, "{t}: dice {d}");
    }
}
