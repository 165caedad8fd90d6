//! A building split across four tiles is stitched back into one detection.

use std::collections::BTreeMap;

use cascade_tiler::pyramid::{TileDims, TilePyramid};
use cascade_tiler::raster::{AffineGeo, BinaryMask};
use cascade_tiler::stitch::{detect, grow_regions, StitchConfig};

fn main() -> cascade_tiler::Result<()> {
    let pyramid = TilePyramid::new(256, 256, vec![TileDims::new(64, 64)])?;
    // 20x12 block centred on the corner shared by four tiles
    let (x0, y0, w, h) = (54u32, 58u32, 20u32, 12u32);

    let mut masks = BTreeMap::new();
    for t in pyramid.tiles(1) {
        let mut m = BinaryMask::new(t.rect.w, t.rect.h);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                if t.rect.contains(x, y) {
                    m.set(x - t.rect.x0, y - t.rect.y0, true);
                }
            }
        }
        if !m.is_empty() {
            println!("{} holds {} pixels", t.id(), m.count());
        }
        masks.insert(t, m);
    }

    let regions = grow_regions(&masks, &pyramid);
    println!(
        "{} region(s), first covers {} tiles",
        regions.len(),
        regions[0].tiles.len()
    );

    let geo = AffineGeo::new(500000.0, 723000.0, 0.2136, -0.2136)?;
    for d in detect(&masks, &pyramid, Some(&geo), &StitchConfig::default()) {
        println!(
            "detection at {:?} px, {:?} world, {} px",
            d.centroid_px, d.centroid_world, d.area_px
        );
    }
    Ok(())
}
