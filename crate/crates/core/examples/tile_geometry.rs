//! Tile grids, subdivision and pixel/world conversion.

use cascade_tiler::pyramid::{subdivide, tile_grid, LevelSchedule, TileDims};
use cascade_tiler::raster::AffineGeo;

fn main() -> cascade_tiler::Result<()> {
    let sheet = tile_grid(7168, 2304, 1792, 768);
    println!("{} first-level tiles on a 7168x2304 sheet", sheet.len());

    let children = subdivide(&sheet[0], TileDims::new(256, 256))?;
    println!("{} children of {}", children.len(), sheet[0]);

    // 168 does not divide 256: edge children are padded, but only own
    // the pixels inside their parent
    let odd = subdivide(&children[0], TileDims::new(168, 168))?;
    for t in &odd {
        println!(
            "  {} rect {:?} owns {}x{}",
            t.id(),
            t.rect,
            t.valid.w,
            t.valid.h
        );
    }

    for n in 0..=4 {
        let s = LevelSchedule::table(n);
        let p = s.pyramid(7168, 2304)?;
        let shapes: Vec<String> = (1..=p.depth())
            .map(|l| format!("{:?}", p.shape(l)))
            .collect();
        println!(
            "n = {n}: classify [{}], segment {}, grids {}",
            s.describe(),
            s.segment,
            shapes.join(" ")
        );
    }

    let geo = AffineGeo::new(500000.0, 723000.0, 0.2136, -0.2136)?;
    let (wx, wy) = geo.pixel_to_world(3291.0, 4158.0);
    println!("pixel (3291, 4158) -> world ({wx:.4}, {wy:.4})");
    Ok(())
}
