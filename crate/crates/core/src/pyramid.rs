//! Tile-grid geometry for the classify-and-filter levels.
//!
//! Level 1 partitions the (ceil-padded) map extent into a regular grid.
//! Every deeper level is produced by subdividing each parent tile on its
//! own rectangle, so a child grid is anchored to its parent. When child
//! dimensions divide the parent dimensions this coincides with a regular
//! grid over the whole map; otherwise the last child along an axis is
//! padded past its parent and that padding is tracked in [`TileRef::valid`].
//!
//! A tile's `valid` rectangle is the part of its `rect` that holds real
//! map pixels owned by this tile. Valid rectangles of one level are
//! pairwise disjoint and together cover the map exactly.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{AffineGeo, Raster};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileDims {
    pub w: u32,
    pub h: u32,
}

impl TileDims {
    pub const fn new(w: u32, h: u32) -> Self {
        TileDims { w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }
}

impl std::fmt::Display for TileDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.w, self.h)
    }
}

impl std::str::FromStr for TileDims {
    type Err = Error;

    /// Parses `WxH`, or a single number for a square tile.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("tile size", format!("{s:?}, expected WxH"));
        let num = |t: &str| t.trim().parse::<u32>().map_err(|_| bad());
        let d = match s.split_once(['x', 'X']) {
            Some((w, h)) => TileDims::new(num(w)?, num(h)?),
            None => {
                let n = num(s)?;
                TileDims::new(n, n)
            }
        };
        if d.w == 0 || d.h == 0 {
            return Err(Error::Geometry(format!(
                "tile dimensions must be >= 1, got {d}"
            )));
        }
        Ok(d)
    }
}

/// Pixel rectangle in map coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub const fn new(x0: u32, y0: u32, w: u32, h: u32) -> Self {
        PixelRect { x0, y0, w, h }
    }

    pub fn x1(&self) -> u32 {
        self.x0 + self.w
    }

    pub fn y1(&self) -> u32 {
        self.y0 + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn intersect(&self, other: &PixelRect) -> PixelRect {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1().min(other.x1());
        let y1 = self.y1().min(other.y1());
        if x1 <= x0 || y1 <= y0 {
            PixelRect::new(x0, y0, 0, 0)
        } else {
            PixelRect::new(x0, y0, x1 - x0, y1 - y0)
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }
}

/// One tile of the cascade.
///
/// Ordering and equality are dominated by `(level, row, col)`, which is
/// unique within a map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileRef {
    pub level: u32,
    pub row: u32,
    pub col: u32,
    /// Full tile footprint, possibly extending into padding.
    pub rect: PixelRect,
    /// Map pixels owned by this tile.
    pub valid: PixelRect,
}

impl TileRef {
    pub fn dims(&self) -> TileDims {
        TileDims::new(self.rect.w, self.rect.h)
    }

    /// Stable textual id, used by the external batch protocol.
    pub fn id(&self) -> String {
        format!("L{}_R{}_C{}", self.level, self.row, self.col)
    }
}

impl std::fmt::Display for TileRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} @ ({}, {}) {}x{}",
            self.id(),
            self.rect.x0,
            self.rect.y0,
            self.rect.w,
            self.rect.h
        )
    }
}

/// Tile sizes per cascade level.
///
/// `classify` holds one entry per classifier level (n entries; n may be 0).
/// `segment` is the tile size handed to the segmenter; it is either equal
/// to the last classified size (the segmenter then sees exactly the
/// surviving final-level tiles) or smaller (survivors are subdivided once
/// more without classification).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub classify: Vec<TileDims>,
    pub segment: TileDims,
}

/// Tile sizes of the published investigation, coarse to fine.
pub const TABLE_SIZES: [TileDims; 4] = [
    TileDims::new(1792, 768),
    TileDims::new(256, 256),
    TileDims::new(128, 128),
    TileDims::new(64, 64),
];

impl Default for LevelSchedule {
    fn default() -> Self {
        LevelSchedule::table(2)
    }
}

impl LevelSchedule {
    pub fn new(classify: Vec<TileDims>, segment: TileDims) -> Result<Self> {
        let s = LevelSchedule { classify, segment };
        s.validate()?;
        Ok(s)
    }

    /// The depth-`n` schedule: classify with the first `n` sizes of
    /// 1792×768, 256×256, 128×128, 64×64 (halving further past four) and
    /// segment at the last classified size, or at 256×256 when `n < 2`.
    pub fn table(n: usize) -> Self {
        let mut classify = Vec::with_capacity(n);
        for i in 0..n {
            if i < TABLE_SIZES.len() {
                classify.push(TABLE_SIZES[i]);
            } else {
                let prev: TileDims = classify[i - 1];
                classify.push(TileDims::new((prev.w / 2).max(1), (prev.h / 2).max(1)));
            }
        }
        let segment = if n >= 2 {
            classify[n - 1]
        } else {
            TABLE_SIZES[1]
        };
        LevelSchedule { classify, segment }
    }

    /// Number of classifier levels.
    pub fn depth(&self) -> usize {
        self.classify.len()
    }

    pub fn validate(&self) -> Result<()> {
        let all: Vec<TileDims> = self.tile_levels();
        for d in &all {
            if d.w == 0 || d.h == 0 {
                return Err(Error::Geometry(format!(
                    "tile dimensions must be >= 1, got {d}"
                )));
            }
        }
        for pair in all.windows(2) {
            if pair[1].w > pair[0].w || pair[1].h > pair[0].h {
                return Err(Error::Geometry(format!(
                    "tile sizes must not grow between levels ({} then {})",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(())
    }

    /// Distinct tile sizes, one per pyramid level; the segmentation size is
    /// appended only when it differs from the last classified size.
    pub fn tile_levels(&self) -> Vec<TileDims> {
        let mut v = self.classify.clone();
        if v.last() != Some(&self.segment) {
            v.push(self.segment);
        }
        v
    }

    pub fn pyramid(&self, map_w: u32, map_h: u32) -> Result<TilePyramid> {
        self.validate()?;
        TilePyramid::new(map_w, map_h, self.tile_levels())
    }

    pub fn describe(&self) -> String {
        if self.classify.is_empty() {
            "-".to_string()
        } else {
            self.classify
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        }
    }
}

/// Tile geometry of every level for one map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilePyramid {
    map_w: u32,
    map_h: u32,
    levels: Vec<TileDims>,
    /// Grid shape (rows, cols) per level.
    shapes: Vec<(u32, u32)>,
}

impl TilePyramid {
    pub fn new(map_w: u32, map_h: u32, levels: Vec<TileDims>) -> Result<Self> {
        if map_w == 0 || map_h == 0 {
            return Err(Error::Geometry("map must be non-empty".into()));
        }
        if levels.is_empty() {
            return Err(Error::Geometry("at least one level is required".into()));
        }
        let mut shapes = Vec::with_capacity(levels.len());
        for (i, d) in levels.iter().enumerate() {
            if d.w == 0 || d.h == 0 {
                return Err(Error::Geometry(format!(
                    "tile dimensions must be >= 1, got {d}"
                )));
            }
            let shape = if i == 0 {
                (map_h.div_ceil(d.h), map_w.div_ceil(d.w))
            } else {
                let p = levels[i - 1];
                if d.w > p.w || d.h > p.h {
                    return Err(Error::Geometry(format!(
                        "level {} tiles {d} larger than parent {p}",
                        i + 1
                    )));
                }
                let (pr, pc) = shapes[i - 1];
                (pr * p.h.div_ceil(d.h), pc * p.w.div_ceil(d.w))
            };
            shapes.push(shape);
        }
        Ok(TilePyramid {
            map_w,
            map_h,
            levels,
            shapes,
        })
    }

    pub fn map_size(&self) -> (u32, u32) {
        (self.map_w, self.map_h)
    }

    pub fn map_rect(&self) -> PixelRect {
        PixelRect::new(0, 0, self.map_w, self.map_h)
    }

    /// Number of levels; levels are numbered from 1.
    pub fn depth(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn dims(&self, level: u32) -> TileDims {
        self.levels[level as usize - 1]
    }

    /// (rows, cols) of the level's grid, including fully padded cells.
    pub fn shape(&self, level: u32) -> (u32, u32) {
        self.shapes[level as usize - 1]
    }

    /// The tile at `(level, row, col)`, or `None` when it holds no map pixels.
    pub fn tile(&self, level: u32, row: u32, col: u32) -> Option<TileRef> {
        if level == 0 || level > self.depth() {
            return None;
        }
        let (rows, cols) = self.shape(level);
        if row >= rows || col >= cols {
            return None;
        }
        let d = self.dims(level);
        let t = if level == 1 {
            let rect = PixelRect::new(col * d.w, row * d.h, d.w, d.h);
            TileRef {
                level,
                row,
                col,
                rect,
                valid: rect.intersect(&self.map_rect()),
            }
        } else {
            let p = self.dims(level - 1);
            let (per_r, per_c) = (p.h.div_ceil(d.h), p.w.div_ceil(d.w));
            let parent = self.tile(level - 1, row / per_r, col / per_c)?;
            child_of(&parent, d, row % per_r, col % per_c)
        };
        (!t.valid.is_empty()).then_some(t)
    }

    pub fn tiles(&self, level: u32) -> Vec<TileRef> {
        if level == 1 {
            return tile_grid(self.map_w, self.map_h, self.levels[0].w, self.levels[0].h);
        }
        let mut out: Vec<TileRef> = self
            .tiles(level - 1)
            .iter()
            .flat_map(|p| subdivide(p, self.dims(level)).expect("validated pyramid"))
            .collect();
        out.sort();
        out
    }

    /// Children of `tile` on the next level.
    pub fn children(&self, tile: &TileRef) -> Result<Vec<TileRef>> {
        if tile.level >= self.depth() {
            return Err(Error::Geometry(format!("{tile} is on the last level")));
        }
        subdivide(tile, self.dims(tile.level + 1))
    }
}

fn child_of(parent: &TileRef, d: TileDims, local_r: u32, local_c: u32) -> TileRef {
    let p = parent.dims();
    let (per_r, per_c) = (p.h.div_ceil(d.h), p.w.div_ceil(d.w));
    let rect = PixelRect::new(
        parent.rect.x0 + local_c * d.w,
        parent.rect.y0 + local_r * d.h,
        d.w,
        d.h,
    );
    TileRef {
        level: parent.level + 1,
        row: parent.row * per_r + local_r,
        col: parent.col * per_c + local_c,
        rect,
        valid: rect.intersect(&parent.valid),
    }
}

/// Level-1 partition of a `width`×`height` map into `tile_w`×`tile_h`
/// tiles, row-major. Edge tiles extend past the map and are padded.
pub fn tile_grid(width: u32, height: u32, tile_w: u32, tile_h: u32) -> Vec<TileRef> {
    assert!(width >= 1 && height >= 1 && tile_w >= 1 && tile_h >= 1);
    let map = PixelRect::new(0, 0, width, height);
    let (rows, cols) = (height.div_ceil(tile_h), width.div_ceil(tile_w));
    let mut out = Vec::with_capacity((rows * cols) as usize);
    for row in 0..rows {
        for col in 0..cols {
            let rect = PixelRect::new(col * tile_w, row * tile_h, tile_w, tile_h);
            out.push(TileRef {
                level: 1,
                row,
                col,
                rect,
                valid: rect.intersect(&map),
            });
        }
    }
    out
}

/// Splits `tile` into `next`-sized children anchored at its origin.
///
/// Children that hold no map pixels (beyond the map edge) are dropped.
pub fn subdivide(tile: &TileRef, next: TileDims) -> Result<Vec<TileRef>> {
    if next.w == 0 || next.h == 0 {
        return Err(Error::Geometry("child tile dimensions must be >= 1".into()));
    }
    if next.w > tile.rect.w || next.h > tile.rect.h {
        return Err(Error::Geometry(format!(
            "child size {next} exceeds parent {}",
            tile.dims()
        )));
    }
    let per_r = tile.rect.h.div_ceil(next.h);
    let per_c = tile.rect.w.div_ceil(next.w);
    let mut out = Vec::with_capacity((per_r * per_c) as usize);
    for r in 0..per_r {
        for c in 0..per_c {
            let child = child_of(tile, next, r, c);
            if !child.valid.is_empty() {
                out.push(child);
            }
        }
    }
    Ok(out)
}

/// Copies the tile's footprint out of the map. Pixels outside the tile's
/// valid rectangle are set to `pad_value`; the result carries the map's
/// affine re-anchored at the tile origin.
pub fn extract(map: &Raster, tile: &TileRef, pad_value: u8) -> Result<Raster> {
    let map_rect = PixelRect::new(0, 0, map.width(), map.height());
    let valid = tile.valid.intersect(&map_rect);
    if valid.is_empty() {
        return Err(Error::Geometry(format!("{tile} does not overlap the map")));
    }
    let (w, h) = (tile.rect.w, tile.rect.h);
    let mut px = vec![pad_value; w as usize * h as usize];
    let dx = (valid.x0 - tile.rect.x0) as usize;
    let len = valid.w as usize;
    for y in valid.y0..valid.y1() {
        let src = &map.row(y)[valid.x0 as usize..valid.x0 as usize + len];
        let dy = (y - tile.rect.y0) as usize;
        let start = dy * w as usize + dx;
        px[start..start + len].copy_from_slice(src);
    }
    let geo = map
        .geo
        .map(|g| g.shifted(tile.rect.x0 as f64, tile.rect.y0 as f64));
    Ok(Raster::new(w, h, px)?.with_geo(geo))
}

pub fn pixel_to_world(geo: &AffineGeo, x: f64, y: f64) -> (f64, f64) {
    geo.pixel_to_world(x, y)
}

pub fn world_to_pixel(geo: &AffineGeo, wx: f64, wy: f64) -> (f64, f64) {
    geo.world_to_pixel(wx, wy)
}

/// Parses the four-line affine sidecar: `px_size_x`, `px_size_y`,
/// `origin_x`, `origin_y`.
///
/// A conventional six-line world file (A, D, B, E, C, F) is accepted too,
/// provided its rotation terms D and B are zero.
pub fn parse_world_file(text: &str) -> Result<AffineGeo> {
    let values: Vec<f64> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse::<f64>()
                .map_err(|e| Error::parse("affine sidecar", format!("{l:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    match values.as_slice() {
        [sx, sy, ox, oy] => AffineGeo::new(*ox, *oy, *sx, *sy),
        [a, d, b, e, c, f] => {
            if *d != 0.0 || *b != 0.0 {
                return Err(Error::parse(
                    "affine sidecar",
                    "rotated world files are not supported",
                ));
            }
            AffineGeo::new(*c, *f, *a, *e)
        }
        other => Err(Error::parse(
            "affine sidecar",
            format!("expected 4 lines, found {}", other.len()),
        )),
    }
}

pub fn format_world_file(geo: &AffineGeo) -> String {
    format!(
        "{}\n{}\n{}\n{}\n",
        geo.px_size_x, geo.px_size_y, geo.origin_x, geo.origin_y
    )
}

pub fn read_world_file(path: impl AsRef<Path>) -> Result<AffineGeo> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_world_file(&text)
}

pub fn write_world_file(path: impl AsRef<Path>, geo: &AffineGeo) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(format_world_file(geo).as_bytes())
        .map_err(|e| Error::io(path, e))
}
