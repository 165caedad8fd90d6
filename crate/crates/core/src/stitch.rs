//! From per-tile masks to building centroids.
//!
//! Positive final-level tiles are grown into regions together with their
//! eight neighbours, repeating from every positive tile reached, until each
//! region is closed off by a ring of tiles with empty masks. A building cut
//! by tile boundaries therefore always lies wholly inside one region, and
//! its connected component is found once, on the region's mosaic.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pyramid::{PixelRect, TilePyramid, TileRef};
use crate::raster::{AffineGeo, BinaryMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::Domain(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }

    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StitchConfig {
    pub connectivity: Connectivity,
    /// Components smaller than this many pixels are discarded.
    pub min_area: usize,
}

impl Default for StitchConfig {
    fn default() -> Self {
        StitchConfig {
            connectivity: Connectivity::Eight,
            min_area: 6,
        }
    }
}

impl StitchConfig {
    /// Settings for noise-free masks: keep every component.
    pub fn exact() -> Self {
        StitchConfig {
            min_area: 0,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    /// Positive tiles and their empty halo, sorted.
    pub tiles: Vec<TileRef>,
    /// Masks pasted over the bounding rectangle of the tiles' valid pixels.
    pub mosaic: BinaryMask,
    /// Map coordinates of the mosaic's top-left pixel.
    pub offset: (u32, u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Centre of mass in map pixel coordinates.
    pub centroid_px: (f64, f64),
    pub centroid_world: Option<(f64, f64)>,
    pub area_px: usize,
    pub region_id: usize,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index wins, keeps roots deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups the final-level tiles of `masks` into tile-disjoint regions.
///
/// Tiles in a halo that have no mask (never segmented) count as empty.
pub fn grow_regions(masks: &BTreeMap<TileRef, BinaryMask>, pyramid: &TilePyramid) -> Vec<Region> {
    let level = pyramid.depth();
    let by_cell: HashMap<(u32, u32), &BinaryMask> = masks
        .iter()
        .filter(|(t, _)| t.level == level)
        .map(|(t, m)| ((t.row, t.col), m))
        .collect();

    let mut index: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut cells: Vec<TileRef> = Vec::new();
    let mut intern = |t: TileRef, index: &mut BTreeMap<(u32, u32), usize>| {
        *index.entry((t.row, t.col)).or_insert_with(|| {
            cells.push(t);
            cells.len() - 1
        })
    };

    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (t, m) in masks.iter().filter(|(t, _)| t.level == level) {
        if m.is_empty() {
            continue;
        }
        let centre = intern(*t, &mut index);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (r, c) = (t.row as i64 + dr, t.col as i64 + dc);
                if r < 0 || c < 0 {
                    continue;
                }
                if let Some(n) = pyramid.tile(level, r as u32, c as u32) {
                    let k = intern(n, &mut index);
                    edges.push((centre, k));
                }
            }
        }
    }

    let mut ds = DisjointSet::new(cells.len());
    for (a, b) in edges {
        ds.union(a, b);
    }
    let mut groups: BTreeMap<(u32, u32), Vec<TileRef>> = BTreeMap::new();
    let mut root_key: HashMap<usize, (u32, u32)> = HashMap::new();
    // iterate cells in (row, col) order so each group is keyed by its first cell
    for (&key, &i) in &index {
        let root = ds.find(i);
        let gk = *root_key.entry(root).or_insert(key);
        groups.entry(gk).or_default().push(cells[i]);
    }

    groups
        .into_values()
        .map(|mut tiles| {
            tiles.sort();
            let bounds = tiles.iter().skip(1).fold(tiles[0].valid, |acc, t| {
                let x0 = acc.x0.min(t.valid.x0);
                let y0 = acc.y0.min(t.valid.y0);
                let x1 = acc.x1().max(t.valid.x1());
                let y1 = acc.y1().max(t.valid.y1());
                PixelRect::new(x0, y0, x1 - x0, y1 - y0)
            });
            let mut mosaic = BinaryMask::new(bounds.w, bounds.h);
            for t in &tiles {
                let Some(m) = by_cell.get(&(t.row, t.col)) else {
                    continue;
                };
                for y in t.valid.y0..t.valid.y1() {
                    for x in t.valid.x0..t.valid.x1() {
                        if m.get(x - t.rect.x0, y - t.rect.y0) {
                            mosaic.set(x - bounds.x0, y - bounds.y0, true);
                        }
                    }
                }
            }
            Region {
                tiles,
                mosaic,
                offset: (bounds.x0, bounds.y0),
            }
        })
        .collect()
}

/// Maximal connected sets of positive pixels, as `(x, y)` lists, in
/// raster order of their first pixel.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = vec![false; mask.bits().len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.bits().len() {
        if !mask.bits()[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i as i64) % w, (i as i64) / w);
            comp.push((x as u32, y as u32));
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if mask.bits()[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Unweighted centre of mass.
pub fn centroid(component: &[(u32, u32)]) -> Result<(f64, f64)> {
    if component.is_empty() {
        return Err(Error::Domain("centroid of an empty component".into()));
    }
    let (sx, sy) = component.iter().fold((0u64, 0u64), |(sx, sy), &(x, y)| {
        (sx + x as u64, sy + y as u64)
    });
    let n = component.len() as f64;
    Ok((sx as f64 / n, sy as f64 / n))
}

/// Components of every region, filtered by size and sorted by `(y, x)`.
pub fn extract_detections(
    regions: &[Region],
    geo: Option<&AffineGeo>,
    cfg: &StitchConfig,
) -> Vec<Detection> {
    let mut dets: Vec<Detection> = regions
        .par_iter()
        .enumerate()
        .flat_map_iter(|(region_id, region)| {
            connected_components(&region.mosaic, cfg.connectivity)
                .into_iter()
                .filter(|c| !c.is_empty() && c.len() >= cfg.min_area)
                .map(move |c| {
                    let (cx, cy) = centroid(&c).expect("non-empty");
                    let px = (cx + region.offset.0 as f64, cy + region.offset.1 as f64);
                    Detection {
                        centroid_px: px,
                        centroid_world: geo.map(|g| g.pixel_to_world(px.0, px.1)),
                        area_px: c.len(),
                        region_id,
                    }
                })
        })
        .collect();
    dets.sort_by(|a, b| {
        a.centroid_px
            .1
            .total_cmp(&b.centroid_px.1)
            .then(a.centroid_px.0.total_cmp(&b.centroid_px.0))
            .then(a.region_id.cmp(&b.region_id))
    });
    dets
}

/// Region growth followed by detection extraction.
pub fn detect(
    masks: &BTreeMap<TileRef, BinaryMask>,
    pyramid: &TilePyramid,
    geo: Option<&AffineGeo>,
    cfg: &StitchConfig,
) -> Vec<Detection> {
    extract_detections(&grow_regions(masks, pyramid), geo, cfg)
}
