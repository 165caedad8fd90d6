//! Seeded generator of sparse rural map sheets with exact ground truth.
//!
//! Buildings are axis-aligned rectangles with a solid one-pixel outline and
//! a diagonal cross-hatch fill, grouped into small farmstead clusters.
//! The background carries the distractors that confuse building detectors
//! on real sheets: field boundary lines, wetland tufts made of short
//! vertical strokes (some packed densely enough to look hatched), and
//! sparse text-like specks.
//!
//! Randomness comes from ChaCha8 seeded with the map seed; each object class
//! draws from its own stream, so changing e.g. the wetland density leaves
//! the building layout untouched.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pyramid::{PixelRect, TileDims, TileRef};
use crate::raster::{AffineGeo, BinaryMask, Raster, INK, PAPER};

const STREAM_BUILDINGS: u64 = 1;
const STREAM_FIELDS: u64 = 2;
const STREAM_WETLAND: u64 = 3;
const STREAM_TEXT: u64 = 4;

/// Blank margin cleared around every building so distractors never touch it.
const CLEARANCE: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    /// Expected number of buildings per map.
    pub building_count_mean: f64,
    /// Buildings per farmstead cluster, inclusive range.
    pub cluster_size: (u32, u32),
    /// Maximum offset of a building from its cluster centre.
    pub cluster_radius: u32,
    /// Side length range in pixels, inclusive.
    pub building_size: (u32, u32),
    /// Minimum blank gap between two buildings.
    pub min_gap: u32,
    /// Field boundary lines per megapixel.
    pub field_line_density: f64,
    /// Wetland patches per megapixel.
    pub wetland_density: f64,
    /// Probability that a wetland patch uses 2-px stroke spacing.
    pub wetland_dense_fraction: f64,
    /// Text labels per megapixel.
    pub text_density: f64,
    /// When set, the first building is placed across a boundary of this
    /// tile grid, so at least one building spans two final-level tiles.
    pub straddle: Option<TileDims>,
    pub geo: Option<AffineGeo>,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            width: 7168,
            height: 2304,
            seed: 0,
            building_count_mean: 18.0,
            cluster_size: (1, 5),
            cluster_radius: 160,
            building_size: (12, 60),
            min_gap: 6,
            field_line_density: 1.0,
            wetland_density: 0.15,
            wetland_dense_fraction: 0.3,
            text_density: 0.3,
            straddle: Some(TileDims::new(256, 256)),
            // 1531 m over 7168 px, anchored in Irish Transverse Mercator
            geo: Some(AffineGeo {
                origin_x: 500000.0,
                origin_y: 723000.0,
                px_size_x: 0.2136,
                px_size_y: -0.2136,
            }),
        }
    }
}

impl SynthParams {
    pub fn with_seed(seed: u64) -> Self {
        SynthParams {
            seed,
            ..Default::default()
        }
    }

    /// Background only: no buildings and no distractors.
    pub fn blank(width: u32, height: u32) -> Self {
        SynthParams {
            width,
            height,
            building_count_mean: 0.0,
            field_line_density: 0.0,
            wetland_density: 0.0,
            text_density: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Domain("map must be at least 1x1".into()));
        }
        for (name, v) in [
            ("building_count_mean", self.building_count_mean),
            ("field_line_density", self.field_line_density),
            ("wetland_density", self.wetland_density),
            ("text_density", self.text_density),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.wetland_dense_fraction) {
            return Err(Error::Domain(
                "wetland_dense_fraction must lie in [0, 1]".into(),
            ));
        }
        let (lo, hi) = self.building_size;
        if lo < 3 || lo > hi {
            return Err(Error::Domain(format!(
                "invalid building size range {lo}..={hi}"
            )));
        }
        if hi + 4 > self.width.min(self.height) && self.building_count_mean > 0.0 {
            return Err(Error::Domain(
                "building size range does not fit the map".into(),
            ));
        }
        let (cl, ch) = self.cluster_size;
        if cl == 0 || cl > ch {
            return Err(Error::Domain(format!(
                "invalid cluster size range {cl}..={ch}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub rect: PixelRect,
    /// Centre of mass of the rectangle's pixels.
    pub centroid: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub buildings: Vec<Building>,
    pub truth_mask: BinaryMask,
    /// Buildings that could not be placed without overlap.
    pub dropped: usize,
    pub geo: Option<AffineGeo>,
}

impl GroundTruth {
    pub fn centroids(&self) -> Vec<(f64, f64)> {
        self.buildings.iter().map(|b| b.centroid).collect()
    }

    /// One line per building, `x0,y0,w,h,cx,cy`, after a `#` header.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# x0,y0,w,h,cx,cy\n");
        for b in &self.buildings {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                b.rect.x0, b.rect.y0, b.rect.w, b.rect.h, b.centroid.0, b.centroid.1
            ));
        }
        s
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Parses the text written by [`GroundTruth::to_text`].
pub fn parse_truth_text(text: &str) -> Result<Vec<Building>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(Error::parse(
                "ground truth",
                format!("line {}: expected 6 fields, found {}", i + 1, f.len()),
            ));
        }
        let int = |s: &str| {
            s.parse::<u32>()
                .map_err(|e| Error::parse("ground truth", format!("line {}: {e}", i + 1)))
        };
        let real = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::parse("ground truth", format!("line {}: {e}", i + 1)))
        };
        out.push(Building {
            rect: PixelRect::new(int(f[0])?, int(f[1])?, int(f[2])?, int(f[3])?),
            centroid: (real(f[4])?, real(f[5])?),
        });
    }
    Ok(out)
}

pub fn read_truth_text(path: impl AsRef<Path>) -> Result<Vec<Building>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_truth_text(&text)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn generate(params: &SynthParams) -> Result<(Raster, GroundTruth)> {
    params.validate()?;
    let (w, h) = (params.width, params.height);
    let mut map = Raster::filled(w, h, PAPER)?;
    let mpx = w as f64 * h as f64 / 1e6;

    let (buildings, dropped) = place_buildings(params)?;

    let mut rng = stream(params.seed, STREAM_FIELDS);
    for _ in 0..poisson(&mut rng, params.field_line_density * mpx) {
        draw_field_line(&mut map, &mut rng);
    }
    let mut rng = stream(params.seed, STREAM_WETLAND);
    for _ in 0..poisson(&mut rng, params.wetland_density * mpx) {
        draw_wetland(&mut map, &mut rng, params.wetland_dense_fraction);
    }
    let mut rng = stream(params.seed, STREAM_TEXT);
    for _ in 0..poisson(&mut rng, params.text_density * mpx) {
        draw_text(&mut map, &mut rng);
    }

    let map_rect = PixelRect::new(0, 0, w, h);
    for b in &buildings {
        let r = b.rect;
        let clear = PixelRect::new(
            r.x0.saturating_sub(CLEARANCE),
            r.y0.saturating_sub(CLEARANCE),
            r.w + 2 * CLEARANCE,
            r.h + 2 * CLEARANCE,
        )
        .intersect(&map_rect);
        fill_rect(&mut map, &clear, PAPER);
    }

    let mut truth_mask = BinaryMask::new(w, h);
    for b in &buildings {
        draw_building(&mut map, &b.rect);
        for y in b.rect.y0..b.rect.y1() {
            for x in b.rect.x0..b.rect.x1() {
                truth_mask.set(x, y, true);
            }
        }
    }

    let map = map.with_geo(params.geo);
    Ok((
        map,
        GroundTruth {
            buildings,
            truth_mask,
            dropped,
            geo: params.geo,
        },
    ))
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

fn place_buildings(p: &SynthParams) -> Result<(Vec<Building>, usize)> {
    const RETRIES: usize = 40;
    const EDGE: u32 = 2;

    let mut rng = stream(p.seed, STREAM_BUILDINGS);
    let (cl, ch) = p.cluster_size;
    let mean_cluster = (cl + ch) as f64 / 2.0;
    let clusters = poisson(&mut rng, p.building_count_mean / mean_cluster);
    let (smin, smax) = p.building_size;
    let (w, h) = (p.width, p.height);

    let mut placed: Vec<PixelRect> = Vec::new();
    let mut dropped = 0;
    let fits = |r: &PixelRect, placed: &[PixelRect]| {
        r.x0 >= EDGE
            && r.y0 >= EDGE
            && r.x1() + EDGE <= w
            && r.y1() + EDGE <= h
            && placed.iter().all(|o| {
                let g = p.min_gap;
                r.x0 >= o.x1() + g || o.x0 >= r.x1() + g || r.y0 >= o.y1() + g || o.y0 >= r.y1() + g
            })
    };

    for c in 0..clusters {
        let count = rng.random_range(cl..=ch);
        let mut cx = rng.random_range(0..w) as i64;
        let mut cy = rng.random_range(0..h) as i64;
        let straddle = match p.straddle {
            Some(d) if c == 0 && w > d.w => {
                // snap the first cluster onto a vertical tile boundary
                let k = (cx as u32 / d.w).clamp(1, (w - 1) / d.w);
                cx = (k * d.w) as i64;
                let lo = (smax + EDGE) as i64;
                let hi = (h as i64 - lo).max(lo);
                cy = cy.clamp(lo, hi);
                true
            }
            _ => false,
        };
        for i in 0..count {
            let mut ok = false;
            for _ in 0..RETRIES {
                let bw = rng.random_range(smin..=smax);
                let bh = rng.random_range(smin..=smax);
                let (x0, y0) = if straddle && i == 0 {
                    (cx - bw as i64 / 2, cy - bh as i64 / 2)
                } else {
                    let rad = p.cluster_radius as i64;
                    (
                        cx + rng.random_range(-rad..=rad) - bw as i64 / 2,
                        cy + rng.random_range(-rad..=rad) - bh as i64 / 2,
                    )
                };
                if x0 < 0 || y0 < 0 {
                    continue;
                }
                let r = PixelRect::new(x0 as u32, y0 as u32, bw, bh);
                if fits(&r, &placed) {
                    placed.push(r);
                    ok = true;
                    break;
                }
            }
            if !ok {
                dropped += 1;
            }
        }
    }

    let buildings = placed
        .into_iter()
        .map(|rect| Building {
            rect,
            centroid: (
                rect.x0 as f64 + (rect.w - 1) as f64 / 2.0,
                rect.y0 as f64 + (rect.h - 1) as f64 / 2.0,
            ),
        })
        .collect();
    Ok((buildings, dropped))
}

fn fill_rect(map: &mut Raster, r: &PixelRect, v: u8) {
    for y in r.y0..r.y1() {
        for x in r.x0..r.x1() {
            map.set(x, y, v);
        }
    }
}

/// Solid outline plus a period-3 diagonal cross-hatch.
fn draw_building(map: &mut Raster, r: &PixelRect) {
    for y in r.y0..r.y1() {
        for x in r.x0..r.x1() {
            let border = x == r.x0 || y == r.y0 || x + 1 == r.x1() || y + 1 == r.y1();
            let (u, v) = (x - r.x0, y - r.y0);
            let hatch = (u + v).is_multiple_of(3) || (u + 3 * r.h - v).is_multiple_of(3);
            map.set(x, y, if border || hatch { INK } else { PAPER });
        }
    }
}

fn plot(map: &mut Raster, x: i64, y: i64) {
    if x >= 0 && y >= 0 && (x as u32) < map.width() && (y as u32) < map.height() {
        map.set(x as u32, y as u32, INK);
    }
}

fn draw_line(map: &mut Raster, (x0, y0): (i64, i64), (x1, y1): (i64, i64)) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        plot(map, x, y);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// A field boundary: a polyline of two or three long segments.
fn draw_field_line(map: &mut Raster, rng: &mut ChaCha8Rng) {
    let (w, h) = (map.width() as i64, map.height() as i64);
    let mut p = (rng.random_range(0..w), rng.random_range(0..h));
    for _ in 0..rng.random_range(2..=3) {
        let len = rng.random_range(300..2000) as f64;
        let angle = if rng.random_bool(0.6) {
            // mostly axis-aligned hedgerows with a slight skew
            (rng.random_range(0..4) as f64) * std::f64::consts::FRAC_PI_2
                + rng.random_range(-0.08..0.08)
        } else {
            rng.random_range(0.0..std::f64::consts::TAU)
        };
        let q = (
            p.0 + (len * angle.cos()).round() as i64,
            p.1 + (len * angle.sin()).round() as i64,
        );
        draw_line(map, p, q);
        p = q;
    }
}

/// Rows of short vertical strokes; 2-px spacing makes the patch look hatched.
fn draw_wetland(map: &mut Raster, rng: &mut ChaCha8Rng, dense_fraction: f64) {
    let (w, h) = (map.width() as i64, map.height() as i64);
    let pw = rng.random_range(60..160);
    let ph = rng.random_range(40..100);
    let x0 = rng.random_range(0..w);
    let y0 = rng.random_range(0..h);
    let spacing = if rng.random_bool(dense_fraction) {
        2
    } else {
        3
    };
    let mut y = y0;
    while y < y0 + ph {
        let mut x = x0 + rng.random_range(0..spacing);
        let tuft_end = x + rng.random_range(6..20);
        while x < (x0 + pw).min(tuft_end) {
            let len = rng.random_range(3..=5);
            for k in 0..len {
                plot(map, x, y - k);
            }
            x += spacing;
        }
        y += rng.random_range(6..10);
    }
}

/// A label: a run of sparse 3x5 glyph cells.
fn draw_text(map: &mut Raster, rng: &mut ChaCha8Rng) {
    let (w, h) = (map.width() as i64, map.height() as i64);
    let (mut x, y) = (rng.random_range(0..w), rng.random_range(0..h));
    for _ in 0..rng.random_range(4..=8) {
        for _ in 0..3 {
            plot(map, x + rng.random_range(0..3), y + rng.random_range(0..5));
        }
        x += 5;
    }
}

/// Number of set mask pixels inside `rect` (clipped to the mask).
pub fn count_in_rect(mask: &BinaryMask, rect: &PixelRect) -> u64 {
    let r = rect.intersect(&PixelRect::new(0, 0, mask.width(), mask.height()));
    let mut n = 0;
    let w = mask.width() as usize;
    for y in r.y0..r.y1() {
        let row = &mask.bits()[y as usize * w..(y as usize + 1) * w];
        n += row[r.x0 as usize..r.x1() as usize]
            .iter()
            .filter(|&&b| b)
            .count() as u64;
    }
    n
}

/// True iff the tile's map pixels include at least one building pixel.
pub fn truth_tile_label(truth: &GroundTruth, tile: &TileRef) -> bool {
    mask_tile_label(&truth.truth_mask, tile)
}

pub fn mask_tile_label(mask: &BinaryMask, tile: &TileRef) -> bool {
    count_in_rect(mask, &tile.valid) > 0
}
