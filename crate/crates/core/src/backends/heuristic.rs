//! Cross-hatch texture detector.
//!
//! A pixel is "hatch" when it is dark and has another dark pixel within
//! two steps both horizontally and vertically. Single lines (field
//! boundaries, wetland strokes spaced 3 px or more apart) never qualify;
//! the outline and diagonal fill of a building almost always do.

use crate::backends::{check_dims, Classifier, Segmenter};
use crate::error::Result;
use crate::pyramid::{TileDims, TileRef};
use crate::raster::{BinaryMask, Raster};

/// Intensities strictly below this are ink.
pub const DEFAULT_DARK: u8 = 128;
/// Default hatch fraction at which a 256×256 tile is called positive.
pub const DEFAULT_RHO: f64 = 0.002;
const RHO_REFERENCE_AREA: f64 = 256.0 * 256.0;
/// Steepness of the response-to-confidence curve.
const CONFIDENCE_EXPONENT: i32 = 4;

/// Per-pixel hatch predicate. Pixels outside the tile count as paper.
pub fn hatch_map(tile: &Raster, dark: u8) -> BinaryMask {
    let (w, h) = (tile.width() as i64, tile.height() as i64);
    let px = tile.pixels();
    let is_dark =
        |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && px[(y * w + x) as usize] < dark;
    let mut bits = vec![false; px.len()];
    for y in 0..h {
        for x in 0..w {
            if !is_dark(x, y) {
                continue;
            }
            let horiz =
                is_dark(x - 1, y) || is_dark(x + 1, y) || is_dark(x - 2, y) || is_dark(x + 2, y);
            if !horiz {
                continue;
            }
            let vert =
                is_dark(x, y - 1) || is_dark(x, y + 1) || is_dark(x, y - 2) || is_dark(x, y + 2);
            bits[(y * w + x) as usize] = vert;
        }
    }
    BinaryMask::from_bits(tile.width(), tile.height(), bits).expect("same dimensions")
}

/// Fraction of the tile's pixels that satisfy the hatch predicate.
pub fn hatch_response(tile: &Raster, dark: u8) -> f64 {
    let m = hatch_map(tile, dark);
    m.count() as f64 / (tile.width() as f64 * tile.height() as f64)
}

/// Maps a response to a confidence: 0.5 exactly at `rho`, saturating
/// towards 1 a few multiples above it.
pub fn response_confidence(response: f64, rho: f64) -> f64 {
    if response <= 0.0 {
        return 0.0;
    }
    let a = response.powi(CONFIDENCE_EXPONENT);
    let b = rho.powi(CONFIDENCE_EXPONENT);
    a / (a + b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicClassifier {
    pub rho: f64,
    pub dark: u8,
    pub dims: Option<TileDims>,
}

impl Default for HeuristicClassifier {
    fn default() -> Self {
        HeuristicClassifier {
            rho: DEFAULT_RHO,
            dark: DEFAULT_DARK,
            dims: None,
        }
    }
}

impl HeuristicClassifier {
    /// Classifier for tiles of `dims`, with `rho` rescaled so the positive
    /// call needs the same absolute number of hatch pixels as a 256×256
    /// tile at the default `rho`.
    pub fn for_tile(dims: TileDims) -> Self {
        HeuristicClassifier {
            rho: DEFAULT_RHO * RHO_REFERENCE_AREA / dims.area() as f64,
            dark: DEFAULT_DARK,
            dims: Some(dims),
        }
    }
}

impl Classifier for HeuristicClassifier {
    fn score(&self, tile: &TileRef, pixels: &Raster) -> Result<f64> {
        check_dims(self.dims, tile, pixels)?;
        Ok(response_confidence(
            hatch_response(pixels, self.dark),
            self.rho,
        ))
    }

    fn name(&self) -> String {
        format!("heuristic(rho={})", self.rho)
    }
}

/// Hatch predicate followed by a 3×3 morphological closing.
#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicSegmenter {
    pub dark: u8,
    pub dims: Option<TileDims>,
}

impl Default for HeuristicSegmenter {
    fn default() -> Self {
        HeuristicSegmenter {
            dark: DEFAULT_DARK,
            dims: None,
        }
    }
}

impl Segmenter for HeuristicSegmenter {
    fn segment(&self, tile: &TileRef, pixels: &Raster) -> Result<BinaryMask> {
        check_dims(self.dims, tile, pixels)?;
        Ok(close3x3(&hatch_map(pixels, self.dark)))
    }

    fn name(&self) -> String {
        "heuristic".into()
    }
}

/// Dilation then erosion with a 3×3 square. The mask is first extended by
/// two pixels of edge replication, so a shape cut by the tile edge is not
/// eaten into and a shape near the edge does not grow onto it.
pub fn close3x3(mask: &BinaryMask) -> BinaryMask {
    const PAD: usize = 2;
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    if w == 0 || h == 0 {
        return mask.clone();
    }
    let (pw, ph) = (w + 2 * PAD, h + 2 * PAD);
    let src = mask.bits();
    let mut padded = vec![false; pw * ph];
    for py in 0..ph {
        let y = py.saturating_sub(PAD).min(h - 1);
        for px in 0..pw {
            let x = px.saturating_sub(PAD).min(w - 1);
            padded[py * pw + px] = src[y * w + x];
        }
    }
    let dilated = pass3x3(&padded, pw, ph, false, |a, b| a || b);
    let closed = pass3x3(&dilated, pw, ph, true, |a, b| a && b);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let row = (y + PAD) * pw + PAD;
        out.extend_from_slice(&closed[row..row + w]);
    }
    BinaryMask::from_bits(mask.width(), mask.height(), out).expect("same dimensions")
}

/// Separable 3×3 reduction; `outside` is the value assumed beyond the border.
fn pass3x3(
    src: &[bool],
    w: usize,
    h: usize,
    outside: bool,
    op: impl Fn(bool, bool) -> bool,
) -> Vec<bool> {
    let at = |v: &[bool], x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            outside
        } else {
            v[y as usize * w + x as usize]
        }
    };
    let mut horiz = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            horiz[y as usize * w + x as usize] =
                op(op(at(src, x - 1, y), at(src, x, y)), at(src, x + 1, y));
        }
    }
    let mut out = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            out[y as usize * w + x as usize] = op(
                op(at(&horiz, x, y - 1), at(&horiz, x, y)),
                at(&horiz, x, y + 1),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyramid::tile_grid;

    fn tile_for(r: &Raster) -> TileRef {
        tile_grid(r.width(), r.height(), r.width(), r.height())[0]
    }

    #[test]
    fn response_extremes() {
        let white = Raster::filled(64, 64, 255).unwrap();
        let black = Raster::filled(64, 64, 0).unwrap();
        assert_eq!(hatch_response(&white, DEFAULT_DARK), 0.0);
        assert_eq!(hatch_response(&black, DEFAULT_DARK), 1.0);
    }

    #[test]
    fn single_lines_have_no_response() {
        let mut r = Raster::filled(64, 64, 255).unwrap();
        for x in 0..64 {
            r.set(x, 30, 0);
        }
        assert_eq!(hatch_response(&r, DEFAULT_DARK), 0.0);
        let mut r = Raster::filled(64, 64, 255).unwrap();
        for y in 0..64 {
            r.set(10, y, 0);
            r.set(13, y, 0);
        }
        assert_eq!(hatch_response(&r, DEFAULT_DARK), 0.0);
    }

    #[test]
    fn blank_tile_is_negative() {
        let r = Raster::filled(256, 256, 255).unwrap();
        let c = HeuristicClassifier::default();
        let v = c.classify(&tile_for(&r), &r, 0.5).unwrap();
        assert!(!v.is_positive());
        assert!(v.confidence <= 0.1);
        let m = HeuristicSegmenter::default()
            .segment(&tile_for(&r), &r)
            .unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn confidence_curve() {
        assert_eq!(response_confidence(0.0, 0.002), 0.0);
        assert!((response_confidence(0.002, 0.002) - 0.5).abs() < 1e-12);
        assert!(response_confidence(0.004, 0.002) > 0.9);
    }

    #[test]
    fn rho_rescales_with_area() {
        let c = HeuristicClassifier::for_tile(TileDims::new(1792, 768));
        assert!((c.rho * 1792.0 * 768.0 - DEFAULT_RHO * 65536.0).abs() < 1e-9);
        assert_eq!(
            HeuristicClassifier::for_tile(TileDims::new(256, 256)).rho,
            DEFAULT_RHO
        );
    }

    #[test]
    fn closing_fills_single_gaps() {
        let mut m = BinaryMask::new(7, 7);
        for y in 1..6 {
            for x in 1..6 {
                if (x, y) != (3, 3) {
                    m.set(x, y, true);
                }
            }
        }
        let c = close3x3(&m);
        assert!(c.get(3, 3));
        assert_eq!(c.count(), 25);
        // a shape touching the edge keeps its extent
        let mut bar = BinaryMask::new(6, 4);
        for y in 0..4 {
            bar.set(0, y, true);
            bar.set(1, y, true);
        }
        assert_eq!(close3x3(&bar), bar);
        let mut dot = BinaryMask::new(5, 5);
        dot.set(2, 2, true);
        assert_eq!(close3x3(&dot), dot);
    }

    #[test]
    fn dimension_mismatch() {
        let r = Raster::filled(10, 10, 255).unwrap();
        let c = HeuristicClassifier {
            dims: Some(TileDims::new(20, 20)),
            ..Default::default()
        };
        assert!(c.score(&tile_for(&r), &r).is_err());
    }
}
