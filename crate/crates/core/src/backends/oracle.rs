//! Ground-truth backends.
//!
//! The oracle classifier answers from a truth mask. An [`ErrorModel`] can
//! make it miss positives (more often when the tile holds only a sliver of
//! building) and pass negatives. Every random draw is keyed on
//! `(seed, level, row, col)`, so results do not depend on traversal order
//! or thread count, and two schedules that share their first levels make
//! identical decisions on those levels.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::{check_dims, Classifier, Segmenter, Verdict, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::pyramid::TileRef;
use crate::raster::{BinaryMask, Raster};
use crate::synthmap::count_in_rect;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorModel {
    /// Probability that a truly negative tile passes.
    pub fp_rate: f64,
    /// Base probability that a truly positive tile is missed.
    pub fn_base: f64,
    /// Extra miss probability when the building fraction of the tile is
    /// below `frac_floor`.
    pub edge_penalty: f64,
    pub frac_floor: f64,
    pub seed: u64,
}

impl ErrorModel {
    pub fn zero() -> Self {
        ErrorModel::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fp_rate", self.fp_rate),
            ("fn_base", self.fn_base),
            ("edge_penalty", self.edge_penalty),
            ("frac_floor", self.frac_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Probability that a tile passes, given its truth and building fraction.
    pub fn pass_probability(&self, positive: bool, building_fraction: f64) -> f64 {
        if positive {
            let penalty = if building_fraction < self.frac_floor {
                self.edge_penalty
            } else {
                0.0
            };
            (1.0 - (self.fn_base + penalty)).clamp(0.0, 1.0)
        } else {
            self.fp_rate.clamp(0.0, 1.0)
        }
    }
}

/// Uniform draw in `[0, 1)` that depends only on the seed and the tile key.
pub fn tile_uniform(seed: u64, tile: &TileRef) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tile.level as u64) << 48) ^ ((tile.row as u64) << 24) ^ tile.col as u64);
    rng.random::<f64>()
}

/// Confidence is 1.0 when the tile passes and 0.0 otherwise.
pub fn oracle_score(tile: &TileRef, truth: &BinaryMask, em: &ErrorModel) -> f64 {
    let hits = count_in_rect(truth, &tile.valid);
    let fraction = hits as f64 / tile.rect.area() as f64;
    let p = em.pass_probability(hits > 0, fraction);
    let pass = if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        tile_uniform(em.seed, tile) < p
    };
    if pass {
        1.0
    } else {
        0.0
    }
}

pub fn oracle_classify(tile: &TileRef, truth: &BinaryMask, em: &ErrorModel) -> Verdict {
    Verdict::from_confidence(oracle_score(tile, truth, em), DEFAULT_THRESHOLD)
}

#[derive(Clone, Debug)]
pub struct OracleClassifier {
    pub truth: Arc<BinaryMask>,
    pub error: ErrorModel,
}

impl OracleClassifier {
    pub fn new(truth: Arc<BinaryMask>, error: ErrorModel) -> Self {
        OracleClassifier { truth, error }
    }

    pub fn exact(truth: Arc<BinaryMask>) -> Self {
        OracleClassifier::new(truth, ErrorModel::zero())
    }
}

impl Classifier for OracleClassifier {
    fn score(&self, tile: &TileRef, pixels: &Raster) -> Result<f64> {
        check_dims(None, tile, pixels)?;
        Ok(oracle_score(tile, &self.truth, &self.error))
    }

    fn name(&self) -> String {
        "oracle".into()
    }
}

/// Returns the truth mask restricted to the tile's valid pixels.
#[derive(Clone, Debug)]
pub struct OracleSegmenter {
    pub truth: Arc<BinaryMask>,
}

impl OracleSegmenter {
    pub fn new(truth: Arc<BinaryMask>) -> Self {
        OracleSegmenter { truth }
    }
}

impl Segmenter for OracleSegmenter {
    fn segment(&self, tile: &TileRef, pixels: &Raster) -> Result<BinaryMask> {
        check_dims(None, tile, pixels)?;
        let mut m = BinaryMask::new(tile.rect.w, tile.rect.h);
        let v = tile.valid.intersect(&crate::pyramid::PixelRect::new(
            0,
            0,
            self.truth.width(),
            self.truth.height(),
        ));
        for y in v.y0..v.y1() {
            for x in v.x0..v.x1() {
                if self.truth.get(x, y) {
                    m.set(x - tile.rect.x0, y - tile.rect.y0, true);
                }
            }
        }
        Ok(m)
    }

    fn name(&self) -> String {
        "oracle".into()
    }
}

/// Passes every tile; turns the cascade into plain tiled segmentation.
#[derive(Clone, Copy, Debug, Default)]
pub struct AlwaysPositive;

impl Classifier for AlwaysPositive {
    fn score(&self, _tile: &TileRef, _pixels: &Raster) -> Result<f64> {
        Ok(1.0)
    }

    fn name(&self) -> String {
        "always_positive".into()
    }
}
