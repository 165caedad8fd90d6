//! Classifier and segmenter contracts and their built-in implementations.
//!
//! A classifier scores a tile with the probability that it contains
//! buildings; the cascade turns the score into a [`Verdict`] with the
//! level's threshold. A segmenter returns a per-pixel building mask of the
//! tile's dimensions.
//!
//! Implementations:
//! - [`heuristic`]: a cross-hatch texture detector, no model required.
//! - [`oracle`]: answers from a ground-truth mask, with optional seeded
//!   error injection.
//! - [`external`]: hands batches of tiles to an external command over a
//!   file-exchange protocol, for plugging in trained networks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pyramid::{TileDims, TileRef};
use crate::raster::{BinaryMask, Raster};

pub mod external;
pub mod heuristic;
pub mod oracle;

pub use external::{ExternalClassifier, ExternalSegmenter};
pub use heuristic::{hatch_map, hatch_response, HeuristicClassifier, HeuristicSegmenter};
pub use oracle::{oracle_classify, AlwaysPositive, ErrorModel, OracleClassifier, OracleSegmenter};

/// Default decision threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Buildings,
    NoBuildings,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    /// Probability of "buildings", in `[0, 1]`.
    pub confidence: f64,
}

impl Verdict {
    /// Labels `buildings` iff `confidence >= threshold`.
    pub fn from_confidence(confidence: f64, threshold: f64) -> Verdict {
        let label = if confidence >= threshold {
            Label::Buildings
        } else {
            Label::NoBuildings
        };
        Verdict { label, confidence }
    }

    pub fn is_positive(&self) -> bool {
        self.label == Label::Buildings
    }
}

pub trait Classifier: Send + Sync {
    /// Probability that the tile contains buildings.
    fn score(&self, tile: &TileRef, pixels: &Raster) -> Result<f64>;

    /// Scores a whole level at once. The default runs [`Classifier::score`]
    /// in parallel on the current rayon pool; results keep input order.
    fn score_batch(&self, items: &[(TileRef, Raster)]) -> Result<Vec<f64>> {
        items.par_iter().map(|(t, r)| self.score(t, r)).collect()
    }

    fn classify(&self, tile: &TileRef, pixels: &Raster, threshold: f64) -> Result<Verdict> {
        Ok(Verdict::from_confidence(
            self.score(tile, pixels)?,
            threshold,
        ))
    }

    fn name(&self) -> String;
}

pub trait Segmenter: Send + Sync {
    fn segment(&self, tile: &TileRef, pixels: &Raster) -> Result<BinaryMask>;

    fn segment_batch(&self, items: &[(TileRef, Raster)]) -> Result<Vec<BinaryMask>> {
        items.par_iter().map(|(t, r)| self.segment(t, r)).collect()
    }

    fn name(&self) -> String;
}

pub(crate) fn check_dims(
    expected: Option<TileDims>,
    tile: &TileRef,
    pixels: &Raster,
) -> Result<()> {
    let got = TileDims::new(pixels.width(), pixels.height());
    if got != tile.dims() {
        return Err(Error::Backend {
            tile: tile.id(),
            message: format!("raster is {got}, tile is {}", tile.dims()),
        });
    }
    match expected {
        Some(d) if d != got => Err(Error::Backend {
            tile: tile.id(),
            message: format!("backend expects {d} tiles, got {got}"),
        }),
        _ => Ok(()),
    }
}
