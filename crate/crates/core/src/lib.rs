//! Classifier-guided tiled segmentation for finding sparse building
//! footprints in large scanned map rasters.
//!
//! A cheap classifier is run on coarse tiles. Only tiles it passes are
//! subdivided and classified again at the next, finer level. Survivors of
//! the last level go to the expensive segmenter, and the per-tile masks are
//! stitched into building detections with map and world coordinates.
//!
//! The usual flow is [`synthmap::generate`] or [`raster::Raster::load_png`],
//! then [`cascade::run_cascade`], then [`stitch::detect`] and finally
//! [`eval`] for scoring against ground truth.

pub mod backends;
pub mod cascade;
pub mod cli;
pub mod costmodel;
pub mod error;
pub mod eval;
pub mod pyramid;
pub mod raster;
pub mod stitch;
pub mod synthmap;

pub use error::{Error, Result};
