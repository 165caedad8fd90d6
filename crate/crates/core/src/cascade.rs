//! The classify-filter-segment engine.
//!
//! Level 1 tiles the whole map. At every classifier level each surviving
//! tile is scored, tiles below the level threshold are dropped, and the
//! rest are subdivided into the next level's tiles. Tiles that survive the
//! last classifier (subdivided to the segmentation size if that is
//! smaller) are segmented. A tile rejected at any level is never extracted
//! again.
//!
//! Tiles within a level are processed on a rayon pool of the configured
//! size; a level is a barrier, and results are merged in tile order, so
//! the output is independent of the worker count.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{
    Classifier, ErrorModel, OracleClassifier, OracleSegmenter, Segmenter, DEFAULT_THRESHOLD,
};
use crate::costmodel::{normalized_time, CostParams};
use crate::error::{Error, Result};
use crate::eval::{f1, match_detections, MatchResult};
use crate::pyramid::{extract, LevelSchedule, TileDims, TilePyramid, TileRef};
use crate::raster::{BinaryMask, Raster, PAPER};
use crate::stitch::{detect, StitchConfig};
use crate::synthmap::GroundTruth;

/// Threshold of the last classifier level: biased low so the final filter
/// rarely discards a tile that holds part of a building.
pub const FINAL_LEVEL_THRESHOLD: f64 = 0.35;

pub fn default_thresholds(levels: usize) -> Vec<f64> {
    (0..levels)
        .map(|i| {
            if i + 1 == levels {
                FINAL_LEVEL_THRESHOLD
            } else {
                DEFAULT_THRESHOLD
            }
        })
        .collect()
}

#[derive(Clone)]
pub struct CascadeConfig {
    pub schedule: LevelSchedule,
    /// One threshold per classifier level.
    pub thresholds: Vec<f64>,
    /// One classifier per level, or a single one shared by all levels.
    pub classifiers: Vec<Arc<dyn Classifier>>,
    pub segmenter: Arc<dyn Segmenter>,
    /// Fill for tile pixels beyond the map edge.
    pub pad_value: u8,
    pub workers: usize,
    /// Measure stage wall times. Off makes [`RunStats`] fully deterministic.
    pub record_timing: bool,
}

impl CascadeConfig {
    pub fn new(
        schedule: LevelSchedule,
        classifiers: Vec<Arc<dyn Classifier>>,
        segmenter: Arc<dyn Segmenter>,
    ) -> Self {
        let thresholds = default_thresholds(schedule.depth());
        CascadeConfig {
            schedule,
            thresholds,
            classifiers,
            segmenter,
            pad_value: PAPER,
            workers: 1,
            record_timing: true,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_thresholds(mut self, thresholds: Vec<f64>) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        let n = self.schedule.depth();
        if n > 0 && self.classifiers.len() != 1 && self.classifiers.len() != n {
            return Err(Error::Domain(format!(
                "{n} classifier levels need 1 or {n} classifiers, got {}",
                self.classifiers.len()
            )));
        }
        if n > 0 && self.classifiers.is_empty() {
            return Err(Error::Domain("no classifier configured".into()));
        }
        if self.thresholds.len() != n {
            return Err(Error::Domain(format!(
                "{n} classifier levels need {n} thresholds, got {}",
                self.thresholds.len()
            )));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::Domain(format!(
                "thresholds must lie in (0, 1], got {t}"
            )));
        }
        if self.workers == 0 {
            return Err(Error::Domain("at least one worker is required".into()));
        }
        Ok(())
    }

    fn classifier(&self, level_index: usize) -> &Arc<dyn Classifier> {
        if self.classifiers.len() == 1 {
            &self.classifiers[0]
        } else {
            &self.classifiers[level_index]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: u32,
    pub tile_dims: TileDims,
    pub tiles_in: usize,
    pub tiles_passed: usize,
    /// Pixels handed to the classifier (tile area, padding included).
    pub pixels_in: u64,
    pub wall: Option<Duration>,
}

impl LevelStats {
    /// `tiles_passed / tiles_in`, or 0 for an empty level.
    pub fn pass_fraction(&self) -> f64 {
        if self.tiles_in == 0 {
            0.0
        } else {
            self.tiles_passed as f64 / self.tiles_in as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub tile_dims: TileDims,
    /// Tiles segmented.
    pub calls: usize,
    pub pixels: u64,
    pub wall: Option<Duration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    /// One entry per classifier level.
    pub levels: Vec<LevelStats>,
    pub segmentation: SegmentStats,
}

impl RunStats {
    pub fn segmenter_calls(&self) -> usize {
        self.segmentation.calls
    }
}

pub struct CascadeOutput {
    pub masks: BTreeMap<TileRef, BinaryMask>,
    /// Geometry of all levels; the last level holds the masked tiles.
    pub pyramid: TilePyramid,
    pub stats: RunStats,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))
}

fn extract_all(map: &Raster, tiles: &[TileRef], pad: u8) -> Result<Vec<(TileRef, Raster)>> {
    tiles
        .par_iter()
        .map(|t| extract(map, t, pad).map(|r| (*t, r)))
        .collect()
}

fn segment_tiles(
    map: &Raster,
    tiles: &[TileRef],
    segmenter: &dyn Segmenter,
    pad: u8,
) -> Result<BTreeMap<TileRef, BinaryMask>> {
    let items = extract_all(map, tiles, pad)?;
    let masks = segmenter.segment_batch(&items)?;
    if masks.len() != items.len() {
        return Err(Error::Backend {
            tile: "batch".into(),
            message: format!(
                "segmenter returned {} masks for {} tiles",
                masks.len(),
                items.len()
            ),
        });
    }
    let mut out = BTreeMap::new();
    for ((t, _), m) in items.into_iter().zip(masks) {
        if (m.width(), m.height()) != (t.rect.w, t.rect.h) {
            return Err(Error::Backend {
                tile: t.id(),
                message: format!("mask is {}x{}, tile is {}", m.width(), m.height(), t.dims()),
            });
        }
        out.insert(t, m);
    }
    Ok(out)
}

pub fn run_cascade(map: &Raster, cfg: &CascadeConfig) -> Result<CascadeOutput> {
    cfg.validate()?;
    let pyramid = cfg.schedule.pyramid(map.width(), map.height())?;
    let pool = build_pool(cfg.workers)?;
    let clock = |start: Instant| cfg.record_timing.then(|| start.elapsed());

    pool.install(|| {
        let mut current = pyramid.tiles(1);
        let mut levels = Vec::with_capacity(cfg.schedule.depth());
        for (i, &threshold) in cfg.thresholds.iter().enumerate() {
            let level = i as u32 + 1;
            let start = Instant::now();
            let items = extract_all(map, &current, cfg.pad_value)?;
            let scores = cfg.classifier(i).score_batch(&items)?;
            if scores.len() != items.len() {
                return Err(Error::Backend {
                    tile: format!("level {level}"),
                    message: format!(
                        "classifier returned {} scores for {} tiles",
                        scores.len(),
                        items.len()
                    ),
                });
            }
            drop(items);
            let passed: Vec<TileRef> = current
                .iter()
                .zip(&scores)
                .filter(|(_, s)| **s >= threshold)
                .map(|(t, _)| *t)
                .collect();
            let dims = pyramid.dims(level);
            levels.push(LevelStats {
                level,
                tile_dims: dims,
                tiles_in: current.len(),
                tiles_passed: passed.len(),
                pixels_in: current.len() as u64 * dims.area(),
                wall: clock(start),
            });
            current = if level < pyramid.depth() {
                let mut next = Vec::new();
                for t in &passed {
                    next.extend(pyramid.children(t)?);
                }
                next
            } else {
                passed
            };
        }

        let start = Instant::now();
        let masks = segment_tiles(map, &current, cfg.segmenter.as_ref(), cfg.pad_value)?;
        let seg_dims = pyramid.dims(pyramid.depth());
        let segmentation = SegmentStats {
            tile_dims: seg_dims,
            calls: masks.len(),
            pixels: masks.len() as u64 * seg_dims.area(),
            wall: clock(start),
        };
        Ok(CascadeOutput {
            masks,
            pyramid: pyramid.clone(),
            stats: RunStats {
                levels,
                segmentation,
            },
        })
    })
}

/// Segments every tile of a plain `tile_dims` grid: the no-filter baseline.
pub fn segment_everything(
    map: &Raster,
    tile_dims: TileDims,
    segmenter: &dyn Segmenter,
    workers: usize,
) -> Result<(BTreeMap<TileRef, BinaryMask>, TilePyramid)> {
    let pyramid = TilePyramid::new(map.width(), map.height(), vec![tile_dims])?;
    let pool = build_pool(workers.max(1))?;
    let masks = pool.install(|| segment_tiles(map, &pyramid.tiles(1), segmenter, PAPER))?;
    Ok((masks, pyramid))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    /// Number of classifier levels.
    pub n: usize,
    pub tile_sizes: String,
    pub predicted_time: f64,
    pub measured_ms: f64,
    pub level1_pass_fraction: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SweepOptions {
    pub cost: CostParams,
    pub stitch: StitchConfig,
    pub match_radius: f64,
    pub workers: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            cost: CostParams::default(),
            stitch: StitchConfig::exact(),
            match_radius: crate::eval::DEFAULT_MATCH_RADIUS,
            workers: 1,
        }
    }
}

/// Accuracy against predicted cost for each schedule on one map, using the
/// oracle backends with `em` at every classifier level.
pub fn tradeoff_sweep(
    map: &Raster,
    truth: &GroundTruth,
    schedules: &[LevelSchedule],
    em: &ErrorModel,
    opts: &SweepOptions,
) -> Result<Vec<TradeoffRow>> {
    tradeoff_sweep_corpus(&[(map.clone(), truth.clone())], schedules, em, opts)
}

/// As [`tradeoff_sweep`], pooling match counts over several maps.
pub fn tradeoff_sweep_corpus(
    maps: &[(Raster, GroundTruth)],
    schedules: &[LevelSchedule],
    em: &ErrorModel,
    opts: &SweepOptions,
) -> Result<Vec<TradeoffRow>> {
    em.validate()?;
    let mut rows = Vec::with_capacity(schedules.len());
    for schedule in schedules {
        let n = schedule.depth();
        let mut total = MatchResult::default();
        let mut elapsed = Duration::ZERO;
        let (mut l1_in, mut l1_passed) = (0usize, 0usize);
        for (map, truth) in maps {
            let mask = Arc::new(truth.truth_mask.clone());
            let cfg = CascadeConfig::new(
                schedule.clone(),
                vec![Arc::new(OracleClassifier::new(mask.clone(), *em))],
                Arc::new(OracleSegmenter::new(mask)),
            )
            .with_workers(opts.workers);
            let start = Instant::now();
            let out = run_cascade(map, &cfg)?;
            let dets = detect(&out.masks, &out.pyramid, map.geo.as_ref(), &opts.stitch);
            elapsed += start.elapsed();
            if let Some(l1) = out.stats.levels.first() {
                l1_in += l1.tiles_in;
                l1_passed += l1.tiles_passed;
            }
            let m = match_detections(&dets, &truth.centroids(), opts.match_radius)?;
            total.tp += m.tp;
            total.fp += m.fp;
            total.fn_ += m.fn_;
        }
        rows.push(TradeoffRow {
            n,
            tile_sizes: schedule.describe(),
            predicted_time: normalized_time(n as u32, opts.cost.r, opts.cost.a)?,
            measured_ms: elapsed.as_secs_f64() * 1e3,
            level1_pass_fraction: (l1_in > 0).then(|| l1_passed as f64 / l1_in as f64),
            tp: total.tp,
            fp: total.fp,
            fn_: total.fn_,
            f1: f1(total.tp, total.fp, total.fn_),
        });
    }
    Ok(rows)
}
