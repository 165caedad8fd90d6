//! Closed-form cost of a classify-then-segment cascade.
//!
//! With `n` classifier levels, a fraction `R` of tiles surviving each
//! level, per-pixel classification cost `t_c` and segmentation cost `t_s`,
//! the per-pixel time is
//!
//! ```text
//! T(n) = sum_{i=0}^{n-1} R^i t_c + R^n t_s
//! ```
//!
//! Times are normalized so that `t_s = 1` and `t_c = 1/A`, where `A` is the
//! segmentation-to-classification cost ratio. `T(0) = 1` is the
//! segment-everything baseline. Adding a level helps iff `R < 1 - 1/A`.

use serde::{Deserialize, Serialize};

use crate::cascade::RunStats;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Fraction of tiles passed by a classifier level.
    pub r: f64,
    /// Cost ratio `t_s / t_c`.
    pub a: f64,
}

impl Default for CostParams {
    /// The assumed operating point, R = 0.4 and A = 5.
    fn default() -> Self {
        CostParams { r: 0.4, a: 5.0 }
    }
}

impl CostParams {
    pub fn new(r: f64, a: f64) -> Result<Self> {
        check_domain(r, a)?;
        Ok(CostParams { r, a })
    }

    /// Per-pixel classification time, normalized.
    pub fn t_c(&self) -> f64 {
        1.0 / self.a
    }

    /// Per-pixel segmentation time, normalized.
    pub fn t_s(&self) -> f64 {
        1.0
    }
}

fn check_domain(r: f64, a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("R must lie in [0, 1], got {r}")));
    }
    if a.is_nan() || a <= 0.0 || !a.is_finite() {
        return Err(Error::Domain(format!(
            "A must be positive and finite, got {a}"
        )));
    }
    Ok(())
}

/// `T(n)` for the given pass fraction and cost ratio.
pub fn normalized_time(n: u32, r: f64, a: f64) -> Result<f64> {
    check_domain(r, a)?;
    let t_c = 1.0 / a;
    let mut total = 0.0;
    let mut rp = 1.0;
    for _ in 0..n {
        total += rp * t_c;
        rp *= r;
    }
    Ok(total + rp)
}

/// Largest pass fraction for which classification pays off, `1 - 1/A`.
/// Negative when `A < 1`: no pass fraction helps.
pub fn break_even_limit(a: f64) -> f64 {
    1.0 - 1.0 / a
}

pub fn is_beneficial(r: f64, a: f64) -> bool {
    r < break_even_limit(a)
}

/// `lim T(n) = t_c / (1 - R)`.
pub fn asymptotic_time(r: f64, a: f64) -> Result<f64> {
    check_domain(r, a)?;
    if r >= 1.0 {
        return Err(Error::Domain("the series diverges for R >= 1".into()));
    }
    Ok(1.0 / (a * (1.0 - r)))
}

/// Parameters measured from one cascade run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatedParams {
    /// Level-1 pass fraction.
    pub r: f64,
    /// Measured cost ratio; `None` when there is no segmentation or
    /// classification timing to compare.
    pub a: Option<f64>,
    /// Pass fraction of every classifier level, coarse to fine.
    pub per_level_r: Vec<f64>,
}

/// Reads `R` and `A` back out of measured statistics.
///
/// `R` is the level-1 pass fraction. `A` divides the segmentation time per
/// pixel by the classification time per pixel, pooled over all classifier
/// levels.
pub fn estimate_params(stats: &RunStats) -> Result<EstimatedParams> {
    let first = stats
        .levels
        .first()
        .ok_or_else(|| Error::Domain("no classifier levels recorded".into()))?;
    if first.tiles_in == 0 {
        return Err(Error::Domain("level 1 saw no tiles".into()));
    }
    let r = first.pass_fraction();
    let per_level_r = stats.levels.iter().map(|l| l.pass_fraction()).collect();

    let class_px: u64 = stats.levels.iter().map(|l| l.pixels_in).sum();
    let class_time: Option<f64> = stats
        .levels
        .iter()
        .map(|l| l.wall.map(|d| d.as_secs_f64()))
        .sum();
    let seg_time = stats.segmentation.wall.map(|d| d.as_secs_f64());
    let a = match (class_time, seg_time) {
        (Some(ct), Some(st)) if stats.segmentation.pixels > 0 && class_px > 0 => {
            if ct <= 0.0 || st <= 0.0 {
                return Err(Error::Domain("zero elapsed time".into()));
            }
            let per_px_c = ct / class_px as f64;
            let per_px_s = st / stats.segmentation.pixels as f64;
            Some(per_px_s / per_px_c)
        }
        _ => None,
    };
    Ok(EstimatedParams { r, a, per_level_r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{LevelStats, SegmentStats};
    use std::time::Duration;

    #[test]
    fn published_table() {
        let expected = [1.0, 0.6, 0.44, 0.376, 0.3504];
        for (n, want) in expected.iter().enumerate() {
            let got = normalized_time(n as u32, 0.4, 5.0).unwrap();
            assert!((got - want).abs() < 1e-9, "n={n}: {got} vs {want}");
        }
        assert!((normalized_time(1, 0.0, 5.0).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(normalized_time(1, -0.1, 5.0).is_err());
        assert!(normalized_time(1, 1.1, 5.0).is_err());
        assert!(normalized_time(1, 0.5, 0.0).is_err());
        assert!(asymptotic_time(1.0, 5.0).is_err());
    }

    #[test]
    fn break_even() {
        assert!((break_even_limit(5.0) - 0.8).abs() < 1e-15);
        assert_eq!(break_even_limit(1.0), 0.0);
        assert_eq!(break_even_limit(2.0), 0.5);
        assert!(is_beneficial(0.4, 5.0));
        assert!(!is_beneficial(0.8, 5.0));
        assert!(is_beneficial(0.0, 1.0001));
    }

    #[test]
    fn asymptote_matches_long_series() {
        // 200 explicit series terms, summed independently of normalized_time
        let (r, a) = (0.4f64, 5.0f64);
        let series: f64 = (0..200).map(|i| r.powi(i) / a).sum();
        let lim = asymptotic_time(r, a).unwrap();
        assert!((lim - 1.0 / 3.0).abs() < 1e-15);
        assert!((series - lim).abs() < 1e-12);
        assert!((asymptotic_time(0.0, 4.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((asymptotic_time(0.5, 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    fn level(tiles_in: usize, passed: usize, px: u64, ms: u64) -> LevelStats {
        LevelStats {
            level: 1,
            tile_dims: crate::pyramid::TileDims::new(1, 1),
            tiles_in,
            tiles_passed: passed,
            pixels_in: px,
            wall: Some(Duration::from_millis(ms)),
        }
    }

    fn stats(levels: Vec<LevelStats>, seg_px: u64, seg_ms: u64) -> RunStats {
        RunStats {
            levels,
            segmentation: SegmentStats {
                tile_dims: crate::pyramid::TileDims::new(1, 1),
                calls: 1,
                pixels: seg_px,
                wall: Some(Duration::from_millis(seg_ms)),
            },
        }
    }

    #[test]
    fn estimates() {
        let s = stats(vec![level(12, 5, 1000, 10)], 500, 5);
        let e = estimate_params(&s).unwrap();
        assert!((e.r - 5.0 / 12.0).abs() < 1e-15);
        assert!((e.a.unwrap() - 1.0).abs() < 1e-12);

        let s = stats(vec![level(10, 0, 1000, 10)], 0, 0);
        let e = estimate_params(&s).unwrap();
        assert_eq!(e.r, 0.0);
        assert_eq!(e.a, None);

        assert!(estimate_params(&stats(vec![level(0, 0, 0, 1)], 1, 1)).is_err());
        assert!(estimate_params(&stats(vec![level(4, 2, 100, 0)], 100, 3)).is_err());
    }
}
