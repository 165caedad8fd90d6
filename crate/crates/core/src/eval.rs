//! Scoring: centroid matching, F1, Dice, and two-epoch change detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;
use crate::stitch::Detection;

/// Pixels; buildings are tens of pixels across at the default scale.
pub const DEFAULT_MATCH_RADIUS: f64 = 15.0;
/// World units (metres) for grouping changed buildings into settlements.
pub const DEFAULT_CLUSTER_DIST: f64 = 300.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `(detection index, truth index, distance)`.
    pub pairs: Vec<(usize, usize, f64)>,
}

impl MatchResult {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.tp, self.fp, self.fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Greedy one-to-one matching by ascending distance; ties go to the lower
/// truth index, then the lower detection index. Pairs farther apart than
/// `radius` never match.
pub fn match_points(
    dets: &[(f64, f64)],
    truths: &[(f64, f64)],
    radius: f64,
) -> Result<MatchResult> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::Domain(format!(
            "match radius must be positive, got {radius}"
        )));
    }
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (di, d) in dets.iter().enumerate() {
        for (ti, t) in truths.iter().enumerate() {
            let e = dist(*d, *t);
            if e <= radius {
                cands.push((e, ti, di));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; dets.len()];
    let mut truth_used = vec![false; truths.len()];
    let mut pairs = Vec::new();
    for (e, ti, di) in cands {
        if det_used[di] || truth_used[ti] {
            continue;
        }
        det_used[di] = true;
        truth_used[ti] = true;
        pairs.push((di, ti, e));
    }
    let tp = pairs.len();
    Ok(MatchResult {
        tp,
        fp: dets.len() - tp,
        fn_: truths.len() - tp,
        pairs,
    })
}

/// Matches detections (pixel centroids) against truth centroids.
pub fn match_detections(
    dets: &[Detection],
    truths: &[(f64, f64)],
    radius: f64,
) -> Result<MatchResult> {
    let pts: Vec<(f64, f64)> = dets.iter().map(|d| d.centroid_px).collect();
    match_points(&pts, truths, radius)
}

/// `2tp / (2tp + fp + fn)`; 1.0 when all counts are zero.
pub fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// `2|a∩b| / (|a| + |b|)`; 1.0 when both masks are empty.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::Dimensions(format!(
            "dice of {}x{} and {}x{} masks",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (mut inter, mut na, mut nb) = (0u64, 0u64, 0u64);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        na += x as u64;
        nb += y as u64;
        inter += (x && y) as u64;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub size: usize,
    /// Mean world position of the members.
    pub centroid: (f64, f64),
    /// Indices into the epoch's detection list.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    /// Present in epoch A with nothing nearby in epoch B.
    pub disappeared: Vec<Cluster>,
    /// Present in epoch B with nothing nearby in epoch A.
    pub appeared: Vec<Cluster>,
}

impl ChangeReport {
    pub fn is_empty(&self) -> bool {
        self.disappeared.is_empty() && self.appeared.is_empty()
    }

    pub fn summary(&self) -> String {
        if self.is_empty() {
            return "no changes\n".into();
        }
        let mut s = String::new();
        for (name, list) in [
            ("disappeared", &self.disappeared),
            ("appeared", &self.appeared),
        ] {
            let total: usize = list.iter().map(|c| c.size).sum();
            s.push_str(&format!(
                "{name}: {total} buildings in {} clusters\n",
                list.len()
            ));
            for c in list {
                s.push_str(&format!(
                    "  {:>4} buildings around ({:.1}, {:.1})\n",
                    c.size, c.centroid.0, c.centroid.1
                ));
            }
        }
        s
    }

    /// `epoch,cluster,size,centroid_x,centroid_y` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,cluster,size,centroid_x,centroid_y\n");
        for (name, list) in [
            ("disappeared", &self.disappeared),
            ("appeared", &self.appeared),
        ] {
            for (i, c) in list.iter().enumerate() {
                s.push_str(&format!(
                    "{name},{i},{},{},{}\n",
                    c.size, c.centroid.0, c.centroid.1
                ));
            }
        }
        s
    }
}

fn world_points(dets: &[Detection], epoch: &str) -> Result<Vec<(f64, f64)>> {
    dets.iter()
        .enumerate()
        .map(|(i, d)| {
            d.centroid_world.ok_or_else(|| {
                Error::Domain(format!(
                    "epoch {epoch} detection {i} has no world coordinates"
                ))
            })
        })
        .collect()
}

/// Single-linkage clusters of `idx` at `cluster_dist`, largest first.
fn cluster(points: &[(f64, f64)], idx: &[usize], cluster_dist: f64) -> Vec<Cluster> {
    let n = idx.len();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for seed in 0..n {
        if label[seed].is_some() {
            continue;
        }
        let g = groups.len();
        label[seed] = Some(g);
        let mut stack = vec![seed];
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(idx[i]);
            for j in 0..n {
                if label[j].is_none() && dist(points[idx[i]], points[idx[j]]) <= cluster_dist {
                    label[j] = Some(g);
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    let mut out: Vec<Cluster> = groups
        .into_iter()
        .map(|members| {
            let k = members.len() as f64;
            let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &m| {
                (sx + points[m].0, sy + points[m].1)
            });
            Cluster {
                size: members.len(),
                centroid: (sx / k, sy / k),
                members,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.size
            .cmp(&a.size)
            .then(a.centroid.0.total_cmp(&b.centroid.0))
            .then(a.centroid.1.total_cmp(&b.centroid.1))
    });
    out
}

/// Buildings present in only one of two epochs, grouped into settlements.
pub fn change_detect(
    epoch_a: &[Detection],
    epoch_b: &[Detection],
    radius: f64,
    cluster_dist: f64,
) -> Result<ChangeReport> {
    if radius.is_nan() || radius <= 0.0 || cluster_dist.is_nan() || cluster_dist < 0.0 {
        return Err(Error::Domain(
            "radius must be positive and cluster_dist non-negative".into(),
        ));
    }
    let a = world_points(epoch_a, "A")?;
    let b = world_points(epoch_b, "B")?;
    let unmatched = |from: &[(f64, f64)], other: &[(f64, f64)]| -> Vec<usize> {
        (0..from.len())
            .filter(|&i| !other.iter().any(|o| dist(from[i], *o) <= radius))
            .collect()
    };
    Ok(ChangeReport {
        disappeared: cluster(&a, &unmatched(&a, &b), cluster_dist),
        appeared: cluster(&b, &unmatched(&b, &a), cluster_dist),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det_at(x: f64, y: f64) -> Detection {
        Detection {
            centroid_px: (x, y),
            centroid_world: Some((x, y)),
            area_px: 10,
            region_id: 0,
        }
    }

    #[test]
    fn f1_values() {
        assert!((f1(53, 0, 1) - 106.0 / 107.0).abs() < 1e-15);
        assert_eq!(format!("{:.2}", f1(53, 0, 1)), "0.99");
        assert_eq!(f1(1, 1, 1), 0.5);
        assert_eq!(f1(0, 0, 0), 1.0);
    }

    #[test]
    fn matching_examples() {
        let truths: Vec<(f64, f64)> = (0..54).map(|i| (i as f64 * 50.0, 10.0)).collect();
        let m = match_points(&truths, &truths, 15.0).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (54, 0, 0));
        let m = match_points(&[], &truths, 15.0).unwrap();
        assert_eq!(m.fn_, 54);

        // equidistant from two truths: lower truth index wins
        let m = match_points(&[(5.0, 0.0)], &[(0.0, 0.0), (10.0, 0.0)], 15.0).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 1));
        assert_eq!(m.pairs[0].1, 0);

        let m = match_points(&[(100.0, 0.0)], &[(0.0, 0.0)], 15.0).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));
        assert!(match_points(&[], &[], 0.0).is_err());
    }

    #[test]
    fn dice_values() {
        let mut a = BinaryMask::new(4, 1);
        let mut b = BinaryMask::new(4, 1);
        a.set(0, 0, true);
        a.set(1, 0, true);
        b.set(1, 0, true);
        b.set(2, 0, true);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let mut c = BinaryMask::new(4, 1);
        c.set(3, 0, true);
        assert_eq!(dice(&a, &c).unwrap(), 0.0);
        let e = BinaryMask::new(4, 1);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert!(dice(&a, &BinaryMask::new(2, 2)).is_err());
    }

    #[test]
    fn change_detection() {
        let a: Vec<Detection> = (0..5).map(|i| det_at(i as f64 * 40.0, 0.0)).collect();
        assert!(change_detect(&a, &a, 10.0, 300.0).unwrap().is_empty());

        let mut b = a.clone();
        b[2] = det_at(80.0, 500.0);
        let r = change_detect(&a, &b, 10.0, 300.0).unwrap();
        assert_eq!(r.disappeared.len(), 1);
        assert_eq!(r.appeared.len(), 1);
        assert_eq!(r.disappeared[0].members, vec![2]);

        let mut no_world = a.clone();
        no_world[0].centroid_world = None;
        assert!(change_detect(&no_world, &a, 10.0, 300.0).is_err());
    }

    #[test]
    fn clusters_sorted_by_size() {
        let mut a: Vec<Detection> = (0..3).map(|i| det_at(i as f64 * 10.0, 0.0)).collect();
        a.push(det_at(5000.0, 0.0));
        let r = change_detect(&a, &[], 10.0, 50.0).unwrap();
        assert_eq!(
            r.disappeared.iter().map(|c| c.size).collect::<Vec<_>>(),
            vec![3, 1]
        );
        assert_eq!(r.disappeared[0].centroid, (10.0, 0.0));
    }

    fn mask_strategy() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
        (1u32..12, 1u32..12).prop_flat_map(|(w, h)| {
            let n = (w * h) as usize;
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(a, b)| {
                    (
                        BinaryMask::from_bits(w, h, a).unwrap(),
                        BinaryMask::from_bits(w, h, b).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn f1_symmetric_and_monotone(tp in 0usize..100, fp in 0usize..100, fn_ in 0usize..100) {
            prop_assert_eq!(f1(tp, fp, fn_), f1(tp, fn_, fp));
            prop_assert!(f1(tp, fp + 1, fn_) <= f1(tp, fp, fn_));
            prop_assert!(f1(tp, fp, fn_ + 1) <= f1(tp, fp, fn_));
        }

        #[test]
        fn dice_properties((a, b) in mask_strategy()) {
            let d = dice(&a, &b).unwrap();
            prop_assert_eq!(d, dice(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn match_bounded(
            dets in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 0..20),
            truths in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 0..20),
        ) {
            let m = match_points(&dets, &truths, 15.0).unwrap();
            prop_assert!(m.tp <= dets.len().min(truths.len()));
            prop_assert_eq!(m.tp, m.pairs.len());
            let mut d: Vec<usize> = m.pairs.iter().map(|p| p.0).collect();
            let mut t: Vec<usize> = m.pairs.iter().map(|p| p.1).collect();
            d.sort(); d.dedup(); t.sort(); t.dedup();
            prop_assert_eq!(d.len(), m.tp);
            prop_assert_eq!(t.len(), m.tp);
        }
    }
}
