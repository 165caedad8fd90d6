//! Serialized outputs of a run.

use std::path::Path;

use image::{Rgb, RgbImage};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::cascade::RunStats;
use crate::costmodel::estimate_params;
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::stitch::Detection;

pub const GEOJSON_NAME: &str = "detections.geojson";
pub const CSV_NAME: &str = "detections.csv";
pub const STATS_NAME: &str = "stats.json";
pub const MANIFEST_NAME: &str = "manifest.json";
pub const OVERLAY_NAME: &str = "overlay.png";

pub const CSV_HEADER: [&str; 6] = ["x", "y", "world_x", "world_y", "area_px", "region_id"];

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Point features in world units when every detection has world
/// coordinates, otherwise in pixels marked with `crs: "pixel"`.
pub fn detections_geojson(dets: &[Detection], georeferenced: bool) -> Value {
    let features: Vec<Value> = dets
        .iter()
        .map(|d| {
            let (x, y) = match (georeferenced, d.centroid_world) {
                (true, Some(w)) => w,
                _ => d.centroid_px,
            };
            let mut props = json!({ "area_px": d.area_px, "region_id": d.region_id });
            if !georeferenced {
                props["crs"] = json!("pixel");
            }
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [x, y] },
                "properties": props,
            })
        })
        .collect();
    let mut fc = json!({ "type": "FeatureCollection", "features": features });
    if !georeferenced {
        fc["crs"] = json!("pixel");
    }
    fc
}

pub fn detections_csv(dets: &[Detection]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Domain(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for d in dets {
        let (wx, wy) = match d.centroid_world {
            Some((x, y)) => (x.to_string(), y.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            d.centroid_px.0.to_string(),
            d.centroid_px.1.to_string(),
            wx,
            wy,
            d.area_px.to_string(),
            d.region_id.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Domain(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads a detections CSV written by [`detections_csv`].
pub fn read_detections_csv(path: &Path) -> Result<Vec<Detection>> {
    let bad = |m: String| Error::parse("detections csv", format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(bad(format!("header must be {}", CSV_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = i + 2;
        let real = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse()
                .map_err(|e| bad(format!("row {row}, {}: {e}", CSV_HEADER[k])))
        };
        let int = |k: usize| -> Result<usize> {
            rec[k]
                .trim()
                .parse()
                .map_err(|e| bad(format!("row {row}, {}: {e}", CSV_HEADER[k])))
        };
        let world = if rec[2].trim().is_empty() && rec[3].trim().is_empty() {
            None
        } else {
            Some((real(2)?, real(3)?))
        };
        out.push(Detection {
            centroid_px: (real(0)?, real(1)?),
            centroid_world: world,
            area_px: int(4)?,
            region_id: int(5)?,
        });
    }
    Ok(out)
}

fn ms(d: Option<std::time::Duration>) -> Value {
    d.map_or(Value::Null, |d| json!(d.as_secs_f64() * 1e3))
}

pub fn stats_json(stats: &RunStats) -> Value {
    let levels: Vec<Value> = stats
        .levels
        .iter()
        .map(|l| {
            json!({
                "level": l.level,
                "tile_size": l.tile_dims.to_string(),
                "tiles_in": l.tiles_in,
                "tiles_passed": l.tiles_passed,
                "pass_fraction": l.pass_fraction(),
                "wall_ms": ms(l.wall),
            })
        })
        .collect();
    let est = estimate_params(stats).ok();
    json!({
        "levels": levels,
        "segmentation": {
            "tile_size": stats.segmentation.tile_dims.to_string(),
            "calls": stats.segmentation.calls,
            "wall_ms": ms(stats.segmentation.wall),
        },
        "segmenter_calls": stats.segmenter_calls(),
        "estimated_R": est.as_ref().map(|e| e.r),
        "estimated_A": est.as_ref().and_then(|e| e.a),
    })
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

/// The map in grey with every detection marked by a 3×3 red dot.
pub fn write_overlay(map: &Raster, dets: &[Detection], path: &Path) -> Result<()> {
    let mut img = RgbImage::from_fn(map.width(), map.height(), |x, y| {
        let v = map.get(x, y);
        Rgb([v, v, v])
    });
    for d in dets {
        let (cx, cy) = (
            d.centroid_px.0.round() as i64,
            d.centroid_px.1.round() as i64,
        );
        for y in cy - 1..=cy + 1 {
            for x in cx - 1..=cx + 1 {
                if x >= 0 && y >= 0 && (x as u32) < map.width() && (y as u32) < map.height() {
                    img.put_pixel(x as u32, y as u32, Rgb([255, 0, 0]));
                }
            }
        }
    }
    img.save(path).map_err(|e| Error::Encode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
