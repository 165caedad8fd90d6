//! Batch file-exchange protocol for out-of-process models.
//!
//! For each batch the engine writes every tile as `<tile_id>.png` into a
//! fresh directory, together with a manifest of `tile_id<TAB>png_path`
//! lines, and runs `cmd <manifest> <response>`. A classifier command
//! answers with `tile_id<TAB>label<TAB>confidence` lines (label `1` or
//! `0`, confidence in `[0, 1]`); a segmenter command answers with
//! `tile_id<TAB>mask_png_path` lines. Relative mask paths are resolved
//! against the response file's directory. A nonzero exit status, a
//! malformed line or a tile without an answer fails the whole batch.
//!
//! The confidence is authoritative: the engine applies its own per-level
//! threshold, and the label column is only checked for well-formedness.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

use crate::backends::{check_dims, Classifier, Segmenter};
use crate::error::{Error, Result};
use crate::pyramid::TileRef;
use crate::raster::{BinaryMask, Raster};

pub const MANIFEST_NAME: &str = "manifest.tsv";
pub const RESPONSE_NAME: &str = "response.tsv";

#[derive(Debug)]
struct BatchRunner {
    command: Vec<String>,
    work_dir: PathBuf,
    /// Serializes batches and numbers their directories.
    next_batch: Mutex<u64>,
}

impl BatchRunner {
    fn new(command: Vec<String>, work_dir: PathBuf) -> Result<Self> {
        if command.is_empty() || command[0].is_empty() {
            return Err(Error::Domain("external backend needs a command".into()));
        }
        Ok(BatchRunner {
            command,
            work_dir,
            next_batch: Mutex::new(0),
        })
    }

    /// Runs one batch and returns the response lines keyed by tile id.
    fn run(&self, items: &[(TileRef, Raster)]) -> Result<(PathBuf, HashMap<String, Vec<String>>)> {
        let mut counter = self.next_batch.lock().expect("batch lock poisoned");
        let dir = self.work_dir.join(format!("batch_{:06}", *counter));
        *counter += 1;
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let manifest = dir.join(MANIFEST_NAME);
        let response = dir.join(RESPONSE_NAME);
        let mut lines = String::new();
        for (tile, raster) in items {
            let png = dir.join(format!("{}.png", tile.id()));
            raster.save_png(&png)?;
            lines.push_str(&format!("{}\t{}\n", tile.id(), png.display()));
        }
        std::fs::File::create(&manifest)
            .and_then(|mut f| f.write_all(lines.as_bytes()))
            .map_err(|e| Error::io(&manifest, e))?;

        let status = Command::new(&self.command[0])
            .args(&self.command[1..])
            .arg(&manifest)
            .arg(&response)
            .status()
            .map_err(|e| Error::External(format!("cannot start {:?}: {e}", self.command[0])))?;
        if !status.success() {
            return Err(Error::External(format!(
                "{:?} exited with {status}",
                self.command.join(" ")
            )));
        }

        let text = std::fs::read_to_string(&response).map_err(|e| Error::io(&response, e))?;
        let mut by_id = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split('\t').map(|s| s.to_string()).collect();
            if fields.len() < 2 {
                return Err(Error::parse(
                    "external response",
                    format!("line {}: {line:?}", i + 1),
                ));
            }
            by_id.insert(fields[0].clone(), fields[1..].to_vec());
        }
        Ok((dir, by_id))
    }
}

fn missing(tile: &TileRef) -> Error {
    Error::Backend {
        tile: tile.id(),
        message: "no entry in the external response".into(),
    }
}

pub fn parse_classifier_fields(id: &str, fields: &[String]) -> Result<f64> {
    let bad = |m: String| Error::parse("external response", format!("tile {id}: {m}"));
    if fields.len() != 2 {
        return Err(bad(format!(
            "expected label and confidence, got {} fields",
            fields.len()
        )));
    }
    match fields[0].trim() {
        "0" | "1" => {}
        other => return Err(bad(format!("label must be 0 or 1, got {other:?}"))),
    }
    let conf: f64 = fields[1]
        .trim()
        .parse()
        .map_err(|e| bad(format!("confidence {:?}: {e}", fields[1])))?;
    if !(0.0..=1.0).contains(&conf) {
        return Err(bad(format!("confidence {conf} outside [0, 1]")));
    }
    Ok(conf)
}

#[derive(Debug)]
pub struct ExternalClassifier {
    runner: BatchRunner,
}

impl ExternalClassifier {
    pub fn new(command: Vec<String>, work_dir: impl Into<PathBuf>) -> Result<Self> {
        Ok(ExternalClassifier {
            runner: BatchRunner::new(command, work_dir.into())?,
        })
    }
}

impl Classifier for ExternalClassifier {
    fn score(&self, tile: &TileRef, pixels: &Raster) -> Result<f64> {
        Ok(self.score_batch(&[(*tile, pixels.clone())])?[0])
    }

    fn score_batch(&self, items: &[(TileRef, Raster)]) -> Result<Vec<f64>> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        for (t, r) in items {
            check_dims(None, t, r)?;
        }
        let (_, by_id) = self.runner.run(items)?;
        items
            .iter()
            .map(|(t, _)| {
                let id = t.id();
                let fields = by_id.get(&id).ok_or_else(|| missing(t))?;
                parse_classifier_fields(&id, fields)
            })
            .collect()
    }

    fn name(&self) -> String {
        format!("external({})", self.runner.command.join(" "))
    }
}

#[derive(Debug)]
pub struct ExternalSegmenter {
    runner: BatchRunner,
}

impl ExternalSegmenter {
    pub fn new(command: Vec<String>, work_dir: impl Into<PathBuf>) -> Result<Self> {
        Ok(ExternalSegmenter {
            runner: BatchRunner::new(command, work_dir.into())?,
        })
    }
}

fn resolve(dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p.trim());
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

impl Segmenter for ExternalSegmenter {
    fn segment(&self, tile: &TileRef, pixels: &Raster) -> Result<BinaryMask> {
        Ok(self.segment_batch(&[(*tile, pixels.clone())])?.remove(0))
    }

    fn segment_batch(&self, items: &[(TileRef, Raster)]) -> Result<Vec<BinaryMask>> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        for (t, r) in items {
            check_dims(None, t, r)?;
        }
        let (dir, by_id) = self.runner.run(items)?;
        items
            .iter()
            .map(|(t, _)| {
                let fields = by_id.get(&t.id()).ok_or_else(|| missing(t))?;
                if fields.len() != 1 {
                    return Err(Error::parse(
                        "external response",
                        format!("tile {}: expected a mask path", t.id()),
                    ));
                }
                let mask = BinaryMask::load_png(resolve(&dir, &fields[0]))?;
                if (mask.width(), mask.height()) != (t.rect.w, t.rect.h) {
                    return Err(Error::Backend {
                        tile: t.id(),
                        message: format!(
                            "mask is {}x{}, tile is {}",
                            mask.width(),
                            mask.height(),
                            t.dims()
                        ),
                    });
                }
                Ok(mask)
            })
            .collect()
    }

    fn name(&self) -> String {
        format!("external({})", self.runner.command.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifier_line_parsing() {
        let f = |a: &str, b: &str| vec![a.to_string(), b.to_string()];
        assert_eq!(
            parse_classifier_fields("t", &f("1", "0.5268")).unwrap(),
            0.5268
        );
        assert!(parse_classifier_fields("t", &f("yes", "0.5")).is_err());
        assert!(parse_classifier_fields("t", &f("1", "1.5")).is_err());
        assert!(parse_classifier_fields("t", &f("1", "abc")).is_err());
        assert!(parse_classifier_fields("t", &["1".to_string()]).is_err());
    }

    #[test]
    fn empty_command_rejected() {
        assert!(ExternalClassifier::new(vec![], "/tmp").is_err());
    }
}
