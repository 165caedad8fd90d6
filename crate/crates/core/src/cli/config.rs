//! The JSON run configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backends::{
    AlwaysPositive, Classifier, ErrorModel, ExternalClassifier, ExternalSegmenter,
    HeuristicClassifier, HeuristicSegmenter, OracleClassifier, OracleSegmenter, Segmenter,
};
use crate::cascade::{default_thresholds, CascadeConfig};
use crate::error::{Error, Result};
use crate::pyramid::{LevelSchedule, TileDims};
use crate::raster::{BinaryMask, PAPER};
use crate::stitch::StitchConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    /// `{"table": n}`: the standard depth-`n` schedule.
    Table { table: usize },
    Explicit {
        classify: Vec<String>,
        segment: String,
    },
}

impl ScheduleSpec {
    pub fn resolve(&self) -> Result<LevelSchedule> {
        match self {
            ScheduleSpec::Table { table } => Ok(LevelSchedule::table(*table)),
            ScheduleSpec::Explicit { classify, segment } => {
                let classify = classify
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<Vec<TileDims>>>()?;
                LevelSchedule::new(classify, segment.parse()?)
            }
        }
    }
}

impl From<&LevelSchedule> for ScheduleSpec {
    fn from(s: &LevelSchedule) -> Self {
        ScheduleSpec::Explicit {
            classify: s.classify.iter().map(|d| d.to_string()).collect(),
            segment: s.segment.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierSpec {
    /// `rho` defaults to the per-tile-size rescaled value.
    Heuristic {
        #[serde(default)]
        rho: Option<f64>,
        #[serde(default = "default_dark")]
        dark: u8,
    },
    /// `truth` is a mask PNG, relative to the config file.
    Oracle {
        truth: PathBuf,
        #[serde(default)]
        error: ErrorModel,
    },
    External {
        command: Vec<String>,
    },
    AlwaysPositive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmenterSpec {
    Heuristic {
        #[serde(default = "default_dark")]
        dark: u8,
    },
    Oracle {
        truth: PathBuf,
    },
    External {
        command: Vec<String>,
    },
}

fn default_dark() -> u8 {
    crate::backends::heuristic::DEFAULT_DARK
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub schedule: ScheduleSpec,
    /// One per classifier level; `null` for the defaults.
    pub thresholds: Option<Vec<f64>>,
    pub pad_value: u8,
    /// One entry shared by all levels, or one per level.
    pub classifiers: Vec<ClassifierSpec>,
    pub segmenter: SegmenterSpec,
    pub stitch: StitchConfig,
    /// Measure wall times. Timings make stats differ between reruns.
    pub record_timing: bool,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            schedule: ScheduleSpec::from(&LevelSchedule::default()),
            thresholds: None,
            pad_value: PAPER,
            classifiers: vec![ClassifierSpec::Heuristic {
                rho: None,
                dark: default_dark(),
            }],
            segmenter: SegmenterSpec::Heuristic {
                dark: default_dark(),
            },
            stitch: StitchConfig::default(),
            record_timing: false,
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::parse("config", e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::parse(
                "config",
                format!(
                    "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                    cfg.schema_version
                ),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Every file the config refers to, resolved against `base`.
    pub fn referenced_files(&self, base: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for c in &self.classifiers {
            if let ClassifierSpec::Oracle { truth, .. } = c {
                out.push(base.join(truth));
            }
        }
        if let SegmenterSpec::Oracle { truth } = &self.segmenter {
            out.push(base.join(truth));
        }
        out.sort();
        out.dedup();
        out
    }

    /// Seeds of all error models, in classifier order.
    pub fn seeds(&self) -> Vec<u64> {
        self.classifiers
            .iter()
            .filter_map(|c| match c {
                ClassifierSpec::Oracle { error, .. } => Some(error.seed),
                _ => None,
            })
            .collect()
    }

    /// Builds the cascade. Relative truth paths resolve against `base`;
    /// external backends exchange files under `work_dir`.
    pub fn build(&self, base: &Path, work_dir: &Path) -> Result<CascadeConfig> {
        let schedule = self.schedule.resolve()?;
        let n = schedule.depth();
        if n > 0 && self.classifiers.len() != 1 && self.classifiers.len() != n {
            return Err(Error::Domain(format!(
                "{n} classifier levels need 1 or {n} classifier entries, got {}",
                self.classifiers.len()
            )));
        }
        let mut masks: Vec<(PathBuf, Arc<BinaryMask>)> = Vec::new();
        let mut load_mask = |p: &Path| -> Result<Arc<BinaryMask>> {
            let full = base.join(p);
            if let Some((_, m)) = masks.iter().find(|(q, _)| *q == full) {
                return Ok(m.clone());
            }
            let m = Arc::new(BinaryMask::load_png(&full)?);
            masks.push((full, m.clone()));
            Ok(m)
        };

        let mut classifiers: Vec<Arc<dyn Classifier>> = Vec::with_capacity(n);
        for (i, dims) in schedule.classify.iter().enumerate() {
            let spec = &self.classifiers[if self.classifiers.len() == 1 { 0 } else { i }];
            let c: Arc<dyn Classifier> = match spec {
                ClassifierSpec::Heuristic { rho, dark } => {
                    let mut c = HeuristicClassifier::for_tile(*dims);
                    if let Some(rho) = rho {
                        c.rho = *rho;
                    }
                    c.dark = *dark;
                    Arc::new(c)
                }
                ClassifierSpec::Oracle { truth, error } => {
                    error.validate()?;
                    Arc::new(OracleClassifier::new(load_mask(truth)?, *error))
                }
                ClassifierSpec::External { command } => Arc::new(ExternalClassifier::new(
                    command.clone(),
                    work_dir.join(format!("classifier_L{}", i + 1)),
                )?),
                ClassifierSpec::AlwaysPositive => Arc::new(AlwaysPositive),
            };
            classifiers.push(c);
        }
        let segmenter: Arc<dyn Segmenter> = match &self.segmenter {
            SegmenterSpec::Heuristic { dark } => Arc::new(HeuristicSegmenter {
                dark: *dark,
                dims: None,
            }),
            SegmenterSpec::Oracle { truth } => Arc::new(OracleSegmenter::new(load_mask(truth)?)),
            SegmenterSpec::External { command } => Arc::new(ExternalSegmenter::new(
                command.clone(),
                work_dir.join("segmenter"),
            )?),
        };
        let thresholds = self
            .thresholds
            .clone()
            .unwrap_or_else(|| default_thresholds(n));
        let mut cfg = CascadeConfig::new(schedule, classifiers, segmenter)
            .with_thresholds(thresholds)
            .with_workers(self.workers);
        cfg.pad_value = self.pad_value;
        cfg.record_timing = self.record_timing;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg =
            RunConfig::from_json(r#"{"schema_version": 1, "schedule": {"table": 3}}"#).unwrap();
        assert_eq!(cfg.schedule.resolve().unwrap(), LevelSchedule::table(3));
        assert_eq!(cfg.workers, 1);
        let built = cfg.build(Path::new("."), Path::new("/tmp")).unwrap();
        assert_eq!(built.thresholds, vec![0.5, 0.5, 0.35]);
    }

    #[test]
    fn explicit_schedule_and_kinds() {
        let cfg = RunConfig::from_json(
            r#"{"schedule": {"classify": ["512x512", "128"], "segment": "64x64"},
                "classifiers": [{"kind": "always_positive"}, {"kind": "heuristic", "rho": 0.01}],
                "segmenter": {"kind": "heuristic"},
                "stitch": {"connectivity": "4", "min_area": 2}}"#,
        )
        .unwrap();
        let s = cfg.schedule.resolve().unwrap();
        assert_eq!(
            s.classify,
            vec![TileDims::new(512, 512), TileDims::new(128, 128)]
        );
        assert_eq!(s.segment, TileDims::new(64, 64));
        assert!(cfg.build(Path::new("."), Path::new("/tmp")).is_ok());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_json(r#"{"schema_version": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"classifiers": [{"kind": "cnn"}]}"#).is_err());
        let cfg = RunConfig::from_json(
            r#"{"schedule": {"table": 2}, "classifiers": [{"kind": "always_positive"}, {"kind": "always_positive"}, {"kind": "always_positive"}]}"#,
        )
        .unwrap();
        assert!(cfg.build(Path::new("."), Path::new("/tmp")).is_err());
        let cfg = RunConfig::from_json(r#"{"thresholds": [0.5]}"#).unwrap();
        assert!(cfg.build(Path::new("."), Path::new("/tmp")).is_err());
    }
}
