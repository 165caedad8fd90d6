//! Plugging an out-of-process model in through the batch file protocol.
//! The stand-in model here is a shell script; a real one would load
//! network weights and answer the same way.

use std::sync::Arc;

use cascade_tiler::backends::{ExternalClassifier, OracleSegmenter};
use cascade_tiler::cascade::{run_cascade, CascadeConfig};
use cascade_tiler::pyramid::LevelSchedule;
use cascade_tiler::synthmap::{generate, SynthParams};

const SCRIPT: &str = r#"#!/bin/sh
# every tile is positive, with a middling confidence
while IFS="$(printf '\t')" read -r id png; do
    printf '%s\t1\t0.5268\n' "$id"
done < "$1" > "$2"
"#;

fn main() -> cascade_tiler::Result<()> {
    let dir = std::env::temp_dir().join(format!("cascade-external-{}", std::process::id()));
    let io = |e| cascade_tiler::Error::Io {
        path: dir.clone(),
        source: e,
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let script = dir.join("model.sh");
    std::fs::write(&script, SCRIPT).map_err(io)?;

    let (map, truth) = generate(&SynthParams {
        width: 1792,
        height: 768,
        ..SynthParams::with_seed(5)
    })?;
    let classifier = ExternalClassifier::new(
        vec!["sh".into(), script.display().to_string()],
        dir.join("work"),
    )?;
    let cfg = CascadeConfig::new(
        LevelSchedule::table(1),
        vec![Arc::new(classifier)],
        Arc::new(OracleSegmenter::new(Arc::new(truth.truth_mask.clone()))),
    )
    .with_thresholds(vec![0.5]);
    let out = run_cascade(&map, &cfg)?;
    let l = &out.stats.levels[0];
    println!(
        "{}/{} tiles passed at threshold {}",
        l.tiles_passed, l.tiles_in, cfg.thresholds[0]
    );
    println!("batch files kept in {}", dir.join("work").display());
    Ok(())
}
