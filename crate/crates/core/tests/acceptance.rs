//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits nonzero on any FAIL.

use std::collections::{BTreeMap, VecDeque};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use cascade_tiler::backends::{
    AlwaysPositive, ErrorModel, HeuristicSegmenter, OracleClassifier, OracleSegmenter,
};
use cascade_tiler::cascade::{
    run_cascade, segment_everything, tradeoff_sweep_corpus, CascadeConfig, SweepOptions,
};
use cascade_tiler::costmodel::normalized_time;
use cascade_tiler::eval::{change_detect, f1, match_detections, DEFAULT_MATCH_RADIUS};
use cascade_tiler::pyramid::{tile_grid, write_world_file, LevelSchedule, TileDims, TilePyramid};
use cascade_tiler::raster::{AffineGeo, BinaryMask};
use cascade_tiler::stitch::{detect, Detection, StitchConfig};
use cascade_tiler::synthmap::{generate, SynthParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TABLE_TOL: f64 = 1e-9;
const F1_TARGET: f64 = 0.9907;
const F1_TOL: f64 = 0.0005;
const CENTROID_TOL: f64 = 1e-9;
const R_BAND: (f64, f64) = (0.3, 0.5);
const BREAK_EVEN_PAIRS: usize = 1000;
const EQUIVALENCE_MAPS: u64 = 20;
const STITCH_CASES: usize = 500;
const CALIBRATION_SEEDS: u64 = 50;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(2, |n| n.get().min(8))
}

fn table_exactness() -> Outcome {
    let published = [1.0, 0.6, 0.44, 0.376, 0.3504];
    for (n, want) in published.iter().enumerate() {
        let got = normalized_time(n as u32, 0.4, 5.0).map_err(|e| e.to_string())?;
        ensure((got - want).abs() <= TABLE_TOL, || {
            format!("n={n}: {got} != {want}")
        })?;
    }
    Ok(format!("n=0..4 within {TABLE_TOL:e}"))
}

fn break_even_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut decreasing, mut not) = (0, 0);
    for _ in 0..BREAK_EVEN_PAIRS {
        let r: f64 = rng.random_range(0.02..0.98);
        let a: f64 = rng.random_range(1.01..40.0);
        let t: Vec<f64> = (0..=4).map(|n| normalized_time(n, r, a).unwrap()).collect();
        let strictly = t.windows(2).all(|w| w[1] < w[0]);
        let predicted = r < 1.0 - 1.0 / a;
        ensure(strictly == predicted, || {
            format!("R={r}, A={a}: decreasing={strictly}, R<1-1/A={predicted}")
        })?;
        if strictly {
            decreasing += 1
        } else {
            not += 1
        }
    }
    Ok(format!(
        "{BREAK_EVEN_PAIRS} pairs agree ({decreasing} beneficial, {not} not)"
    ))
}

fn f1_arithmetic() -> Outcome {
    let v = f1(53, 0, 1);
    ensure((v - F1_TARGET).abs() <= F1_TOL, || format!("f1 = {v}"))?;
    ensure(format!("{v:.2}") == "0.99", || {
        format!("{v} does not round to 0.99")
    })?;
    Ok(format!("f1(53, 0, 1) = {v:.5}"))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let seg_dims = TileDims::new(256, 256);
    let mut total_calls = (0, 0);
    for seed in 0..EQUIVALENCE_MAPS {
        let (map, truth) = generate(&SynthParams::with_seed(seed)).map_err(|e| e.to_string())?;
        ensure((map.width(), map.height()) == (7168, 2304), || {
            "map size".into()
        })?;
        let mask = Arc::new(truth.truth_mask.clone());
        let heuristic = Arc::new(HeuristicSegmenter::default());

        let all_pass = CascadeConfig::new(
            LevelSchedule::table(2),
            vec![Arc::new(AlwaysPositive)],
            heuristic.clone(),
        )
        .with_workers(workers());
        let out = run_cascade(&map, &all_pass).map_err(|e| e.to_string())?;
        let (base, grid) = segment_everything(&map, seg_dims, heuristic.as_ref(), workers())
            .map_err(|e| e.to_string())?;
        let a: Vec<_> = out.masks.iter().map(|(t, m)| (t.rect, m)).collect();
        let b: Vec<_> = base.iter().map(|(t, m)| (t.rect, m)).collect();
        ensure(a == b, || format!("seed {seed}: masks differ"))?;
        let cfg = StitchConfig::default();
        let da = detect(&out.masks, &out.pyramid, map.geo.as_ref(), &cfg);
        let db = detect(&base, &grid, map.geo.as_ref(), &cfg);
        ensure(da == db, || {
            format!(
                "seed {seed}: detections differ ({} vs {})",
                da.len(),
                db.len()
            )
        })?;

        let exact = CascadeConfig::new(
            LevelSchedule::table(2),
            vec![Arc::new(OracleClassifier::exact(mask.clone()))],
            Arc::new(OracleSegmenter::new(mask)),
        )
        .with_workers(workers());
        let out = run_cascade(&map, &exact).map_err(|e| e.to_string())?;
        let dets = detect(
            &out.masks,
            &out.pyramid,
            map.geo.as_ref(),
            &StitchConfig::exact(),
        );
        let m = match_detections(&dets, &truth.centroids(), DEFAULT_MATCH_RADIUS)
            .map_err(|e| e.to_string())?;
        ensure(m.precision() == 1.0 && m.recall() == 1.0, || {
            format!("seed {seed}: tp {} fp {} fn {}", m.tp, m.fp, m.fn_)
        })?;
        total_calls.0 += out.stats.segmenter_calls();
        total_calls.1 += base.len();
    }
    Ok(format!(
        "{EQUIVALENCE_MAPS} maps identical; exact oracle P = R = 1 with {}/{} segmenter calls, {:.1}s",
        total_calls.0,
        total_calls.1,
        start.elapsed().as_secs_f64()
    ))
}

fn subdivision_arithmetic() -> Outcome {
    let a = tile_grid(1792, 768, 256, 256).len();
    let b = tile_grid(7168, 2304, 1792, 768).len();
    ensure(a == 21 && b == 12, || format!("{a} and {b} tiles"))?;
    Ok("21 and 12 tiles".into())
}

/// Brute-force 8-connected labelling over the whole map.
fn brute_components(mask: &BinaryMask) -> Vec<(f64, f64, usize)> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut out = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            if seen[(sy * w + sx) as usize] || !mask.get(sx as u32, sy as u32) {
                continue;
            }
            let (mut n, mut tx, mut ty) = (0usize, 0f64, 0f64);
            let mut q = VecDeque::from([(sx, sy)]);
            seen[(sy * w + sx) as usize] = true;
            while let Some((x, y)) = q.pop_front() {
                n += 1;
                tx += x as f64;
                ty += y as f64;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let i = (ny * w + nx) as usize;
                        if !seen[i] && mask.get(nx as u32, ny as u32) {
                            seen[i] = true;
                            q.push_back((nx, ny));
                        }
                    }
                }
            }
            out.push((tx / n as f64, ty / n as f64, n));
        }
    }
    out
}

/// A random-walk blob that is forced across at least one tile boundary,
/// plus a few random specks elsewhere.
fn random_case(rng: &mut ChaCha8Rng) -> (BinaryMask, TilePyramid, (u32, u32)) {
    let tile = rng.random_range(8u32..40);
    let (cols, rows) = (rng.random_range(3u32..8), rng.random_range(3u32..8));
    let (w, h) = (
        cols * tile - rng.random_range(0..tile / 2),
        rows * tile - rng.random_range(0..tile / 2),
    );
    let pyramid = TilePyramid::new(w, h, vec![TileDims::new(tile, tile)]).unwrap();
    let mut mask = BinaryMask::new(w, h);
    // start next to an interior tile corner
    let bx = tile * rng.random_range(1..cols - 1);
    let by = tile * rng.random_range(1..rows - 1);
    let (mut x, mut y) = (bx as i64 - 1, by as i64 - 1);
    let steps = rng.random_range(20..400);
    for _ in 0..steps {
        mask.set(x as u32, y as u32, true);
        x = (x + rng.random_range(-1i64..=1)).clamp(0, w as i64 - 1);
        y = (y + rng.random_range(-1i64..=1)).clamp(0, h as i64 - 1);
    }
    // make sure the walk crosses the corner
    for (dx, dy) in [(0, 0), (-1, -1), (-1, 0), (0, -1)] {
        let (cx, cy) = ((bx as i64 + dx) as u32, (by as i64 + dy) as u32);
        mask.set(cx, cy, true);
    }
    for _ in 0..rng.random_range(0..4) {
        mask.set(rng.random_range(0..w), rng.random_range(0..h), true);
    }
    (mask, pyramid, (bx, by))
}

fn tile_masks(
    mask: &BinaryMask,
    pyramid: &TilePyramid,
) -> BTreeMap<cascade_tiler::pyramid::TileRef, BinaryMask> {
    let mut out = BTreeMap::new();
    for t in pyramid.tiles(1) {
        let mut m = BinaryMask::new(t.rect.w, t.rect.h);
        for y in t.valid.y0..t.valid.y1() {
            for x in t.valid.x0..t.valid.x1() {
                if mask.get(x, y) {
                    m.set(x - t.rect.x0, y - t.rect.y0, true);
                }
            }
        }
        out.insert(t, m);
    }
    out
}

fn stitch_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut components = 0;
    for case in 0..STITCH_CASES {
        let (mask, pyramid, _) = random_case(&mut rng);
        let mut want = brute_components(&mask);
        let masks = tile_masks(&mask, &pyramid);
        let split_tiles = masks.values().filter(|m| !m.is_empty()).count();
        ensure(split_tiles >= 4, || {
            format!("case {case}: blob spans only {split_tiles} tiles")
        })?;
        let got: Vec<Detection> = detect(&masks, &pyramid, None, &StitchConfig::exact());
        ensure(got.len() == want.len(), || {
            format!(
                "case {case}: {} detections for {} components",
                got.len(),
                want.len()
            )
        })?;
        want.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
        for (d, (cx, cy, n)) in got.iter().zip(&want) {
            ensure(
                (d.centroid_px.0 - cx).abs() <= CENTROID_TOL
                    && (d.centroid_px.1 - cy).abs() <= CENTROID_TOL
                    && d.area_px == *n,
                || {
                    format!(
                        "case {case}: {:?}/{} vs ({cx}, {cy})/{n}",
                        d.centroid_px, d.area_px
                    )
                },
            )?;
        }
        components += want.len();
    }
    Ok(format!(
        "{STITCH_CASES} cases, {components} components matched within {CENTROID_TOL:e}"
    ))
}

fn tradeoff_trend() -> Outcome {
    let corpus = (100..112)
        .map(|s| generate(&SynthParams::with_seed(s)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let em = ErrorModel {
        fn_base: 0.02,
        edge_penalty: 0.9,
        frac_floor: 0.0005,
        seed: 17,
        ..ErrorModel::zero()
    };
    let schedules: Vec<LevelSchedule> = (1..=4).map(LevelSchedule::table).collect();
    let opts = SweepOptions {
        workers: workers(),
        ..SweepOptions::default()
    };
    let rows = tradeoff_sweep_corpus(&corpus, &schedules, &em, &opts).map_err(|e| e.to_string())?;
    let f1s: Vec<f64> = rows.iter().map(|r| r.f1).collect();
    let times: Vec<f64> = rows.iter().map(|r| r.predicted_time).collect();
    ensure(f1s.windows(2).all(|w| w[1] <= w[0]), || {
        format!("F1 not non-increasing: {f1s:?}")
    })?;
    ensure(times.windows(2).all(|w| w[1] < w[0]), || {
        format!("time not decreasing: {times:?}")
    })?;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    Ok(format!("F1 {} / T {}", fmt(&f1s), fmt(&times)))
}

fn r_calibration() -> Outcome {
    let mut fractions = Vec::new();
    for seed in 0..CALIBRATION_SEEDS {
        let (_, truth) = generate(&SynthParams::with_seed(seed)).map_err(|e| e.to_string())?;
        let tiles = tile_grid(7168, 2304, 1792, 768);
        let positive = tiles
            .iter()
            .filter(|t| {
                (t.valid.y0..t.valid.y1())
                    .any(|y| (t.valid.x0..t.valid.x1()).any(|x| truth.truth_mask.get(x, y)))
            })
            .count();
        fractions.push(positive as f64 / tiles.len() as f64);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    ensure(mean >= R_BAND.0 && mean <= R_BAND.1, || {
        format!("mean R = {mean}")
    })?;
    Ok(format!(
        "mean level-1 pass fraction {mean:.4} over {CALIBRATION_SEEDS} seeds"
    ))
}

fn change_scenario() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let epoch_a: Vec<Detection> = (0..22)
        .map(|i| Detection {
            centroid_px: (i as f64, 0.0),
            centroid_world: Some((
                512000.0 + rng.random_range(-120.0..120.0),
                731000.0 + rng.random_range(-120.0..120.0),
            )),
            area_px: 400,
            region_id: i,
        })
        .collect();
    let report = change_detect(&epoch_a, &[], 10.0, 300.0).map_err(|e| e.to_string())?;
    ensure(report.appeared.is_empty(), || {
        "spurious appeared cluster".into()
    })?;
    let sizes: Vec<usize> = report.disappeared.iter().map(|c| c.size).collect();
    ensure(sizes == [22], || format!("disappeared clusters {sizes:?}"))?;
    Ok("one disappeared cluster of 22".into())
}

fn run_cli(args: &[&str], threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cascade-tiler"))
        .args(args)
        .env("CASCADE_TILER_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let (map, truth) = generate(&SynthParams::with_seed(7)).map_err(|e| e.to_string())?;
    map.save_png(d.join("map.png")).map_err(|e| e.to_string())?;
    truth
        .truth_mask
        .save_png(d.join("truth.png"))
        .map_err(|e| e.to_string())?;
    let geo: AffineGeo = map.geo.expect("synthetic maps are georeferenced");
    write_world_file(d.join("map.wld"), &geo).map_err(|e| e.to_string())?;
    std::fs::write(
        d.join("heuristic.json"),
        r#"{"schema_version": 1, "schedule": {"table": 3}}"#,
    )
    .map_err(|e| e.to_string())?;
    std::fs::write(
        d.join("oracle.json"),
        r#"{"schema_version": 1,
            "classifiers": [{"kind": "oracle", "truth": "truth.png",
                             "error": {"fp_rate": 0.1, "fn_base": 0.1, "seed": 5}}],
            "segmenter": {"kind": "oracle", "truth": "truth.png"}}"#,
    )
    .map_err(|e| e.to_string())?;

    // the manifest snapshots the worker count, so it is only compared
    // between reruns at the same count
    let files = ["detections.csv", "detections.geojson", "stats.json"];
    let mut checked = 0;
    for config in ["heuristic.json", "oracle.json"] {
        let mut reference: Option<Vec<Vec<u8>>> = None;
        for threads in ["1", "8"] {
            let mut manifest: Option<Vec<u8>> = None;
            for run in 0..2 {
                let out = d.join(format!("{config}.{threads}.{run}"));
                run_cli(
                    &[
                        "run",
                        d.join("map.png").to_str().unwrap(),
                        "--config",
                        d.join(config).to_str().unwrap(),
                        "--out",
                        out.to_str().unwrap(),
                    ],
                    threads,
                )?;
                let read = |f: &str| std::fs::read(out.join(f)).map_err(|e| e.to_string());
                let bytes: Vec<Vec<u8>> =
                    files.iter().map(|f| read(f)).collect::<Result<_, _>>()?;
                match &reference {
                    None => reference = Some(bytes),
                    Some(r) => {
                        for (i, f) in files.iter().enumerate() {
                            ensure(r[i] == bytes[i], || {
                                format!("{config}: {f} differs at {threads} threads")
                            })?;
                        }
                    }
                }
                let m = read("manifest.json")?;
                match &manifest {
                    None => manifest = Some(m),
                    Some(prev) => ensure(*prev == m, || {
                        format!("{config}: manifest differs on rerun")
                    })?,
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} runs at 1 and 8 workers byte-identical"))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("normalized time table", table_exactness),
        ("break-even law", break_even_law),
        ("F1 arithmetic", f1_arithmetic),
        ("oracle equivalence", oracle_equivalence),
        ("subdivision arithmetic", subdivision_arithmetic),
        ("stitch/centroid oracle", stitch_oracle),
        ("trade-off trend", tradeoff_trend),
        ("R calibration", r_calibration),
        ("change detection scenario", change_scenario),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
