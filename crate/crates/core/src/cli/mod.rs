//! The `cascade-tiler` command line.
//!
//! Exit codes: 0 on success, 1 when processing fails, 2 for usage or
//! configuration errors. `CASCADE_TILER_THREADS` overrides the worker
//! count of the config file; `--workers` overrides both.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::cascade::run_cascade;
use crate::costmodel::{asymptotic_time, break_even_limit, is_beneficial, normalized_time};
use crate::error::Error;
use crate::eval::{
    change_detect, dice, match_detections, DEFAULT_CLUSTER_DIST, DEFAULT_MATCH_RADIUS,
};
use crate::pyramid::{read_world_file, write_world_file};
use crate::raster::{augment_set, BinaryMask, Raster, AUGMENT_NAMES};
use crate::stitch::detect;
use crate::synthmap::{generate, read_truth_text, SynthParams};

pub use config::RunConfig;

pub const THREADS_ENV: &str = "CASCADE_TILER_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(Error),
    #[error(transparent)]
    Processing(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Processing(_) => 1,
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "cascade-tiler",
    version,
    about = "Cascaded tile classification and segmentation of map rasters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the cascade on a map and write detections, stats and a manifest.
    Run(RunArgs),
    /// Print the predicted normalized time for 0..=n classifier levels.
    Cost(CostArgs),
    /// Generate seeded synthetic maps with ground truth.
    Synth(SynthArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Compare detections of two epochs and report changed settlements.
    Diff(DiffArgs),
    /// Write the six flip/rotation variants of each image.
    Augment(AugmentArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// Greyscale or RGB map PNG; a `<stem>.wld` next to it georeferences it.
    map: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// World file to use instead of the sidecar next to the map.
    #[arg(long)]
    world_file: Option<PathBuf>,
    /// Also render the detections over the map.
    #[arg(long)]
    overlay: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, clap::Args)]
struct CostArgs {
    /// Fraction of tiles passed per level.
    #[arg(long = "r", default_value_t = 0.4)]
    r: f64,
    /// Per-pixel cost of segmentation relative to classification.
    #[arg(long = "a", default_value_t = 5.0)]
    a: f64,
    #[arg(long, default_value_t = 4)]
    n_max: u32,
    /// Print only the limit for infinitely many levels.
    #[arg(long)]
    asymptote: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, clap::Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of maps; seeds run from `--seed` upwards.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    /// JSON file of generator parameters; flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct EvalArgs {
    /// Detections CSV from `run`.
    #[arg(long)]
    detections: PathBuf,
    /// Ground-truth text from `synth`.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MATCH_RADIUS)]
    radius: f64,
    /// Predicted and true mask PNGs, for a Dice score.
    #[arg(long, num_args = 2, value_names = ["PRED", "TRUTH"])]
    masks: Option<Vec<PathBuf>>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct DiffArgs {
    /// Earlier epoch detections CSV.
    epoch_a: PathBuf,
    /// Later epoch detections CSV.
    epoch_b: PathBuf,
    /// World units within which two buildings are the same.
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    #[arg(long, default_value_t = DEFAULT_CLUSTER_DIST)]
    cluster_dist: f64,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a per-cluster CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct AugmentArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors are reported on stderr.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Diff(a) => cmd_diff(a),
        Command::Augment(a) => cmd_augment(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Processing(Error::io(dir, e)))
}

fn workers_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn sidecar(map: &Path) -> PathBuf {
    map.with_extension("wld")
}

fn cmd_run(a: RunArgs) -> CliResult {
    let (mut cfg, base) = match &a.config {
        Some(p) => {
            if !p.is_file() {
                return Err(CliError::Usage(format!(
                    "config file not found: {}",
                    p.display()
                )));
            }
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (RunConfig::load(p).map_err(CliError::Config)?, base)
        }
        None => (RunConfig::default(), PathBuf::from(".")),
    };
    if let Some(n) = workers_from_env()? {
        cfg.workers = n;
    }
    if let Some(n) = a.workers {
        cfg.workers = n;
    }
    if a.print_config {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    let map_path = a
        .map
        .ok_or_else(|| CliError::Usage("run needs a map path".into()))?;
    let out = a
        .out
        .ok_or_else(|| CliError::Usage("run needs --out".into()))?;

    let cascade_cfg = cfg
        .build(&base, &out.join("external"))
        .map_err(CliError::Config)?;
    let world_path = a
        .world_file
        .clone()
        .or_else(|| Some(sidecar(&map_path)).filter(|p| p.is_file()));
    let geo = world_path.as_deref().map(read_world_file).transpose()?;
    let map = Raster::load_png(&map_path)?.with_geo(geo);

    create_dir(&out)?;
    let result = run_cascade(&map, &cascade_cfg)?;
    let dets = detect(
        &result.masks,
        &result.pyramid,
        map.geo.as_ref(),
        &cfg.stitch,
    );

    let stats = output::stats_json(&result.stats);
    output::write_text(
        &out.join(output::GEOJSON_NAME),
        &output::to_pretty(&output::detections_geojson(&dets, geo.is_some())),
    )?;
    output::write_text(&out.join(output::CSV_NAME), &output::detections_csv(&dets)?)?;
    output::write_text(&out.join(output::STATS_NAME), &output::to_pretty(&stats))?;
    let mut outputs = json!({
        "detections_geojson": output::GEOJSON_NAME,
        "detections_csv": output::CSV_NAME,
        "stats": output::STATS_NAME,
    });
    if a.overlay {
        output::write_overlay(&map, &dets, &out.join(output::OVERLAY_NAME))?;
        outputs["overlay"] = json!(output::OVERLAY_NAME);
    }

    let hashed = |p: &Path| -> CliResult<serde_json::Value> {
        Ok(json!({ "path": p.display().to_string(), "sha256": output::sha256_file(p)? }))
    };
    let mut inputs = json!({ "map": hashed(&map_path)? });
    if let Some(p) = &a.config {
        inputs["config"] = hashed(p)?;
    }
    if let Some(p) = &world_path {
        inputs["world_file"] = hashed(p)?;
    }
    let refs: Vec<serde_json::Value> = cfg
        .referenced_files(&base)
        .iter()
        .map(|p| hashed(p))
        .collect::<CliResult<_>>()?;
    if !refs.is_empty() {
        inputs["referenced"] = json!(refs);
    }
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(&cfg).expect("config serializes"),
        "inputs": inputs,
        "seeds": cfg.seeds(),
        "stats": stats,
        "detections": dets.len(),
        "outputs": outputs,
    });
    output::write_text(
        &out.join(output::MANIFEST_NAME),
        &output::to_pretty(&manifest),
    )?;
    println!(
        "{} detections, {} segmenter calls -> {}",
        dets.len(),
        result.stats.segmenter_calls(),
        out.display()
    );
    Ok(())
}

fn cmd_cost(a: CostArgs) -> CliResult {
    let usage = |e: Error| CliError::Usage(e.to_string());
    // validates the domain even when only the asymptote is asked for
    normalized_time(0, a.r, a.a).map_err(usage)?;
    let limit = asymptotic_time(a.r, a.a).ok();
    if a.asymptote {
        let limit = limit.ok_or_else(|| CliError::Usage("no finite asymptote for R = 1".into()))?;
        match a.format {
            Format::Text => println!("asymptote {limit:.6}"),
            Format::Csv => println!("asymptote\n{limit}"),
        }
        return Ok(());
    }
    let beneficial = is_beneficial(a.r, a.a);
    match a.format {
        Format::Text => {
            println!(
                "R = {}, A = {}, break-even R < {:.6}",
                a.r,
                a.a,
                break_even_limit(a.a)
            );
            println!("{:>3}  {:>10}  beneficial", "n", "T(n)");
        }
        Format::Csv => println!("n,normalized_time,beneficial"),
    }
    for n in 0..=a.n_max {
        let t = normalized_time(n, a.r, a.a).map_err(usage)?;
        let flag = n > 0 && beneficial;
        match a.format {
            Format::Text => println!("{n:>3}  {t:>10.6}  {}", if flag { "yes" } else { "no" }),
            Format::Csv => println!("{n},{t},{flag}"),
        }
    }
    if let (Format::Text, Some(limit)) = (a.format, limit) {
        println!("asymptote {limit:.6}");
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> CliResult {
    let mut params = match &a.params {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(Error::io(p, e).to_string()))?;
            serde_json::from_str::<SynthParams>(&text)
                .map_err(|e| CliError::Config(Error::parse("synth params", e.to_string())))?
        }
        None => SynthParams::default(),
    };
    if let Some(w) = a.width {
        params.width = w;
    }
    if let Some(h) = a.height {
        params.height = h;
    }
    params.validate().map_err(CliError::Config)?;
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    create_dir(&a.out)?;
    for seed in a.seed..a.seed + a.count {
        let p = SynthParams {
            seed,
            ..params.clone()
        };
        let (map, truth) = generate(&p)?;
        let stem = format!("{seed:04}");
        map.save_png(a.out.join(format!("map_{stem}.png")))?;
        truth
            .truth_mask
            .save_png(a.out.join(format!("truth_{stem}.png")))?;
        truth.write_text(a.out.join(format!("truth_{stem}.txt")))?;
        if let Some(geo) = &map.geo {
            write_world_file(a.out.join(format!("map_{stem}.wld")), geo)?;
        }
        println!(
            "seed {seed}: {} buildings ({} dropped)",
            truth.buildings.len(),
            truth.dropped
        );
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    let dets = output::read_detections_csv(&a.detections)?;
    let truth = read_truth_text(&a.truth)?;
    let centroids: Vec<(f64, f64)> = truth.iter().map(|b| b.centroid).collect();
    let m = match_detections(&dets, &centroids, a.radius)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut report = json!({
        "tp": m.tp,
        "fp": m.fp,
        "fn": m.fn_,
        "precision": m.precision(),
        "recall": m.recall(),
        "f1": m.f1(),
        "radius": a.radius,
    });
    if let Some(paths) = &a.masks {
        let pred = BinaryMask::load_png(&paths[0])?;
        let want = BinaryMask::load_png(&paths[1])?;
        report["dice"] = json!(dice(&pred, &want)?);
    }
    let text = output::to_pretty(&report);
    match &a.out {
        Some(p) => output::write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_diff(a: DiffArgs) -> CliResult {
    let ea = output::read_detections_csv(&a.epoch_a)?;
    let eb = output::read_detections_csv(&a.epoch_b)?;
    let report = change_detect(&ea, &eb, a.radius, a.cluster_dist)?;
    if let Some(p) = &a.out {
        let v = serde_json::to_value(&report).expect("report serializes");
        output::write_text(p, &output::to_pretty(&v))?;
    }
    if let Some(p) = &a.csv {
        output::write_text(p, &report.to_csv())?;
    }
    print!("{}", report.summary());
    Ok(())
}

fn cmd_augment(a: AugmentArgs) -> CliResult {
    create_dir(&a.out)?;
    for input in &a.inputs {
        let img = Raster::load_png(input)?;
        let stem = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".into());
        for (variant, name) in augment_set(&img).iter().zip(AUGMENT_NAMES) {
            variant.save_png(a.out.join(format!("{stem}_{name}.png")))?;
        }
    }
    println!(
        "{} images written to {}",
        a.inputs.len() * AUGMENT_NAMES.len(),
        a.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_subcommands() {
        for args in [
            vec!["t", "run", "map.png", "--out", "o"],
            vec!["t", "run", "--print-config"],
            vec!["t", "cost", "--r", "0.4", "--a", "5", "--n-max", "4"],
            vec!["t", "cost", "--asymptote", "--format", "csv"],
            vec!["t", "synth", "--out", "o", "--seed", "7", "--count", "2"],
            vec!["t", "eval", "--detections", "d.csv", "--truth", "t.txt"],
            vec!["t", "diff", "a.csv", "b.csv"],
            vec!["t", "augment", "a.png", "b.png", "--out", "o"],
        ] {
            assert!(Cli::try_parse_from(&args).is_ok(), "{args:?}");
        }
        assert!(Cli::try_parse_from(["t", "augment", "--out", "o"]).is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_from_args(["t", "frobnicate"]), 2);
        assert_eq!(run_from_args(["t", "cost", "--r", "1.5"]), 2);
        assert_eq!(
            run_from_args([
                "t",
                "run",
                "m.png",
                "--out",
                "o",
                "--config",
                "/nonexistent/c.json"
            ]),
            2
        );
    }
}
