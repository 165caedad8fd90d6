//! Accuracy against predicted time as classifier levels are added, with
//! an oracle that misses tiles holding only a sliver of a building.

use cascade_tiler::backends::ErrorModel;
use cascade_tiler::cascade::{tradeoff_sweep_corpus, SweepOptions};
use cascade_tiler::pyramid::LevelSchedule;
use cascade_tiler::synthmap::{generate, SynthParams};

fn main() -> cascade_tiler::Result<()> {
    let corpus = (0..6)
        .map(|seed| generate(&SynthParams::with_seed(seed)))
        .collect::<cascade_tiler::Result<Vec<_>>>()?;
    let em = ErrorModel {
        fn_base: 0.02,
        edge_penalty: 0.9,
        frac_floor: 0.0005,
        seed: 11,
        ..ErrorModel::zero()
    };
    let schedules: Vec<LevelSchedule> = (0..=4).map(LevelSchedule::table).collect();
    let rows = tradeoff_sweep_corpus(&corpus, &schedules, &em, &SweepOptions::default())?;

    println!(
        "{:>2}  {:<32} {:>8} {:>9} {:>6}",
        "n", "classified tile sizes", "T(n)", "F1", "fn"
    );
    for r in rows {
        println!(
            "{:>2}  {:<32} {:>8.4} {:>9.4} {:>6}",
            r.n, r.tile_sizes, r.predicted_time, r.f1, r.fn_
        );
    }
    Ok(())
}
