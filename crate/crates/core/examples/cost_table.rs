//! Predicted processing time against the number of classifier levels.
//!
//! ```text
//! cargo run --example cost_table -- 0.4 5
//! ```

use cascade_tiler::costmodel::{asymptotic_time, break_even_limit, normalized_time};

fn main() -> cascade_tiler::Result<()> {
    let mut args = std::env::args().skip(1);
    let r: f64 = args
        .next()
        .map_or(0.4, |s| s.parse().expect("R must be a number"));
    let a: f64 = args
        .next()
        .map_or(5.0, |s| s.parse().expect("A must be a number"));

    println!("R = {r}, A = {a}");
    for n in 0..=6 {
        println!("  n = {n}: T = {:.4}", normalized_time(n, r, a)?);
    }
    println!("levels pay off while R < {:.3}", break_even_limit(a));
    match asymptotic_time(r, a) {
        Ok(t) => println!("never below {t:.4}, however many levels"),
        Err(e) => println!("no limit: {e}"),
    }
    Ok(())
}
