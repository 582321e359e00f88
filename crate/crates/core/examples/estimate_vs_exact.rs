//! The asymptotic estimate against exact counts on small uniform margins.
//!
//! cargo run --release --example estimate_vs_exact

use tablecensus::estimator::{compare, CorrectionChoice, EstimateOptions};
use tablecensus::margins::MarginSpec;

fn main() -> tablecensus::Result<()> {
    let with = EstimateOptions::default();
    let without = EstimateOptions {
        correction: CorrectionChoice::None,
        ..Default::default()
    };
    println!("{:>3} {:>6} {:>14} {:>12} {:>12} {:>12}", "k", "sum", "exact", "ln exact", "gap", "gap (no corr)");
    for k in 2..=6usize {
        let s = 2.0 * k as f64;
        let spec = MarginSpec::new(vec![s; k], vec![s; k])?;
        let c = compare(&spec, &with)?;
        let bare = compare(&spec, &without)?;
        println!(
            "{k:>3} {s:>6} {:>14} {:>12.5} {:>12.5} {:>12.5}",
            c.exact_count, c.exact_log, c.log_ratio, bare.log_ratio
        );
    }
    Ok(())
}
