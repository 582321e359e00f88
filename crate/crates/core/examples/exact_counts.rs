//! Exact table counts by memoized dynamic programming.
//!
//! cargo run --release --example exact_counts

use tablecensus::exact::{count_2x2, count_exact};
use tablecensus::margins::MarginSpec;

fn main() -> tablecensus::Result<()> {
    let cases: &[(&[u64], &[u64])] = &[
        (&[2, 2], &[2, 2]),
        (&[1, 1, 1], &[1, 1, 1]),
        (&[2, 2, 2], &[2, 2, 2]),
        (&[3, 3, 3], &[3, 3, 3]),
        (&[5, 4, 3, 2], &[4, 4, 3, 3]),
        (&[10; 5], &[10; 5]),
    ];
    println!("{:<20} {:<20} {:>16} {:>8} {:>10}", "rows", "cols", "count", "states", "ln count");
    for (rows, cols) in cases {
        let spec = MarginSpec::from_integers(rows, cols)?;
        let c = count_exact(&spec)?;
        println!(
            "{:<20} {:<20} {:>16} {:>8} {:>10.4}",
            format!("{rows:?}"),
            format!("{cols:?}"),
            c.count,
            c.states_explored,
            c.ln()
        );
    }
    println!("2x2 closed form (7,5)/(6,6): {}", count_2x2(7, 5, 6, 6)?);
    Ok(())
}
