//! Heavy-block entries of the bd family approach their large-n limits.
//!
//! cargo run --release --example subcritical_convergence

use tablecensus::margins::{bd_margins, FamilyParams};
use tablecensus::typical::{large_n_limits, solve_block_typical};

fn main() -> tablecensus::Result<()> {
    let (delta, b, c) = (0.5, 2.0, 1.0);
    let limits = large_n_limits(FamilyParams::new(100, delta, b, c)?)?;
    let z11 = limits.z11_limit.expect("B=2 is subcritical for C=1");
    println!("limits: z_hh -> {z11:.4}, z_hl -> {:.4}, z_ll -> {:.4}", limits.z1n1_limit, limits.znn_limit);
    println!("{:>7} {:>10} {:>10} {:>10} {:>8}", "n", "z_hh", "|err|", "ratio", "sqrt(n)*err");
    let mut prev: Option<f64> = None;
    for n in [100, 400, 1600, 6400, 25600, 102400] {
        let spec = bd_margins(FamilyParams::new(n, delta, b, c)?)?;
        let (table, _) = solve_block_typical(&spec, 1e-10)?;
        let z = table.as_block().unwrap().z_hh();
        let err = (z - z11).abs();
        let ratio = prev.map_or(String::new(), |p| format!("{:.3}", err / p));
        println!("{n:>7} {z:>10.5} {err:>10.5} {ratio:>10} {:>8.2}", (n as f64).sqrt() * err);
        prev = Some(err);
    }
    Ok(())
}
