//! Left-half family: closed-form typical table and its determinant.
//!
//! cargo run --release --example left_half

use tablecensus::gaussian::{assemble_q, logdet_dense, structured_logdet};
use tablecensus::margins::{left_half_margins, FamilyParams};
use tablecensus::typical::solve_block_typical;

fn main() -> tablecensus::Result<()> {
    for n in [16, 64, 256] {
        let params = FamilyParams::new(n, 0.5, 1.0, 1.0)?;
        let spec = left_half_margins(params)?;
        let (table, _) = solve_block_typical(&spec, 1e-12)?;
        let b = table.as_block().unwrap();
        let det = structured_logdet(&table, &spec)?;
        let dense = logdet_dense(&assemble_q(&table, &spec)?)?;
        println!(
            "n={n:<4} heavy rows {:<3} z_hh {:.9} z_light {:.9}  ln det Q structured {:.8} dense {:.8}",
            params.n_heavy(),
            b.z_hh(),
            b.z_light().unwrap(),
            det.logdet_total,
            dense
        );
    }
    Ok(())
}
