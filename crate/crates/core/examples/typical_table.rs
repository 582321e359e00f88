//! Maximum-entropy typical tables: dense and block solvers.
//!
//! cargo run --release --example typical_table

use tablecensus::margins::{bd_margins, FamilyParams, MarginSpec};
use tablecensus::typical::{solve_block_typical, solve_typical, SolverOptions};

fn main() -> tablecensus::Result<()> {
    let spec = MarginSpec::new(vec![5.0, 3.0, 1.0], vec![4.0, 4.0, 1.0])?;
    let (table, cert) = solve_typical(&spec, SolverOptions::default())?;
    println!("typical table for rows {:?}, cols {:?}", spec.rows(), spec.cols());
    println!("{:.6}", table.to_dense());
    println!("margin residual {:.2e}", table.margin_residual(&spec));
    println!("row potentials {:?}", cert.row_potentials);

    let spec = bd_margins(FamilyParams::new(400, 0.5, 2.0, 1.0)?)?;
    let (block, _) = solve_block_typical(&spec, 1e-10)?;
    let b = block.as_block().unwrap();
    println!(
        "bd n=400: {}x{} table with z_hh {:.6}, z_hl {:.6}, z_ll {:.6}, residual {:.1e}",
        block.m(),
        block.n(),
        b.z_hh(),
        b.z_hl().unwrap(),
        b.z_ll().unwrap(),
        block.residual()
    );
    Ok(())
}
