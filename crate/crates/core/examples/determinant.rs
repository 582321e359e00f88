//! ln det Q by Cholesky, by diagonal expansion, and the hyperplane bridge.
//!
//! cargo run --release --example determinant

use tablecensus::gaussian::{assemble_q, det_qh_bridge, logdet_dense, structured_logdet};
use tablecensus::margins::{bd_margins, FamilyParams, MarginSpec};
use tablecensus::typical::{solve_block_typical, solve_typical, SolverOptions};

fn main() -> tablecensus::Result<()> {
    let spec = MarginSpec::new(vec![2.0, 2.0], vec![2.0, 2.0])?;
    let (table, _) = solve_typical(&spec, SolverOptions::default())?;
    let model = assemble_q(&table, &spec)?;
    let ld = logdet_dense(&model)?;
    println!("all-ones 2x2: Q =\n{}", model.to_dense()?);
    println!("det Q = {:.6}, det on hyperplane = {:.6}", ld.exp(), det_qh_bridge(&model, ld).exp());

    println!("{:>5} {:>16} {:>16} {:>10} {:>10}", "n", "structured", "dense", "s2", "s4");
    for n in [4, 9, 16, 64, 256] {
        let spec = bd_margins(FamilyParams::new(n, 0.5, 2.0, 1.0)?)?;
        let (table, _) = solve_block_typical(&spec, 1e-10)?;
        let s = structured_logdet(&table, &spec)?;
        let dense = logdet_dense(&assemble_q(&table, &spec)?)?;
        println!(
            "{n:>5} {:>16.8} {:>16.8} {:>10.4} {:>10.4}",
            s.logdet_total, dense, s.terms[1].ratio, s.terms[2].ratio
        );
    }
    Ok(())
}
