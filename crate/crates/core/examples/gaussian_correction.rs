//! The correction factor exp(-mu/2 + nu): Wick sums against seeded Monte Carlo.
//!
//! cargo run --release --example gaussian_correction

use tablecensus::gaussian::{assemble_q, correction_mc, correction_wick, Sampler};
use tablecensus::margins::MarginSpec;
use tablecensus::typical::{solve_typical, SolverOptions};

fn main() -> tablecensus::Result<()> {
    for (rows, cols) in [(vec![2.0; 2], vec![2.0; 2]), (vec![3.0; 3], vec![3.0; 3]), (vec![4.0, 2.0, 1.0], vec![3.0, 2.0, 2.0])] {
        let spec = MarginSpec::new(rows, cols)?;
        let (table, _) = solve_typical(&spec, SolverOptions::default())?;
        let model = assemble_q(&table, &spec)?;
        let wick = correction_wick(&table, &model)?;
        println!("rows {:?} cols {:?}", spec.rows(), spec.cols());
        println!("  wick         mu {:.5} nu {:.5} log factor {:.5}", wick.mu, wick.nu, wick.correction_log);
        for sampler in [Sampler::Reduced, Sampler::Subspace] {
            let mc = correction_mc(&table, &model, 200_000, 7, sampler)?;
            println!(
                "  mc {:<9} mu {:.5}±{:.5} nu {:.5}±{:.5}",
                format!("{sampler:?}"),
                mc.mu,
                mc.std_err_mu.unwrap(),
                mc.nu,
                mc.std_err_nu.unwrap()
            );
        }
    }
    Ok(())
}
