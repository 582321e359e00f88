//! Determinant of `Q` for block tables by diagonal expansion.
//!
//! Write `Q = A + E` with `A` diagonal. Then `det Q = sum_S det(E_S) prod_{i not in S} a_i`
//! over principal minors `E_S`. `E` only couples row to column variables, so
//! a minor vanishes unless it picks equally many rows and columns, `p` each,
//! and then equals `(-1)^p det(X_S)^2` for the cross block `X`. With two
//! groups per side `X` has rank at most 2 and only `p = 0, 1, 2` survive,
//! i.e. minor orders 0, 2 and 4.
//!
//! Everything is kept relative to `det A`, which carries the magnitude:
//! `ln det Q = ln det A + ln(1 + s_2 + s_4)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::quadratic::{assemble_q, BlockQ};
use crate::margins::{FamilyKind, MarginSpec};
use crate::typical::TypicalTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinorTerm {
    /// Order of the principal minor of `E`.
    pub order: usize,
    /// Contribution divided by `det A`.
    pub ratio: f64,
    /// `ln |contribution|`; `-inf` for a zero term.
    pub log_magnitude: f64,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuredDetBreakdown {
    pub family: Option<FamilyKind>,
    pub log_det_a: f64,
    pub terms: Vec<MinorTerm>,
    pub logdet_total: f64,
    /// Order-4 term evaluated with the bare multiplicity `n_heavy^2 n (n-1)`
    /// times the bracket `w_hh w_ll - w_hl^2`, without the complementary
    /// diagonal product. Square family only; reported for comparison.
    pub order4_bare: Option<f64>,
}

fn term(order: usize, ratio: f64, log_det_a: f64) -> MinorTerm {
    MinorTerm {
        order,
        ratio,
        log_magnitude: log_det_a + ratio.abs().ln(),
        sign: if ratio > 0.0 {
            1
        } else if ratio < 0.0 {
            -1
        } else {
            0
        },
    }
}

/// Diagonal-expansion determinant of `Q` for a block typical table.
pub fn structured_logdet(table: &TypicalTable, spec: &MarginSpec) -> Result<StructuredDetBreakdown> {
    if table.as_block().is_none() {
        return Err(Error::NotBlock("structured determinant needs a block typical table".into()));
    }
    let model = assemble_q(table, spec)?;
    let bq = model.as_block().expect("block table yields block Q");
    let breakdown = expand(bq);
    let family = spec.origin().map(|f| f.kind);
    let order4_bare = match spec.origin() {
        Some(f) if f.kind == FamilyKind::Bd && bq.cross.len() == 2 && bq.cross[0].len() == 2 => {
            let k = f.params.n_heavy() as f64;
            let n = f.params.n as f64;
            let w = &bq.cross;
            Some(k * k * n * (n - 1.0) * (w[0][0] * w[1][1] - w[0][1] * w[0][1]))
        }
        _ => None,
    };

    let log_det_a = breakdown.log_det_a;
    let sum = 1.0 + breakdown.order2 + breakdown.order4;
    if !(sum > 0.0) {
        return Err(Error::NegativeDeterminant(sum));
    }
    Ok(StructuredDetBreakdown {
        family,
        log_det_a,
        terms: vec![
            term(0, 1.0, log_det_a),
            term(2, breakdown.order2, log_det_a),
            term(4, breakdown.order4, log_det_a),
        ],
        logdet_total: log_det_a + sum.ln(),
        order4_bare,
    })
}

struct Expansion {
    log_det_a: f64,
    order2: f64,
    order4: f64,
}

fn expand(bq: &BlockQ) -> Expansion {
    let p: Vec<f64> = bq.row_counts.iter().map(|&c| c as f64).collect();
    let q: Vec<f64> = bq.col_counts.iter().map(|&c| c as f64).collect();
    let (a_r, a_c, w) = (&bq.row_diag, &bq.col_diag, &bq.cross);

    let log_det_a = p.iter().zip(a_r).map(|(c, a)| c * a.ln()).sum::<f64>()
        + q.iter().zip(a_c).map(|(c, a)| c * a.ln()).sum::<f64>();

    // One row and one column: -w^2 for each cell.
    let mut order2 = 0.0;
    for g in 0..p.len() {
        for h in 0..q.len() {
            order2 -= p[g] * q[h] * w[g][h] * w[g][h] / (a_r[g] * a_c[h]);
        }
    }

    // Two rows from different groups and two columns from different groups.
    let mut order4 = 0.0;
    if p.len() == 2 && q.len() == 2 {
        let minor = w[0][0] * w[1][1] - w[0][1] * w[1][0];
        order4 = p[0] * p[1] * q[0] * q[1] * minor * minor / (a_r[0] * a_r[1] * a_c[0] * a_c[1]);
    }
    Expansion {
        log_det_a,
        order2,
        order4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::quadratic::logdet_dense;
    use crate::margins::{bd_margins, left_half_margins, FamilyParams};
    use crate::typical::solve_block_typical;

    fn check(spec: &MarginSpec) {
        let (table, _) = solve_block_typical(spec, 1e-10).unwrap();
        let structured = structured_logdet(&table, spec).unwrap();
        let dense = logdet_dense(&assemble_q(&table, spec).unwrap()).unwrap();
        let rel = (structured.logdet_total - dense).abs() / dense.abs();
        assert!(rel <= 1e-8, "structured {} dense {dense}", structured.logdet_total);
    }

    #[test]
    fn bd_matches_dense() {
        for n in [4, 9, 16] {
            check(&bd_margins(FamilyParams::new(n, 0.5, 2.0, 1.0).unwrap()).unwrap());
        }
        check(&bd_margins(FamilyParams::new(5, 0.0, 3.0, 2.0).unwrap()).unwrap());
    }

    #[test]
    fn left_half_matches_dense() {
        let spec = left_half_margins(FamilyParams::new(16, 0.5, 1.0, 1.0).unwrap()).unwrap();
        check(&spec);
        let (table, _) = solve_block_typical(&spec, 1e-10).unwrap();
        let b = structured_logdet(&table, &spec).unwrap();
        // One column group: the cross block has rank one.
        assert_eq!(b.terms[2].ratio, 0.0);
        assert!(b.order4_bare.is_none());
    }

    #[test]
    fn uniform_bracket_vanishes() {
        let spec = MarginSpec::new(vec![3.0; 4], vec![3.0; 4]).unwrap();
        let (table, _) = solve_block_typical(&spec, 1e-10).unwrap();
        let b = structured_logdet(&table, &spec).unwrap();
        assert_eq!(b.terms[2].ratio, 0.0);
        check(&spec);
    }

    #[test]
    fn bare_order4_reported_for_bd() {
        let spec = bd_margins(FamilyParams::new(9, 0.5, 2.0, 1.0).unwrap()).unwrap();
        let (table, _) = solve_block_typical(&spec, 1e-10).unwrap();
        let b = structured_logdet(&table, &spec).unwrap();
        assert!(b.order4_bare.unwrap() > 0.0);
        assert_eq!(b.family, Some(FamilyKind::Bd));
        assert!(b.terms[1].sign < 0 && b.terms[2].sign > 0);
    }

    #[test]
    fn dense_table_rejected() {
        let spec = MarginSpec::new(vec![2.0, 2.0], vec![2.0, 2.0]).unwrap();
        let table = TypicalTable::from_dense(nalgebra::DMatrix::from_element(2, 2, 1.0), &spec);
        assert!(matches!(structured_logdet(&table, &spec), Err(Error::NotBlock(_))));
    }
}
