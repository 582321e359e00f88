//! Exact number of non-negative integer matrices with given margins.
//!
//! Rows are filled one at a time (largest first). The number of ways to
//! complete a partial table only depends on the multiset of remaining column
//! sums, so states are memoized on the sorted remainder with zeros dropped.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::margins::MarginSpec;

pub const DEFAULT_STATE_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactCount {
    pub count: BigUint,
    pub states_explored: usize,
    pub memo_hits: usize,
    pub elapsed: Duration,
}

/// JSON form; the count is a decimal string.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactCountReport {
    pub count: String,
    pub states: usize,
    pub memo_hits: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl ExactCount {
    pub fn ln(&self) -> f64 {
        ln_biguint(&self.count)
    }

    pub fn report(&self, with_timing: bool) -> ExactCountReport {
        ExactCountReport {
            count: self.count.to_string(),
            states: self.states_explored,
            memo_hits: self.memo_hits,
            elapsed_ms: with_timing.then_some(self.elapsed.as_secs_f64() * 1e3),
        }
    }
}

/// Natural log of a big integer; `-inf` for zero.
pub fn ln_biguint(value: &BigUint) -> f64 {
    let bits = value.bits();
    if bits <= 1000 {
        return value.to_f64().map_or(f64::INFINITY, f64::ln);
    }
    let shift = bits - 64;
    let top = (value >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Counts tables for an integral [`MarginSpec`].
pub fn count_exact(spec: &MarginSpec) -> Result<ExactCount> {
    let (rows, cols) = spec.integer_margins().ok_or(Error::NotIntegral)?;
    count_exact_with_budget(&rows, &cols, DEFAULT_STATE_BUDGET)
}

struct Counter {
    rows: Vec<u64>,
    memo: HashMap<(usize, Vec<u64>), BigUint>,
    hits: usize,
    budget: usize,
}

impl Counter {
    fn count(&mut self, row: usize, cols: Vec<u64>) -> Result<BigUint> {
        if row + 1 == self.rows.len() {
            // Balance forces the last row.
            return Ok(BigUint::one());
        }
        let key = (row, cols);
        if let Some(v) = self.memo.get(&key) {
            self.hits += 1;
            return Ok(v.clone());
        }
        if self.memo.len() >= self.budget {
            return Err(Error::StateBudget {
                budget: self.budget,
                states: self.memo.len(),
                memo_hits: self.hits,
            });
        }
        let cols = key.1;
        let mut suffix_caps = vec![0u64; cols.len() + 1];
        for k in (0..cols.len()).rev() {
            suffix_caps[k] = suffix_caps[k + 1] + cols[k];
        }

        let mut total = BigUint::zero();
        let mut remaining = cols.clone();
        self.fill(row, &cols, &suffix_caps, 0, self.rows[row], &mut remaining, &mut total)?;
        self.memo.insert((row, cols), total.clone());
        Ok(total)
    }

    /// Enumerates the entries of `row` column by column.
    #[allow(clippy::too_many_arguments)]
    fn fill(
        &mut self,
        row: usize,
        cols: &[u64],
        suffix_caps: &[u64],
        k: usize,
        left: u64,
        remaining: &mut Vec<u64>,
        total: &mut BigUint,
    ) -> Result<()> {
        if k == cols.len() {
            if left == 0 {
                let mut next: Vec<u64> = remaining.iter().copied().filter(|&c| c > 0).collect();
                next.sort_unstable_by(|a, b| b.cmp(a));
                *total += self.count(row + 1, next)?;
            }
            return Ok(());
        }
        let lo = left.saturating_sub(suffix_caps[k + 1]);
        let hi = left.min(cols[k]);
        for x in lo..=hi {
            remaining[k] = cols[k] - x;
            self.fill(row, cols, suffix_caps, k + 1, left - x, remaining, total)?;
        }
        remaining[k] = cols[k];
        Ok(())
    }
}

/// Counts tables for non-negative integer margins with an explicit memo budget.
pub fn count_exact_with_budget(rows: &[u64], cols: &[u64], budget: usize) -> Result<ExactCount> {
    let start = Instant::now();
    let row_total: u128 = rows.iter().map(|&r| r as u128).sum();
    let col_total: u128 = cols.iter().map(|&c| c as u128).sum();
    if row_total != col_total {
        return Err(Error::Imbalanced {
            residual: row_total as f64 - col_total as f64,
        });
    }
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::InvalidParams("margins need at least one row and one column".into()));
    }
    let mut sorted_rows = rows.to_vec();
    sorted_rows.sort_unstable_by(|a, b| b.cmp(a));
    let mut start_cols: Vec<u64> = cols.iter().copied().filter(|&c| c > 0).collect();
    start_cols.sort_unstable_by(|a, b| b.cmp(a));

    let mut counter = Counter {
        rows: sorted_rows,
        memo: HashMap::new(),
        hits: 0,
        budget,
    };
    let count = counter.count(0, start_cols)?;
    Ok(ExactCount {
        count,
        states_explored: counter.memo.len(),
        memo_hits: counter.hits,
        elapsed: start.elapsed(),
    })
}

/// Closed form for 2x2 tables: the free cell ranges over
/// `max(0, r1 - c2) ..= min(r1, c1)`.
pub fn count_2x2(r1: u64, r2: u64, c1: u64, c2: u64) -> Result<u64> {
    if r1 + r2 != c1 + c2 {
        return Err(Error::Imbalanced {
            residual: (r1 + r2) as f64 - (c1 + c2) as f64,
        });
    }
    let lo = r1.saturating_sub(c2);
    let hi = r1.min(c1);
    Ok(if hi >= lo { hi - lo + 1 } else { 0 })
}
