#![allow(dead_code)]

/// Brute-force count: every cell ranges over `0..=min(r_i, c_j)` and the
/// finished matrix is checked against both margins.
pub fn naive_count(rows: &[u64], cols: &[u64]) -> u64 {
    let (m, n) = (rows.len(), cols.len());
    let caps: Vec<u64> = (0..m * n).map(|k| rows[k / n].min(cols[k % n])).collect();
    let mut cell = vec![0u64; m * n];
    let mut count = 0;
    loop {
        let rows_ok = (0..m).all(|i| (0..n).map(|j| cell[i * n + j]).sum::<u64>() == rows[i]);
        let cols_ok = (0..n).all(|j| (0..m).map(|i| cell[i * n + j]).sum::<u64>() == cols[j]);
        if rows_ok && cols_ok {
            count += 1;
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == cell.len() {
                return count;
            }
            if cell[k] < caps[k] {
                cell[k] += 1;
                break;
            }
            cell[k] = 0;
            k += 1;
        }
    }
}

/// Integral instances with at most five rows and columns.
pub fn fixtures() -> Vec<(Vec<u64>, Vec<u64>)> {
    let mut out: Vec<(Vec<u64>, Vec<u64>)> = vec![
        (vec![1, 1], vec![1, 1]),
        (vec![2, 2], vec![2, 2]),
        (vec![3, 1], vec![2, 2]),
        (vec![5, 2], vec![4, 3]),
        (vec![1, 1, 1], vec![1, 1, 1]),
        (vec![2, 2, 2], vec![2, 2, 2]),
        (vec![3, 3, 3], vec![3, 3, 3]),
        (vec![4, 2, 1], vec![3, 2, 2]),
        (vec![6, 1, 1], vec![3, 3, 2]),
        (vec![2, 2, 2, 2], vec![2, 2, 2, 2]),
        (vec![4, 4, 4, 4], vec![4, 4, 4, 4]),
        (vec![5, 4, 3, 2], vec![4, 4, 3, 3]),
        (vec![1, 2, 3, 4], vec![5, 5]),
        (vec![3, 3], vec![1, 1, 1, 1, 1, 1]),
        (vec![2, 2, 2, 2, 2], vec![2, 2, 2, 2, 2]),
        (vec![3, 3, 3, 3, 3], vec![5, 5, 5]),
        (vec![10, 10, 10, 10, 10], vec![10, 10, 10, 10, 10]),
        (vec![7, 5, 3, 2, 1], vec![6, 6, 4, 2]),
        (vec![8, 8, 4, 4], vec![6, 6, 6, 6]),
        (vec![1, 1, 1, 1, 1], vec![1, 1, 1, 1, 1]),
        (vec![9, 1], vec![5, 5]),
        (vec![6, 6, 6], vec![9, 9]),
        (vec![12, 3, 3, 3, 3], vec![6, 6, 6, 6]),
        (vec![4, 4, 4, 4, 4], vec![10, 5, 5]),
    ];
    for k in 2..=5u64 {
        out.push((vec![2 * k; k as usize], vec![2 * k; k as usize]));
    }
    out
}

/// Count by enumerating the top-left `(m-1) x (n-1)` cells; the last row and
/// column are then forced and only need to be non-negative.
pub fn free_cell_count(rows: &[u64], cols: &[u64]) -> u64 {
    let (m, n) = (rows.len(), cols.len());
    if rows.iter().sum::<u64>() != cols.iter().sum::<u64>() {
        return 0;
    }
    if m == 1 || n == 1 {
        return 1;
    }
    let free: Vec<(usize, usize)> = (0..m - 1).flat_map(|i| (0..n - 1).map(move |j| (i, j))).collect();
    let mut cell = vec![0i64; free.len()];
    let mut count = 0;
    loop {
        let mut ok = true;
        let mut last_col_total = 0i64;
        for i in 0..m - 1 {
            let used: i64 = (0..n - 1).map(|j| cell[i * (n - 1) + j]).sum();
            let last = rows[i] as i64 - used;
            ok &= last >= 0;
            last_col_total += last;
        }
        for j in 0..n - 1 {
            let used: i64 = (0..m - 1).map(|i| cell[i * (n - 1) + j]).sum();
            ok &= cols[j] as i64 - used >= 0;
        }
        // Corner cell from the last column.
        ok &= cols[n - 1] as i64 - last_col_total >= 0;
        if ok {
            count += 1;
        }
        let mut k = 0;
        loop {
            if k == cell.len() {
                return count;
            }
            let (i, j) = free[k];
            if (cell[k] as u64) < rows[i].min(cols[j]) {
                cell[k] += 1;
                break;
            }
            cell[k] = 0;
            k += 1;
        }
    }
}
