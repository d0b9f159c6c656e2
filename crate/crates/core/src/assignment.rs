//! Hungarian algorithm (shortest augmenting paths with potentials) for
//! rectangular linear assignment, `O(rows^2 * cols)`.

use crate::error::{Error, Result};

/// Minimum-cost assignment of every row to a distinct column.
/// Requires `rows <= cols`; returns the column chosen for each row.
pub fn linear_sum_assignment<F>(rows: usize, cols: usize, cost: F) -> Result<Vec<usize>>
where
    F: Fn(usize, usize) -> f64,
{
    if rows > cols {
        return Err(Error::Dimension(format!("{rows} rows cannot be matched into {cols} columns")));
    }
    // 1-based bookkeeping; column 0 is the virtual source.
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![0.0f64; cols + 1];
    let mut used = vec![false; cols + 1];

    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if !cur.is_finite() {
                        return Err(Error::NonFinite("assignment cost"));
                    }
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![0usize; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    Ok(out)
}
