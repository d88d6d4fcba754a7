//! Minimum-cost rectangular assignment (Hungarian method with potentials).

use crate::geometry::{angular_distance, Cartesian};
use crate::scalar::Scalar;

/// A reference/prediction pair chosen by [`match_frame`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair<T> {
    pub reference: usize,
    pub prediction: usize,
    pub angle_deg: T,
}

/// Solves the assignment problem for a row-major `rows x cols` cost matrix.
///
/// Returns `min(rows, cols)` `(row, col)` pairs sorted by row whose total cost
/// is minimal. Column scans run in index order with strict comparisons, so
/// equal-cost alternatives resolve toward lower indices.
pub fn solve_assignment<T: Scalar>(cost: &[T], rows: usize, cols: usize) -> Vec<(usize, usize)> {
    assert_eq!(cost.len(), rows * cols, "cost matrix has wrong length");
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows > cols {
        let transposed: Vec<T> = (0..cols)
            .flat_map(|c| (0..rows).map(move |r| (r, c)))
            .map(|(r, c)| cost[r * cols + c])
            .collect();
        let mut pairs: Vec<(usize, usize)> = solve_assignment(&transposed, cols, rows)
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        return pairs;
    }

    // 1-based indices; column 0 and row 0 are sentinels.
    let n = rows;
    let m = cols;
    let at = |i: usize, j: usize| cost[(i - 1) * m + (j - 1)];
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut row_of_col = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![T::infinity(); m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = T::infinity();
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = at(i0, j) - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| row_of_col[j] != 0)
        .map(|j| (row_of_col[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Associates same-class references and predictions of one frame so that the
/// summed angular distance is minimal. Unmatched items are left out.
pub fn match_frame<T: Scalar>(
    refs: &[Cartesian<T>],
    preds: &[Cartesian<T>],
) -> Vec<MatchedPair<T>> {
    let mut cost = Vec::with_capacity(refs.len() * preds.len());
    for r in refs {
        for p in preds {
            cost.push(angular_distance(r, p));
        }
    }
    solve_assignment(&cost, refs.len(), preds.len())
        .into_iter()
        .map(|(reference, prediction)| MatchedPair {
            reference,
            prediction,
            angle_deg: cost[reference * preds.len() + prediction],
        })
        .collect()
}
