//! Minimum-cost assignment (Hungarian method with potentials, O(n^3)).
//!
//! Among all optimal assignments the one returned is lexicographically
//! smallest: row 0 gets the lowest column any optimal assignment allows it,
//! then row 1 given that, and so on. Rows left unassigned in a rectangular
//! problem count as taking a column past every real one.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(row, column)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Solves the assignment problem for an `n x m` cost matrix with finite entries.
///
/// `min(n, m)` pairs are returned.
pub fn hungarian(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Assignment { pairs: Vec::new(), total: 0.0 };
    }
    assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");
    assert!(cost.iter().flatten().all(|c| c.is_finite()), "non-finite cost");
    let k = n.max(m);
    let c = |i: usize, j: usize| if i < n && j < m { cost[i][j] } else { 0.0 };

    // 1-based potentials solver; p[j] is the row matched to column j
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
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
            for j in 0..=k {
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

    let mut col_of = vec![0usize; k];
    for j in 1..=k {
        col_of[p[j] - 1] = j - 1;
    }
    let scale = cost.iter().flatten().fold(1.0f64, |s, x| s.max(x.abs()));
    let eps = 1e-9 * scale;
    let tight = |i: usize, j: usize| (c(i, j) - u[i + 1] - v[j + 1]).abs() <= eps;
    lexicographic_refine(k, &mut col_of, &tight);

    let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, col_of[i])).filter(|&(_, j)| j < m).collect();
    let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Assignment { pairs, total }
}

/// Moves each row, in order, to its lowest tight column reachable through an
/// alternating cycle among the rows not yet fixed. Every perfect matching of
/// the tight subgraph is optimal, so optimality is preserved.
fn lexicographic_refine(k: usize, col_of: &mut [usize], tight: &dyn Fn(usize, usize) -> bool) {
    let mut row_of = vec![0usize; k];
    for (i, &j) in col_of.iter().enumerate() {
        row_of[j] = i;
    }
    for i in 0..k {
        for j in 0..col_of[i] {
            let r = row_of[j];
            if r < i || !tight(i, j) {
                continue;
            }
            // free column col_of[i] must be reached from row r via tight edges over rows > i
            let target = col_of[i];
            let mut seen = vec![false; k];
            let mut path = Vec::new();
            if augment(r, target, i, col_of, &row_of, tight, &mut seen, &mut path) {
                // path holds (row, new column) steps starting at r
                for &(row, col) in &path {
                    col_of[row] = col;
                    row_of[col] = row;
                }
                col_of[i] = j;
                row_of[j] = i;
                break;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn augment(
    r: usize,
    target: usize,
    fixed_upto: usize,
    col_of: &[usize],
    row_of: &[usize],
    tight: &dyn Fn(usize, usize) -> bool,
    seen: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    seen[r] = true;
    for col in 0..col_of.len() {
        if col == col_of[r] || !tight(r, col) {
            continue;
        }
        if col == target {
            path.push((r, col));
            return true;
        }
        let next = row_of[col];
        if next <= fixed_upto || seen[next] {
            continue;
        }
        path.push((r, col));
        if augment(next, target, fixed_upto, col_of, row_of, tight, seen, path) {
            return true;
        }
        path.pop();
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_favoring() {
        let a = hungarian(&[vec![0.0, 9.0], vec![9.0, 0.0]]);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total, 0.0);
    }

    #[test]
    fn all_equal_gives_identity() {
        let a = hungarian(&[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]]);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn anti_diagonal_preference() {
        let a = hungarian(&[vec![5.0, 1.0], vec![1.0, 5.0]]);
        assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(a.total, 2.0);
    }

    #[test]
    fn rectangular() {
        let a = hungarian(&[vec![3.0, 1.0, 2.0]]);
        assert_eq!(a.pairs, vec![(0, 1)]);
        let b = hungarian(&[vec![3.0], vec![1.0], vec![2.0]]);
        assert_eq!(b.pairs, vec![(1, 0)]);
        let tie = hungarian(&[vec![1.0], vec![1.0]]);
        assert_eq!(tie.pairs, vec![(0, 0)]);
    }
}
