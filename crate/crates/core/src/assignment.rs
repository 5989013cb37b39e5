//! Exact linear assignment.
//!
//! [`solve_min`] runs the O(n³) shortest-augmenting-path form of the Hungarian
//! method, then walks the equality subgraph of the optimal duals to pick the
//! lexicographically smallest optimal assignment.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::permutation::Permutation;

/// A square matrix of finite costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    c: Array2<f64>,
}

impl CostMatrix {
    pub fn new(c: Array2<f64>) -> Result<Self> {
        let (r, k) = c.dim();
        if r != k || r == 0 {
            return Err(Error::InvalidShape(format!(
                "cost matrix must be square and non-empty, got {r}x{k}"
            )));
        }
        for ((row, col), v) in c.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(CostMatrix { c })
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.c.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.c
    }
}

/// Minimizes `Σ_i C[τ(i), i]` over bijections `τ`.
///
/// Returns `τ` (as a [`Permutation`] with `map[i] = τ(i)`) and the achieved
/// cost, summed over `i` in increasing order. Among optimal assignments the
/// lexicographically smallest `τ` is returned.
pub fn solve_min(cost: &CostMatrix) -> (Permutation, f64) {
    let c = cost.view();
    let n = cost.n();
    let duals = hungarian(c);
    let tau = lexicographic_optimum(c, &duals);
    let total = (0..n).map(|i| c[[tau[i], i]]).sum();
    (Permutation::new(tau).expect("assignment is a bijection"), total)
}

/// Maximizes `⟨Π, C⟩ = Σ_i C[i, map[i]]` over permutations.
pub fn solve_max(cost: &CostMatrix) -> (Permutation, f64) {
    let c = cost.view();
    // Σ_i C[i, map(i)] = −Σ_i (−Cᵀ)[map(i), i].
    let flipped = CostMatrix {
        c: c.t().mapv(|v| -v),
    };
    let (perm, _) = solve_min(&flipped);
    let total = (0..cost.n()).map(|i| c[[i, perm.get(i)]]).sum();
    (perm, total)
}

/// Convenience wrapper validating a raw matrix first.
pub fn solve_min_matrix(c: Array2<f64>) -> Result<(Permutation, f64)> {
    Ok(solve_min(&CostMatrix::new(c)?))
}

struct Duals {
    /// Potential of each row of `C`.
    row: Vec<f64>,
    /// Potential of each column of `C`.
    col: Vec<f64>,
    /// `row_of_col[j]` = row assigned to column `j`.
    row_of_col: Vec<usize>,
    tol: f64,
}

impl Duals {
    #[inline]
    fn tight(&self, c: &ArrayView2<'_, f64>, r: usize, j: usize) -> bool {
        c[[r, j]] - self.row[r] - self.col[j] <= self.tol
    }
}

/// Shortest augmenting path Hungarian method. Columns of `C` are added one at
/// a time; each column ends up matched to a row.
fn hungarian(c: ArrayView2<'_, f64>) -> Duals {
    let n = c.nrows();
    const NONE: usize = usize::MAX;
    // 1-based internal indexing with a virtual index 0 keeps the augmenting
    // bookkeeping branch-free. Internally "rows" are columns of C.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![f64::INFINITY; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = NONE;
            for j in 1..=n {
                if !used[j] {
                    // cost of matching internal row i0 (column i0-1 of C)
                    // with internal column j (row j-1 of C)
                    let cur = c[[j - 1, i0 - 1]] - u[i0] - v[j];
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
            for j in 0..=n {
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

    let mut row_of_col = vec![0usize; n];
    for j in 1..=n {
        row_of_col[p[j] - 1] = j - 1;
    }
    let scale = c.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    Duals {
        row: v[1..].to_vec(),
        col: u[1..].to_vec(),
        row_of_col,
        tol: 1e-12 * scale * n as f64,
    }
}

/// Every optimal assignment uses only edges that are tight under optimal
/// duals, and every perfect matching of tight edges is optimal. Walk columns
/// in order and move each to the smallest row that still admits a perfect
/// tight matching on the remaining columns.
fn lexicographic_optimum(c: ArrayView2<'_, f64>, duals: &Duals) -> Vec<usize> {
    let n = c.nrows();
    let mut row_of_col = duals.row_of_col.clone();
    let mut col_of_row = vec![0usize; n];
    for (j, &r) in row_of_col.iter().enumerate() {
        col_of_row[r] = j;
    }
    // Search state reused across attempts.
    let mut visited_row = vec![0u32; n];
    let mut stamp = 0u32;
    let mut parent_col = vec![usize::MAX; n];

    for i in 0..n {
        let current = row_of_col[i];
        for r in 0..current {
            // Rows held by earlier columns are fixed.
            if col_of_row[r] < i || !duals.tight(&c, r, i) {
                continue;
            }
            // Give r to column i; the column that held r must reach the row
            // that column i releases through an alternating path of tight
            // edges among later columns.
            let start = col_of_row[r];
            let target = current;
            stamp += 1;
            visited_row[r] = stamp;
            if let Some(path_end) = alternating_path(
                &c,
                duals,
                start,
                target,
                i,
                &col_of_row,
                &row_of_col,
                &mut visited_row,
                stamp,
                &mut parent_col,
            ) {
                // Augment: walk back from the target row.
                let mut row = path_end;
                loop {
                    let col = parent_col[row];
                    let prev_row = row_of_col[col];
                    row_of_col[col] = row;
                    col_of_row[row] = col;
                    if col == start {
                        break;
                    }
                    row = prev_row;
                }
                row_of_col[i] = r;
                col_of_row[r] = i;
                break;
            }
        }
    }
    row_of_col
}

/// Iterative DFS from column `start` over tight edges to row `target`.
/// Columns `<= fixed` are never entered. Records `parent_col[row]`.
#[allow(clippy::too_many_arguments)]
fn alternating_path(
    c: &ArrayView2<'_, f64>,
    duals: &Duals,
    start: usize,
    target: usize,
    fixed: usize,
    col_of_row: &[usize],
    row_of_col: &[usize],
    visited_row: &mut [u32],
    stamp: u32,
    parent_col: &mut [usize],
) -> Option<usize> {
    let n = c.nrows();
    // Stack of (column, next row to scan).
    let mut stack = vec![(start, 0usize)];
    while let Some(top) = stack.last_mut() {
        let (col, next) = *top;
        let mut advanced = false;
        for r in next..n {
            if visited_row[r] == stamp || r == row_of_col[col] || !duals.tight(c, r, col) {
                continue;
            }
            if r == target {
                parent_col[r] = col;
                return Some(r);
            }
            let owner = col_of_row[r];
            if owner <= fixed {
                continue;
            }
            visited_row[r] = stamp;
            parent_col[r] = col;
            top.1 = r + 1;
            stack.push((owner, 0));
            advanced = true;
            break;
        }
        if !advanced {
            stack.pop();
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::permutation::all_permutations;
    use crate::random::seeded_rng;
    use ndarray::array;
    use rand::Rng;

    fn brute_min(c: &Array2<f64>) -> (Permutation, f64) {
        let n = c.nrows();
        let mut best: Option<(Permutation, f64)> = None;
        for p in all_permutations(n) {
            let v: f64 = (0..n).map(|i| c[[p.get(i), i]]).sum();
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((p, v));
            }
        }
        best.unwrap()
    }

    #[test]
    fn small_examples() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let (p, v) = solve_min(&c);
        assert_eq!(p.as_slice(), &[0, 1]);
        assert_eq!(v, 0.0);

        let c = CostMatrix::new(array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let (p, v) = solve_min(&c);
        assert_eq!(p.as_slice(), &[0, 1]);
        assert_eq!(v, 2.0);

        let (p, v) = solve_max(&CostMatrix::new(array![[5.0, 0.0], [0.0, 5.0]]).unwrap());
        assert!(p.is_identity());
        assert_eq!(v, 10.0);
        let (p, v) = solve_max(&CostMatrix::new(array![[0.0, 5.0], [5.0, 0.0]]).unwrap());
        assert_eq!(p.as_slice(), &[1, 0]);
        assert_eq!(v, 10.0);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(matches!(
            CostMatrix::new(array![[0.0, f64::NAN], [1.0, 0.0]]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(CostMatrix::new(array![[f64::INFINITY]]).is_err());
        assert!(CostMatrix::new(Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn matches_enumeration_on_random_and_tied_matrices() {
        let mut rng = seeded_rng(5);
        for n in 1..=6 {
            for trial in 0..60 {
                // Alternate continuous costs with small-integer costs full of ties.
                let c = if trial % 2 == 0 {
                    Array2::from_shape_fn((n, n), |_| rng.random_range(-5.0..5.0))
                } else {
                    Array2::from_shape_fn((n, n), |_| rng.random_range(0..3) as f64)
                };
                let (expect_p, expect_v) = brute_min(&c);
                let (p, v) = solve_min(&CostMatrix::new(c.clone()).unwrap());
                assert_eq!(v, expect_v, "{c}");
                assert_eq!(p, expect_p, "{c}");
            }
        }
    }

    #[test]
    fn all_equal_costs_give_identity() {
        let (p, _) = solve_min(&CostMatrix::new(Array2::from_elem((40, 40), 3.0)).unwrap());
        assert!(p.is_identity());
    }

    #[test]
    fn argmin_invariant_under_row_and_column_shifts() {
        let mut rng = seeded_rng(11);
        for _ in 0..50 {
            let n = rng.random_range(2..12);
            let c = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..10.0));
            let (base, _) = solve_min(&CostMatrix::new(c.clone()).unwrap());
            let mut shifted = c.clone();
            let k = rng.random_range(0..n);
            let s: f64 = rng.random_range(-20.0..20.0);
            if rng.random_bool(0.5) {
                shifted.row_mut(k).mapv_inplace(|v| v + s);
            } else {
                shifted.column_mut(k).mapv_inplace(|v| v + s);
            }
            let (moved, _) = solve_min(&CostMatrix::new(shifted).unwrap());
            assert_eq!(base, moved);
        }
    }
}
