//! Maximum-similarity bipartite assignment.
//!
//! [`hungarian_max`] solves the rectangular assignment problem exactly with
//! the O(n³) shortest-augmenting-path form of the Hungarian algorithm,
//! zero-padding the smaller side. Among all optimal assignments it returns
//! the one whose pair list, sorted by row, is lexicographically smallest, so
//! results never depend on solver internals.

use crate::error::{Error, Result};

/// Reduced costs at or below this are treated as tight when enumerating
/// optimal assignments.
const TIGHT_TOL: f64 = 1e-11;

/// Row-major `rows × cols` similarity matrix with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Usage(format!(
                "matrix of {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(Error::Usage(format!("similarity {bad} outside [0, 1]")));
        }
        Ok(SimilarityMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Usage("ragged similarity matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Fill a matrix by evaluating `kernel` on every (row, col) pair.
    pub fn build<P, G>(
        preds: &[P],
        gts: &[G],
        mut kernel: impl FnMut(&P, &G) -> Result<f64>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(preds.len() * gts.len());
        for p in preds {
            for g in gts {
                values.push(kernel(p, g)?);
            }
        }
        Self::new(preds.len(), gts.len(), values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of the matched similarities.
    pub total: f64,
}

/// Find a maximum-total assignment of size `min(rows, cols)`.
pub fn hungarian_max(sim: &SimilarityMatrix) -> Result<Matching> {
    if sim.rows == 0 || sim.cols == 0 {
        return Err(Error::Usage("cannot match an empty similarity matrix".into()));
    }
    let n = sim.rows.max(sim.cols);
    // Square cost matrix: cost = -similarity, padding cells cost 0.
    let cost = |i: usize, j: usize| -> f64 {
        if i < sim.rows && j < sim.cols {
            -sim.get(i, j)
        } else {
            0.0
        }
    };

    let (row_pot, col_pot, mut col_of_row) = solve_min_cost(n, &cost);

    let tight: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| cost(i, j) - row_pot[i] - col_pot[j] <= TIGHT_TOL)
                .collect()
        })
        .collect();
    lexicographic_refine(&tight, &mut col_of_row);

    let mut pairs = Vec::with_capacity(sim.rows.min(sim.cols));
    let mut total = 0.0;
    for (row, &col) in col_of_row.iter().enumerate().take(sim.rows) {
        if col < sim.cols {
            pairs.push((row, col));
            total += sim.get(row, col);
        }
    }
    Ok(Matching { pairs, total })
}

/// Shortest augmenting path Hungarian method on an `n × n` cost function.
///
/// Returns row potentials, column potentials and the column assigned to each
/// row. At optimum every `cost(i, j) - u[i] - v[j]` is nonnegative and zero on
/// the assignment.
fn solve_min_cost(n: usize, cost: &impl Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    // 1-based internally; index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
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

    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        col_of_row[row_of_col[j] - 1] = j - 1;
    }
    (u[1..].to_vec(), v[1..].to_vec(), col_of_row)
}

/// Rewrite a perfect matching inside the tight subgraph into the
/// lexicographically smallest one (by column, row after row).
fn lexicographic_refine(tight: &[Vec<bool>], col_of_row: &mut [usize]) {
    let n = col_of_row.len();
    let mut row_of_col = vec![0usize; n];
    for (r, &c) in col_of_row.iter().enumerate() {
        row_of_col[c] = r;
    }

    for r in 0..n {
        for c in 0..n {
            if c == col_of_row[r] {
                break;
            }
            if !tight[r][c] || row_of_col[c] < r {
                continue;
            }
            // Free column c by moving its row along an alternating path that
            // ends at r's current column, never touching fixed rows (< r) or r.
            if let Some(moves) = alternating_path(tight, col_of_row, &row_of_col, r, c) {
                for (row, new_col) in moves {
                    col_of_row[row] = new_col;
                    row_of_col[new_col] = row;
                }
                col_of_row[r] = c;
                row_of_col[c] = r;
                break;
            }
        }
    }
}

/// BFS from the row currently holding `start_col` to a row that can take the
/// column currently held by `fixed_row`. Returns `(row, new_col)` moves.
fn alternating_path(
    tight: &[Vec<bool>],
    col_of_row: &[usize],
    row_of_col: &[usize],
    fixed_row: usize,
    start_col: usize,
) -> Option<Vec<(usize, usize)>> {
    let n = col_of_row.len();
    let goal = col_of_row[fixed_row];
    let start_row = row_of_col[start_col];
    let mut parent: Vec<Option<usize>> = vec![None; n]; // indexed by column reached
    let mut seen = vec![false; n];
    seen[start_col] = true;
    let mut queue = std::collections::VecDeque::from([start_row]);

    while let Some(row) = queue.pop_front() {
        for col in 0..n {
            if seen[col] || !tight[row][col] {
                continue;
            }
            let holder = row_of_col[col];
            if col != goal && holder <= fixed_row {
                continue;
            }
            seen[col] = true;
            parent[col] = Some(row);
            if col == goal {
                let mut moves = Vec::new();
                let mut c = col;
                while let Some(r) = parent[c] {
                    moves.push((r, c));
                    c = col_of_row[r];
                    if c == start_col {
                        break;
                    }
                }
                return Some(moves);
            }
            queue.push_back(holder);
        }
    }
    None
}

/// Matched similarity normalized by the larger set size.
///
/// Returns `None` when both sets are empty (the kind is not scored) and `0`
/// when exactly one is empty.
pub fn matched_type_score<P, G>(
    preds: &[P],
    gts: &[G],
    kernel: impl FnMut(&P, &G) -> Result<f64>,
) -> Result<Option<f64>> {
    match (preds.is_empty(), gts.is_empty()) {
        (true, true) => return Ok(None),
        (true, false) | (false, true) => return Ok(Some(0.0)),
        _ => {}
    }
    let sim = SimilarityMatrix::build(preds, gts, kernel)?;
    let matching = hungarian_max(&sim)?;
    let denom = preds.len().max(gts.len()) as f64;
    Ok(Some((matching.total / denom).clamp(0.0, 1.0)))
}
