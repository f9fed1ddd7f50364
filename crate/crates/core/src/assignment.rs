//! Minimum-cost one-to-one assignment (Kuhn-Munkres with potentials,
//! shortest augmenting paths, O(n²m)).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// `assignment[row]` is the column matched to `row`, if any.
    pub assignment: Vec<Option<usize>>,
    pub total_cost: f64,
}

impl MatchResult {
    pub fn empty(rows: usize) -> Self {
        Self {
            assignment: vec![None; rows],
            total_cost: 0.0,
        }
    }

    /// Matched `(row, column)` pairs in row order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| (r, c)))
    }

    /// Inverse map from column to row.
    pub fn column_owners(&self, cols: usize) -> Vec<Option<usize>> {
        let mut owners = vec![None; cols];
        for (r, c) in self.pairs() {
            owners[c] = Some(r);
        }
        owners
    }
}

/// Solves the rectangular assignment problem on `cost` (rows × columns),
/// matching `min(rows, cols)` pairs at minimum total cost.
///
/// `f64::INFINITY` marks a forbidden pair. Ties resolve towards lower
/// column indices for earlier rows.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<MatchResult> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidConfig("cost matrix rows differ in length"));
    }
    if cost.iter().flatten().any(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
        return Err(Error::InvalidConfig("cost matrix holds NaN or -inf"));
    }
    if rows == 0 || cols == 0 {
        return Ok(MatchResult::empty(rows));
    }

    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| -> f64 {
        if transposed {
            cost[j][i]
        } else {
            cost[i][j]
        }
    };

    // 1-based potentials; column 0 is the virtual root of each search
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let c = at(i0 - 1, j - 1);
                if c.is_finite() {
                    let reduced = c - u[i0] - v[j];
                    if reduced < minv[j] {
                        minv[j] = reduced;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 || !delta.is_finite() {
                return Err(Error::NoFeasibleAssignment);
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    let mut total_cost = 0.0;
    for (j, &o) in owner.iter().enumerate().take(m + 1).skip(1) {
        if o == 0 {
            continue;
        }
        let (r, c) = if transposed { (j - 1, o - 1) } else { (o - 1, j - 1) };
        assignment[r] = Some(c);
    }
    for (r, c) in assignment.iter().enumerate() {
        if let Some(c) = c {
            total_cost += cost[r][*c];
        }
    }
    Ok(MatchResult {
        assignment,
        total_cost,
    })
}
