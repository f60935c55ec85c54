//! Exact linear assignment (Hungarian algorithm with potentials).

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `perm[i]` is the column assigned to row `i`.
    pub perm: Vec<usize>,
    /// `Σ_i cost[i][perm[i]]`, summed in row order.
    pub cost: f64,
}

/// Minimum-cost perfect assignment of a square cost matrix.
///
/// Among assignments of equal cost the lexicographically smallest permutation
/// is returned.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Result<Assignment> {
    let n = cost.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty cost matrix".into()));
    }
    let mut max_abs = 0.0f64;
    for (i, row) in cost.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: row.len(),
            });
        }
        for (j, &c) in row.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "cost[{i}][{j}] is not finite ({c})"
                )));
            }
            max_abs = max_abs.max(c.abs());
        }
    }

    let (u, v, matched) = hungarian(cost);

    // Edges with (numerically) zero reduced cost form the equality subgraph;
    // every perfect matching inside it is optimal.
    let tol = 1e-11 * (1.0 + max_abs) * n as f64;
    let tight: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| cost[i][j] - u[i] - v[j] <= tol).collect())
        .collect();
    let tight_edges: usize = tight.iter().map(|r| r.iter().filter(|&&t| t).count()).sum();

    let perm = if tight_edges == n {
        matched
    } else {
        lexicographic_matching(&tight).unwrap_or(matched)
    };
    let total = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(Assignment { perm, cost: total })
}

/// O(n³) shortest augmenting path with row/column potentials. Returns the
/// potentials and the row → column matching.
fn hungarian(cost: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let n = cost.len();
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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

    let mut matched = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            matched[p[j] - 1] = j - 1;
        }
    }
    (u[1..].to_vec(), v[1..].to_vec(), matched)
}

/// Lexicographically smallest perfect matching of a bipartite graph, fixing
/// rows greedily and checking extendability with augmenting paths.
fn lexicographic_matching(adj: &[Vec<bool>]) -> Option<Vec<usize>> {
    let n = adj.len();
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut col_used = vec![false; n];
    for i in 0..n {
        let choice = (0..n).find(|&j| {
            if col_used[j] || !adj[i][j] {
                return false;
            }
            col_used[j] = true;
            let ok = has_perfect_matching(adj, i + 1, &col_used);
            col_used[j] = false;
            ok
        })?;
        col_used[choice] = true;
        fixed.push(choice);
    }
    Some(fixed)
}

fn has_perfect_matching(adj: &[Vec<bool>], first_row: usize, col_used: &[bool]) -> bool {
    let n = adj.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for i in first_row..n {
        let mut seen = vec![false; n];
        if !augment(adj, i, col_used, &mut seen, &mut owner) {
            return false;
        }
    }
    true
}

fn augment(
    adj: &[Vec<bool>],
    row: usize,
    col_used: &[bool],
    seen: &mut [bool],
    owner: &mut [Option<usize>],
) -> bool {
    for j in 0..adj.len() {
        if !adj[row][j] || col_used[j] || seen[j] {
            continue;
        }
        seen[j] = true;
        let free = match owner[j] {
            None => true,
            Some(r) => augment(adj, r, col_used, seen, owner),
        };
        if free {
            owner[j] = Some(row);
            return true;
        }
    }
    false
}
