//! Exact discrete Wasserstein-1 distance.
//!
//! The balanced transportation problem is solved with the transportation
//! simplex: a north-west-corner starting basis, MODI potentials for reduced
//! costs, Bland's rule for the entering and leaving cells. The basis is kept as
//! an explicit spanning tree of `m + n - 1` cells over the row and column nodes,
//! so degenerate (zero-valued) basic cells need no special treatment and the
//! returned cost is exact up to floating-point summation.

use serde::Serialize;

use crate::candidates::GroundMetric;
use crate::error::{Error, Result};
use crate::simplex::{Simplex, SIMPLEX_TOLERANCE};

/// Reduced costs above `-REDUCED_COST_TOLERANCE` count as non-negative.
const REDUCED_COST_TOLERANCE: f64 = 1e-12;

/// A coupling between two marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    gamma: Vec<f64>,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.cols + j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.gamma
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// `Σ_ij γ_ij D_ij`.
    pub fn cost(&self, metric: &GroundMetric) -> f64 {
        let mut total = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let g = self.get(i, j);
                if g != 0.0 {
                    total += g * metric.get(i, j);
                }
            }
        }
        total
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.gamma.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BasicCell {
    row: usize,
    col: usize,
    flow: f64,
}

/// Exact `W1(p, q; D)` and an optimal plan.
pub fn wasserstein1(
    p: &Simplex,
    q: &Simplex,
    metric: &GroundMetric,
) -> Result<(f64, TransportPlan)> {
    let n = metric.len();
    for len in [p.len(), q.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    check_marginal(p.weights(), "source")?;
    check_marginal(q.weights(), "target")?;
    let plan = solve_transportation(p.weights(), q.weights(), |i, j| metric.get(i, j))?;
    let cost = plan.cost(metric);
    Ok((cost, plan))
}

fn check_marginal(weights: &[f64], which: &str) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::InfeasibleMarginals(format!(
            "{which} marginal is not a distribution (sum {sum})"
        )));
    }
    Ok(())
}

/// Transportation simplex over a dense `supply.len() × demand.len()` cost.
fn solve_transportation(
    supply: &[f64],
    demand: &[f64],
    cost: impl Fn(usize, usize) -> f64,
) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    let mut basis = northwest_corner(supply, demand);
    let max_pivots = 50 * (m * n).max(16);

    let mut pivots = 0;
    while let Some((row, col)) = entering_cell(&basis, m, n, &cost) {
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::SolverStalled { pivots });
        }
        pivot(&mut basis, m, n, row, col);
    }

    let mut gamma = vec![0.0; m * n];
    for cell in &basis {
        gamma[cell.row * n + cell.col] = cell.flow.max(0.0);
    }
    Ok(TransportPlan {
        rows: m,
        cols: n,
        gamma,
    })
}

/// Staircase basis of exactly `m + n - 1` cells. When a row and a column run out
/// together the walk moves down, leaving a zero-flow basic cell in the column.
fn northwest_corner(supply: &[f64], demand: &[f64]) -> Vec<BasicCell> {
    let (m, n) = (supply.len(), demand.len());
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut basis = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    while i < m && j < n {
        let flow = s[i].min(d[j]).max(0.0);
        basis.push(BasicCell {
            row: i,
            col: j,
            flow,
        });
        s[i] -= flow;
        d[j] -= flow;
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || s[i] <= d[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    basis
}

/// Node ids: rows are `0..m`, columns are `m..m+n`.
fn adjacency(basis: &[BasicCell], m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m + n];
    for (k, cell) in basis.iter().enumerate() {
        adj[cell.row].push(k);
        adj[m + cell.col].push(k);
    }
    adj
}

/// Potentials `u_i + v_j = c_ij` on basic cells, with `u_0 = 0`.
fn potentials(
    basis: &[BasicCell],
    m: usize,
    n: usize,
    cost: &impl Fn(usize, usize) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let adj = adjacency(basis, m, n);
    let mut pot = vec![f64::NAN; m + n];
    pot[0] = 0.0;
    let mut stack = vec![0usize];
    while let Some(node) = stack.pop() {
        for &k in &adj[node] {
            let cell = basis[k];
            let (r, c) = (cell.row, m + cell.col);
            let other = if node == r { c } else { r };
            if pot[other].is_nan() {
                let cij = cost(cell.row, cell.col);
                pot[other] = cij - pot[node];
                stack.push(other);
            }
        }
    }
    let v = pot.split_off(m);
    (pot, v)
}

/// Bland's rule: the first non-basic cell in row-major order with negative reduced cost.
fn entering_cell(
    basis: &[BasicCell],
    m: usize,
    n: usize,
    cost: &impl Fn(usize, usize) -> f64,
) -> Option<(usize, usize)> {
    let (u, v) = potentials(basis, m, n, cost);
    let mut is_basic = vec![false; m * n];
    for cell in basis {
        is_basic[cell.row * n + cell.col] = true;
    }
    (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| !is_basic[i * n + j] && cost(i, j) - u[i] - v[j] < -REDUCED_COST_TOLERANCE)
}

/// Tree path between two nodes, as basis-cell indices in walk order.
fn tree_path(
    adj: &[Vec<usize>],
    basis: &[BasicCell],
    m: usize,
    from: usize,
    to: usize,
) -> Vec<usize> {
    let mut via = vec![usize::MAX; adj.len()];
    let mut seen = vec![false; adj.len()];
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(node) = stack.pop() {
        if node == to {
            break;
        }
        for &k in &adj[node] {
            let cell = basis[k];
            let (r, c) = (cell.row, m + cell.col);
            let other = if node == r { c } else { r };
            if !seen[other] {
                seen[other] = true;
                via[other] = k;
                stack.push(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let k = via[node];
        path.push(k);
        let cell = basis[k];
        node = if node == cell.row {
            m + cell.col
        } else {
            cell.row
        };
    }
    // path currently runs `to -> from`
    path
}

fn pivot(basis: &mut [BasicCell], m: usize, n: usize, row: usize, col: usize) {
    let adj = adjacency(basis, m, n);
    // Walking from the entering column back to the entering row, the cells
    // alternate -θ, +θ, ..., -θ.
    let path = tree_path(&adj, basis, m, row, m + col);
    let minus: Vec<usize> = path.iter().copied().step_by(2).collect();
    let theta = minus
        .iter()
        .map(|&k| basis[k].flow)
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let leaving = minus
        .iter()
        .copied()
        .filter(|&k| basis[k].flow.max(0.0) == theta)
        .min_by_key(|&k| (basis[k].row, basis[k].col))
        .expect("cycle has a decreasing cell");

    for (step, &k) in path.iter().enumerate() {
        let flow = &mut basis[k].flow;
        if step % 2 == 0 {
            *flow = (*flow - theta).max(0.0);
        } else {
            *flow += theta;
        }
    }
    basis[leaving] = BasicCell {
        row,
        col,
        flow: theta,
    };
}

/// Largest support size accepted by [`wasserstein1_oracle`].
pub const ORACLE_MAX_POINTS: usize = 6;

/// Brute-force W1 for marginals on the lattice `k / grid`: enumerates every
/// integer transport plan and returns the cheapest cost divided by `grid`.
/// Exponential; intended for tests.
pub fn wasserstein1_oracle(
    p: &Simplex,
    q: &Simplex,
    metric: &GroundMetric,
    grid: u32,
) -> Result<f64> {
    let n = metric.len();
    if p.len() != n || q.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if p.len() != n { p.len() } else { q.len() },
        });
    }
    if n > ORACLE_MAX_POINTS {
        return Err(Error::TooLarge { n });
    }
    if grid == 0 {
        return Err(Error::NotGridRepresentable { grid });
    }
    let to_grid = |w: &[f64]| -> Result<Vec<u32>> {
        w.iter()
            .map(|x| {
                let scaled = x * grid as f64;
                let k = scaled.round();
                if (scaled - k).abs() > 1e-9 * grid as f64 {
                    Err(Error::NotGridRepresentable { grid })
                } else {
                    Ok(k as u32)
                }
            })
            .collect()
    };
    let supply = to_grid(p.weights())?;
    let mut demand = to_grid(q.weights())?;
    if supply.iter().sum::<u32>() != grid || demand.iter().sum::<u32>() != grid {
        return Err(Error::NotGridRepresentable { grid });
    }

    let mut best = f64::INFINITY;
    enumerate_rows(&supply, &mut demand, 0, 0.0, metric, &mut best);
    Ok(best / grid as f64)
}

fn enumerate_rows(
    supply: &[u32],
    remaining: &mut [u32],
    row: usize,
    acc: f64,
    metric: &GroundMetric,
    best: &mut f64,
) {
    if row == supply.len() {
        if remaining.iter().all(|&r| r == 0) && acc < *best {
            *best = acc;
        }
        return;
    }
    split_row(supply, remaining, row, 0, supply[row], acc, metric, best);
}

#[allow(clippy::too_many_arguments)]
fn split_row(
    supply: &[u32],
    remaining: &mut [u32],
    row: usize,
    col: usize,
    left: u32,
    acc: f64,
    metric: &GroundMetric,
    best: &mut f64,
) {
    let n = remaining.len();
    if col == n - 1 {
        if left <= remaining[col] {
            remaining[col] -= left;
            let acc = acc + left as f64 * metric.get(row, col);
            enumerate_rows(supply, remaining, row + 1, acc, metric, best);
            remaining[col] += left;
        }
        return;
    }
    for amount in 0..=left.min(remaining[col]) {
        remaining[col] -= amount;
        let next = acc + amount as f64 * metric.get(row, col);
        split_row(
            supply,
            remaining,
            row,
            col + 1,
            left - amount,
            next,
            metric,
            best,
        );
        remaining[col] += amount;
    }
}
