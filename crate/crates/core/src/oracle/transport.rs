use crate::distribution::DenseDistribution;
use crate::error::{ensure_cap, ensure_dim, Error, Result};
use crate::hypercube::index_distance;
use std::collections::VecDeque;

/// Largest dimension accepted by [`wasserstein_hamming`] (256 atoms).
pub const TRANSPORT_CAP: usize = 8;
const BALANCE_TOLERANCE: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to the lowest-index rule.
const DEGENERATE_LIMIT: usize = 50;
const MAX_PIVOTS: usize = 1_000_000;

/// An optimal basic solution of a transportation problem.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    pub cost: f64,
    /// `(source, sink, amount)` for every basic cell, including zero flows.
    pub flows: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

/// Spanning-tree basis of the transportation simplex. Nodes `0..m` are
/// sources, `m..m+n` are sinks.
struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Basis {
    /// Northwest-corner start: a staircase of `m + n − 1` cells.
    fn northwest(supply: &[f64], demand: &[f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut a = supply.to_vec();
        let mut b = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        while i < m && j < n {
            let supply_smaller = a[i] <= b[j];
            let x = if supply_smaller { a[i] } else { b[j] };
            cells.push((i, j));
            flow.push(x);
            a[i] -= x;
            b[j] -= x;
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || supply_smaller {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { m, n, cells, flow }
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    /// Dual potentials with `u_i + v_j = c_ij` on every basic cell, `u_0 = 0`.
    fn potentials(&self, adj: &[Vec<(usize, usize)>], cost: &[f64]) -> Vec<f64> {
        let mut pot = vec![f64::NAN; self.m + self.n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &(next, k) in &adj[node] {
                if pot[next].is_nan() {
                    let (i, j) = self.cells[k];
                    pot[next] = cost[i * self.n + j] - pot[node];
                    queue.push_back(next);
                }
            }
        }
        pot
    }

    /// Basic cells on the tree path from source `i` to sink `j`, listed from
    /// the sink end.
    fn tree_path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; total];
        let mut seen = vec![false; total];
        seen[i] = true;
        let mut queue = VecDeque::from([i]);
        let goal = self.m + j;
        while let Some(node) = queue.pop_front() {
            if node == goal {
                break;
            }
            for &(next, k) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, k));
                    queue.push_back(next);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = goal;
        while let Some((prev, k)) = parent[node] {
            path.push(k);
            node = prev;
        }
        path
    }
}

/// Exact transportation simplex for `min Σ c_ij x_ij` subject to row sums
/// `supply` and column sums `demand`; `cost` is row-major `m x n`.
///
/// Entering cells follow the most negative reduced cost; after 50
/// consecutive degenerate pivots the lowest-index rule takes over. Leaving
/// ties go to the lowest cell index.
pub fn transport_simplex(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("transport problem needs sources and sinks".into()));
    }
    ensure_dim(m * n, cost.len())?;
    if supply.iter().chain(demand).chain(cost).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("transport problem"));
    }
    if supply.iter().chain(demand).any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("negative mass".into()));
    }
    let gap = supply.iter().sum::<f64>() - demand.iter().sum::<f64>();
    if gap.abs() > BALANCE_TOLERANCE {
        return Err(Error::Unbalanced(gap));
    }
    let scale = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    let tolerance = 1e-12 * scale;
    let mut basis = Basis::northwest(supply, demand);
    let mut is_basic = vec![false; m * n];
    basis.cells.iter().for_each(|&(i, j)| is_basic[i * n + j] = true);
    let mut degenerate_run = 0;
    let mut lowest_index_rule = false;
    let mut pivots = 0;
    loop {
        let adj = basis.adjacency();
        let pot = basis.potentials(&adj, cost);
        let mut entering = None;
        let mut best = -tolerance;
        'price: for i in 0..m {
            for j in 0..n {
                if is_basic[i * n + j] {
                    continue;
                }
                let reduced = cost[i * n + j] - pot[i] - pot[m + j];
                if reduced < best {
                    entering = Some((i, j));
                    if lowest_index_rule {
                        break 'price;
                    }
                    best = reduced;
                }
            }
        }
        let Some((ei, ej)) = entering else { break };
        if pivots >= MAX_PIVOTS {
            return Err(Error::NotConverged {
                what: "transportation simplex",
                iterations: pivots,
            });
        }
        pivots += 1;
        // cells along the cycle alternate −, +, −, ... starting at the sink
        let path = basis.tree_path(&adj, ei, ej);
        let mut leaving = None::<usize>;
        for &k in path.iter().step_by(2) {
            let better = match leaving {
                None => true,
                Some(l) => {
                    let (fk, fl) = (basis.flow[k], basis.flow[l]);
                    let (ck, cl) = (basis.cells[k], basis.cells[l]);
                    fk < fl || (fk == fl && ck.0 * n + ck.1 < cl.0 * n + cl.1)
                }
            };
            if better {
                leaving = Some(k);
            }
        }
        let leaving = leaving.expect("cycle through a spanning tree has a decreasing cell");
        let theta = basis.flow[leaving].max(0.0);
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[k] = (basis.flow[k] - theta).max(0.0);
            } else {
                basis.flow[k] += theta;
            }
        }
        let (li, lj) = basis.cells[leaving];
        is_basic[li * n + lj] = false;
        is_basic[ei * n + ej] = true;
        basis.cells[leaving] = (ei, ej);
        basis.flow[leaving] = theta;
        if theta == 0.0 {
            degenerate_run += 1;
            if degenerate_run > DEGENERATE_LIMIT {
                lowest_index_rule = true;
            }
        } else {
            degenerate_run = 0;
        }
    }
    let total = basis
        .cells
        .iter()
        .zip(&basis.flow)
        .map(|(&(i, j), &x)| x * cost[i * n + j])
        .sum();
    Ok(TransportPlan {
        cost: total,
        flows: basis.cells.iter().zip(&basis.flow).map(|(&(i, j), &x)| (i, j, x)).collect(),
        pivots,
    })
}

/// Exact Wasserstein distance under Hamming ground cost.
///
/// Mass shared by both laws stays in place at zero cost, so only the
/// positive and negative parts of `p − q` enter the transportation problem.
pub fn wasserstein_hamming(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    ensure_dim(p.dim(), q.dim())?;
    ensure_cap("Wasserstein distance", p.dim(), TRANSPORT_CAP)?;
    let gap = p.probs().iter().sum::<f64>() - q.probs().iter().sum::<f64>();
    if gap.abs() > BALANCE_TOLERANCE {
        return Err(Error::Unbalanced(gap));
    }
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    for (idx, (a, b)) in p.probs().iter().zip(q.probs()).enumerate() {
        let r = a - b;
        if r > 0.0 {
            sources.push((idx, r));
        } else if r < 0.0 {
            sinks.push((idx, -r));
        }
    }
    if sources.is_empty() || sinks.is_empty() {
        return Ok(0.0);
    }
    let mut supply: Vec<f64> = sources.iter().map(|s| s.1).collect();
    let mut demand: Vec<f64> = sinks.iter().map(|s| s.1).collect();
    // rounding leaves the two sides slightly apart; move the gap onto the
    // largest entry of the lighter side
    let excess = supply.iter().sum::<f64>() - demand.iter().sum::<f64>();
    let side = if excess > 0.0 { &mut demand } else { &mut supply };
    let k = (0..side.len()).max_by(|&a, &b| side[a].total_cmp(&side[b])).unwrap_or(0);
    side[k] += excess.abs();
    let cost: Vec<f64> = sources
        .iter()
        .flat_map(|&(s, _)| sinks.iter().map(move |&(t, _)| index_distance(s, t) as f64))
        .collect();
    Ok(transport_simplex(&supply, &demand, &cost)?.cost)
}
