//! Transportation simplex on the bipartite source/target graph.
//!
//! A basis is a spanning tree of the `N + K` nodes with `N + K − 1` basic
//! cells (some possibly at zero flow). Potentials `u_i + v_j = c_ij` are read
//! off the tree; the entering cell has the most negative reduced cost
//! (Dantzig), switching to the first negative cell (Bland) after a run of
//! degenerate pivots to rule out cycling.

use std::collections::VecDeque;

use crate::error::{Error, Result};

const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

/// Solution of a dense transportation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    /// Row-major `rows x cols` flow.
    pub flow: Vec<f64>,
    pub cost: f64,
    pub pivots: usize,
}

struct Basis {
    rows: usize,
    cols: usize,
    cells: Vec<(usize, usize)>,
}

impl Basis {
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        // node ids: rows 0..R, cols R..R+C; entries (neighbour, basis slot)
        let mut adj = vec![Vec::new(); self.rows + self.cols];
        for (slot, &(r, c)) in self.cells.iter().enumerate() {
            adj[r].push((self.rows + c, slot));
            adj[self.rows + c].push((r, slot));
        }
        adj
    }
}

fn potentials(basis: &Basis, adj: &[Vec<(usize, usize)>], cost: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nr, nc) = (basis.rows, basis.cols);
    let mut u = vec![f64::NAN; nr];
    let mut v = vec![f64::NAN; nc];
    u[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    let mut seen = vec![false; nr + nc];
    seen[0] = true;
    while let Some(node) = queue.pop_front() {
        for &(nb, slot) in &adj[node] {
            if seen[nb] {
                continue;
            }
            seen[nb] = true;
            let (r, c) = basis.cells[slot];
            let cij = cost[r * nc + c];
            if nb >= nr {
                v[nb - nr] = cij - u[r];
            } else {
                u[nb] = cij - v[c];
            }
            queue.push_back(nb);
        }
    }
    (u, v)
}

/// Basis slots on the tree path from node `from` to node `to`, in order.
fn tree_path(adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &(nb, slot) in &adj[node] {
            if !seen[nb] {
                seen[nb] = true;
                parent[nb] = Some((node, slot));
                queue.push_back(nb);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = to;
    while let Some((prev, slot)) = parent[node] {
        path.push(slot);
        node = prev;
    }
    path.reverse();
    path
}

/// Northwest-corner start; always yields exactly `R + C − 1` basic cells.
fn northwest_corner(supply: &[f64], demand: &[f64]) -> (Vec<f64>, Basis) {
    let (nr, nc) = (supply.len(), demand.len());
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut flow = vec![0.0; nr * nc];
    let mut cells = Vec::with_capacity(nr + nc - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s[i].min(d[j]).max(0.0);
        flow[i * nc + j] = x;
        cells.push((i, j));
        s[i] -= x;
        d[j] -= x;
        if i == nr - 1 && j == nc - 1 {
            break;
        }
        if j == nc - 1 || (i < nr - 1 && s[i] <= d[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    (
        flow,
        Basis {
            rows: nr,
            cols: nc,
            cells,
        },
    )
}

fn check_balance(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<()> {
    if supply.is_empty() || demand.is_empty() {
        return Err(Error::Oracle("transport problem needs sources and targets".into()));
    }
    if cost.len() != supply.len() * demand.len() {
        return Err(Error::Oracle("cost matrix has the wrong size".into()));
    }
    if supply.iter().chain(demand).any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::Oracle("masses must be finite and nonnegative".into()));
    }
    let (a, b): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (a - b).abs() > 1e-10 {
        return Err(Error::Oracle(format!(
            "infeasible masses: sources sum to {a} but targets to {b}"
        )));
    }
    Ok(())
}

/// Exact minimum-cost transport plan between `supply` (rows) and `demand` (columns).
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    check_balance(supply, demand, cost)?;
    let (nr, nc) = (supply.len(), demand.len());
    let scale = cost.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1.0);
    let tol = 1e-12 * scale;
    let (mut flow, mut basis) = northwest_corner(supply, demand);
    let mut in_basis = vec![false; nr * nc];
    for &(r, c) in &basis.cells {
        in_basis[r * nc + c] = true;
    }
    let max_pivots = 50 * (nr + nc) * nc.max(nr).max(10) + 10_000;
    let mut pivots = 0;
    let mut degenerate_run = 0;
    loop {
        let adj = basis.adjacency();
        let (u, v) = potentials(&basis, &adj, cost);
        let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
        let mut entering = None;
        let mut best = -tol;
        'scan: for r in 0..nr {
            for c in 0..nc {
                if in_basis[r * nc + c] {
                    continue;
                }
                let red = cost[r * nc + c] - u[r] - v[c];
                if red < best {
                    entering = Some((r, c));
                    if bland {
                        break 'scan;
                    }
                    best = red;
                }
            }
        }
        let Some((er, ec)) = entering else {
            break;
        };
        if pivots >= max_pivots {
            return Err(Error::Oracle(format!(
                "network simplex exceeded {max_pivots} pivots"
            )));
        }
        // cycle: entering (+), then path from the column back to the row alternates -, +, …
        let mut path = tree_path(&adj, er, nr + ec);
        path.reverse();
        let mut theta = f64::INFINITY;
        let mut leave_pos = None;
        for (pos, &slot) in path.iter().enumerate().step_by(2) {
            let (r, c) = basis.cells[slot];
            let x = flow[r * nc + c];
            let better = x < theta
                || (bland && x == theta && leave_pos.map_or(false, |p: usize| basis.cells[path[p]] > (r, c)));
            if better {
                theta = x;
                leave_pos = Some(pos);
            }
        }
        let leave_pos = leave_pos.expect("cycle has a minus cell");
        flow[er * nc + ec] += theta;
        for (pos, &slot) in path.iter().enumerate() {
            let (r, c) = basis.cells[slot];
            if pos % 2 == 0 {
                flow[r * nc + c] -= theta;
            } else {
                flow[r * nc + c] += theta;
            }
        }
        let leave_slot = path[leave_pos];
        let (lr, lc) = basis.cells[leave_slot];
        flow[lr * nc + lc] = 0.0;
        in_basis[lr * nc + lc] = false;
        in_basis[er * nc + ec] = true;
        basis.cells[leave_slot] = (er, ec);
        pivots += 1;
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
    }
    for x in flow.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total = flow.iter().zip(cost).map(|(x, c)| x * c).sum();
    Ok(TransportSolution {
        flow,
        cost: total,
        pivots,
    })
}

/// Largest number of candidate bases the brute-force solver will enumerate.
pub const BRUTE_FORCE_MAX_SUBSETS: u128 = 200_000;

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Enumerates every basis (spanning tree of `R + C − 1` cells) and keeps the
/// cheapest feasible basic solution. Only for tiny instances.
pub fn solve_transport_brute_force(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    check_balance(supply, demand, cost)?;
    let (nr, nc) = (supply.len(), demand.len());
    let cells = nr * nc;
    let size = nr + nc - 1;
    let count = binomial(cells, size);
    if count > BRUTE_FORCE_MAX_SUBSETS {
        return Err(Error::Oracle(format!(
            "brute force would enumerate {count} bases (limit {BRUTE_FORCE_MAX_SUBSETS})"
        )));
    }
    let mut best: Option<TransportSolution> = None;
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        if let Some(flow) = basic_solution(&idx, supply, demand) {
            let c: f64 = flow.iter().zip(cost).map(|(x, c)| x * c).sum();
            if best.as_ref().map_or(true, |b| c < b.cost) {
                best = Some(TransportSolution {
                    flow,
                    cost: c,
                    pivots: 0,
                });
            }
        }
        // next combination in lexicographic order
        let mut k = size;
        while k > 0 && idx[k - 1] == cells - size + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        idx[k - 1] += 1;
        for m in k..size {
            idx[m] = idx[m - 1] + 1;
        }
    }
    best.ok_or_else(|| Error::Oracle("no feasible basis found".into()))
}

/// Flow of the basic solution on a candidate cell set, if it is a spanning
/// tree with nonnegative flows.
fn basic_solution(set: &[usize], supply: &[f64], demand: &[f64]) -> Option<Vec<f64>> {
    let (nr, nc) = (supply.len(), demand.len());
    let mut rem: Vec<f64> = supply.iter().chain(demand).cloned().collect();
    let mut degree = vec![0usize; nr + nc];
    let edges: Vec<(usize, usize)> = set.iter().map(|&e| (e / nc, nr + e % nc)).collect();
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    if degree.iter().any(|&d| d == 0) {
        return None;
    }
    let mut flow = vec![0.0; nr * nc];
    let mut used = vec![false; edges.len()];
    // peel leaves; a spanning tree peels completely
    for _ in 0..edges.len() {
        let (e, leaf) = edges.iter().enumerate().find_map(|(e, &(a, b))| {
            if used[e] {
                None
            } else if degree[a] == 1 {
                Some((e, a))
            } else if degree[b] == 1 {
                Some((e, b))
            } else {
                None
            }
        })?;
        let (a, b) = edges[e];
        let other = if leaf == a { b } else { a };
        let x = rem[leaf];
        if x < -1e-12 {
            return None;
        }
        flow[a * nc + (b - nr)] = x.max(0.0);
        rem[other] -= x;
        rem[leaf] = 0.0;
        used[e] = true;
        degree[a] -= 1;
        degree[b] -= 1;
    }
    if rem.iter().any(|r| r.abs() > 1e-9) {
        return None;
    }
    Some(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sums(flow: &[f64], nr: usize, nc: usize) -> (Vec<f64>, Vec<f64>) {
        let mut r = vec![0.0; nr];
        let mut c = vec![0.0; nc];
        for i in 0..nr {
            for j in 0..nc {
                r[i] += flow[i * nc + j];
                c[j] += flow[i * nc + j];
            }
        }
        (r, c)
    }

    #[test]
    fn textbook_instance() {
        // supplies 20/30/25, demands 10/25/40, known optimum 290
        let supply = [20.0, 30.0, 25.0];
        let demand = [10.0, 25.0, 40.0];
        let cost = [8.0, 6.0, 3.0, 4.0, 7.0, 5.0, 2.0, 4.0, 6.0];
        let s = solve_transport(&supply, &demand, &cost).unwrap();
        let b = solve_transport_brute_force(&supply, &demand, &cost).unwrap();
        assert!((s.cost - b.cost).abs() < 1e-9, "{} vs {}", s.cost, b.cost);
    }

    #[test]
    fn unbalanced_rejected() {
        assert!(solve_transport(&[0.5, 0.5], &[0.6, 0.5], &[1.0; 4]).is_err());
    }

    #[test]
    fn single_cell() {
        let s = solve_transport(&[1.0], &[1.0], &[0.7]).unwrap();
        assert_eq!(s.flow, vec![1.0]);
        assert!((s.cost - 0.7).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_on_random_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let nr = rng.gen_range(1..5);
            let nc = rng.gen_range(1..4);
            // integer masses make ties and degeneracy common
            let mut supply: Vec<f64> = (0..nr).map(|_| rng.gen_range(1..4) as f64).collect();
            let total: f64 = supply.iter().sum();
            let mut demand: Vec<f64> = (0..nc).map(|_| rng.gen_range(1..4) as f64).collect();
            let dt: f64 = demand.iter().sum();
            demand.iter_mut().for_each(|d| *d *= total / dt);
            supply.iter_mut().for_each(|s| *s /= total);
            demand.iter_mut().for_each(|d| *d /= total);
            let cost: Vec<f64> = (0..nr * nc).map(|_| rng.gen_range(0..5) as f64).collect();
            let s = solve_transport(&supply, &demand, &cost).unwrap();
            let b = solve_transport_brute_force(&supply, &demand, &cost).unwrap();
            assert!((s.cost - b.cost).abs() < 1e-9, "{} vs {}", s.cost, b.cost);
            let (r, c) = sums(&s.flow, nr, nc);
            for (x, y) in r.iter().zip(&supply).chain(c.iter().zip(&demand)) {
                assert!((x - y).abs() < 1e-10);
            }
            assert!(s.flow.iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn larger_instance_is_feasible_and_locally_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (nr, nc) = (300, 5);
        let supply = vec![1.0 / nr as f64; nr];
        let demand = vec![1.0 / nc as f64; nc];
        let cost: Vec<f64> = (0..nr * nc).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s = solve_transport(&supply, &demand, &cost).unwrap();
        let (r, c) = sums(&s.flow, nr, nc);
        for (x, y) in r.iter().zip(&supply).chain(c.iter().zip(&demand)) {
            assert!((x - y).abs() < 1e-10);
        }
        // no improving 2-exchange between any pair of used cells
        let used: Vec<(usize, usize)> = (0..nr * nc)
            .filter(|e| s.flow[*e] > 1e-14)
            .map(|e| (e / nc, e % nc))
            .collect();
        for &(a, i) in &used {
            for &(b, j) in &used {
                let lhs = cost[a * nc + i] + cost[b * nc + j];
                let rhs = cost[a * nc + j] + cost[b * nc + i];
                assert!(lhs <= rhs + 1e-9);
            }
        }
    }
}
