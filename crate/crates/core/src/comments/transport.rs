//! Exact balanced transportation problem via successive shortest paths.
//!
//! Supplies and demands are integers, so the optimal flow found by
//! augmenting along cheapest residual paths is an exact optimum of the LP.

use crate::error::{Error, Result};

struct Arc {
    to: usize,
    cap: u64,
    cost: f64,
}

struct Network {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(n: usize) -> Self {
        Network {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: u64, cost: f64) {
        self.adj[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap, cost });
        self.adj[to].push(self.arcs.len());
        self.arcs.push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
        });
    }

    /// Bellman-Ford on the residual graph; returns predecessor arcs.
    fn shortest_path(&self, source: usize, sink: usize) -> Option<Vec<Option<usize>>> {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u].is_infinite() {
                    continue;
                }
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    // relax only on a meaningful improvement so round-off
                    // cannot create phantom negative cycles
                    if arc.cap > 0 && dist[u] + arc.cost < dist[arc.to] - 1e-12 {
                        dist[arc.to] = dist[u] + arc.cost;
                        pred[arc.to] = Some(a);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist[sink].is_finite().then_some(pred)
    }
}

/// Minimum-cost plan moving `supply[i]` units from source `i` to sinks with
/// `demand[j]`, at per-unit cost `cost[i][j]`. Totals must match.
///
/// Returns the total cost and the flow matrix.
pub fn solve(supply: &[u64], demand: &[u64], cost: &[Vec<f64>]) -> Result<(f64, Vec<Vec<u64>>)> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::invalid("transport problem needs at least one source and one sink"));
    }
    if supply.iter().sum::<u64>() != demand.iter().sum::<u64>() {
        return Err(Error::invalid("unbalanced transport problem"));
    }
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            got: cost.iter().map(Vec::len).sum(),
        });
    }
    let source = m + n;
    let sink = m + n + 1;
    let mut net = Network::new(m + n + 2);
    for (i, &s) in supply.iter().enumerate() {
        net.add(source, i, s, 0.0);
    }
    let mut cell = vec![vec![0usize; n]; m];
    for i in 0..m {
        for j in 0..n {
            cell[i][j] = net.arcs.len();
            net.add(i, m + j, u64::MAX, cost[i][j]);
        }
    }
    for (j, &d) in demand.iter().enumerate() {
        net.add(m + j, sink, d, 0.0);
    }

    let total: u64 = supply.iter().sum();
    let mut sent = 0u64;
    while sent < total {
        let pred = net
            .shortest_path(source, sink)
            .ok_or_else(|| Error::Numerical("transport network disconnected".into()))?;
        let mut bottleneck = u64::MAX;
        let mut v = sink;
        while let Some(a) = pred[v] {
            bottleneck = bottleneck.min(net.arcs[a].cap);
            v = net.arcs[a ^ 1].to;
        }
        let mut v = sink;
        while let Some(a) = pred[v] {
            net.arcs[a].cap -= bottleneck;
            net.arcs[a ^ 1].cap += bottleneck;
            v = net.arcs[a ^ 1].to;
        }
        sent += bottleneck;
    }

    let mut flow = vec![vec![0u64; n]; m];
    let mut cost_total = 0.0;
    for i in 0..m {
        for j in 0..n {
            let f = net.arcs[cell[i][j] ^ 1].cap;
            flow[i][j] = f;
            cost_total += f as f64 * cost[i][j];
        }
    }
    Ok((cost_total, flow))
}
