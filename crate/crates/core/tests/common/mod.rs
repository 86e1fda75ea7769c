//! Brute-force reference implementations shared by the oracle tests and
//! the acceptance run. None of these call into the library's algorithms.

#![allow(dead_code)]

use std::collections::BTreeMap;

use collusion_core::analytics::ChannelGraph;

/// A peak as the brute-force scan sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct RefPeak {
    pub apex: usize,
    pub prominence: f64,
    pub left_base: usize,
    pub right_base: usize,
    pub width_height: f64,
    pub left: f64,
    pub right: f64,
    pub width: f64,
    pub area: f64,
}

/// Scan maximal runs of equal samples. A run is a peak when both outside
/// neighbours exist and are strictly lower; the apex is the floored middle.
pub fn ref_peaks(x: &[f64], min_height: Option<f64>, min_prominence: Option<f64>, rel: f64) -> Vec<RefPeak> {
    let n = x.len();
    let mut out = Vec::new();
    let mut s = 0;
    while s < n {
        let mut e = s;
        while e + 1 < n && x[e + 1] == x[s] {
            e += 1;
        }
        let is_peak = s >= 1 && e + 1 < n && x[s - 1] < x[s] && x[e + 1] < x[s];
        if is_peak {
            let apex = (s + e) / 2;
            if let Some(p) = ref_one_peak(x, apex, min_height, min_prominence, rel) {
                out.push(p);
            }
        }
        s = e + 1;
    }
    out
}

fn ref_one_peak(x: &[f64], apex: usize, min_height: Option<f64>, min_prominence: Option<f64>, rel: f64) -> Option<RefPeak> {
    let h = x[apex];
    if let Some(m) = min_height {
        if h < m {
            return None;
        }
    }
    // widest stretch on each side that never rises above the apex
    let mut lo = apex;
    while lo > 0 && x[lo - 1] <= h {
        lo -= 1;
    }
    let mut hi = apex;
    while hi + 1 < x.len() && x[hi + 1] <= h {
        hi += 1;
    }
    let left_min = x[lo..=apex].iter().cloned().fold(f64::INFINITY, f64::min);
    let right_min = x[apex..=hi].iter().cloned().fold(f64::INFINITY, f64::min);
    // bases are the minima nearest the apex
    let left_base = (lo..=apex).rev().find(|&i| x[i] == left_min).unwrap();
    let right_base = (apex..=hi).find(|&i| x[i] == right_min).unwrap();
    let prominence = h - left_min.max(right_min);
    if let Some(m) = min_prominence {
        if prominence < m {
            return None;
        }
    }
    let level = h - prominence * rel;
    let i = (left_base..=apex).rev().find(|&i| x[i] <= level).unwrap_or(left_base);
    let left = if x[i] < level {
        i as f64 + (level - x[i]) / (x[i + 1] - x[i])
    } else {
        i as f64
    };
    let j = (apex..=right_base).find(|&j| x[j] <= level).unwrap_or(right_base);
    let right = if x[j] < level {
        j as f64 - (level - x[j]) / (x[j - 1] - x[j])
    } else {
        j as f64
    };
    Some(RefPeak {
        apex,
        prominence,
        left_base,
        right_base,
        width_height: level,
        left,
        right,
        width: right - left,
        area: ref_area(x, left, right),
    })
}

/// Trapezoid rule on a fine grid of the piecewise-linear interpolant of
/// max(x, 0), with every integer knot included so the result is exact up
/// to round-off.
pub fn ref_area(x: &[f64], a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let f = |p: f64| {
        let k = (p.floor() as usize).min(x.len() - 1);
        if k + 1 >= x.len() {
            return x[k].max(0.0);
        }
        let t = p - k as f64;
        x[k].max(0.0) + t * (x[k + 1].max(0.0) - x[k].max(0.0))
    };
    let mut knots = vec![a];
    let mut k = a.floor() + 1.0;
    while k < b {
        knots.push(k);
        k += 1.0;
    }
    knots.push(b);
    knots.windows(2).map(|w| (w[1] - w[0]) * (f(w[0]) + f(w[1])) / 2.0).sum()
}

/// All-pairs shortest paths by Floyd–Warshall. Returns (diameter, mean
/// path length) over unordered pairs, or None if some pair is unreachable.
pub fn floyd_warshall(g: &ChannelGraph) -> Option<(usize, f64)> {
    let n = g.node_count();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for &j in &g.adjacency[i] {
            d[i][j] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let mut sum = 0usize;
    let mut diameter = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if d[i][j] >= inf {
                return None;
            }
            sum += d[i][j];
            diameter = diameter.max(d[i][j]);
        }
    }
    let pairs = n * (n - 1) / 2;
    Some((diameter, if pairs == 0 { 0.0 } else { sum as f64 / pairs as f64 }))
}

/// Mean local clustering from an adjacency matrix and a triple loop.
pub fn ref_clustering(g: &ChannelGraph) -> f64 {
    let n = g.node_count();
    let mut adj = vec![vec![false; n]; n];
    for (i, ns) in g.adjacency.iter().enumerate() {
        for &j in ns {
            adj[i][j] = true;
        }
    }
    let mut total = 0.0;
    for v in 0..n {
        let ns: Vec<usize> = (0..n).filter(|&u| adj[v][u]).collect();
        let k = ns.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for a in 0..k {
            for b in a + 1..k {
                if adj[ns[a]][ns[b]] {
                    links += 1;
                }
            }
        }
        total += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    total / n as f64
}

/// Exact optimal transport cost by enumerating every basic plan: each
/// spanning tree of the complete bipartite graph on m sources and n sinks
/// fixes a unique plan; the optimum is the cheapest non-negative one.
pub fn ref_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let need = m + n - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(need);
    choose(&cells, need, 0, &mut chosen, &mut |tree| {
        if let Some(flow) = solve_tree(supply, demand, tree) {
            let c: f64 = tree.iter().zip(&flow).map(|(&(i, j), f)| f * cost[i][j]).sum();
            best = best.min(c);
        }
    });
    best
}

fn choose<F: FnMut(&[(usize, usize)])>(cells: &[(usize, usize)], k: usize, start: usize, cur: &mut Vec<(usize, usize)>, f: &mut F) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for s in start..cells.len() {
        if cells.len() - s < k - cur.len() {
            break;
        }
        cur.push(cells[s]);
        choose(cells, k, s + 1, cur, f);
        cur.pop();
    }
}

/// Peel leaves off the candidate tree. None if the cells do not form a
/// spanning tree or some flow would be negative.
fn solve_tree(supply: &[f64], demand: &[f64], tree: &[(usize, usize)]) -> Option<Vec<f64>> {
    let m = supply.len();
    let mut rem: Vec<f64> = supply.iter().chain(demand).cloned().collect();
    let mut live = vec![true; tree.len()];
    let mut flow = vec![0.0; tree.len()];
    for _ in 0..tree.len() {
        let mut degree = vec![0usize; rem.len()];
        for (e, &(i, j)) in tree.iter().enumerate() {
            if live[e] {
                degree[i] += 1;
                degree[m + j] += 1;
            }
        }
        let (e, leaf) = tree.iter().enumerate().filter(|(e, _)| live[*e]).find_map(|(e, &(i, j))| {
            if degree[i] == 1 {
                Some((e, i))
            } else if degree[m + j] == 1 {
                Some((e, m + j))
            } else {
                None
            }
        })?;
        let (i, j) = tree[e];
        let other = if leaf == i { m + j } else { i };
        let f = rem[leaf];
        if f < -1e-12 {
            return None;
        }
        flow[e] = f;
        rem[leaf] = 0.0;
        rem[other] -= f;
        live[e] = false;
    }
    // a spanning tree leaves nothing unbalanced
    if rem.iter().any(|r| r.abs() > 1e-9) {
        return None;
    }
    Some(flow)
}

/// WMD between token lists over a vector table, by plan enumeration.
pub fn ref_wmd(a: &[String], b: &[String], table: &BTreeMap<String, Vec<f64>>) -> Option<f64> {
    fn bag<'a>(doc: &'a [String], table: &BTreeMap<String, Vec<f64>>) -> BTreeMap<&'a str, f64> {
        let mut m = BTreeMap::new();
        for t in doc {
            if table.contains_key(t) {
                *m.entry(t.as_str()).or_insert(0.0) += 1.0;
            }
        }
        m
    }
    let (ba, bb) = (bag(a, table), bag(b, table));
    if ba.is_empty() || bb.is_empty() {
        return None;
    }
    let (ta, tb): (f64, f64) = (ba.values().sum(), bb.values().sum());
    let supply: Vec<f64> = ba.values().map(|c| c / ta).collect();
    let demand: Vec<f64> = bb.values().map(|c| c / tb).collect();
    let cost: Vec<Vec<f64>> = ba
        .keys()
        .map(|x| {
            bb.keys()
                .map(|y| {
                    let (u, v) = (&table[*x], &table[*y]);
                    u.iter().zip(v).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
                })
                .collect()
        })
        .collect();
    Some(ref_transport(&supply, &demand, &cost))
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    let pivot = m[c].clone();
                    m[r].iter_mut().zip(&pivot).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Squared Mahalanobis distance with an explicit inverse.
pub fn ref_mahalanobis(x: &[f64], mean: &[f64], inverse: &[Vec<f64>]) -> f64 {
    let d: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let mut s = 0.0;
    for i in 0..d.len() {
        for j in 0..d.len() {
            s += d[i] * inverse[i][j] * d[j];
        }
    }
    s
}

/// η computed directly: window each peak's comments, embed every text on
/// its own, take the best dot product per window, average per peak, then
/// across peaks.
pub fn ref_eta(per_peak_texts: &[Vec<&str>], w: usize, embed: &dyn Fn(&str) -> Vec<f64>) -> Option<f64> {
    let mut peak_means = Vec::new();
    for texts in per_peak_texts {
        let n = texts.len();
        if n < 2 {
            continue;
        }
        let windows: Vec<&[&str]> = if n < w { vec![&texts[..]] } else { (0..=n - w).map(|s| &texts[s..s + w]).collect() };
        let mut sum = 0.0;
        for win in &windows {
            let q = embed(win[win.len() - 1]);
            let mut best = f64::NEG_INFINITY;
            for c in &win[..win.len() - 1] {
                let v = embed(c);
                let mut acc = 0.0;
                for k in 0..q.len() {
                    acc += q[k] * v[k];
                }
                best = best.max(acc);
            }
            sum += best;
        }
        peak_means.push(sum / windows.len() as f64);
    }
    if peak_means.is_empty() {
        None
    } else {
        Some(peak_means.iter().sum::<f64>() / peak_means.len() as f64)
    }
}

/// Central-difference check on `coords`; returns the largest relative error.
pub fn max_fd_error(
    params: &mut Vec<f64>,
    analytic: &[f64],
    coords: &[usize],
    h: f64,
    loss: &mut dyn FnMut(&[f64]) -> f64,
) -> f64 {
    let mut worst = 0.0f64;
    for &i in coords {
        let orig = params[i];
        params[i] = orig + h;
        let up = loss(params);
        params[i] = orig - h;
        let down = loss(params);
        params[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((analytic[i] - fd).abs() / denom);
    }
    worst
}
