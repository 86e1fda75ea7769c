//! Undirected simple graph over channels and its small-world statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{write_atomic, SubscriptionEdge};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelGraph {
    /// Sorted node ids.
    pub nodes: Vec<String>,
    /// Sorted neighbour indices per node.
    pub adjacency: Vec<Vec<usize>>,
}

impl ChannelGraph {
    /// Build from node ids and index pairs; self-loops and duplicates are
    /// dropped.
    pub fn from_index_edges(nodes: Vec<String>, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut sets = vec![BTreeSet::new(); nodes.len()];
        for (a, b) in edges {
            if a != b {
                sets[a].insert(b);
                sets[b].insert(a);
            }
        }
        ChannelGraph {
            nodes,
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    /// Build from id pairs; nodes are the ids that appear.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S)]) -> Self {
        let ids: BTreeSet<&str> = edges.iter().flat_map(|(a, b)| [a.as_ref(), b.as_ref()]).collect();
        let nodes: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let pairs: Vec<(usize, usize)> = edges.iter().map(|(a, b)| (index[a.as_ref()], index[b.as_ref()])).collect();
        Self::from_index_edges(nodes, pairs)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Each edge once as (smaller index, larger index), sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, ns) in self.adjacency.iter().enumerate() {
            out.extend(ns.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Subgraph induced by `keep` (indices into this graph).
    pub fn induced(&self, keep: &[usize]) -> Self {
        let mut keep = keep.to_vec();
        keep.sort_by(|&a, &b| self.nodes[a].cmp(&self.nodes[b]));
        let remap: HashMap<usize, usize> = keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let edges: Vec<(usize, usize)> = keep
            .iter()
            .flat_map(|&a| self.adjacency[a].iter().map(move |&b| (a, b)))
            .filter_map(|(a, b)| Some((remap[&a], *remap.get(&b)?)))
            .collect();
        Self::from_index_edges(keep.iter().map(|&i| self.nodes[i].clone()).collect(), edges)
    }

    /// Connected components as sorted index lists.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.node_count()];
        let mut out = Vec::new();
        for s in 0..self.node_count() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// BFS hop distances from `source`; unreachable nodes are None.
    pub fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("queued nodes are reached");
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// "id_a id_b" per line, ids in node order.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (a, b) in self.edges() {
            let _ = writeln!(s, "{} {}", self.nodes[a], self.nodes[b]);
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::invalid(format!("edge list line {}: expected two ids", i + 1)));
            }
            edges.push((parts[0].to_string(), parts[1].to_string()));
        }
        Ok(Self::from_edges(&edges))
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_edge_list().as_bytes())
    }
}

/// Channels are joined when they share at least `min_shared` subscribers.
pub fn build_channel_graph(edges: &[SubscriptionEdge], min_shared: usize) -> ChannelGraph {
    let min_shared = min_shared.max(1);
    let channels: BTreeSet<&str> = edges.iter().map(|e| e.channel_id.as_str()).collect();
    let nodes: Vec<String> = channels.iter().map(|s| s.to_string()).collect();
    let index: HashMap<&str, usize> = channels.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut by_subscriber: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for e in edges {
        by_subscriber
            .entry(e.subscriber_id.as_str())
            .or_default()
            .insert(index[e.channel_id.as_str()]);
    }
    let mut shared: HashMap<(usize, usize), usize> = HashMap::new();
    for chans in by_subscriber.values() {
        let v: Vec<usize> = chans.iter().copied().collect();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                *shared.entry((v[i], v[j])).or_insert(0) += 1;
            }
        }
    }
    let pairs = shared.into_iter().filter(|&(_, c)| c >= min_shared).map(|(p, _)| p);
    ChannelGraph::from_index_edges(nodes, pairs)
}

/// Largest connected component; ties go to the component holding the
/// smallest node id.
pub fn giant_component(graph: &ChannelGraph) -> Result<ChannelGraph> {
    if graph.node_count() == 0 {
        return Err(Error::InsufficientData("empty graph has no giant component".into()));
    }
    // components come out in order of their smallest index, and node ids are
    // sorted, so the first maximal one wins ties
    let comps = graph.components();
    let best = comps
        .iter()
        .fold(&comps[0], |best, c| if c.len() > best.len() { c } else { best });
    Ok(graph.induced(best))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub nodes: usize,
    pub edges: usize,
    pub average_degree: f64,
    pub diameter: usize,
    pub average_path_length: f64,
    pub density: f64,
    pub clustering: f64,
}

impl NetworkStats {
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("nodes", self.nodes.to_string()),
            ("edges", self.edges.to_string()),
            ("average_degree", format!("{:.6}", self.average_degree)),
            ("diameter", self.diameter.to_string()),
            ("average_path_length", format!("{:.6}", self.average_path_length)),
            ("density", format!("{:.6}", self.density)),
            ("clustering", format!("{:.6}", self.clustering)),
        ]
    }
}

pub fn density(nodes: usize, edges: usize) -> f64 {
    if nodes < 2 {
        0.0
    } else {
        2.0 * edges as f64 / (nodes as f64 * (nodes as f64 - 1.0))
    }
}

pub fn average_degree(nodes: usize, edges: usize) -> f64 {
    if nodes == 0 {
        0.0
    } else {
        2.0 * edges as f64 / nodes as f64
    }
}

/// Mean local clustering; nodes of degree < 2 contribute 0.
pub fn average_clustering(graph: &ChannelGraph) -> f64 {
    let n = graph.node_count();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for ns in &graph.adjacency {
        let k = ns.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for (i, &a) in ns.iter().enumerate() {
            for &b in &ns[i + 1..] {
                if graph.adjacency[a].binary_search(&b).is_ok() {
                    links += 1;
                }
            }
        }
        total += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    total / n as f64
}

/// (diameter, average path length) by BFS from every node; errors on a
/// disconnected graph.
pub fn path_statistics(graph: &ChannelGraph) -> Result<(usize, f64)> {
    let n = graph.node_count();
    let mut sum = 0usize;
    let mut diameter = 0usize;
    for s in 0..n {
        for d in graph.bfs(s).into_iter().skip(s + 1) {
            let d = d.ok_or_else(|| {
                Error::invalid("graph is disconnected; pass its giant component to network_stats")
            })?;
            sum += d;
            diameter = diameter.max(d);
        }
    }
    let pairs = n * n.saturating_sub(1) / 2;
    let apl = if pairs == 0 { 0.0 } else { sum as f64 / pairs as f64 };
    Ok((diameter, apl))
}

/// Statistics of a connected graph.
pub fn network_stats(graph: &ChannelGraph) -> Result<NetworkStats> {
    if graph.node_count() == 0 {
        return Err(Error::InsufficientData("empty graph".into()));
    }
    let (diameter, average_path_length) = path_statistics(graph)?;
    let (n, m) = (graph.node_count(), graph.edge_count());
    Ok(NetworkStats {
        nodes: n,
        edges: m,
        average_degree: average_degree(n, m),
        diameter,
        average_path_length,
        density: density(n, m),
        clustering: average_clustering(graph),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (0 for a single trial).
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Summary { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomBaseline {
    pub nodes: usize,
    pub edges: usize,
    pub trials: usize,
    pub seed: u64,
    /// Over the whole sampled graph.
    pub clustering: Summary,
    pub density: Summary,
    pub average_degree: Summary,
    /// Over each sample's giant component.
    pub average_path_length: Summary,
    pub diameter: Summary,
    pub giant_component_nodes: Summary,
}

/// Uniform graph with `n` nodes and exactly `m` distinct edges.
pub fn sample_gnm(n: usize, m: usize, rng: &mut rng::StageRng) -> Result<ChannelGraph> {
    let total = n * n.saturating_sub(1) / 2;
    if m > total {
        return Err(Error::invalid(format!("G(n={n}, m={m}) infeasible: at most {total} edges")));
    }
    // row offsets of the upper triangle, for decoding a pair index
    let mut starts = Vec::with_capacity(n);
    let mut acc = 0usize;
    for i in 0..n {
        starts.push(acc);
        acc += n - 1 - i;
    }
    let edges = sample(rng, total, m).into_iter().map(|k| {
        let i = starts.partition_point(|&s| s <= k) - 1;
        (i, i + 1 + (k - starts[i]))
    });
    let width = n.to_string().len();
    let nodes = (0..n).map(|i| format!("n{i:0width$}")).collect();
    Ok(ChannelGraph::from_index_edges(nodes, edges))
}

pub fn random_graph_baseline(n: usize, m: usize, trials: usize, seed: u64) -> Result<RandomBaseline> {
    if trials == 0 {
        return Err(Error::invalid("random baseline needs >= 1 trial"));
    }
    if n == 0 {
        return Err(Error::invalid("random baseline needs >= 1 node"));
    }
    let mut r = rng::stage_rng(seed, "gnm-baseline");
    let mut cols: [Vec<f64>; 6] = Default::default();
    for _ in 0..trials {
        let g = sample_gnm(n, m, &mut r)?;
        let giant = giant_component(&g)?;
        let (diam, apl) = path_statistics(&giant)?;
        cols[0].push(average_clustering(&g));
        cols[1].push(density(n, m));
        cols[2].push(average_degree(n, m));
        cols[3].push(apl);
        cols[4].push(diam as f64);
        cols[5].push(giant.node_count() as f64);
    }
    Ok(RandomBaseline {
        nodes: n,
        edges: m,
        trials,
        seed,
        clustering: Summary::of(&cols[0]),
        density: Summary::of(&cols[1]),
        average_degree: Summary::of(&cols[2]),
        average_path_length: Summary::of(&cols[3]),
        diameter: Summary::of(&cols[4]),
        giant_component_nodes: Summary::of(&cols[5]),
    })
}
