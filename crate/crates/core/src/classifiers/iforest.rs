//! Isolation forest with the usual `s(x) = 2^(−E[h(x)] / c(ψ))` score.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StageRng;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub trees: Vec<Tree>,
    pub subsample: usize,
}

/// Average path length of an unsuccessful BST search among `n` points.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

fn build(rows: &[&[f64]], depth: usize, limit: usize, nodes: &mut Vec<Node>, rng: &mut StageRng) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf { size: rows.len() });
    if depth >= limit || rows.len() <= 1 {
        return id;
    }
    let dim = rows[0].len();
    let ranges: Vec<(usize, f64, f64)> = (0..dim)
        .filter_map(|f| {
            let lo = rows.iter().map(|r| r[f]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r[f]).fold(f64::NEG_INFINITY, f64::max);
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return id;
    }
    let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let value = rng.random_range(lo..hi);
    let (l, r): (Vec<&[f64]>, Vec<&[f64]>) = rows.iter().partition(|x| x[feature] < value);
    let left = build(&l, depth + 1, limit, nodes, rng);
    let right = build(&r, depth + 1, limit, nodes, rng);
    nodes[id] = Node::Split {
        feature,
        value,
        left,
        right,
    };
    id
}

impl Tree {
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    node = if x[feature] < value { left } else { right };
                    depth += 1.0;
                }
                Node::Leaf { size } => return depth + c_factor(size),
            }
        }
    }
}

impl IsolationForest {
    pub fn fit(rows: &[Vec<f64>], n_trees: usize, subsample: usize, rng: &mut StageRng) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "isolation forest needs >= 2 samples, got {}",
                rows.len()
            )));
        }
        if n_trees == 0 || subsample < 2 {
            return Err(Error::invalid("isolation forest needs >= 1 tree and subsample >= 2"));
        }
        let psi = subsample.min(rows.len());
        let limit = (psi as f64).log2().ceil() as usize;
        let trees = (0..n_trees)
            .map(|_| {
                let pick: Vec<&[f64]> = sample(rng, rows.len(), psi).into_iter().map(|i| rows[i].as_slice()).collect();
                let mut nodes = Vec::new();
                build(&pick, 0, limit, &mut nodes, rng);
                Tree { nodes }
            })
            .collect();
        Ok(IsolationForest { trees, subsample: psi })
    }

    /// Anomaly score in (0, 1]; larger is more anomalous.
    pub fn anomaly_score(&self, x: &[f64]) -> f64 {
        let mean = self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64;
        2f64.powf(-mean / c_factor(self.subsample))
    }
}
