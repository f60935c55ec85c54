use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::SceneMatrix;

/// Undirected scene graph with edges stored as `(i, j)`, `i < j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub counts: Vec<Vec<usize>>,
    /// Edges added to connect components of the k-NN graph.
    pub bridges: usize,
}

impl SceneGraph {
    /// Graph over `num_nodes` nodes with the given edges and no count vectors.
    pub fn from_edges(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b || a >= num_nodes || b >= num_nodes {
                return Err(Error::InvalidInput(format!(
                    "invalid edge ({a}, {b}) for {num_nodes} nodes"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self {
            num_nodes,
            edges: set.into_iter().collect(),
            counts: Vec::new(),
            bridges: 0,
        })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn num_components(&self) -> usize {
        count_components(self.num_nodes, self.edges.iter().copied())
    }

    pub fn ensure_connected(&self) -> Result<()> {
        match self.num_components() {
            1 => Ok(()),
            components => Err(Error::Disconnected { components }),
        }
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Returns false if already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

pub(crate) fn count_components(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> usize {
    let mut uf = UnionFind::new(n);
    let mut comps = n;
    for (a, b) in edges {
        if uf.union(a, b) {
            comps -= 1;
        }
    }
    comps
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Symmetrized k-nearest-neighbor graph on per-category object counts.
///
/// Neighbors are ranked by `(distance, index)`. If the result is
/// disconnected, minimum-distance edges between components are added until it
/// is connected.
pub fn knn_graph(scenes: &[SceneMatrix], k: usize) -> Result<SceneGraph> {
    if let Some(first) = scenes.first() {
        for s in &scenes[1..] {
            first.check_config(s)?;
        }
    }
    let counts: Vec<Vec<usize>> = scenes.iter().map(SceneMatrix::category_counts).collect();
    let features: Vec<Vec<f64>> = counts
        .iter()
        .map(|c| c.iter().map(|&x| x as f64).collect())
        .collect();
    let mut graph = knn_graph_from_features(&features, k)?;
    graph.counts = counts;
    Ok(graph)
}

/// k-NN graph on arbitrary feature vectors, with the same ranking and
/// bridging rules as [`knn_graph`].
pub fn knn_graph_from_features(features: &[Vec<f64>], k: usize) -> Result<SceneGraph> {
    let n = features.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 scenes, got {n}")));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let k = k.min(n - 1);
    let mut set = BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (distance(&features[i], &features[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &others[..k] {
            set.insert((i.min(j), i.max(j)));
        }
    }

    let mut uf = UnionFind::new(n);
    let mut comps = n;
    for &(a, b) in &set {
        if uf.union(a, b) {
            comps -= 1;
        }
    }
    let mut bridges = 0;
    if comps > 1 {
        let mut pairs: Vec<(f64, usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| uf.find(i) != uf.find(j))
            .map(|(i, j)| (distance(&features[i], &features[j]), i, j))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        for (_, i, j) in pairs {
            if uf.union(i, j) {
                set.insert((i, j));
                bridges += 1;
                comps -= 1;
                if comps == 1 {
                    break;
                }
            }
        }
    }
    Ok(SceneGraph {
        num_nodes: n,
        edges: set.into_iter().collect(),
        counts: Vec::new(),
        bridges,
    })
}
