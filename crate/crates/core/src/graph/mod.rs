//! Undirected graphs, generators, loaders and pair splits.

mod generators;
mod io;
mod split;

pub use generators::{connected_caveman, grid_graph, path_graph};
pub use io::{load_edge_list, load_features_csv, load_labels, write_edge_list, write_labels};
pub use split::{split_pairs, EdgeSplit, PairTask};

use crate::tensor::Matrix;
use crate::{Error, Result};

/// Simple undirected graph with optional node features and labels.
///
/// Neighbour lists are strictly increasing, symmetric and free of self-loops.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    features: Option<Matrix>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph on `n` nodes; self-loops and repeated edges are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph needs at least one node"));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) out of range for n={n}")));
            }
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        Ok(Self {
            adjacency,
            features: None,
            labels: None,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n() && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.n() {
            return Err(Error::invalid(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                self.n()
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::invalid(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Same nodes, features and labels with the listed edges removed.
    pub fn without_edges(&self, removed: &[(usize, usize)]) -> Graph {
        let mut adjacency = self.adjacency.clone();
        for &(u, v) in removed {
            if let Ok(i) = adjacency[u].binary_search(&v) {
                adjacency[u].remove(i);
            }
            if let Ok(i) = adjacency[v].binary_search(&u) {
                adjacency[v].remove(i);
            }
        }
        Graph {
            adjacency,
            features: self.features.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Node ids grouped by connected component, each sorted, ordered by
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Full scan of the structural invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n();
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            if nbrs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("neighbours of {u} not strictly increasing")));
            }
            for &v in nbrs {
                if v >= n || v == u || self.adjacency[v].binary_search(&u).is_err() {
                    return Err(Error::invalid(format!("bad or asymmetric edge ({u}, {v})")));
                }
            }
        }
        if let Some(f) = &self.features {
            if f.rows() != n {
                return Err(Error::invalid("feature rows differ from node count"));
            }
        }
        Ok(())
    }

    /// Relabels node `v` as `perm[v]`, carrying features and labels along.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("permutation is not a bijection on node ids"));
        }
        let mut g = Graph::from_edges(n, self.edges().map(|(u, v)| (perm[u], perm[v])))?;
        if let Some(f) = &self.features {
            let mut rows = vec![0usize; n];
            for (v, &p) in perm.iter().enumerate() {
                rows[p] = v;
            }
            g = g.with_features(Matrix::from_fn(n, f.cols(), |r, c| f.get(rows[r], c))?)?;
        }
        if let Some(l) = &self.labels {
            let mut labels = vec![0; n];
            for (v, &p) in perm.iter().enumerate() {
                labels[p] = l[v];
            }
            g = g.with_labels(labels)?;
        }
        Ok(g)
    }
}

/// Appends an `n x n` identity block to the features.
pub fn augment_one_hot(g: &Graph) -> Graph {
    let n = g.n();
    let eye = Matrix::identity(n);
    let features = match &g.features {
        Some(f) => f.hconcat(&eye).expect("feature rows match node count"),
        None => eye,
    };
    Graph {
        features: Some(features),
        ..g.clone()
    }
}

/// Replaces the features with a single all-ones column.
pub fn constant_features(g: &Graph) -> Graph {
    Graph {
        features: Some(Matrix::from_raw(g.n(), 1, vec![1.0; g.n()])),
        ..g.clone()
    }
}
