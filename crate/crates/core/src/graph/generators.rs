use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::{Error, Result};

// Draws per rewire before the rewire is skipped.
const REWIRE_RETRIES: usize = 16;

/// 4-connected `rows x cols` lattice; node id = `row * cols + col`.
pub fn grid_graph(rows: usize, cols: usize) -> Result<Graph> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!("grid needs rows, cols >= 1, got {rows}x{cols}")));
    }
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    Graph::from_edges(rows * cols, edges)
}

/// Path `0 - 1 - ... - (n-1)`.
pub fn path_graph(n: usize) -> Result<Graph> {
    Graph::from_edges(n, (1..n).map(|v| (v - 1, v)))
}

/// Ring of `n_comm` cliques of `comm_size` nodes with random rewiring.
///
/// In clique `c` (nodes `c*size .. (c+1)*size`), the edge between its first
/// two nodes is redirected from the second node to the first node of clique
/// `c + 1 (mod n_comm)`. Size-2 cliques keep their only internal edge, since
/// redirecting it would split the ring. Afterwards every edge is visited in
/// order and, with probability `rewire_prob`, its higher endpoint is replaced
/// by a uniform random node. Draws that create a self-loop, a duplicate, or
/// disconnect the graph are redrawn a bounded number of times and the rewire
/// is skipped if none succeeds. Labels are the original clique ids.
pub fn connected_caveman(n_comm: usize, comm_size: usize, rewire_prob: f64, seed: u64) -> Result<Graph> {
    if n_comm < 2 || comm_size < 2 {
        return Err(Error::invalid(format!(
            "connected caveman needs >= 2 cliques of >= 2 nodes, got {n_comm} x {comm_size}"
        )));
    }
    if !(0.0..=1.0).contains(&rewire_prob) {
        return Err(Error::invalid(format!("rewire_prob {rewire_prob} outside [0, 1]")));
    }
    let n = n_comm * comm_size;
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let link = |adj: &mut Vec<BTreeSet<usize>>, u: usize, v: usize| {
        adj[u].insert(v);
        adj[v].insert(u);
    };
    for c in 0..n_comm {
        let base = c * comm_size;
        for a in base..base + comm_size {
            for b in a + 1..base + comm_size {
                link(&mut adj, a, b);
            }
        }
    }
    for c in 0..n_comm {
        let base = c * comm_size;
        let next = ((c + 1) % n_comm) * comm_size;
        if comm_size > 2 {
            adj[base].remove(&(base + 1));
            adj[base + 1].remove(&base);
        }
        link(&mut adj, base + 1, next);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snapshot: Vec<(usize, usize)> = adj
        .iter()
        .enumerate()
        .flat_map(|(u, s)| s.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
        .collect();
    for (u, v) in snapshot {
        if rng.random::<f64>() >= rewire_prob {
            continue;
        }
        for _ in 0..REWIRE_RETRIES {
            let w = rng.random_range(0..n);
            if w == u || adj[u].contains(&w) {
                continue;
            }
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
            if connected(&adj) {
                break;
            }
            adj[u].remove(&w);
            adj[w].remove(&u);
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }

    let edges = adj
        .iter()
        .enumerate()
        .flat_map(|(u, s)| s.iter().filter(move |&&v| v > u).map(move |&v| (u, v)));
    let labels = (0..n).map(|v| v / comm_size).collect();
    Graph::from_edges(n, edges)?.with_labels(labels)
}

fn connected(adj: &[BTreeSet<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == adj.len()
}
