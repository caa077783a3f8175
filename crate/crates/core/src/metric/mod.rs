//! Hop distances, anchor sets and distortion of anchor embeddings.

mod anchors;
mod embed;

pub use anchors::{closest_member, sample_anchor_family, set_distance, AnchorFamily};
pub use embed::{bourgain_embed, measure_distortion, Distortion, Norm};

use std::collections::VecDeque;

use crate::graph::Graph;
use crate::par;
use crate::{Error, Result};

/// Hop count, or the explicit absence of a path.
///
/// `Unreachable` orders after every finite distance, so `min` picks the
/// nearest reachable node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Hops(u32),
    Unreachable,
}

impl Distance {
    pub fn hops(self) -> Option<u32> {
        match self {
            Distance::Hops(h) => Some(h),
            Distance::Unreachable => None,
        }
    }

    pub fn is_reachable(self) -> bool {
        matches!(self, Distance::Hops(_))
    }
}

/// Maximum hop count kept by [`truncate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopLimit {
    Finite(u32),
    Infinite,
}

/// `n x n` matrix of hop counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<Distance>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<Distance>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("distance rows must all have length n"));
        }
        Ok(Self {
            n,
            d: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: usize, v: usize) -> Distance {
        self.d[u * self.n + v]
    }

    pub fn row(&self, u: usize) -> &[Distance] {
        &self.d[u * self.n..(u + 1) * self.n]
    }

    pub fn is_fully_reachable(&self) -> bool {
        self.d.iter().all(|d| d.is_reachable())
    }
}

/// Shortest hop counts from `source` to every node.
pub fn bfs_from(g: &Graph, source: usize) -> Result<Vec<Distance>> {
    if source >= g.n() {
        return Err(Error::invalid(format!("source {source} out of range for n={}", g.n())));
    }
    Ok(bfs_limited(g, source, u32::MAX))
}

/// BFS that stops expanding past `limit` hops; farther nodes stay unreachable.
pub(crate) fn bfs_limited(g: &Graph, source: usize, limit: u32) -> Vec<Distance> {
    let mut dist = vec![Distance::Unreachable; g.n()];
    dist[source] = Distance::Hops(0);
    let mut queue = VecDeque::from([(source, 0u32)]);
    while let Some((u, du)) = queue.pop_front() {
        if du >= limit {
            continue;
        }
        for &v in g.neighbors(u) {
            if dist[v] == Distance::Unreachable {
                dist[v] = Distance::Hops(du + 1);
                queue.push_back((v, du + 1));
            }
        }
    }
    dist
}

/// One BFS per source; rows are computed in parallel under `parallel`.
pub fn all_pairs(g: &Graph) -> DistanceMatrix {
    all_pairs_limited(g, u32::MAX)
}

/// All-pairs distances with entries beyond `limit` hops left unreachable.
///
/// Equal to `truncate(all_pairs(g), limit)` but only explores each node's
/// `limit`-hop ball.
pub fn all_pairs_limited(g: &Graph, limit: u32) -> DistanceMatrix {
    let rows = par::map_range(g.n(), |s| bfs_limited(g, s, limit));
    DistanceMatrix {
        n: g.n(),
        d: rows.into_iter().flatten().collect(),
    }
}

/// Entries above `limit` become unreachable.
pub fn truncate(dm: &DistanceMatrix, limit: HopLimit) -> DistanceMatrix {
    match limit {
        HopLimit::Infinite => dm.clone(),
        HopLimit::Finite(q) => DistanceMatrix {
            n: dm.n,
            d: dm
                .d
                .iter()
                .map(|&d| match d {
                    Distance::Hops(h) if h <= q => d,
                    _ => Distance::Unreachable,
                })
                .collect(),
        },
    }
}

/// `1 / (d + 1)`, and 0 when there is no path.
pub fn similarity(d: Distance) -> f64 {
    match d {
        Distance::Hops(h) => 1.0 / (f64::from(h) + 1.0),
        Distance::Unreachable => 0.0,
    }
}
