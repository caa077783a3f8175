use std::sync::Arc;

use crate::metric::{closest_member, similarity, AnchorFamily, DistanceMatrix};
use crate::par;
use crate::{Error, Result};

/// Index layout of the messages exchanged in one forward pass.
///
/// Message row `m` goes from `member[m]` to `target[m]`, weighted by
/// `similarity[m]`. Rows are grouped `v`-major, then by anchor set. With
/// closest-node aggregation there is exactly one row per `(v, set)`: the
/// nearest reachable member, or a zero-weight self row when there is none.
#[derive(Clone, Debug)]
pub struct MessagePlan {
    n: usize,
    k: usize,
    target: Arc<[usize]>,
    member: Arc<[usize]>,
    similarity: Arc<[f64]>,
    message_offsets: Option<Arc<[usize]>>,
    anchor_offsets: Arc<[usize]>,
}

impl MessagePlan {
    pub fn build(dm: &DistanceMatrix, fam: &AnchorFamily, closest: bool) -> Result<Self> {
        let (n, k) = (dm.n(), fam.k());
        if k == 0 {
            return Err(Error::invalid("anchor family has no sets"));
        }
        if let Some(&bad) = fam.sets().iter().flatten().find(|&&u| u >= n) {
            return Err(Error::invalid(format!("anchor {bad} out of range for n={n}")));
        }
        let per_node = par::map_range(n, |v| {
            let mut member = Vec::new();
            let mut sim = Vec::new();
            let mut sizes = Vec::with_capacity(k);
            for set in fam.sets() {
                if closest {
                    match closest_member(dm, v, set) {
                        Some((u, h)) => {
                            member.push(u);
                            sim.push(1.0 / (f64::from(h) + 1.0));
                        }
                        None => {
                            member.push(v);
                            sim.push(0.0);
                        }
                    }
                } else {
                    for &u in set {
                        member.push(u);
                        sim.push(similarity(dm.get(v, u)));
                    }
                    sizes.push(set.len());
                }
            }
            (member, sim, sizes)
        });

        let mut target = Vec::new();
        let mut member = Vec::new();
        let mut sim = Vec::new();
        let mut offsets = vec![0];
        for (v, (m, s, sizes)) in per_node.into_iter().enumerate() {
            target.extend(std::iter::repeat_n(v, m.len()));
            member.extend(m);
            sim.extend(s);
            for size in sizes {
                let last = *offsets.last().unwrap();
                offsets.push(last + size);
            }
        }
        Ok(Self {
            n,
            k,
            target: target.into(),
            member: member.into(),
            similarity: sim.into(),
            message_offsets: (!closest).then(|| offsets.into()),
            anchor_offsets: (0..=n).map(|v| v * k).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn target(&self) -> Arc<[usize]> {
        self.target.clone()
    }

    pub fn member(&self) -> Arc<[usize]> {
        self.member.clone()
    }

    pub fn similarity(&self) -> Arc<[f64]> {
        self.similarity.clone()
    }

    /// Segment boundaries of each `(v, set)` group; `None` when every group
    /// is a single row.
    pub fn message_offsets(&self) -> Option<Arc<[usize]>> {
        self.message_offsets.clone()
    }

    /// Segment boundaries of each node's `k` anchor rows.
    pub fn anchor_offsets(&self) -> Arc<[usize]> {
        self.anchor_offsets.clone()
    }
}
