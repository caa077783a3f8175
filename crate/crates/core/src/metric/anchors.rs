use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Distance, DistanceMatrix};
use crate::{Error, Result};

/// Ordered anchor sets with their `(i, j)` sampling provenance.
///
/// Set `(i, j)` includes each node independently with probability `2^-i`,
/// for `i` in `1..=ceil(log2 n)` and `j` in `1..=ceil(c * log2 n)`. Sets are
/// stored `i`-major. Empty sets are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorFamily {
    sets: Vec<Vec<usize>>,
    provenance: Vec<(usize, usize)>,
    c: f64,
    seed: u64,
}

fn ceil_log2(n: usize) -> usize {
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// `(ceil(log2 n), ceil(c * log2 n))`: the ranges of `i` and `j`.
pub(crate) fn family_dims(n: usize, c: f64) -> (usize, usize) {
    let copies = (c * (n as f64).log2()).ceil() as usize;
    (ceil_log2(n), copies.max(1))
}

/// Draws one anchor family over `n` nodes.
pub fn sample_anchor_family(n: usize, c: f64, seed: u64) -> Result<AnchorFamily> {
    if n < 2 {
        return Err(Error::invalid(format!("anchor sampling needs n >= 2, got {n}")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("anchor constant c must be > 0, got {c}")));
    }
    let (levels, copies) = family_dims(n, c);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(levels * copies);
    let mut provenance = Vec::with_capacity(levels * copies);
    for i in 1..=levels {
        let p = 0.5f64.powi(i as i32);
        for j in 1..=copies {
            sets.push((0..n).filter(|_| rng.random::<f64>() < p).collect());
            provenance.push((i, j));
        }
    }
    Ok(AnchorFamily {
        sets,
        provenance,
        c,
        seed,
    })
}

impl AnchorFamily {
    /// A family of explicitly chosen sets, for tests and demonstrations.
    ///
    /// Provenance is `(1, j)` for the `j`-th set.
    pub fn from_sets(n: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let mut clean = Vec::with_capacity(sets.len());
        for mut s in sets {
            s.sort_unstable();
            s.dedup();
            if let Some(&bad) = s.iter().find(|&&v| v >= n) {
                return Err(Error::invalid(format!("anchor {bad} out of range for n={n}")));
            }
            clean.push(s);
        }
        let provenance = (1..=clean.len()).map(|j| (1, j)).collect();
        Ok(Self {
            sets: clean,
            provenance,
            c: 1.0,
            seed: 0,
        })
    }

    /// Every node as its own anchor set.
    pub fn singletons(n: usize) -> Self {
        Self::from_sets(n, (0..n).map(|v| vec![v]).collect()).expect("ids below n")
    }

    pub fn k(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn provenance(&self) -> &[(usize, usize)] {
        &self.provenance
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The same sets in the order `order[0], order[1], ...`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k()];
        if order.len() != self.k()
            || order
                .iter()
                .any(|&i| i >= self.k() || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::invalid("order is not a permutation of the anchor sets"));
        }
        Ok(Self {
            sets: order.iter().map(|&i| self.sets[i].clone()).collect(),
            provenance: order.iter().map(|&i| self.provenance[i]).collect(),
            c: self.c,
            seed: self.seed,
        })
    }
}

/// `min` over members of `d(v, u)`; unreachable for an empty set.
pub fn set_distance(dm: &DistanceMatrix, v: usize, set: &[usize]) -> Distance {
    set.iter().map(|&u| dm.get(v, u)).min().unwrap_or(Distance::Unreachable)
}

/// Nearest reachable member of `set` to `v`, lowest id on ties.
pub fn closest_member(dm: &DistanceMatrix, v: usize, set: &[usize]) -> Option<(usize, u32)> {
    let mut best: Option<(usize, u32)> = None;
    for &u in set {
        if let Distance::Hops(h) = dm.get(v, u) {
            if best.is_none_or(|(_, b)| h < b) {
                best = Some((u, h));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::path_graph;
    use crate::metric::all_pairs;

    #[test]
    fn family_sizes() {
        let f = sample_anchor_family(400, 1.0, 0).unwrap();
        assert_eq!(f.k(), 81);
        assert_eq!(f.provenance()[0], (1, 1));
        assert_eq!(*f.provenance().last().unwrap(), (9, 9));
        assert!(f.sets().iter().flatten().all(|&v| v < 400));

        let two = sample_anchor_family(2, 1.0, 5).unwrap();
        assert_eq!(two.k(), 1);
        assert_eq!(two.provenance(), &[(1, 1)]);

        assert_eq!(sample_anchor_family(64, 2.0, 0).unwrap().k(), 6 * 12);
        assert_eq!(sample_anchor_family(65, 0.5, 0).unwrap().k(), 7 * 4);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(sample_anchor_family(1, 1.0, 0).is_err());
        assert!(sample_anchor_family(10, 0.0, 0).is_err());
        assert!(sample_anchor_family(10, f64::NAN, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = sample_anchor_family(100, 1.0, 9).unwrap();
        assert_eq!(a, sample_anchor_family(100, 1.0, 9).unwrap());
        assert_ne!(a, sample_anchor_family(100, 1.0, 10).unwrap());
    }

    #[test]
    fn level_one_mean_size() {
        let mut total = 0usize;
        let mut count = 0usize;
        for seed in 0..1000 {
            let f = sample_anchor_family(400, 1.0, seed).unwrap();
            for (s, &(i, _)) in f.sets().iter().zip(f.provenance()) {
                if i == 1 {
                    total += s.len();
                    count += 1;
                }
            }
        }
        let mean = total as f64 / count as f64;
        let se = (400.0f64 * 0.25).sqrt() / (count as f64).sqrt();
        assert!((mean - 200.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn set_distance_rules() {
        let dm = all_pairs(&path_graph(3).unwrap());
        assert_eq!(set_distance(&dm, 1, &[1]), Distance::Hops(0));
        assert_eq!(set_distance(&dm, 0, &[]), Distance::Unreachable);
        assert_eq!(set_distance(&dm, 0, &[1, 2]), Distance::Hops(1));
    }

    #[test]
    fn closest_breaks_ties_by_id() {
        let dm = all_pairs(&path_graph(5).unwrap());
        assert_eq!(closest_member(&dm, 2, &[0, 1, 3, 4]), Some((1, 1)));
        assert_eq!(closest_member(&dm, 2, &[]), None);
    }
}
