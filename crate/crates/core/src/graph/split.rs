use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::{Error, Result};

pub type Pair = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairTask {
    /// Positives are the edges of the graph.
    LinkPrediction,
    /// Positives are node pairs that share a label.
    PairwiseNodeClassification,
}

/// Positive and negative pairs for train, validation and test.
///
/// Every pair is stored as `(u, v)` with `u < v`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeSplit {
    pub task: PairTask,
    pub train_pos: Vec<Pair>,
    pub val_pos: Vec<Pair>,
    pub test_pos: Vec<Pair>,
    pub train_neg: Vec<Pair>,
    pub val_neg: Vec<Pair>,
    pub test_neg: Vec<Pair>,
}

impl EdgeSplit {
    /// Positives that must not be visible to the model: for link prediction
    /// these edges are removed from the message-passing graph.
    pub fn held_out_positives(&self) -> impl Iterator<Item = &Pair> {
        self.val_pos.iter().chain(&self.test_pos)
    }
}

fn positive_test(g: &Graph, task: PairTask) -> Result<Box<dyn Fn(usize, usize) -> bool + '_>> {
    match task {
        PairTask::LinkPrediction => Ok(Box::new(move |u, v| g.has_edge(u, v))),
        PairTask::PairwiseNodeClassification => {
            let labels = g
                .labels()
                .ok_or_else(|| Error::invalid("pairwise node classification needs node labels"))?;
            Ok(Box::new(move |u, v| labels[u] == labels[v]))
        }
    }
}

/// All positive pairs of `task` on `g`, sorted.
pub fn positive_universe(g: &Graph, task: PairTask) -> Result<Vec<Pair>> {
    match task {
        PairTask::LinkPrediction => Ok(g.edges().collect()),
        PairTask::PairwiseNodeClassification => {
            let is_pos = positive_test(g, task)?;
            let n = g.n();
            Ok((0..n)
                .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                .filter(|&(u, v)| is_pos(u, v))
                .collect())
        }
    }
}

fn split_count(total: usize, frac: f64) -> usize {
    if frac <= 0.0 {
        return 0;
    }
    // the epsilon absorbs representation error such as 760 * 0.1
    (((total as f64) * frac + 1e-9).floor() as usize).max(1)
}

/// Shuffles the positives of `task` and carves off validation and test
/// fractions (floored, at least one pair each when the fraction is positive,
/// remainder to train). Each split gets the same number of negatives, drawn
/// uniformly without replacement from the non-positive pairs.
pub fn split_pairs(g: &Graph, task: PairTask, val_frac: f64, test_frac: f64, seed: u64) -> Result<EdgeSplit> {
    if !(val_frac >= 0.0 && test_frac >= 0.0 && val_frac + test_frac < 1.0) {
        return Err(Error::invalid(format!(
            "split fractions must be >= 0 with sum < 1, got {val_frac} + {test_frac}"
        )));
    }
    let mut positives = positive_universe(g, task)?;
    let total = positives.len();
    let n_val = split_count(total, val_frac);
    let n_test = split_count(total, test_frac);
    if total == 0 || n_val + n_test >= total {
        return Err(Error::invalid(format!(
            "{total} positive pairs cannot fill {n_val} validation, {n_test} test and >= 1 train"
        )));
    }
    let n = g.n();
    let complement = n * (n - 1) / 2 - total;
    if complement < total {
        return Err(Error::invalid(format!(
            "only {complement} non-positive pairs for {total} negatives"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    let is_pos = positive_test(g, task)?;
    let negatives = sample_negatives(n, total, complement, &is_pos, &mut rng);

    let n_train = total - n_val - n_test;
    let cut = |v: &[Pair]| {
        (
            v[..n_train].to_vec(),
            v[n_train..n_train + n_val].to_vec(),
            v[n_train + n_val..].to_vec(),
        )
    };
    let (train_pos, val_pos, test_pos) = cut(&positives);
    let (train_neg, val_neg, test_neg) = cut(&negatives);
    Ok(EdgeSplit {
        task,
        train_pos,
        val_pos,
        test_pos,
        train_neg,
        val_neg,
        test_neg,
    })
}

fn sample_negatives(
    n: usize,
    count: usize,
    complement: usize,
    is_pos: &dyn Fn(usize, usize) -> bool,
    rng: &mut ChaCha8Rng,
) -> Vec<Pair> {
    if count.saturating_mul(2) <= complement {
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let p = (a.min(b), a.max(b));
            if is_pos(p.0, p.1) || !seen.insert(p) {
                continue;
            }
            out.push(p);
        }
        out
    } else {
        let mut pool: Vec<Pair> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !is_pos(u, v))
            .collect();
        let (chosen, _) = pool.partial_shuffle(rng, count);
        chosen.to_vec()
    }
}
