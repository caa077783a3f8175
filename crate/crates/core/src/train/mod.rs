//! Pair objectives, validation-selected training runs and ROC AUC.

mod auc;

pub use auc::roc_auc;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::graph::{augment_one_hot, constant_features, EdgeSplit, Graph, PairTask};
use crate::metric::{AnchorFamily, DistanceMatrix};
use crate::model::{
    gcn_embed, gcn_forward, init_rng, make_distance_input, pgnn_embed, pgnn_forward, AnchorSampler, GcnParams,
    PgnnConfig, PgnnParams,
};
use crate::par;
use crate::tensor::{Adam, AdamState, Matrix, Tape, Var};
use crate::{Error, Result};

type Pair = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// One-hot node identities appended to the features.
    Transductive,
    /// Native features if present, otherwise a constant column.
    Inductive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub repeats: usize,
    pub setting: Setting,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            repeats: 10,
            setting: Setting::Inductive,
        }
    }
}

impl TrainConfig {
    /// `epochs = 0` is accepted and evaluates the initial parameters.
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("train.repeats must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("train.lr must be > 0, got {}", self.lr)));
        }
        for (key, b) in [("train.beta1", self.beta1), ("train.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{key} must be in [0, 1), got {b}")));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!("train.eps must be > 0, got {}", self.eps)));
        }
        Ok(())
    }

    fn adam(&self) -> Adam {
        Adam {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Model family trained by [`run_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Pgnn(PgnnConfig),
    #[serde(rename = "gcn")]
    Gcn(GcnConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcnConfig {
    pub layers: usize,
    pub hidden_dim: usize,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            hidden_dim: 32,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Pgnn(c) => c.validate(),
            ModelSpec::Gcn(c) => {
                if !(1..=8).contains(&c.layers) {
                    return Err(Error::Config(format!(
                        "model.layers must be in [1, 8], got {}",
                        c.layers
                    )));
                }
                if c.hidden_dim == 0 {
                    return Err(Error::Config("model.hidden_dim must be >= 1".into()));
                }
                Ok(())
            }
        }
    }
}

/// Trained weights of either model family.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelParams {
    Pgnn(PgnnParams),
    Gcn(GcnParams),
}

impl ModelParams {
    pub fn to_matrices(&self) -> Vec<Matrix> {
        match self {
            ModelParams::Pgnn(p) => p.to_matrices(),
            ModelParams::Gcn(p) => p.weights.clone(),
        }
    }
}

/// `dot(z_u, z_v)` as a logit.
pub fn pair_score(z: &Matrix, u: usize, v: usize) -> Result<f64> {
    if u >= z.rows() || v >= z.rows() {
        return Err(Error::invalid(format!(
            "pair ({u}, {v}) out of range for {} rows",
            z.rows()
        )));
    }
    Ok(z.row(u).iter().zip(z.row(v)).map(|(a, b)| a * b).sum())
}

fn pair_scores(z: &Matrix, pairs: &[Pair]) -> Result<Vec<f64>> {
    pairs.iter().map(|&(u, v)| pair_score(z, u, v)).collect()
}

/// Records `dot(z_u, z_v)` for every pair as a column vector.
pub fn pair_logits(tape: &mut Tape, z: Var, pairs: &[Pair]) -> Result<Var> {
    let us: Arc<[usize]> = pairs.iter().map(|p| p.0).collect();
    let vs: Arc<[usize]> = pairs.iter().map(|p| p.1).collect();
    let zu = tape.gather_rows(z, us)?;
    let zv = tape.gather_rows(z, vs)?;
    let prod = tape.hadamard(zu, zv)?;
    tape.row_sum(prod)
}

/// Binary cross-entropy over positive (target 1) and negative (target 0)
/// pairs, all scored from the same embedding.
pub fn epoch_loss(tape: &mut Tape, z: Var, pos: &[Pair], neg: &[Pair]) -> Result<Var> {
    if pos.is_empty() {
        return Err(Error::invalid("epoch loss needs at least one positive pair"));
    }
    let pairs: Vec<Pair> = pos.iter().chain(neg).copied().collect();
    let logits = pair_logits(tape, z, &pairs)?;
    let targets: Arc<[f64]> = std::iter::repeat_n(1.0, pos.len())
        .chain(std::iter::repeat_n(0.0, neg.len()))
        .collect();
    tape.bce_with_logits(logits, targets)
}

fn bce_value(pos: &[f64], neg: &[f64]) -> f64 {
    let term = |x: f64, y: f64| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
    let total: f64 = pos
        .iter()
        .map(|&x| term(x, 1.0))
        .chain(neg.iter().map(|&x| term(x, 0.0)))
        .sum();
    total / (pos.len() + neg.len()) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub roc_auc: f64,
    pub loss: f64,
}

/// AUC and mean BCE of the pair logits of one split.
pub fn evaluate_split(z: &Matrix, pos: &[Pair], neg: &[Pair]) -> Result<SplitMetrics> {
    let p = pair_scores(z, pos)?;
    let n = pair_scores(z, neg)?;
    let labels: Vec<bool> = std::iter::repeat_n(true, p.len())
        .chain(std::iter::repeat_n(false, n.len()))
        .collect();
    let scores: Vec<f64> = p.iter().chain(&n).copied().collect();
    Ok(SplitMetrics {
        roc_auc: roc_auc(&scores, &labels)?,
        loss: bce_value(&p, &n),
    })
}

/// One row of the per-epoch log: the weights after `epoch` optimiser steps,
/// scored with the anchors drawn for that epoch. Epoch 0 is the
/// initialisation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val: SplitMetrics,
    pub test: SplitMetrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    /// Epoch whose weights are reported: highest validation AUC, earliest
    /// on ties.
    pub best_epoch: usize,
    pub val: SplitMetrics,
    pub test: SplitMetrics,
    pub log: Vec<EpochRecord>,
    pub params: ModelParams,
    /// Anchors used to evaluate the reported weights (P-GNN only).
    pub anchors: Option<AnchorFamily>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub per_repeat: Vec<RepeatResult>,
    pub mean_auc: f64,
    pub std_auc: f64,
}

impl Metrics {
    fn from_repeats(per_repeat: Vec<RepeatResult>) -> Self {
        let n = per_repeat.len() as f64;
        let mean_auc = per_repeat.iter().map(|r| r.test.roc_auc).sum::<f64>() / n;
        let var = per_repeat
            .iter()
            .map(|r| (r.test.roc_auc - mean_auc).powi(2))
            .sum::<f64>()
            / n;
        Self {
            per_repeat,
            mean_auc,
            std_auc: var.sqrt(),
        }
    }
}

/// Features for a setting: one-hot identities (transductive), or native
/// features falling back to a constant column (inductive).
pub fn prepare_features(g: &Graph, setting: Setting) -> Graph {
    match setting {
        Setting::Transductive => augment_one_hot(g),
        Setting::Inductive if g.features().is_some() => g.clone(),
        Setting::Inductive => constant_features(g),
    }
}

/// Graph the model may see: for link prediction the validation and test
/// edges are removed.
pub fn message_graph(g: &Graph, split: &EdgeSplit) -> Graph {
    match split.task {
        PairTask::LinkPrediction => {
            let held: Vec<Pair> = split.held_out_positives().copied().collect();
            g.without_edges(&held)
        }
        PairTask::PairwiseNodeClassification => g.clone(),
    }
}

/// Features for `setting` on the graph the model may see.
pub fn prepare_graph(g: &Graph, split: &EdgeSplit, setting: Setting) -> Graph {
    message_graph(&prepare_features(g, setting), split)
}

/// Pair-scoring embeddings of trained weights on a prepared graph.
///
/// P-GNN weights need the anchor family they were evaluated with.
pub fn model_embeddings(
    g: &Graph,
    model: &ModelSpec,
    params: &ModelParams,
    anchors: Option<&AnchorFamily>,
) -> Result<Matrix> {
    match (model, params) {
        (ModelSpec::Pgnn(cfg), ModelParams::Pgnn(p)) => {
            let fam = anchors.ok_or_else(|| Error::invalid("P-GNN embeddings need an anchor family"))?;
            let dm = make_distance_input(g, cfg.variant);
            Ok(pgnn_embed(g, &dm, fam, p, cfg)?.z)
        }
        (ModelSpec::Gcn(_), ModelParams::Gcn(p)) => gcn_embed(g, p),
        _ => Err(Error::invalid(
            "parameters do not belong to the configured model family",
        )),
    }
}

struct Prepared<'a> {
    graph: Graph,
    dm: Option<DistanceMatrix>,
    split: &'a EdgeSplit,
    model: &'a ModelSpec,
    cfg: &'a TrainConfig,
}

/// Trains `cfg.repeats` independent runs and reports test AUC at the best
/// validation epoch of each.
///
/// Repeat `r` seeds its initialisation and anchor draws from `seed + r`.
/// Repeats run in parallel under the `parallel` feature and are merged by
/// repeat index.
pub fn run_experiment(g: &Graph, split: &EdgeSplit, model: &ModelSpec, cfg: &TrainConfig) -> Result<Metrics> {
    model.validate()?;
    cfg.validate()?;
    if split.val_pos.is_empty() || split.test_pos.is_empty() {
        return Err(Error::invalid("validation and test splits must be nonempty"));
    }
    let graph = prepare_graph(g, split, cfg.setting);
    let dm = match model {
        ModelSpec::Pgnn(c) => Some(make_distance_input(&graph, c.variant)),
        ModelSpec::Gcn(_) => None,
    };
    let prepared = Prepared {
        graph,
        dm,
        split,
        model,
        cfg,
    };
    let repeats = par::map_range(cfg.repeats, |r| prepared.run_repeat(r));
    Ok(Metrics::from_repeats(repeats.into_iter().collect::<Result<_>>()?))
}

/// Outcome of one repeat before the parameters are wrapped.
struct Trained<P> {
    best: EpochRecord,
    log: Vec<EpochRecord>,
    params: P,
    anchors: Option<AnchorFamily>,
}

impl<P> Trained<P> {
    fn into_result(self, repeat: usize, seed: u64, wrap: impl FnOnce(P) -> ModelParams) -> RepeatResult {
        RepeatResult {
            repeat,
            seed,
            best_epoch: self.best.epoch,
            val: self.best.val,
            test: self.best.test,
            log: self.log,
            params: wrap(self.params),
            anchors: self.anchors,
        }
    }
}

impl Prepared<'_> {
    fn run_repeat(&self, repeat: usize) -> Result<RepeatResult> {
        let seed = self.cfg.seed.wrapping_add(repeat as u64);
        let mut rng = init_rng(seed);
        let d_in = self.graph.features().expect("prepared features").cols();
        match self.model {
            ModelSpec::Pgnn(mcfg) => {
                let dm = self.dm.as_ref().expect("pgnn distances");
                let sampler = AnchorSampler::new(self.graph.n(), mcfg, seed);
                let t = self.train(PgnnParams::init(d_in, mcfg, &mut rng), |params, epoch, tape| {
                    let fam = sampler.draw(epoch as u64, 0)?;
                    let vars = params.record(tape);
                    let z = pgnn_forward(tape, &self.graph, dm, &fam, &vars, mcfg)?.z;
                    Ok((z, Some(fam)))
                })?;
                Ok(t.into_result(repeat, seed, ModelParams::Pgnn))
            }
            ModelSpec::Gcn(gcfg) => {
                let init = GcnParams::init(d_in, gcfg.hidden_dim, gcfg.layers, &mut rng);
                let t = self.train(init, |params, _, tape| {
                    let vars = params.record(tape);
                    Ok((gcn_forward(tape, &self.graph, &vars)?, None))
                })?;
                Ok(t.into_result(repeat, seed, ModelParams::Gcn))
            }
        }
    }

    /// Full-batch training loop shared by both model families.
    ///
    /// `forward(params, epoch, tape)` records the embeddings for `epoch`.
    /// One forward per epoch serves both the log entry of the current
    /// weights and, except after the last epoch, the gradient step, so
    /// evaluation always reuses the training anchors.
    fn train<P: Trainable>(
        &self,
        mut params: P,
        forward: impl Fn(&P, usize, &mut Tape) -> Result<(Var, Option<AnchorFamily>)>,
    ) -> Result<Trained<P>> {
        let split = self.split;
        let adam = self.cfg.adam();
        let mut state = AdamState::new(&params.matrices());
        let mut log = Vec::with_capacity(self.cfg.epochs + 1);
        let mut best: Option<Trained<P>> = None;

        for epoch in 0..=self.cfg.epochs {
            let mut tape = Tape::new();
            let (z, fam) = forward(&params, epoch, &mut tape)?;
            let loss = epoch_loss(&mut tape, z, &split.train_pos, &split.train_neg)?;
            let zv = tape.value(z);
            let rec = EpochRecord {
                epoch,
                train_loss: tape.value(loss).data()[0],
                val: evaluate_split(zv, &split.val_pos, &split.val_neg)?,
                test: evaluate_split(zv, &split.test_pos, &split.test_neg)?,
            };
            log.push(rec);
            if best.as_ref().is_none_or(|b| rec.val.roc_auc > b.best.val.roc_auc) {
                best = Some(Trained {
                    best: rec,
                    log: Vec::new(),
                    params: params.clone(),
                    anchors: fam,
                });
            }
            if epoch == self.cfg.epochs {
                break;
            }
            let grads = tape.backward(loss)?;
            let grads: Vec<&Matrix> = grads.iter().map(|(_, g)| g).collect();
            let mut mats = params.matrices();
            adam.step(&mut mats, &grads, &mut state)?;
            params = P::from_matrices(mats)?;
        }
        let mut best = best.expect("epoch 0 is always logged");
        best.log = log;
        Ok(best)
    }
}

/// Parameters flattened in the order their tape leaves are recorded.
trait Trainable: Clone + Sized {
    fn matrices(&self) -> Vec<Matrix>;
    fn from_matrices(mats: Vec<Matrix>) -> Result<Self>;
}

impl Trainable for PgnnParams {
    fn matrices(&self) -> Vec<Matrix> {
        self.to_matrices()
    }

    fn from_matrices(mats: Vec<Matrix>) -> Result<Self> {
        PgnnParams::from_matrices(mats)
    }
}

impl Trainable for GcnParams {
    fn matrices(&self) -> Vec<Matrix> {
        self.weights.clone()
    }

    fn from_matrices(mats: Vec<Matrix>) -> Result<Self> {
        GcnParams::from_matrices(mats)
    }
}

#[cfg(test)]
mod tests;
