//! Anchor-set message passing and the mean-aggregation GCN baseline.
//!
//! One P-GNN layer, for node `v` and anchor set `S_i`:
//!
//! ```text
//! F(v, u)   = relu(W_msg^T [h_v ; s(v, u) h_u])        (0 if u is unreachable)
//! M_v[i]    = mean_{u in S_i} F(v, u)                  (zero row for empty S_i)
//! z_v[i]    = M_v[i] . w                               (last layer only)
//! h_v'      = mean_i M_v[i]
//! ```
//!
//! With `normalize_output` the last layer returns `z_v / sqrt(|z_v|^2 + eps)`,
//! so pair logits `z_u . z_v` are cosines.
//!
//! With closest-node aggregation only the reachable member nearest to `v`
//! (lowest id on ties) contributes to `M_v[i]`.

mod params;
mod plan;

pub use params::{GcnParams, LayerParams, PgnnParams};
pub use plan::MessagePlan;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::metric::{all_pairs, all_pairs_limited, sample_anchor_family, AnchorFamily, DistanceMatrix};
use crate::tensor::{Matrix, Tape, Var};
use crate::{Error, Result};

/// Which hop distances feed the similarity `1 / (d + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceVariant {
    /// Exact shortest-path hops.
    Exact,
    /// Hops truncated at 2; farther pairs have similarity 0.
    Fast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgnnConfig {
    pub layers: usize,
    pub anchor_c: f64,
    pub variant: DistanceVariant,
    pub message_dim: usize,
    pub closest_node_agg: bool,
    pub resample_anchors_per_forward: bool,
    /// Scale each output row `z_v` to unit length, so pair logits are cosines.
    pub normalize_output: bool,
}

impl Default for PgnnConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            anchor_c: 1.0,
            variant: DistanceVariant::Exact,
            message_dim: 32,
            closest_node_agg: true,
            resample_anchors_per_forward: true,
            normalize_output: true,
        }
    }
}

impl PgnnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.layers) {
            return Err(Error::Config(format!(
                "model.layers must be in [1, 8], got {}",
                self.layers
            )));
        }
        if !(self.anchor_c.is_finite() && self.anchor_c > 0.0) {
            return Err(Error::Config(format!(
                "model.anchor_c must be > 0, got {}",
                self.anchor_c
            )));
        }
        if self.message_dim == 0 {
            return Err(Error::Config("model.message_dim must be >= 1".into()));
        }
        Ok(())
    }
}

/// Final position-aware `Z` (`n x k`) and structure-aware `H` (`n x r`).
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub z: Matrix,
    pub h: Matrix,
}

/// Tape handles for [`Embeddings`].
#[derive(Clone, Copy, Debug)]
pub struct EmbeddingVars {
    pub z: Var,
    pub h: Var,
}

/// Distance input for a variant: full BFS, or BFS cut off at 2 hops.
pub fn make_distance_input(g: &Graph, variant: DistanceVariant) -> DistanceMatrix {
    match variant {
        DistanceVariant::Exact => all_pairs(g),
        DistanceVariant::Fast => all_pairs_limited(g, 2),
    }
}

/// Deterministic anchor draws for one training run.
///
/// Forward `f` of epoch `e` uses a seed mixed from `(run_seed, e, f)`; with
/// resampling off every draw returns the epoch-0 family.
#[derive(Clone, Debug)]
pub struct AnchorSampler {
    n: usize,
    c: f64,
    run_seed: u64,
    resample: bool,
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finaliser
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl AnchorSampler {
    pub fn new(n: usize, cfg: &PgnnConfig, run_seed: u64) -> Self {
        Self {
            n,
            c: cfg.anchor_c,
            run_seed,
            resample: cfg.resample_anchors_per_forward,
        }
    }

    pub fn draw(&self, epoch: u64, forward: u64) -> Result<AnchorFamily> {
        let (epoch, forward) = if self.resample { (epoch, forward) } else { (0, 0) };
        let seed = mix(mix(mix(self.run_seed) ^ epoch) ^ forward.wrapping_mul(0x2545_F491_4F6C_DD1D));
        sample_anchor_family(self.n, self.c, seed)
    }
}

fn input_features(g: &Graph) -> Result<&Matrix> {
    g.features()
        .ok_or_else(|| Error::invalid("model forward needs node features; prepare them first"))
}

/// Records the P-GNN forward pass on `tape`.
///
/// `params` are handles returned by [`PgnnParams::record`]; `dm` is the
/// (possibly truncated) distance input and `fam` the anchor family for this
/// forward.
pub fn pgnn_forward(
    tape: &mut Tape,
    g: &Graph,
    dm: &DistanceMatrix,
    fam: &AnchorFamily,
    params: &[LayerVars],
    cfg: &PgnnConfig,
) -> Result<EmbeddingVars> {
    let x = input_features(g)?;
    if dm.n() != g.n() {
        return Err(Error::invalid(format!(
            "distance matrix is for {} nodes, graph has {}",
            dm.n(),
            g.n()
        )));
    }
    if params.is_empty() {
        return Err(Error::invalid("model has no layers"));
    }
    let plan = MessagePlan::build(dm, fam, cfg.closest_node_agg)?;
    let mut h = tape.constant(x.clone());
    let mut z = None;
    for (l, layer) in params.iter().enumerate() {
        let d = tape.value(h).cols();
        let w_shape = tape.value(layer.w_msg).shape();
        if w_shape.0 != 2 * d {
            return Err(Error::Shape {
                op: "pgnn layer input",
                left: (g.n(), d),
                right: w_shape,
            });
        }
        let m = anchor_messages(tape, h, layer.w_msg, &plan)?;
        if l + 1 == params.len() {
            let scores = tape.matmul(m, layer.w)?;
            let out = tape.reshape(scores, plan.n(), plan.k())?;
            z = Some(if cfg.normalize_output {
                tape.normalize_rows(out)
            } else {
                out
            });
        }
        h = tape.segment_mean(m, plan.anchor_offsets())?;
    }
    Ok(EmbeddingVars {
        z: z.expect("at least one layer"),
        h,
    })
}

/// `(n * k) x r` matrix of per-anchor-set messages `M_v[i]`, `v`-major.
fn anchor_messages(tape: &mut Tape, h: Var, w_msg: Var, plan: &MessagePlan) -> Result<Var> {
    let d = tape.value(h).cols();
    let w_self = tape.gather_rows(w_msg, (0..d).collect())?;
    let w_member = tape.gather_rows(w_msg, (d..2 * d).collect())?;
    // [h_v ; s h_u] W = h_v W_self + s (h_u W_member); both products once per node
    let a = tape.matmul(h, w_self)?;
    let b = tape.matmul(h, w_member)?;
    let msg = tape.pair_message(a, b, plan.target(), plan.member(), plan.similarity())?;
    match plan.message_offsets() {
        Some(offsets) => tape.segment_mean(msg, offsets),
        None => Ok(msg),
    }
}

/// Handles of one layer's parameters on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LayerVars {
    pub w_msg: Var,
    pub w: Var,
}

/// Evaluates the P-GNN without keeping the tape.
pub fn pgnn_embed(
    g: &Graph,
    dm: &DistanceMatrix,
    fam: &AnchorFamily,
    params: &PgnnParams,
    cfg: &PgnnConfig,
) -> Result<Embeddings> {
    let mut tape = Tape::new();
    let vars = params.record(&mut tape);
    let out = pgnn_forward(&mut tape, g, dm, fam, &vars, cfg)?;
    Ok(Embeddings {
        z: tape.value(out.z).clone(),
        h: tape.value(out.h).clone(),
    })
}

/// Row `v` of the result lists `v` followed by its neighbours, with
/// similarities 1 and 1/2.
struct NeighbourPlan {
    member: Arc<[usize]>,
    sim: Matrix,
    offsets: Arc<[usize]>,
}

impl NeighbourPlan {
    fn build(g: &Graph) -> Self {
        let mut member = Vec::with_capacity(g.n() + 2 * g.num_edges());
        let mut sim = Vec::with_capacity(member.capacity());
        let mut offsets = Vec::with_capacity(g.n() + 1);
        offsets.push(0);
        for v in 0..g.n() {
            member.push(v);
            sim.push(1.0);
            for &u in g.neighbors(v) {
                member.push(u);
                sim.push(0.5);
            }
            offsets.push(member.len());
        }
        let rows = sim.len();
        Self {
            member: member.into(),
            sim: Matrix::new(rows, 1, sim).expect("finite similarities"),
            offsets: offsets.into(),
        }
    }
}

/// Records the GCN baseline: `h_v <- relu(W^T mean_{u in {v} + N(v)} h_u / (d(v,u) + 1))`.
pub fn gcn_forward(tape: &mut Tape, g: &Graph, weights: &[Var]) -> Result<Var> {
    let x = input_features(g)?;
    if weights.is_empty() {
        return Err(Error::invalid("model has no layers"));
    }
    let plan = NeighbourPlan::build(g);
    let sim = tape.constant(plan.sim.clone());
    let mut h = tape.constant(x.clone());
    for &w in weights {
        let rows = tape.gather_rows(h, plan.member.clone())?;
        let weighted = tape.scale_rows(rows, sim)?;
        let agg = tape.segment_mean(weighted, plan.offsets.clone())?;
        let lin = tape.matmul(agg, w)?;
        h = tape.relu(lin);
    }
    Ok(h)
}

/// Evaluates the GCN baseline without keeping the tape.
pub fn gcn_embed(g: &Graph, params: &GcnParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let vars = params.record(&mut tape);
    let h = gcn_forward(&mut tape, g, &vars)?;
    Ok(tape.value(h).clone())
}

/// Glorot-uniform initialisation stream for a run.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed ^ 0x1F2E_3D4C_5B6A_7988))
}

#[cfg(test)]
mod tests;
