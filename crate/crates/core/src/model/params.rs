use rand::Rng;

use super::{LayerVars, PgnnConfig};
use crate::tensor::{Matrix, Tape, Var};
use crate::{Error, Result};

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound)).expect("finite init")
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    /// `(2 * d_in) x r`; the top `d_in` rows act on `h_v`, the rest on `h_u`.
    pub w_msg: Matrix,
    /// `r x 1` projection of anchor messages to one score per set.
    pub w: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgnnParams {
    pub layers: Vec<LayerParams>,
}

impl PgnnParams {
    pub fn init(d_in: usize, cfg: &PgnnConfig, rng: &mut impl Rng) -> Self {
        let r = cfg.message_dim;
        let mut d = d_in;
        let layers = (0..cfg.layers)
            .map(|_| {
                let layer = LayerParams {
                    w_msg: glorot(2 * d, r, rng),
                    w: glorot(r, 1, rng),
                };
                d = r;
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn record(&self, tape: &mut Tape) -> Vec<LayerVars> {
        self.layers
            .iter()
            .map(|l| LayerVars {
                w_msg: tape.param(l.w_msg.clone()),
                w: tape.param(l.w.clone()),
            })
            .collect()
    }

    /// `[w_msg_1, w_1, w_msg_2, w_2, ...]`.
    pub fn to_matrices(&self) -> Vec<Matrix> {
        self.layers
            .iter()
            .flat_map(|l| [l.w_msg.clone(), l.w.clone()])
            .collect()
    }

    pub fn from_matrices(mats: Vec<Matrix>) -> Result<Self> {
        if mats.is_empty() || !mats.len().is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "expected w_msg/w pairs, got {} matrices",
                mats.len()
            )));
        }
        let mut layers = Vec::with_capacity(mats.len() / 2);
        let mut it = mats.into_iter();
        while let (Some(w_msg), Some(w)) = (it.next(), it.next()) {
            if w.shape() != (w_msg.cols(), 1) || w_msg.rows() % 2 != 0 {
                return Err(Error::Shape {
                    op: "pgnn params",
                    left: w_msg.shape(),
                    right: w.shape(),
                });
            }
            if let Some(prev) = layers.last() {
                let prev: &LayerParams = prev;
                if w_msg.rows() != 2 * prev.w_msg.cols() {
                    return Err(Error::Shape {
                        op: "pgnn layer chain",
                        left: prev.w_msg.shape(),
                        right: w_msg.shape(),
                    });
                }
            }
            layers.push(LayerParams { w_msg, w });
        }
        Ok(Self { layers })
    }
}

/// One `d_l x r` weight per GCN layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams {
    pub weights: Vec<Matrix>,
}

impl GcnParams {
    pub fn init(d_in: usize, hidden: usize, layers: usize, rng: &mut impl Rng) -> Self {
        let mut d = d_in;
        let weights = (0..layers)
            .map(|_| {
                let w = glorot(d, hidden, rng);
                d = hidden;
                w
            })
            .collect();
        Self { weights }
    }

    pub fn record(&self, tape: &mut Tape) -> Vec<Var> {
        self.weights.iter().map(|w| tape.param(w.clone())).collect()
    }

    pub fn from_matrices(weights: Vec<Matrix>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("gcn needs at least one weight matrix"));
        }
        for pair in weights.windows(2) {
            if pair[0].cols() != pair[1].rows() {
                return Err(Error::Shape {
                    op: "gcn layer chain",
                    left: pair[0].shape(),
                    right: pair[1].shape(),
                });
            }
        }
        Ok(Self { weights })
    }
}
