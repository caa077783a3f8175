//! Binary parameter checkpoints.
//!
//! All integers are little-endian. Layout:
//!
//! ```text
//! 0   8 bytes   magic "PGNNCKPT"
//! 8   u32       format version (1)
//! 12  u32       model kind: 0 = P-GNN, 1 = GCN
//! 16  u64       seed of the repeat the weights come from
//! 24  u64       matrix count m
//! 32  m x (u64 rows, u64 cols)
//!     for each matrix in order: rows * cols f64 (IEEE 754 bits), row-major
//!     u64       anchor set count k (0 for GCN)
//!     k x (u64 len, len x u64 node id)
//! ```
//!
//! Trailing bytes are rejected.

use crate::metric::AnchorFamily;
use crate::model::{GcnParams, PgnnParams};
use crate::tensor::Matrix;
use crate::train::ModelParams;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PGNNCKPT";
pub const VERSION: u32 = 1;

const KIND_PGNN: u32 = 0;
const KIND_GCN: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub params: ModelParams,
    pub anchors: Option<Vec<Vec<usize>>>,
}

impl Checkpoint {
    pub fn new(seed: u64, params: ModelParams, anchors: Option<&AnchorFamily>) -> Self {
        Self {
            seed,
            params,
            anchors: anchors.map(|f| f.sets().to_vec()),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mats = self.params.to_matrices();
        let kind = match self.params {
            ModelParams::Pgnn(_) => KIND_PGNN,
            ModelParams::Gcn(_) => KIND_GCN,
        };
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&kind.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(mats.len() as u64).to_le_bytes());
        for m in &mats {
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        }
        for m in &mats {
            for x in m.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let sets = self.anchors.as_deref().unwrap_or(&[]);
        out.extend_from_slice(&(sets.len() as u64).to_le_bytes());
        for set in sets {
            out.extend_from_slice(&(set.len() as u64).to_le_bytes());
            for &v in set {
                out.extend_from_slice(&(v as u64).to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("missing PGNNCKPT magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let kind = r.u32()?;
        let seed = r.u64()?;
        let count = r.len()?;
        let shapes: Vec<(usize, usize)> = (0..count).map(|_| Ok((r.len()?, r.len()?))).collect::<Result<_>>()?;
        let mut mats = Vec::with_capacity(count);
        for (rows, cols) in shapes {
            let len = rows.checked_mul(cols).ok_or_else(|| bad("matrix too large"))?;
            let data = (0..len)
                .map(|_| Ok(f64::from_le_bytes(r.take(8)?.try_into().unwrap())))
                .collect::<Result<Vec<_>>>()?;
            mats.push(Matrix::new(rows, cols, data)?);
        }
        let k = r.len()?;
        let mut sets = Vec::with_capacity(k.min(1 << 16));
        for _ in 0..k {
            let len = r.len()?;
            sets.push((0..len).map(|_| r.len()).collect::<Result<Vec<_>>>()?);
        }
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let (params, anchors) = match kind {
            KIND_PGNN => (ModelParams::Pgnn(PgnnParams::from_matrices(mats)?), Some(sets)),
            KIND_GCN if k == 0 => (ModelParams::Gcn(GcnParams::from_matrices(mats)?), None),
            KIND_GCN => return Err(bad("GCN checkpoint carries anchor sets")),
            other => return Err(bad(format!("unknown model kind {other}"))),
        };
        Ok(Self { seed, params, anchors })
    }
}

fn bad(msg: impl std::fmt::Display) -> Error {
    Error::invalid(format!("checkpoint: {msg}"))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| bad(format!("length {v} does not fit")))
    }
}
