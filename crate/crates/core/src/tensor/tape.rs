use std::sync::Arc;

use super::Matrix;
use crate::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    ScaleRows(Var, Var),
    ConcatCols(Var, Var),
    RowMean(Var),
    RowSum(Var),
    SumAll(Var),
    SegmentMean(Var, Arc<[usize]>),
    GatherRows(Var, Arc<[usize]>),
    Reshape(Var),
    Relu(Var),
    Sigmoid(Var),
    BceWithLogits(Var, Arc<[f64]>),
    PairMessage(Arc<PairIndex>),
    NormalizeRows(Var),
}

/// Row pairing of a [`Tape::pair_message`] op.
#[derive(Debug)]
struct PairIndex {
    a: Var,
    b: Var,
    left: Arc<[usize]>,
    right: Arc<[usize]>,
    scale: Arc<[f64]>,
}

impl Op {
    fn inputs(&self) -> (Option<Var>, Option<Var>) {
        use Op::*;
        match *self {
            Constant | Param => (None, None),
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Hadamard(a, b) | ScaleRows(a, b) | ConcatCols(a, b) => {
                (Some(a), Some(b))
            }
            RowMean(a)
            | RowSum(a)
            | SumAll(a)
            | SegmentMean(a, _)
            | GatherRows(a, _)
            | Reshape(a)
            | Relu(a)
            | Sigmoid(a)
            | BceWithLogits(a, _) => (Some(a), None),
            PairMessage(ref p) => (Some(p.a), Some(p.b)),
            NormalizeRows(a) => (Some(a), None),
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    /// Whether some parameter feeds this node.
    needs_grad: bool,
}

/// Append-only record of matrix operations.
///
/// Every op takes `Var`s that were returned earlier by the same tape, so the
/// recorded graph is acyclic and already in topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every parameter on the tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    params: Vec<(Var, Matrix)>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.params
            .binary_search_by_key(&var, |(v, _)| *v)
            .ok()
            .map(|i| &self.params[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Matrix)> {
        self.params.iter().map(|(v, m)| (*v, m))
    }
}

fn shape_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::Shape {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Keeps [`Tape::normalize_rows`] smooth at the zero row.
pub const NORM_EPS: f64 = 1e-12;

/// Biased exponent (subnormals read as 1) and integer significand.
fn split_f64(x: f64) -> (i32, u64) {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1 << 52) - 1);
    if exp == 0 {
        (1, frac)
    } else {
        (exp, frac | (1 << 52))
    }
}

fn pow2(p: i32) -> f64 {
    f64::from_bits(((p + 1023) as u64) << 52)
}

/// Per-column sums of a row-major block that depend only on the multiset
/// of each column's values, never on row order.
///
/// Each value is moved onto a fixed-point grid set by its column's largest
/// exponent, the integers are summed exactly in `i128` and the total is
/// rounded to `f64` once. Columns holding a non-finite value are summed
/// directly.
struct ColumnSums {
    max_exp: Vec<i32>,
    acc: Vec<i128>,
}

impl ColumnSums {
    fn new(cols: usize) -> Self {
        Self {
            max_exp: vec![0; cols],
            acc: vec![0; cols],
        }
    }

    fn sum(&mut self, block: &[f64], out: &mut [f64]) {
        let cols = out.len();
        let rows = block.len() / cols;
        if rows <= 2 {
            // a + b is commutative, so this is order-free as well
            out.fill(0.0);
            for row in block.chunks_exact(cols) {
                out.iter_mut().zip(row).for_each(|(o, x)| *o += x);
            }
            return;
        }
        // leaves room for the carries of `rows` terms below 2^126
        let shift = 126 - 53 - (usize::BITS - rows.leading_zeros()) as i32;
        self.max_exp.fill(0);
        for row in block.chunks_exact(cols) {
            for (m, &x) in self.max_exp.iter_mut().zip(row) {
                *m = (*m).max(split_f64(x).0);
            }
        }
        self.acc.fill(0);
        for row in block.chunks_exact(cols) {
            for ((a, &m), &x) in self.acc.iter_mut().zip(&self.max_exp).zip(row) {
                let (e, sig) = split_f64(x);
                let k = e - m + shift;
                let v = match k {
                    0.. => i128::from(sig) << k,
                    -127..0 => i128::from(sig) >> -k,
                    _ => 0,
                };
                *a += if x.is_sign_negative() { -v } else { v };
            }
        }
        for (c, o) in out.iter_mut().enumerate() {
            let m = self.max_exp[c];
            *o = if m == 0x7ff {
                block.chunks_exact(cols).map(|row| row[c]).sum()
            } else {
                // value = acc * 2^(m - 1075 - shift), scaled in two exact halves
                let p = m - 1075 - shift;
                self.acc[c] as f64 * pow2(p / 2) * pow2(p - p / 2)
            };
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let needs_grad = match op.inputs() {
            _ if matches!(op, Op::Param) => true,
            (a, b) => [a, b].into_iter().flatten().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Records a value that receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant)
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Param)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(op, x, y));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("hadamard", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Hadamard(a, b)))
    }

    /// Multiplies row `i` of `a` by `s[i]`; `s` is a column vector.
    pub fn scale_rows(&mut self, a: Var, s: Var) -> Result<Var> {
        let (x, sv) = (self.value(a), self.value(s));
        if sv.cols() != 1 || sv.rows() != x.rows() {
            return Err(shape_err("scale_rows", x, sv));
        }
        let cols = x.cols();
        let mut out = x.data().to_vec();
        if cols > 0 {
            for (row, &f) in out.chunks_mut(cols).zip(sv.data()) {
                row.iter_mut().for_each(|v| *v *= f);
            }
        }
        let out = Matrix::from_raw(x.rows(), cols, out);
        Ok(self.push(out, Op::ScaleRows(a, s)))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).hconcat(self.value(b))?;
        Ok(self.push(out, Op::ConcatCols(a, b)))
    }

    /// Mean over rows, giving a `1 x cols` row vector.
    pub fn row_mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.rows() == 0 {
            return Err(Error::invalid("row_mean of a matrix with no rows"));
        }
        let mut out = vec![0.0; x.cols()];
        for r in 0..x.rows() {
            for (o, v) in out.iter_mut().zip(x.row(r)) {
                *o += v;
            }
        }
        let inv = 1.0 / x.rows() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        let out = Matrix::from_raw(1, x.cols(), out);
        Ok(self.push(out, Op::RowMean(a)))
    }

    /// Sum of each row, giving a `rows x 1` column vector.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let out: Vec<f64> = (0..x.rows()).map(|r| x.row(r).iter().sum()).collect();
        let out = Matrix::from_raw(x.rows(), 1, out);
        Ok(self.push(out, Op::RowSum(a)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let total = self.value(a).data().iter().sum();
        Ok(self.push(Matrix::from_raw(1, 1, vec![total]), Op::SumAll(a)))
    }

    /// Means of contiguous row segments `offsets[s]..offsets[s + 1]`.
    ///
    /// Empty segments produce a zero row. Each column sum is accumulated
    /// exactly and rounded once, so the result is bit-identical under any
    /// reordering of the rows inside a segment.
    pub fn segment_mean(&mut self, a: Var, offsets: Arc<[usize]>) -> Result<Var> {
        let x = self.value(a);
        if offsets.is_empty()
            || offsets[0] != 0
            || *offsets.last().unwrap() != x.rows()
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::invalid(format!(
                "segment offsets must rise from 0 to {} rows",
                x.rows()
            )));
        }
        let cols = x.cols();
        let segments = offsets.len() - 1;
        let mut out = vec![0.0; segments * cols];
        if cols > 0 {
            let mut sums = ColumnSums::new(cols);
            for (s, dst) in out.chunks_exact_mut(cols).enumerate() {
                let (lo, hi) = (offsets[s], offsets[s + 1]);
                if lo == hi {
                    continue;
                }
                sums.sum(&x.data()[lo * cols..hi * cols], dst);
                let inv = 1.0 / (hi - lo) as f64;
                dst.iter_mut().for_each(|v| *v *= inv);
            }
        }
        let out = Matrix::from_raw(segments, cols, out);
        Ok(self.push(out, Op::SegmentMean(a, offsets)))
    }

    /// Row `r` is `relu(a[left[r]] + scale[r] * b[right[r]])`, or zero where
    /// `scale[r] == 0`.
    ///
    /// Equal to gathering, scaling, adding and masking with the separate
    /// ops, without materialising the intermediates.
    pub fn pair_message(
        &mut self,
        a: Var,
        b: Var,
        left: Arc<[usize]>,
        right: Arc<[usize]>,
        scale: Arc<[f64]>,
    ) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() {
            return Err(shape_err("pair_message", av, bv));
        }
        if left.len() != right.len() || left.len() != scale.len() {
            return Err(Error::invalid(format!(
                "pair_message index lengths differ: {}, {}, {}",
                left.len(),
                right.len(),
                scale.len()
            )));
        }
        if left.iter().any(|&i| i >= av.rows()) || right.iter().any(|&i| i >= bv.rows()) {
            return Err(Error::invalid("pair_message index out of range"));
        }
        if scale.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("pair_message scales must be finite"));
        }
        let cols = av.cols();
        let mut out = vec![0.0; left.len() * cols];
        if cols > 0 {
            for (r, dst) in out.chunks_exact_mut(cols).enumerate() {
                let s = scale[r];
                if s == 0.0 {
                    continue;
                }
                let (x, y) = (av.row(left[r]), bv.row(right[r]));
                for ((d, &xi), &yi) in dst.iter_mut().zip(x).zip(y) {
                    *d = (xi + s * yi).max(0.0);
                }
            }
        }
        let out = Matrix::from_raw(left.len(), cols, out);
        let index = PairIndex {
            a,
            b,
            left,
            right,
            scale,
        };
        Ok(self.push(out, Op::PairMessage(Arc::new(index))))
    }

    /// Each row divided by `sqrt(|row|^2 + NORM_EPS)`; zero rows stay zero.
    pub fn normalize_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let cols = x.cols();
        let mut out = x.data().to_vec();
        if cols > 0 {
            for row in out.chunks_exact_mut(cols) {
                let inv = 1.0 / (row.iter().map(|v| v * v).sum::<f64>() + NORM_EPS).sqrt();
                row.iter_mut().for_each(|v| *v *= inv);
            }
        }
        let out = Matrix::from_raw(x.rows(), cols, out);
        self.push(out, Op::NormalizeRows(a))
    }

    /// Row `r` of the output is row `index[r]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::invalid(format!(
                "gather_rows index {bad} out of range for {} rows",
                x.rows()
            )));
        }
        let cols = x.cols();
        let mut out = Vec::with_capacity(index.len() * cols);
        for &i in index.iter() {
            out.extend_from_slice(x.row(i));
        }
        let out = Matrix::from_raw(index.len(), cols, out);
        Ok(self.push(out, Op::GatherRows(a, index)))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let x = self.value(a);
        if rows * cols != x.len() {
            return Err(Error::Shape {
                op: "reshape",
                left: x.shape(),
                right: (rows, cols),
            });
        }
        let out = x.reshaped(rows, cols);
        Ok(self.push(out, Op::Reshape(a)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    /// Mean binary cross-entropy of `logits` (any vector shape) against 0/1
    /// `targets`, as a `1 x 1` node.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Arc<[f64]>) -> Result<Var> {
        let x = self.value(logits);
        if x.rows() != 1 && x.cols() != 1 {
            return Err(Error::Shape {
                op: "bce_with_logits",
                left: x.shape(),
                right: (targets.len(), 1),
            });
        }
        if x.len() != targets.len() {
            return Err(Error::Shape {
                op: "bce_with_logits",
                left: x.shape(),
                right: (targets.len(), 1),
            });
        }
        if x.is_empty() {
            return Err(Error::invalid("bce_with_logits over zero entries"));
        }
        if targets.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::invalid("bce targets must be 0 or 1"));
        }
        let total: f64 = x
            .data()
            .iter()
            .zip(targets.iter())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum();
        let out = Matrix::from_raw(1, 1, vec![total / x.len() as f64]);
        Ok(self.push(out, Op::BceWithLogits(logits, targets)))
    }

    /// Reverse accumulation from the scalar `loss`.
    ///
    /// The tape itself is not modified, so repeated calls return identical
    /// gradients. Parameters that do not influence `loss` get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let out = self.value(loss);
        if out.shape() != (1, 1) {
            return Err(Error::invalid(format!(
                "backward needs a 1x1 terminal, got {:?}",
                out.shape()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::from_raw(1, 1, vec![1.0]));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }

        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.op, Op::Param))
            .map(|(i, n)| {
                let g = grads
                    .get_mut(i)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Matrix::zeros(n.value.rows(), n.value.cols()));
                (Var(i), g)
            })
            .collect();
        Ok(Gradients { params })
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        let acc = |grads: &mut [Option<Matrix>], v: Var, m: Matrix| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&m),
            slot @ None => *slot = Some(m),
        };
        // gradients are only built for inputs that lead back to a parameter
        let wants = |v: &Var| self.nodes[v.0].needs_grad;
        match &node.op {
            Op::Constant | Op::Param => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if wants(a) {
                    acc(grads, *a, g.matmul(&bv.transpose()).expect("matmul grad shape"));
                }
                if wants(b) {
                    acc(grads, *b, av.transpose().matmul(g).expect("matmul grad shape"));
                }
            }
            Op::Add(a, b) => {
                if wants(a) {
                    acc(grads, *a, g.clone());
                }
                if wants(b) {
                    acc(grads, *b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if wants(a) {
                    acc(grads, *a, g.clone());
                }
                if wants(b) {
                    acc(grads, *b, g.map(|x| -x));
                }
            }
            Op::Hadamard(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if wants(a) {
                    acc(grads, *a, g.zip_map(bv, |x, y| x * y));
                }
                if wants(b) {
                    acc(grads, *b, g.zip_map(av, |x, y| x * y));
                }
            }
            Op::ScaleRows(a, s) => {
                let (av, sv) = (self.value(*a), self.value(*s));
                let cols = av.cols();
                if wants(a) {
                    let mut da = g.data().to_vec();
                    if cols > 0 {
                        for (row, &f) in da.chunks_mut(cols).zip(sv.data()) {
                            row.iter_mut().for_each(|x| *x *= f);
                        }
                    }
                    acc(grads, *a, Matrix::from_raw(av.rows(), cols, da));
                }
                if wants(s) {
                    let ds = (0..av.rows())
                        .map(|r| g.row(r).iter().zip(av.row(r)).map(|(gi, ai)| gi * ai).sum())
                        .collect();
                    acc(grads, *s, Matrix::from_raw(av.rows(), 1, ds));
                }
            }
            Op::ConcatCols(a, b) => {
                let (ac, bc) = (self.value(*a).cols(), self.value(*b).cols());
                let rows = g.rows();
                let mut da = Vec::with_capacity(rows * ac);
                let mut db = Vec::with_capacity(rows * bc);
                for r in 0..rows {
                    let row = g.row(r);
                    da.extend_from_slice(&row[..ac]);
                    db.extend_from_slice(&row[ac..]);
                }
                if wants(a) {
                    acc(grads, *a, Matrix::from_raw(rows, ac, da));
                }
                if wants(b) {
                    acc(grads, *b, Matrix::from_raw(rows, bc, db));
                }
            }
            Op::RowMean(a) => {
                let av = self.value(*a);
                let inv = 1.0 / av.rows() as f64;
                let row: Vec<f64> = g.data().iter().map(|x| x * inv).collect();
                let data = row.repeat(av.rows());
                if wants(a) {
                    acc(grads, *a, Matrix::from_raw(av.rows(), av.cols(), data));
                }
            }
            Op::RowSum(a) => {
                let av = self.value(*a);
                let mut data = Vec::with_capacity(av.len());
                for &gi in g.data() {
                    data.extend(std::iter::repeat_n(gi, av.cols()));
                }
                if wants(a) {
                    acc(grads, *a, Matrix::from_raw(av.rows(), av.cols(), data));
                }
            }
            Op::SumAll(a) => {
                let av = self.value(*a);
                let data = vec![g.data()[0]; av.len()];
                if wants(a) {
                    acc(grads, *a, Matrix::from_raw(av.rows(), av.cols(), data));
                }
            }
            Op::SegmentMean(a, offsets) => {
                let av = self.value(*a);
                let cols = av.cols();
                let mut data = vec![0.0; av.len()];
                for s in 0..offsets.len() - 1 {
                    let (lo, hi) = (offsets[s], offsets[s + 1]);
                    if lo == hi {
                        continue;
                    }
                    let inv = 1.0 / (hi - lo) as f64;
                    let src = g.row(s);
                    for r in lo..hi {
                        for (d, v) in data[r * cols..(r + 1) * cols].iter_mut().zip(src) {
                            *d = v * inv;
                        }
                    }
                }
                if wants(a) {
                    acc(grads, *a, Matrix::from_raw(av.rows(), cols, data));
                }
            }
            Op::PairMessage(p) => {
                let out = &node.value;
                let cols = out.cols();
                let (ar, br) = (self.value(p.a).rows(), self.value(p.b).rows());
                let mut da = wants(&p.a).then(|| vec![0.0; ar * cols]);
                let mut db = wants(&p.b).then(|| vec![0.0; br * cols]);
                for r in 0..p.left.len() {
                    let s = p.scale[r];
                    if s == 0.0 {
                        continue;
                    }
                    let (l, rt) = (p.left[r] * cols, p.right[r] * cols);
                    for (c, (&gi, &o)) in g.row(r).iter().zip(out.row(r)).enumerate() {
                        if o > 0.0 {
                            if let Some(da) = da.as_mut() {
                                da[l + c] += gi;
                            }
                            if let Some(db) = db.as_mut() {
                                db[rt + c] += s * gi;
                            }
                        }
                    }
                }
                if let Some(da) = da {
                    acc(grads, p.a, Matrix::from_raw(ar, cols, da));
                }
                if let Some(db) = db {
                    acc(grads, p.b, Matrix::from_raw(br, cols, db));
                }
            }
            Op::NormalizeRows(a) => {
                if wants(a) {
                    let (av, y) = (self.value(*a), &node.value);
                    let cols = av.cols();
                    let mut data = vec![0.0; av.len()];
                    if cols > 0 {
                        for (r, dst) in data.chunks_exact_mut(cols).enumerate() {
                            // dx = (g - y (y . g)) / n, with n the row's norm
                            let (x, yr, gr) = (av.row(r), y.row(r), g.row(r));
                            let n = (x.iter().map(|v| v * v).sum::<f64>() + NORM_EPS).sqrt();
                            let yg: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                            for ((d, &gi), &yi) in dst.iter_mut().zip(gr).zip(yr) {
                                *d = (gi - yi * yg) / n;
                            }
                        }
                    }
                    acc(grads, *a, Matrix::from_raw(av.rows(), cols, data));
                }
            }
            Op::GatherRows(a, index) => {
                let av = self.value(*a);
                let cols = av.cols();
                let mut data = vec![0.0; av.len()];
                for (r, &i) in index.iter().enumerate() {
                    for (d, v) in data[i * cols..(i + 1) * cols].iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                if wants(a) {
                    acc(grads, *a, Matrix::from_raw(av.rows(), cols, data));
                }
            }
            Op::Reshape(a) => {
                let av = self.value(*a);
                if wants(a) {
                    acc(grads, *a, g.reshaped(av.rows(), av.cols()));
                }
            }
            Op::Relu(a) => {
                let av = self.value(*a);
                if wants(a) {
                    acc(grads, *a, g.zip_map(av, |gi, x| if x > 0.0 { gi } else { 0.0 }));
                }
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                if wants(a) {
                    acc(grads, *a, g.zip_map(y, |gi, yi| gi * yi * (1.0 - yi)));
                }
            }
            Op::BceWithLogits(a, targets) => {
                let av = self.value(*a);
                let scale = g.data()[0] / av.len() as f64;
                let data = av
                    .data()
                    .iter()
                    .zip(targets.iter())
                    .map(|(&z, &y)| (sigmoid(z) - y) * scale)
                    .collect();
                if wants(a) {
                    acc(grads, *a, Matrix::from_raw(av.rows(), av.cols(), data));
                }
            }
        }
    }
}
