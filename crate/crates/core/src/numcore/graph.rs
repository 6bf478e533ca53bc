//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation as it is evaluated, so node order is
//! already a topological order. [`Graph::backward`] walks the tape once in
//! reverse and accumulates gradients into every node that needs one.

use rand::Rng;

use super::kernels::{gemm_nn, gemm_nt, gemm_tn};
use super::tensor::{Real, Tensor};
use crate::error::{bail, Result};
use crate::util::rng_for;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddRow(Var, Var),
    Gelu(Var),
    Softmax(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<T>, rstd: Vec<T> },
    Dropout { x: Var, mask: Vec<T> },
    GatherRows { table: Var, ids: Vec<usize> },
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    MaskedMean { x: Var, keep: Vec<bool> },
    Normalize { x: Var, norms: Vec<T> },
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Vec<T> },
    Sum(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Recorded computation. Values are immutable once pushed.
#[derive(Debug, Default)]
pub struct Graph<T: Real = f32> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), grads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Adds an input tensor. Gradients are tracked when `requires_grad`.
    pub fn leaf(&mut self, t: Tensor<T>, requires_grad: bool) -> Var {
        self.push(t, Op::Leaf, requires_grad)
    }

    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, true)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.ng(v)
    }

    /// Accumulated gradient of the last backward pass(es), if any reached `v`.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads[v.0].as_deref()
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn dims2(&self, v: Var) -> (usize, usize) {
        let t = self.value(v);
        (t.rows(), t.cols())
    }

    /// Matrix product `a[m,k] · b[k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a);
        let (k2, n) = self.dims2(b);
        if k != k2 {
            bail!(Shape, "matmul inner dims differ: [{m},{k}] x [{k2},{n}]");
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul(a, b), ng))
    }

    /// Product with a transposed right operand: `a[m,k] · b[n,k]ᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a);
        let (n, k2) = self.dims2(b);
        if k != k2 {
            bail!(Shape, "matmul_t inner dims differ: [{m},{k}] x [{n},{k2}]ᵀ");
        }
        let mut out = vec![T::zero(); m * n];
        gemm_nt(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMulT(a, b), ng))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let (m, n) = self.dims2(x);
        let src = self.value(x).data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        let ng = self.ng(x);
        self.push(Tensor::from_parts(vec![n, m], out), Op::Transpose(x), ng)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            bail!(Shape, "{what}: {:?} vs {:?}", self.value(a).shape(), self.value(b).shape());
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x + y);
        let shape = self.value(a).shape().to_vec();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Add(a, b), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x * y);
        let shape = self.value(a).shape().to_vec();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let s = T::of(s);
        let out = self.value(x).data().iter().map(|&v| v * s).collect();
        let shape = self.value(x).shape().to_vec();
        let ng = self.ng(x);
        self.push(Tensor::from_parts(shape, out), Op::Scale(x, s), ng)
    }

    /// Broadcast-adds a row vector `b[n]` to every row of `x[m,n]`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (m, n) = self.dims2(x);
        if self.value(b).len() != n {
            bail!(Shape, "add_row: bias of {} for {n} columns", self.value(b).len());
        }
        let bias = self.value(b).data();
        let mut out = self.value(x).data().to_vec();
        for i in 0..m {
            for (o, &bv) in out[i * n..(i + 1) * n].iter_mut().zip(bias) {
                *o += bv;
            }
        }
        let shape = self.value(x).shape().to_vec();
        let ng = self.ng(x) || self.ng(b);
        Ok(self.push(Tensor::from_parts(shape, out), Op::AddRow(x, b), ng))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Var {
        let c = T::of(SQRT_2_OVER_PI);
        let k = T::of(GELU_C);
        let half = T::of(0.5);
        let out = self
            .value(x)
            .data()
            .iter()
            .map(|&v| half * v * (T::one() + (c * (v + k * v * v * v)).tanh()))
            .collect();
        let shape = self.value(x).shape().to_vec();
        let ng = self.ng(x);
        self.push(Tensor::from_parts(shape, out), Op::Gelu(x), ng)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let (m, n) = self.dims2(x);
        self.softmax_impl(x, m, n, None)
    }

    /// Row-wise softmax where entries with `keep[i*n+j] == false` get exactly
    /// zero weight, as if their logit were −∞. A row with nothing kept is all zeros.
    pub fn masked_softmax_rows(&mut self, x: Var, keep: &[bool]) -> Result<Var> {
        let (m, n) = self.dims2(x);
        if keep.len() != m * n {
            bail!(Shape, "softmax mask of {} for [{m},{n}]", keep.len());
        }
        Ok(self.softmax_impl(x, m, n, Some(keep)))
    }

    fn softmax_impl(&mut self, x: Var, m: usize, n: usize, keep: Option<&[bool]>) -> Var {
        let src = self.value(x).data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let kept = |j: usize| keep.is_none_or(|k| k[i * n + j]);
            let mut mx = T::neg_infinity();
            for (j, &v) in row.iter().enumerate() {
                if kept(j) && v > mx {
                    mx = v;
                }
            }
            if mx == T::neg_infinity() {
                continue;
            }
            let o = &mut out[i * n..(i + 1) * n];
            let mut sum = T::zero();
            for j in 0..n {
                if kept(j) {
                    let e = (row[j] - mx).exp();
                    o[j] = e;
                    sum += e;
                }
            }
            let inv = T::one() / sum;
            o.iter_mut().for_each(|v| *v *= inv);
        }
        let shape = self.value(x).shape().to_vec();
        let ng = self.ng(x);
        self.push(Tensor::from_parts(shape, out), Op::Softmax(x), ng)
    }

    /// Per-row layer normalization `(x − μ)/√(σ² + eps) · gain + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        if eps <= 0.0 {
            bail!(Usage, "layer_norm eps must be positive, got {eps}");
        }
        let (m, n) = self.dims2(x);
        if self.value(gain).len() != n || self.value(bias).len() != n {
            bail!(Shape, "layer_norm params must have {n} entries");
        }
        let eps = T::of(eps);
        let nf = T::of(n as f64);
        let src = self.value(x).data();
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let mut xhat = vec![T::zero(); m * n];
        let mut rstd = vec![T::zero(); m];
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let mean = row.iter().copied().sum::<T>() / nf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nf;
            let r = T::one() / (var + eps).sqrt();
            rstd[i] = r;
            for j in 0..n {
                let h = (row[j] - mean) * r;
                xhat[i * n + j] = h;
                out[i * n + j] = h * g[j] + b[j];
            }
        }
        let shape = self.value(x).shape().to_vec();
        let ng = self.ng(x) || self.ng(gain) || self.ng(bias);
        Ok(self.push(Tensor::from_parts(shape, out), Op::LayerNorm { x, gain, bias, xhat, rstd }, ng))
    }

    /// Inverted dropout with a mask drawn from `seed`. `p == 0` is the identity.
    pub fn dropout(&mut self, x: Var, p: f64, seed: u64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            bail!(Usage, "dropout probability {p} outside [0,1)");
        }
        let n = self.value(x).len();
        let mask: Vec<T> = if p == 0.0 {
            vec![T::one(); n]
        } else {
            let mut rng = rng_for(seed, &[0xD20]);
            let keep = T::of(1.0 / (1.0 - p));
            (0..n).map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep }).collect()
        };
        let out = zip_map(self.value(x).data(), &mask, |a, b| a * b);
        let shape = self.value(x).shape().to_vec();
        let ng = self.ng(x);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Dropout { x, mask }, ng))
    }

    /// Selects rows of `table` by index (embedding lookup).
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (rows, n) = self.dims2(table);
        if ids.is_empty() {
            bail!(Shape, "gather_rows needs at least one index");
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            bail!(Data, "row index {bad} out of range for table of {rows} rows");
        }
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * n);
        for &i in ids {
            out.extend_from_slice(&src[i * n..(i + 1) * n]);
        }
        let ng = self.ng(table);
        Ok(self.push(
            Tensor::from_parts(vec![ids.len(), n], out),
            Op::GatherRows { table, ids: ids.to_vec() },
            ng,
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let (m, n) = self.dims2(x);
        if width == 0 || start + width > n {
            bail!(Shape, "slice_cols {start}..{} of {n} columns", start + width);
        }
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(m * width);
        for i in 0..m {
            out.extend_from_slice(&src[i * n + start..i * n + start + width]);
        }
        let ng = self.ng(x);
        Ok(self.push(Tensor::from_parts(vec![m, width], out), Op::SliceCols { x, start }, ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else { bail!(Shape, "concat_cols of nothing") };
        let m = self.dims2(first).0;
        if parts.iter().any(|&p| self.dims2(p).0 != m) {
            bail!(Shape, "concat_cols row counts differ");
        }
        let n: usize = parts.iter().map(|&p| self.dims2(p).1).sum();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(i));
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else { bail!(Shape, "concat_rows of nothing") };
        let n = self.dims2(first).1;
        if parts.iter().any(|&p| self.dims2(p).1 != n) {
            bail!(Shape, "concat_rows column counts differ");
        }
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(self.value(p).data());
        }
        let m = out.len() / n;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::ConcatRows(parts.to_vec()), ng))
    }

    /// Mean of the rows of `x[m,n]` where `keep` is set, as a `[1,n]` row.
    pub fn masked_mean_rows(&mut self, x: Var, keep: &[bool]) -> Result<Var> {
        let (m, n) = self.dims2(x);
        if keep.len() != m {
            bail!(Shape, "mean mask of {} for {m} rows", keep.len());
        }
        let count = keep.iter().filter(|&&k| k).count();
        if count == 0 {
            bail!(Usage, "mean pooling over an all-zero mask");
        }
        let src = self.value(x).data();
        let mut out = vec![T::zero(); n];
        for i in (0..m).filter(|&i| keep[i]) {
            for (o, &v) in out.iter_mut().zip(&src[i * n..(i + 1) * n]) {
                *o += v;
            }
        }
        let inv = T::one() / T::of(count as f64);
        out.iter_mut().for_each(|v| *v *= inv);
        let ng = self.ng(x);
        Ok(self.push(Tensor::from_parts(vec![1, n], out), Op::MaskedMean { x, keep: keep.to_vec() }, ng))
    }

    /// Scales every row to unit Euclidean norm.
    pub fn normalize_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.dims2(x);
        let src = self.value(x).data();
        let mut norms = Vec::with_capacity(m);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let norm = row.iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm == T::zero() {
                bail!(Usage, "cannot normalize zero vector (row {i})");
            }
            for j in 0..n {
                out[i * n + j] = row[j] / norm;
            }
            norms.push(norm);
        }
        let shape = self.value(x).shape().to_vec();
        let ng = self.ng(x);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Normalize { x, norms }, ng))
    }

    /// Mean cross-entropy of `logits[m,n]` against one target class per row.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (m, n) = self.dims2(logits);
        if targets.len() != m {
            bail!(Shape, "{} targets for {m} rows", targets.len());
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= n) {
            bail!(Data, "target class {bad} out of range for {n} classes");
        }
        let src = self.value(logits).data();
        let mut probs = vec![T::zero(); m * n];
        let mut total = 0.0f64;
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for j in 0..n {
                let e = (row[j] - mx).exp();
                probs[i * n + j] = e;
                sum += e;
            }
            let inv = T::one() / sum;
            probs[i * n..(i + 1) * n].iter_mut().for_each(|p| *p *= inv);
            total += (sum.ln() + mx - row[targets[i]]).f64();
        }
        let loss = T::of(total / m as f64);
        let ng = self.ng(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy { logits, targets: targets.to_vec(), probs },
            ng,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum::<T>();
        let ng = self.ng(x);
        self.push(Tensor::scalar(s), Op::Sum(x), ng)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let p = self.mul(a, b)?;
        Ok(self.sum(p))
    }

    /// Backpropagates from a scalar loss.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            bail!(Usage, "backward needs a scalar loss, got shape {:?}", self.value(loss).shape());
        }
        self.backward_with(loss, &[T::one()])
    }

    /// Backpropagates an explicit upstream gradient for `output`.
    pub fn backward_with(&mut self, output: Var, upstream: &[T]) -> Result<()> {
        if upstream.len() != self.value(output).len() {
            bail!(Shape, "upstream gradient of {} for {} values", upstream.len(), self.value(output).len());
        }
        if !self.ng(output) {
            return Ok(());
        }
        // Leaf gradients accumulate across passes; intermediate ones are per pass.
        for (node, g) in self.nodes.iter().zip(self.grads.iter_mut()) {
            if !matches!(node.op, Op::Leaf) {
                *g = None;
            }
        }
        add_into(acc(&mut self.grads, output.0, upstream.len()), upstream);
        for i in (0..=output.0).rev() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let Some(g) = self.grads[i].take() else { continue };
            self.propagate(i, &g);
            // Intermediate gradients are kept for inspection.
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &[T]) {
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        let node = &nodes[i];
        let val = |v: Var| &nodes[v.0].value;
        let ng = |v: Var| nodes[v.0].needs_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (val(*a).rows(), val(*a).cols());
                let n = val(*b).cols();
                if ng(*a) {
                    gemm_nt(g, val(*b).data(), acc(grads, a.0, m * k), m, n, k);
                }
                if ng(*b) {
                    gemm_tn(val(*a).data(), g, acc(grads, b.0, k * n), m, k, n);
                }
            }
            Op::MatMulT(a, b) => {
                let (m, k) = (val(*a).rows(), val(*a).cols());
                let n = val(*b).rows();
                if ng(*a) {
                    gemm_nn(g, val(*b).data(), acc(grads, a.0, m * k), m, n, k);
                }
                if ng(*b) {
                    gemm_tn(g, val(*a).data(), acc(grads, b.0, n * k), m, n, k);
                }
            }
            Op::Transpose(x) => {
                let (m, n) = (val(*x).rows(), val(*x).cols());
                let dx = acc(grads, x.0, m * n);
                for r in 0..m {
                    for c in 0..n {
                        dx[r * n + c] += g[c * m + r];
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if ng(*v) {
                        add_into(acc(grads, v.0, g.len()), g);
                    }
                }
            }
            Op::Mul(a, b) => {
                if ng(*a) {
                    let bv = val(*b).data();
                    for ((d, &gv), &y) in acc(grads, a.0, g.len()).iter_mut().zip(g).zip(bv) {
                        *d += gv * y;
                    }
                }
                if ng(*b) {
                    let av = val(*a).data();
                    for ((d, &gv), &x) in acc(grads, b.0, g.len()).iter_mut().zip(g).zip(av) {
                        *d += gv * x;
                    }
                }
            }
            Op::Scale(x, s) => {
                for (d, &gv) in acc(grads, x.0, g.len()).iter_mut().zip(g) {
                    *d += gv * *s;
                }
            }
            Op::AddRow(x, b) => {
                let n = val(*x).cols();
                if ng(*x) {
                    add_into(acc(grads, x.0, g.len()), g);
                }
                if ng(*b) {
                    let db = acc(grads, b.0, n);
                    for row in g.chunks_exact(n) {
                        add_into(db, row);
                    }
                }
            }
            Op::Gelu(x) => {
                let c = T::of(SQRT_2_OVER_PI);
                let k = T::of(GELU_C);
                let half = T::of(0.5);
                let three_k = T::of(3.0 * GELU_C);
                let xv = val(*x).data();
                for ((d, &gv), &v) in acc(grads, x.0, g.len()).iter_mut().zip(g).zip(xv) {
                    let t = (c * (v + k * v * v * v)).tanh();
                    let dt = (T::one() - t * t) * c * (T::one() + three_k * v * v);
                    *d += gv * (half * (T::one() + t) + half * v * dt);
                }
            }
            Op::Softmax(x) => {
                let n = node.value.cols();
                let y = node.value.data();
                let dx = acc(grads, x.0, g.len());
                for (r, (yr, gr)) in y.chunks_exact(n).zip(g.chunks_exact(n)).enumerate() {
                    let s: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    for j in 0..n {
                        dx[r * n + j] += yr[j] * (gr[j] - s);
                    }
                }
            }
            Op::LayerNorm { x, gain, bias, xhat, rstd } => {
                let n = node.value.cols();
                let gv = val(*gain).data();
                if ng(*gain) {
                    let dg = acc(grads, gain.0, n);
                    for (gr, hr) in g.chunks_exact(n).zip(xhat.chunks_exact(n)) {
                        for j in 0..n {
                            dg[j] += gr[j] * hr[j];
                        }
                    }
                }
                if ng(*bias) {
                    let db = acc(grads, bias.0, n);
                    for gr in g.chunks_exact(n) {
                        add_into(db, gr);
                    }
                }
                if ng(*x) {
                    let nf = T::of(n as f64);
                    let dx = acc(grads, x.0, g.len());
                    let mut dh = vec![T::zero(); n];
                    for (r, (gr, hr)) in g.chunks_exact(n).zip(xhat.chunks_exact(n)).enumerate() {
                        for j in 0..n {
                            dh[j] = gr[j] * gv[j];
                        }
                        let mean_dh = dh.iter().copied().sum::<T>() / nf;
                        let mean_dh_h = dh.iter().zip(hr).map(|(&a, &b)| a * b).sum::<T>() / nf;
                        for j in 0..n {
                            dx[r * n + j] += rstd[r] * (dh[j] - mean_dh - hr[j] * mean_dh_h);
                        }
                    }
                }
            }
            Op::Dropout { x, mask } => {
                for ((d, &gv), &mk) in acc(grads, x.0, g.len()).iter_mut().zip(g).zip(mask) {
                    *d += gv * mk;
                }
            }
            Op::GatherRows { table, ids } => {
                let n = node.value.cols();
                let dt = acc(grads, table.0, val(*table).len());
                for (r, &id) in ids.iter().enumerate() {
                    add_into(&mut dt[id * n..(id + 1) * n], &g[r * n..(r + 1) * n]);
                }
            }
            Op::SliceCols { x, start } => {
                let w = node.value.cols();
                let n = val(*x).cols();
                let dx = acc(grads, x.0, val(*x).len());
                for (r, gr) in g.chunks_exact(w).enumerate() {
                    add_into(&mut dx[r * n + start..r * n + start + w], gr);
                }
            }
            Op::ConcatCols(parts) => {
                let n = node.value.cols();
                let mut off = 0;
                for p in parts {
                    let w = val(*p).cols();
                    if ng(*p) {
                        let dp = acc(grads, p.0, val(*p).len());
                        for (r, gr) in g.chunks_exact(n).enumerate() {
                            add_into(&mut dp[r * w..(r + 1) * w], &gr[off..off + w]);
                        }
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = val(*p).len();
                    if ng(*p) {
                        add_into(acc(grads, p.0, len), &g[off..off + len]);
                    }
                    off += len;
                }
            }
            Op::MaskedMean { x, keep } => {
                let n = node.value.cols();
                let inv = T::one() / T::of(keep.iter().filter(|&&k| k).count() as f64);
                let dx = acc(grads, x.0, val(*x).len());
                for (r, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
                    for j in 0..n {
                        dx[r * n + j] += g[j] * inv;
                    }
                }
            }
            Op::Normalize { x, norms } => {
                let n = node.value.cols();
                let y = node.value.data();
                let dx = acc(grads, x.0, g.len());
                for (r, (yr, gr)) in y.chunks_exact(n).zip(g.chunks_exact(n)).enumerate() {
                    let s: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    for j in 0..n {
                        dx[r * n + j] += (gr[j] - yr[j] * s) / norms[r];
                    }
                }
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let n = val(*logits).cols();
                let scale = g[0] / T::of(targets.len() as f64);
                let dl = acc(grads, logits.0, probs.len());
                for (r, &t) in targets.iter().enumerate() {
                    for j in 0..n {
                        dl[r * n + j] += probs[r * n + j] * scale;
                    }
                    dl[r * n + t] -= scale;
                }
            }
            Op::Sum(x) => {
                let g0 = g[0];
                for d in acc(grads, x.0, val(*x).len()).iter_mut() {
                    *d += g0;
                }
            }
        }
    }
}

fn acc<T: Real>(grads: &mut [Option<Vec<T>>], idx: usize, len: usize) -> &mut Vec<T> {
    grads[idx].get_or_insert_with(|| vec![T::zero(); len])
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn zip_map<T: Real>(a: &[T], b: &[T], f: impl Fn(T, T) -> T) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}
