//! Define-by-run reverse-mode tape over dense real arrays.
//!
//! Every node owns a contiguous slice of one value arena, so inputs always
//! live at lower arena offsets than their consumers. Backward walks the
//! nodes in reverse and splits the gradient arena at the current node,
//! which lets adjoint rules read the output gradient and accumulate into
//! input gradients without copies.

use crate::error::{Error, Result};

/// Handle to a tape node with a fixed `rows × cols` shape. Vectors are
/// column vectors (`n × 1`) and scalars are `1 × 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    id: u32,
    rows: u32,
    cols: u32,
}

impl Var {
    pub fn id(&self) -> usize {
        self.id as usize
    }

    pub fn rows(&self) -> usize {
        self.rows as usize
    }

    pub fn cols(&self) -> usize {
        self.cols as usize
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Param { offset: usize },
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    MatMul(u32, u32),
    Tanh(u32),
    Sigmoid(u32),
    Sqrt(u32),
    Recip(u32),
    Concat(u32, u32),
    Slice(u32, u32),
    Gather(u32, u32),
    Sum(u32),
    Dot(u32, u32),
    Scale(u32, f64),
    AddConst(u32),
    MulScalar(u32, u32),
    Transpose(u32),
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    off: usize,
    rows: u32,
    cols: u32,
}

impl Node {
    fn len(&self) -> usize {
        (self.rows * self.cols) as usize
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    vals: Vec<f64>,
    indices: Vec<u32>,
    grads: Vec<f64>,
    n_params: usize,
}

impl Tape {
    /// A tape whose gradients are reported over a flat parameter vector of
    /// length `n_params`.
    pub fn new(n_params: usize) -> Self {
        Tape { n_params, ..Default::default() }
    }

    /// Empties the tape, keeping its allocations.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.vals.clear();
        self.indices.clear();
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        let n = &self.nodes[v.id()];
        &self.vals[n.off..n.off + n.len()]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert!(v.is_scalar());
        self.value(v)[0]
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.id()]
    }

    /// Appends a node of the given shape and lets `fill` write its value from
    /// the arena below it.
    fn push<F>(&mut self, op: Op, rows: usize, cols: usize, fill: F) -> Var
    where
        F: FnOnce(&[f64], &mut [f64]),
    {
        let off = self.vals.len();
        self.vals.resize(off + rows * cols, 0.0);
        let (src, dst) = self.vals.split_at_mut(off);
        fill(src, dst);
        let id = self.nodes.len() as u32;
        self.nodes.push(Node { op, off, rows: rows as u32, cols: cols as u32 });
        Var { id, rows: rows as u32, cols: cols as u32 }
    }

    fn range(&self, v: Var) -> std::ops::Range<usize> {
        let n = self.node(v);
        n.off..n.off + n.len()
    }

    /// Constant input; receives no gradient.
    pub fn constant(&mut self, values: &[f64], rows: usize, cols: usize) -> Result<Var> {
        check(values.len() == rows * cols, || format!("constant of {} values is not {rows}x{cols}", values.len()))?;
        Ok(self.push(Op::Leaf, rows, cols, |_, dst| dst.copy_from_slice(values)))
    }

    pub fn constant_vec(&mut self, values: &[f64]) -> Var {
        self.push(Op::Leaf, values.len(), 1, |_, dst| dst.copy_from_slice(values))
    }

    pub fn constant_scalar(&mut self, value: f64) -> Var {
        self.push(Op::Leaf, 1, 1, |_, dst| dst[0] = value)
    }

    /// Trainable block occupying `params[offset .. offset + rows*cols]` of the
    /// flat parameter vector.
    pub fn param(&mut self, offset: usize, rows: usize, cols: usize, values: &[f64]) -> Result<Var> {
        check(values.len() == rows * cols, || format!("parameter block of {} values is not {rows}x{cols}", values.len()))?;
        check(offset + values.len() <= self.n_params, || {
            format!("parameter block at {offset}+{} exceeds registry of {}", values.len(), self.n_params)
        })?;
        Ok(self.push(Op::Param { offset }, rows, cols, |_, dst| dst.copy_from_slice(values)))
    }

    fn same_shape(a: Var, b: Var, what: &str) -> Result<()> {
        check(a.rows == b.rows && a.cols == b.cols, || {
            format!("{what}: {}x{} vs {}x{}", a.rows, a.cols, b.rows, b.cols)
        })
    }

    fn zip(&mut self, op: Op, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Var {
        let (ra, rb) = (self.range(a), self.range(b));
        self.push(op, a.rows(), a.cols(), |src, dst| {
            for ((d, x), y) in dst.iter_mut().zip(&src[ra]).zip(&src[rb]) {
                *d = f(*x, *y);
            }
        })
    }

    fn map(&mut self, op: Op, a: Var, f: impl Fn(f64) -> f64) -> Var {
        let ra = self.range(a);
        self.push(op, a.rows(), a.cols(), |src, dst| {
            for (d, x) in dst.iter_mut().zip(&src[ra]) {
                *d = f(*x);
            }
        })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        Self::same_shape(a, b, "add")?;
        Ok(self.zip(Op::Add(a.id, b.id), a, b, |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        Self::same_shape(a, b, "sub")?;
        Ok(self.zip(Op::Sub(a.id, b.id), a, b, |x, y| x - y))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        Self::same_shape(a, b, "mul")?;
        Ok(self.zip(Op::Mul(a.id, b.id), a, b, |x, y| x * y))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        check(a.cols == b.rows, || format!("matmul: {}x{} by {}x{}", a.rows, a.cols, b.rows, b.cols))?;
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let (ra, rb) = (self.range(a), self.range(b));
        Ok(self.push(Op::MatMul(a.id, b.id), m, n, |src, dst| {
            let (av, bv) = (&src[ra], &src[rb]);
            if n == 1 {
                for (i, d) in dst.iter_mut().enumerate() {
                    let row = &av[i * k..(i + 1) * k];
                    *d = row.iter().zip(bv).map(|(x, y)| x * y).sum();
                }
            } else {
                for i in 0..m {
                    for p in 0..k {
                        let aip = av[i * k + p];
                        for j in 0..n {
                            dst[i * n + j] += aip * bv[p * n + j];
                        }
                    }
                }
            }
        }))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(Op::Tanh(a.id), a, f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(Op::Sigmoid(a.id), a, sigmoid)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.map(Op::Sqrt(a.id), a, f64::sqrt)
    }

    pub fn reciprocal(&mut self, a: Var) -> Var {
        self.map(Op::Recip(a.id), a, |x| 1.0 / x)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(Op::Scale(a.id, c), a, |x| c * x)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.map(Op::AddConst(a.id), a, |x| x + c)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// Vertical concatenation of two vectors.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        check(a.cols == 1 && b.cols == 1, || "concat expects column vectors".to_string())?;
        let (ra, rb) = (self.range(a), self.range(b));
        let la = a.len();
        Ok(self.push(Op::Concat(a.id, b.id), a.len() + b.len(), 1, |src, dst| {
            dst[..la].copy_from_slice(&src[ra]);
            dst[la..].copy_from_slice(&src[rb]);
        }))
    }

    /// Contiguous sub-vector `a[start .. start + len]` (row-major flattening).
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        check(start + len <= a.len(), || format!("slice {start}+{len} of length {}", a.len()))?;
        let ra = self.range(a);
        Ok(self.push(Op::Slice(a.id, start as u32), len, 1, |src, dst| {
            dst.copy_from_slice(&src[ra][start..start + len]);
        }))
    }

    /// `out[i] = a[idx[i]]`, shaped `rows × cols`.
    pub fn gather(&mut self, a: Var, idx: &[usize], rows: usize, cols: usize) -> Result<Var> {
        check(idx.len() == rows * cols, || format!("gather of {} indices into {rows}x{cols}", idx.len()))?;
        check(idx.iter().all(|&i| i < a.len()), || "gather index out of range".to_string())?;
        let start = self.indices.len() as u32;
        self.indices.extend(idx.iter().map(|&i| i as u32));
        let ra = self.range(a);
        Ok(self.push(Op::Gather(a.id, start), rows, cols, |src, dst| {
            let av = &src[ra];
            for (d, &i) in dst.iter_mut().zip(idx) {
                *d = av[i];
            }
        }))
    }

    /// Same values, new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        check(rows * cols == a.len(), || format!("reshape {} values to {rows}x{cols}", a.len()))?;
        let idx: Vec<usize> = (0..a.len()).collect();
        self.gather(a, &idx, rows, cols)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let ra = self.range(a);
        self.push(Op::Sum(a.id), 1, 1, |src, dst| dst[0] = src[ra].iter().sum())
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        check(a.len() == b.len(), || format!("dot of lengths {} and {}", a.len(), b.len()))?;
        let (ra, rb) = (self.range(a), self.range(b));
        Ok(self.push(Op::Dot(a.id, b.id), 1, 1, |src, dst| {
            dst[0] = src[ra].iter().zip(&src[rb]).map(|(x, y)| x * y).sum();
        }))
    }

    /// Array times a scalar node.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        check(s.is_scalar(), || "mul_scalar expects a 1x1 factor".to_string())?;
        let (ra, rs) = (self.range(a), self.range(s));
        Ok(self.push(Op::MulScalar(a.id, s.id), a.rows(), a.cols(), |src, dst| {
            let c = src[rs.start];
            for (d, x) in dst.iter_mut().zip(&src[ra]) {
                *d = x * c;
            }
        }))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (m, n) = (a.rows(), a.cols());
        let ra = self.range(a);
        self.push(Op::Transpose(a.id), n, m, |src, dst| {
            let av = &src[ra];
            for i in 0..m {
                for j in 0..n {
                    dst[j * m + i] = av[i * n + j];
                }
            }
        })
    }

    /// Reverse sweep from a scalar `loss`. Returns the gradient with respect
    /// to every registered parameter offset; parameters not reachable from
    /// `loss` get exactly zero.
    pub fn backward(&mut self, loss: Var) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_params];
        self.backward_into(loss, &mut out)?;
        Ok(out)
    }

    /// As [`Tape::backward`], accumulating into `out`.
    pub fn backward_into(&mut self, loss: Var, out: &mut [f64]) -> Result<()> {
        check(loss.is_scalar(), || format!("loss must be scalar, got {}x{}", loss.rows, loss.cols))?;
        check(out.len() == self.n_params, || "gradient buffer has the wrong length".to_string())?;
        let end = self.node(loss).off + 1;
        self.grads.clear();
        self.grads.resize(end, 0.0);
        self.grads[end - 1] = 1.0;
        let vals = &self.vals;
        for node in self.nodes[..=loss.id()].iter().rev() {
            let (lo, hi) = self.grads.split_at_mut(node.off);
            let g = &hi[..node.len()];
            let y = &vals[node.off..node.off + node.len()];
            let r = |id: u32| {
                let n = &self.nodes[id as usize];
                n.off..n.off + n.len()
            };
            match node.op {
                Op::Leaf => {}
                Op::Param { offset } => {
                    for (o, gi) in out[offset..offset + g.len()].iter_mut().zip(g) {
                        *o += gi;
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut lo[r(a)], g, 1.0);
                    acc(&mut lo[r(b)], g, 1.0);
                }
                Op::Sub(a, b) => {
                    acc(&mut lo[r(a)], g, 1.0);
                    acc(&mut lo[r(b)], g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (ra, rb) = (r(a), r(b));
                    for i in 0..g.len() {
                        let (xa, xb) = (vals[ra.start + i], vals[rb.start + i]);
                        lo[ra.start + i] += g[i] * xb;
                        lo[rb.start + i] += g[i] * xa;
                    }
                }
                Op::MatMul(a, b) => {
                    let (na, nb) = (&self.nodes[a as usize], &self.nodes[b as usize]);
                    let (m, k, n) = (na.rows as usize, na.cols as usize, nb.cols as usize);
                    let (ra, rb) = (r(a), r(b));
                    let (av, bv) = (&vals[ra.clone()], &vals[rb.clone()]);
                    // dA = G Bᵀ
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += g[i * n + j] * bv[p * n + j];
                            }
                            lo[ra.start + i * k + p] += s;
                        }
                    }
                    // dB = Aᵀ G
                    for p in 0..k {
                        for j in 0..n {
                            let mut s = 0.0;
                            for i in 0..m {
                                s += av[i * k + p] * g[i * n + j];
                            }
                            lo[rb.start + p * n + j] += s;
                        }
                    }
                }
                Op::Tanh(a) => {
                    let ra = r(a);
                    for i in 0..g.len() {
                        lo[ra.start + i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Sigmoid(a) => {
                    let ra = r(a);
                    for i in 0..g.len() {
                        lo[ra.start + i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                }
                Op::Sqrt(a) => {
                    let ra = r(a);
                    for i in 0..g.len() {
                        lo[ra.start + i] += g[i] * 0.5 / y[i];
                    }
                }
                Op::Recip(a) => {
                    let ra = r(a);
                    for i in 0..g.len() {
                        lo[ra.start + i] -= g[i] * y[i] * y[i];
                    }
                }
                Op::Concat(a, b) => {
                    let (ra, rb) = (r(a), r(b));
                    let la = ra.len();
                    acc(&mut lo[ra], &g[..la], 1.0);
                    acc(&mut lo[rb], &g[la..], 1.0);
                }
                Op::Slice(a, start) => {
                    let s = r(a).start + start as usize;
                    acc(&mut lo[s..s + g.len()], g, 1.0);
                }
                Op::Gather(a, start) => {
                    let base = r(a).start;
                    let idx = &self.indices[start as usize..start as usize + g.len()];
                    for (gi, &i) in g.iter().zip(idx) {
                        lo[base + i as usize] += gi;
                    }
                }
                Op::Sum(a) => {
                    let g0 = g[0];
                    for x in &mut lo[r(a)] {
                        *x += g0;
                    }
                }
                Op::Dot(a, b) => {
                    let g0 = g[0];
                    let (ra, rb) = (r(a), r(b));
                    for i in 0..ra.len() {
                        let (xa, xb) = (vals[ra.start + i], vals[rb.start + i]);
                        lo[ra.start + i] += g0 * xb;
                        lo[rb.start + i] += g0 * xa;
                    }
                }
                Op::Scale(a, c) => acc(&mut lo[r(a)], g, c),
                Op::AddConst(a) => acc(&mut lo[r(a)], g, 1.0),
                Op::MulScalar(a, s) => {
                    let (ra, rs) = (r(a), r(s));
                    let c = vals[rs.start];
                    let mut gs = 0.0;
                    for i in 0..g.len() {
                        lo[ra.start + i] += g[i] * c;
                        gs += g[i] * vals[ra.start + i];
                    }
                    lo[rs.start] += gs;
                }
                Op::Transpose(a) => {
                    let na = &self.nodes[a as usize];
                    let (m, n) = (na.rows as usize, na.cols as usize);
                    let base = r(a).start;
                    for i in 0..m {
                        for j in 0..n {
                            lo[base + i * n + j] += g[j * m + i];
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn acc(dst: &mut [f64], g: &[f64], c: f64) {
    for (d, gi) in dst.iter_mut().zip(g) {
        *d += c * gi;
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Shape(msg()))
    }
}
