//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] records every operation applied to its variables in
//! topological order. All forward values and gradients live in two flat
//! arenas, so recording a node costs one `Vec` extension and no per-node
//! allocation. Tapes are meant to be rebuilt (or [`Tape::clear`]ed) for
//! every forward pass.

use crate::error::{Error, Result};
use crate::tensor::{dot, matmul_into, Shape, Tensor};

/// Lower bound applied to both norms in the cosine similarity.
pub const COSINE_EPS: f64 = 1e-8;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation selector for [`Tape::apply`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpKind {
    MatMul,
    Add,
    Sub,
    Mul,
    /// Stack inputs along rows; all inputs need the same column count.
    Concat,
    Sigmoid,
    Tanh,
    Softmax,
    Sum,
    Mean,
    Abs,
    Square,
    L2Norm,
    Scale(f64),
    /// `(V: d x n, L: d x d)` to the `n`-vector `-1/2 v_j^T (L L^T) v_j`.
    /// Only the lower triangle of `L` is read.
    QuadraticForm,
    /// `(h: d x 1, C: d x n)` to the `n`-vector of cosine similarities
    /// between `h` and each column of `C`, with both norms floored at
    /// [`COSINE_EPS`].
    Cosine,
    /// Extract one column of a matrix as a column vector.
    Column(usize),
    /// `-log softmax(z)[target]` for a logit vector `z`.
    SoftmaxCrossEntropy(usize),
}

impl OpKind {
    fn name(&self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Concat => "concat",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Tanh => "tanh",
            OpKind::Softmax => "softmax",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::Abs => "abs",
            OpKind::Square => "square",
            OpKind::L2Norm => "l2-norm",
            OpKind::Scale(_) => "scale",
            OpKind::QuadraticForm => "quadratic-form",
            OpKind::Cosine => "cosine",
            OpKind::Column(_) => "column",
            OpKind::SoftmaxCrossEntropy(_) => "softmax-cross-entropy",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            OpKind::MatMul
            | OpKind::Add
            | OpKind::Sub
            | OpKind::Mul
            | OpKind::QuadraticForm
            | OpKind::Cosine => Some(2),
            OpKind::Concat => None,
            _ => Some(1),
        }
    }
}

#[derive(Clone, Debug)]
enum Inputs {
    None,
    One(usize),
    Two(usize, usize),
    Many(Box<[usize]>),
}

#[derive(Clone, Debug)]
struct Node {
    op: Option<OpKind>,
    inputs: Inputs,
    shape: Shape,
    offset: usize,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    values: Vec<f64>,
    grads: Vec<f64>,
    has_grads: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drop all nodes but keep the arena capacity.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.values.clear();
        self.grads.clear();
        self.has_grads = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push_leaf(&mut self, shape: Shape, data: &[f64], requires_grad: bool) -> Var {
        let offset = self.values.len();
        self.values.extend_from_slice(data);
        self.nodes.push(Node {
            op: None,
            inputs: Inputs::None,
            shape,
            offset,
            requires_grad,
        });
        self.has_grads = false;
        Var(self.nodes.len() - 1)
    }

    /// Record a trainable leaf.
    pub fn param(&mut self, t: &Tensor) -> Var {
        self.push_leaf(t.shape(), t.data(), true)
    }

    /// Record a leaf that never receives a gradient.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.push_leaf(t.shape(), t.data(), false)
    }

    pub fn constant_vector(&mut self, values: &[f64]) -> Var {
        self.push_leaf(Shape::vector(values.len()), values, false)
    }

    pub fn constant_filled(&mut self, rows: usize, cols: usize, value: f64) -> Var {
        let offset = self.values.len();
        self.values.resize(offset + rows * cols, value);
        self.nodes.push(Node {
            op: None,
            inputs: Inputs::None,
            shape: Shape::new(rows, cols),
            offset,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> Result<&Node> {
        self.nodes
            .get(v.0)
            .ok_or_else(|| Error::Backward(format!("variable {} is not on this tape", v.0)))
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        let n = &self.nodes[v.0];
        &self.values[n.offset..n.offset + n.shape.len()]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.shape(v), self.value(v).to_vec()).expect("tape node shape")
    }

    /// Gradient of the last backward loss with respect to `v`; `None` when
    /// no backward pass has run or `v` is not differentiable.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        if !self.has_grads {
            return None;
        }
        let n = self.nodes.get(v.0)?;
        if !n.requires_grad {
            return None;
        }
        Some(&self.grads[n.offset..n.offset + n.shape.len()])
    }

    pub fn grad_tensor(&self, v: Var) -> Option<Tensor> {
        let g = self.grad(v)?;
        Some(Tensor::new(self.shape(v), g.to_vec()).expect("tape node shape"))
    }

    /// Record `op` applied to `inputs` and return the output variable.
    pub fn apply(&mut self, op: OpKind, inputs: &[Var]) -> Result<Var> {
        let name = op.name();
        if let Some(arity) = op.arity() {
            if inputs.len() != arity {
                return Err(Error::shape(
                    name,
                    format!("expected {arity} inputs, got {}", inputs.len()),
                ));
            }
        } else if inputs.is_empty() {
            return Err(Error::Empty { op: name });
        }
        for v in inputs {
            self.node(*v)?;
        }
        let nodes = &self.nodes;
        let shapes = |i: usize| nodes[inputs[i].0].shape;
        let mismatch = || {
            let list: Vec<String> = inputs.iter().map(|v| nodes[v.0].shape.to_string()).collect();
            Error::shape(name, list.join(", "))
        };
        let out_shape = match op {
            OpKind::MatMul => {
                if shapes(0).cols != shapes(1).rows {
                    return Err(mismatch());
                }
                Shape::new(shapes(0).rows, shapes(1).cols)
            }
            OpKind::Add | OpKind::Sub | OpKind::Mul => {
                if shapes(0) != shapes(1) {
                    return Err(mismatch());
                }
                shapes(0)
            }
            OpKind::Concat => {
                let cols = shapes(0).cols;
                if (0..inputs.len()).any(|i| shapes(i).cols != cols) {
                    return Err(mismatch());
                }
                Shape::new((0..inputs.len()).map(|i| shapes(i).rows).sum(), cols)
            }
            OpKind::Sigmoid | OpKind::Tanh | OpKind::Abs | OpKind::Square | OpKind::Scale(_) => {
                shapes(0)
            }
            OpKind::Softmax => {
                if shapes(0).rows != 1 && shapes(0).cols != 1 {
                    return Err(mismatch());
                }
                shapes(0)
            }
            OpKind::Sum | OpKind::Mean => Shape::SCALAR,
            OpKind::L2Norm => {
                if !shapes(0).is_vector() && shapes(0).rows != 1 {
                    return Err(mismatch());
                }
                Shape::SCALAR
            }
            OpKind::QuadraticForm => {
                let (v, l) = (shapes(0), shapes(1));
                if l.rows != l.cols || l.rows != v.rows {
                    return Err(mismatch());
                }
                Shape::vector(v.cols)
            }
            OpKind::Cosine => {
                let (h, c) = (shapes(0), shapes(1));
                if !h.is_vector() || h.rows != c.rows {
                    return Err(mismatch());
                }
                Shape::vector(c.cols)
            }
            OpKind::Column(j) => {
                if j >= shapes(0).cols {
                    return Err(Error::shape(
                        name,
                        format!("column {j} out of range for {}", shapes(0)),
                    ));
                }
                Shape::vector(shapes(0).rows)
            }
            OpKind::SoftmaxCrossEntropy(t) => {
                if !shapes(0).is_vector() {
                    return Err(mismatch());
                }
                if t >= shapes(0).rows {
                    return Err(Error::TargetOutOfRange {
                        id: t,
                        vocab: shapes(0).rows,
                    });
                }
                Shape::SCALAR
            }
        };
        Ok(self.record(op, inputs, out_shape))
    }

    fn record(&mut self, op: OpKind, ids: &[Var], shape: Shape) -> Var {
        let offset = self.values.len();
        self.values.resize(offset + shape.len(), 0.0);
        let (lo, hi) = self.values.split_at_mut(offset);
        let nodes = &self.nodes;
        let val = |i: usize| {
            let n = &nodes[ids[i].0];
            &lo[n.offset..n.offset + n.shape.len()]
        };
        let in_shape = |i: usize| nodes[ids[i].0].shape;
        let out = &mut hi[..shape.len()];
        match op {
            OpKind::MatMul => {
                let (a, b) = (in_shape(0), in_shape(1));
                matmul_into(val(0), val(1), out, a.rows, a.cols, b.cols);
            }
            OpKind::Add => zip_into(out, val(0), val(1), |x, y| x + y),
            OpKind::Sub => zip_into(out, val(0), val(1), |x, y| x - y),
            OpKind::Mul => zip_into(out, val(0), val(1), |x, y| x * y),
            OpKind::Concat => {
                let mut at = 0;
                // Row-major stacking along rows is plain concatenation.
                for i in 0..ids.len() {
                    let v = val(i);
                    out[at..at + v.len()].copy_from_slice(v);
                    at += v.len();
                }
            }
            OpKind::Sigmoid => map_into(out, val(0), sigmoid),
            OpKind::Tanh => map_into(out, val(0), f64::tanh),
            OpKind::Abs => map_into(out, val(0), f64::abs),
            OpKind::Square => map_into(out, val(0), |x| x * x),
            OpKind::Scale(c) => map_into(out, val(0), |x| c * x),
            OpKind::Softmax => softmax_into(val(0), out),
            OpKind::Sum => out[0] = val(0).iter().sum(),
            OpKind::Mean => {
                let v = val(0);
                out[0] = v.iter().sum::<f64>() / v.len() as f64;
            }
            OpKind::L2Norm => out[0] = dot(val(0), val(0)).sqrt(),
            OpKind::QuadraticForm => {
                let (v, l) = (val(0), val(1));
                let s = in_shape(0);
                let mut u = vec![0.0; s.rows];
                for (j, o) in out.iter_mut().enumerate() {
                    lower_t_times_column(l, v, s.rows, s.cols, j, &mut u);
                    *o = -0.5 * dot(&u, &u);
                }
            }
            OpKind::Cosine => {
                let (h, c) = (val(0), val(1));
                let s = in_shape(1);
                let hn = dot(h, h).sqrt().max(COSINE_EPS);
                for (j, o) in out.iter_mut().enumerate() {
                    let (mut d, mut cc) = (0.0, 0.0);
                    for r in 0..s.rows {
                        let cv = c[r * s.cols + j];
                        d += h[r] * cv;
                        cc += cv * cv;
                    }
                    *o = d / (hn * cc.sqrt().max(COSINE_EPS));
                }
            }
            OpKind::Column(j) => {
                let (m, s) = (val(0), in_shape(0));
                for (r, o) in out.iter_mut().enumerate() {
                    *o = m[r * s.cols + j];
                }
            }
            OpKind::SoftmaxCrossEntropy(t) => {
                let z = val(0);
                out[0] = log_sum_exp(z) - z[t];
            }
        }
        let requires_grad = ids.iter().any(|v| self.nodes[v.0].requires_grad);
        let inputs = match ids {
            _ if op == OpKind::Concat => Inputs::Many(ids.iter().map(|v| v.0).collect()),
            [a] => Inputs::One(a.0),
            [a, b] => Inputs::Two(a.0, b.0),
            many => Inputs::Many(many.iter().map(|v| v.0).collect()),
        };
        self.nodes.push(Node {
            op: Some(op),
            inputs,
            shape,
            offset,
            requires_grad,
        });
        self.has_grads = false;
        Var(self.nodes.len() - 1)
    }

    /// Propagate the gradient of the scalar `loss` to every ancestor.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let (shape, offset) = {
            let node = self.node(loss)?;
            (node.shape, node.offset)
        };
        if !shape.is_scalar() {
            return Err(Error::Backward(format!("loss must be scalar, got {shape}")));
        }
        self.grads.clear();
        self.grads.resize(self.values.len(), 0.0);
        self.grads[offset] = 1.0;
        for k in (0..=loss.0).rev() {
            let node = &self.nodes[k];
            let Some(op) = node.op else { continue };
            if !node.requires_grad {
                continue;
            }
            let (lo, hi) = self.grads.split_at_mut(node.offset);
            let g = &hi[..node.shape.len()];
            if g.iter().all(|&x| x == 0.0) {
                continue;
            }
            backprop_node(op, node, &self.nodes, &self.values, lo, g);
        }
        self.has_grads = true;
        Ok(())
    }

    // Convenience wrappers; each panics only on programmer error in shape
    // wiring, which callers surface through `apply` when they need a Result.

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Mul, &[a, b])
    }
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        self.apply(OpKind::Concat, parts)
    }
    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Sigmoid, &[a])
    }
    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Tanh, &[a])
    }
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Softmax, &[a])
    }
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Sum, &[a])
    }
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Mean, &[a])
    }
    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Abs, &[a])
    }
    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Square, &[a])
    }
    pub fn l2_norm(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::L2Norm, &[a])
    }
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.apply(OpKind::Scale(c), &[a])
    }
    pub fn quadratic_form(&mut self, v: Var, l: Var) -> Result<Var> {
        self.apply(OpKind::QuadraticForm, &[v, l])
    }
    pub fn cosine(&mut self, h: Var, c: Var) -> Result<Var> {
        self.apply(OpKind::Cosine, &[h, c])
    }
    pub fn column(&mut self, m: Var, j: usize) -> Result<Var> {
        self.apply(OpKind::Column(j), &[m])
    }
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        self.apply(OpKind::SoftmaxCrossEntropy(target), &[logits])
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn map_into(out: &mut [f64], a: &[f64], f: impl Fn(f64) -> f64) {
    for (o, &x) in out.iter_mut().zip(a) {
        *o = f(x);
    }
}

fn zip_into(out: &mut [f64], a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = f(x, y);
    }
}

/// `exp(s - max s) / sum exp(s - max s)`.
pub(crate) fn softmax_into(s: &[f64], out: &mut [f64]) {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(s) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub(crate) fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `u = L^T v_j` using only the lower triangle of `L` (d x d) and column
/// `j` of `V` (d x n).
fn lower_t_times_column(l: &[f64], v: &[f64], d: usize, n: usize, j: usize, u: &mut [f64]) {
    for (b, ub) in u.iter_mut().enumerate() {
        // (L^T v)_b = sum_{a >= b} L[a][b] v[a]
        *ub = (b..d).map(|a| l[a * d + b] * v[a * n + j]).sum();
    }
}

fn backprop_node(op: OpKind, node: &Node, nodes: &[Node], values: &[f64], lo: &mut [f64], g: &[f64]) {
    let val = |i: usize| {
        let n = &nodes[i];
        &values[n.offset..n.offset + n.shape.len()]
    };
    let out = val_of(node, values);
    // Each input's contribution reads only forward values, so aliased
    // inputs (e.g. `mul(x, x)`) accumulate correctly one after another.
    let mut acc = |i: usize, f: &mut dyn FnMut(&mut [f64])| {
        let n = &nodes[i];
        if n.requires_grad {
            f(&mut lo[n.offset..n.offset + n.shape.len()]);
        }
    };
    match (op, &node.inputs) {
        (OpKind::MatMul, &Inputs::Two(a, b)) => {
            let (sa, sb) = (nodes[a].shape, nodes[b].shape);
            let (r, k, c) = (sa.rows, sa.cols, sb.cols);
            let (av, bv) = (val(a), val(b));
            // dA = G B^T
            acc(a, &mut |ga| {
                if c == 1 {
                    for (row, &gi) in ga.chunks_exact_mut(k).zip(g) {
                        for (o, &bp) in row.iter_mut().zip(bv) {
                            *o += gi * bp;
                        }
                    }
                    return;
                }
                for i in 0..r {
                    let grow = &g[i * c..(i + 1) * c];
                    for p in 0..k {
                        ga[i * k + p] += dot(grow, &bv[p * c..(p + 1) * c]);
                    }
                }
            });
            // dB = A^T G
            acc(b, &mut |gb| {
                if c == 1 {
                    for (row, &gi) in av.chunks_exact(k).zip(g) {
                        for (o, &ap) in gb.iter_mut().zip(row) {
                            *o += ap * gi;
                        }
                    }
                    return;
                }
                for i in 0..r {
                    let grow = &g[i * c..(i + 1) * c];
                    for p in 0..k {
                        let aip = av[i * k + p];
                        if aip == 0.0 {
                            continue;
                        }
                        for (o, &gv) in gb[p * c..(p + 1) * c].iter_mut().zip(grow) {
                            *o += aip * gv;
                        }
                    }
                }
            });
        }
        (OpKind::Add, &Inputs::Two(a, b)) => {
            acc(a, &mut |ga| add_assign(ga, g));
            acc(b, &mut |gb| add_assign(gb, g));
        }
        (OpKind::Sub, &Inputs::Two(a, b)) => {
            acc(a, &mut |ga| add_assign(ga, g));
            acc(b, &mut |gb| {
                for (o, &x) in gb.iter_mut().zip(g) {
                    *o -= x;
                }
            });
        }
        (OpKind::Mul, &Inputs::Two(a, b)) => {
            let (av, bv) = (val(a), val(b));
            acc(a, &mut |ga| {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(bv) {
                    *o += x * y;
                }
            });
            acc(b, &mut |gb| {
                for ((o, &x), &y) in gb.iter_mut().zip(g).zip(av) {
                    *o += x * y;
                }
            });
        }
        (OpKind::Concat, Inputs::Many(ids)) => {
            let mut at = 0;
            for &i in ids.iter() {
                let len = nodes[i].shape.len();
                acc(i, &mut |gi| add_assign(gi, &g[at..at + len]));
                at += len;
            }
        }
        (OpKind::Sigmoid, &Inputs::One(a)) => acc(a, &mut |ga| {
            for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                *o += x * y * (1.0 - y);
            }
        }),
        (OpKind::Tanh, &Inputs::One(a)) => acc(a, &mut |ga| {
            for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                *o += x * (1.0 - y * y);
            }
        }),
        (OpKind::Abs, &Inputs::One(a)) => {
            let av = val(a);
            acc(a, &mut |ga| {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(av) {
                    if y > 0.0 {
                        *o += x;
                    } else if y < 0.0 {
                        *o -= x;
                    }
                }
            })
        }
        (OpKind::Square, &Inputs::One(a)) => {
            let av = val(a);
            acc(a, &mut |ga| {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(av) {
                    *o += 2.0 * x * y;
                }
            })
        }
        (OpKind::Scale(c), &Inputs::One(a)) => acc(a, &mut |ga| {
            for (o, &x) in ga.iter_mut().zip(g) {
                *o += c * x;
            }
        }),
        (OpKind::Softmax, &Inputs::One(a)) => {
            let gy = dot(g, out);
            acc(a, &mut |ga| {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                    *o += y * (x - gy);
                }
            })
        }
        (OpKind::Sum, &Inputs::One(a)) => acc(a, &mut |ga| ga.iter_mut().for_each(|o| *o += g[0])),
        (OpKind::Mean, &Inputs::One(a)) => acc(a, &mut |ga| {
            let s = g[0] / ga.len() as f64;
            ga.iter_mut().for_each(|o| *o += s);
        }),
        (OpKind::L2Norm, &Inputs::One(a)) => {
            let norm = out[0];
            if norm > 0.0 {
                let av = val(a);
                acc(a, &mut |ga| {
                    for (o, &x) in ga.iter_mut().zip(av) {
                        *o += g[0] * x / norm;
                    }
                })
            }
        }
        (OpKind::QuadraticForm, &Inputs::Two(v, l)) => {
            let s = nodes[v].shape;
            let (d, n) = (s.rows, s.cols);
            let (vv, lv) = (val(v), val(l));
            let mut us = vec![0.0; d * n];
            for j in 0..n {
                lower_t_times_column(lv, vv, d, n, j, &mut us[j * d..(j + 1) * d]);
            }
            // ds_j/dv_j = -L u_j
            acc(v, &mut |gv| {
                for j in 0..n {
                    let u = &us[j * d..(j + 1) * d];
                    for a in 0..d {
                        let lu: f64 = (0..=a).map(|b| lv[a * d + b] * u[b]).sum();
                        gv[a * n + j] -= g[j] * lu;
                    }
                }
            });
            // ds_j/dL[a][b] = -v_j[a] u_j[b] for a >= b
            acc(l, &mut |gl| {
                for j in 0..n {
                    let u = &us[j * d..(j + 1) * d];
                    for a in 0..d {
                        let va = g[j] * vv[a * n + j];
                        for b in 0..=a {
                            gl[a * d + b] -= va * u[b];
                        }
                    }
                }
            });
        }
        (OpKind::Cosine, &Inputs::Two(h, c)) => {
            let s = nodes[c].shape;
            let (d, n) = (s.rows, s.cols);
            let (hv, cv) = (val(h), val(c));
            let h_raw = dot(hv, hv).sqrt();
            let hn = h_raw.max(COSINE_EPS);
            let h_active = h_raw > COSINE_EPS;
            let col_norms: Vec<f64> = (0..n)
                .map(|j| (0..d).map(|r| cv[r * n + j].powi(2)).sum::<f64>().sqrt())
                .collect();
            acc(h, &mut |gh| {
                for j in 0..n {
                    let cn = col_norms[j].max(COSINE_EPS);
                    let scale = g[j] / (hn * cn);
                    let back = if h_active { g[j] * out[j] / (hn * hn) } else { 0.0 };
                    for r in 0..d {
                        gh[r] += scale * cv[r * n + j] - back * hv[r];
                    }
                }
            });
            acc(c, &mut |gc| {
                for j in 0..n {
                    let raw = col_norms[j];
                    let cn = raw.max(COSINE_EPS);
                    let scale = g[j] / (hn * cn);
                    let back = if raw > COSINE_EPS { g[j] * out[j] / (cn * cn) } else { 0.0 };
                    for r in 0..d {
                        gc[r * n + j] += scale * hv[r] - back * cv[r * n + j];
                    }
                }
            });
        }
        (OpKind::Column(j), &Inputs::One(m)) => {
            let cols = nodes[m].shape.cols;
            acc(m, &mut |gm| {
                for (r, &x) in g.iter().enumerate() {
                    gm[r * cols + j] += x;
                }
            })
        }
        (OpKind::SoftmaxCrossEntropy(t), &Inputs::One(z)) => {
            let zv = val(z);
            let lse = log_sum_exp(zv);
            acc(z, &mut |gz| {
                for (i, (o, &x)) in gz.iter_mut().zip(zv).enumerate() {
                    let p = (x - lse).exp();
                    *o += g[0] * (p - if i == t { 1.0 } else { 0.0 });
                }
            })
        }
        (op, inputs) => unreachable!("{op:?} recorded with {inputs:?}"),
    }
}

fn val_of<'a>(node: &Node, values: &'a [f64]) -> &'a [f64] {
    &values[node.offset..node.offset + node.shape.len()]
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (o, &x) in dst.iter_mut().zip(src) {
        *o += x;
    }
}

/// Result of comparing analytic gradients against central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(1, |analytic|)` over all coordinates.
    pub max_relative_error: f64,
    /// (input index, coordinate) where the maximum occurred.
    pub worst: (usize, usize),
    pub coordinates: usize,
}

/// Check the gradient of a scalar function of one tensor.
pub fn grad_check<F>(f: F, point: &Tensor, epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let report = grad_check_many(
        |tape, vars| f(tape, vars[0]),
        std::slice::from_ref(point),
        epsilon,
    )?;
    Ok(report.max_relative_error)
}

/// Check the gradient of a scalar function of several tensors against
/// central finite differences `(f(x + e) - f(x - e)) / 2e`.
pub fn grad_check_many<F>(f: F, points: &[Tensor], epsilon: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::GradCheck(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let mut tape = Tape::new();
    let eval = |tape: &mut Tape, pts: &[Tensor]| -> Result<f64> {
        tape.clear();
        let vars: Vec<Var> = pts.iter().map(|p| tape.param(p)).collect();
        let out = f(tape, &vars)?;
        if !tape.shape(out).is_scalar() {
            return Err(Error::GradCheck(format!(
                "function returned {}, expected a scalar",
                tape.shape(out)
            )));
        }
        Ok(tape.scalar(out))
    };

    let vars: Vec<Var> = points.iter().map(|p| tape.param(p)).collect();
    let out = f(&mut tape, &vars)?;
    if !tape.shape(out).is_scalar() {
        return Err(Error::GradCheck(format!(
            "function returned {}, expected a scalar",
            tape.shape(out)
        )));
    }
    tape.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .map(|v| tape.grad(*v).map(<[f64]>::to_vec).unwrap_or_default())
        .collect();

    let mut pts = points.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        coordinates: 0,
    };
    for (k, grads) in analytic.iter().enumerate() {
        for (idx, &a) in grads.iter().enumerate() {
            let orig = pts[k].data()[idx];
            pts[k].data_mut()[idx] = orig + epsilon;
            let plus = eval(&mut tape, &pts)?;
            pts[k].data_mut()[idx] = orig - epsilon;
            let minus = eval(&mut tape, &pts)?;
            pts[k].data_mut()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let err = (a - numeric).abs() / a.abs().max(1.0);
            if err > report.max_relative_error || !err.is_finite() {
                report.max_relative_error = err;
                report.worst = (k, idx);
            }
            report.coordinates += 1;
        }
    }
    Ok(report)
}
