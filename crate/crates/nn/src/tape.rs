//! Reverse-mode differentiation over a linear tape of matrix operations.

use std::rc::Rc;

use crate::error::{NnError, Result};
use crate::graph::{segment_softmax, EdgeIndex};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Rc<Vec<usize>>),
    PickCols(Var, Rc<Vec<usize>>),
    Mean(Var),
    Dueling(Var, Var),
    EdgeLogits { sl: Var, sr: Var, index: Rc<EdgeIndex>, slope: f64, scale: bool },
    SegmentSoftmax(Var, Rc<EdgeIndex>),
    Aggregate { alpha: Var, z: Var, index: Rc<EdgeIndex> },
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Gradients of one backward pass, indexed by `Var`.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Input that receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Differentiable input, e.g. a parameter.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if self.shape(bias) != (1, c) {
            return Err(NnError::Shape(format!("bias {:?} for {r}x{c}", self.shape(bias))));
        }
        let b = self.value(bias).data().to_vec();
        let mut value = self.value(a).clone();
        for i in 0..r {
            for (x, y) in value.row_mut(i).iter_mut().zip(&b) {
                *x += y;
            }
        }
        let ng = self.needs(&[a, bias]);
        Ok(self.push(value, Op::AddBias(a, bias), ng))
    }

    fn zip_same(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::Shape(format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        let (r, c) = self.shape(a);
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| f(x, y)).collect();
        let ng = self.needs(&[a, b]);
        Ok(self.push(Matrix::new(r, c, data)?, op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `scale·a + shift`.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(a).map(|x| scale * x + shift);
        let ng = self.needs(&[a]);
        self.push(value, Op::Affine(a, scale), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        let ng = self.needs(&[a]);
        self.push(value, Op::Relu(a), ng)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let ng = self.needs(&[a]);
        self.push(value, Op::LeakyRelu(a, slope), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let ng = self.needs(&[a]);
        self.push(value, Op::Tanh(a), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map(|&p| self.shape(p).0).ok_or_else(|| NnError::Shape("nothing to concat".into()))?;
        if parts.iter().any(|&p| self.shape(p).0 != rows) {
            return Err(NnError::Shape("concat row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(i);
                value.row_mut(i)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let ng = self.needs(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(a);
        if let Some(&bad) = rows.iter().find(|&&i| i >= r) {
            return Err(NnError::Shape(format!("row {bad} of {r}")));
        }
        let src = self.value(a);
        let mut value = Matrix::zeros(rows.len(), c);
        for (k, &i) in rows.iter().enumerate() {
            value.row_mut(k).copy_from_slice(src.row(i));
        }
        let ng = self.needs(&[a]);
        Ok(self.push(value, Op::GatherRows(a, Rc::new(rows.to_vec())), ng))
    }

    /// Column `cols[i]` of row `i`, as a column vector.
    pub fn pick_cols(&mut self, a: Var, cols: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(a);
        if cols.len() != r || cols.iter().any(|&j| j >= c) {
            return Err(NnError::Shape(format!("pick {} columns from {r}x{c}", cols.len())));
        }
        let value = Matrix::column(&cols.iter().enumerate().map(|(i, &j)| self.value(a).get(i, j)).collect::<Vec<_>>());
        let ng = self.needs(&[a]);
        Ok(self.push(value, Op::PickCols(a, Rc::new(cols.to_vec())), ng))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let n = m.data().len().max(1) as f64;
        let value = Matrix::scalar(m.data().iter().sum::<f64>() / n);
        let ng = self.needs(&[a]);
        self.push(value, Op::Mean(a), ng)
    }

    /// `Q = V + D − mean_a D` row-wise, with `V` a column and `D` one column per action.
    pub fn dueling(&mut self, v: Var, d: Var) -> Result<Var> {
        let (r, c) = self.shape(d);
        if self.shape(v) != (r, 1) || c == 0 {
            return Err(NnError::Shape(format!("value {:?} with advantages {r}x{c}", self.shape(v))));
        }
        let mut value = self.value(d).clone();
        for i in 0..r {
            let vi = self.value(v).get(i, 0);
            let row = value.row_mut(i);
            let mean = row.iter().sum::<f64>() / c as f64;
            row.iter_mut().for_each(|x| *x = vi + *x - mean);
        }
        let ng = self.needs(&[v, d]);
        Ok(self.push(value, Op::Dueling(v, d), ng))
    }

    /// Per-edge logits `LeakyReLU(sl[u] + sr[v])`, times `a_uv` when `scale`.
    pub fn edge_logits(&mut self, sl: Var, sr: Var, index: &Rc<EdgeIndex>, slope: f64, scale: bool) -> Result<Var> {
        let n = index.nodes();
        if self.shape(sl) != (n, 1) || self.shape(sr) != (n, 1) {
            return Err(NnError::Shape(format!("edge scores need {n}x1 inputs")));
        }
        let (l, r) = (self.value(sl).data(), self.value(sr).data());
        let data: Vec<f64> = (0..index.len())
            .map(|e| {
                let x = l[index.dst()[e]] + r[index.src()[e]];
                let y = if x > 0.0 { x } else { slope * x };
                if scale {
                    y * index.weight()[e]
                } else {
                    y
                }
            })
            .collect();
        let ng = self.needs(&[sl, sr]);
        Ok(self.push(Matrix::column(&data), Op::EdgeLogits { sl, sr, index: Rc::clone(index), slope, scale }, ng))
    }

    pub fn segment_softmax(&mut self, logits: Var, index: &Rc<EdgeIndex>) -> Result<Var> {
        if self.shape(logits) != (index.len(), 1) {
            return Err(NnError::Shape("one logit per edge expected".into()));
        }
        let value = Matrix::column(&segment_softmax(self.value(logits).data(), index));
        let ng = self.needs(&[logits]);
        Ok(self.push(value, Op::SegmentSoftmax(logits, Rc::clone(index)), ng))
    }

    /// `out[u] = Σ_e alpha[e]·z[src(e)]` over edges received by `u`.
    pub fn aggregate(&mut self, alpha: Var, z: Var, index: &Rc<EdgeIndex>) -> Result<Var> {
        let (n, c) = self.shape(z);
        if n != index.nodes() || self.shape(alpha) != (index.len(), 1) {
            return Err(NnError::Shape("aggregate inputs disagree with the edge index".into()));
        }
        let mut value = Matrix::zeros(n, c);
        let (a, zv) = (self.value(alpha).data(), self.value(z));
        for e in 0..index.len() {
            let w = a[e];
            let src = zv.row(index.src()[e]);
            for (o, &x) in value.row_mut(index.dst()[e]).iter_mut().zip(src) {
                *o += w * x;
            }
        }
        let ng = self.needs(&[alpha, z]);
        Ok(self.push(value, Op::Aggregate { alpha, z, index: Rc::clone(index) }, ng))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(NnError::Shape(format!("loss must be 1x1, got {:?}", self.shape(loss))));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].needs_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, op: &Op, out: &Matrix, g: &Matrix, grads: &mut [Option<Matrix>]) {
        match op {
            Op::Constant | Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    Matrix::gemm(&mut ga, g, false, bv, true, 0.0);
                    self.accumulate(grads, *a, ga);
                }
                if self.wants(*b) {
                    let mut gb = Matrix::zeros(bv.rows(), bv.cols());
                    Matrix::gemm(&mut gb, av, true, g, false, 0.0);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::AddBias(a, bias) => {
                self.accumulate(grads, *a, g.clone());
                if self.wants(*bias) {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (s, x) in gb.data_mut().iter_mut().zip(g.row(i)) {
                            *s += x;
                        }
                    }
                    self.accumulate(grads, *bias, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let data = g.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
                    self.accumulate(grads, *a, Matrix::new(g.rows(), g.cols(), data).expect("same shape"));
                }
                if self.wants(*b) {
                    let data = g.data().iter().zip(av.data()).map(|(x, y)| x * y).collect();
                    self.accumulate(grads, *b, Matrix::new(g.rows(), g.cols(), data).expect("same shape"));
                }
            }
            Op::Affine(a, scale) => self.accumulate(grads, *a, g.map(|x| x * scale)),
            Op::Relu(a) => {
                let data = g.data().iter().zip(out.data()).map(|(x, y)| if *y > 0.0 { *x } else { 0.0 }).collect();
                self.accumulate(grads, *a, Matrix::new(g.rows(), g.cols(), data).expect("same shape"));
            }
            Op::LeakyRelu(a, slope) => {
                let input = self.value(*a);
                let data =
                    g.data().iter().zip(input.data()).map(|(x, y)| if *y > 0.0 { *x } else { slope * x }).collect();
                self.accumulate(grads, *a, Matrix::new(g.rows(), g.cols(), data).expect("same shape"));
            }
            Op::Tanh(a) => {
                let data = g.data().iter().zip(out.data()).map(|(x, y)| x * (1.0 - y * y)).collect();
                self.accumulate(grads, *a, Matrix::new(g.rows(), g.cols(), data).expect("same shape"));
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    if self.wants(p) {
                        let part = Matrix::from_fn(r, c, |i, j| g.get(i, off + j));
                        self.accumulate(grads, p, part);
                    }
                    off += c;
                }
            }
            Op::GatherRows(a, rows) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for (k, &i) in rows.iter().enumerate() {
                    for (s, x) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                        *s += x;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::PickCols(a, cols) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for (i, &j) in cols.iter().enumerate() {
                    ga.set(i, j, g.get(i, 0));
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(*a);
                let n = (r * c).max(1) as f64;
                self.accumulate(grads, *a, Matrix::filled(r, c, g.item() / n));
            }
            Op::Dueling(v, d) => {
                let (r, c) = self.shape(*d);
                if self.wants(*v) {
                    let sums: Vec<f64> = (0..r).map(|i| g.row(i).iter().sum()).collect();
                    self.accumulate(grads, *v, Matrix::column(&sums));
                }
                if self.wants(*d) {
                    let mut gd = g.clone();
                    for i in 0..r {
                        let row = gd.row_mut(i);
                        let mean = row.iter().sum::<f64>() / c as f64;
                        row.iter_mut().for_each(|x| *x -= mean);
                    }
                    self.accumulate(grads, *d, gd);
                }
            }
            Op::EdgeLogits { sl, sr, index, slope, scale } => {
                let n = index.nodes();
                let (l, r) = (self.value(*sl).data(), self.value(*sr).data());
                let mut gl = vec![0.0; n];
                let mut gr = vec![0.0; n];
                for e in 0..index.len() {
                    let (u, v) = (index.dst()[e], index.src()[e]);
                    let x = l[u] + r[v];
                    let mut d = g.data()[e] * if x > 0.0 { 1.0 } else { *slope };
                    if *scale {
                        d *= index.weight()[e];
                    }
                    gl[u] += d;
                    gr[v] += d;
                }
                self.accumulate(grads, *sl, Matrix::column(&gl));
                self.accumulate(grads, *sr, Matrix::column(&gr));
            }
            Op::SegmentSoftmax(logits, index) => {
                let alpha = out.data();
                let mut gz = vec![0.0; index.len()];
                for u in 0..index.nodes() {
                    let seg = index.segment(u);
                    let dot: f64 = seg.clone().map(|e| alpha[e] * g.data()[e]).sum();
                    for e in seg {
                        gz[e] = alpha[e] * (g.data()[e] - dot);
                    }
                }
                self.accumulate(grads, *logits, Matrix::column(&gz));
            }
            Op::Aggregate { alpha, z, index } => {
                let zv = self.value(*z);
                if self.wants(*alpha) {
                    let ga: Vec<f64> = (0..index.len())
                        .map(|e| g.row(index.dst()[e]).iter().zip(zv.row(index.src()[e])).map(|(x, y)| x * y).sum())
                        .collect();
                    self.accumulate(grads, *alpha, Matrix::column(&ga));
                }
                if self.wants(*z) {
                    let a = self.value(*alpha).data();
                    let mut gz = Matrix::zeros(zv.rows(), zv.cols());
                    for e in 0..index.len() {
                        let w = a[e];
                        let src = g.row(index.dst()[e]).to_vec();
                        for (s, x) in gz.row_mut(index.src()[e]).iter_mut().zip(&src) {
                            *s += w * x;
                        }
                    }
                    self.accumulate(grads, *z, gz);
                }
            }
        }
    }
}
