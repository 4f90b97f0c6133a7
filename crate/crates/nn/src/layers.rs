use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::graph::EdgeIndex;
use crate::matrix::Matrix;
use crate::params::{ParamId, ParamStore, ParamVars};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let w = store.add_glorot(format!("{name}.w"), input, output, rng);
        let b = store.add(format!("{name}.b"), Matrix::zeros(1, output));
        Self { w, b, input, output }
    }

    /// Output layer with weights in `±limit`, so initial outputs stay near zero.
    pub fn new_small<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        limit: f64,
        rng: &mut R,
    ) -> Self {
        let w = store.add(format!("{name}.w"), Matrix::from_fn(input, output, |_, _| rng.random_range(-limit..=limit)));
        let b = store.add(format!("{name}.b"), Matrix::zeros(1, output));
        Self { w, b, input, output }
    }

    pub fn forward(&self, tape: &mut Tape, vars: &ParamVars, x: Var) -> Result<Var> {
        let y = tape.matmul(x, vars.get(self.w))?;
        tape.add_bias(y, vars.get(self.b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadAgg {
    #[default]
    Sum,
    Concat,
}

impl FromStr for HeadAgg {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(HeadAgg::Sum),
            "concat" => Ok(HeadAgg::Concat),
            other => Err(NnError::InvalidArgument(format!("head_agg {other:?}"))),
        }
    }
}

impl fmt::Display for HeadAgg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadAgg::Sum => "sum",
            HeadAgg::Concat => "concat",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatHead {
    pub w: ParamId,
    /// Halves of the attention vector acting on the receiver and the sender.
    pub a_dst: ParamId,
    pub a_src: ParamId,
}

/// Multi-head attention over weighted edges. Logits are
/// `LeakyReLU(a_dst·W h_u + a_src·W h_v)·a_uv`, normalized only over the
/// edges node `u` actually has.
#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    pub heads: Vec<GatHead>,
    pub input: usize,
    pub head_width: usize,
    pub slope: f64,
    pub agg: HeadAgg,
    /// ReLU on each head's output; off only in tests.
    pub activate: bool,
}

impl GatLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        head_width: usize,
        heads: usize,
        slope: f64,
        agg: HeadAgg,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || !(slope > 0.0 && slope < 1.0) {
            return Err(NnError::InvalidArgument(format!("{heads} heads, slope {slope}")));
        }
        let heads = (0..heads)
            .map(|k| GatHead {
                w: store.add_glorot(format!("{name}.h{k}.w"), input, head_width, rng),
                a_dst: store.add_glorot(format!("{name}.h{k}.a_dst"), head_width, 1, rng),
                a_src: store.add_glorot(format!("{name}.h{k}.a_src"), head_width, 1, rng),
            })
            .collect();
        Ok(Self { heads, input, head_width, slope, agg, activate: true })
    }

    pub fn output(&self) -> usize {
        match self.agg {
            HeadAgg::Sum => self.head_width,
            HeadAgg::Concat => self.head_width * self.heads.len(),
        }
    }

    fn head_parts(&self, tape: &mut Tape, vars: &ParamVars, h: Var, head: &GatHead, index: &Rc<EdgeIndex>) -> Result<(Var, Var)> {
        let z = tape.matmul(h, vars.get(head.w))?;
        let sl = tape.matmul(z, vars.get(head.a_dst))?;
        let sr = tape.matmul(z, vars.get(head.a_src))?;
        let logits = tape.edge_logits(sl, sr, index, self.slope, true)?;
        let alpha = tape.segment_softmax(logits, index)?;
        Ok((z, alpha))
    }

    /// Per-head attention coefficients, one entry per edge of `index`.
    pub fn attention(&self, tape: &mut Tape, vars: &ParamVars, h: Var, index: &Rc<EdgeIndex>) -> Result<Vec<Var>> {
        self.heads.iter().map(|head| Ok(self.head_parts(tape, vars, h, head, index)?.1)).collect()
    }

    pub fn forward(&self, tape: &mut Tape, vars: &ParamVars, h: Var, index: &Rc<EdgeIndex>) -> Result<Var> {
        let (rows, cols) = tape.value(h).shape();
        if cols != self.input || rows != index.nodes() {
            return Err(NnError::Shape(format!("GAT input {rows}x{cols}, expected {}x{}", index.nodes(), self.input)));
        }
        let mut outs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let (z, alpha) = self.head_parts(tape, vars, h, head, index)?;
            let agg = tape.aggregate(alpha, z, index)?;
            outs.push(if self.activate { tape.relu(agg) } else { agg });
        }
        match self.agg {
            HeadAgg::Concat => tape.concat_cols(&outs),
            HeadAgg::Sum => {
                let mut acc = outs[0];
                for &o in &outs[1..] {
                    acc = tape.add(acc, o)?;
                }
                Ok(acc)
            }
        }
    }
}

/// `σ(Ĉ h W + b)` with `Ĉ` the degree-normalized `offdiag(A) + I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcnLayer {
    pub lin: Linear,
    pub activate: bool,
}

impl GcnLayer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Self { lin: Linear::new(store, name, input, output, rng), activate: true }
    }

    /// `normalized` must come from [`EdgeIndex::gcn_normalized`].
    pub fn forward(&self, tape: &mut Tape, vars: &ParamVars, h: Var, normalized: &Rc<EdgeIndex>) -> Result<Var> {
        let z = tape.matmul(h, vars.get(self.lin.w))?;
        let c = tape.constant(Matrix::column(normalized.weight()));
        let agg = tape.aggregate(c, z, normalized)?;
        let out = tape.add_bias(agg, vars.get(self.lin.b))?;
        Ok(if self.activate { tape.relu(out) } else { out })
    }
}
