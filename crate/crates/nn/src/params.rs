//! Named parameter tensors, optimizer state and the checkpoint format.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{NnError, Result};
use crate::matrix::Matrix;
use crate::tape::{Gradients, Tape, Var};

const CHECKPOINT_MAGIC: &str = "hgrl-params";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Glorot-uniform `fan_in x fan_out` weight.
    pub fn add_glorot<R: Rng + ?Sized>(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut R) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        let value = Matrix::from_fn(fan_in, fan_out, |_, _| dist.sample(rng));
        self.add(name, value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|m| m.data().len()).sum()
    }

    pub fn same_layout(&self, other: &ParamStore) -> bool {
        self.names == other.names && self.values.iter().zip(&other.values).all(|(a, b)| a.shape() == b.shape())
    }

    /// Places every parameter on `tape` as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> ParamVars {
        ParamVars(self.values.iter().map(|v| tape.leaf(v.clone())).collect())
    }

    /// Per-parameter gradients; parameters the loss never touched get zeros.
    pub fn collect_grads(&self, vars: &ParamVars, grads: &mut Gradients) -> Vec<Matrix> {
        self.values
            .iter()
            .zip(&vars.0)
            .map(|(v, &var)| grads.take(var).unwrap_or_else(|| Matrix::zeros(v.rows(), v.cols())))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Versioned text record: a header, then per tensor a `name rows cols`
    /// line followed by one line of round-trippable values.
    pub fn to_text(&self) -> String {
        let mut s = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION} {}\n", self.values.len());
        for (name, m) in self.names.iter().zip(&self.values) {
            let _ = writeln!(s, "{name} {} {}", m.rows(), m.cols());
            let line: Vec<String> = m.data().iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| NnError::Checkpoint(msg);
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split_whitespace().collect();
        if header.len() != 3 || header[0] != CHECKPOINT_MAGIC {
            return Err(bad("missing header".into()));
        }
        let version: u32 = header[1].parse().map_err(|_| bad("bad version".into()))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let count: usize = header[2].parse().map_err(|_| bad("bad tensor count".into()))?;
        let mut store = ParamStore::new();
        for k in 0..count {
            let meta: Vec<&str> = lines.next().ok_or_else(|| bad(format!("tensor {k} missing")))?.split_whitespace().collect();
            if meta.len() != 3 {
                return Err(bad(format!("tensor {k}: malformed shape line")));
            }
            let rows: usize = meta[1].parse().map_err(|_| bad(format!("tensor {k}: rows")))?;
            let cols: usize = meta[2].parse().map_err(|_| bad(format!("tensor {k}: cols")))?;
            let values = lines
                .next()
                .ok_or_else(|| bad(format!("tensor {k}: values missing")))?
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|_| bad(format!("tensor {k}: value {x:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            let m = Matrix::new(rows, cols, values).map_err(|e| bad(format!("tensor {k}: {e}")))?;
            store.add(meta[0], m);
        }
        Ok(store)
    }
}

/// Tape variables of a bound [`ParamStore`], indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct ParamVars(Vec<Var>);

impl ParamVars {
    pub fn get(&self, id: ParamId) -> Var {
        self.0[id.0]
    }
}

/// `target ← (1 − tau)·target + tau·online`.
pub fn soft_update(target: &mut ParamStore, online: &ParamStore, tau: f64) -> Result<()> {
    if !target.same_layout(online) {
        return Err(NnError::Shape("soft update between different layouts".into()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(NnError::InvalidArgument(format!("tau {tau}")));
    }
    for (t, o) in target.values.iter_mut().zip(&online.values) {
        for (x, y) in t.data_mut().iter_mut().zip(o.data()) {
            *x = (1.0 - tau) * *x + tau * y;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; non-positive disables it.
    pub max_grad_norm: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, max_grad_norm: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, cfg: AdamConfig) -> Self {
        let zeros = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Self { cfg, m: store.values.iter().map(zeros).collect(), v: store.values.iter().map(zeros).collect(), t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &[Matrix]) -> Result<()> {
        if grads.len() != store.len() || grads.iter().zip(&store.values).any(|(g, p)| g.shape() != p.shape()) {
            return Err(NnError::Shape("gradients do not match parameters".into()));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(NnError::InvalidArgument("non-finite gradient".into()));
        }
        let mut clip = 1.0;
        if self.cfg.max_grad_norm > 0.0 {
            let norm = grads.iter().flat_map(|g| g.data()).map(|x| x * x).sum::<f64>().sqrt();
            if norm > self.cfg.max_grad_norm {
                clip = self.cfg.max_grad_norm / norm;
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps, .. } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (k, g) in grads.iter().enumerate() {
            let p = store.values[k].data_mut();
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i] * clip;
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
