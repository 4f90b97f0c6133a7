//! Traffic graphs: node feature matrices, the binary base adjacency, the
//! weighted lane-change (L) and following (F) adjacencies, and the degree and
//! attention-entropy analyses used to reason about them.
//!
//! Rows are always ordered by vehicle id. Only CAV rows carry off-diagonal
//! entries: HVs never send information, every vehicle sees itself.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, CoreError, Result};
use crate::sim::{follower_in_lane, leader_in_lane, VehicleState, NUM_LANES, SPEED_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DimTag {
    Global,
    L,
    F,
}

impl FromStr for DimTag {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" | "G" => Ok(DimTag::Global),
            "L" | "l" | "lane-change" => Ok(DimTag::L),
            "F" | "f" | "following" => Ok(DimTag::F),
            other => Err(CoreError::InvalidArgument(format!("unknown dimension tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdjTag {
    Base,
    L,
    F,
}

impl AdjTag {
    pub fn label(self) -> &'static str {
        match self {
            AdjTag::Base => "base",
            AdjTag::L => "L",
            AdjTag::F => "F",
        }
    }
}

/// Fixed normalization constants for node features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScale {
    pub pos: f64,
    pub speed: f64,
    pub lat: f64,
    pub lane: f64,
}

impl Default for FeatureScale {
    fn default() -> Self {
        Self { pos: 1000.0, speed: SPEED_LIMIT, lat: 3.0 * 3.2, lane: f64::from(NUM_LANES - 1) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatureMatrix {
    pub dim: DimTag,
    pub ids: Vec<u32>,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl NodeFeatureMatrix {
    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column_names(dim: DimTag) -> &'static [&'static str] {
        match dim {
            DimTag::Global => &["speed", "lat", "pos", "segment", "lane", "kind"],
            DimTag::L => &["pos", "lat", "lane", "kind"],
            DimTag::F => &["speed", "pos", "lane", "kind", "last_l_cmd"],
        }
    }
}

fn sorted_by_id(world: &[VehicleState]) -> Vec<&VehicleState> {
    let mut vs: Vec<&VehicleState> = world.iter().filter(|v| v.active).collect();
    vs.sort_by_key(|v| v.id);
    vs
}

pub fn build_node_features(
    world: &[VehicleState],
    dim: DimTag,
    last_l_actions: &BTreeMap<u32, i8>,
    scale: &FeatureScale,
) -> Result<NodeFeatureMatrix> {
    let vs = sorted_by_id(world);
    if vs.is_empty() {
        return Err(CoreError::InvalidArgument("world has no active vehicles".into()));
    }
    let cols = NodeFeatureMatrix::column_names(dim).len();
    let mut data = Vec::with_capacity(vs.len() * cols);
    for v in &vs {
        let speed = v.speed / scale.speed;
        let pos = v.pos / scale.pos;
        let lat = v.lat / scale.lat;
        let lane = f64::from(v.lane) / scale.lane;
        let kind = v.kind.indicator();
        match dim {
            DimTag::Global => data.extend([speed, lat, pos, v.segment.code(), lane, kind]),
            DimTag::L => data.extend([pos, lat, lane, kind]),
            DimTag::F => {
                let cmd = last_l_actions.get(&v.id).copied().unwrap_or(0);
                data.extend([speed, pos, lane, kind, f64::from(cmd)]);
            }
        }
    }
    if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
        return Err(CoreError::InvalidArgument(format!("non-finite node feature {bad}")));
    }
    Ok(NodeFeatureMatrix { dim, ids: vs.iter().map(|v| v.id).collect(), cols, data })
}

/// Square weighted adjacency with a shared id→row index map.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAdjacency {
    pub dim: AdjTag,
    pub ids: Vec<u32>,
    index: BTreeMap<u32, usize>,
    data: Vec<f64>,
}

impl WeightedAdjacency {
    pub fn zeros(dim: AdjTag, ids: Vec<u32>) -> Self {
        let index = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let n = ids.len();
        Self { dim, ids, index, data: vec![0.0; n * n] }
    }

    /// Builds from a dense row-major matrix; rows map to `ids` in order.
    pub fn from_dense(dim: AdjTag, ids: Vec<u32>, data: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if data.len() != n * n {
            return Err(CoreError::InvalidArgument(format!("expected {} entries, got {}", n * n, data.len())));
        }
        if data.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(CoreError::InvalidArgument("adjacency weights must lie in [0, 1]".into()));
        }
        let mut adj = Self::zeros(dim, ids);
        if adj.index.len() != n {
            return Err(CoreError::InvalidArgument("duplicate ids in adjacency".into()));
        }
        adj.data = data;
        Ok(adj)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        let n = self.len();
        self.data[i * n + j] = w;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn weight(&self, from: u32, to: u32) -> Option<f64> {
        Some(self.get(self.index_of(from)?, self.index_of(to)?))
    }

    /// Off-diagonal nonzero entries as (row id, column id, weight).
    pub fn edges(&self) -> Vec<(u32, u32, f64)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let w = self.get(i, j);
                if i != j && w > 0.0 {
                    out.push((self.ids[i], self.ids[j], w));
                }
            }
        }
        out
    }

    /// Copy without vehicle `id` (its row and column removed).
    pub fn without(&self, id: u32) -> Result<Self> {
        let skip = self.index_of(id).ok_or(CoreError::UnknownVehicle(id))?;
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != skip).collect();
        let ids = keep.iter().map(|&i| self.ids[i]).collect();
        let mut data = Vec::with_capacity(keep.len() * keep.len());
        for &i in &keep {
            data.extend(keep.iter().map(|&j| self.get(i, j)));
        }
        let index = keep.iter().enumerate().map(|(k, &i)| (self.ids[i], k)).collect();
        Ok(Self { dim: self.dim, ids, index, data })
    }
}

/// Thresholds and scales of the weighted graph edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphThresholds {
    /// Lane-change dimension distance threshold, m.
    pub x: f64,
    /// Following dimension distance threshold, m.
    pub y: f64,
    /// Speed-difference threshold, m/s.
    pub dv: f64,
    pub lambda_d: f64,
    pub lambda_v: f64,
    pub eps_v: f64,
}

impl Default for GraphThresholds {
    fn default() -> Self {
        Self { x: 50.0, y: 80.0, dv: 0.5, lambda_d: 30.0, lambda_v: 2.0, eps_v: 0.1 }
    }
}

impl GraphThresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [self.x, self.y, self.dv, self.lambda_d, self.lambda_v, self.eps_v];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(CoreError::InvalidArgument(format!("graph thresholds must be positive: {self:?}")))
        }
    }
}

/// Binary adjacency: a CAV row sees every vehicle closer than `x`; HV rows
/// only see themselves.
pub fn build_base_adjacency(world: &[VehicleState], thresholds: &GraphThresholds) -> Result<WeightedAdjacency> {
    let vs = sorted_by_id(world);
    if vs.is_empty() {
        return Err(CoreError::InvalidArgument("world has no active vehicles".into()));
    }
    let mut adj = WeightedAdjacency::zeros(AdjTag::Base, vs.iter().map(|v| v.id).collect());
    for (i, vi) in vs.iter().enumerate() {
        adj.set(i, i, 1.0);
        if !vi.is_cav() {
            continue;
        }
        for (j, vj) in vs.iter().enumerate() {
            if i != j && (vi.pos - vj.pos).abs() < thresholds.x {
                adj.set(i, j, 1.0);
            }
        }
    }
    Ok(adj)
}

/// Lane-change edge weight `max(0, 1 - d/X)` below the threshold, 0 beyond.
pub fn lane_change_weight(delta_d: f64, x: f64) -> Result<f64> {
    ensure_finite("delta_d", delta_d)?;
    ensure_finite("x", x)?;
    if delta_d < 0.0 || x <= 0.0 {
        return Err(CoreError::InvalidArgument(format!("need delta_d >= 0 and X > 0, got {delta_d}, {x}")));
    }
    Ok(if delta_d < x { (1.0 - delta_d / x).max(0.0) } else { 0.0 })
}

/// Following edge weight `exp(-d/λd - λv/Δv)` for `d < Y`, with `Δv`
/// replaced by `max(|Δv|, eps_v)`.
pub fn following_weight(delta_d: f64, delta_v: f64, t: &GraphThresholds) -> Result<f64> {
    ensure_finite("delta_d", delta_d)?;
    if delta_v.is_nan() {
        return Err(CoreError::InvalidArgument("delta_v is NaN".into()));
    }
    if delta_d < 0.0 {
        return Err(CoreError::InvalidArgument(format!("delta_d must be non-negative, got {delta_d}")));
    }
    let dv = delta_v.abs().max(t.eps_v);
    if delta_d < t.y && dv >= t.eps_v {
        Ok((-delta_d / t.lambda_d - t.lambda_v / dv).exp())
    } else {
        Ok(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    /// Both dimensions use the binary base adjacency.
    Basic,
    /// Weighted lane-change and following adjacencies.
    Multilevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelGraph {
    pub features_global: NodeFeatureMatrix,
    pub features_l: NodeFeatureMatrix,
    pub features_f: NodeFeatureMatrix,
    pub adj_l: WeightedAdjacency,
    pub adj_f: WeightedAdjacency,
    pub tick: u64,
}

pub fn build_multilevel_graph(
    world: &[VehicleState],
    thresholds: &GraphThresholds,
    last_l_actions: &BTreeMap<u32, i8>,
    scale: &FeatureScale,
    tick: u64,
) -> Result<MultilevelGraph> {
    let vs = sorted_by_id(world);
    if vs.is_empty() {
        return Err(CoreError::InvalidArgument("world has no active vehicles".into()));
    }
    let ids: Vec<u32> = vs.iter().map(|v| v.id).collect();
    let mut adj_l = WeightedAdjacency::zeros(AdjTag::L, ids.clone());
    let mut adj_f = WeightedAdjacency::zeros(AdjTag::F, ids);
    for (i, vi) in vs.iter().enumerate() {
        adj_l.set(i, i, 1.0);
        adj_f.set(i, i, 1.0);
        if !vi.is_cav() {
            continue;
        }
        for (j, vj) in vs.iter().enumerate() {
            if i != j && vi.lane.abs_diff(vj.lane) == 1 {
                adj_l.set(i, j, lane_change_weight((vi.pos - vj.pos).abs(), thresholds.x)?);
            }
        }
        let neighbors = [leader_in_lane(world, vi, vi.lane), follower_in_lane(world, vi, vi.lane)];
        for vj in neighbors.into_iter().flatten() {
            let j = adj_f.index_of(vj.id).expect("neighbor is active");
            let w = following_weight((vi.pos - vj.pos).abs(), vi.speed - vj.speed, thresholds)?;
            adj_f.set(i, j, w);
        }
    }
    Ok(MultilevelGraph {
        features_global: build_node_features(world, DimTag::Global, last_l_actions, scale)?,
        features_l: build_node_features(world, DimTag::L, last_l_actions, scale)?,
        features_f: build_node_features(world, DimTag::F, last_l_actions, scale)?,
        adj_l,
        adj_f,
        tick,
    })
}

/// Graph with both dimension adjacencies replaced by the binary base one.
pub fn build_basic_graph(
    world: &[VehicleState],
    thresholds: &GraphThresholds,
    last_l_actions: &BTreeMap<u32, i8>,
    scale: &FeatureScale,
    tick: u64,
) -> Result<MultilevelGraph> {
    let base = build_base_adjacency(world, thresholds)?;
    let mut adj_l = base.clone();
    adj_l.dim = AdjTag::L;
    let mut adj_f = base;
    adj_f.dim = AdjTag::F;
    Ok(MultilevelGraph {
        features_global: build_node_features(world, DimTag::Global, last_l_actions, scale)?,
        features_l: build_node_features(world, DimTag::L, last_l_actions, scale)?,
        features_f: build_node_features(world, DimTag::F, last_l_actions, scale)?,
        adj_l,
        adj_f,
        tick,
    })
}

pub fn build_graph(
    mode: GraphMode,
    world: &[VehicleState],
    thresholds: &GraphThresholds,
    last_l_actions: &BTreeMap<u32, i8>,
    scale: &FeatureScale,
    tick: u64,
) -> Result<MultilevelGraph> {
    match mode {
        GraphMode::Basic => build_basic_graph(world, thresholds, last_l_actions, scale, tick),
        GraphMode::Multilevel => build_multilevel_graph(world, thresholds, last_l_actions, scale, tick),
    }
}

/// Node-local view used as one network sample: the ego's receptive field of
/// `hops` message-passing rounds, ego first.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoGraph {
    pub ids: Vec<u32>,
    pub cols: usize,
    pub features: Vec<f64>,
    /// (receiving row, sending row, weight), self-loops included.
    pub edges: Vec<(usize, usize, f64)>,
}

impl MultilevelGraph {
    pub fn parts(&self, dim: DimTag) -> (&NodeFeatureMatrix, &WeightedAdjacency) {
        match dim {
            DimTag::L => (&self.features_l, &self.adj_l),
            DimTag::F => (&self.features_f, &self.adj_f),
            DimTag::Global => (&self.features_global, &self.adj_l),
        }
    }

    pub fn ego_subgraph(&self, dim: DimTag, ego: u32, hops: usize) -> Result<EgoGraph> {
        let (feats, adj) = self.parts(dim);
        let root = adj.index_of(ego).ok_or(CoreError::UnknownVehicle(ego))?;
        let mut order = vec![root];
        let mut seen = BTreeSet::from([root]);
        let mut frontier = vec![root];
        for _ in 0..hops {
            let mut next = Vec::new();
            for &u in &frontier {
                for (v, &w) in adj.row(u).iter().enumerate() {
                    if w > 0.0 && seen.insert(v) {
                        order.push(v);
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        let local: BTreeMap<usize, usize> = order.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut edges = Vec::new();
        for (k, &u) in order.iter().enumerate() {
            for (v, &w) in adj.row(u).iter().enumerate() {
                if w > 0.0 {
                    if let Some(&kv) = local.get(&v) {
                        edges.push((k, kv, w));
                    }
                }
            }
        }
        let mut features = Vec::with_capacity(order.len() * feats.cols);
        for &i in &order {
            features.extend_from_slice(feats.row(i));
        }
        Ok(EgoGraph { ids: order.iter().map(|&i| adj.ids[i]).collect(), cols: feats.cols, features, edges })
    }

    pub fn snapshot(&self) -> GraphSnapshot {
        let names = NodeFeatureMatrix::column_names(DimTag::Global);
        let nodes = (0..self.features_global.rows())
            .map(|i| NodeRow {
                id: self.features_global.ids[i],
                features: names.iter().map(|s| s.to_string()).zip(self.features_global.row(i).iter().copied()).collect(),
            })
            .collect();
        let mut edges = Vec::new();
        for adj in [&self.adj_l, &self.adj_f] {
            edges.extend(adj.edges().into_iter().map(|(i, j, w)| EdgeTriple { i, j, w, dim: adj.dim.label().to_string() }));
        }
        GraphSnapshot { tick: self.tick, nodes, edges }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub id: u32,
    pub features: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTriple {
    pub i: u32,
    pub j: u32,
    pub w: f64,
    pub dim: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub tick: u64,
    pub nodes: Vec<NodeRow>,
    pub edges: Vec<EdgeTriple>,
}

/// Row sum excluding the diagonal.
pub fn weighted_degree(adj: &WeightedAdjacency, id: u32) -> Result<f64> {
    let i = adj.index_of(id).ok_or(CoreError::UnknownVehicle(id))?;
    Ok(adj.row(i).iter().enumerate().filter(|&(j, _)| j != i).map(|(_, w)| w).sum())
}

/// Number of nonzero off-diagonal entries in the row.
pub fn binary_degree(adj: &WeightedAdjacency, id: u32) -> Result<usize> {
    let i = adj.index_of(id).ok_or(CoreError::UnknownVehicle(id))?;
    Ok(adj.row(i).iter().enumerate().filter(|&(j, w)| j != i && *w > 0.0).count())
}

/// Undirected edge count: pairs linked in either direction.
pub fn undirected_edge_count(adj: &WeightedAdjacency) -> usize {
    let n = adj.len();
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| adj.get(i, j) > 0.0 || adj.get(j, i) > 0.0).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemovalDelta {
    /// Observed change of each remaining node's weighted degree.
    pub weighted: BTreeMap<u32, f64>,
    /// Observed change of each remaining node's binary degree.
    pub binary: BTreeMap<u32, i64>,
    pub edges_before: usize,
    pub edges_after: usize,
}

/// Deletes `u` and measures how every other node's degree moves.
pub fn node_removal_degree_delta(adj: &WeightedAdjacency, u: u32) -> Result<RemovalDelta> {
    let reduced = adj.without(u)?;
    let mut weighted = BTreeMap::new();
    let mut binary = BTreeMap::new();
    for &v in &reduced.ids {
        weighted.insert(v, weighted_degree(&reduced, v)? - weighted_degree(adj, v)?);
        binary.insert(v, binary_degree(&reduced, v)? as i64 - binary_degree(adj, v)? as i64);
    }
    Ok(RemovalDelta {
        weighted,
        binary,
        edges_before: undirected_edge_count(adj),
        edges_after: undirected_edge_count(&reduced),
    })
}

/// Attention distributions over node ids for the two dimensions and the
/// global graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttentionMaps {
    pub l: BTreeMap<u32, f64>,
    pub f: BTreeMap<u32, f64>,
    pub global: BTreeMap<u32, f64>,
}

/// Shannon entropy in nats; fails unless `p` sums to 1 within 1e-9.
pub fn shannon_entropy<'a>(p: impl IntoIterator<Item = &'a f64>) -> Result<f64> {
    let mut total = 0.0;
    let mut h = 0.0;
    for &q in p {
        if !(0.0..=1.0).contains(&q) {
            return Err(CoreError::InvalidArgument(format!("probability {q} outside [0, 1]")));
        }
        total += q;
        if q > 0.0 {
            h -= q * q.ln();
        }
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(CoreError::InvalidArgument(format!("distribution sums to {total}, not 1")));
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyComparison {
    pub h_l: f64,
    pub h_f: f64,
    pub h_g: f64,
}

/// Entropies of the per-dimension and global attention maps. Every node a
/// map mentions must belong to the graph.
pub fn attention_entropy_compare(graph: &MultilevelGraph, attention: &AttentionMaps) -> Result<EntropyComparison> {
    for map in [&attention.l, &attention.f, &attention.global] {
        if let Some(id) = map.keys().find(|id| graph.features_global.ids.binary_search(id).is_err()) {
            return Err(CoreError::UnknownVehicle(*id));
        }
    }
    Ok(EntropyComparison {
        h_l: shannon_entropy(attention.l.values())?,
        h_f: shannon_entropy(attention.f.values())?,
        h_g: shannon_entropy(attention.global.values())?,
    })
}

/// True when `p_t(i) > p(i)` for every node of the sub-dimensional map.
pub fn attention_premise_holds(sub: &BTreeMap<u32, f64>, global: &BTreeMap<u32, f64>) -> bool {
    sub.iter().all(|(id, p)| global.get(id).is_some_and(|g| p > g))
}
