//! Inter-layer structural encoders: Set, fully-connected graph, and Cayley graph.
//!
//! All encoders consume a batch of layer stacks laid out as a `(B * L) x d`
//! matrix (example-major, one row per layer) and return a `B x hidden`
//! representation.
//!
//! Graph encoders project every layer row to the hidden width, place the
//! projected rows on graph nodes, run GIN or GCN message passing over the
//! whole graph, and read out the mean over the nodes that hold a layer.
//! Cayley graphs come from [`crate::cayley`] at the smallest modulus whose
//! group covers `L`; nodes without a layer (virtual nodes) start at the zero
//! vector of the hidden space.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cayley::{build_cayley, complete_graph, smallest_n_for, CayleyGraph};
use crate::error::{invalid, IlseError, Result};
use crate::nn::{BlockOperator, Linear, Matrix, Mlp, ParamStore, Tape, Var};
use crate::rng::{stream, Rng, Stream};

pub const HIDDEN_WIDTH: usize = 256;

/// Pooled per-layer representations of one example: an `L x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    data: Matrix,
}

impl LayerStack {
    pub fn new(data: Matrix) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return invalid("layer stack needs at least one layer and one feature");
        }
        if data.iter().any(|v| !v.is_finite()) {
            return invalid("layer stack contains non-finite values");
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return invalid("layer rows differ in width");
        }
        let flat = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| IlseError::InvalidArgument(e.to_string()))?;
        Self::new(data)
    }

    pub fn layers(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn row(&self, layer: usize) -> Vec<f64> {
        self.data.row(layer).to_vec()
    }

    /// Rows reordered so that new row `i` is old row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            data: self.data.select(ndarray::Axis(0), perm),
        }
    }
}

/// Stacks examples into the `(B * L) x d` batch layout.
pub fn batch_matrix<'a>(stacks: impl IntoIterator<Item = &'a LayerStack>) -> Result<Matrix> {
    let views: Vec<ArrayView2<f64>> = stacks.into_iter().map(|s| s.data.view()).collect();
    if views.is_empty() {
        return invalid("empty batch");
    }
    ndarray::concatenate(ndarray::Axis(0), &views).map_err(|e| IlseError::InvalidArgument(e.to_string()))
}

/// Mean over the `T` token rows of one layer's hidden states.
pub fn mean_pool_tokens(hidden: ArrayView2<f64>) -> Result<Vec<f64>> {
    let t = hidden.nrows();
    if t == 0 {
        return invalid("mean_pool_tokens: no tokens");
    }
    Ok(hidden.sum_axis(ndarray::Axis(0)).mapv(|v| v / t as f64).to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Set,
    Fc,
    Cayley,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Gin,
    Gcn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    /// Ignored by the Set-Encoder.
    pub aggregation: Aggregation,
    pub mpnn_layers: usize,
    pub hidden: usize,
    pub gin_mlp_depth: usize,
    pub dropout: f64,
}

impl EncoderConfig {
    pub fn new(kind: EncoderKind, aggregation: Aggregation) -> Self {
        Self {
            kind,
            aggregation,
            mpnn_layers: 1,
            hidden: HIDDEN_WIDTH,
            gin_mlp_depth: 1,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.mpnn_layers) {
            return invalid(format!("mpnn_layers must be 1 or 2, got {}", self.mpnn_layers));
        }
        if self.gin_mlp_depth > 2 {
            return invalid(format!("gin_mlp_depth must be 0..=2, got {}", self.gin_mlp_depth));
        }
        if !(0.0..=0.3).contains(&self.dropout) {
            return invalid(format!("dropout must be in [0, 0.3], got {}", self.dropout));
        }
        if self.hidden == 0 {
            return invalid("hidden width must be positive");
        }
        Ok(())
    }

    fn gin_widths(&self) -> Vec<usize> {
        vec![self.hidden; self.gin_mlp_depth + 2]
    }

    /// Trainable scalars for inputs of `layers x dim`, excluding any task head.
    pub fn param_count(&self, dim: usize) -> usize {
        let h = self.hidden;
        match self.kind {
            EncoderKind::Set => Mlp::param_count(&[dim, h, h]) + Linear::param_count(h, h),
            EncoderKind::Fc | EncoderKind::Cayley => {
                let per_layer = match self.aggregation {
                    Aggregation::Gin => Mlp::param_count(&self.gin_widths()),
                    Aggregation::Gcn => Linear::param_count(h, h),
                };
                Linear::param_count(dim, h) + self.mpnn_layers * per_layer
            }
        }
    }
}

/// A parameterized map from a stack batch to one representation per example.
pub trait LayerEncoder: Send + Sync {
    fn layers(&self) -> usize;
    fn dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// `stacks` is a `(B * L) x d` tape value; returns `B x out_dim`.
    fn encode(&self, tape: &mut Tape, store: &ParamStore, stacks: Var) -> Result<Var>;
}

pub(crate) fn check_batch(enc: &dyn LayerEncoder, tape: &Tape, stacks: Var) -> Result<()> {
    let x = tape.value(stacks);
    if x.ncols() != enc.dim() || !x.nrows().is_multiple_of(enc.layers()) {
        return invalid(format!(
            "stack batch {:?} does not match L = {}, d = {}",
            x.dim(),
            enc.layers(),
            enc.dim()
        ));
    }
    Ok(())
}

/// Evaluates an encoder on a single stack (evaluation mode).
pub fn encode_one(enc: &dyn LayerEncoder, store: &ParamStore, stack: &LayerStack) -> Result<Vec<f64>> {
    if stack.layers() != enc.layers() || stack.dim() != enc.dim() {
        return invalid(format!(
            "stack is {} x {}, encoder expects {} x {}",
            stack.layers(),
            stack.dim(),
            enc.layers(),
            enc.dim()
        ));
    }
    let mut tape = Tape::new();
    let x = tape.constant(stack.matrix().clone())?;
    let out = enc.encode(&mut tape, store, x)?;
    Ok(tape.value(out).row(0).to_vec())
}

// ---------------------------------------------------------------------------
// Message passing

/// GIN propagation `A + I` (epsilon fixed at 0).
pub fn gin_operator(adjacency: &[Vec<usize>]) -> Result<BlockOperator> {
    let n = adjacency.len();
    let rows = adjacency
        .iter()
        .enumerate()
        .map(|(v, nbrs)| std::iter::once((v, 1.0)).chain(nbrs.iter().map(|&u| (u, 1.0))).collect())
        .collect();
    BlockOperator::new(n, n, rows)
}

/// GCN propagation `D^-1/2 (A + I) D^-1/2`.
pub fn gcn_operator(adjacency: &[Vec<usize>]) -> Result<BlockOperator> {
    let n = adjacency.len();
    let degree: Vec<f64> = adjacency.iter().map(|nbrs| (nbrs.len() + 1) as f64).collect();
    let rows = adjacency
        .iter()
        .enumerate()
        .map(|(v, nbrs)| {
            std::iter::once(v)
                .chain(nbrs.iter().copied())
                .map(|u| (u, 1.0 / (degree[v].sqrt() * degree[u].sqrt())))
                .collect()
        })
        .collect();
    BlockOperator::new(n, n, rows)
}

/// `h'_v = MLP(h_v + sum_{u in N(v)} h_u)`
pub fn gin_layer(tape: &mut Tape, store: &ParamStore, h: Var, propagation: &Arc<BlockOperator>, mlp: &Mlp) -> Result<Var> {
    let agg = tape.sparse(h, propagation)?;
    mlp.forward(tape, store, agg)
}

/// `H' = act(P H W + b)` with `P` the normalized propagation.
pub fn gcn_layer(
    tape: &mut Tape,
    store: &ParamStore,
    h: Var,
    propagation: &Arc<BlockOperator>,
    linear: &Linear,
    activate: bool,
) -> Result<Var> {
    let w = tape.param(store, linear.weight)?;
    let b = tape.param(store, linear.bias)?;
    let hw = tape.matmul(h, w)?;
    let agg = tape.sparse(hw, propagation)?;
    let out = tape.add_row(agg, b)?;
    if activate {
        tape.relu(out)
    } else {
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Set-Encoder

/// `rho(mean_l phi(z_l))` with `phi: d -> h -> h` and `rho: relu, h -> h`.
#[derive(Debug, Clone)]
pub struct SetEncoder {
    layers: usize,
    dim: usize,
    pub phi: Mlp,
    pub rho: Linear,
    pool: Arc<BlockOperator>,
}

impl SetEncoder {
    pub fn new(store: &mut ParamStore, config: &EncoderConfig, layers: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden;
        let phi = Mlp::new(store, "set.phi", &[dim, h, h], config.dropout, rng)?;
        let rho = Linear::new(store, "set.rho", h, h, rng)?;
        let pool = Arc::new(mean_readout(layers, &vec![true; layers])?);
        Ok(Self {
            layers,
            dim,
            phi,
            rho,
            pool,
        })
    }
}

impl LayerEncoder for SetEncoder {
    fn layers(&self) -> usize {
        self.layers
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.rho.fan_out
    }

    fn encode(&self, tape: &mut Tape, store: &ParamStore, stacks: Var) -> Result<Var> {
        check_batch(self, tape, stacks)?;
        let elems = self.phi.forward(tape, store, stacks)?;
        let pooled = tape.sparse(elems, &self.pool)?;
        let act = tape.relu(pooled)?;
        self.rho.forward(tape, store, act)
    }
}

// ---------------------------------------------------------------------------
// Graph encoders

/// Injective placement of `L` layers onto the nodes of a Cayley graph.
#[derive(Debug, Clone)]
pub struct NodeAssignment {
    pub graph: Arc<CayleyGraph>,
    pub layer_to_node: Vec<usize>,
    /// True for nodes that received no layer.
    pub virtual_mask: Vec<bool>,
}

impl NodeAssignment {
    pub fn from_map(graph: Arc<CayleyGraph>, layer_to_node: Vec<usize>) -> Result<Self> {
        let n = graph.node_count();
        let mut virtual_mask = vec![true; n];
        for &v in &layer_to_node {
            if v >= n || !virtual_mask[v] {
                return invalid("layer-to-node map must be injective into the graph");
            }
            virtual_mask[v] = false;
        }
        Ok(Self {
            graph,
            layer_to_node,
            virtual_mask,
        })
    }

    pub fn layers(&self) -> usize {
        self.layer_to_node.len()
    }

    pub fn virtual_count(&self) -> usize {
        self.virtual_mask.iter().filter(|&&m| m).count()
    }

    /// The assignment that sends layer `i` where layer `perm[i]` went before.
    /// Pairs with [`LayerStack::permuted`] so each layer keeps its node.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Self::from_map(Arc::clone(&self.graph), perm.iter().map(|&p| self.layer_to_node[p]).collect())
    }
}

/// Seeded uniform injective map of `L` layers onto `graph`.
pub fn assign_layers(layers: usize, graph: Arc<CayleyGraph>, seed: u64) -> Result<NodeAssignment> {
    let n = graph.node_count();
    if layers == 0 || layers > n {
        return invalid(format!("cannot place {layers} layers on a {n}-node graph"));
    }
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut stream(seed, Stream::Assignment));
    nodes.truncate(layers);
    NodeAssignment::from_map(graph, nodes)
}

/// Mean over the unmasked nodes, as a `1 x N` block operator.
pub fn mean_readout(nodes: usize, include: &[bool]) -> Result<BlockOperator> {
    let kept: Vec<usize> = (0..nodes).filter(|&v| include[v]).collect();
    if kept.is_empty() {
        return invalid("readout over zero nodes");
    }
    let w = 1.0 / kept.len() as f64;
    BlockOperator::new(1, nodes, vec![kept.into_iter().map(|v| (v, w)).collect()])
}

#[derive(Debug, Clone)]
pub enum MpnnLayer {
    Gin(Mlp),
    Gcn(Linear),
}

/// FC-Encoder and Cayley-Encoder share this implementation; they differ only
/// in graph, placement, and readout mask.
#[derive(Debug, Clone)]
pub struct GraphEncoder {
    layers: usize,
    dim: usize,
    hidden: usize,
    dropout: f64,
    pub projection: Linear,
    pub mpnn: Vec<MpnnLayer>,
    adjacency: Vec<Vec<usize>>,
    /// `N x L` placement of projected layers on nodes; `None` when nodes are layers.
    placement: Option<Arc<BlockOperator>>,
    propagation: Arc<BlockOperator>,
    readout: Arc<BlockOperator>,
    assignment: Option<NodeAssignment>,
}

impl GraphEncoder {
    fn build(
        store: &mut ParamStore,
        config: &EncoderConfig,
        dim: usize,
        adjacency: Vec<Vec<usize>>,
        assignment: Option<NodeAssignment>,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        let prefix = if assignment.is_some() { "cayley" } else { "fc" };
        let h = config.hidden;
        let nodes = adjacency.len();
        let (layers, placement, include) = match &assignment {
            Some(a) => {
                let mut rows = vec![Vec::new(); nodes];
                for (l, &v) in a.layer_to_node.iter().enumerate() {
                    rows[v].push((l, 1.0));
                }
                let place = BlockOperator::new(nodes, a.layers(), rows)?;
                let include: Vec<bool> = a.virtual_mask.iter().map(|m| !m).collect();
                (a.layers(), Some(Arc::new(place)), include)
            }
            None => (nodes, None, vec![true; nodes]),
        };
        let projection = Linear::new(store, &format!("{prefix}.proj"), dim, h, rng)?;
        let mpnn = (0..config.mpnn_layers)
            .map(|i| {
                let name = format!("{prefix}.mpnn{i}");
                Ok(match config.aggregation {
                    Aggregation::Gin => MpnnLayer::Gin(Mlp::new(store, &name, &config.gin_widths(), 0.0, rng)?),
                    Aggregation::Gcn => MpnnLayer::Gcn(Linear::new(store, &name, h, h, rng)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let propagation = Arc::new(match config.aggregation {
            Aggregation::Gin => gin_operator(&adjacency)?,
            Aggregation::Gcn => gcn_operator(&adjacency)?,
        });
        let readout = Arc::new(mean_readout(nodes, &include)?);
        Ok(Self {
            layers,
            dim,
            hidden: h,
            dropout: config.dropout,
            projection,
            mpnn,
            adjacency,
            placement,
            propagation,
            readout,
            assignment,
        })
    }

    /// FC-Encoder over the complete graph on the `L` layers.
    pub fn fully_connected(store: &mut ParamStore, config: &EncoderConfig, layers: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        if config.kind != EncoderKind::Fc {
            return invalid("fully_connected needs an fc config");
        }
        if layers == 0 {
            return invalid("FC-Encoder needs at least one layer");
        }
        Self::build(store, config, dim, complete_graph(layers), None, rng)
    }

    /// Cayley-Encoder over an existing assignment.
    pub fn cayley(store: &mut ParamStore, config: &EncoderConfig, assignment: NodeAssignment, dim: usize, rng: &mut Rng) -> Result<Self> {
        if config.kind != EncoderKind::Cayley {
            return invalid("cayley needs a cayley config");
        }
        let (n, _) = smallest_n_for(assignment.layers() as u64)?;
        if assignment.graph.modulus != n {
            return invalid(format!(
                "assignment uses SL(2, Z_{}) but {} layers need n = {n}",
                assignment.graph.modulus,
                assignment.layers()
            ));
        }
        let adjacency = assignment.graph.adjacency.clone();
        Self::build(store, config, dim, adjacency, Some(assignment), rng)
    }

    /// Cayley-Encoder on the smallest covering graph with a seeded random assignment.
    pub fn cayley_for_layers(
        store: &mut ParamStore,
        config: &EncoderConfig,
        layers: usize,
        dim: usize,
        assignment_seed: u64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let (n, _) = smallest_n_for(layers as u64)?;
        let graph = Arc::new(build_cayley(n)?);
        let assignment = assign_layers(layers, graph, assignment_seed)?;
        Self::cayley(store, config, assignment, dim, rng)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn assignment(&self) -> Option<&NodeAssignment> {
        self.assignment.as_ref()
    }

    pub fn placement(&self) -> Option<&BlockOperator> {
        self.placement.as_deref()
    }

    pub fn readout(&self) -> &BlockOperator {
        &self.readout
    }

    pub fn propagation(&self) -> &BlockOperator {
        &self.propagation
    }

    /// Node features after the last MPNN layer, `(B * N) x hidden`.
    pub fn encode_nodes(&self, tape: &mut Tape, store: &ParamStore, stacks: Var) -> Result<Var> {
        check_batch(self, tape, stacks)?;
        let projected = self.projection.forward(tape, store, stacks)?;
        let mut h = match &self.placement {
            Some(p) => tape.sparse(projected, p)?,
            None => projected,
        };
        let last = self.mpnn.len() - 1;
        for (i, layer) in self.mpnn.iter().enumerate() {
            h = match layer {
                MpnnLayer::Gin(mlp) => {
                    let out = gin_layer(tape, store, h, &self.propagation, mlp)?;
                    if i < last {
                        tape.relu(out)?
                    } else {
                        out
                    }
                }
                MpnnLayer::Gcn(lin) => gcn_layer(tape, store, h, &self.propagation, lin, i < last)?,
            };
            h = tape.dropout(h, self.dropout)?;
        }
        Ok(h)
    }
}

impl LayerEncoder for GraphEncoder {
    fn layers(&self) -> usize {
        self.layers
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn out_dim(&self) -> usize {
        self.hidden
    }

    fn encode(&self, tape: &mut Tape, store: &ParamStore, stacks: Var) -> Result<Var> {
        let nodes = self.encode_nodes(tape, store, stacks)?;
        tape.sparse(nodes, &self.readout)
    }
}
