//! Bipartite graph convolutional network predicting `P(x_j = 1)` for every
//! binary variable.
//!
//! Wiring, with `relu` after every affine map except the head:
//!
//! ```text
//! hv0 = relu(var_embed(var_feats))          hc0 = relu(con_embed(con_feats))
//! variable -> constraint half-convolution:
//!   m_e  = relu(conv_v2c.msg([hc0_i, hv0_j, a_ij]))  for each edge e = (i, j)
//!   hc1_i = relu(conv_v2c.upd([hc0_i, mean_e m_e]))
//! constraint -> variable half-convolution:
//!   m_e  = relu(conv_c2v.msg([hv0_j, hc1_i, a_ij]))
//!   hv1_j = relu(conv_c2v.upd([hv0_j, mean_e m_e]))
//! p_j = sigmoid(head(hv1_j))                 for binary j
//! ```
//!
//! Nodes without neighbours aggregate a zero message.

mod backward;
mod io;
mod loss;
mod train;

pub use backward::backward;
pub use io::{load_model, save_model, ModelFormatError};
pub use loss::{
    compute_solution_weights, loss, loss_fullbatch, loss_minibatch, LossMode, Target,
    TrainingBatch, TrainingExample, WeightScheme, PROB_CLAMP,
};
pub use train::{train, TrainConfig};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{BipartiteGraph, CON_FEATURES, VAR_FEATURES};
use crate::matrix::Matrix;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GcnnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid training batch: {0}")]
    InvalidBatch(String),
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    DivergenceDetected { epoch: usize },
    #[error("empty dataset")]
    EmptyDataset,
}

/// `y = W x + b` with `W: out x in`, `b: 1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Affine {
    pub fn zeros(input: usize, output: usize) -> Self {
        Affine {
            weight: Matrix::zeros(output, input),
            bias: Matrix::zeros(1, output),
        }
    }

    fn uniform(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let mut layer = Affine::zeros(input, output);
        for w in layer.weight.data_mut() {
            *w = rng.random_range(-bound..=bound);
        }
        for b in layer.bias.data_mut() {
            *b = rng.random_range(-bound..=bound);
        }
        layer
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Writes `W x + b` into `out`.
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.bias.data()[k]
                + self
                    .weight
                    .row(k)
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>();
        }
    }
}

/// Message and update maps of one half-convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfConv {
    /// `[receiver, sender, edge] (2H + 1) -> H`
    pub msg: Affine,
    /// `[receiver, aggregated message] (2H) -> H`
    pub upd: Affine,
}

impl HalfConv {
    fn zeros(hidden: usize) -> Self {
        HalfConv {
            msg: Affine::zeros(2 * hidden + 1, hidden),
            upd: Affine::zeros(2 * hidden, hidden),
        }
    }

    fn uniform(hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        HalfConv {
            msg: Affine::uniform(2 * hidden + 1, hidden, rng),
            upd: Affine::uniform(2 * hidden, hidden, rng),
        }
    }
}

/// All trainable parameters. Gradients use the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnnParams {
    pub var_embed: Affine,
    pub con_embed: Affine,
    pub conv_v2c: HalfConv,
    pub conv_c2v: HalfConv,
    pub head: Affine,
}

pub const BLOCK_NAMES: [&str; 14] = [
    "var_embed.weight",
    "var_embed.bias",
    "con_embed.weight",
    "con_embed.bias",
    "conv_v2c.msg.weight",
    "conv_v2c.msg.bias",
    "conv_v2c.upd.weight",
    "conv_v2c.upd.bias",
    "conv_c2v.msg.weight",
    "conv_c2v.msg.bias",
    "conv_c2v.upd.weight",
    "conv_c2v.upd.bias",
    "head.weight",
    "head.bias",
];

impl GcnnParams {
    pub fn zeros(hidden: usize, var_features: usize, con_features: usize) -> Self {
        GcnnParams {
            var_embed: Affine::zeros(var_features, hidden),
            con_embed: Affine::zeros(con_features, hidden),
            conv_v2c: HalfConv::zeros(hidden),
            conv_c2v: HalfConv::zeros(hidden),
            head: Affine::zeros(hidden, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        GcnnParams::zeros(
            self.head.input_dim(),
            self.var_embed.input_dim(),
            self.con_embed.input_dim(),
        )
    }

    /// Parameter matrices in [`BLOCK_NAMES`] order.
    pub fn blocks(&self) -> [&Matrix; 14] {
        [
            &self.var_embed.weight,
            &self.var_embed.bias,
            &self.con_embed.weight,
            &self.con_embed.bias,
            &self.conv_v2c.msg.weight,
            &self.conv_v2c.msg.bias,
            &self.conv_v2c.upd.weight,
            &self.conv_v2c.upd.bias,
            &self.conv_c2v.msg.weight,
            &self.conv_c2v.msg.bias,
            &self.conv_c2v.upd.weight,
            &self.conv_c2v.upd.bias,
            &self.head.weight,
            &self.head.bias,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Matrix; 14] {
        [
            &mut self.var_embed.weight,
            &mut self.var_embed.bias,
            &mut self.con_embed.weight,
            &mut self.con_embed.bias,
            &mut self.conv_v2c.msg.weight,
            &mut self.conv_v2c.msg.bias,
            &mut self.conv_v2c.upd.weight,
            &mut self.conv_v2c.upd.bias,
            &mut self.conv_c2v.msg.weight,
            &mut self.conv_c2v.msg.bias,
            &mut self.conv_c2v.upd.weight,
            &mut self.conv_c2v.upd.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.data().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|b| b.data().iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &GcnnParams, scale: f64) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d += scale * s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnnModel {
    pub params: GcnnParams,
    pub version: u32,
}

impl GcnnModel {
    /// Seeded uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(hidden: usize, seed: u64) -> Self {
        Self::with_dims(hidden, VAR_FEATURES, CON_FEATURES, seed)
    }

    pub fn with_dims(hidden: usize, var_features: usize, con_features: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = GcnnParams {
            var_embed: Affine::uniform(var_features, hidden, &mut rng),
            con_embed: Affine::uniform(con_features, hidden, &mut rng),
            conv_v2c: HalfConv::uniform(hidden, &mut rng),
            conv_c2v: HalfConv::uniform(hidden, &mut rng),
            head: Affine::uniform(hidden, 1, &mut rng),
        };
        GcnnModel {
            params,
            version: FORMAT_VERSION,
        }
    }

    /// Zeroes the output head so every prediction is exactly 0.5.
    pub fn with_zero_head(mut self) -> Self {
        self.params.head = Affine::zeros(self.hidden(), 1);
        self
    }

    /// A model that predicts `p` for every binary variable of every graph.
    pub fn constant(p: f64, hidden: usize) -> Self {
        assert!(p > 0.0 && p < 1.0, "constant probability must be in (0, 1)");
        let mut params = GcnnParams::zeros(hidden, VAR_FEATURES, CON_FEATURES);
        params.head.bias.set(0, 0, (p / (1.0 - p)).ln());
        GcnnModel {
            params,
            version: FORMAT_VERSION,
        }
    }

    pub fn hidden(&self) -> usize {
        self.params.head.input_dim()
    }

    pub fn var_features(&self) -> usize {
        self.params.var_embed.input_dim()
    }

    pub fn con_features(&self) -> usize {
        self.params.con_embed.input_dim()
    }

    pub fn check_graph(&self, graph: &BipartiteGraph) -> Result<(), GcnnError> {
        if graph.var_feats.cols() != self.var_features() {
            return Err(GcnnError::ShapeMismatch(format!(
                "model expects {} variable features, graph has {}",
                self.var_features(),
                graph.var_feats.cols()
            )));
        }
        if graph.con_feats.cols() != self.con_features() {
            return Err(GcnnError::ShapeMismatch(format!(
                "model expects {} constraint features, graph has {}",
                self.con_features(),
                graph.con_feats.cols()
            )));
        }
        if graph.binary_mask.len() != graph.num_vars() {
            return Err(GcnnError::ShapeMismatch("binary mask length".into()));
        }
        for e in &graph.edges {
            if e.con >= graph.num_cons() || e.var >= graph.num_vars() {
                return Err(GcnnError::ShapeMismatch(format!(
                    "edge ({}, {}) out of range",
                    e.con, e.var
                )));
            }
        }
        Ok(())
    }

    /// Probabilities for the binary variables of `graph`, in variable order.
    /// Outputs are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`, so a saturated
    /// logit never reaches exactly 0 or 1.
    pub fn forward(&self, graph: &BipartiteGraph) -> Result<Vec<f64>, GcnnError> {
        self.check_graph(graph)?;
        Ok(forward_cached(&self.params, graph)
            .logits
            .iter()
            .map(|&z| sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
            .collect())
    }
}

pub fn forward(model: &GcnnModel, graph: &BipartiteGraph) -> Result<Vec<f64>, GcnnError> {
    model.forward(graph)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Intermediate activations kept for the backward pass. `pre_*` are
/// pre-activations, `*_in` the concatenated inputs of each map.
pub(crate) struct ForwardCache {
    pub pre_v0: Matrix,
    pub pre_c0: Matrix,
    pub v2c_msg_in: Matrix,
    pub v2c_msg_pre: Matrix,
    pub v2c_upd_in: Matrix,
    pub v2c_upd_pre: Matrix,
    pub c2v_msg_in: Matrix,
    pub c2v_msg_pre: Matrix,
    pub c2v_upd_in: Matrix,
    pub c2v_upd_pre: Matrix,
    pub hv1: Matrix,
    pub con_degree: Vec<usize>,
    pub var_degree: Vec<usize>,
    pub binary: Vec<usize>,
    pub logits: Vec<f64>,
}

fn embed(layer: &Affine, feats: &Matrix) -> (Matrix, Matrix) {
    let h = layer.output_dim();
    let mut pre = Matrix::zeros(feats.rows(), h);
    for r in 0..feats.rows() {
        layer.apply(feats.row(r), pre.row_mut(r));
    }
    let mut act = pre.clone();
    relu_in_place(act.data_mut());
    (pre, act)
}

/// One half-convolution. `receiver_of` / `sender_of` pick the endpoint of
/// each edge; returns (msg_in, msg_pre, upd_in, upd_pre, updated).
fn half_conv(
    conv: &HalfConv,
    graph: &BipartiteGraph,
    receivers: &Matrix,
    senders: &Matrix,
    receiver_of: impl Fn(usize) -> usize,
    sender_of: impl Fn(usize) -> usize,
    degree: &[usize],
) -> (Matrix, Matrix, Matrix, Matrix, Matrix) {
    let h = conv.upd.output_dim();
    let n_edges = graph.edges.len();
    let mut msg_in = Matrix::zeros(n_edges, 2 * h + 1);
    let mut msg_pre = Matrix::zeros(n_edges, h);
    let mut agg = Matrix::zeros(receivers.rows(), h);
    let mut msg = vec![0.0; h];
    for (k, e) in graph.edges.iter().enumerate() {
        let (r, s) = (receiver_of(k), sender_of(k));
        let input = msg_in.row_mut(k);
        input[..h].copy_from_slice(receivers.row(r));
        input[h..2 * h].copy_from_slice(senders.row(s));
        input[2 * h] = e.feat;
        conv.msg.apply(msg_in.row(k), msg_pre.row_mut(k));
        msg.copy_from_slice(msg_pre.row(k));
        relu_in_place(&mut msg);
        let inv = 1.0 / degree[r] as f64;
        for (a, m) in agg.row_mut(r).iter_mut().zip(&msg) {
            *a += m * inv;
        }
    }
    let mut upd_in = Matrix::zeros(receivers.rows(), 2 * h);
    let mut upd_pre = Matrix::zeros(receivers.rows(), h);
    for r in 0..receivers.rows() {
        let input = upd_in.row_mut(r);
        input[..h].copy_from_slice(receivers.row(r));
        input[h..].copy_from_slice(agg.row(r));
        conv.upd.apply(upd_in.row(r), upd_pre.row_mut(r));
    }
    let mut out = upd_pre.clone();
    relu_in_place(out.data_mut());
    (msg_in, msg_pre, upd_in, upd_pre, out)
}

pub(crate) fn forward_cached(params: &GcnnParams, graph: &BipartiteGraph) -> ForwardCache {
    let mut con_degree = vec![0usize; graph.num_cons()];
    let mut var_degree = vec![0usize; graph.num_vars()];
    for e in &graph.edges {
        con_degree[e.con] += 1;
        var_degree[e.var] += 1;
    }

    let (pre_v0, hv0) = embed(&params.var_embed, &graph.var_feats);
    let (pre_c0, hc0) = embed(&params.con_embed, &graph.con_feats);

    let (v2c_msg_in, v2c_msg_pre, v2c_upd_in, v2c_upd_pre, hc1) = half_conv(
        &params.conv_v2c,
        graph,
        &hc0,
        &hv0,
        |k| graph.edges[k].con,
        |k| graph.edges[k].var,
        &con_degree,
    );
    let (c2v_msg_in, c2v_msg_pre, c2v_upd_in, c2v_upd_pre, hv1) = half_conv(
        &params.conv_c2v,
        graph,
        &hv0,
        &hc1,
        |k| graph.edges[k].var,
        |k| graph.edges[k].con,
        &var_degree,
    );

    let binary = graph.binary_indices();
    let mut logits = Vec::with_capacity(binary.len());
    let mut z = [0.0];
    for &j in &binary {
        params.head.apply(hv1.row(j), &mut z);
        logits.push(z[0]);
    }

    ForwardCache {
        pre_v0,
        pre_c0,
        v2c_msg_in,
        v2c_msg_pre,
        v2c_upd_in,
        v2c_upd_pre,
        c2v_msg_in,
        c2v_msg_pre,
        c2v_upd_in,
        c2v_upd_pre,
        hv1,
        con_degree,
        var_degree,
        binary,
        logits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::encode;
    use crate::instance::{generate_covering, generate_knapsack};

    #[test]
    fn zero_head_gives_one_half() {
        let model = GcnnModel::new(8, 3).with_zero_head();
        let g = encode(&generate_covering(1, 10, 4));
        let p = model.forward(&g).unwrap();
        assert_eq!(p.len(), 10);
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn constant_model() {
        let model = GcnnModel::constant(0.99, 4);
        let g = encode(&generate_knapsack(2, 6, 2));
        for p in model.forward(&g).unwrap() {
            assert!((p - 0.99).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_logits_stay_inside_the_unit_interval() {
        let mut model = GcnnModel::new(4, 0).with_zero_head();
        let g = encode(&generate_knapsack(2, 6, 2));
        model.params.head.bias.set(0, 0, 80.0);
        assert!(model.forward(&g).unwrap().iter().all(|&p| p == 1.0 - PROB_CLAMP));
        model.params.head.bias.set(0, 0, -80.0);
        assert!(model.forward(&g).unwrap().iter().all(|&p| p == PROB_CLAMP));
    }

    #[test]
    fn shape_mismatch() {
        let model = GcnnModel::with_dims(4, 3, 2, 0);
        let g = encode(&generate_knapsack(2, 6, 2));
        assert!(matches!(model.forward(&g), Err(GcnnError::ShapeMismatch(_))));
    }

    #[test]
    fn outputs_in_open_interval_and_deterministic() {
        let model = GcnnModel::new(16, 11);
        let g = encode(&generate_covering(7, 25, 9));
        let a = model.forward(&g).unwrap();
        assert_eq!(a, model.forward(&g).unwrap());
        assert!(a.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = GcnnModel::new(8, 5);
        assert_eq!(a, GcnnModel::new(8, 5));
        assert_ne!(a, GcnnModel::new(8, 6));
        let bound = 1.0 / (VAR_FEATURES as f64).sqrt();
        assert!(a
            .params
            .var_embed
            .weight
            .data()
            .iter()
            .all(|w| w.abs() <= bound));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
