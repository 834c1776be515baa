use super::{forward_cached, Affine, ForwardCache, GcnnError, GcnnModel, GcnnParams, HalfConv};
use crate::graph::BipartiteGraph;
use crate::matrix::Matrix;

/// Gradient of a scalar loss with respect to every parameter, given
/// `d_logits[k] = dL/dz_k` for the k-th binary variable of `graph`.
pub fn backward(
    model: &GcnnModel,
    graph: &BipartiteGraph,
    d_logits: &[f64],
) -> Result<GcnnParams, GcnnError> {
    model.check_graph(graph)?;
    let cache = forward_cached(&model.params, graph);
    if d_logits.len() != cache.binary.len() {
        return Err(GcnnError::ShapeMismatch(format!(
            "expected {} logit gradients, got {}",
            cache.binary.len(),
            d_logits.len()
        )));
    }
    let mut grad = model.params.zeros_like();
    backward_into(&model.params, graph, &cache, d_logits, &mut grad);
    Ok(grad)
}

/// Backpropagates `dL/d(pre)` through `y = W x + b`, accumulating parameter
/// gradients and adding `W^T d_pre` into `d_x`.
fn affine_backward(
    layer: &Affine,
    grad: &mut Affine,
    x: &[f64],
    d_pre: &[f64],
    d_x: Option<&mut [f64]>,
) {
    for (k, &d) in d_pre.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        grad.bias.data_mut()[k] += d;
        for (g, &xi) in grad.weight.row_mut(k).iter_mut().zip(x) {
            *g += d * xi;
        }
    }
    if let Some(d_x) = d_x {
        for (k, &d) in d_pre.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (dx, &w) in d_x.iter_mut().zip(layer.weight.row(k)) {
                *dx += d * w;
            }
        }
    }
}

fn relu_mask(d_act: &[f64], pre: &[f64], out: &mut [f64]) {
    for ((o, &d), &p) in out.iter_mut().zip(d_act).zip(pre) {
        *o = if p > 0.0 { d } else { 0.0 };
    }
}

struct HalfConvCache<'a> {
    msg_in: &'a Matrix,
    msg_pre: &'a Matrix,
    upd_in: &'a Matrix,
    upd_pre: &'a Matrix,
}

/// Backward through one half-convolution. `d_out` is the gradient of the
/// updated receiver embeddings; gradients flowing into the receiver and
/// sender inputs are added to `d_receivers` and `d_senders`.
#[allow(clippy::too_many_arguments)]
fn half_conv_backward(
    conv: &HalfConv,
    grad: &mut HalfConv,
    cache: HalfConvCache<'_>,
    d_out: &Matrix,
    d_receivers: &mut Matrix,
    d_senders: &mut Matrix,
    endpoints: &[(usize, usize)],
    degree: &[usize],
) {
    let h = conv.upd.output_dim();
    let mut d_pre = vec![0.0; h];
    let mut d_in = vec![0.0; 2 * h + 1];
    let mut d_agg = Matrix::zeros(d_out.rows(), h);

    for r in 0..d_out.rows() {
        relu_mask(d_out.row(r), cache.upd_pre.row(r), &mut d_pre);
        d_in[..2 * h].iter_mut().for_each(|v| *v = 0.0);
        affine_backward(
            &conv.upd,
            &mut grad.upd,
            cache.upd_in.row(r),
            &d_pre,
            Some(&mut d_in[..2 * h]),
        );
        for (d, v) in d_receivers.row_mut(r).iter_mut().zip(&d_in[..h]) {
            *d += v;
        }
        d_agg.row_mut(r).copy_from_slice(&d_in[h..2 * h]);
    }

    let mut d_msg = vec![0.0; h];
    for (k, &(r, s)) in endpoints.iter().enumerate() {
        let inv = 1.0 / degree[r] as f64;
        for (dm, &da) in d_msg.iter_mut().zip(d_agg.row(r)) {
            *dm = da * inv;
        }
        relu_mask(&d_msg, cache.msg_pre.row(k), &mut d_pre);
        d_in.iter_mut().for_each(|v| *v = 0.0);
        affine_backward(
            &conv.msg,
            &mut grad.msg,
            cache.msg_in.row(k),
            &d_pre,
            Some(&mut d_in),
        );
        for (d, v) in d_receivers.row_mut(r).iter_mut().zip(&d_in[..h]) {
            *d += v;
        }
        for (d, v) in d_senders.row_mut(s).iter_mut().zip(&d_in[h..2 * h]) {
            *d += v;
        }
    }
}

pub(crate) fn backward_into(
    params: &GcnnParams,
    graph: &BipartiteGraph,
    cache: &ForwardCache,
    d_logits: &[f64],
    grad: &mut GcnnParams,
) {
    let h = params.head.input_dim();
    let n = graph.num_vars();
    let m = graph.num_cons();

    let mut d_hv1 = Matrix::zeros(n, h);
    for (&j, &dz) in cache.binary.iter().zip(d_logits) {
        affine_backward(
            &params.head,
            &mut grad.head,
            cache.hv1.row(j),
            &[dz],
            Some(d_hv1.row_mut(j)),
        );
    }

    let v2c_edges: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.con, e.var)).collect();
    let c2v_edges: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.var, e.con)).collect();

    let mut d_hv0 = Matrix::zeros(n, h);
    let mut d_hc1 = Matrix::zeros(m, h);
    half_conv_backward(
        &params.conv_c2v,
        &mut grad.conv_c2v,
        HalfConvCache {
            msg_in: &cache.c2v_msg_in,
            msg_pre: &cache.c2v_msg_pre,
            upd_in: &cache.c2v_upd_in,
            upd_pre: &cache.c2v_upd_pre,
        },
        &d_hv1,
        &mut d_hv0,
        &mut d_hc1,
        &c2v_edges,
        &cache.var_degree,
    );

    let mut d_hc0 = Matrix::zeros(m, h);
    half_conv_backward(
        &params.conv_v2c,
        &mut grad.conv_v2c,
        HalfConvCache {
            msg_in: &cache.v2c_msg_in,
            msg_pre: &cache.v2c_msg_pre,
            upd_in: &cache.v2c_upd_in,
            upd_pre: &cache.v2c_upd_pre,
        },
        &d_hc1,
        &mut d_hc0,
        &mut d_hv0,
        &v2c_edges,
        &cache.con_degree,
    );

    let mut d_pre = vec![0.0; h];
    for j in 0..n {
        relu_mask(d_hv0.row(j), cache.pre_v0.row(j), &mut d_pre);
        affine_backward(
            &params.var_embed,
            &mut grad.var_embed,
            graph.var_feats.row(j),
            &d_pre,
            None,
        );
    }
    for i in 0..m {
        relu_mask(d_hc0.row(i), cache.pre_c0.row(i), &mut d_pre);
        affine_backward(
            &params.con_embed,
            &mut grad.con_embed,
            graph.con_feats.row(i),
            &d_pre,
            None,
        );
    }
}
