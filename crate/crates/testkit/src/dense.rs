//! Loop-based reference forward passes over stored parameter values.

use ilse_core::baselines::{Dwatt, MlpProbe, Weighted};
use ilse_core::encoders::{GraphEncoder, LayerStack, MpnnLayer, SetEncoder};
use ilse_core::nn::{Linear, Mlp, ParamId, ParamStore};

pub type Rows = Vec<Vec<f64>>;

fn param_rows(store: &ParamStore, id: ParamId) -> Rows {
    store.value(id).rows().into_iter().map(|r| r.to_vec()).collect()
}

fn stack_rows(stack: &LayerStack) -> Rows {
    (0..stack.layers()).map(|l| stack.row(l)).collect()
}

/// `x W + b` row by row.
pub fn linear(store: &ParamStore, lin: &Linear, x: &Rows) -> Rows {
    let w = param_rows(store, lin.weight);
    let b = &param_rows(store, lin.bias)[0];
    x.iter()
        .map(|row| {
            (0..lin.fan_out)
                .map(|j| b[j] + (0..lin.fan_in).map(|i| row[i] * w[i][j]).sum::<f64>())
                .collect()
        })
        .collect()
}

pub fn relu(x: &Rows) -> Rows {
    x.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect()
}

pub fn mlp(store: &ParamStore, m: &Mlp, x: &Rows) -> Rows {
    let mut h = x.clone();
    for (i, lin) in m.layers.iter().enumerate() {
        if i > 0 {
            h = relu(&h);
        }
        h = linear(store, lin, &h);
    }
    h
}

fn mean_of(rows: &[&Vec<f64>]) -> Vec<f64> {
    let width = rows[0].len();
    (0..width).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect()
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn set_encoder(store: &ParamStore, enc: &SetEncoder, stack: &LayerStack) -> Vec<f64> {
    let elems = mlp(store, &enc.phi, &stack_rows(stack));
    let pooled = mean_of(&elems.iter().collect::<Vec<_>>());
    linear(store, &enc.rho, &relu(&vec![pooled])).remove(0)
}

/// Reference graph encoder. `neighbors` is the simple adjacency of the node
/// set; `layer_to_node` is `None` when every layer is its own node.
pub fn graph_encoder(
    store: &ParamStore,
    enc: &GraphEncoder,
    neighbors: &[Vec<usize>],
    layer_to_node: Option<&[usize]>,
    stack: &LayerStack,
) -> Vec<f64> {
    let nodes = neighbors.len();
    let projected = linear(store, &enc.projection, &stack_rows(stack));
    let width = projected[0].len();
    let mut real = vec![layer_to_node.is_none(); nodes];
    let mut h = match layer_to_node {
        None => projected,
        Some(map) => {
            let mut h = vec![vec![0.0; width]; nodes];
            for (l, &v) in map.iter().enumerate() {
                h[v] = projected[l].clone();
                real[v] = true;
            }
            h
        }
    };
    let last = enc.mpnn.len() - 1;
    for (i, layer) in enc.mpnn.iter().enumerate() {
        h = match layer {
            MpnnLayer::Gin(m) => {
                let agg: Rows = (0..nodes)
                    .map(|v| {
                        (0..width)
                            .map(|j| h[v][j] + neighbors[v].iter().map(|&u| h[u][j]).sum::<f64>())
                            .collect()
                    })
                    .collect();
                let out = mlp(store, m, &agg);
                if i < last {
                    relu(&out)
                } else {
                    out
                }
            }
            MpnnLayer::Gcn(lin) => {
                let w = param_rows(store, lin.weight);
                let b = &param_rows(store, lin.bias)[0];
                let hw: Rows = h
                    .iter()
                    .map(|r| (0..lin.fan_out).map(|j| (0..lin.fan_in).map(|k| r[k] * w[k][j]).sum()).collect())
                    .collect();
                let deg: Vec<f64> = neighbors.iter().map(|nb| nb.len() as f64 + 1.0).collect();
                let out: Rows = (0..nodes)
                    .map(|v| {
                        (0..lin.fan_out)
                            .map(|j| {
                                let self_term = hw[v][j] / deg[v];
                                let nb_terms: f64 =
                                    neighbors[v].iter().map(|&u| hw[u][j] / (deg[v] * deg[u]).sqrt()).sum();
                                b[j] + self_term + nb_terms
                            })
                            .collect()
                    })
                    .collect();
                if i < last {
                    relu(&out)
                } else {
                    out
                }
            }
        };
    }
    let kept: Vec<&Vec<f64>> = (0..nodes).filter(|&v| real[v]).map(|v| &h[v]).collect();
    mean_of(&kept)
}

pub fn weighted(store: &ParamStore, enc: &Weighted, stack: &LayerStack) -> Vec<f64> {
    let alpha = softmax(&param_rows(store, enc.weights)[0]);
    let rows = stack_rows(stack);
    (0..stack.dim()).map(|j| rows.iter().zip(&alpha).map(|(r, a)| a * r[j]).sum()).collect()
}

pub fn mlp_probe(store: &ParamStore, enc: &MlpProbe, stack: &LayerStack) -> Vec<f64> {
    mlp(store, &enc.mlp, &vec![stack.row(enc.layer)]).remove(0)
}

pub fn dwatt(store: &ParamStore, enc: &Dwatt, stack: &LayerStack) -> Vec<f64> {
    let p = linear(store, &enc.projection, &stack_rows(stack));
    let last = p.last().expect("at least one layer").clone();
    let q = linear(store, &enc.query, &vec![last.clone()]).remove(0);
    let keys = param_rows(store, enc.keys);
    let scale = (q.len() as f64).sqrt();
    let scores: Vec<f64> = keys.iter().map(|k| k.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / scale).collect();
    let alpha = softmax(&scores);
    let values = mlp(store, &enc.value, &p);
    (0..last.len())
        .map(|j| last[j] + values.iter().zip(&alpha).map(|(v, a)| a * v[j]).sum::<f64>())
        .collect()
}

/// Complete graph on `l` nodes without self-loops.
pub fn complete_neighbors(l: usize) -> Vec<Vec<usize>> {
    (0..l).map(|v| (0..l).filter(|&u| u != v).collect()).collect()
}
