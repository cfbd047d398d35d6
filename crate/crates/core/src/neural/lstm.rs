use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    debug_assert_finite, debug_assert_gate_range, debug_assert_tanh_range, dropout_mask,
    recurrent_uniform, sigmoid, xavier, xavier_vec,
};
use crate::error::{Error, Result};

/// Gate order used throughout: forget, input, candidate, output.
pub const GATE_FORGET: usize = 0;
pub const GATE_INPUT: usize = 1;
pub const GATE_CANDIDATE: usize = 2;
pub const GATE_OUTPUT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
}

/// One layer's weights: `w[g]` maps the step input, `u[g]` the previous
/// hidden state, `b[g]` is the gate bias.
#[derive(Debug, Clone)]
pub struct LstmLayer {
    pub w: [Array2<f64>; 4],
    pub u: [Array2<f64>; 4],
    pub b: [Array1<f64>; 4],
}

impl LstmLayer {
    fn new(rng: &mut ChaCha8Rng, in_dim: usize, hidden: usize) -> Self {
        let w: [Array2<f64>; 4] = std::array::from_fn(|_| Array2::zeros((hidden, in_dim)));
        let mut layer = LstmLayer {
            w,
            u: std::array::from_fn(|_| Array2::zeros((hidden, hidden))),
            b: std::array::from_fn(|_| Array1::zeros(hidden)),
        };
        for g in 0..4 {
            layer.w[g] = xavier(rng, hidden, in_dim, in_dim, hidden);
        }
        for g in 0..4 {
            layer.u[g] = recurrent_uniform(rng, hidden);
        }
        // Forget bias 1 keeps early memory open; other biases start at zero.
        layer.b[GATE_FORGET].fill(1.0);
        layer
    }

    fn zeros(in_dim: usize, hidden: usize) -> Self {
        LstmLayer {
            w: std::array::from_fn(|_| Array2::zeros((hidden, in_dim))),
            u: std::array::from_fn(|_| Array2::zeros((hidden, hidden))),
            b: std::array::from_fn(|_| Array1::zeros(hidden)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LstmParams {
    pub layers: Vec<LstmLayer>,
    pub head_w: Array1<f64>,
    pub head_b: Array1<f64>,
}

const GATE_NAMES: [&str; 4] = ["forget", "input", "candidate", "output"];

impl LstmParams {
    pub(crate) fn zeros(spec: &LstmSpec) -> Self {
        let layers = (0..spec.layers)
            .map(|l| {
                let in_dim = if l == 0 { spec.input_dim } else { spec.hidden };
                LstmLayer::zeros(in_dim, spec.hidden)
            })
            .collect();
        LstmParams { layers, head_w: Array1::zeros(spec.hidden), head_b: Array1::zeros(1) }
    }

    fn init(spec: &LstmSpec, rng: &mut ChaCha8Rng) -> Self {
        let layers = (0..spec.layers)
            .map(|l| {
                let in_dim = if l == 0 { spec.input_dim } else { spec.hidden };
                LstmLayer::new(rng, in_dim, spec.hidden)
            })
            .collect();
        let head_w = xavier_vec(rng, spec.hidden, spec.hidden, 1);
        LstmParams { layers, head_w, head_b: Array1::zeros(1) }
    }

    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for g in 0..4 {
                out.push(layer.w[g].as_slice().unwrap());
            }
            for g in 0..4 {
                out.push(layer.u[g].as_slice().unwrap());
            }
            for g in 0..4 {
                out.push(layer.b[g].as_slice().unwrap());
            }
        }
        out.push(self.head_w.as_slice().unwrap());
        out.push(self.head_b.as_slice().unwrap());
        out
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            let (w, rest) = (&mut layer.w, (&mut layer.u, &mut layer.b));
            for g in w.iter_mut() {
                out.push(g.as_slice_mut().unwrap());
            }
            for g in rest.0.iter_mut() {
                out.push(g.as_slice_mut().unwrap());
            }
            for g in rest.1.iter_mut() {
                out.push(g.as_slice_mut().unwrap());
            }
        }
        out.push(self.head_w.as_slice_mut().unwrap());
        out.push(self.head_b.as_slice_mut().unwrap());
        out
    }

    pub(crate) fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (g, name) in GATE_NAMES.iter().enumerate() {
                out.push((format!("layer{l}.w_{name}"), layer.w[g].shape().to_vec()));
            }
            for (g, name) in GATE_NAMES.iter().enumerate() {
                out.push((format!("layer{l}.u_{name}"), layer.u[g].shape().to_vec()));
            }
            for (g, name) in GATE_NAMES.iter().enumerate() {
                out.push((format!("layer{l}.b_{name}"), layer.b[g].shape().to_vec()));
            }
        }
        out.push(("head.w".into(), vec![self.head_w.len()]));
        out.push(("head.b".into(), vec![1]));
        out
    }
}

/// One cell step over a batch: gates from the step input and previous
/// states, standard cell update `c = f*c_prev + i*cand`, `h = o*tanh(c)`.
pub fn lstm_cell_forward(
    z: ArrayView2<f64>,
    h_prev: ArrayView2<f64>,
    c_prev: ArrayView2<f64>,
    layer: &LstmLayer,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let hidden = layer.b[0].len();
    if z.nrows() != h_prev.nrows()
        || h_prev.dim() != c_prev.dim()
        || z.ncols() != layer.w[0].ncols()
        || h_prev.ncols() != hidden
    {
        return Err(Error::ShapeMismatch(format!(
            "cell shapes: z {:?}, h {:?}, c {:?}, weights ({}, {})",
            z.dim(),
            h_prev.dim(),
            c_prev.dim(),
            hidden,
            layer.w[0].ncols()
        )));
    }
    let (gates, c, h) = cell_step(&z, &h_prev.to_owned(), &c_prev.to_owned(), layer);
    let _ = gates;
    Ok((h, c))
}

type GateSet = [Array2<f64>; 4];

fn cell_step(
    z: &ArrayView2<f64>,
    h_prev: &Array2<f64>,
    c_prev: &Array2<f64>,
    layer: &LstmLayer,
) -> (GateSet, Array2<f64>, Array2<f64>) {
    let pre = |g: usize| z.dot(&layer.w[g].t()) + h_prev.dot(&layer.u[g].t()) + &layer.b[g];
    let f = pre(GATE_FORGET).mapv(sigmoid);
    let i = pre(GATE_INPUT).mapv(sigmoid);
    let a = pre(GATE_CANDIDATE).mapv(f64::tanh);
    let o = pre(GATE_OUTPUT).mapv(sigmoid);
    debug_assert_gate_range("lstm.forget", &f);
    debug_assert_gate_range("lstm.input", &i);
    debug_assert_tanh_range("lstm.candidate", &a);
    debug_assert_gate_range("lstm.output", &o);
    let c = &f * c_prev + &i * &a;
    let h = &o * &c.mapv(f64::tanh);
    debug_assert_finite("lstm.cell", c.iter());
    ([f, i, a, o], c, h)
}

pub(crate) struct LstmLayerCache {
    /// Sequence actually consumed by the layer (post-dropout), (B, T, in).
    inputs: Array3<f64>,
    /// States indexed by t+1; entry 0 is the zero initial state.
    hs: Vec<Array2<f64>>,
    cs: Vec<Array2<f64>>,
    gates: Vec<GateSet>,
    /// Mask applied to this layer's output before the next layer, (B, T, H).
    mask: Option<Array3<f64>>,
}

pub struct LstmCache {
    layers: Vec<LstmLayerCache>,
}

#[derive(Debug, Clone)]
pub struct LstmModel {
    pub spec: LstmSpec,
    pub params: LstmParams,
}

impl LstmModel {
    pub fn new(spec: LstmSpec, rng: &mut ChaCha8Rng) -> Self {
        let params = LstmParams::init(&spec, rng);
        LstmModel { spec, params }
    }

    pub(crate) fn forward(
        &self,
        inputs: ArrayView3<f64>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (Array1<f64>, LstmCache) {
        let (batch, steps, _) = inputs.dim();
        let hidden = self.spec.hidden;
        let mut caches = Vec::with_capacity(self.spec.layers);
        let mut seq = inputs.to_owned();
        for (l, layer) in self.params.layers.iter().enumerate() {
            let mut hs = vec![Array2::zeros((batch, hidden))];
            let mut cs = vec![Array2::zeros((batch, hidden))];
            let mut gates = Vec::with_capacity(steps);
            for t in 0..steps {
                let z = seq.slice(s![.., t, ..]);
                let (g, c, h) = cell_step(&z, &hs[t], &cs[t], layer);
                gates.push(g);
                cs.push(c);
                hs.push(h);
            }
            let mut out = Array3::zeros((batch, steps, hidden));
            for t in 0..steps {
                out.slice_mut(s![.., t, ..]).assign(&hs[t + 1]);
            }
            // Inter-layer dropout only (none after the top layer); masks are
            // drawn independently per timestep.
            let mask = match rng.as_deref_mut() {
                Some(r) if l + 1 < self.spec.layers && self.spec.dropout > 0.0 => {
                    let mut m = Array3::zeros((batch, steps, hidden));
                    for t in 0..steps {
                        let step = dropout_mask(r, (batch, hidden), self.spec.dropout)
                            .expect("positive dropout rate");
                        m.slice_mut(s![.., t, ..]).assign(&step);
                    }
                    Some(m)
                }
                _ => None,
            };
            let next = match &mask {
                Some(m) => &out * m,
                None => out.clone(),
            };
            caches.push(LstmLayerCache { inputs: seq, hs, cs, gates, mask });
            seq = next;
        }
        let final_h = &caches.last().unwrap().hs[steps];
        let pred = final_h.dot(&self.params.head_w) + self.params.head_b[0];
        debug_assert_finite("lstm.pred", pred.iter());
        (pred, LstmCache { layers: caches })
    }

    pub(crate) fn backward(&self, cache: &LstmCache, dpred: &Array1<f64>) -> LstmParams {
        let mut grads = LstmParams::zeros(&self.spec);
        let steps = cache.layers[0].gates.len();
        let (batch, hidden) = (dpred.len(), self.spec.hidden);

        let top = cache.layers.last().unwrap();
        let final_h = &top.hs[steps];
        let dpred_col = dpred.view().insert_axis(Axis(1));
        grads.head_w = final_h.t().dot(dpred).to_owned();
        grads.head_b[0] = dpred.sum();

        // Upstream gradient w.r.t. each layer's output sequence.
        let mut d_out = Array3::zeros((batch, steps, hidden));
        d_out
            .slice_mut(s![.., steps - 1, ..])
            .assign(&dpred_col.dot(&self.params.head_w.view().insert_axis(Axis(0))));

        for l in (0..self.spec.layers).rev() {
            let layer = &self.params.layers[l];
            let lc = &cache.layers[l];
            let in_dim = lc.inputs.shape()[2];
            let g = &mut grads.layers[l];
            let mut d_inputs = Array3::zeros((batch, steps, in_dim));
            let mut dh_rec = Array2::zeros((batch, hidden));
            let mut dc_rec = Array2::zeros((batch, hidden));
            for t in (0..steps).rev() {
                let dh = &d_out.slice(s![.., t, ..]) + &dh_rec;
                let [f, i, a, o] = &lc.gates[t];
                let c = &lc.cs[t + 1];
                let c_prev = &lc.cs[t];
                let h_prev = &lc.hs[t];
                let z = lc.inputs.slice(s![.., t, ..]);

                let tanh_c = c.mapv(f64::tanh);
                let d_o = &dh * &tanh_c;
                let mut dc = &dc_rec + &(&dh * o * tanh_c.mapv(|v| 1.0 - v * v));
                let d_f = &dc * c_prev;
                let d_i = &dc * a;
                let d_a = &dc * i;
                dc *= f; // becomes dc_rec for t-1
                dc_rec = dc;

                let d_pre = [
                    &d_f * f * &f.mapv(|v| 1.0 - v),
                    &d_i * i * &i.mapv(|v| 1.0 - v),
                    &d_a * &a.mapv(|v| 1.0 - v * v),
                    &d_o * o * &o.mapv(|v| 1.0 - v),
                ];
                let mut dz = Array2::zeros((batch, in_dim));
                let mut dh_prev = Array2::zeros((batch, hidden));
                for gate in 0..4 {
                    g.w[gate] += &d_pre[gate].t().dot(&z);
                    g.u[gate] += &d_pre[gate].t().dot(h_prev);
                    g.b[gate] += &d_pre[gate].sum_axis(Axis(0));
                    dz += &d_pre[gate].dot(&layer.w[gate]);
                    dh_prev += &d_pre[gate].dot(&layer.u[gate]);
                }
                d_inputs.slice_mut(s![.., t, ..]).assign(&dz);
                dh_rec = dh_prev;
            }
            if l > 0 {
                // Gradient flows to the previous layer through its dropout mask.
                d_out = match &cache.layers[l - 1].mask {
                    Some(m) => &d_inputs * m,
                    None => d_inputs,
                };
            }
        }
        debug_assert_finite("lstm.grads", grads.slices().into_iter().flatten());
        grads
    }
}
