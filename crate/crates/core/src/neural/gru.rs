use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    debug_assert_finite, debug_assert_gate_range, debug_assert_tanh_range, dropout_mask,
    recurrent_uniform, sigmoid, xavier, xavier_vec,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GruSpec {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
}

/// One layer's weights; order: update gate, reset gate, candidate.
#[derive(Debug, Clone)]
pub struct GruLayer {
    pub w_update: Array2<f64>,
    pub w_reset: Array2<f64>,
    pub w_cand: Array2<f64>,
    pub u_update: Array2<f64>,
    pub u_reset: Array2<f64>,
    pub u_cand: Array2<f64>,
    pub b_update: Array1<f64>,
    pub b_reset: Array1<f64>,
    pub b_cand: Array1<f64>,
}

impl GruLayer {
    fn new(rng: &mut ChaCha8Rng, in_dim: usize, hidden: usize) -> Self {
        GruLayer {
            w_update: xavier(rng, hidden, in_dim, in_dim, hidden),
            w_reset: xavier(rng, hidden, in_dim, in_dim, hidden),
            w_cand: xavier(rng, hidden, in_dim, in_dim, hidden),
            u_update: recurrent_uniform(rng, hidden),
            u_reset: recurrent_uniform(rng, hidden),
            u_cand: recurrent_uniform(rng, hidden),
            b_update: Array1::zeros(hidden),
            b_reset: Array1::zeros(hidden),
            b_cand: Array1::zeros(hidden),
        }
    }

    fn zeros(in_dim: usize, hidden: usize) -> Self {
        GruLayer {
            w_update: Array2::zeros((hidden, in_dim)),
            w_reset: Array2::zeros((hidden, in_dim)),
            w_cand: Array2::zeros((hidden, in_dim)),
            u_update: Array2::zeros((hidden, hidden)),
            u_reset: Array2::zeros((hidden, hidden)),
            u_cand: Array2::zeros((hidden, hidden)),
            b_update: Array1::zeros(hidden),
            b_reset: Array1::zeros(hidden),
            b_cand: Array1::zeros(hidden),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GruParams {
    pub layers: Vec<GruLayer>,
    pub head_w: Array1<f64>,
    pub head_b: Array1<f64>,
}

impl GruParams {
    pub(crate) fn zeros(spec: &GruSpec) -> Self {
        let layers = (0..spec.layers)
            .map(|l| {
                let in_dim = if l == 0 { spec.input_dim } else { spec.hidden };
                GruLayer::zeros(in_dim, spec.hidden)
            })
            .collect();
        GruParams { layers, head_w: Array1::zeros(spec.hidden), head_b: Array1::zeros(1) }
    }

    fn init(spec: &GruSpec, rng: &mut ChaCha8Rng) -> Self {
        let layers = (0..spec.layers)
            .map(|l| {
                let in_dim = if l == 0 { spec.input_dim } else { spec.hidden };
                GruLayer::new(rng, in_dim, spec.hidden)
            })
            .collect();
        let head_w = xavier_vec(rng, spec.hidden, spec.hidden, 1);
        GruParams { layers, head_w, head_b: Array1::zeros(1) }
    }

    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.w_update.as_slice().unwrap());
            out.push(layer.w_reset.as_slice().unwrap());
            out.push(layer.w_cand.as_slice().unwrap());
            out.push(layer.u_update.as_slice().unwrap());
            out.push(layer.u_reset.as_slice().unwrap());
            out.push(layer.u_cand.as_slice().unwrap());
            out.push(layer.b_update.as_slice().unwrap());
            out.push(layer.b_reset.as_slice().unwrap());
            out.push(layer.b_cand.as_slice().unwrap());
        }
        out.push(self.head_w.as_slice().unwrap());
        out.push(self.head_b.as_slice().unwrap());
        out
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(layer.w_update.as_slice_mut().unwrap());
            out.push(layer.w_reset.as_slice_mut().unwrap());
            out.push(layer.w_cand.as_slice_mut().unwrap());
            out.push(layer.u_update.as_slice_mut().unwrap());
            out.push(layer.u_reset.as_slice_mut().unwrap());
            out.push(layer.u_cand.as_slice_mut().unwrap());
            out.push(layer.b_update.as_slice_mut().unwrap());
            out.push(layer.b_reset.as_slice_mut().unwrap());
            out.push(layer.b_cand.as_slice_mut().unwrap());
        }
        out.push(self.head_w.as_slice_mut().unwrap());
        out.push(self.head_b.as_slice_mut().unwrap());
        out
    }

    pub(crate) fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.w_update"), layer.w_update.shape().to_vec()));
            out.push((format!("layer{l}.w_reset"), layer.w_reset.shape().to_vec()));
            out.push((format!("layer{l}.w_cand"), layer.w_cand.shape().to_vec()));
            out.push((format!("layer{l}.u_update"), layer.u_update.shape().to_vec()));
            out.push((format!("layer{l}.u_reset"), layer.u_reset.shape().to_vec()));
            out.push((format!("layer{l}.u_cand"), layer.u_cand.shape().to_vec()));
            out.push((format!("layer{l}.b_update"), vec![layer.b_update.len()]));
            out.push((format!("layer{l}.b_reset"), vec![layer.b_reset.len()]));
            out.push((format!("layer{l}.b_cand"), vec![layer.b_cand.len()]));
        }
        out.push(("head.w".into(), vec![self.head_w.len()]));
        out.push(("head.b".into(), vec![1]));
        out
    }
}

struct GruStep {
    update: Array2<f64>,
    reset: Array2<f64>,
    cand: Array2<f64>,
}

fn cell_step(
    z: &ArrayView2<f64>,
    h_prev: &Array2<f64>,
    layer: &GruLayer,
) -> (GruStep, Array2<f64>) {
    let update =
        (z.dot(&layer.w_update.t()) + h_prev.dot(&layer.u_update.t()) + &layer.b_update)
            .mapv(sigmoid);
    let reset = (z.dot(&layer.w_reset.t()) + h_prev.dot(&layer.u_reset.t()) + &layer.b_reset)
        .mapv(sigmoid);
    debug_assert_gate_range("gru.update", &update);
    debug_assert_gate_range("gru.reset", &reset);
    let gated = &reset * h_prev;
    let cand = (z.dot(&layer.w_cand.t()) + gated.dot(&layer.u_cand.t()) + &layer.b_cand)
        .mapv(f64::tanh);
    debug_assert_tanh_range("gru.candidate", &cand);
    // Update gate interpolates between the previous state and the candidate.
    let h = &update.mapv(|v| 1.0 - v) * h_prev + &update * &cand;
    (GruStep { update, reset, cand }, h)
}

/// One cell step over a batch:
/// `h = (1 - update) * h_prev + update * tanh(W z + U (reset * h_prev) + b)`.
pub fn gru_cell_forward(
    z: ArrayView2<f64>,
    h_prev: ArrayView2<f64>,
    layer: &GruLayer,
) -> Result<Array2<f64>> {
    let hidden = layer.b_update.len();
    if z.nrows() != h_prev.nrows()
        || z.ncols() != layer.w_update.ncols()
        || h_prev.ncols() != hidden
    {
        return Err(Error::ShapeMismatch(format!(
            "cell shapes: z {:?}, h {:?}, weights ({}, {})",
            z.dim(),
            h_prev.dim(),
            hidden,
            layer.w_update.ncols()
        )));
    }
    let (_, h) = cell_step(&z, &h_prev.to_owned(), layer);
    Ok(h)
}

pub(crate) struct GruLayerCache {
    inputs: Array3<f64>,
    hs: Vec<Array2<f64>>,
    steps: Vec<GruStep>,
    mask: Option<Array3<f64>>,
}

pub struct GruCache {
    layers: Vec<GruLayerCache>,
}

#[derive(Debug, Clone)]
pub struct GruModel {
    pub spec: GruSpec,
    pub params: GruParams,
}

impl GruModel {
    pub fn new(spec: GruSpec, rng: &mut ChaCha8Rng) -> Self {
        let params = GruParams::init(&spec, rng);
        GruModel { spec, params }
    }

    pub(crate) fn forward(
        &self,
        inputs: ArrayView3<f64>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (Array1<f64>, GruCache) {
        let (batch, steps, _) = inputs.dim();
        let hidden = self.spec.hidden;
        let mut caches = Vec::with_capacity(self.spec.layers);
        let mut seq = inputs.to_owned();
        for (l, layer) in self.params.layers.iter().enumerate() {
            let mut hs = vec![Array2::zeros((batch, hidden))];
            let mut step_cache = Vec::with_capacity(steps);
            for t in 0..steps {
                let z = seq.slice(s![.., t, ..]);
                let (step, h) = cell_step(&z, &hs[t], layer);
                step_cache.push(step);
                hs.push(h);
            }
            let mut out = Array3::zeros((batch, steps, hidden));
            for t in 0..steps {
                out.slice_mut(s![.., t, ..]).assign(&hs[t + 1]);
            }
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
            caches.push(GruLayerCache { inputs: seq, hs, steps: step_cache, mask });
            seq = next;
        }
        let final_h = &caches.last().unwrap().hs[steps];
        let pred = final_h.dot(&self.params.head_w) + self.params.head_b[0];
        debug_assert_finite("gru.pred", pred.iter());
        (pred, GruCache { layers: caches })
    }

    pub(crate) fn backward(&self, cache: &GruCache, dpred: &Array1<f64>) -> GruParams {
        let mut grads = GruParams::zeros(&self.spec);
        let steps = cache.layers[0].steps.len();
        let (batch, hidden) = (dpred.len(), self.spec.hidden);

        let top = cache.layers.last().unwrap();
        let final_h = &top.hs[steps];
        grads.head_w = final_h.t().dot(dpred).to_owned();
        grads.head_b[0] = dpred.sum();

        let dpred_col = dpred.view().insert_axis(Axis(1));
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
            for t in (0..steps).rev() {
                let dh = &d_out.slice(s![.., t, ..]) + &dh_rec;
                let step = &lc.steps[t];
                let h_prev = &lc.hs[t];
                let z = lc.inputs.slice(s![.., t, ..]);
                let gated = &step.reset * h_prev;

                let d_update = &dh * &(&step.cand - h_prev);
                let d_cand = &dh * &step.update;
                let mut dh_prev = &dh * &step.update.mapv(|v| 1.0 - v);

                let d_pre_cand = &d_cand * &step.cand.mapv(|v| 1.0 - v * v);
                g.w_cand += &d_pre_cand.t().dot(&z);
                g.u_cand += &d_pre_cand.t().dot(&gated);
                g.b_cand += &d_pre_cand.sum_axis(Axis(0));
                let d_gated = d_pre_cand.dot(&layer.u_cand);
                let d_reset = &d_gated * h_prev;
                dh_prev += &(&d_gated * &step.reset);

                let d_pre_update = &d_update * &step.update * &step.update.mapv(|v| 1.0 - v);
                let d_pre_reset = &d_reset * &step.reset * &step.reset.mapv(|v| 1.0 - v);
                g.w_update += &d_pre_update.t().dot(&z);
                g.u_update += &d_pre_update.t().dot(h_prev);
                g.b_update += &d_pre_update.sum_axis(Axis(0));
                g.w_reset += &d_pre_reset.t().dot(&z);
                g.u_reset += &d_pre_reset.t().dot(h_prev);
                g.b_reset += &d_pre_reset.sum_axis(Axis(0));

                let dz = d_pre_update.dot(&layer.w_update)
                    + d_pre_reset.dot(&layer.w_reset)
                    + d_pre_cand.dot(&layer.w_cand);
                dh_prev += &d_pre_update.dot(&layer.u_update);
                dh_prev += &d_pre_reset.dot(&layer.u_reset);

                d_inputs.slice_mut(s![.., t, ..]).assign(&dz);
                dh_rec = dh_prev;
            }
            if l > 0 {
                d_out = match &cache.layers[l - 1].mask {
                    Some(m) => &d_inputs * m,
                    None => d_inputs,
                };
            }
        }
        debug_assert_finite("gru.grads", grads.slices().into_iter().flatten());
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_parameters_halve_previous_state() {
        let layer = GruLayer::zeros(2, 3);
        let z = Array2::zeros((1, 2));
        let h_prev = Array2::from_shape_fn((1, 3), |(_, j)| (j as f64 + 1.0) * 0.2);
        let h = gru_cell_forward(z.view(), h_prev.view(), &layer).unwrap();
        for j in 0..3 {
            assert!((h[[0, j]] - 0.5 * h_prev[[0, j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_update_gate_keeps_state() {
        let mut layer = GruLayer::zeros(1, 1);
        layer.b_update[0] = -50.0;
        let z = Array2::from_elem((1, 1), 0.7);
        let h_prev = Array2::from_elem((1, 1), 0.3);
        let h = gru_cell_forward(z.view(), h_prev.view(), &layer).unwrap();
        assert!((h[[0, 0]] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn scalar_cell_matches_scalar_oracle() {
        let mut layer = GruLayer::zeros(1, 1);
        for w in [
            &mut layer.w_update,
            &mut layer.w_reset,
            &mut layer.w_cand,
            &mut layer.u_update,
            &mut layer.u_reset,
            &mut layer.u_cand,
        ] {
            w.fill(0.5);
        }
        for b in [&mut layer.b_update, &mut layer.b_reset, &mut layer.b_cand] {
            b.fill(0.5);
        }
        let (z, h_prev) = (0.3, 0.2);
        let h = gru_cell_forward(
            Array2::from_elem((1, 1), z).view(),
            Array2::from_elem((1, 1), h_prev).view(),
            &layer,
        )
        .unwrap();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let update = sig(0.5 * z + 0.5 * h_prev + 0.5);
        let reset = sig(0.5 * z + 0.5 * h_prev + 0.5);
        let cand = (0.5 * z + 0.5 * (reset * h_prev) + 0.5).tanh();
        let expected = (1.0 - update) * h_prev + update * cand;
        assert!((h[[0, 0]] - expected).abs() < 1e-12);
    }

    #[test]
    fn cell_shape_mismatch_rejected() {
        let layer = GruLayer::zeros(2, 3);
        let z = Array2::zeros((1, 5));
        let h = Array2::zeros((1, 3));
        assert!(gru_cell_forward(z.view(), h.view(), &layer).is_err());
    }

    #[test]
    fn forward_with_t1_window_equals_cell_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let spec = GruSpec { input_dim: 3, hidden: 4, layers: 1, dropout: 0.0 };
        let model = GruModel::new(spec, &mut rng);
        let x = Array3::from_shape_fn((2, 1, 3), |(b, _, d)| (b as f64 - d as f64) * 0.3);
        let (pred, _) = model.forward(x.view(), None);
        let zeros = Array2::zeros((2, 4));
        let h = gru_cell_forward(x.slice(s![.., 0, ..]), zeros.view(), &model.params.layers[0])
            .unwrap();
        let manual = h.dot(&model.params.head_w) + model.params.head_b[0];
        for b in 0..2 {
            assert!((pred[b] - manual[b]).abs() < 1e-12);
        }
    }

    #[test]
    fn permuting_batch_permutes_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = GruSpec { input_dim: 2, hidden: 3, layers: 2, dropout: 0.0 };
        let model = GruModel::new(spec, &mut rng);
        let x = Array3::from_shape_fn((3, 4, 2), |(b, t, d)| (b * 5 + t * 2 + d) as f64 * 0.1);
        let (pred, _) = model.forward(x.view(), None);
        let mut reversed = Array3::zeros((3, 4, 2));
        for b in 0..3 {
            reversed.slice_mut(s![b, .., ..]).assign(&x.slice(s![2 - b, .., ..]));
        }
        let (pred_rev, _) = model.forward(reversed.view(), None);
        for b in 0..3 {
            assert!((pred[b] - pred_rev[2 - b]).abs() < 1e-12);
        }
    }
}
