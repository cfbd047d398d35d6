use ndarray::{s, Array1, Array2, Array3, ArrayView3, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{debug_assert_finite, dropout_mask, xavier_vec};

// Guards the weight-norm division when a kernel is exactly zero.
const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcnSpec {
    pub input_dim: usize,
    pub channels: usize,
    pub blocks: usize,
    pub kernel: usize,
    pub dropout: f64,
}

/// Steps that can influence the last output of a stack of residual blocks
/// with two convolutions each and dilations 1, 2, ..., 2^(blocks-1).
pub fn tcn_receptive_field(kernel: usize, blocks: usize) -> usize {
    1 + 2 * (kernel - 1) * ((1 << blocks) - 1)
}

/// One residual block: two weight-normalized dilated causal convolutions
/// (each followed by ReLU and dropout) plus a shortcut, added at the end.
/// The shortcut is a 1x1 convolution when channel counts differ.
#[derive(Debug, Clone)]
pub struct TcnBlock {
    pub v1: Array3<f64>,
    pub g1: Array1<f64>,
    pub b1: Array1<f64>,
    pub v2: Array3<f64>,
    pub g2: Array1<f64>,
    pub b2: Array1<f64>,
    pub shortcut_w: Option<Array2<f64>>,
    pub shortcut_b: Option<Array1<f64>>,
    pub dilation: usize,
}

fn kernel_norms(v: &Array3<f64>) -> Array1<f64> {
    let out_ch = v.shape()[0];
    Array1::from_shape_fn(out_ch, |o| {
        v.slice(s![o, .., ..]).iter().map(|x| x * x).sum::<f64>().sqrt().max(NORM_FLOOR)
    })
}

fn effective_weights(v: &Array3<f64>, g: &Array1<f64>) -> Array3<f64> {
    let norms = kernel_norms(v);
    let mut w = v.clone();
    for o in 0..w.shape()[0] {
        let scale = g[o] / norms[o];
        w.slice_mut(s![o, .., ..]).mapv_inplace(|x| x * scale);
    }
    w
}

impl TcnBlock {
    fn new(rng: &mut ChaCha8Rng, in_ch: usize, out_ch: usize, kernel: usize, dilation: usize) -> Self {
        let fan = (in_ch * kernel, out_ch * kernel);
        let a = (6.0 / (fan.0 + fan.1) as f64).sqrt();
        let v1 = Array3::from_shape_fn((out_ch, in_ch, kernel), |_| rng.random_range(-a..a));
        let a2 = (6.0 / (out_ch * kernel * 2) as f64).sqrt();
        let v2 = Array3::from_shape_fn((out_ch, out_ch, kernel), |_| rng.random_range(-a2..a2));
        // Gains start at the kernel norms so the initial effective weights
        // equal the raw draws.
        let g1 = kernel_norms(&v1);
        let g2 = kernel_norms(&v2);
        let (shortcut_w, shortcut_b) = if in_ch != out_ch {
            let aw = (6.0 / (in_ch + out_ch) as f64).sqrt();
            (
                Some(Array2::from_shape_fn((out_ch, in_ch), |_| rng.random_range(-aw..aw))),
                Some(Array1::zeros(out_ch)),
            )
        } else {
            (None, None)
        };
        TcnBlock {
            v1,
            g1,
            b1: Array1::zeros(out_ch),
            v2,
            g2,
            b2: Array1::zeros(out_ch),
            shortcut_w,
            shortcut_b,
            dilation,
        }
    }

    fn zeros(in_ch: usize, out_ch: usize, kernel: usize, dilation: usize) -> Self {
        TcnBlock {
            v1: Array3::zeros((out_ch, in_ch, kernel)),
            g1: Array1::zeros(out_ch),
            b1: Array1::zeros(out_ch),
            v2: Array3::zeros((out_ch, out_ch, kernel)),
            g2: Array1::zeros(out_ch),
            b2: Array1::zeros(out_ch),
            shortcut_w: if in_ch != out_ch { Some(Array2::zeros((out_ch, in_ch))) } else { None },
            shortcut_b: if in_ch != out_ch { Some(Array1::zeros(out_ch)) } else { None },
            dilation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TcnParams {
    pub blocks: Vec<TcnBlock>,
    pub head_w: Array1<f64>,
    pub head_b: Array1<f64>,
}

impl TcnParams {
    pub(crate) fn zeros(spec: &TcnSpec) -> Self {
        let blocks = (0..spec.blocks)
            .map(|i| {
                let in_ch = if i == 0 { spec.input_dim } else { spec.channels };
                TcnBlock::zeros(in_ch, spec.channels, spec.kernel, 1 << i)
            })
            .collect();
        TcnParams { blocks, head_w: Array1::zeros(spec.channels), head_b: Array1::zeros(1) }
    }

    fn init(spec: &TcnSpec, rng: &mut ChaCha8Rng) -> Self {
        let blocks = (0..spec.blocks)
            .map(|i| {
                let in_ch = if i == 0 { spec.input_dim } else { spec.channels };
                TcnBlock::new(rng, in_ch, spec.channels, spec.kernel, 1 << i)
            })
            .collect();
        let head_w = xavier_vec(rng, spec.channels, spec.channels, 1);
        TcnParams { blocks, head_w, head_b: Array1::zeros(1) }
    }

    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.push(b.v1.as_slice().unwrap());
            out.push(b.g1.as_slice().unwrap());
            out.push(b.b1.as_slice().unwrap());
            out.push(b.v2.as_slice().unwrap());
            out.push(b.g2.as_slice().unwrap());
            out.push(b.b2.as_slice().unwrap());
            if let Some(w) = &b.shortcut_w {
                out.push(w.as_slice().unwrap());
            }
            if let Some(bias) = &b.shortcut_b {
                out.push(bias.as_slice().unwrap());
            }
        }
        out.push(self.head_w.as_slice().unwrap());
        out.push(self.head_b.as_slice().unwrap());
        out
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(b.v1.as_slice_mut().unwrap());
            out.push(b.g1.as_slice_mut().unwrap());
            out.push(b.b1.as_slice_mut().unwrap());
            out.push(b.v2.as_slice_mut().unwrap());
            out.push(b.g2.as_slice_mut().unwrap());
            out.push(b.b2.as_slice_mut().unwrap());
            if let Some(w) = &mut b.shortcut_w {
                out.push(w.as_slice_mut().unwrap());
            }
            if let Some(bias) = &mut b.shortcut_b {
                out.push(bias.as_slice_mut().unwrap());
            }
        }
        out.push(self.head_w.as_slice_mut().unwrap());
        out.push(self.head_b.as_slice_mut().unwrap());
        out
    }

    pub(crate) fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.v1"), b.v1.shape().to_vec()));
            out.push((format!("block{i}.g1"), vec![b.g1.len()]));
            out.push((format!("block{i}.b1"), vec![b.b1.len()]));
            out.push((format!("block{i}.v2"), b.v2.shape().to_vec()));
            out.push((format!("block{i}.g2"), vec![b.g2.len()]));
            out.push((format!("block{i}.b2"), vec![b.b2.len()]));
            if let Some(w) = &b.shortcut_w {
                out.push((format!("block{i}.shortcut_w"), w.shape().to_vec()));
            }
            if b.shortcut_b.is_some() {
                out.push((format!("block{i}.shortcut_b"), vec![b.b1.len()]));
            }
        }
        out.push(("head.w".into(), vec![self.head_w.len()]));
        out.push(("head.b".into(), vec![1]));
        out
    }
}

/// Left-padded dilated convolution: output at `t` reads inputs at
/// `t, t - dilation, ..., t - (K-1) * dilation` only.
fn conv_causal(x: &Array3<f64>, w: &Array3<f64>, bias: &Array1<f64>, dilation: usize) -> Array3<f64> {
    let (batch, steps, _) = x.dim();
    let (out_ch, _, kernel) = w.dim();
    let mut y = Array3::zeros((batch, steps, out_ch));
    for t in 0..steps {
        let mut row = y.slice_mut(s![.., t, ..]);
        row += &bias.view().insert_axis(Axis(0));
    }
    for k in 0..kernel {
        let shift = (kernel - 1 - k) * dilation;
        if shift >= steps {
            continue;
        }
        let wk = w.slice(s![.., .., k]);
        for b in 0..batch {
            let xs = x.slice(s![b, ..steps - shift, ..]);
            let prod = xs.dot(&wk.t());
            let mut ys = y.slice_mut(s![b, shift.., ..]);
            ys += &prod;
        }
    }
    y
}

fn conv_backward(
    dy: &Array3<f64>,
    x: &Array3<f64>,
    w: &Array3<f64>,
    dilation: usize,
) -> (Array3<f64>, Array1<f64>, Array3<f64>) {
    let (batch, steps, _) = x.dim();
    let (out_ch, in_ch, kernel) = w.dim();
    let mut dw = Array3::zeros((out_ch, in_ch, kernel));
    let mut dx = Array3::zeros(x.dim());
    let db = dy
        .sum_axis(Axis(0))
        .sum_axis(Axis(0));
    for k in 0..kernel {
        let shift = (kernel - 1 - k) * dilation;
        if shift >= steps {
            continue;
        }
        let wk = w.slice(s![.., .., k]);
        let mut dwk = dw.slice_mut(s![.., .., k]);
        for b in 0..batch {
            let dys = dy.slice(s![b, shift.., ..]);
            let xs = x.slice(s![b, ..steps - shift, ..]);
            dwk += &dys.t().dot(&xs);
            let mut dxs = dx.slice_mut(s![b, ..steps - shift, ..]);
            dxs += &dys.dot(&wk);
        }
    }
    (dw, db, dx)
}

/// Splits the gradient of the effective weights into gain and direction
/// parts of the weight-norm parametrization.
fn weight_norm_backward(
    v: &Array3<f64>,
    g: &Array1<f64>,
    dw_eff: &Array3<f64>,
) -> (Array3<f64>, Array1<f64>) {
    let out_ch = v.shape()[0];
    let norms = kernel_norms(v);
    let mut dv = Array3::zeros(v.dim());
    let mut dg = Array1::zeros(out_ch);
    for o in 0..out_ch {
        let vo = v.slice(s![o, .., ..]);
        let dwo = dw_eff.slice(s![o, .., ..]);
        let n = norms[o];
        let dot: f64 = vo.iter().zip(dwo.iter()).map(|(a, b)| a * b).sum();
        dg[o] = dot / n;
        let scale = g[o] / n;
        let proj = dot / (n * n);
        let mut dvo = dv.slice_mut(s![o, .., ..]);
        dvo.assign(&dwo);
        dvo.zip_mut_with(&vo, |d, vv| *d = scale * (*d - proj * vv));
    }
    (dv, dg)
}

struct BlockCache {
    input: Array3<f64>,
    y1: Array3<f64>,
    z1: Array3<f64>,
    y2: Array3<f64>,
    m1: Option<Array3<f64>>,
    m2: Option<Array3<f64>>,
    w1_eff: Array3<f64>,
    w2_eff: Array3<f64>,
}

pub struct TcnCache {
    blocks: Vec<BlockCache>,
    /// Output sequence of the final block, (B, T, C).
    final_seq: Array3<f64>,
}

#[derive(Debug, Clone)]
pub struct TcnModel {
    pub spec: TcnSpec,
    pub params: TcnParams,
}

impl TcnModel {
    pub fn new(spec: TcnSpec, rng: &mut ChaCha8Rng) -> Self {
        let params = TcnParams::init(&spec, rng);
        TcnModel { spec, params }
    }

    pub fn receptive_field(&self) -> usize {
        tcn_receptive_field(self.spec.kernel, self.spec.blocks)
    }

    fn seq_mask(
        rng: &mut ChaCha8Rng,
        dim: (usize, usize, usize),
        rate: f64,
    ) -> Option<Array3<f64>> {
        if rate <= 0.0 {
            return None;
        }
        let mut m = Array3::zeros(dim);
        for t in 0..dim.1 {
            let step = dropout_mask(rng, (dim.0, dim.2), rate).expect("positive dropout rate");
            m.slice_mut(s![.., t, ..]).assign(&step);
        }
        Some(m)
    }

    pub(crate) fn forward(
        &self,
        inputs: ArrayView3<f64>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (Array1<f64>, TcnCache) {
        let mut x = inputs.to_owned();
        let mut caches = Vec::with_capacity(self.spec.blocks);
        for block in &self.params.blocks {
            let w1_eff = effective_weights(&block.v1, &block.g1);
            let w2_eff = effective_weights(&block.v2, &block.g2);
            let y1 = conv_causal(&x, &w1_eff, &block.b1, block.dilation);
            let r1 = y1.mapv(|v| v.max(0.0));
            let m1 = rng
                .as_deref_mut()
                .and_then(|r| Self::seq_mask(r, r1.dim(), self.spec.dropout));
            let z1 = match &m1 {
                Some(m) => &r1 * m,
                None => r1,
            };
            let y2 = conv_causal(&z1, &w2_eff, &block.b2, block.dilation);
            let r2 = y2.mapv(|v| v.max(0.0));
            let m2 = rng
                .as_deref_mut()
                .and_then(|r| Self::seq_mask(r, r2.dim(), self.spec.dropout));
            let z2 = match &m2 {
                Some(m) => &r2 * m,
                None => r2,
            };
            let shortcut = match (&block.shortcut_w, &block.shortcut_b) {
                (Some(w), Some(b)) => {
                    let (batch, steps, _) = x.dim();
                    let mut s_out = Array3::zeros((batch, steps, w.nrows()));
                    for bi in 0..batch {
                        let xs = x.slice(s![bi, .., ..]);
                        let mut so = s_out.slice_mut(s![bi, .., ..]);
                        so.assign(&(xs.dot(&w.t()) + &b.view().insert_axis(Axis(0))));
                    }
                    s_out
                }
                _ => x.clone(),
            };
            let out = &z2 + &shortcut;
            caches.push(BlockCache { input: x, y1, z1, y2, m1, m2, w1_eff, w2_eff });
            x = out;
        }
        let steps = x.shape()[1];
        let last = x.slice(s![.., steps - 1, ..]);
        let pred = last.dot(&self.params.head_w) + self.params.head_b[0];
        debug_assert_finite("tcn.pred", pred.iter());
        (pred, TcnCache { blocks: caches, final_seq: x })
    }

    pub(crate) fn backward(&self, cache: &TcnCache, dpred: &Array1<f64>) -> TcnParams {
        let mut grads = TcnParams::zeros(&self.spec);
        let (batch, steps, channels) = cache.final_seq.dim();

        let last = cache.final_seq.slice(s![.., steps - 1, ..]);
        grads.head_w = last.t().dot(dpred).to_owned();
        grads.head_b[0] = dpred.sum();

        let mut d_out = Array3::zeros((batch, steps, channels));
        let dpred_col = dpred.view().insert_axis(Axis(1));
        d_out
            .slice_mut(s![.., steps - 1, ..])
            .assign(&dpred_col.dot(&self.params.head_w.view().insert_axis(Axis(0))));

        for (i, block) in self.params.blocks.iter().enumerate().rev() {
            let bc = &cache.blocks[i];
            let g = &mut grads.blocks[i];

            // Main path: out = dropout(relu(y2)) + shortcut.
            let dz2 = &d_out;
            let dr2 = match &bc.m2 {
                Some(m) => dz2 * m,
                None => dz2.clone(),
            };
            let dy2 = &dr2 * &bc.y2.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            let (dw2_eff, db2, dz1) = conv_backward(&dy2, &bc.z1, &bc.w2_eff, block.dilation);
            let (dv2, dg2) = weight_norm_backward(&block.v2, &block.g2, &dw2_eff);
            g.v2 += &dv2;
            g.g2 += &dg2;
            g.b2 += &db2;

            let dr1 = match &bc.m1 {
                Some(m) => &dz1 * m,
                None => dz1,
            };
            let dy1 = &dr1 * &bc.y1.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            let (dw1_eff, db1, mut dx) = conv_backward(&dy1, &bc.input, &bc.w1_eff, block.dilation);
            let (dv1, dg1) = weight_norm_backward(&block.v1, &block.g1, &dw1_eff);
            g.v1 += &dv1;
            g.g1 += &dg1;
            g.b1 += &db1;

            // Shortcut path.
            match (&block.shortcut_w, &mut g.shortcut_w, &mut g.shortcut_b) {
                (Some(w), Some(gw), Some(gb)) => {
                    for bi in 0..batch {
                        let ds = d_out.slice(s![bi, .., ..]);
                        let xs = bc.input.slice(s![bi, .., ..]);
                        *gw += &ds.t().dot(&xs);
                        let mut dxs = dx.slice_mut(s![bi, .., ..]);
                        dxs += &ds.dot(w);
                    }
                    *gb += &d_out.sum_axis(Axis(0)).sum_axis(Axis(0));
                }
                _ => {
                    dx += &d_out;
                }
            }
            d_out = dx;
        }
        debug_assert_finite("tcn.grads", grads.slices().into_iter().flatten());
        grads
    }

    /// Final-block output sequence for causality probes.
    pub fn activation_sequence(&self, inputs: ArrayView3<f64>) -> Array3<f64> {
        let (_, cache) = self.forward(inputs, None);
        cache.final_seq
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn spec(input_dim: usize, channels: usize, blocks: usize, kernel: usize) -> TcnSpec {
        TcnSpec { input_dim, channels, blocks, kernel, dropout: 0.0 }
    }

    #[test]
    fn receptive_field_formula() {
        assert_eq!(tcn_receptive_field(3, 4), 61);
        assert_eq!(tcn_receptive_field(2, 1), 3);
    }

    #[test]
    fn identity_block_reproduces_last_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = TcnModel::new(spec(3, 3, 1, 3), &mut rng);
        let block = &mut model.params.blocks[0];
        // First conv passes the current step through; second conv and its
        // bias are zeroed so the main path contributes nothing and the
        // identity shortcut carries the input.
        block.v1.fill(0.0);
        for o in 0..3 {
            block.v1[[o, o, 2]] = 1.0;
        }
        block.g1 = kernel_norms(&block.v1);
        block.b1.fill(0.0);
        block.g2.fill(0.0);
        block.b2.fill(0.0);
        model.params.head_w = Array1::from_vec(vec![1.0, 0.0, 0.0]);
        model.params.head_b[0] = 0.0;
        let x = Array3::from_shape_fn((2, 5, 3), |(b, t, d)| (b + t + d) as f64 * 0.25 - 1.0);
        let (pred, _) = model.forward(x.view(), None);
        for b in 0..2 {
            assert!((pred[b] - x[[b, 4, 0]]).abs() < 1e-12);
        }
    }

    #[test]
    fn causality_perturbation_at_final_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = TcnModel::new(spec(2, 4, 2, 3), &mut rng);
        let x = Array3::from_shape_fn((1, 12, 2), |(_, t, d)| ((t * 2 + d) as f64 * 0.37).sin());
        let base = model.activation_sequence(x.view());
        let mut flipped = x.clone();
        flipped[[0, 11, 0]] += 5.0;
        flipped[[0, 11, 1]] -= 3.0;
        let changed = model.activation_sequence(flipped.view());
        for t in 0..11 {
            for c in 0..4 {
                assert_eq!(base[[0, t, c]], changed[[0, t, c]], "leak at step {t}");
            }
        }
        assert!((base[[0, 11, 0]] - changed[[0, 11, 0]]).abs() > 0.0);
    }

    #[test]
    fn causality_at_every_timestep() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = TcnModel::new(spec(3, 5, 3, 2), &mut rng);
        let x = Array3::from_shape_fn((1, 16, 3), |(_, t, d)| ((t + d * 3) as f64 * 0.21).cos());
        let base = model.activation_sequence(x.view());
        for step in 0..16 {
            let mut flipped = x.clone();
            flipped[[0, step, 1]] += 2.5;
            let changed = model.activation_sequence(flipped.view());
            for t in 0..step {
                for c in 0..5 {
                    assert_eq!(base[[0, t, c]], changed[[0, t, c]], "leak from {step} to {t}");
                }
            }
        }
    }

    #[test]
    fn receptive_field_matches_dependency_tracing() {
        // kernel 2, 2 blocks: field = 1 + 2*1*3 = 7.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = TcnModel::new(spec(1, 3, 2, 2), &mut rng);
        // Positive weights keep every ReLU path open so reachability in the
        // graph implies a numeric effect.
        for block in &mut model.params.blocks {
            block.v1.mapv_inplace(f64::abs);
            block.v2.mapv_inplace(f64::abs);
            block.g1 = kernel_norms(&block.v1);
            block.g2 = kernel_norms(&block.v2);
            block.b1.fill(0.1);
            block.b2.fill(0.1);
            if let Some(w) = &mut block.shortcut_w {
                w.mapv_inplace(f64::abs);
            }
        }
        model.params.head_w.mapv_inplace(|v| v.abs() + 0.1);
        let field = model.receptive_field();
        assert_eq!(field, 7);
        let steps = 10;
        let x = Array3::from_elem((1, steps, 1), 0.5);
        let (base, _) = model.forward(x.view(), None);
        // Perturbing the step exactly at the edge of the field moves the
        // output; one step earlier does not.
        let mut inside = x.clone();
        inside[[0, steps - field, 0]] += 1.0;
        let (pred_in, _) = model.forward(inside.view(), None);
        assert!((pred_in[0] - base[0]).abs() > 1e-12);
        let mut outside = x.clone();
        outside[[0, steps - field - 1, 0]] += 1.0;
        let (pred_out, _) = model.forward(outside.view(), None);
        assert_eq!(pred_out[0], base[0]);
    }
}
