// SPDX-License-Identifier: Apache-2.0
//! Dense autoencoder `D -> H1 -> H2 -> H1 -> D` trained by minibatch SGD
//! with momentum. ReLU on the three hidden layers, identity output.
//!
//! Per-sample loss is `0.5 * ||x_hat - x||^2`; a minibatch step uses the
//! batch mean. The reported MSE divides the same sum by the dimension.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `out x in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder {
    pub layers: Vec<Layer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, lr: 1e-3, momentum: 0.9, batch: 32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diverged {
    pub epoch: usize,
    pub loss: f64,
}

struct Trace {
    /// Pre-activations per layer.
    pre: Vec<Array2<f64>>,
    /// Activations; `act[0]` is the input.
    act: Vec<Array2<f64>>,
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

impl Autoencoder {
    /// Glorot-uniform weights, zero biases.
    pub fn new(d: usize, h1: usize, h2: usize, rng: &mut impl Rng) -> Self {
        let widths = [d, h1, h2, h1, d];
        let layers = widths
            .windows(2)
            .map(|p| {
                let (fan_in, fan_out) = (p[0], p[1]);
                let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    w: Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-lim..=lim)),
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[1].w.nrows()
    }

    fn forward(&self, x: ArrayView2<f64>) -> Trace {
        let mut act = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let z = act[l].dot(&layer.w.t()) + &layer.b;
            let a = if l + 1 < self.layers.len() { z.mapv(relu) } else { z.clone() };
            pre.push(z);
            act.push(a);
        }
        Trace { pre, act }
    }

    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x).act.pop().expect("at least one layer")
    }

    /// Post-ReLU bottleneck activations.
    pub fn encode(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        for layer in &self.layers[..2] {
            a = (a.dot(&layer.w.t()) + &layer.b).mapv(relu);
        }
        a
    }

    /// Mean squared reconstruction error over rows and dimensions; this is
    /// the training objective.
    pub fn loss(&self, x: ArrayView2<f64>) -> f64 {
        let r = self.reconstruct(x);
        (&r - &x).mapv(|v| v * v).sum() / (x.nrows() * self.dim()) as f64
    }

    pub fn mse(&self, x: ArrayView2<f64>) -> f64 {
        self.loss(x)
    }

    /// Gradients of `scale * loss(x)` for every layer, as `(dW, db)`.
    pub fn gradients(&self, x: ArrayView2<f64>, scale: f64) -> Vec<(Array2<f64>, Array1<f64>)> {
        let t = self.forward(x);
        let n = (x.nrows() * self.dim()) as f64;
        let last = self.layers.len() - 1;
        let mut delta = (&t.act[last + 1] - &x) * (2.0 * scale / n);
        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..=last).rev() {
            let dw = delta.t().dot(&t.act[l]);
            let db = delta.sum_axis(Axis(0));
            grads.push((dw, db));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].w);
                Zip::from(&mut back).and(&t.pre[l - 1]).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        grads
    }

    /// Trains in place; returns the per-epoch mean training loss.
    pub fn train(&mut self, x: ArrayView2<f64>, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, Diverged> {
        let n = x.nrows();
        let mut vel: Vec<(Array2<f64>, Array1<f64>)> =
            self.layers.iter().map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim()))).collect();
        let mut order: Vec<usize> = (0..n).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        let bs = cfg.batch.max(1);
        for epoch in 0..cfg.epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            for chunk in order.chunks(bs) {
                let xb = x.select(Axis(0), chunk);
                let g = self.gradients(xb.view(), 1.0);
                for ((layer, (vw, vb)), (gw, gb)) in self.layers.iter_mut().zip(vel.iter_mut()).zip(g) {
                    Zip::from(&mut *vw).and(&gw).for_each(|v, &d| *v = cfg.momentum * *v - cfg.lr * d);
                    Zip::from(&mut *vb).and(&gb).for_each(|v, &d| *v = cfg.momentum * *v - cfg.lr * d);
                    layer.w += &*vw;
                    layer.b += &*vb;
                }
                total += self.loss(xb.view()) * chunk.len() as f64;
            }
            let mean = total / n as f64;
            if !mean.is_finite() {
                return Err(Diverged { epoch, loss: mean });
            }
            history.push(mean);
        }
        Ok(history)
    }

    fn param_mut(&mut self, layer: usize, idx: usize) -> &mut f64 {
        let l = &mut self.layers[layer];
        let nw = l.w.len();
        if idx < nw {
            let c = l.w.ncols();
            &mut l.w[[idx / c, idx % c]]
        } else {
            &mut l.b[idx - nw]
        }
    }
}

/// Largest relative difference between analytic gradients of the
/// single-sample loss and central differences with step `1e-5`.
///
/// The relative error of each component is `|a - f| / max(|a|, |f|, 1e-3)`,
/// so components below 1e-3 are compared on an absolute scale.
pub fn gradient_check(m: &Autoencoder, sample: ArrayView1<f64>) -> f64 {
    const H: f64 = 1e-5;
    let x = sample.insert_axis(Axis(0));
    let g = m.gradients(x, 1.0);
    let mut probe = m.clone();
    let mut worst: f64 = 0.0;
    for (l, (gw, gb)) in g.iter().enumerate() {
        let analytic = gw.iter().chain(gb.iter());
        for (idx, &a) in analytic.enumerate() {
            let p = probe.param_mut(l, idx);
            let orig = *p;
            *p = orig + H;
            let up = probe.loss(x);
            *probe.param_mut(l, idx) = orig - H;
            let down = probe.loss(x);
            *probe.param_mut(l, idx) = orig;
            let f = (up - down) / (2.0 * H);
            worst = worst.max((a - f).abs() / a.abs().max(f.abs()).max(1e-3));
        }
    }
    worst
}

/// Serialized layer: row-major weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl From<&Layer> for LayerDoc {
    fn from(l: &Layer) -> Self {
        LayerDoc { rows: l.w.nrows(), cols: l.w.ncols(), weights: l.w.iter().copied().collect(), bias: l.b.to_vec() }
    }
}

impl TryFrom<&LayerDoc> for Layer {
    type Error = String;

    fn try_from(d: &LayerDoc) -> Result<Self, String> {
        if d.bias.len() != d.rows {
            return Err(format!("bias length {} != rows {}", d.bias.len(), d.rows));
        }
        let w = Array2::from_shape_vec((d.rows, d.cols), d.weights.clone()).map_err(|e| e.to_string())?;
        Ok(Layer { w, b: Array1::from(d.bias.clone()) })
    }
}

impl Autoencoder {
    pub fn from_docs(docs: &[LayerDoc]) -> Result<Self, String> {
        let layers = docs.iter().map(Layer::try_from).collect::<Result<Vec<_>, _>>()?;
        if layers.len() != 4 {
            return Err(format!("expected 4 layers, got {}", layers.len()));
        }
        for p in layers.windows(2) {
            if p[0].w.nrows() != p[1].w.ncols() {
                return Err("layer shapes do not chain".into());
            }
        }
        if layers[0].w.ncols() != layers[3].w.nrows() {
            return Err("output width differs from input width".into());
        }
        Ok(Self { layers })
    }

    pub fn to_docs(&self) -> Vec<LayerDoc> {
        self.layers.iter().map(LayerDoc::from).collect()
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.dim()];
        w.extend(self.layers.iter().map(|l| l.w.nrows()));
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rand_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Autoencoder::new(12, 8, 4, &mut rng);
        let x = rand_data(&mut rng, 3, 12);
        for r in 0..3 {
            let e = gradient_check(&m, x.row(r));
            assert!(e < 1e-4, "{e}");
        }
    }

    #[test]
    fn zero_input_zero_first_layer_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Autoencoder::new(6, 5, 3, &mut rng);
        let g = m.gradients(Array2::zeros((1, 6)).view(), 1.0);
        assert!(g[0].0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_scales_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Autoencoder::new(6, 5, 3, &mut rng);
        let x = rand_data(&mut rng, 4, 6);
        let g1 = m.gradients(x.view(), 1.0);
        let g2 = m.gradients(x.view(), 2.0);
        for ((a, b), (c, d)) in g1.iter().zip(&g2) {
            assert!(a.iter().zip(c).all(|(u, v)| *v == 2.0 * u));
            assert!(b.iter().zip(d).all(|(u, v)| *v == 2.0 * u));
        }
    }

    #[test]
    fn training_reduces_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = rand_data(&mut rng, 64, 3);
        let mix = rand_data(&mut rng, 3, 10);
        let x = base.dot(&mix);
        let mut m = Autoencoder::new(10, 8, 4, &mut rng);
        let before = m.mse(x.view());
        let cfg = TrainConfig { epochs: 100, ..Default::default() };
        m.train(x.view(), &cfg, &mut rng).unwrap();
        assert!(m.mse(x.view()) < before);
    }

    #[test]
    fn doc_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = Autoencoder::new(7, 5, 2, &mut rng);
        assert_eq!(Autoencoder::from_docs(&m.to_docs()).unwrap(), m);
        assert_eq!(m.widths(), vec![7, 5, 2, 5, 7]);
    }
}
