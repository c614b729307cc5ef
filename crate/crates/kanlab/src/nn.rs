//! Neural-network building blocks: activations, losses, Adam, and the
//! standard dense/convolutional layers used by the baseline models.
//!
//! Layers follow one convention throughout the crate: `forward` is pure and
//! returns `(output, cache)`, `backward` consumes the cache and the upstream
//! gradient, accumulates into each parameter's `.grad`, and returns the
//! input gradient. Callers zero gradients between optimizer steps.

use std::collections::HashMap;

use crate::rng::Rng;
use crate::tensor::{matmul_a_bt, matmul_at_b_acc, matmul_into, Tensor};

/// `x * sigmoid(x)`, with the sigmoid computed branch-stably so neither tail
/// overflows.
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of [`silu`]: `sigma(x) (1 + x (1 - sigma(x)))`.
pub fn silu_d(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// A trainable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }
}

/// Kaiming-style normal init: `N(0, sqrt(2 / fan_in))`.
pub fn he_normal(rng: &mut Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let sd = (2.0 / fan_in as f64).sqrt();
    let data = (0..shape.iter().product())
        .map(|_| rng.normal() * sd)
        .collect();
    Tensor::from_vec(shape, data).expect("shape/product consistent")
}

/// Adam with bias correction. One `step` call advances the shared timestep
/// and updates every parameter it is handed; state is keyed by parameter
/// name, so the same optimizer instance must always see the same names.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    state: HashMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            state: HashMap::new(),
        }
    }

    pub fn step(&mut self, params: &mut [(String, &mut Param)]) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (name, param) in params {
            let n = param.value.len();
            let (m, v) = self
                .state
                .entry(name.clone())
                .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
            assert_eq!(m.len(), n, "parameter {name} changed size");
            let grad = param.grad.data();
            let value = param.value.data_mut();
            for i in 0..n {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                value[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Mean softmax cross-entropy over a batch of logits `[B, C]` with integer
/// labels. Returns the scalar loss and the logit gradient
/// `(softmax - onehot) / B`, both computed through a max-shifted
/// log-sum-exp so large logits cannot overflow.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> (f64, Tensor) {
    assert_eq!(logits.rank(), 2);
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    assert_eq!(labels.len(), b);
    let mut grad = Tensor::zeros(&[b, c]);
    let mut loss = 0.0;
    for row in 0..b {
        let x = &logits.data()[row * c..(row + 1) * c];
        let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = x.iter().map(|&v| (v - m).exp()).sum();
        let lse = m + sum_exp.ln();
        assert!(labels[row] < c, "label {} out of range", labels[row]);
        loss += lse - x[labels[row]];
        let grow = &mut grad.data_mut()[row * c..(row + 1) * c];
        for j in 0..c {
            let p = (x[j] - m).exp() / sum_exp;
            grow[j] = (p - if j == labels[row] { 1.0 } else { 0.0 }) / b as f64;
        }
    }
    (loss / b as f64, grad)
}

/// Fraction of rows whose argmax matches the label; ties resolve to the
/// lowest index.
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> f64 {
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    let mut hits = 0usize;
    for row in 0..b {
        let x = &logits.data()[row * c..(row + 1) * c];
        let mut best = 0usize;
        for j in 1..c {
            if x[j] > x[best] {
                best = j;
            }
        }
        if best == labels[row] {
            hits += 1;
        }
    }
    hits as f64 / b as f64
}

/// Mean squared error between predictions `[B, 1]` (or `[B]`) and targets.
pub fn mse_loss(pred: &Tensor, target: &[f64]) -> (f64, Tensor) {
    let b = pred.shape()[0];
    assert_eq!(pred.len(), b, "mse expects one prediction per row");
    assert_eq!(target.len(), b);
    let mut grad = Tensor::zeros(pred.shape());
    let mut loss = 0.0;
    for i in 0..b {
        let d = pred.data()[i] - target[i];
        loss += d * d;
        grad.data_mut()[i] = 2.0 * d / b as f64;
    }
    (loss / b as f64, grad)
}

pub fn conv_out_dim(n: usize, k: usize, stride: usize, pad: usize) -> usize {
    (n + 2 * pad - k) / stride + 1
}

/// Unfolds `[B, C, H, W]` into rows of receptive fields:
/// `[B*OH*OW, C*KH*KW]`, zero-padded. Row order is `(b, oh, ow)` row-major,
/// column order `(c, kh, kw)`.
pub fn im2col(x: &Tensor, kh: usize, kw: usize, stride: usize, pad: usize) -> Tensor {
    let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let oh = conv_out_dim(h, kh, stride, pad);
    let ow = conv_out_dim(w, kw, stride, pad);
    let q = c * kh * kw;
    let mut cols = Tensor::zeros(&[b * oh * ow, q]);
    let xd = x.data();
    let cd = cols.data_mut();
    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = ((bi * oh + oy) * ow + ox) * q;
                for ci in 0..c {
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            cd[row + (ci * kh + ky) * kw + kx] =
                                xd[((bi * c + ci) * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: folds column gradients back onto the input grid,
/// accumulating where receptive fields overlap.
pub fn col2im(
    dcols: &Tensor,
    in_shape: &[usize],
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> Tensor {
    let (b, c, h, w) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
    let oh = conv_out_dim(h, kh, stride, pad);
    let ow = conv_out_dim(w, kw, stride, pad);
    let q = c * kh * kw;
    let mut dx = Tensor::zeros(in_shape);
    let dd = dx.data_mut();
    let cd = dcols.data();
    for bi in 0..b {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = ((bi * oh + oy) * ow + ox) * q;
                for ci in 0..c {
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            dd[((bi * c + ci) * h + iy as usize) * w + ix as usize] +=
                                cd[row + (ci * kh + ky) * kw + kx];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// 2D cross-correlation layer, `weight [OC, C, KH, KW]`, `bias [OC]`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub pad: usize,
}

#[derive(Debug)]
pub struct Conv2dCache {
    cols: Tensor,
    in_shape: Vec<usize>,
    out_hw: (usize, usize),
}

impl Conv2d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut Rng,
    ) -> Self {
        let fan_in = in_ch * kernel * kernel;
        Conv2d {
            weight: Param::new(he_normal(rng, &[out_ch, in_ch, kernel, kernel], fan_in)),
            bias: Param::new(Tensor::zeros(&[out_ch])),
            stride,
            pad,
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, Conv2dCache) {
        assert_eq!(x.rank(), 4);
        let ws = self.weight.value.shape();
        let (oc, kh, kw) = (ws[0], ws[2], ws[3]);
        assert_eq!(x.shape()[1], ws[1], "channel mismatch");
        let (b, h, w) = (x.shape()[0], x.shape()[2], x.shape()[3]);
        let oh = conv_out_dim(h, kh, self.stride, self.pad);
        let ow = conv_out_dim(w, kw, self.stride, self.pad);
        let q = ws[1] * kh * kw;
        let n = b * oh * ow;

        let cols = im2col(x, kh, kw, self.stride, self.pad);
        let mut rows = vec![0.0; n * oc];
        matmul_a_bt(cols.data(), self.weight.value.data(), &mut rows, n, q, oc);
        let bias = self.bias.value.data();
        let mut out = Tensor::zeros(&[b, oc, oh, ow]);
        let od = out.data_mut();
        for bi in 0..b {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = ((bi * oh + oy) * ow + ox) * oc;
                    for ci in 0..oc {
                        od[((bi * oc + ci) * oh + oy) * ow + ox] = rows[row + ci] + bias[ci];
                    }
                }
            }
        }
        (
            out,
            Conv2dCache {
                cols,
                in_shape: x.shape().to_vec(),
                out_hw: (oh, ow),
            },
        )
    }

    pub fn backward(&mut self, cache: &Conv2dCache, dy: &Tensor) -> Tensor {
        let ws = self.weight.value.shape().to_vec();
        let (oc, kh, kw) = (ws[0], ws[2], ws[3]);
        let q = ws[1] * kh * kw;
        let (oh, ow) = cache.out_hw;
        let b = cache.in_shape[0];
        let n = b * oh * ow;
        assert_eq!(dy.shape(), &[b, oc, oh, ow]);

        // [B, OC, OH, OW] -> rows [(b, oy, ox), oc]
        let mut dy_rows = vec![0.0; n * oc];
        let dyd = dy.data();
        for bi in 0..b {
            for ci in 0..oc {
                for oy in 0..oh {
                    for ox in 0..ow {
                        dy_rows[(((bi * oh + oy) * ow + ox) * oc) + ci] =
                            dyd[((bi * oc + ci) * oh + oy) * ow + ox];
                    }
                }
            }
        }

        let db = self.bias.grad.data_mut();
        for row in 0..n {
            for ci in 0..oc {
                db[ci] += dy_rows[row * oc + ci];
            }
        }
        matmul_at_b_acc(
            &dy_rows,
            cache.cols.data(),
            self.weight.grad.data_mut(),
            n,
            oc,
            q,
        );
        let mut dcols = Tensor::zeros(&[n, q]);
        matmul_into(
            &dy_rows,
            self.weight.value.data(),
            dcols.data_mut(),
            n,
            oc,
            q,
        );
        col2im(&dcols, &cache.in_shape, kh, kw, self.stride, self.pad)
    }
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
#[derive(Debug, Clone)]
pub struct MaxPool2;

#[derive(Debug)]
pub struct MaxPoolCache {
    argmax: Vec<usize>,
    in_shape: Vec<usize>,
}

impl MaxPool2 {
    pub fn forward(&self, x: &Tensor) -> (Tensor, MaxPoolCache) {
        let (b, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Tensor::zeros(&[b, c, oh, ow]);
        let mut argmax = vec![0usize; b * c * oh * ow];
        let xd = x.data();
        let od = out.data_mut();
        for bc in 0..b * c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best_idx = (bc * h + oy * 2) * w + ox * 2;
                    let mut best = xd[best_idx];
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let idx = (bc * h + oy * 2 + dy) * w + ox * 2 + dx;
                            if xd[idx] > best {
                                best = xd[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = (bc * oh + oy) * ow + ox;
                    od[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
        (
            out,
            MaxPoolCache {
                argmax,
                in_shape: x.shape().to_vec(),
            },
        )
    }

    pub fn backward(&self, cache: &MaxPoolCache, dy: &Tensor) -> Tensor {
        let mut dx = Tensor::zeros(&cache.in_shape);
        let dd = dx.data_mut();
        for (o, &src) in cache.argmax.iter().enumerate() {
            dd[src] += dy.data()[o];
        }
        dx
    }
}

/// Elementwise rectifier; the subgradient at 0 is taken as 0.
#[derive(Debug, Clone)]
pub struct Relu;

#[derive(Debug)]
pub struct ReluCache {
    mask: Vec<bool>,
}

impl Relu {
    pub fn forward(&self, x: &Tensor) -> (Tensor, ReluCache) {
        let mask: Vec<bool> = x.data().iter().map(|&v| v > 0.0).collect();
        let out = x.map(|v| if v > 0.0 { v } else { 0.0 });
        (out, ReluCache { mask })
    }

    pub fn backward(&self, cache: &ReluCache, dy: &Tensor) -> Tensor {
        let data = dy
            .data()
            .iter()
            .zip(&cache.mask)
            .map(|(&g, &m)| if m { g } else { 0.0 })
            .collect();
        Tensor::from_vec(dy.shape(), data).expect("same shape")
    }
}

/// Affine layer `y = x W + b` with `weight [in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    pub has_bias: bool,
}

#[derive(Debug)]
pub struct LinearCache {
    x: Tensor,
}

impl Linear {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        Self::with_bias(in_dim, out_dim, true, rng)
    }

    /// `has_bias = false` keeps the layer a pure matrix product; the bias
    /// tensor stays zero and is excluded from the trainable parameter list.
    pub fn with_bias(in_dim: usize, out_dim: usize, has_bias: bool, rng: &mut Rng) -> Self {
        Linear {
            weight: Param::new(he_normal(rng, &[in_dim, out_dim], in_dim)),
            bias: Param::new(Tensor::zeros(&[out_dim])),
            has_bias,
        }
    }

    pub fn forward(&self, x: &Tensor) -> (Tensor, LinearCache) {
        let y = x
            .matmul(&self.weight.value)
            .expect("linear input width matches weight")
            .broadcast_add(&self.bias.value)
            .expect("bias broadcasts over rows");
        (y, LinearCache { x: x.clone() })
    }

    pub fn backward(&mut self, cache: &LinearCache, dy: &Tensor) -> Tensor {
        let (b, in_dim) = (cache.x.shape()[0], cache.x.shape()[1]);
        let out_dim = dy.shape()[1];
        matmul_at_b_acc(
            cache.x.data(),
            dy.data(),
            self.weight.grad.data_mut(),
            b,
            in_dim,
            out_dim,
        );
        let db = self.bias.grad.data_mut();
        for row in 0..b {
            for j in 0..out_dim {
                db[j] += dy.data()[row * out_dim + j];
            }
        }
        let mut dx = vec![0.0; b * in_dim];
        matmul_a_bt(dy.data(), self.weight.value.data(), &mut dx, b, out_dim, in_dim);
        Tensor::from_vec(&[b, in_dim], dx).expect("shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silu_fixed_points_and_tails() {
        assert_eq!(silu(0.0), 0.0);
        assert!((silu(1.0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        // deep negative tail underflows gracefully instead of producing NaN
        let v = silu(-50.0);
        assert!(v.is_finite() && v < 0.0 && v.abs() < 1e-19, "got {v}");
        assert!((silu(50.0) - 50.0).abs() < 1e-12);
        assert!(silu(-1e5).is_finite());
        assert!(silu(1e5).is_finite());
    }

    #[test]
    fn silu_derivative_matches_finite_difference() {
        let h = 1e-6;
        for &x in &[-3.0, -1.0, -0.1, 0.0, 0.5, 2.0, 8.0] {
            let fd = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((silu_d(x) - fd).abs() < 1e-8, "x {x}");
        }
    }

    #[test]
    fn cross_entropy_uniform_logits_is_log_c() {
        for c in [2usize, 10, 100] {
            let logits = Tensor::zeros(&[4, c]);
            let labels = vec![0usize; 4];
            let (loss, grad) = softmax_cross_entropy(&logits, &labels);
            assert!((loss - (c as f64).ln()).abs() < 1e-12, "c {c}: {loss}");
            // each gradient row sums to zero
            for row in 0..4 {
                let s: f64 = grad.data()[row * c..(row + 1) * c].iter().sum();
                assert!(s.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cross_entropy_survives_huge_logits() {
        let logits = Tensor::from_rows(&[vec![1000.0, 0.0], vec![-1000.0, 0.0]]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, &[0, 0]);
        assert!(loss.is_finite());
        assert!(grad.all_finite());
        // first row is confidently correct, second confidently wrong
        assert!((loss - 500.0).abs() < 1.0);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_difference() {
        let mut logits =
            Tensor::from_rows(&[vec![0.3, -0.7, 1.2], vec![0.0, 0.1, -0.2]]).unwrap();
        let labels = [2usize, 0];
        let (_, grad) = softmax_cross_entropy(&logits, &labels);
        let h = 1e-6;
        for i in 0..logits.len() {
            let orig = logits.data()[i];
            logits.data_mut()[i] = orig + h;
            let (lp, _) = softmax_cross_entropy(&logits, &labels);
            logits.data_mut()[i] = orig - h;
            let (lm, _) = softmax_cross_entropy(&logits, &labels);
            logits.data_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((grad.data()[i] - fd).abs() < 1e-8, "logit {i}");
        }
    }

    #[test]
    fn accuracy_counts_argmax_hits() {
        let logits = Tensor::from_rows(&[
            vec![0.1, 0.9],
            vec![0.9, 0.1],
            vec![0.5, 0.5], // tie resolves to index 0
            vec![-1.0, 2.0],
        ])
        .unwrap();
        assert_eq!(accuracy(&logits, &[1, 0, 0, 1]), 1.0);
        assert_eq!(accuracy(&logits, &[0, 0, 1, 1]), 0.5);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // With constant unit gradient, bias correction makes the very first
        // update exactly lr / (1 + eps).
        let mut opt = Adam::new(1e-3);
        let mut p = Param::new(Tensor::scalar(0.5));
        p.grad = Tensor::scalar(1.0);
        opt.step(&mut [("p".to_string(), &mut p)]);
        let moved = 0.5 - p.value.data()[0];
        assert!((moved - 1e-3).abs() < 1e-10, "moved {moved}");
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut opt = Adam::new(0.01);
        let mut p = Param::new(Tensor::scalar(1.0));
        for _ in 0..2000 {
            let theta = p.value.data()[0];
            p.grad = Tensor::scalar(2.0 * theta);
            opt.step(&mut [("theta".to_string(), &mut p)]);
        }
        assert!(p.value.data()[0].abs() < 1e-3, "theta {}", p.value.data()[0]);
    }

    fn rand_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor {
        let data = (0..shape.iter().product())
            .map(|_| rng.uniform_in(-1.0, 1.0))
            .collect();
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn conv_identity_kernel_passes_input_through() {
        let mut rng = Rng::from_seed(3);
        let x = rand_tensor(&mut rng, &[2, 1, 4, 4]);
        let mut conv = Conv2d::new(1, 1, 3, 1, 1, &mut rng);
        conv.weight.value = Tensor::zeros(&[1, 1, 3, 3]);
        conv.weight.value.data_mut()[4] = 1.0; // delta at kernel center
        let (y, _) = conv.forward(&x);
        assert_eq!(y.shape(), x.shape());
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn conv_sum_kernel_matches_hand_computation() {
        // 2x2 image, 3x3 all-ones kernel, pad 1: each output is the sum of
        // the in-bounds neighborhood, which covers the whole image here.
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut rng = Rng::from_seed(0);
        let mut conv = Conv2d::new(1, 1, 3, 1, 1, &mut rng);
        conv.weight.value = Tensor::filled(&[1, 1, 3, 3], 1.0);
        conv.bias.value = Tensor::from_vec(&[1], vec![0.5]).unwrap();
        let (y, _) = conv.forward(&x);
        assert_eq!(y.data(), &[10.5, 10.5, 10.5, 10.5]);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = Rng::from_seed(4);
        let x = rand_tensor(&mut rng, &[2, 2, 5, 5]);
        let mut conv = Conv2d::new(2, 3, 3, 1, 1, &mut rng);
        let loss_of = |conv: &Conv2d, x: &Tensor| {
            let (y, _) = conv.forward(x);
            y.data().iter().map(|v| v * v).sum::<f64>()
        };
        let (y, cache) = conv.forward(&x);
        let dy = y.scale(2.0);
        let dx = conv.backward(&cache, &dy);

        let h = 1e-5;
        let mut xp = x.clone();
        for i in (0..x.len()).step_by(7) {
            let orig = xp.data()[i];
            xp.data_mut()[i] = orig + h;
            let lp = loss_of(&conv, &xp);
            xp.data_mut()[i] = orig - h;
            let lm = loss_of(&conv, &xp);
            xp.data_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let a = dx.data()[i];
            assert!(
                (a - fd).abs() / a.abs().max(fd.abs()).max(1.0) < 1e-6,
                "dx[{i}]: {a} vs {fd}"
            );
        }
        for i in (0..conv.weight.value.len()).step_by(5) {
            let orig = conv.weight.value.data()[i];
            conv.weight.value.data_mut()[i] = orig + h;
            let lp = loss_of(&conv, &x);
            conv.weight.value.data_mut()[i] = orig - h;
            let lm = loss_of(&conv, &x);
            conv.weight.value.data_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let a = conv.weight.grad.data()[i];
            assert!(
                (a - fd).abs() / a.abs().max(fd.abs()).max(1.0) < 1e-6,
                "dW[{i}]: {a} vs {fd}"
            );
        }
        let i = 1;
        let orig = conv.bias.value.data()[i];
        conv.bias.value.data_mut()[i] = orig + h;
        let lp = loss_of(&conv, &x);
        conv.bias.value.data_mut()[i] = orig - h;
        let lm = loss_of(&conv, &x);
        conv.bias.value.data_mut()[i] = orig;
        let fd = (lp - lm) / (2.0 * h);
        assert!((conv.bias.grad.data()[i] - fd).abs() < 1e-6);
    }

    #[test]
    fn maxpool_forward_and_scatter() {
        let x = Tensor::from_vec(
            &[1, 1, 4, 4],
            vec![
                1.0, 2.0, 5.0, 6.0, //
                3.0, 4.0, 7.0, 8.0, //
                4.0, 4.0, 1.0, 0.0, //
                4.0, 4.0, 0.0, 1.0,
            ],
        )
        .unwrap();
        let pool = MaxPool2;
        let (y, cache) = pool.forward(&x);
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[4.0, 8.0, 4.0, 1.0]);
        let dy = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let dx = pool.backward(&cache, &dy);
        // the all-equal window routes gradient to its first maximum only
        assert_eq!(dx.data().iter().sum::<f64>(), 4.0);
        assert_eq!(dx.data()[5], 1.0); // 4.0 at (1,1)
        assert_eq!(dx.data()[7], 1.0); // 8.0 at (1,3)
        assert_eq!(dx.data()[8], 1.0); // first 4.0 of the tied window
        assert_eq!(dx.data()[10], 1.0); // first 1.0 of the {1,0,0,1} window
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut rng = Rng::from_seed(8);
        let x = rand_tensor(&mut rng, &[3, 4]);
        let mut lin = Linear::new(4, 2, &mut rng);
        let loss_of = |lin: &Linear, x: &Tensor| {
            let (y, _) = lin.forward(x);
            y.data().iter().map(|v| v * v).sum::<f64>()
        };
        let (y, cache) = lin.forward(&x);
        let dx = lin.backward(&cache, &y.scale(2.0));
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let lp = loss_of(&lin, &xp);
            xp.data_mut()[i] -= 2.0 * h;
            let lm = loss_of(&lin, &xp);
            let fd = (lp - lm) / (2.0 * h);
            assert!((dx.data()[i] - fd).abs() < 1e-6, "dx[{i}]");
        }
        for i in 0..lin.weight.value.len() {
            let orig = lin.weight.value.data()[i];
            lin.weight.value.data_mut()[i] = orig + h;
            let lp = loss_of(&lin, &x);
            lin.weight.value.data_mut()[i] = orig - h;
            let lm = loss_of(&lin, &x);
            lin.weight.value.data_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((lin.weight.grad.data()[i] - fd).abs() < 1e-6, "dW[{i}]");
        }
    }

    #[test]
    fn relu_zeroes_negatives_and_their_gradients() {
        let x = Tensor::from_vec(&[4], vec![-1.0, 0.0, 0.5, 2.0]).unwrap();
        let relu = Relu;
        let (y, cache) = relu.forward(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 0.5, 2.0]);
        let dy = Tensor::filled(&[4], 1.0);
        let dx = relu.backward(&cache, &dy);
        assert_eq!(dx.data(), &[0.0, 0.0, 1.0, 1.0]);
    }
}
