//! Convolutional KAN layer: a standard convolution followed by a learnable
//! per-output-channel mixture of univariate spline activations.
//!
//! For output channel `i` with conv response `y_i`, the activation is
//! `z_i = sum_k w_k[i,k] * phi_{i,k}(y_i)` applied elementwise, where each
//! `phi_{i,k}(t) = w_b_act[i,k] * silu(t) + S_{i,k}(clamp(t))` has the same
//! SiLU-plus-spline form as a KAN edge. `K` defaults to 1. Segment
//! deactivation replaces `S_{i,k}` by its chord with the layer's
//! probability, one mask bit per `(channel, k)` pair per forward pass; the
//! SiLU path can be disabled entirely to obtain a pure-spline activation.
//!
//! With zero spline coefficients, `w_b_act = 1`, `K = 1`, `w_1 = 1`, the
//! layer is numerically identical to conv2d followed by SiLU.

use crate::kan::MaskMode;
use crate::nn::{silu, silu_d, Conv2d, Conv2dCache, Param};
use crate::rng::Rng;
use crate::spline::{Basis, BasisSpec};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct CkanLayer {
    pub conv: Conv2d,
    pub k_act: usize,
    pub basis: Basis,
    /// Spline coefficients `[out_ch, K, n_basis]`.
    pub c_act: Param,
    /// SiLU-path weights `[out_ch, K]`.
    pub w_b_act: Param,
    /// Mixture weights `[out_ch, K]`.
    pub w_k: Param,
    pub deactivation_p: f64,
    /// When false, phi_k drops the SiLU path (pure spline activation).
    pub silu_path: bool,
    gram: Vec<f64>,
    chord_wa: Vec<f64>,
    chord_wb: Vec<f64>,
    chord_nz: Vec<usize>,
}

/// Cache for the activation stage alone.
#[derive(Debug)]
pub struct CkanActCache {
    y: Tensor,
    mask: Option<Vec<bool>>,
    chords: Option<Vec<(f64, f64)>>,
}

/// Cache for the full conv + activation composition.
#[derive(Debug)]
pub struct CkanCache {
    conv: Conv2dCache,
    act: CkanActCache,
}

impl CkanLayer {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        k_act: usize,
        spec: BasisSpec,
        deactivation_p: f64,
        rng: &mut Rng,
    ) -> Self {
        assert!(k_act >= 1);
        assert!((0.0..=1.0).contains(&deactivation_p));
        let conv = Conv2d::new(in_ch, out_ch, kernel, stride, pad, rng);
        let basis = Basis::new(spec);
        let nb = basis.n_basis();
        let sd = 0.1 / (nb as f64).sqrt();
        let c_data: Vec<f64> = (0..out_ch * k_act * nb).map(|_| rng.normal() * sd).collect();
        let gram = basis.smoothness_gram();
        let (chord_wa, chord_wb) = basis.chord_weights();
        let chord_nz = (0..nb)
            .filter(|&t| chord_wa[t] != 0.0 || chord_wb[t] != 0.0)
            .collect();
        CkanLayer {
            conv,
            k_act,
            c_act: Param::new(Tensor::from_vec(&[out_ch, k_act, nb], c_data).expect("shape")),
            w_b_act: Param::new(Tensor::filled(&[out_ch, k_act], 1.0)),
            // mixture weights start at 1/K so the initial activation scale
            // is independent of K (and exactly 1 for the default K = 1)
            w_k: Param::new(Tensor::filled(&[out_ch, k_act], 1.0 / k_act as f64)),
            deactivation_p,
            silu_path: true,
            basis,
            gram,
            chord_wa,
            chord_wb,
            chord_nz,
        }
    }

    pub fn out_ch(&self) -> usize {
        self.conv.weight.value.shape()[0]
    }

    pub fn n_basis(&self) -> usize {
        self.basis.n_basis()
    }

    fn chord_of(&self, slot: usize) -> (f64, f64) {
        let nb = self.n_basis();
        let c = &self.c_act.value.data()[slot * nb..(slot + 1) * nb];
        let mut a = 0.0;
        let mut b = 0.0;
        for &t in &self.chord_nz {
            a += self.chord_wa[t] * c[t];
            b += self.chord_wb[t] * c[t];
        }
        (a, b)
    }

    /// Activation stage: `z_i = sum_k w_k[i,k] phi_{i,k}(y_i)` elementwise.
    /// Mask bits (one per `(channel, k)` slot, channel-major) are drawn only
    /// in `Sample` mode with `deactivation_p > 0`.
    pub fn activation_forward(
        &self,
        y: &Tensor,
        mode: MaskMode,
        mut rng: Option<&mut Rng>,
    ) -> (Tensor, CkanActCache) {
        assert_eq!(y.rank(), 4, "activation input must be [batch, ch, h, w]");
        let oc = self.out_ch();
        assert_eq!(y.shape()[1], oc, "channel mismatch");
        let slots = oc * self.k_act;
        let mask: Option<Vec<bool>> = match mode {
            MaskMode::ForceNone => None,
            MaskMode::ForceAll => Some(vec![true; slots]),
            MaskMode::Sample => {
                if self.deactivation_p == 0.0 {
                    None
                } else {
                    let rng = rng
                        .as_deref_mut()
                        .expect("sampling deactivation masks requires an rng");
                    Some(
                        (0..slots)
                            .map(|_| rng.bernoulli(self.deactivation_p))
                            .collect(),
                    )
                }
            }
        };
        let chords: Option<Vec<(f64, f64)>> = mask.as_ref().map(|bits| {
            (0..slots)
                .map(|s| if bits[s] { self.chord_of(s) } else { (0.0, 0.0) })
                .collect()
        });

        let (b, h, w) = (y.shape()[0], y.shape()[2], y.shape()[3]);
        let hw = h * w;
        let nb = self.n_basis();
        let k1 = self.basis.spec().order + 1;
        let cd = self.c_act.value.data();
        let wba = self.w_b_act.value.data();
        let wk = self.w_k.value.data();
        let mut z = Tensor::zeros(y.shape());
        let zd = z.data_mut();
        let yd = y.data();
        for bi in 0..b {
            for ci in 0..oc {
                let base = (bi * oc + ci) * hw;
                for p in 0..hw {
                    let t = yd[base + p];
                    let sv = if self.silu_path { silu(t) } else { 0.0 };
                    let tc = self.basis.clamp(t);
                    let (f, vals) = self.basis.eval(t);
                    let mut acc = 0.0;
                    for k in 0..self.k_act {
                        let slot = ci * self.k_act + k;
                        let g = match (&mask, &chords) {
                            (Some(bits), Some(ch)) if bits[slot] => ch[slot].0 * tc + ch[slot].1,
                            _ => {
                                let ce = &cd[slot * nb + f..slot * nb + f + k1];
                                vals.iter().zip(ce).map(|(&v, &c)| v * c).sum()
                            }
                        };
                        acc += wk[slot] * (wba[slot] * sv + g);
                    }
                    zd[base + p] = acc;
                }
            }
        }
        (
            z,
            CkanActCache {
                y: y.clone(),
                mask,
                chords,
            },
        )
    }

    /// Backward through the activation stage; accumulates into the
    /// activation parameters and returns `dL/dy`.
    pub fn activation_backward(&mut self, cache: &CkanActCache, dz: &Tensor) -> Tensor {
        assert_eq!(dz.shape(), cache.y.shape(), "stale cache");
        let oc = self.out_ch();
        let (b, h, w) = (cache.y.shape()[0], cache.y.shape()[2], cache.y.shape()[3]);
        let hw = h * w;
        let nb = self.n_basis();
        let k1 = self.basis.spec().order + 1;
        let cd = self.c_act.value.data().to_vec();
        let wba = self.w_b_act.value.data().to_vec();
        let wk = self.w_k.value.data().to_vec();

        let mut dy = Tensor::zeros(cache.y.shape());
        let dyd = dy.data_mut();
        let dc = self.c_act.grad.data_mut();
        let dwba = self.w_b_act.grad.data_mut();
        let dwk = self.w_k.grad.data_mut();
        let yd = cache.y.data();
        let dzd = dz.data();

        for bi in 0..b {
            for ci in 0..oc {
                let base = (bi * oc + ci) * hw;
                for p in 0..hw {
                    let up = dzd[base + p];
                    if up == 0.0 {
                        continue;
                    }
                    let t = yd[base + p];
                    let (sv, sd) = if self.silu_path {
                        (silu(t), silu_d(t))
                    } else {
                        (0.0, 0.0)
                    };
                    let tc = self.basis.clamp(t);
                    let in_dom = t >= self.basis.x_min() && t <= self.basis.x_max();
                    let gate = if in_dom { 1.0 } else { 0.0 };
                    let (f, vals, d1, _) = self.basis.eval_derivs(t);
                    let mut acc_dt = 0.0;
                    for k in 0..self.k_act {
                        let slot = ci * self.k_act + k;
                        let masked = matches!(&cache.mask, Some(bits) if bits[slot]);
                        let (g, dg_dt) = if masked {
                            let (a, bb) = cache.chords.as_ref().expect("mask implies chords")[slot];
                            let coef = up * wk[slot];
                            for &tt in &self.chord_nz {
                                dc[slot * nb + tt] +=
                                    coef * (self.chord_wa[tt] * tc + self.chord_wb[tt]);
                            }
                            (a * tc + bb, a * gate)
                        } else {
                            let ce = &cd[slot * nb + f..slot * nb + f + k1];
                            let s: f64 = vals.iter().zip(ce).map(|(&v, &c)| v * c).sum();
                            let s1: f64 = d1.iter().zip(ce).map(|(&v, &c)| v * c).sum();
                            let coef = up * wk[slot];
                            for (r, &v) in vals.iter().enumerate() {
                                dc[slot * nb + f + r] += coef * v;
                            }
                            (s, s1 * gate)
                        };
                        dwk[slot] += up * (wba[slot] * sv + g);
                        if self.silu_path {
                            dwba[slot] += up * wk[slot] * sv;
                        }
                        acc_dt += up * wk[slot] * (wba[slot] * sd + dg_dt);
                    }
                    dyd[base + p] = acc_dt;
                }
            }
        }
        dy
    }

    /// Full layer: convolution then activation.
    pub fn forward_train(
        &self,
        x: &Tensor,
        mode: MaskMode,
        rng: Option<&mut Rng>,
    ) -> (Tensor, CkanCache) {
        let (y, conv_cache) = self.conv.forward(x);
        let (z, act_cache) = self.activation_forward(&y, mode, rng);
        (
            z,
            CkanCache {
                conv: conv_cache,
                act: act_cache,
            },
        )
    }

    pub fn forward_infer(&self, x: &Tensor) -> Tensor {
        let (z, _) = self.forward_train(x, MaskMode::ForceNone, None);
        z
    }

    pub fn backward(&mut self, cache: &CkanCache, dz: &Tensor) -> Tensor {
        let dy = self.activation_backward(&cache.act, dz);
        self.conv.backward(&cache.conv, &dy)
    }

    /// Curvature energy of the activation splines, `sum c^T M c` over all
    /// `(channel, k)` slots.
    pub fn smoothness_value(&self) -> f64 {
        let nb = self.n_basis();
        let cd = self.c_act.value.data();
        let mut total = 0.0;
        for s in 0..self.out_ch() * self.k_act {
            let c = &cd[s * nb..(s + 1) * nb];
            for i in 0..nb {
                let row = &self.gram[i * nb..(i + 1) * nb];
                let mc: f64 = row.iter().zip(c).map(|(&m, &cv)| m * cv).sum();
                total += c[i] * mc;
            }
        }
        total
    }

    pub fn add_smoothness_grad(&mut self, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        let nb = self.n_basis();
        let cd = self.c_act.value.data().to_vec();
        let dc = self.c_act.grad.data_mut();
        for s in 0..cd.len() / nb {
            let c = &cd[s * nb..(s + 1) * nb];
            for i in 0..nb {
                let row = &self.gram[i * nb..(i + 1) * nb];
                let mc: f64 = row.iter().zip(c).map(|(&m, &cv)| m * cv).sum();
                dc[s * nb + i] += 2.0 * lambda * mc;
            }
        }
    }
}
