//! The KAN layer: one learnable univariate function per (input, output)
//! edge, summed at each output node.
//!
//! Each edge function is `phi(t) = w_b * silu(t) + w_s * G(t)` where `G` is
//! normally the edge's B-spline `S(t) = sum_t' c[t'] B_t'(clamp(t))`. During
//! training, each edge's spline term is independently replaced, with
//! probability `deactivation_p`, by the straight line through the spline's
//! endpoint values (its chord). The SiLU path is never deactivated, and
//! inference never applies masks and never consumes randomness.
//!
//! Gradients are exact for the realized forward function: on a deactivated
//! edge they flow into the coefficients through the chord's dependence on
//! the endpoint values `S(x_min)` and `S(x_max)`.

use crate::nn::{silu, silu_d, Param};
use crate::rng::Rng;
use crate::spline::{Basis, BasisSpec};
use crate::tensor::Tensor;

/// How a training-mode forward pass decides the per-edge deactivation mask.
/// `Sample` draws Bernoulli bits (the normal path); the forced variants are
/// for tests, gradient checks, and the p=0/p=1 limit arguments, and consume
/// no randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    Sample,
    ForceNone,
    ForceAll,
}

#[derive(Debug, Clone)]
pub struct KanLayer {
    pub d_in: usize,
    pub d_out: usize,
    pub basis: Basis,
    /// Spline coefficients `[d_in, d_out, n_basis]`.
    pub c: Param,
    /// SiLU-path weights `[d_in, d_out]`.
    pub w_b: Param,
    /// Spline-path weights `[d_in, d_out]`.
    pub w_s: Param,
    pub deactivation_p: f64,
    /// Second-derivative inner-product matrix of the shared basis.
    gram: Vec<f64>,
    /// Chord slope/intercept as linear forms in the coefficients.
    chord_wa: Vec<f64>,
    chord_wb: Vec<f64>,
    /// Indices where either chord weight is nonzero (endpoint-local).
    chord_nz: Vec<usize>,
}

/// Everything `backward` needs from the matching forward call.
#[derive(Debug)]
pub struct KanCache {
    batch: usize,
    xc: Vec<f64>,
    in_domain: Vec<bool>,
    s_val: Vec<f64>,
    s_der: Vec<f64>,
    first: Vec<u32>,
    bvals: Vec<f64>,
    mask: Option<Vec<bool>>,
    /// Per-edge chord (slope, intercept); only present alongside a mask.
    chords: Option<Vec<(f64, f64)>>,
}

impl KanLayer {
    /// Initialization: both path weights start at 1 (so each edge begins as
    /// SiLU plus a small spline perturbation) and coefficients are drawn
    /// from `N(0, 0.1 / sqrt(n_basis))`.
    pub fn new(
        d_in: usize,
        d_out: usize,
        spec: BasisSpec,
        deactivation_p: f64,
        rng: &mut Rng,
    ) -> Self {
        assert!((0.0..=1.0).contains(&deactivation_p));
        let basis = Basis::new(spec);
        let nb = basis.n_basis();
        let sd = 0.1 / (nb as f64).sqrt();
        let c_data: Vec<f64> = (0..d_in * d_out * nb).map(|_| rng.normal() * sd).collect();
        let gram = basis.smoothness_gram();
        let (chord_wa, chord_wb) = basis.chord_weights();
        let chord_nz = (0..nb)
            .filter(|&t| chord_wa[t] != 0.0 || chord_wb[t] != 0.0)
            .collect();
        KanLayer {
            d_in,
            d_out,
            c: Param::new(Tensor::from_vec(&[d_in, d_out, nb], c_data).expect("shape")),
            w_b: Param::new(Tensor::filled(&[d_in, d_out], 1.0)),
            w_s: Param::new(Tensor::filled(&[d_in, d_out], 1.0)),
            deactivation_p,
            basis,
            gram,
            chord_wa,
            chord_wb,
            chord_nz,
        }
    }

    pub fn n_basis(&self) -> usize {
        self.basis.n_basis()
    }

    /// Trainable scalar count: `d_in * d_out * (n_basis + 2)`.
    pub fn param_count(&self) -> usize {
        self.d_in * self.d_out * (self.n_basis() + 2)
    }

    /// Chord (slope, intercept) of edge `e`'s spline.
    fn chord_of(&self, e: usize) -> (f64, f64) {
        let nb = self.n_basis();
        let c = &self.c.value.data()[e * nb..(e + 1) * nb];
        let mut a = 0.0;
        let mut b = 0.0;
        for &t in &self.chord_nz {
            a += self.chord_wa[t] * c[t];
            b += self.chord_wb[t] * c[t];
        }
        (a, b)
    }

    /// Training-mode forward. `rng` is only touched in `Sample` mode with
    /// `deactivation_p > 0`, where it draws exactly `d_in * d_out` bits in
    /// edge order (input-major); so p = 0 training matches inference bit for
    /// bit and leaves the stream untouched.
    pub fn forward_train(
        &self,
        x: &Tensor,
        mode: MaskMode,
        mut rng: Option<&mut Rng>,
    ) -> (Tensor, KanCache) {
        assert_eq!(x.rank(), 2, "kan input must be [batch, d_in]");
        assert_eq!(x.shape()[1], self.d_in, "kan input width mismatch");
        let batch = x.shape()[0];
        let edges = self.d_in * self.d_out;

        let mask: Option<Vec<bool>> = match mode {
            MaskMode::ForceNone => None,
            MaskMode::ForceAll => Some(vec![true; edges]),
            MaskMode::Sample => {
                if self.deactivation_p == 0.0 {
                    None
                } else {
                    let rng = rng
                        .as_deref_mut()
                        .expect("sampling deactivation masks requires an rng");
                    Some(
                        (0..edges)
                            .map(|_| rng.bernoulli(self.deactivation_p))
                            .collect(),
                    )
                }
            }
        };
        let chords: Option<Vec<(f64, f64)>> = mask.as_ref().map(|bits| {
            (0..edges)
                .map(|e| if bits[e] { self.chord_of(e) } else { (0.0, 0.0) })
                .collect()
        });

        let k1 = self.basis.spec().order + 1;
        let n = batch * self.d_in;
        let mut xc = vec![0.0; n];
        let mut in_domain = vec![false; n];
        let mut s_val = vec![0.0; n];
        let mut s_der = vec![0.0; n];
        let mut first = vec![0u32; n];
        let mut bvals = vec![0.0; n * k1];
        for (idx, &t) in x.data().iter().enumerate() {
            s_val[idx] = silu(t);
            s_der[idx] = silu_d(t);
            xc[idx] = self.basis.clamp(t);
            in_domain[idx] = t >= self.basis.x_min() && t <= self.basis.x_max();
            let (f, vals) = self.basis.eval(t);
            first[idx] = f as u32;
            bvals[idx * k1..idx * k1 + k1].copy_from_slice(&vals);
        }

        let nb = self.n_basis();
        let cd = self.c.value.data();
        let wb = self.w_b.value.data();
        let ws = self.w_s.value.data();
        let mut y = Tensor::zeros(&[batch, self.d_out]);
        let yd = y.data_mut();
        for bi in 0..batch {
            for i in 0..self.d_in {
                let idx = bi * self.d_in + i;
                let bv = &bvals[idx * k1..idx * k1 + k1];
                let f = first[idx] as usize;
                let sv = s_val[idx];
                let tc = xc[idx];
                for j in 0..self.d_out {
                    let e = i * self.d_out + j;
                    let g = match (&mask, &chords) {
                        (Some(bits), Some(ch)) if bits[e] => ch[e].0 * tc + ch[e].1,
                        _ => {
                            let ce = &cd[e * nb + f..e * nb + f + k1];
                            bv.iter().zip(ce).map(|(&v, &c)| v * c).sum()
                        }
                    };
                    yd[bi * self.d_out + j] += wb[e] * sv + ws[e] * g;
                }
            }
        }
        (
            y,
            KanCache {
                batch,
                xc,
                in_domain,
                s_val,
                s_der,
                first,
                bvals,
                mask,
                chords,
            },
        )
    }

    /// Inference forward: deterministic, mask-free, no rng.
    pub fn forward_infer(&self, x: &Tensor) -> Tensor {
        let (y, _) = self.forward_train(x, MaskMode::ForceNone, None);
        y
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &KanCache, dy: &Tensor) -> Tensor {
        assert_eq!(dy.shape(), &[cache.batch, self.d_out], "stale cache");
        let nb = self.n_basis();
        let k1 = self.basis.spec().order + 1;
        let cd = self.c.value.data().to_vec();
        let wb = self.w_b.value.data().to_vec();
        let ws = self.w_s.value.data().to_vec();
        let dyd = dy.data();

        let mut dx = Tensor::zeros(&[cache.batch, self.d_in]);
        let dxd = dx.data_mut();
        let dc = self.c.grad.data_mut();
        let dwb = self.w_b.grad.data_mut();
        let dws = self.w_s.grad.data_mut();

        for bi in 0..cache.batch {
            for i in 0..self.d_in {
                let idx = bi * self.d_in + i;
                let bv = &cache.bvals[idx * k1..idx * k1 + k1];
                let f = cache.first[idx] as usize;
                let tc = cache.xc[idx];
                let gate = if cache.in_domain[idx] { 1.0 } else { 0.0 };
                // derivative values only needed when some edge is unmasked;
                // recomputed here instead of cached to keep forward lean
                let mut d1: Option<Vec<f64>> = None;
                let mut acc = 0.0;
                for j in 0..self.d_out {
                    let e = i * self.d_out + j;
                    let up = dyd[bi * self.d_out + j];
                    dwb[e] += up * cache.s_val[idx];
                    let masked = matches!(&cache.mask, Some(bits) if bits[e]);
                    if masked {
                        let (a, b) = cache.chords.as_ref().expect("mask implies chords")[e];
                        dws[e] += up * (a * tc + b);
                        let coef = up * ws[e];
                        for &t in &self.chord_nz {
                            dc[e * nb + t] += coef * (self.chord_wa[t] * tc + self.chord_wb[t]);
                        }
                        acc += up * (wb[e] * cache.s_der[idx] + ws[e] * a * gate);
                    } else {
                        let ce = &cd[e * nb + f..e * nb + f + k1];
                        let sval: f64 = bv.iter().zip(ce).map(|(&v, &c)| v * c).sum();
                        dws[e] += up * sval;
                        let coef = up * ws[e];
                        for (r, &v) in bv.iter().enumerate() {
                            dc[e * nb + f + r] += coef * v;
                        }
                        let d1 = d1.get_or_insert_with(|| {
                            let (_, _, d1v, _) = self.basis.eval_derivs(tc);
                            d1v
                        });
                        let sd1: f64 = d1.iter().zip(ce).map(|(&v, &c)| v * c).sum();
                        acc += up * (wb[e] * cache.s_der[idx] + ws[e] * sd1 * gate);
                    }
                }
                dxd[idx] = acc;
            }
        }
        dx
    }

    /// Unweighted curvature energy `sum over edges of c^T M c`; the loss
    /// contribution is this value times the smoothness weight.
    pub fn smoothness_value(&self) -> f64 {
        let nb = self.n_basis();
        let cd = self.c.value.data();
        let mut total = 0.0;
        for e in 0..self.d_in * self.d_out {
            let c = &cd[e * nb..(e + 1) * nb];
            for i in 0..nb {
                let row = &self.gram[i * nb..(i + 1) * nb];
                let mc: f64 = row.iter().zip(c).map(|(&m, &cv)| m * cv).sum();
                total += c[i] * mc;
            }
        }
        total
    }

    /// Adds `d(lambda * sum c^T M c)/dc = 2 lambda M c` per edge.
    pub fn add_smoothness_grad(&mut self, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        let nb = self.n_basis();
        let cd = self.c.value.data().to_vec();
        let dc = self.c.grad.data_mut();
        for e in 0..self.d_in * self.d_out {
            let c = &cd[e * nb..(e + 1) * nb];
            for i in 0..nb {
                let row = &self.gram[i * nb..(i + 1) * nb];
                let mc: f64 = row.iter().zip(c).map(|(&m, &cv)| m * cv).sum();
                dc[e * nb + i] += 2.0 * lambda * mc;
            }
        }
    }

    /// `lambda * sum |theta|` over this layer's parameters (c, w_b, w_s).
    pub fn l1_value(&self, lambda: f64) -> f64 {
        assert!(lambda >= 0.0, "l1 weight must be nonnegative");
        let sum: f64 = self
            .c
            .value
            .data()
            .iter()
            .chain(self.w_b.value.data())
            .chain(self.w_s.value.data())
            .map(|v| v.abs())
            .sum();
        lambda * sum
    }

    /// Subgradient of [`l1_value`]; exactly-zero parameters get 0.
    ///
    /// [`l1_value`]: KanLayer::l1_value
    pub fn add_l1_grad(&mut self, lambda: f64) {
        assert!(lambda >= 0.0);
        if lambda == 0.0 {
            return;
        }
        for (value, grad) in [
            (&self.c.value, &mut self.c.grad),
            (&self.w_b.value, &mut self.w_b.grad),
            (&self.w_s.value, &mut self.w_s.grad),
        ] {
            for (g, &v) in grad.data_mut().iter_mut().zip(value.data()) {
                *g += lambda * v.signum() * if v == 0.0 { 0.0 } else { 1.0 };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_layer(d_in: usize, d_out: usize, p: f64, seed: u64) -> KanLayer {
        let mut rng = Rng::from_seed(seed);
        KanLayer::new(d_in, d_out, BasisSpec::default(), p, &mut rng)
    }

    fn rand_input(rng: &mut Rng, batch: usize, d: usize, lo: f64, hi: f64) -> Tensor {
        let data = (0..batch * d).map(|_| rng.uniform_in(lo, hi)).collect();
        Tensor::from_vec(&[batch, d], data).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut layer = test_layer(3, 2, 0.0, 1);
        layer.w_b.value.data_mut().fill(0.0);
        layer.w_s.value.data_mut().fill(0.0);
        let x = rand_input(&mut Rng::from_seed(2), 4, 3, -2.0, 2.0);
        let y = layer.forward_infer(&x);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn silu_only_edge_is_silu() {
        let mut layer = test_layer(1, 1, 0.0, 3);
        layer.w_s.value.data_mut().fill(0.0);
        let x = rand_input(&mut Rng::from_seed(4), 8, 1, -3.0, 3.0);
        let y = layer.forward_infer(&x);
        for (o, &i) in y.data().iter().zip(x.data()) {
            assert!((o - silu(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_splines_sum_inputs() {
        // coefficients at the Greville points reproduce f(t) = t, so with
        // the silu path off the layer computes x1 + x2
        let mut layer = test_layer(2, 1, 0.0, 5);
        layer.w_b.value.data_mut().fill(0.0);
        let greville = layer.basis.greville();
        let nb = layer.n_basis();
        for e in 0..2 {
            layer.c.value.data_mut()[e * nb..(e + 1) * nb].copy_from_slice(&greville);
        }
        let x = rand_input(&mut Rng::from_seed(6), 16, 2, -1.0, 1.0);
        let y = layer.forward_infer(&x);
        for (row, &o) in y.data().iter().enumerate() {
            let expect = x.data()[row * 2] + x.data()[row * 2 + 1];
            assert!((o - expect).abs() < 1e-9, "row {row}: {o} vs {expect}");
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut layer = test_layer(3, 2, 0.0, 7);
        let x = rand_input(&mut Rng::from_seed(8), 4, 3, -1.0, 1.0);
        let (_, cache) = layer.forward_train(&x, MaskMode::Sample, None);
        let dx = layer.backward(&cache, &Tensor::zeros(&[4, 2]));
        assert!(dx.data().iter().all(|&v| v == 0.0));
        assert!(layer.c.grad.data().iter().all(|&v| v == 0.0));
        assert!(layer.w_b.grad.data().iter().all(|&v| v == 0.0));
        assert!(layer.w_s.grad.data().iter().all(|&v| v == 0.0));
    }

    /// Shared finite-difference harness: checks all parameter groups and the
    /// input of a 3->4 layer against central differences under a fixed mask
    /// mode. Inputs stay strictly inside the spline domain so the loss is
    /// smooth at the probe points.
    fn fd_check(mode: MaskMode) {
        let mut layer = test_layer(3, 4, 0.0, 11);
        let x = rand_input(&mut Rng::from_seed(12), 5, 3, -0.9, 0.9);
        let loss_of = |layer: &KanLayer, x: &Tensor| -> f64 {
            let (y, _) = layer.forward_train(x, mode, None);
            y.data().iter().map(|v| v * v).sum()
        };
        let (y, cache) = layer.forward_train(&x, mode, None);
        let dy = y.scale(2.0);
        let dx = layer.backward(&cache, &dy);

        let h = 1e-5;
        let tol = 1e-6;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1.0);

        let mut xp = x.clone();
        for i in 0..x.len() {
            let orig = xp.data()[i];
            xp.data_mut()[i] = orig + h;
            let lp = loss_of(&layer, &xp);
            xp.data_mut()[i] = orig - h;
            let lm = loss_of(&layer, &xp);
            xp.data_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!(rel(dx.data()[i], fd) < tol, "dx[{i}]: {} vs {fd}", dx.data()[i]);
        }
        let analytic: Vec<Tensor> = vec![
            layer.c.grad.clone(),
            layer.w_b.grad.clone(),
            layer.w_s.grad.clone(),
        ];
        let read = |layer: &KanLayer, pi: usize, i: usize| match pi {
            0 => layer.c.value.data()[i],
            1 => layer.w_b.value.data()[i],
            _ => layer.w_s.value.data()[i],
        };
        let write = |layer: &mut KanLayer, pi: usize, i: usize, v: f64| {
            let t = match pi {
                0 => &mut layer.c.value,
                1 => &mut layer.w_b.value,
                _ => &mut layer.w_s.value,
            };
            t.data_mut()[i] = v;
        };
        for (pi, name) in ["c", "w_b", "w_s"].iter().enumerate() {
            for i in 0..analytic[pi].len() {
                let orig = read(&layer, pi, i);
                write(&mut layer, pi, i, orig + h);
                let lp = loss_of(&layer, &x);
                write(&mut layer, pi, i, orig - h);
                let lm = loss_of(&layer, &x);
                write(&mut layer, pi, i, orig);
                let fd = (lp - lm) / (2.0 * h);
                let a = analytic[pi].data()[i];
                assert!(rel(a, fd) < tol, "{name}[{i}]: {a} vs {fd}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_unmasked() {
        fd_check(MaskMode::ForceNone);
    }

    #[test]
    fn gradients_match_finite_differences_fully_masked() {
        fd_check(MaskMode::ForceAll);
    }

    #[test]
    fn p_zero_training_equals_inference_and_draws_nothing() {
        let layer = test_layer(4, 3, 0.0, 13);
        let x = rand_input(&mut Rng::from_seed(14), 6, 4, -2.0, 2.0);
        let mut rng = Rng::from_seed(99);
        let before = rng.draw_count();
        let (y_train, _) = layer.forward_train(&x, MaskMode::Sample, Some(&mut rng));
        assert_eq!(rng.draw_count(), before);
        let y_inf = layer.forward_infer(&x);
        assert_eq!(y_train, y_inf);
    }

    #[test]
    fn sampling_draws_one_bit_per_edge() {
        let layer = test_layer(4, 3, 0.3, 15);
        let x = rand_input(&mut Rng::from_seed(16), 2, 4, -1.0, 1.0);
        let mut rng = Rng::from_seed(17);
        let before = rng.draw_count();
        let _ = layer.forward_train(&x, MaskMode::Sample, Some(&mut rng));
        assert_eq!(rng.draw_count(), before + (4 * 3) as u64);
    }

    #[test]
    fn p_one_equals_chord_forward() {
        let layer = test_layer(3, 2, 1.0, 18);
        let x = rand_input(&mut Rng::from_seed(19), 5, 3, -2.0, 2.0);
        let mut rng = Rng::from_seed(20);
        let (y_sampled, _) = layer.forward_train(&x, MaskMode::Sample, Some(&mut rng));
        let (y_forced, _) = layer.forward_train(&x, MaskMode::ForceAll, None);
        assert_eq!(y_sampled, y_forced);

        // independent chord reference: line through the spline's endpoint
        // values, evaluated at the clamped input
        let nb = layer.n_basis();
        for bi in 0..5 {
            for j in 0..2 {
                let mut expect = 0.0;
                for i in 0..3 {
                    let t = x.data()[bi * 3 + i];
                    let tc = layer.basis.clamp(t);
                    let e = i * 2 + j;
                    let ce = &layer.c.value.data()[e * nb..(e + 1) * nb];
                    let s_lo = layer.basis.spline_value(ce, layer.basis.x_min());
                    let s_hi = layer.basis.spline_value(ce, layer.basis.x_max());
                    let a = (s_hi - s_lo) / (layer.basis.x_max() - layer.basis.x_min());
                    let b = s_lo - a * layer.basis.x_min();
                    expect += layer.w_b.value.data()[e] * silu(t)
                        + layer.w_s.value.data()[e] * (a * tc + b);
                }
                let got = y_forced.data()[bi * 2 + j];
                assert!((got - expect).abs() < 1e-12, "({bi},{j}): {got} vs {expect}");
            }
        }
    }

    #[test]
    fn affine_splines_are_deactivation_fixed_points() {
        // an affine spline equals its own chord, so masking changes nothing
        let mut layer = test_layer(2, 2, 1.0, 21);
        let greville = layer.basis.greville();
        let nb = layer.n_basis();
        for e in 0..4 {
            // c reproducing 0.7 t - 0.2 (affine in the Greville coordinates)
            for t in 0..nb {
                layer.c.value.data_mut()[e * nb + t] = 0.7 * greville[t] - 0.2;
            }
        }
        let x = rand_input(&mut Rng::from_seed(22), 6, 2, -1.0, 1.0);
        let (masked, _) = layer.forward_train(&x, MaskMode::ForceAll, None);
        let open = layer.forward_infer(&x);
        for (a, b) in masked.data().iter().zip(open.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn inference_is_deterministic() {
        let layer = test_layer(3, 3, 0.5, 23);
        let x = rand_input(&mut Rng::from_seed(24), 4, 3, -1.0, 1.0);
        assert_eq!(layer.forward_infer(&x), layer.forward_infer(&x));
    }

    #[test]
    fn smoothness_energy_and_gradient() {
        let layer = test_layer(2, 3, 0.0, 25);
        // reference: per-edge quadratic form against the basis gram matrix
        let nb = layer.n_basis();
        let gram = layer.basis.smoothness_gram();
        let mut expect = 0.0;
        for e in 0..6 {
            let c = &layer.c.value.data()[e * nb..(e + 1) * nb];
            for i in 0..nb {
                for j in 0..nb {
                    expect += c[i] * gram[i * nb + j] * c[j];
                }
            }
        }
        let got = layer.smoothness_value();
        assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0));

        // gradient of lambda * value vs finite differences
        let lambda = 0.37;
        let mut layer = layer;
        layer.add_smoothness_grad(lambda);
        let h = 1e-6;
        for i in (0..layer.c.value.len()).step_by(3) {
            let orig = layer.c.value.data()[i];
            layer.c.value.data_mut()[i] = orig + h;
            let lp = lambda * layer.smoothness_value();
            layer.c.value.data_mut()[i] = orig - h;
            let lm = lambda * layer.smoothness_value();
            layer.c.value.data_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let a = layer.c.grad.data()[i];
            assert!(
                (a - fd).abs() / a.abs().max(fd.abs()).max(1.0) < 1e-7,
                "dc[{i}]: {a} vs {fd}"
            );
        }
    }

    #[test]
    fn affine_edges_have_zero_smoothness() {
        let mut layer = test_layer(2, 2, 0.0, 26);
        let greville = layer.basis.greville();
        let nb = layer.n_basis();
        for e in 0..4 {
            for t in 0..nb {
                layer.c.value.data_mut()[e * nb + t] = 2.0 * greville[t] + 1.0;
            }
        }
        assert!(layer.smoothness_value().abs() < 1e-9);
    }

    #[test]
    fn l1_hand_values_and_subgradient() {
        let mut layer = test_layer(5, 2, 0.0, 27);
        assert_eq!(layer.l1_value(0.0), 0.0);

        // 100 parameters all equal to 1 with weight 0.001 sums to 0.1:
        // 5*2 = 10 edges, n_basis = 8, so c alone has 80 entries; set c and
        // both 10-entry weight grids to 1 for exactly 100 ones.
        layer.c.value.data_mut().fill(1.0);
        layer.w_b.value.data_mut().fill(1.0);
        layer.w_s.value.data_mut().fill(1.0);
        assert_eq!(layer.param_count(), 100);
        assert!((layer.l1_value(0.001) - 0.1).abs() < 1e-15);

        layer.c.value.data_mut()[0] = 0.0;
        layer.c.value.data_mut()[1] = -2.0;
        layer.c.zero_grad();
        layer.w_b.zero_grad();
        layer.w_s.zero_grad();
        layer.add_l1_grad(0.5);
        assert_eq!(layer.c.grad.data()[0], 0.0); // subgradient at 0
        assert_eq!(layer.c.grad.data()[1], -0.5);
        assert_eq!(layer.c.grad.data()[2], 0.5);
    }

    #[test]
    #[should_panic(expected = "nonnegative")]
    fn l1_rejects_negative_weight() {
        test_layer(1, 1, 0.0, 28).l1_value(-1.0);
    }

    #[test]
    fn masked_fraction_tracks_probability() {
        let layer = test_layer(20, 20, 0.25, 29);
        let x = rand_input(&mut Rng::from_seed(30), 1, 20, -1.0, 1.0);
        let mut rng = Rng::from_seed(31);
        let mut masked = 0usize;
        let reps = 50;
        for _ in 0..reps {
            let (_, cache) = layer.forward_train(&x, MaskMode::Sample, Some(&mut rng));
            masked += cache.mask.as_ref().unwrap().iter().filter(|&&b| b).count();
        }
        let freq = masked as f64 / (reps * 400) as f64;
        assert!((freq - 0.25).abs() < 0.02, "freq {freq}");
    }
}
