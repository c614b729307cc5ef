//! A convolution whose per-channel activation is a learnable mixture of K
//! spline functions on top of a SiLU base. With the spline coefficients
//! zeroed the layer degenerates to an ordinary conv + SiLU, which makes
//! the spline part an exactly removable add-on.
//!
//! Run with: cargo run --example conv_spline_activations

use kanlab::kan::MaskMode;
use kanlab::ckan::CkanLayer;
use kanlab::nn::{silu, Conv2d};
use kanlab::{BasisSpec, Rng, Tensor};

fn main() {
    let spec = BasisSpec {
        grid_size: 5,
        order: 3,
        x_min: -1.0,
        x_max: 1.0,
    };
    let mut rng = Rng::from_seed(3);
    // 3 input channels -> 4 output channels, 3x3 kernel, K = 2 splines per
    // channel.
    let mut layer = CkanLayer::new(3, 4, 3, 1, 1, 2, spec, 0.0, &mut rng);

    let mut xrng = Rng::from_seed(99);
    let x = Tensor::from_vec(
        &[2, 3, 8, 8],
        (0..2 * 3 * 8 * 8).map(|_| xrng.uniform_in(-1.0, 1.0)).collect(),
    )
    .unwrap();

    let y = layer.forward_infer(&x);
    println!("input  {:?}", x.shape());
    println!("output {:?} (same spatial size: stride 1, pad 1)", y.shape());
    println!(
        "spline slots: {} channels x K={} mixtures x {} coefficients",
        layer.out_ch(),
        layer.k_act,
        layer.n_basis()
    );

    // Zero the spline coefficients and set the base-path weight to 1: the
    // activation reduces to plain SiLU of the conv response.
    layer.c_act.value.data_mut().fill(0.0);
    layer.w_b_act.value.data_mut().fill(1.0);
    let degenerate = layer.forward_infer(&x);

    // Rebuild the same conv from the layer's own weights and compare.
    let mut tmp = Rng::from_seed(0);
    let mut conv = Conv2d::new(3, 4, 3, 1, 1, &mut tmp);
    conv.weight.value = layer.conv.weight.value.clone();
    conv.bias.value = layer.conv.bias.value.clone();
    let (z, _) = conv.forward(&x);
    let reference = z.map(silu);
    // w_k sums to 1 across the K mixture slots, so the SiLU term survives
    // with unit weight.
    let max_diff = degenerate
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max |zeroed-spline layer - conv+silu| = {max_diff:.2e}");

    // Segment deactivation also applies per (channel, mixture) slot.
    let mut mask_rng = Rng::derive(1, &["demo", "mask"]);
    let mut noisy = CkanLayer::new(3, 4, 3, 1, 1, 2, spec, 0.5, &mut rng);
    noisy.deactivation_p = 0.5;
    let (a, _) = noisy.forward_train(&x, MaskMode::Sample, Some(&mut mask_rng));
    let (b, _) = noisy.forward_train(&x, MaskMode::Sample, Some(&mut mask_rng));
    let diff = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    println!("two masked forwards differ by up to {diff:.3} at p = 0.5");
}
